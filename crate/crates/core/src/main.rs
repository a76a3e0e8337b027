use std::io;

fn main() {
    let code = julia_conformal::cli::run(std::env::args_os(), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
