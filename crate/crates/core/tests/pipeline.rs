//! End-to-end properties of the cover, lattice, selection and ensemble
//! stages on the map z^2 + 1/8.

use julia_conformal::ergodic::{
    birkhoff_average, mean_and_sigma, reference_integral, run_experiment, ExperimentConfig, TestFunction,
};
use julia_conformal::selector::{select_pseudorandom, ObjectiveForm, ObjectiveParams};
use julia_conformal::transfer::DensityCache;
use julia_conformal::{
    borel_centers, density_cache, find_repelling_fixed_point, make_lattice, BorelCover, ComplexPoint, QuadraticMap,
};

const H: f64 = 1.00735;

fn eighth_setup(m: u32) -> (QuadraticMap, BorelCover, DensityCache) {
    let t = QuadraticMap::eighth();
    let cover = borel_centers(&t, find_repelling_fixed_point(&t).unwrap(), m).unwrap();
    let cache = density_cache(&cover, H, 1e-4).unwrap();
    (t, cover, cache)
}

/// Line-by-line port of the MATLAB `opteval`, 1-based column arithmetic and
/// all. `s[i][c - 1]` is column `c` of row `i`.
fn opteval_transcription(
    n: usize,
    s: &[Vec<ComplexPoint>],
    zstar: &[ComplexPoint],
    fzstar: &[f64],
    ftzstar: &[f64],
    m: u32,
    h: f64,
) -> (usize, f64) {
    let ell = s.len();
    let big_n = s[0].len() - 1;
    let delta_a = 2f64.powi(-(m as i32) + 1);
    let col = |row: &Vec<ComplexPoint>, c: usize| row[c - 1];
    let mut asum = vec![0.0; ell];
    for j in 0..zstar.len() {
        for i in 0..ell {
            let mut rhs = 0.0;
            for c in (big_n - n)..=big_n {
                let z = col(&s[i], c);
                let sp = if (z - zstar[j]).norm() < delta_a { 1.0 } else { 0.0 };
                rhs += (sp * z.norm()).powf(h);
            }
            let rhs = 2.0 * rhs;
            let mut lhs = 0.0;
            for c in (big_n + 1 - n)..=(big_n + 1) {
                let z = col(&s[i], c);
                lhs += f64::from(((z - zstar[j]).re < delta_a) as u8) + f64::from(((-z - zstar[j]).re < delta_a) as u8);
            }
            let r = lhs / ftzstar[j] - rhs / fzstar[j];
            asum[i] += r * r;
        }
    }
    let scaled: Vec<f64> = asum.iter().map(|a| a / big_n as f64).collect();
    let mut best = 0;
    for i in 1..ell {
        if scaled[i] < scaled[best] {
            best = i;
        }
    }
    (best, scaled[best])
}

#[test]
fn appendix_form_matches_opteval_transcription() {
    let (_, cover, cache) = eighth_setup(6);
    for seed in [0u64, 1, 2] {
        let lattice = make_lattice(&cover, 25, 600, seed).unwrap();
        let rows: Vec<Vec<ComplexPoint>> = lattice.rows().map(<[_]>::to_vec).collect();
        let fz: Vec<f64> = cache.entries.iter().map(|e| e.at_center).collect();
        let ftz: Vec<f64> = cache.entries.iter().map(|e| e.at_image).collect();
        let (want_row, want_val) = opteval_transcription(50, &rows, &cover.centers, &fz, &ftz, cover.m_cover, H);
        let params = ObjectiveParams::new(50, &cover, &cache).with_form(ObjectiveForm::Appendix);
        let got = select_pseudorandom(&lattice, &params).unwrap();
        assert_eq!(got.lattice_row, want_row);
        assert_eq!(got.beta_sq.to_bits(), want_val.to_bits());
    }
}

#[test]
fn lattice_points_stay_on_backward_orbits() {
    let (t, cover, _) = eighth_setup(8);
    let z0 = cover.z0;
    for center in &cover.centers {
        let back = t.orbit(*center, cover.m_cover as usize).unwrap()[cover.m_cover as usize];
        assert!((back - z0).norm() < 1e-9);
    }
    for pair in cover.centers.chunks_exact(2) {
        assert_eq!(pair[0], -pair[1]);
    }
    let lattice = make_lattice(&cover, 50, 5000, 3).unwrap();
    assert!(lattice.max_step_defect(&t) < 1e-12);
    for i in 0..lattice.ell() {
        assert!(lattice.forward_recovery_drift(&t, i) <= 5000.0 * 1e-13);
        assert_eq!(lattice.row(i)[0], cover.centers[lattice.anchor_index()[i]]);
    }
}

#[test]
fn reference_integral_stabilizes() {
    let t = QuadraticMap::eighth();
    let z0 = find_repelling_fixed_point(&t).unwrap();
    let g = TestFunction::modulus();
    let values: Vec<f64> = (1..=21)
        .map(|m| reference_integral(&borel_centers(&t, z0, m).unwrap(), &g).unwrap())
        .collect();
    let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    // increments[k] is the step from m = k + 1 to m = k + 2
    for w in increments[4..].windows(2) {
        assert!(w[1] < w[0], "{increments:?}");
    }
    assert!((values[20] - values[19]).abs() < 1e-6);
}

#[test]
fn default_configuration_selects_a_good_orbit() {
    let (_, cover, cache) = eighth_setup(8);
    let lattice = make_lattice(&cover, 100, 16000, 2718).unwrap();
    let point = select_pseudorandom(&lattice, &ObjectiveParams::new(100, &cover, &cache)).unwrap();
    assert_eq!(point.trajectory.len(), 101);
    let orbit = lattice.forward_trajectory(point.lattice_row, 16000);
    let avg = birkhoff_average(&orbit, &TestFunction::modulus()).unwrap();
    assert!((avg - 1.00149).abs() <= 3.0 * 0.00083, "{avg}");
}

#[test]
fn normalized_minimum_trends_down_with_sum_length() {
    let (_, cover, cache) = eighth_setup(8);
    let lengths = [100usize, 200, 400, 800];
    let mut means = vec![0.0; lengths.len()];
    let seeds = 10;
    for seed in 0..seeds {
        let lattice = make_lattice(&cover, 100, 1000, 500 + seed).unwrap();
        for (k, &p) in lengths.iter().enumerate() {
            let point = select_pseudorandom(&lattice, &ObjectiveParams::new(p, &cover, &cache)).unwrap();
            means[k] += point.normalized / seeds as f64;
        }
    }
    let inversions = means.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{means:?}");
    assert!(means[3] < means[0], "{means:?}");
}

#[test]
fn sigma_shrinks_as_depth_grows() {
    let (_, cover, cache) = eighth_setup(8);
    let ladder = [1000usize, 2000, 4000, 8000, 16000];
    let sigmas: Vec<f64> = ladder
        .iter()
        .map(|&depth| {
            let config = ExperimentConfig::new(&cover, &cache, 100, depth, 100);
            run_experiment(&config, 10, 31).unwrap().sigma
        })
        .collect();
    let inversions = sigmas.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1, "{sigmas:?}");
    assert!(sigmas[4] < sigmas[0], "{sigmas:?}");
}

#[test]
fn trial_averages_are_consistent_with_reference() {
    let (_, cover, cache) = eighth_setup(8);
    let config = ExperimentConfig::new(&cover, &cache, 100, 16000, 100);
    let report = run_experiment(&config, 10, 8).unwrap();
    assert_eq!(report.per_trial.len(), 10);
    let averages: Vec<f64> = report.per_trial.iter().map(|t| t.average.unwrap()).collect();
    for a in &averages {
        assert!((a - 1.001379).abs() <= 6.0 * 0.83e-3, "{a}");
    }
    let (mu, sigma) = mean_and_sigma(&averages);
    assert!((mu - report.mu).abs() <= 1e-12 && (sigma - report.sigma).abs() <= 1e-12);
}

#[test]
fn shifted_form_selection_runs_on_lattices() {
    let (_, cover, cache) = eighth_setup(6);
    let lattice = make_lattice(&cover, 20, 300, 4).unwrap();
    let params = ObjectiveParams::new(100, &cover, &cache).with_form(ObjectiveForm::Shifted);
    let point = select_pseudorandom(&lattice, &params).unwrap();
    assert!(point.beta_sq >= 0.0 && point.lattice_row < 20);
}
