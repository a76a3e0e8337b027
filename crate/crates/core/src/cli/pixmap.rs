//! Monochrome portable bitmap (`P1`) of the ball cover.

use crate::dynamics::ComplexPoint;

pub struct Bitmap {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl Bitmap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![false; width * height],
        }
    }

    pub fn set(&mut self, x: i64, y: i64) {
        if x >= 0 && y >= 0 && (x as usize) < self.width && (y as usize) < self.height {
            self.bits[y as usize * self.width + x as usize] = true;
        }
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn to_pbm(&self) -> String {
        let mut out = format!("P1\n{} {}\n", self.width, self.height);
        for row in self.bits.chunks(self.width) {
            let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
            out.push_str(&line.join(" "));
            out.push('\n');
        }
        out
    }
}

/// Square viewport around all balls, with a 5% margin.
pub struct Viewport {
    min_re: f64,
    max_im: f64,
    scale: f64,
}

impl Viewport {
    pub fn fit(centers: &[ComplexPoint], radius: f64, size: usize) -> Self {
        let (mut lo_re, mut hi_re, mut lo_im, mut hi_im) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        for c in centers {
            lo_re = lo_re.min(c.re - radius);
            hi_re = hi_re.max(c.re + radius);
            lo_im = lo_im.min(c.im - radius);
            hi_im = hi_im.max(c.im + radius);
        }
        let span = (hi_re - lo_re).max(hi_im - lo_im) * 1.1;
        let mid_re = 0.5 * (lo_re + hi_re);
        let mid_im = 0.5 * (lo_im + hi_im);
        Self {
            min_re: mid_re - span / 2.0,
            max_im: mid_im + span / 2.0,
            scale: size as f64 / span,
        }
    }

    pub fn to_pixel(&self, z: ComplexPoint) -> (i64, i64) {
        (
            ((z.re - self.min_re) * self.scale).floor() as i64,
            ((self.max_im - z.im) * self.scale).floor() as i64,
        )
    }
}

/// Strokes every ball boundary one pixel wide.
pub fn render_cover(centers: &[ComplexPoint], radius: f64, size: usize) -> Bitmap {
    let view = Viewport::fit(centers, radius, size);
    let mut bitmap = Bitmap::new(size, size);
    let radius_px = radius * view.scale;
    let samples = (8.0 * radius_px).ceil().max(16.0) as usize;
    for &c in centers {
        for k in 0..samples {
            let angle = std::f64::consts::TAU * k as f64 / samples as f64;
            let (x, y) = view.to_pixel(c + ComplexPoint::from_polar(radius, angle));
            bitmap.set(x, y);
        }
    }
    bitmap
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_circle_is_a_ring() {
        let bm = render_cover(&[ComplexPoint::new(0.0, 0.0)], 1.0, 101);
        // center pixel stays blank, boundary is drawn
        assert!(!bm.get(50, 50));
        assert!(bm.count_set() > 100);
        let pbm = bm.to_pbm();
        assert!(pbm.starts_with("P1\n101 101\n"));
        assert_eq!(pbm.lines().count(), 2 + 101);
    }
}
