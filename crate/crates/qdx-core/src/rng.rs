//! Small deterministic generator for randomized checks.
//!
//! Verification reports must be byte-identical for a fixed seed, so we use a
//! self-contained splitmix64 rather than an external RNG.

use crate::C;

#[derive(Clone, Debug)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in [0, 1).
    pub fn unit(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 53) as f64
    }

    /// Uniform in [lo, hi).
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.unit()
    }

    pub fn int(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(hi >= lo);
        lo + (self.next_u64() % (hi - lo + 1) as u64) as i64
    }

    /// Complex point with modulus in [rmin, rmax) and uniform argument.
    pub fn annulus(&mut self, rmin: f64, rmax: f64) -> C {
        let r = self.range(rmin, rmax);
        let t = self.range(0.0, std::f64::consts::TAU);
        C::new(r * t.cos(), r * t.sin())
    }

    /// Complex point in a box around the origin, kept away from zero.
    pub fn complex(&mut self, scale: f64) -> C {
        loop {
            let z = C::new(self.range(-scale, scale), self.range(-scale, scale));
            if z.norm() > 0.05 * scale {
                return z;
            }
        }
    }
}
