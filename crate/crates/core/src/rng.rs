//! Seeded random streams and the variate transforms built on them.
//!
//! Every stream is a ChaCha8 generator keyed by a master seed and a 64-bit
//! stream number (replication or path index), so draws depend only on
//! `(seed, stream)` and never on scheduling.
//!
//! * uniform: `(u >> 11) + 0.5` scaled by `2^-53`, strictly inside `(0, 1)`;
//! * normal: Box-Muller on two consecutive uniforms `u1, u2`, returning
//!   `sqrt(-2 ln u1) cos(2 pi u2)` first and `sqrt(-2 ln u1) sin(2 pi u2)` on
//!   the next call;
//! * gamma(a): Marsaglia-Tsang squeeze with one normal and one uniform per
//!   trial, and the `U^(1/a)` boost for `a < 1`;
//! * chi-square(v): sum of `v` squared normals for integral `v <= 64`,
//!   `2 * gamma(v / 2)` otherwise;
//! * Student t(v): `Z / sqrt(chi2(v) / v)` with `Z` drawn before the chi-square.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const MAX_SUM_OF_SQUARES_DF: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct Stream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl Stream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    #[inline]
    pub fn uniform(&mut self) -> f64 {
        let bits = self.rng.next_u64() >> 11;
        (bits as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let (s, c) = (2.0 * std::f64::consts::PI * u2).sin_cos();
        self.spare = Some(r * s);
        r * c
    }

    pub fn gamma(&mut self, shape: f64) -> f64 {
        assert!(shape > 0.0, "gamma shape must be positive");
        if shape < 1.0 {
            let g = self.gamma(shape + 1.0);
            return g * self.uniform().powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let z = self.normal();
            let v = 1.0 + c * z;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            if u < 1.0 - 0.0331 * z.powi(4) || u.ln() < 0.5 * z * z + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    pub fn chi_square(&mut self, df: f64) -> f64 {
        if df.fract() == 0.0 && df <= MAX_SUM_OF_SQUARES_DF {
            (0..df as usize).map(|_| self.normal().powi(2)).sum()
        } else {
            2.0 * self.gamma(0.5 * df)
        }
    }

    pub fn student_t(&mut self, df: f64) -> f64 {
        let z = self.normal();
        z / (self.chi_square(df) / df).sqrt()
    }
}
