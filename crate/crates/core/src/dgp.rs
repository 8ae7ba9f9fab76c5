//! Seeded generators for autoregressive and ARCH series with optional
//! regime changes.
//!
//! A series of length `n` is `X_1, ..., X_n` with
//!
//! * AR(1): `X_{i+1} = phi X_i + e_i`;
//! * ARCH(1): `X_{i+1} = sqrt(beta + lambda X_i^2) e_i`.
//!
//! Step `i` (producing `X_{i+1}`) uses the parameters of the last regime
//! whose change index `[n f]` is below `i`, so a change at fraction `f`
//! first affects `X_{[n f] + 2}`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Stream;
use crate::series::TimeSeries;

/// Burn-in length used where no stationary draw is available.
pub const DEFAULT_BURN_IN: usize = 5_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Innovation {
    Normal,
    StudentT { df: f64 },
}

impl Innovation {
    #[inline]
    fn draw(&self, s: &mut Stream) -> f64 {
        match *self {
            Innovation::Normal => s.normal(),
            Innovation::StudentT { df } => s.student_t(df),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Family {
    Ar1 { phi: f64 },
    Arch1 { beta: f64, lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "steps")]
pub enum Init {
    /// draw `X_1` from the stationary law (Gaussian AR(1) only)
    Stationary,
    /// start at zero and discard this many steps
    BurnIn(usize),
}

/// New value of one parameter from a change point onwards.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Change {
    Phi(f64),
    Beta(f64),
    Lambda(f64),
    Innovation(Innovation),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime {
    /// change fraction in `(0, 1)`
    pub at: f64,
    pub change: Change,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub family: Family,
    pub innovation: Innovation,
    pub init: Init,
    #[serde(default)]
    pub regimes: Vec<Regime>,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct State {
    family: Family,
    innovation: Innovation,
}

impl State {
    fn apply(&mut self, c: Change) {
        match (c, &mut self.family) {
            (Change::Phi(v), Family::Ar1 { phi }) => *phi = v,
            (Change::Beta(v), Family::Arch1 { beta, .. }) => *beta = v,
            (Change::Lambda(v), Family::Arch1 { lambda, .. }) => *lambda = v,
            (Change::Innovation(i), _) => self.innovation = i,
            _ => unreachable!("validated"),
        }
    }

    #[inline]
    fn step(&self, x: f64, s: &mut Stream) -> f64 {
        let e = self.innovation.draw(s);
        match self.family {
            Family::Ar1 { phi } => phi * x + e,
            Family::Arch1 { beta, lambda } => (beta + lambda * x * x).sqrt() * e,
        }
    }
}

fn check_family(f: &Family) -> Result<()> {
    match *f {
        Family::Ar1 { phi } if !(phi.abs() < 1.0) => Err(Error::invalid(format!("AR(1) needs |phi| < 1, got {phi}"))),
        Family::Arch1 { beta, .. } if !(beta > 0.0 && beta.is_finite()) => {
            Err(Error::invalid(format!("ARCH(1) needs beta > 0, got {beta}")))
        }
        Family::Arch1 { lambda, .. } if !(lambda >= 0.0 && lambda.is_finite()) => {
            Err(Error::invalid(format!("ARCH(1) needs lambda >= 0, got {lambda}")))
        }
        _ => Ok(()),
    }
}

fn check_innovation(i: &Innovation) -> Result<()> {
    match *i {
        Innovation::StudentT { df } if !(df > 0.0 && df.is_finite()) => {
            Err(Error::invalid(format!("t degrees of freedom must be > 0, got {df}")))
        }
        _ => Ok(()),
    }
}

impl DgpSpec {
    /// Gaussian AR(1) started from its stationary law.
    pub fn ar1(phi: f64, n: usize, seed: u64) -> Self {
        Self { family: Family::Ar1 { phi }, innovation: Innovation::Normal, init: Init::Stationary, regimes: Vec::new(), n, seed }
    }

    /// Gaussian ARCH(1) after the default burn-in.
    pub fn arch1(beta: f64, lambda: f64, n: usize, seed: u64) -> Self {
        Self {
            family: Family::Arch1 { beta, lambda },
            innovation: Innovation::Normal,
            init: Init::BurnIn(DEFAULT_BURN_IN),
            regimes: Vec::new(),
            n,
            seed,
        }
    }

    /// AR(1) with `phi = 0.5` and t innovations whose degrees of freedom
    /// move from 16.5 to `df` at the midpoint.
    pub fn df_change(df: f64, n: usize, seed: u64) -> Self {
        Self {
            family: Family::Ar1 { phi: 0.5 },
            innovation: Innovation::StudentT { df: 16.5 },
            init: Init::BurnIn(DEFAULT_BURN_IN),
            regimes: vec![Regime { at: 0.5, change: Change::Innovation(Innovation::StudentT { df }) }],
            n,
            seed,
        }
    }

    /// ARCH(1) with `beta = 1` whose `lambda` moves from 0.2 to `lambda` at the midpoint.
    pub fn lambda_change(lambda: f64, n: usize, seed: u64) -> Self {
        Self {
            family: Family::Arch1 { beta: 1.0, lambda: 0.2 },
            innovation: Innovation::Normal,
            init: Init::BurnIn(DEFAULT_BURN_IN),
            regimes: vec![Regime { at: 0.5, change: Change::Lambda(lambda) }],
            n,
            seed,
        }
    }

    /// AR(1) with `phi = 0.5` and t(16.5) innovations, switching to t(`df`)
    /// on the middle third and back to t(16.5) on the last third.
    pub fn three_regime_t(df: f64, n: usize, seed: u64) -> Self {
        let base = Innovation::StudentT { df: 16.5 };
        Self {
            family: Family::Ar1 { phi: 0.5 },
            innovation: base,
            init: Init::BurnIn(DEFAULT_BURN_IN),
            regimes: vec![
                Regime { at: 1.0 / 3.0, change: Change::Innovation(Innovation::StudentT { df }) },
                Regime { at: 2.0 / 3.0, change: Change::Innovation(base) },
            ],
            n,
            seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_n(mut self, n: usize) -> Self {
        self.n = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::invalid("series length must be at least 1"));
        }
        check_family(&self.family)?;
        check_innovation(&self.innovation)?;
        let mut state = State { family: self.family, innovation: self.innovation };
        let mut last = 0.0;
        for r in &self.regimes {
            if !(r.at > last && r.at < 1.0) {
                return Err(Error::invalid("change fractions must be strictly increasing in (0, 1)"));
            }
            last = r.at;
            let ok = matches!(
                (r.change, self.family),
                (Change::Phi(_), Family::Ar1 { .. })
                    | (Change::Beta(_), Family::Arch1 { .. })
                    | (Change::Lambda(_), Family::Arch1 { .. })
                    | (Change::Innovation(_), _)
            );
            if !ok {
                return Err(Error::invalid(format!("{:?} does not apply to {:?}", r.change, self.family)));
            }
            state.apply(r.change);
            check_family(&state.family)?;
            check_innovation(&state.innovation)?;
        }
        if self.init == Init::Stationary && !matches!((self.family, self.innovation), (Family::Ar1 { .. }, Innovation::Normal)) {
            return Err(Error::invalid(
                "stationary start is only available for Gaussian AR(1); use a burn-in instead",
            ));
        }
        Ok(())
    }

    /// Step indices `[n f]` after which each regime applies.
    pub fn change_indices(&self) -> Vec<usize> {
        self.regimes.iter().map(|r| (self.n as f64 * r.at + 1e-9).floor() as usize).collect()
    }

    /// Generates replication `replication`, drawn from stream `(seed, replication)`.
    pub fn generate(&self, replication: u64) -> Result<TimeSeries> {
        self.validate()?;
        let mut s = Stream::new(self.seed, replication);
        let mut state = State { family: self.family, innovation: self.innovation };
        let mut x = match self.init {
            Init::Stationary => {
                let Family::Ar1 { phi } = self.family else { unreachable!("validated") };
                s.normal() / (1.0 - phi * phi).sqrt()
            }
            Init::BurnIn(b) => {
                let mut x = 0.0;
                for _ in 0..b {
                    x = state.step(x, &mut s);
                }
                x
            }
        };
        let changes = self.change_indices();
        let mut next = 0;
        let mut out = Vec::with_capacity(self.n);
        out.push(x);
        for i in 1..self.n {
            while next < changes.len() && changes[next] < i {
                state.apply(self.regimes[next].change);
                next += 1;
            }
            x = state.step(x, &mut s);
            out.push(x);
        }
        TimeSeries::new(out)
    }
}

pub fn gen_ar1(spec: &DgpSpec, replication: u64) -> Result<TimeSeries> {
    if !matches!(spec.family, Family::Ar1 { .. }) {
        return Err(Error::invalid("gen_ar1 needs an AR(1) spec"));
    }
    spec.generate(replication)
}

pub fn gen_arch1(spec: &DgpSpec, replication: u64) -> Result<TimeSeries> {
    if !matches!(spec.family, Family::Arch1 { .. }) {
        return Err(Error::invalid("gen_arch1 needs an ARCH(1) spec"));
    }
    spec.generate(replication)
}

/// Adds `magnitude` to every `X_i` with `i > [n at]`.
pub fn inject_location_shift(series: &TimeSeries, at: f64, magnitude: f64) -> Result<TimeSeries> {
    if !(at > 0.0 && at < 1.0) {
        return Err(Error::invalid(format!("shift fraction must be in (0, 1), got {at}")));
    }
    if !magnitude.is_finite() {
        return Err(Error::invalid("shift magnitude must be finite"));
    }
    let cut = (series.len() as f64 * at + 1e-9).floor() as usize;
    let mut v = series.values().to_vec();
    v[cut..].iter_mut().for_each(|x| *x += magnitude);
    match series.timestamps() {
        Some(ts) => TimeSeries::with_timestamps(v, ts.to_vec()),
        None => TimeSeries::new(v),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean_var(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
    }

    #[test]
    fn white_noise_has_no_autocorrelation() {
        let x = DgpSpec::ar1(0.0, 100_000, 1).generate(0).unwrap();
        let v = x.values();
        let (m, var) = mean_var(v);
        let c: f64 = v.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum::<f64>() / (v.len() - 1) as f64;
        assert!((c / var).abs() < 0.01, "{}", c / var);
    }

    #[test]
    fn ar1_has_stationary_variance() {
        let x = DgpSpec::ar1(0.5, 1_000_000, 2).generate(0).unwrap();
        let (_, v) = mean_var(x.values());
        assert!((1.31..=1.36).contains(&v), "{v}");
    }

    #[test]
    fn stationary_start_has_stationary_variance() {
        let spec = DgpSpec::ar1(0.5, 1, 3);
        let x1: Vec<f64> = (0..5000).map(|r| spec.generate(r).unwrap().values()[0]).collect();
        let (_, v) = mean_var(&x1);
        assert!((v / (4.0 / 3.0) - 1.0).abs() < 0.05, "{v}");
    }

    #[test]
    fn arch1_second_moment() {
        let x = DgpSpec::arch1(1.0, 0.3, 1_000_000, 4).generate(0).unwrap();
        let (_, v) = mean_var(x.values());
        assert!((v / (1.0 / 0.7) - 1.0).abs() < 0.05, "{v}");
        let x = DgpSpec::arch1(2.0, 0.0, 100_000, 4).generate(0).unwrap();
        let (_, v) = mean_var(x.values());
        assert!((v / 2.0 - 1.0).abs() < 0.03, "{v}");
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = DgpSpec::three_regime_t(2.1, 1500, 9);
        assert_eq!(spec.generate(5).unwrap(), spec.generate(5).unwrap());
        assert_ne!(spec.generate(5).unwrap(), spec.generate(6).unwrap());
        assert_eq!(spec.change_indices(), vec![500, 1000]);
    }

    #[test]
    fn regimes_switch_after_the_change_index() {
        let base = DgpSpec::lambda_change(0.2, 100, 7);
        let changed = DgpSpec::lambda_change(0.9, 100, 7);
        let (a, b) = (base.generate(0).unwrap(), changed.generate(0).unwrap());
        // step 50 still uses the first regime and produces X_51
        assert_eq!(a.values()[..51], b.values()[..51]);
        assert_ne!(a.values()[51], b.values()[51]);
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let mut s = DgpSpec::ar1(0.5, 10, 0);
        s.innovation = Innovation::StudentT { df: 5.0 };
        assert!(s.generate(0).is_err());
        assert!(DgpSpec::ar1(1.0, 10, 0).generate(0).is_err());
        assert!(DgpSpec::arch1(0.0, 0.3, 10, 0).generate(0).is_err());
        assert!(DgpSpec::arch1(1.0, -0.1, 10, 0).generate(0).is_err());
        let mut s = DgpSpec::ar1(0.5, 10, 0);
        s.regimes = vec![Regime { at: 0.5, change: Change::Lambda(0.1) }];
        assert!(s.validate().is_err());
        let mut s = DgpSpec::three_regime_t(3.0, 10, 0);
        s.regimes.swap(0, 1);
        assert!(s.validate().is_err());
        assert!(gen_arch1(&DgpSpec::ar1(0.5, 10, 0), 0).is_err());
        assert!(gen_ar1(&DgpSpec::ar1(0.5, 10, 0), 0).is_ok());
    }

    #[test]
    fn location_shift_examples() {
        let x = TimeSeries::new(vec![0.0; 4]).unwrap();
        assert_eq!(inject_location_shift(&x, 0.5, 1.0).unwrap().values(), &[0.0, 0.0, 1.0, 1.0]);
        let y = DgpSpec::ar1(0.5, 50, 0).generate(0).unwrap();
        assert_eq!(inject_location_shift(&y, 0.3, 0.0).unwrap(), y);
        assert!(inject_location_shift(&y, 1.0, 1.0).is_err());
    }

    #[test]
    fn location_shift_moves_the_mean() {
        let n = 100_000;
        let x = DgpSpec::ar1(0.0, n, 11).generate(0).unwrap();
        let y = inject_location_shift(&x, 0.5, 0.7).unwrap();
        let (m1, _) = mean_var(&y.values()[..n / 2]);
        let (m2, _) = mean_var(&y.values()[n / 2..]);
        let se = (2.0 / (n as f64 / 2.0)).sqrt();
        assert!((m2 - m1 - 0.7).abs() < 3.0 * se);
    }

    #[test]
    fn spec_round_trips_through_json() {
        let spec = DgpSpec::three_regime_t(2.1, 1500, 9);
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(serde_json::from_str::<DgpSpec>(&text).unwrap(), spec);
    }
}
