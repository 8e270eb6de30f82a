//! Synthetic streams: a two-phase label switch and a linear model whose
//! coefficients jump along a random direction.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{IngestError, Record, SampleStream};
use crate::objectives::{FeatureValue, Features, GroupFunction, GroupRule, LabelRange};

/// `y = 1` for the first half of the horizon and `0` after, with the single
/// group `x -> 1` and no baseline. The stream is deterministic; `seed` is
/// accepted for interface symmetry with the other generators.
pub fn gen_switch(t: usize, _seed: u64) -> Result<SampleStream, IngestError> {
    if t == 0 || !t.is_multiple_of(2) {
        return Err(IngestError::Scenario(format!("switch horizon must be even and positive, got {t}")));
    }
    let mut s = SampleStream::new("switch", LabelRange::unit());
    s.records = (0..t)
        .map(|i| Record {
            timestamp: None,
            features: Features::new(),
            y: if i < t / 2 { 1.0 } else { 0.0 },
            baseline: None,
            group_values: Vec::new(),
        })
        .collect();
    s.set_groups(vec![GroupFunction::constant("one", 1.0)])?;
    Ok(s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftSetting {
    Small,
    Medium,
    Large,
    /// Explicit half-widths for the calm and turbulent regimes.
    Custom { calm: f64, turbulent: f64 },
}

impl ShiftSetting {
    /// `(calm, turbulent)` half-widths of the range `mu` is drawn from.
    pub fn amplitudes(&self) -> (f64, f64) {
        match *self {
            ShiftSetting::Small => (0.05, 0.5),
            ShiftSetting::Medium => (0.075, 1.0),
            ShiftSetting::Large => (0.1, 1.5),
            ShiftSetting::Custom { calm, turbulent } => (calm, turbulent),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupMode {
    /// `clip((x_j + 3) / 6, 0, 1)`.
    #[default]
    Clipped,
    /// `clip(x_j, 0, 1)`.
    Raw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftScenario {
    pub setting: ShiftSetting,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_noise")]
    pub noise_sd: f64,
    /// Steps between level changes of `mu`; defaults to `t / 30`.
    #[serde(default)]
    pub segment_len: Option<usize>,
    #[serde(default)]
    pub group_mode: GroupMode,
}

fn default_t() -> usize {
    3000
}
fn default_d() -> usize {
    5
}
fn default_noise() -> f64 {
    0.1
}

impl ShiftScenario {
    pub fn new(setting: ShiftSetting, t: usize, seed: u64) -> Self {
        Self {
            setting,
            t,
            d: default_d(),
            seed,
            noise_sd: default_noise(),
            segment_len: None,
            group_mode: GroupMode::default(),
        }
    }

    pub fn segment(&self) -> usize {
        self.segment_len.unwrap_or(self.t / 30).max(1)
    }

    /// 0 for the first and last thirds, 1 for the middle third.
    pub fn regime(&self, i: usize) -> usize {
        if 3 * i >= self.t && 3 * i < 2 * self.t {
            1
        } else {
            0
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        let (a, b) = self.setting.amplitudes();
        if self.d == 0 || self.t < 3 {
            return Err(IngestError::Scenario(format!("need d >= 1 and t >= 3, got d={} t={}", self.d, self.t)));
        }
        if !(self.noise_sd >= 0.0 && a >= 0.0 && b >= 0.0) {
            return Err(IngestError::Scenario("noise and amplitudes must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything the generator drew, before normalisation.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpShiftPath {
    pub x: Vec<Vec<f64>>,
    pub y_raw: Vec<f64>,
    /// `y_raw` min-max scaled onto `[0, 1]`.
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub beta0: Vec<f64>,
    pub v: Vec<f64>,
}

/// `y_t = x_t . (beta0 + mu_t v) + eps_t` with `x_t ~ N(0, I)`,
/// `beta0 ~ N(0, I/d)`, `v` uniform on the sphere and `mu_t` a square wave
/// whose level is redrawn uniformly from the regime's range every segment and
/// at each regime boundary.
pub fn jump_shift_path(sc: &ShiftScenario) -> Result<JumpShiftPath, IngestError> {
    sc.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
    let d = sc.d;
    let normal = |rng: &mut ChaCha8Rng| -> f64 { StandardNormal.sample(rng) };
    let beta0: Vec<f64> = (0..d).map(|_| normal(&mut rng) / (d as f64).sqrt()).collect();
    let mut v: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    } else {
        v[0] = 1.0;
    }
    let (calm, turbulent) = sc.setting.amplitudes();
    let seg = sc.segment();
    let mut mu = Vec::with_capacity(sc.t);
    let mut level = 0.0;
    for i in 0..sc.t {
        let regime = sc.regime(i);
        if i == 0 || i % seg == 0 || regime != sc.regime(i - 1) {
            let amp = if regime == 1 { turbulent } else { calm };
            level = if amp > 0.0 { rng.random_range(-amp..=amp) } else { 0.0 };
        }
        mu.push(level);
    }
    let mut x = Vec::with_capacity(sc.t);
    let mut y_raw = Vec::with_capacity(sc.t);
    for &m in &mu {
        let xi: Vec<f64> = (0..d).map(|_| normal(&mut rng)).collect();
        let eps = sc.noise_sd * normal(&mut rng);
        let yi: f64 = xi.iter().zip(beta0.iter().zip(&v)).map(|(xj, (b, vj))| xj * (b + m * vj)).sum::<f64>() + eps;
        x.push(xi);
        y_raw.push(yi);
    }
    let lo = y_raw.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y_raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let y = y_raw
        .iter()
        .map(|&v| if span > 0.0 { ((v - lo) / span).clamp(0.0, 1.0) } else { 0.5 })
        .collect();
    Ok(JumpShiftPath { x, y_raw, y, mu, beta0, v })
}

fn coordinate_groups(d: usize, mode: GroupMode) -> Vec<GroupFunction> {
    (1..=d)
        .map(|j| {
            let (offset, scale) = match mode {
                GroupMode::Clipped => (-3.0, 6.0),
                GroupMode::Raw => (0.0, 1.0),
            };
            GroupFunction::new(
                format!("x{j}"),
                GroupRule::Coordinate {
                    feature: format!("x{j}"),
                    offset,
                    scale,
                },
            )
        })
        .collect()
}

/// The jump-shift stream with features `x1..xd` and one coordinate group per
/// feature. No baseline is attached; pair it with the online gradient
/// baseline.
pub fn gen_jump_shift(sc: &ShiftScenario) -> Result<SampleStream, IngestError> {
    let path = jump_shift_path(sc)?;
    let mut s = SampleStream::new("jump_shift", LabelRange::unit());
    s.records = path
        .x
        .iter()
        .zip(&path.y)
        .map(|(xi, &y)| {
            let features = xi
                .iter()
                .enumerate()
                .map(|(j, &v)| (format!("x{}", j + 1), FeatureValue::Num(v)))
                .collect();
            Record {
                timestamp: None,
                features,
                y,
                baseline: None,
                group_values: Vec::new(),
            }
        })
        .collect();
    s.set_groups(coordinate_groups(sc.d, sc.group_mode))?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn switch_labels() {
        let s = gen_switch(4, 0).unwrap();
        assert_eq!(s.labels(), vec![1.0, 1.0, 0.0, 0.0]);
        let s = gen_switch(1000, 7).unwrap();
        assert_abs_diff_eq!(s.labels().iter().sum::<f64>() / 1000.0, 0.5);
        assert!(s.records.iter().all(|r| r.group_values == vec![1.0]));
        assert!(gen_switch(5, 0).is_err());
    }

    #[test]
    fn noise_free_zero_shift_is_affine_in_beta0() {
        let mut sc = ShiftScenario::new(ShiftSetting::Custom { calm: 0.0, turbulent: 0.0 }, 300, 11);
        sc.noise_sd = 0.0;
        let p = jump_shift_path(&sc).unwrap();
        assert!(p.mu.iter().all(|&m| m == 0.0));
        let lin: Vec<f64> = p.x.iter().map(|x| x.iter().zip(&p.beta0).map(|(a, b)| a * b).sum()).collect();
        let lo = lin.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = lin.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (y, l) in p.y.iter().zip(&lin) {
            assert_abs_diff_eq!(*y, (l - lo) / (hi - lo), epsilon = 1e-12);
        }
    }

    #[test]
    fn regimes_and_amplitudes() {
        let sc = ShiftScenario::new(ShiftSetting::Large, 3000, 3);
        let p = jump_shift_path(&sc).unwrap();
        assert_eq!(sc.regime(999), 0);
        assert_eq!(sc.regime(1000), 1);
        assert_eq!(sc.regime(1999), 1);
        assert_eq!(sc.regime(2000), 0);
        for (i, &m) in p.mu.iter().enumerate() {
            let bound = if sc.regime(i) == 1 { 1.5 } else { 0.1 };
            assert!(m.abs() <= bound);
        }
        assert!(p.mu[1000..2000].iter().any(|m| m.abs() > 0.1));
        let vn: f64 = p.v.iter().map(|x| x * x).sum();
        assert_abs_diff_eq!(vn, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn covariates_are_standard() {
        let sc = ShiftScenario::new(ShiftSetting::Small, 10_000, 5);
        let p = jump_shift_path(&sc).unwrap();
        for j in 0..sc.d {
            let col: Vec<f64> = p.x.iter().map(|x| x[j]).collect();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / col.len() as f64;
            assert!((var.sqrt() - 1.0).abs() < 0.05);
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let sc = ShiftScenario::new(ShiftSetting::Medium, 500, 42);
        assert_eq!(gen_jump_shift(&sc).unwrap(), gen_jump_shift(&sc).unwrap());
        let s = gen_jump_shift(&sc).unwrap();
        assert_eq!(s.groups.len(), 5);
        assert!(s.records.iter().flat_map(|r| &r.group_values).all(|v| (0.0..=1.0).contains(v)));
    }
}
