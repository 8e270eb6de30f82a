//! Bounded loss functionals over `(prediction, features, label)`.
//!
//! Every objective evaluates to a value in `[-1, 1]`. Label ranges other than
//! `[0, 1]` are handled by normalising residuals by the range width `b - a`
//! (and squared differences by its square), so the same bound holds on any
//! bounded interval.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slack allowed when checking that inputs lie inside their domain.
const DOMAIN_EPS: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("input out of domain: {0}")]
    Domain(String),
    #[error("invalid label range [{a}, {b}]")]
    InvalidRange { a: f64, b: f64 },
    #[error("bin index {index} out of range for {bins} bins")]
    InvalidBin { index: usize, bins: usize },
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("unregistered cost tag `{0}`")]
    UnknownCost(String),
    #[error("cost `{0}` is not a proper loss for the mean")]
    NotMeanProper(String),
    #[error("quantile level {0} must lie in (0, 1)")]
    InvalidAlpha(f64),
    #[error("objective set needs at least one group function")]
    EmptyGroups,
    #[error("group index {0} out of range")]
    UnknownGroup(usize),
    #[error("missing feature `{feature}` for group `{group}`")]
    MissingFeature { group: String, feature: String },
}

/// The label interval `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelRange {
    pub a: f64,
    pub b: f64,
}

impl Default for LabelRange {
    fn default() -> Self {
        Self { a: 0.0, b: 1.0 }
    }
}

impl LabelRange {
    pub fn new(a: f64, b: f64) -> Result<Self, ObjectiveError> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(ObjectiveError::InvalidRange { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self::default()
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    #[inline]
    pub fn contains(&self, v: f64) -> bool {
        v >= self.a - DOMAIN_EPS && v <= self.b + DOMAIN_EPS
    }

    #[inline]
    pub fn clip(&self, v: f64) -> f64 {
        v.clamp(self.a, self.b)
    }

    /// Maps `v` affinely onto `[0, 1]`.
    #[inline]
    pub fn normalize(&self, v: f64) -> f64 {
        (v - self.a) / self.width()
    }

    /// Inverse of [`LabelRange::normalize`].
    #[inline]
    pub fn denormalize(&self, u: f64) -> f64 {
        self.a + u * self.width()
    }

    /// `n` evenly spaced points from `a` to `b` inclusive.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        match n {
            0 => Vec::new(),
            1 => vec![self.a],
            _ => (0..n)
                .map(|i| {
                    if i + 1 == n {
                        self.b
                    } else {
                        self.a + self.width() * i as f64 / (n - 1) as f64
                    }
                })
                .collect(),
        }
    }

    fn check(&self, name: &str, v: f64) -> Result<(), ObjectiveError> {
        if v.is_finite() && self.contains(v) {
            Ok(())
        } else {
            Err(ObjectiveError::Domain(format!(
                "{name} = {v} outside [{}, {}]",
                self.a, self.b
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl Sign {
    pub const BOTH: [Sign; 2] = [Sign::Plus, Sign::Minus];

    #[inline]
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }

    pub fn from_value(v: f64) -> Result<Self, ObjectiveError> {
        if v == 1.0 {
            Ok(Sign::Plus)
        } else if v == -1.0 {
            Ok(Sign::Minus)
        } else {
            Err(ObjectiveError::Domain(format!("sign must be +1 or -1, got {v}")))
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Sign::Plus => "+",
            Sign::Minus => "-",
        })
    }
}

/// The `m` bins `[0, 1/m), [1/m, 2/m), ..., [(m-1)/m, 1]` over normalised
/// predictions. Bins are indexed from zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BinGrid {
    bins: usize,
}

impl BinGrid {
    pub fn new(bins: usize) -> Result<Self, ObjectiveError> {
        if bins == 0 {
            return Err(ObjectiveError::ZeroBins);
        }
        Ok(Self { bins })
    }

    pub fn len(&self) -> usize {
        self.bins
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Midpoint `(2j + 1) / (2m)` of zero-based bin `j`.
    pub fn midpoint(&self, j: usize) -> f64 {
        (2 * j + 1) as f64 / (2 * self.bins) as f64
    }

    pub fn midpoints(&self) -> Vec<f64> {
        (0..self.bins).map(|j| self.midpoint(j)).collect()
    }

    /// Half-open bounds of bin `j`; the last bin also contains 1.
    pub fn bounds(&self, j: usize) -> (f64, f64) {
        let m = self.bins as f64;
        (j as f64 / m, (j + 1) as f64 / m)
    }

    /// Bin holding normalised value `u`. Values at 1 land in the last bin.
    pub fn bin_of(&self, u: f64) -> usize {
        let j = (u * self.bins as f64).floor();
        if j <= 0.0 {
            0
        } else {
            (j as usize).min(self.bins - 1)
        }
    }

    pub fn contains(&self, j: usize, u: f64) -> bool {
        self.bin_of(u) == j
    }
}

/// Losses with closed-form evaluation, used by the prediction-error,
/// omniprediction and multigroup objectives. Serialised as its tag, e.g.
/// `"squared"` or `"pinball:0.9"`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum CostKind {
    #[default]
    Squared,
    Absolute,
    Pinball { alpha: f64 },
}

impl TryFrom<String> for CostKind {
    type Error = ObjectiveError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        CostKind::parse(&s)
    }
}

impl From<CostKind> for String {
    fn from(c: CostKind) -> String {
        c.tag()
    }
}

impl CostKind {
    /// Parses `squared`, `absolute` or `pinball:<alpha>`.
    pub fn parse(tag: &str) -> Result<Self, ObjectiveError> {
        let tag = tag.trim();
        match tag {
            "squared" | "brier" => Ok(CostKind::Squared),
            "absolute" => Ok(CostKind::Absolute),
            _ => {
                if let Some(rest) = tag.strip_prefix("pinball:") {
                    let alpha: f64 = rest
                        .parse()
                        .map_err(|_| ObjectiveError::UnknownCost(tag.to_string()))?;
                    check_alpha(alpha)?;
                    Ok(CostKind::Pinball { alpha })
                } else {
                    Err(ObjectiveError::UnknownCost(tag.to_string()))
                }
            }
        }
    }

    pub fn tag(&self) -> String {
        match self {
            CostKind::Squared => "squared".into(),
            CostKind::Absolute => "absolute".into(),
            CostKind::Pinball { alpha } => format!("pinball:{alpha}"),
        }
    }

    /// Whether the expected-loss minimiser is the distribution mean.
    pub fn is_proper_for_mean(&self) -> bool {
        matches!(self, CostKind::Squared)
    }

    /// Unscaled cost `c(p, y)`.
    pub fn raw(&self, p: f64, y: f64) -> f64 {
        match *self {
            CostKind::Squared => (y - p) * (y - p),
            CostKind::Absolute => (y - p).abs(),
            CostKind::Pinball { alpha } => pinball(alpha, p, y),
        }
    }

    /// Cost divided by the range width raised to the cost's degree, so that
    /// values lie in `[0, 1]`.
    pub fn scaled(&self, p: f64, y: f64, range: &LabelRange) -> f64 {
        let w = range.width();
        match self {
            CostKind::Squared => self.raw(p, y) / (w * w),
            _ => self.raw(p, y) / w,
        }
    }
}

/// Pinball loss `(alpha - 1{y <= theta}) (y - theta)`.
#[inline]
pub fn pinball(alpha: f64, theta: f64, y: f64) -> f64 {
    let ind = if y <= theta { 1.0 } else { 0.0 };
    (alpha - ind) * (y - theta)
}

fn check_alpha(alpha: f64) -> Result<(), ObjectiveError> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        Err(ObjectiveError::InvalidAlpha(alpha))
    }
}

fn check_unit(name: &str, v: f64) -> Result<(), ObjectiveError> {
    if v.is_finite() && (-DOMAIN_EPS..=1.0 + DOMAIN_EPS).contains(&v) {
        Ok(())
    } else {
        Err(ObjectiveError::Domain(format!("{name} = {v} outside [0, 1]")))
    }
}

/// A named feature value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Num(f64),
    Cat(String),
}

impl FeatureValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FeatureValue::Num(v) => Some(*v),
            FeatureValue::Cat(s) => s.trim().parse().ok(),
        }
    }
}

pub type Features = BTreeMap<String, FeatureValue>;

/// How a group function maps features onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GroupRule {
    /// `1{lo <= x_feature < hi}`.
    Interval { feature: String, lo: f64, hi: f64 },
    /// `1{x_feature == value}`.
    Categorical { feature: String, value: String },
    /// `clip((x_feature - offset) / scale, 0, 1)`.
    Coordinate {
        feature: String,
        #[serde(default)]
        offset: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// Constant function, e.g. `x -> 1`.
    Constant { value: f64 },
}

fn one() -> f64 {
    1.0
}

/// A member of the function class, `f: X -> [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFunction {
    pub id: String,
    #[serde(flatten)]
    pub rule: GroupRule,
}

impl GroupFunction {
    pub fn new(id: impl Into<String>, rule: GroupRule) -> Self {
        Self { id: id.into(), rule }
    }

    pub fn constant(id: impl Into<String>, value: f64) -> Self {
        Self::new(id, GroupRule::Constant { value })
    }

    pub fn evaluate(&self, features: &Features) -> Result<f64, ObjectiveError> {
        let missing = |feature: &str| ObjectiveError::MissingFeature {
            group: self.id.clone(),
            feature: feature.to_string(),
        };
        let v = match &self.rule {
            GroupRule::Constant { value } => *value,
            GroupRule::Interval { feature, lo, hi } => {
                let x = features
                    .get(feature)
                    .and_then(FeatureValue::as_f64)
                    .ok_or_else(|| missing(feature))?;
                if x >= *lo && x < *hi {
                    1.0
                } else {
                    0.0
                }
            }
            GroupRule::Categorical { feature, value } => {
                let x = features.get(feature).ok_or_else(|| missing(feature))?;
                let hit = match x {
                    FeatureValue::Cat(s) => s == value,
                    FeatureValue::Num(n) => value.parse::<f64>().map(|v| v == *n).unwrap_or(false),
                };
                if hit {
                    1.0
                } else {
                    0.0
                }
            }
            GroupRule::Coordinate {
                feature,
                offset,
                scale,
            } => {
                let x = features
                    .get(feature)
                    .and_then(FeatureValue::as_f64)
                    .ok_or_else(|| missing(feature))?;
                (x - offset) / scale
            }
        };
        Ok(if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
    }
}

/// `sign * f * (y - p)`, normalised by the range width.
pub fn multiaccuracy_loss(
    f_value: f64,
    sign: Sign,
    p: f64,
    y: f64,
    range: &LabelRange,
) -> Result<f64, ObjectiveError> {
    check_unit("f", f_value)?;
    range.check("p", p)?;
    range.check("y", y)?;
    Ok(ma_raw(f_value, sign, p, y, range))
}

#[inline]
fn ma_raw(f: f64, sign: Sign, p: f64, y: f64, range: &LabelRange) -> f64 {
    sign.value() * f * (y - p) / range.width()
}

/// `c(p, y) - c(p_base, y)` for a cost that is proper for the mean.
pub fn prediction_error_loss(
    p: f64,
    p_base: f64,
    y: f64,
    cost: CostKind,
    range: &LabelRange,
) -> Result<f64, ObjectiveError> {
    if !cost.is_proper_for_mean() {
        return Err(ObjectiveError::NotMeanProper(cost.tag()));
    }
    range.check("p", p)?;
    range.check("p_base", p_base)?;
    range.check("y", y)?;
    Ok(cost.scaled(p, y, range) - cost.scaled(p_base, y, range))
}

/// `sign * f * 1{p in bin} * (y - v_bin)` on normalised values; `bin` is
/// zero-based.
pub fn multicalibration_loss(
    f_value: f64,
    sign: Sign,
    bin: usize,
    bins: usize,
    p: f64,
    y: f64,
    range: &LabelRange,
) -> Result<f64, ObjectiveError> {
    let grid = BinGrid::new(bins)?;
    if bin >= bins {
        return Err(ObjectiveError::InvalidBin { index: bin, bins });
    }
    check_unit("f", f_value)?;
    range.check("p", p)?;
    range.check("y", y)?;
    Ok(mc_raw(f_value, sign, &grid, bin, p, y, range))
}

#[inline]
fn mc_raw(f: f64, sign: Sign, grid: &BinGrid, bin: usize, p: f64, y: f64, range: &LabelRange) -> f64 {
    let u = range.normalize(p);
    if grid.contains(bin, u) {
        sign.value() * f * (range.normalize(y) - grid.midpoint(bin))
    } else {
        0.0
    }
}

/// `sign * f * (1{y <= theta} - alpha)`.
pub fn coverage_loss(
    f_value: f64,
    sign: Sign,
    theta: f64,
    y: f64,
    alpha: f64,
) -> Result<f64, ObjectiveError> {
    check_alpha(alpha)?;
    check_unit("f", f_value)?;
    Ok(coverage_raw(f_value, sign, theta, y, alpha))
}

#[inline]
fn coverage_raw(f: f64, sign: Sign, theta: f64, y: f64, alpha: f64) -> f64 {
    let ind = if y <= theta { 1.0 } else { 0.0 };
    sign.value() * f * (ind - alpha)
}

/// Pinball-loss difference against a baseline quantile, divided by the range
/// width.
pub fn quantile_pred_loss(
    theta: f64,
    theta_base: f64,
    y: f64,
    alpha: f64,
    range: &LabelRange,
) -> Result<f64, ObjectiveError> {
    check_alpha(alpha)?;
    range.check("theta", theta)?;
    range.check("theta_base", theta_base)?;
    range.check("y", y)?;
    Ok((pinball(alpha, theta, y) - pinball(alpha, theta_base, y)) / range.width())
}

/// Per-step information every objective may read besides `(p, y)`.
#[derive(Debug, Clone, Copy)]
pub struct StepContext<'a> {
    /// `f(x_t)` for each group function, in stream order.
    pub group_values: &'a [f64],
    /// Baseline prediction (mean or quantile), when the problem uses one.
    pub baseline: Option<f64>,
    pub range: LabelRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectiveTag {
    Multiaccuracy,
    PredictionError,
    Multicalibration,
    Coverage,
    QuantilePred,
    Omniprediction,
    Multigroup,
}

impl ObjectiveTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ObjectiveTag::Multiaccuracy => "multiaccuracy",
            ObjectiveTag::PredictionError => "prediction_error",
            ObjectiveTag::Multicalibration => "multicalibration",
            ObjectiveTag::Coverage => "coverage",
            ObjectiveTag::QuantilePred => "quantile_pred",
            ObjectiveTag::Omniprediction => "omniprediction",
            ObjectiveTag::Multigroup => "multigroup",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ObjectiveKind {
    Multiaccuracy { group: usize, sign: Sign },
    PredictionError { cost: CostKind },
    Multicalibration { group: usize, sign: Sign, bin: usize, bins: usize },
    Coverage { group: usize, sign: Sign, alpha: f64 },
    QuantilePred { alpha: f64 },
    /// `l(p, y) - l(c(x), y)` with competitor `c = a + (b - a) f_competitor`.
    Omniprediction { loss: CostKind, competitor: usize },
    /// `g(x) (l(p, y) - l(c(x), y))`.
    Multigroup { group: usize, loss: CostKind, competitor: usize },
}

/// One element of the objective set, identified by `id`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub id: String,
    pub kind: ObjectiveKind,
}

impl Objective {
    pub fn tag(&self) -> ObjectiveTag {
        match self.kind {
            ObjectiveKind::Multiaccuracy { .. } => ObjectiveTag::Multiaccuracy,
            ObjectiveKind::PredictionError { .. } => ObjectiveTag::PredictionError,
            ObjectiveKind::Multicalibration { .. } => ObjectiveTag::Multicalibration,
            ObjectiveKind::Coverage { .. } => ObjectiveTag::Coverage,
            ObjectiveKind::QuantilePred { .. } => ObjectiveTag::QuantilePred,
            ObjectiveKind::Omniprediction { .. } => ObjectiveTag::Omniprediction,
            ObjectiveKind::Multigroup { .. } => ObjectiveTag::Multigroup,
        }
    }

    /// Group index this objective reweights by, if any.
    pub fn group(&self) -> Option<usize> {
        match self.kind {
            ObjectiveKind::Multiaccuracy { group, .. }
            | ObjectiveKind::Multicalibration { group, .. }
            | ObjectiveKind::Coverage { group, .. }
            | ObjectiveKind::Multigroup { group, .. } => Some(group),
            _ => None,
        }
    }

    pub fn uses_baseline(&self) -> bool {
        matches!(
            self.kind,
            ObjectiveKind::PredictionError { .. } | ObjectiveKind::QuantilePred { .. }
        )
    }

    /// Evaluates the loss at prediction `p` and label `y`. Inputs are assumed
    /// valid; the engine checks ranges once per step.
    #[inline]
    pub fn evaluate(&self, p: f64, y: f64, ctx: &StepContext<'_>) -> f64 {
        let range = &ctx.range;
        match self.kind {
            ObjectiveKind::Multiaccuracy { group, sign } => {
                ma_raw(ctx.group_values[group], sign, p, y, range)
            }
            ObjectiveKind::PredictionError { cost } => {
                let base = ctx.baseline.unwrap_or(p);
                cost.scaled(p, y, range) - cost.scaled(base, y, range)
            }
            ObjectiveKind::Multicalibration {
                group,
                sign,
                bin,
                bins,
            } => {
                let grid = BinGrid { bins };
                mc_raw(ctx.group_values[group], sign, &grid, bin, p, y, range)
            }
            ObjectiveKind::Coverage { group, sign, alpha } => {
                coverage_raw(ctx.group_values[group], sign, p, y, alpha)
            }
            ObjectiveKind::QuantilePred { alpha } => {
                let base = ctx.baseline.unwrap_or(p);
                (pinball(alpha, p, y) - pinball(alpha, base, y)) / range.width()
            }
            ObjectiveKind::Omniprediction { loss, competitor } => {
                let c = range.denormalize(ctx.group_values[competitor]);
                loss.scaled(p, y, range) - loss.scaled(c, y, range)
            }
            ObjectiveKind::Multigroup {
                group,
                loss,
                competitor,
            } => {
                let c = range.denormalize(ctx.group_values[competitor]);
                ctx.group_values[group] * (loss.scaled(p, y, range) - loss.scaled(c, y, range))
            }
        }
    }
}

/// Which family of objectives to build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    /// Multiaccuracy objectives only; predictions collapse to `a` or `b`.
    Ma,
    MaPred {
        #[serde(default)]
        cost: CostKind,
    },
    Mc {
        bins: usize,
    },
    McPred {
        bins: usize,
        #[serde(default)]
        cost: CostKind,
    },
    Quantile {
        alpha: f64,
    },
    /// Competitors are group functions mapped onto the label range; an empty
    /// list means every group.
    Omniprediction {
        losses: Vec<CostKind>,
        #[serde(default)]
        competitors: Vec<usize>,
    },
    Multigroup {
        losses: Vec<CostKind>,
        groups: Vec<usize>,
        competitors: Vec<usize>,
    },
    /// Pass the baseline through unchanged; multiaccuracy losses are logged
    /// for evaluation only.
    BaselineOnly,
}

impl ProblemSpec {
    pub fn label(&self) -> &'static str {
        match self {
            ProblemSpec::Ma => "MA",
            ProblemSpec::MaPred { .. } => "MA+pred",
            ProblemSpec::Mc { .. } => "MC",
            ProblemSpec::McPred { .. } => "MC+pred",
            ProblemSpec::Quantile { .. } => "quantile",
            ProblemSpec::Omniprediction { .. } => "omniprediction",
            ProblemSpec::Multigroup { .. } => "multigroup",
            ProblemSpec::BaselineOnly => "baseline",
        }
    }

    /// Whether the problem reads a baseline prediction every step.
    pub fn needs_baseline(&self) -> bool {
        matches!(
            self,
            ProblemSpec::MaPred { .. }
                | ProblemSpec::McPred { .. }
                | ProblemSpec::Quantile { .. }
                | ProblemSpec::BaselineOnly
        )
    }

    pub fn bins(&self) -> Option<usize> {
        match self {
            ProblemSpec::Mc { bins } | ProblemSpec::McPred { bins, .. } => Some(*bins),
            _ => None,
        }
    }
}

fn group_id(groups: &[GroupFunction], i: usize) -> Result<&str, ObjectiveError> {
    groups
        .get(i)
        .map(|g| g.id.as_str())
        .ok_or(ObjectiveError::UnknownGroup(i))
}

/// Builds the full objective list for `spec` over `groups`.
pub fn build_objective_set(
    spec: &ProblemSpec,
    groups: &[GroupFunction],
) -> Result<Vec<Objective>, ObjectiveError> {
    if groups.is_empty() {
        return Err(ObjectiveError::EmptyGroups);
    }
    let ma = |out: &mut Vec<Objective>| {
        for (g, gf) in groups.iter().enumerate() {
            for sign in Sign::BOTH {
                out.push(Objective {
                    id: format!("ma[{}]{}", gf.id, sign),
                    kind: ObjectiveKind::Multiaccuracy { group: g, sign },
                });
            }
        }
    };
    let pred = |out: &mut Vec<Objective>, cost: CostKind| -> Result<(), ObjectiveError> {
        if !cost.is_proper_for_mean() {
            return Err(ObjectiveError::NotMeanProper(cost.tag()));
        }
        out.push(Objective {
            id: "pred".into(),
            kind: ObjectiveKind::PredictionError { cost },
        });
        Ok(())
    };
    let mc = |out: &mut Vec<Objective>, bins: usize| -> Result<(), ObjectiveError> {
        BinGrid::new(bins)?;
        for (g, gf) in groups.iter().enumerate() {
            for sign in Sign::BOTH {
                for bin in 0..bins {
                    out.push(Objective {
                        id: format!("mc[{}]{}[{}]", gf.id, sign, bin),
                        kind: ObjectiveKind::Multicalibration {
                            group: g,
                            sign,
                            bin,
                            bins,
                        },
                    });
                }
            }
        }
        Ok(())
    };

    let mut out = Vec::new();
    match spec {
        ProblemSpec::Ma | ProblemSpec::BaselineOnly => ma(&mut out),
        ProblemSpec::MaPred { cost } => {
            ma(&mut out);
            pred(&mut out, *cost)?;
        }
        ProblemSpec::Mc { bins } => mc(&mut out, *bins)?,
        ProblemSpec::McPred { bins, cost } => {
            mc(&mut out, *bins)?;
            pred(&mut out, *cost)?;
        }
        ProblemSpec::Quantile { alpha } => {
            check_alpha(*alpha)?;
            for (g, gf) in groups.iter().enumerate() {
                for sign in Sign::BOTH {
                    out.push(Objective {
                        id: format!("cov[{}]{}", gf.id, sign),
                        kind: ObjectiveKind::Coverage {
                            group: g,
                            sign,
                            alpha: *alpha,
                        },
                    });
                }
            }
            out.push(Objective {
                id: "qpred".into(),
                kind: ObjectiveKind::QuantilePred { alpha: *alpha },
            });
        }
        ProblemSpec::Omniprediction {
            losses,
            competitors,
        } => {
            let comps: Vec<usize> = if competitors.is_empty() {
                (0..groups.len()).collect()
            } else {
                competitors.clone()
            };
            for loss in losses {
                for &c in &comps {
                    let cid = group_id(groups, c)?;
                    out.push(Objective {
                        id: format!("omni[{}][{}]", loss.tag(), cid),
                        kind: ObjectiveKind::Omniprediction {
                            loss: *loss,
                            competitor: c,
                        },
                    });
                }
            }
        }
        ProblemSpec::Multigroup {
            losses,
            groups: gs,
            competitors,
        } => {
            for &g in gs {
                let gid = group_id(groups, g)?;
                for loss in losses {
                    for &c in competitors {
                        let cid = group_id(groups, c)?;
                        out.push(Objective {
                            id: format!("mg[{}][{}][{}]", gid, loss.tag(), cid),
                            kind: ObjectiveKind::Multigroup {
                                group: g,
                                loss: *loss,
                                competitor: c,
                            },
                        });
                    }
                }
            }
        }
    }
    if out.is_empty() {
        return Err(ObjectiveError::EmptyGroups);
    }
    Ok(out)
}
