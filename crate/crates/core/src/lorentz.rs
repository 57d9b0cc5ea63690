//! Lorentz-space quantities of sampled scalar fields.
//!
//! A [`SampledScalarField`] is a function known on quadrature points with
//! positive weights. Measure-theoretic statements are read on the samples:
//! the distribution function `λ_f(t) = |{|f| > t}|` is the total weight of the
//! points with `|f| > t`, a step function of `t`. All quasi-norms are computed
//! by exact summation over the steps of `λ_f`; a quadrature in `t` is kept as
//! an independent cross-check.

use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{norm_w1p, DiscreteFunction};
use crate::error::{Error, Result};
use crate::mesh::Mesh;
use crate::{sobolev_exponent, unit_ball_measure};

const MEASURE_RTOL: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SampledScalarField {
    dim: usize,
    coords: Vec<f64>,
    values: Vec<f64>,
    weights: Vec<f64>,
    domain_measure: f64,
}

impl SampledScalarField {
    /// `coords` holds `dim` coordinates per point, flattened.
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        values: Vec<f64>,
        weights: Vec<f64>,
        domain_measure: f64,
    ) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::InvalidField("field has no samples".into()));
        }
        if weights.len() != n || coords.len() != n * dim {
            return Err(Error::InvalidField(format!(
                "length mismatch: {} values, {} weights, {} coordinates for dim {dim}",
                n,
                weights.len(),
                coords.len()
            )));
        }
        if let Some(i) = weights.iter().position(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(Error::InvalidField(format!(
                "weight {i} is not strictly positive: {}",
                weights[i]
            )));
        }
        if let Some(i) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::InvalidField(format!("value {i} is NaN")));
        }
        if !(domain_measure > 0.0 && domain_measure.is_finite()) {
            return Err(Error::InvalidField(format!(
                "domain measure {domain_measure} is not positive"
            )));
        }
        let total: f64 = weights.iter().sum();
        if ((total - domain_measure) / domain_measure).abs() > MEASURE_RTOL {
            return Err(Error::InvalidField(format!(
                "weights sum to {total}, domain measure is {domain_measure}"
            )));
        }
        Ok(Self {
            dim,
            coords,
            values,
            weights,
            domain_measure,
        })
    }

    /// Domain measure taken as the sum of the weights.
    pub fn from_weights(
        dim: usize,
        coords: Vec<f64>,
        values: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let total = weights.iter().sum();
        Self::new(dim, coords, values, weights, total)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn domain_measure(&self) -> f64 {
        self.domain_measure
    }

    /// Same points and weights, values mapped pointwise.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }

    /// Same points and weights, values from a function of the coordinates.
    pub fn with_values_from(&self, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let values: Vec<f64> = (0..self.len()).map(|i| f(self.point(i))).collect();
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::InvalidField("NaN value".into()));
        }
        Ok(Self {
            values,
            ..self.clone()
        })
    }

    /// Pointwise product with another field on the same samples.
    pub fn product(&self, other: &Self) -> Result<Self> {
        if other.len() != self.len() {
            return Err(Error::InvalidField(
                "product of fields with different sample sets".into(),
            ));
        }
        Ok(self.map_indexed(|i, v| v * other.values[i]))
    }

    fn map_indexed(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        Self {
            values: self
                .values
                .iter()
                .enumerate()
                .map(|(i, &v)| f(i, v))
                .collect(),
            ..self.clone()
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `Σ w|f|^p`, the sampled `‖f‖_p^p`.
    pub fn lp_norm_pow(&self, p: f64) -> f64 {
        self.values
            .iter()
            .zip(&self.weights)
            .map(|(v, w)| w * v.abs().powf(p))
            .sum()
    }

    pub fn lp_norm(&self, p: f64) -> f64 {
        self.lp_norm_pow(p).powf(1.0 / p)
    }

    /// Reads rows `coord_1, …, coord_d, value, weight`. A header row is
    /// accepted when its fields are not numeric.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut dim = None;
        let (mut coords, mut values, mut weights) = (Vec::new(), Vec::new(), Vec::new());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let parsed: std::result::Result<Vec<f64>, _> =
                rec.iter().map(str::parse::<f64>).collect();
            let row = match parsed {
                Ok(row) => row,
                Err(_) if line == 0 => continue,
                Err(e) => return Err(Error::InvalidField(format!("line {}: {e}", line + 1))),
            };
            if row.len() < 3 {
                return Err(Error::InvalidField(format!(
                    "line {}: need coordinates, value and weight",
                    line + 1
                )));
            }
            let d = row.len() - 2;
            if *dim.get_or_insert(d) != d {
                return Err(Error::InvalidField(format!(
                    "line {}: inconsistent column count",
                    line + 1
                )));
            }
            coords.extend_from_slice(&row[..d]);
            values.push(row[d]);
            weights.push(row[d + 1]);
        }
        Self::from_weights(dim.unwrap_or(1), coords, values, weights)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (0..self.dim).map(|i| format!("x{i}")).collect();
        header.push("value".into());
        header.push("weight".into());
        w.write_record(&header)?;
        for i in 0..self.len() {
            let mut row: Vec<String> = self.point(i).iter().map(|c| format!("{c:e}")).collect();
            row.push(format!("{:e}", self.values[i]));
            row.push(format!("{:e}", self.weights[i]));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Second Lorentz exponent; `∞` is a distinct variant.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LorentzExponent {
    Finite(f64),
    Infinite,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LorentzIndex {
    pub p: f64,
    pub q: LorentzExponent,
}

impl LorentzIndex {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Lorentz index p = {p} must lie in (1, inf)"
            )));
        }
        if !(q >= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "Lorentz index q = {q} must be >= 1"
            )));
        }
        let q = if q.is_infinite() {
            LorentzExponent::Infinite
        } else {
            LorentzExponent::Finite(q)
        };
        Ok(Self { p, q })
    }

    /// The weak space `L^{p,∞}`.
    pub fn weak(p: f64) -> Result<Self> {
        Self::new(p, f64::INFINITY)
    }

    /// `L^{p,p} = L^p`.
    pub fn lebesgue(p: f64) -> Result<Self> {
        Self::new(p, p)
    }
}

/// Step representation of `λ_f`: distinct positive levels of `|f|` in
/// decreasing order, and `mass[j] = |{|f| >= levels[j]}|`.
#[derive(Clone, Debug)]
pub struct Distribution {
    levels: Vec<f64>,
    mass: Vec<f64>,
    support: f64,
}

impl Distribution {
    pub fn of(f: &SampledScalarField) -> Self {
        let mut pairs: Vec<(f64, f64)> = f
            .values
            .iter()
            .zip(&f.weights)
            .filter(|(v, _)| **v != 0.0)
            .map(|(v, w)| (v.abs(), *w))
            .collect();
        pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut levels = Vec::new();
        let mut mass = Vec::new();
        let mut acc = 0.0;
        for (a, w) in pairs {
            acc += w;
            if levels.last() == Some(&a) {
                *mass.last_mut().unwrap() = acc;
            } else {
                levels.push(a);
                mass.push(acc);
            }
        }
        Self {
            levels,
            mass,
            support: acc,
        }
    }

    /// `λ(t)` for `t >= 0`.
    pub fn at(&self, t: f64) -> f64 {
        let count = self.levels.partition_point(|&a| a > t);
        if count == 0 {
            0.0
        } else {
            self.mass[count - 1]
        }
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn support_measure(&self) -> f64 {
        self.support
    }

    fn has_infinite_level(&self) -> bool {
        self.levels.first().is_some_and(|a| a.is_infinite())
    }

    /// `‖f‖_{p,q}` by exact integration of the step function.
    pub fn quasinorm(&self, idx: LorentzIndex) -> Result<f64> {
        if self.has_infinite_level() {
            return Err(Error::NonFiniteNorm(
                "field takes infinite values on a set of positive measure".into(),
            ));
        }
        let p = idx.p;
        let value = match idx.q {
            LorentzExponent::Infinite => self
                .levels
                .iter()
                .zip(&self.mass)
                .fold(0.0_f64, |m, (a, w)| m.max(a * w.powf(1.0 / p))),
            LorentzExponent::Finite(q) => {
                // ‖f‖^q = p Σ_j W_j^{q/p} ∫_{a_{j+1}}^{a_j} t^{q-1} dt
                let mut sum = 0.0;
                for j in 0..self.levels.len() {
                    let hi = self.levels[j];
                    let lo = self.levels.get(j + 1).copied().unwrap_or(0.0);
                    sum += self.mass[j].powf(q / p) * (hi.powf(q) - lo.powf(q));
                }
                (p / q * sum).powf(1.0 / q)
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(Error::NonFiniteNorm(format!(
                "quasi-norm overflowed ({value})"
            )))
        }
    }

    /// `‖f - T_k f‖_{p,∞} = sup_t t |{(|f| - k)_+ > t}|^{1/p}`.
    pub fn excess_weak_norm(&self, k: f64, p: f64) -> f64 {
        self.levels
            .iter()
            .zip(&self.mass)
            .take_while(|(a, _)| **a > k)
            .fold(0.0_f64, |m, (a, w)| m.max((a - k) * w.powf(1.0 / p)))
    }
}

/// `λ_f(t)`: total weight of the samples with `|f| > t`.
pub fn distribution_function(f: &SampledScalarField, t: f64) -> f64 {
    f.values
        .iter()
        .zip(&f.weights)
        .filter(|(v, _)| v.abs() > t)
        .map(|(_, w)| w)
        .sum()
}

pub fn lorentz_quasinorm(f: &SampledScalarField, idx: LorentzIndex) -> Result<f64> {
    Distribution::of(f).quasinorm(idx)
}

/// Cross-check path for [`lorentz_quasinorm`]: composite trapezoidal
/// quadrature of `p ∫ λ(t)^{q/p} t^{q-1} dt` on a logarithmic `t`-grid,
/// refined by doubling until the relative change drops below `rtol`.
pub fn lorentz_quasinorm_by_quadrature(
    f: &SampledScalarField,
    idx: LorentzIndex,
    rtol: f64,
) -> Result<f64> {
    let dist = Distribution::of(f);
    if dist.has_infinite_level() {
        return Err(Error::NonFiniteNorm(
            "field takes infinite values on a set of positive measure".into(),
        ));
    }
    let Some((&top, &bottom)) = dist.levels.first().zip(dist.levels.last()) else {
        return Ok(0.0);
    };
    let p = idx.p;
    let (s0, s1) = (bottom.ln(), top.ln());
    match idx.q {
        LorentzExponent::Infinite => {
            let mut best = bottom * dist.support.powf(1.0 / p);
            let mut prev = f64::NAN;
            let mut n = 64usize;
            while n <= 1 << 22 {
                for i in 0..=n {
                    let t = (s0 + (s1 - s0) * i as f64 / n as f64).exp() * (1.0 - 1e-15);
                    best = best.max(t * dist.at(t).powf(1.0 / p));
                }
                if (best - prev).abs() <= rtol * best {
                    return Ok(best);
                }
                prev = best;
                n *= 2;
            }
            Err(Error::NonFiniteNorm(
                "sup over the t-grid did not stabilize".into(),
            ))
        }
        LorentzExponent::Finite(q) => {
            // [0, bottom): λ is constant, integrate exactly.
            let head = dist.support.powf(q / p) * bottom.powf(q) / q;
            let g = |s: f64| {
                let t = s.exp();
                dist.at(t).powf(q / p) * t.powf(q)
            };
            let mut n = 64usize;
            let mut prev = f64::NAN;
            while n <= 1 << 22 {
                let h = (s1 - s0) / n as f64;
                let mut sum = 0.5 * (g(s0) + g(s1));
                for i in 1..n {
                    sum += g(s0 + h * i as f64);
                }
                let total = p * (head + h * sum);
                if !total.is_finite() {
                    return Err(Error::NonFiniteNorm("t-integral overflowed".into()));
                }
                let value = total.powf(1.0 / q);
                if (value - prev).abs() <= rtol * value {
                    return Ok(value);
                }
                prev = value;
                n *= 2;
            }
            Err(Error::NonFiniteNorm(
                "t-integral kept changing past the refinement cap".into(),
            ))
        }
    }
}

/// `T_k f`, pointwise `sign(f) min(|f|, k)`.
pub fn truncate(f: &SampledScalarField, k: f64) -> Result<SampledScalarField> {
    if !(k > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "truncation level k = {k} must be positive"
        )));
    }
    Ok(f.map(|v| truncate_value(v, k)))
}

#[inline]
pub fn truncate_value(v: f64, k: f64) -> f64 {
    v.clamp(-k, k)
}

/// Schedule of truncation levels used by [`dist_to_bounded`].
#[derive(Clone, Copy, Debug)]
pub struct DistanceSchedule {
    pub first: f64,
    pub factor: f64,
    pub max_steps: usize,
}

impl Default for DistanceSchedule {
    fn default() -> Self {
        Self {
            first: 1.0,
            factor: 2.0,
            max_steps: 64,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DistanceEstimate {
    pub value: f64,
    /// `(k, ‖f - T_k f‖_{p,∞})` along the schedule.
    pub history: Vec<(f64, f64)>,
    /// The schedule passed `max|f|`, so the distance is exactly zero on the samples.
    pub exact_zero: bool,
}

/// Distance of `f` to `L^∞` in `L^{p,∞}`, as the limit of `‖f - T_k f‖_{p,∞}`.
pub fn dist_to_bounded(f: &SampledScalarField, p: f64, tol: f64) -> Result<f64> {
    dist_to_bounded_with(f, p, tol, DistanceSchedule::default()).map(|d| d.value)
}

pub fn dist_to_bounded_with(
    f: &SampledScalarField,
    p: f64,
    tol: f64,
    schedule: DistanceSchedule,
) -> Result<DistanceEstimate> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance {tol} must be positive"
        )));
    }
    let dist = Distribution::of(f);
    if dist.has_infinite_level() {
        return Err(Error::NonFiniteNorm(
            "field takes infinite values on a set of positive measure".into(),
        ));
    }
    let max = dist.levels.first().copied().unwrap_or(0.0);
    let mut history = Vec::new();
    let mut k = schedule.first;
    for _ in 0..schedule.max_steps {
        if k >= max {
            history.push((k, 0.0));
            return Ok(DistanceEstimate {
                value: 0.0,
                history,
                exact_zero: true,
            });
        }
        let value = dist.excess_weak_norm(k, p);
        if let Some(&(_, prev)) = history.last() {
            if (prev - value).abs() < tol {
                history.push((k, value));
                return Ok(DistanceEstimate {
                    value,
                    history,
                    exact_zero: false,
                });
            }
        }
        history.push((k, value));
        k *= schedule.factor;
    }
    let (last_k, last_value) = history.last().copied().unwrap_or((k, f64::NAN));
    Err(Error::ScheduleExhausted { last_k, last_value })
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct CurvePoint {
    pub t: f64,
    pub lambda: f64,
    /// `t λ(t)^{1/p}`
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClosureTest {
    pub in_closure: bool,
    /// Tail of the curve is not monotone, the verdict rests on `tol` alone.
    pub inconclusive: bool,
    pub tail_value: f64,
    pub curve: Vec<CurvePoint>,
}

const TAIL_POINTS: usize = 6;

/// Tests `lim_{t→∞} t λ_f(t)^{1/p} = 0` on the samples.
///
/// The largest resolvable `t` is the second-largest distinct level of `|f|`:
/// there the superlevel set is still nonempty. A field with a single positive
/// level is resolved beyond its maximum, where the curve vanishes.
pub fn is_in_closure(f: &SampledScalarField, p: f64, tol: f64) -> Result<ClosureTest> {
    if !(p > 1.0) {
        return Err(Error::InvalidArgument(format!("p = {p} must exceed 1")));
    }
    let dist = Distribution::of(f);
    if dist.has_infinite_level() {
        return Ok(ClosureTest {
            in_closure: false,
            inconclusive: false,
            tail_value: f64::INFINITY,
            curve: Vec::new(),
        });
    }
    // Curve at t = a_{j+1}: λ = mass[j]; ascending in t.
    let mut curve: Vec<CurvePoint> = Vec::with_capacity(dist.levels.len());
    for j in (0..dist.levels.len()).rev() {
        let t = dist.levels.get(j + 1).copied().unwrap_or(0.0);
        let lambda = dist.mass[j];
        curve.push(CurvePoint {
            t,
            lambda,
            scaled: t * lambda.powf(1.0 / p),
        });
    }
    let tail_value = if dist.levels.len() < 2 {
        0.0
    } else {
        curve.last().map(|c| c.scaled).unwrap_or(0.0)
    };
    let tail: Vec<f64> = curve
        .iter()
        .rev()
        .take(TAIL_POINTS)
        .map(|c| c.scaled)
        .collect();
    let rel = 1e-2 * tail.iter().fold(0.0_f64, |m, v| m.max(*v));
    let nonincreasing = tail.windows(2).all(|w| w[0] <= w[1] + rel);
    let nondecreasing = tail.windows(2).all(|w| w[0] + rel >= w[1]);
    Ok(ClosureTest {
        in_closure: tail_value < tol,
        inconclusive: !(nonincreasing || nondecreasing),
        tail_value,
        curve,
    })
}

/// Writes `t, lambda, t*lambda^(1/p)` rows.
pub fn write_curve_csv<W: Write>(curve: &[CurvePoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["t", "lambda", "t_lambda_pow"])?;
    for c in curve {
        w.write_record([
            format!("{:e}", c.t),
            format!("{:e}", c.lambda),
            format!("{:e}", c.scaled),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Log-spaced samples of the distribution curve between the smallest and
/// largest positive levels, for plotting.
pub fn distribution_curve(f: &SampledScalarField, p: f64, points: usize) -> Vec<CurvePoint> {
    let dist = Distribution::of(f);
    let (Some(&top), Some(&bottom)) = (dist.levels.first(), dist.levels.last()) else {
        return Vec::new();
    };
    let n = points.max(2);
    (0..n)
        .map(|i| {
            let t = if top == bottom {
                top * i as f64 / (n - 1) as f64
            } else {
                (bottom.ln() + (top.ln() - bottom.ln()) * i as f64 / (n - 1) as f64).exp()
                    * (1.0 - 1e-12)
            };
            let lambda = dist.at(t);
            CurvePoint {
                t,
                lambda,
                scaled: t * lambda.powf(1.0 / p),
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SobolevProvenance {
    UserOverride,
    DiscreteEstimate,
}

impl std::fmt::Display for SobolevProvenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SobolevProvenance::UserOverride => f.write_str("user override"),
            SobolevProvenance::DiscreteEstimate => f.write_str("discrete estimate"),
        }
    }
}

/// Constant of the embedding `‖g‖_{p*,q} <= S ‖∇g‖_{p,q}`; the estimate uses
/// `q = p`, recorded in `lorentz_q`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SobolevConstant {
    pub n: usize,
    pub p: f64,
    pub value: f64,
    pub provenance: SobolevProvenance,
    pub lorentz_q: f64,
    /// Trial profile attaining the estimate, when estimated.
    pub best_profile: Option<String>,
}

impl SobolevConstant {
    pub fn user_override(n: usize, p: f64, value: f64) -> Result<Self> {
        check_sobolev_range(n, p)?;
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "Sobolev constant {value} must be positive"
            )));
        }
        Ok(Self {
            n,
            p,
            value,
            provenance: SobolevProvenance::UserOverride,
            lorentz_q: p,
            best_profile: None,
        })
    }

    pub fn p_star(&self) -> f64 {
        sobolev_exponent(self.n, self.p)
    }

    pub fn unit_ball_measure(&self) -> f64 {
        unit_ball_measure(self.n)
    }

    /// `α^{1/p} / S`, the admissible distance bound.
    pub fn distance_threshold(&self, alpha: f64) -> f64 {
        alpha.powf(1.0 / self.p) / self.value
    }
}

fn check_sobolev_range(n: usize, p: f64) -> Result<()> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "dimension N = {n} must be at least 2"
        )));
    }
    if !(p > 1.0 && p < n as f64) {
        return Err(Error::InvalidArgument(format!(
            "p = {p} must lie in (1, N = {n})"
        )));
    }
    Ok(())
}

/// Radial trial profile `g(s)`, `s = |x|/R ∈ [0, 1]`, vanishing at `s = 1`.
#[derive(Clone)]
pub struct TrialProfile {
    pub name: String,
    pub g: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

/// Fixed trial family for the discrete estimate: polynomial bubbles and
/// truncated critical power profiles `min(ε^{-σ}, s^{-σ}) - 1`, `σ = (N-p)/p`.
pub fn sobolev_trial_family(n: usize, p: f64) -> Vec<TrialProfile> {
    let mut family = Vec::new();
    for a in [1.0, 2.0, 4.0] {
        family.push(TrialProfile {
            name: format!("1-s^{a}"),
            g: Arc::new(move |s: f64| (1.0 - s.powf(a)).max(0.0)),
        });
    }
    family.push(TrialProfile {
        name: "(1-s^2)^2".into(),
        g: Arc::new(|s: f64| (1.0 - s * s).max(0.0).powi(2)),
    });
    let sigma = (n as f64 - p) / p;
    for eps in [0.3, 0.1, 0.05] {
        family.push(TrialProfile {
            name: format!("min(eps^-sigma, s^-sigma)-1, eps={eps}"),
            g: Arc::new(move |s: f64| (s.max(eps).powf(-sigma) - 1.0).max(0.0)),
        });
    }
    family
}

/// Ratio `‖g_h‖_{p*,p} / ‖∇g_h‖_p` of the interpolant of a trial profile.
pub fn sobolev_ratio(mesh: &Arc<Mesh>, p: f64, profile: &TrialProfile) -> Result<f64> {
    let radius = mesh.inscribed_radius();
    let g = profile.g.clone();
    let u = DiscreteFunction::interpolate(mesh, |x| g(crate::profile::norm(x) / radius), true);
    let grad = norm_w1p(&u, p);
    if grad == 0.0 {
        return Ok(0.0);
    }
    let p_star = sobolev_exponent(mesh.field_dim(), p);
    let num = lorentz_quasinorm(&u.to_sampled(), LorentzIndex::new(p_star, p)?)?;
    Ok(num / grad)
}

/// Sobolev constant from an override, or estimated on `mesh` over the trial
/// family. The override takes precedence.
pub fn sobolev_constant(
    n: usize,
    p: f64,
    mesh: Option<&Arc<Mesh>>,
    override_value: Option<f64>,
) -> Result<SobolevConstant> {
    check_sobolev_range(n, p)?;
    if let Some(v) = override_value {
        return SobolevConstant::user_override(n, p, v);
    }
    let Some(mesh) = mesh else {
        return Err(Error::MissingOverride { n, p });
    };
    if mesh.field_dim() != n {
        return Err(Error::InvalidArgument(format!(
            "mesh lives in dimension {}, Sobolev constant requested for N = {n}",
            mesh.field_dim()
        )));
    }
    estimate_over(mesh, n, p, &sobolev_trial_family(n, p))
}

pub fn estimate_over(
    mesh: &Arc<Mesh>,
    n: usize,
    p: f64,
    family: &[TrialProfile],
) -> Result<SobolevConstant> {
    let mut best = (0.0, None);
    for profile in family {
        let r = sobolev_ratio(mesh, p, profile)?;
        if r > best.0 {
            best = (r, Some(profile.name.clone()));
        }
    }
    if best.0 <= 0.0 {
        return Err(Error::InvalidArgument(
            "trial family produced no positive ratio".into(),
        ));
    }
    Ok(SobolevConstant {
        n,
        p,
        value: best.0,
        provenance: SobolevProvenance::DiscreteEstimate,
        lorentz_q: p,
        best_profile: best.1,
    })
}
