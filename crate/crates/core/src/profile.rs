//! Named coefficient profiles and pointwise coefficient functions.
//!
//! Profiles are the serializable vocabulary used by run configurations;
//! [`Coefficient`], [`VectorCoefficient`] and [`MatrixCoefficient`] are the
//! evaluatable forms used by fields and right-hand sides. Arbitrary closures
//! can be wrapped as well.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub(crate) fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarProfile {
    /// `value`
    Constant { value: f64 },
    /// `amplitude / |x|`
    InverseRadius { amplitude: f64 },
    /// `amplitude * |x|^exponent`
    PowerLaw { amplitude: f64, exponent: f64 },
    /// `amplitude * (1 - |x|²/radius²)_+`
    Bump { amplitude: f64, radius: f64 },
}

impl ScalarProfile {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r = norm(x);
        match *self {
            ScalarProfile::Constant { value } => value,
            ScalarProfile::InverseRadius { amplitude } => {
                if r == 0.0 {
                    if amplitude == 0.0 {
                        0.0
                    } else {
                        f64::INFINITY * amplitude.signum()
                    }
                } else {
                    amplitude / r
                }
            }
            ScalarProfile::PowerLaw {
                amplitude,
                exponent,
            } => {
                if r == 0.0 && exponent < 0.0 {
                    f64::INFINITY * amplitude.signum()
                } else {
                    amplitude * r.powf(exponent)
                }
            }
            ScalarProfile::Bump { amplitude, radius } => {
                let s = r / radius;
                amplitude * (1.0 - s * s).max(0.0)
            }
        }
    }

    fn label(&self) -> String {
        match *self {
            ScalarProfile::Constant { value } => format!("{value}"),
            ScalarProfile::InverseRadius { amplitude } => format!("{amplitude}/|x|"),
            ScalarProfile::PowerLaw {
                amplitude,
                exponent,
            } => format!("{amplitude}|x|^{exponent}"),
            ScalarProfile::Bump { amplitude, radius } => {
                format!("{amplitude}(1-|x|^2/{radius}^2)_+")
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum VectorProfile {
    /// `profile(x) * x/|x|`, zero at the origin.
    Radial {
        profile: ScalarProfile,
    },
    Constant {
        vector: Vec<f64>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MatrixProfile {
    /// `scale(x) * I`
    Identity { scale: ScalarProfile },
    /// Row-major constant matrix.
    Constant { matrix: Vec<Vec<f64>> },
}

type ScalarFn = dyn Fn(&[f64]) -> f64 + Send + Sync;
type VectorFn = dyn Fn(&[f64], &mut [f64]) + Send + Sync;

/// Pointwise scalar coefficient `x ↦ c(x)`.
#[derive(Clone)]
pub struct Coefficient {
    label: String,
    f: Arc<ScalarFn>,
}

impl fmt::Debug for Coefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Coefficient({})", self.label)
    }
}

impl Coefficient {
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::from_profile(ScalarProfile::Constant { value })
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn inverse_radius(amplitude: f64) -> Self {
        Self::from_profile(ScalarProfile::InverseRadius { amplitude })
    }

    pub fn from_profile(profile: ScalarProfile) -> Self {
        let label = profile.label();
        Self {
            label,
            f: Arc::new(move |x| profile.eval(x)),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Pointwise `T_n c = min(c, n)` for a nonnegative coefficient.
    pub fn truncated(&self, level: f64) -> Self {
        let inner = self.f.clone();
        Self {
            label: format!("T_{level}({})", self.label),
            f: Arc::new(move |x| inner(x).min(level)),
        }
    }
}

/// Pointwise vector coefficient `x ↦ V(x) ∈ R^N`.
#[derive(Clone)]
pub struct VectorCoefficient {
    label: String,
    f: Arc<VectorFn>,
}

impl fmt::Debug for VectorCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "VectorCoefficient({})", self.label)
    }
}

impl VectorCoefficient {
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn zero() -> Self {
        Self::custom("0", |_, out| out.iter_mut().for_each(|v| *v = 0.0))
    }

    /// `c(|x|) x/|x|` for a radial scalar profile.
    pub fn radial(profile: ScalarProfile) -> Self {
        Self::from_profile(VectorProfile::Radial { profile })
    }

    pub fn from_profile(profile: VectorProfile) -> Self {
        match profile {
            VectorProfile::Radial { profile } => {
                let label = format!("({}) x/|x|", profile.label());
                Self::custom(label, move |x, out| {
                    let r = norm(x);
                    if r == 0.0 {
                        out.iter_mut().for_each(|v| *v = 0.0);
                        return;
                    }
                    let s = profile.eval(x) / r;
                    for (o, xi) in out.iter_mut().zip(x) {
                        *o = s * xi;
                    }
                })
            }
            VectorProfile::Constant { vector } => {
                let label = format!("{vector:?}");
                Self::custom(label, move |_, out| {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = vector.get(i).copied().unwrap_or(0.0);
                    }
                })
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

/// Pointwise matrix coefficient, row-major `N×N` output.
#[derive(Clone)]
pub struct MatrixCoefficient {
    label: String,
    f: Arc<VectorFn>,
}

impl fmt::Debug for MatrixCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MatrixCoefficient({})", self.label)
    }
}

impl MatrixCoefficient {
    pub fn custom(
        label: impl Into<String>,
        f: impl Fn(&[f64], &mut [f64]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn identity() -> Self {
        Self::scaled_identity(1.0)
    }

    pub fn scaled_identity(scale: f64) -> Self {
        Self::from_profile(MatrixProfile::Identity {
            scale: ScalarProfile::Constant { value: scale },
        })
    }

    pub fn from_profile(profile: MatrixProfile) -> Self {
        match profile {
            MatrixProfile::Identity { scale } => {
                let label = format!("({}) I", scale.label());
                Self::custom(label, move |x, out| {
                    let n = (out.len() as f64).sqrt().round() as usize;
                    let s = scale.eval(x);
                    out.iter_mut().for_each(|v| *v = 0.0);
                    for i in 0..n {
                        out[i * n + i] = s;
                    }
                })
            }
            MatrixProfile::Constant { matrix } => {
                let label = format!("{matrix:?}");
                Self::custom(label, move |_, out| {
                    let n = (out.len() as f64).sqrt().round() as usize;
                    for i in 0..n {
                        for j in 0..n {
                            out[i * n + j] =
                                matrix.get(i).and_then(|r| r.get(j)).copied().unwrap_or(0.0);
                        }
                    }
                })
            }
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], out: &mut [f64]) {
        (self.f)(x, out)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_radius_is_infinite_at_origin() {
        let b = Coefficient::inverse_radius(2.0);
        assert_eq!(b.eval(&[0.0, 0.0]), f64::INFINITY);
        assert!((b.eval(&[0.0, 0.5]) - 4.0).abs() < 1e-15);
        assert!((b.truncated(3.0).eval(&[0.0, 0.5]) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn radial_vector_points_outwards() {
        let v = VectorCoefficient::radial(ScalarProfile::InverseRadius { amplitude: 1.0 });
        let mut out = [0.0; 2];
        v.eval(&[3.0, 4.0], &mut out);
        assert!((out[0] - 3.0 / 25.0).abs() < 1e-15);
        assert!((out[1] - 4.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn profiles_deserialize_from_tagged_json() {
        let p: ScalarProfile =
            serde_json::from_str(r#"{"kind":"inverse_radius","amplitude":0.5}"#).unwrap();
        assert_eq!(p, ScalarProfile::InverseRadius { amplitude: 0.5 });
        let m: MatrixProfile =
            serde_json::from_str(r#"{"kind":"constant","matrix":[[2,0],[0,3]]}"#).unwrap();
        let mc = MatrixCoefficient::from_profile(m);
        let mut out = [0.0; 4];
        mc.eval(&[0.1, 0.1], &mut out);
        assert_eq!(out, [2.0, 0.0, 0.0, 3.0]);
    }
}
