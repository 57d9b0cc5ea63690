//! JSON run configuration: problem specification, solver settings, output
//! location and case selections.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::discretization::{DiscreteFunction, RhsFunctional};
use crate::error::{Error, Result};
use crate::lorentz::{sobolev_constant, SobolevConstant};
use crate::mesh::Mesh;
use crate::obstacle::{shift_obstacle, Obstacle};
use crate::profile::{
    Coefficient, MatrixCoefficient, MatrixProfile, ScalarProfile, VectorCoefficient, VectorProfile,
};
use crate::solver::SolveConfig;
use crate::structural::{ModelData, QuasilinearField};
use crate::verification::{self as cases, CaseResult};

/// Environment variable overriding the output root.
pub const OUTPUT_ENV: &str = "NONCOERCIVE_OUT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub problem: Option<ProblemSpec>,
    #[serde(default)]
    pub solver: SolveConfig,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default)]
    pub cases: Vec<CaseSpec>,
    /// Replaces the computed Sobolev constant.
    #[serde(default)]
    pub sobolev_override: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads for `sweep`.
    #[serde(default = "default_workers")]
    pub workers: usize,
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

fn default_workers() -> usize {
    2
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            problem: None,
            solver: SolveConfig::default(),
            output: default_output(),
            cases: Vec::new(),
            sobolev_override: None,
            seed: 0,
            workers: default_workers(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DomainSpec {
    /// Ball of radius `radius` in `R^dim`, reduced to the radial variable.
    Radial {
        dim: usize,
        #[serde(default = "one")]
        radius: f64,
        cells: usize,
        /// Innermost node of a geometric grading, uniform when absent.
        #[serde(default)]
        graded_inner: Option<f64>,
    },
    UnitSquare {
        k: usize,
    },
    UnitDisc {
        k: usize,
    },
    /// Vertex and cell CSV files as written by the mesh exporter.
    MeshCsv {
        vertices: PathBuf,
        cells: PathBuf,
        #[serde(default)]
        radial_dim: usize,
    },
}

fn one() -> f64 {
    1.0
}

impl DomainSpec {
    pub fn build(&self) -> Result<Arc<Mesh>> {
        match self {
            DomainSpec::Radial {
                dim,
                radius,
                cells,
                graded_inner: None,
            } => Mesh::radial_uniform(*dim, *radius, *cells),
            DomainSpec::Radial {
                dim,
                radius,
                cells,
                graded_inner: Some(inner),
            } => Mesh::radial_graded(*dim, *radius, *cells, *inner),
            DomainSpec::UnitSquare { k } => Mesh::unit_square(*k),
            DomainSpec::UnitDisc { k } => Mesh::unit_disc(*k),
            DomainSpec::MeshCsv {
                vertices,
                cells,
                radial_dim,
            } => Mesh::read_csv(open(vertices)?, open(cells)?, *radial_dim),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            DomainSpec::Radial { dim, .. } => *dim,
            DomainSpec::MeshCsv { radial_dim, .. } if *radial_dim > 0 => *radial_dim,
            _ => 2,
        }
    }
}

fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::Config {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Model field `⟨Hξ,ξ⟩^{(p-2)/2} Hξ + B|u|^{p-2}u` with envelope `b`, `φ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldSpec {
    pub p: f64,
    #[serde(default)]
    pub matrix: Option<MatrixSpec>,
    #[serde(default)]
    pub drift: Option<VectorProfile>,
    pub b: ScalarProfile,
    #[serde(default)]
    pub phi: Option<ScalarProfile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixSpec {
    pub profile: MatrixProfile,
    /// Eigenvalue bounds of `H`.
    pub alpha: f64,
    pub lambda_max: f64,
}

impl FieldSpec {
    pub fn build(&self, dim: usize) -> Result<QuasilinearField> {
        let mut data = ModelData::p_laplacian(dim, self.p);
        if let Some(m) = &self.matrix {
            data = data.with_matrix(
                MatrixCoefficient::from_profile(m.profile.clone()),
                m.alpha,
                m.lambda_max,
            );
        }
        if let Some(d) = &self.drift {
            data = data.with_drift(VectorCoefficient::from_profile(d.clone()));
        }
        let phi = self
            .phi
            .clone()
            .map(Coefficient::from_profile)
            .unwrap_or_else(Coefficient::zero);
        QuasilinearField::model(data, Coefficient::from_profile(self.b.clone()), phi)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RhsSpec {
    Zero,
    /// `⟨Φ, w⟩ = ∫ f w`
    Load {
        profile: ScalarProfile,
    },
    /// `⟨Φ, w⟩ = ∫ |F|^{p-2} F · ∇w`
    Flux {
        field: VectorProfile,
    },
}

impl RhsSpec {
    pub fn build(&self, p: f64) -> RhsFunctional {
        match self {
            RhsSpec::Zero => RhsFunctional::constant_load(0.0),
            RhsSpec::Load { profile } => {
                RhsFunctional::load(Coefficient::from_profile(profile.clone()))
            }
            RhsSpec::Flux { field } => {
                RhsFunctional::f_field(VectorCoefficient::from_profile(field.clone()), p)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    /// `ψ ≡ value`; `"-inf"` is not representable in JSON, use `unconstrained`.
    Constant {
        value: f64,
    },
    Radial {
        profile: ScalarProfile,
    },
    /// Rows `node,psi`.
    NodalCsv {
        path: PathBuf,
    },
    Unconstrained,
}

/// Obstacle with an optional witness `g ∈ K_ψ`; without one the obstacle must
/// satisfy `ψ <= 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObstacleConfig {
    pub psi: ObstacleSpec,
    #[serde(default)]
    pub witness: Option<ScalarProfile>,
}

/// Problem ready to solve. With a witness the field and obstacle are shifted
/// and `shift` must be added back to the solution.
pub struct BuiltProblem {
    pub mesh: Arc<Mesh>,
    pub field: QuasilinearField,
    pub rhs: RhsFunctional,
    pub obstacle: Option<Obstacle>,
    pub shift: Option<DiscreteFunction>,
    pub sobolev: SobolevConstant,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub domain: DomainSpec,
    pub field: FieldSpec,
    #[serde(default = "zero_rhs")]
    pub rhs: RhsSpec,
    #[serde(default)]
    pub obstacle: Option<ObstacleConfig>,
}

fn zero_rhs() -> RhsSpec {
    RhsSpec::Zero
}

impl ProblemSpec {
    pub fn build(&self, sobolev_override: Option<f64>) -> Result<BuiltProblem> {
        let mesh = self.domain.build()?;
        let dim = mesh.field_dim();
        let field = self.field.build(dim)?;
        let rhs = self.rhs.build(self.field.p);
        let sobolev = sobolev_constant(dim, self.field.p, Some(&mesh), sobolev_override)?;
        let Some(ob) = &self.obstacle else {
            return Ok(BuiltProblem {
                mesh,
                field,
                rhs,
                obstacle: None,
                shift: None,
                sobolev,
            });
        };
        let raw: Vec<f64> = match &ob.psi {
            ObstacleSpec::Constant { value } => vec![*value; mesh.node_count()],
            ObstacleSpec::Radial { profile } => (0..mesh.node_count())
                .map(|i| profile.eval(mesh.node(i)))
                .collect(),
            ObstacleSpec::NodalCsv { path } => read_raw_csv(path, mesh.node_count())?,
            ObstacleSpec::Unconstrained => vec![f64::NEG_INFINITY; mesh.node_count()],
        };
        match &ob.witness {
            None => {
                let obstacle = Obstacle::from_values(&mesh, &raw)?;
                Ok(BuiltProblem {
                    mesh,
                    field,
                    rhs,
                    obstacle: Some(obstacle),
                    shift: None,
                    sobolev,
                })
            }
            Some(w) => {
                let g = DiscreteFunction::interpolate(&mesh, |x| w.eval(x), true);
                let (shifted, obstacle) = shift_obstacle(&field, &raw, &g)?;
                Ok(BuiltProblem {
                    mesh,
                    field: shifted,
                    rhs,
                    obstacle: Some(obstacle),
                    shift: Some(g),
                    sobolev,
                })
            }
        }
    }
}

fn read_raw_csv(path: &Path, nodes: usize) -> Result<Vec<f64>> {
    let mut raw = vec![f64::NEG_INFINITY; nodes];
    let mut rdr = csv::Reader::from_reader(open(path)?);
    for row in rdr.records() {
        let row = row?;
        let bad = |m: String| Error::Config {
            path: path.display().to_string(),
            message: m,
        };
        let node: usize = row
            .get(0)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad node index: {e}")))?;
        let v: f64 = row
            .get(1)
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| bad(format!("bad obstacle value: {e}")))?;
        *raw.get_mut(node)
            .ok_or_else(|| bad(format!("node {node} out of range")))? = v;
    }
    Ok(raw)
}

/// One verification case with its parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case", deny_unknown_fields)]
pub enum CaseSpec {
    DistRadial {
        #[serde(rename = "B")]
        amplitude: f64,
        #[serde(rename = "N")]
        dim: usize,
    },
    ExampleConcentration {
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(default = "two")]
        p: f64,
        #[serde(default = "default_n_list")]
        n_list: Vec<u64>,
        #[serde(default = "default_concentration_cells")]
        cells: usize,
    },
    ManufacturedLaplacian {
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(default = "default_refinements_cells")]
        cells: Vec<usize>,
    },
    ManufacturedPLaplacian {
        #[serde(rename = "N", default = "four")]
        dim: usize,
        #[serde(default = "three_f")]
        p: f64,
        #[serde(default = "default_refinements_cells")]
        cells: Vec<usize>,
    },
    SchemeConsistency {
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(rename = "B", default = "default_b")]
        amplitude: f64,
        #[serde(default = "default_scheme_cells")]
        cells: usize,
    },
    ExampleNonexistence {
        #[serde(default = "one")]
        gamma: f64,
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(default = "three")]
        refinements: usize,
    },
    ExampleResonance {
        #[serde(rename = "N", default = "two_u")]
        dim: usize,
        #[serde(default = "three")]
        refinements: usize,
    },
    ObstacleRadial {
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(default = "default_psi")]
        psi: f64,
        #[serde(default = "default_refinements_cells")]
        cells: Vec<usize>,
    },
    RegularityProbe {
        #[serde(rename = "N", default = "three")]
        dim: usize,
        #[serde(default = "two")]
        p: f64,
        #[serde(default = "default_r")]
        r: f64,
        #[serde(rename = "B", default = "default_regularity_b")]
        amplitude: f64,
        #[serde(default = "default_regularity_cells")]
        cells: Vec<usize>,
    },
}

fn two() -> f64 {
    2.0
}
fn three_f() -> f64 {
    3.0
}
fn two_u() -> usize {
    2
}
fn three() -> usize {
    3
}
fn four() -> usize {
    4
}
fn default_n_list() -> Vec<u64> {
    vec![1, 2, 4, 8]
}
fn default_concentration_cells() -> usize {
    3 << 14
}
fn default_refinements_cells() -> Vec<usize> {
    vec![64, 128, 256, 512]
}
fn default_b() -> f64 {
    0.1
}
fn default_scheme_cells() -> usize {
    256
}
fn default_psi() -> f64 {
    -0.05
}
fn default_r() -> f64 {
    2.5
}
fn default_regularity_b() -> f64 {
    0.02
}
fn default_regularity_cells() -> Vec<usize> {
    vec![32, 64, 128]
}

impl CaseSpec {
    /// Case identifier as used on the command line.
    pub fn name(&self) -> &'static str {
        match self {
            CaseSpec::DistRadial { .. } => "dist_radial",
            CaseSpec::ExampleConcentration { .. } => "example_concentration",
            CaseSpec::ManufacturedLaplacian { .. } => "manufactured_laplacian",
            CaseSpec::ManufacturedPLaplacian { .. } => "manufactured_p_laplacian",
            CaseSpec::SchemeConsistency { .. } => "scheme_consistency",
            CaseSpec::ExampleNonexistence { .. } => "example_nonexistence",
            CaseSpec::ExampleResonance { .. } => "example_resonance",
            CaseSpec::ObstacleRadial { .. } => "obstacle_radial",
            CaseSpec::RegularityProbe { .. } => "regularity_probe",
        }
    }

    /// Names of all cases, in a fixed order.
    pub const NAMES: [&'static str; 9] = [
        "dist_radial",
        "example_concentration",
        "manufactured_laplacian",
        "manufactured_p_laplacian",
        "scheme_consistency",
        "example_nonexistence",
        "example_resonance",
        "obstacle_radial",
        "regularity_probe",
    ];

    /// Builds a case from its name and a JSON object of parameters; missing
    /// parameters take their defaults.
    pub fn from_name(
        name: &str,
        params: serde_json::Map<String, serde_json::Value>,
    ) -> Result<Self> {
        let mut obj = params;
        obj.insert("case".into(), serde_json::Value::String(name.into()));
        parse_value(serde_json::Value::Object(obj), &format!("case {name}"))
    }

    pub fn run(&self, solver: &SolveConfig, sobolev_override: Option<f64>) -> Result<CaseResult> {
        match self {
            CaseSpec::DistRadial { amplitude, dim } => cases::dist_radial(*amplitude, *dim),
            CaseSpec::ExampleConcentration {
                dim,
                p,
                n_list,
                cells,
            } => cases::example_concentration(*dim, *p, n_list, *cells),
            CaseSpec::ManufacturedLaplacian { dim, cells } => {
                cases::manufactured_laplacian(*dim, cells, solver)
            }
            CaseSpec::ManufacturedPLaplacian { dim, p, cells } => {
                cases::manufactured_p_laplacian(*dim, *p, cells, solver)
            }
            CaseSpec::SchemeConsistency {
                dim,
                amplitude,
                cells,
            } => cases::scheme_consistency(*dim, *amplitude, *cells, sobolev_override, solver),
            CaseSpec::ExampleNonexistence {
                gamma,
                dim,
                refinements,
            } => cases::example_nonexistence(*gamma, *dim, *refinements, solver),
            CaseSpec::ExampleResonance { dim, refinements } => {
                cases::example_resonance(*dim, *refinements, solver)
            }
            CaseSpec::ObstacleRadial { dim, psi, cells } => {
                cases::obstacle_radial(*dim, *psi, cells, solver)
            }
            CaseSpec::RegularityProbe {
                dim,
                p,
                r,
                amplitude,
                cells,
            } => cases::regularity_model(*dim, *p, *r, *amplitude, cells, sobolev_override, solver),
        }
    }
}

fn parse_value<T: for<'de> Deserialize<'de>>(value: serde_json::Value, origin: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| Error::Config {
        path: format!("{origin}: {}", e.path()),
        message: e.inner().to_string(),
    })
}

impl RunConfig {
    /// Parses JSON text; errors name the offending field path and position.
    pub fn from_json(text: &str) -> Result<Self> {
        let mut de = serde_json::Deserializer::from_str(text);
        let cfg: RunConfig =
            serde_path_to_error::deserialize(&mut de).map_err(|e| Error::Config {
                path: e.path().to_string(),
                message: e.inner().to_string(),
            })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate().map_err(|e| Error::Config {
            path: "solver".into(),
            message: e.to_string(),
        })?;
        if let Some(s) = self.sobolev_override {
            if !(s > 0.0) {
                return Err(Error::Config {
                    path: "sobolev_override".into(),
                    message: format!("{s} must be positive"),
                });
            }
        }
        if self.workers == 0 {
            return Err(Error::Config {
                path: "workers".into(),
                message: "at least one worker is required".into(),
            });
        }
        if let Some(p) = &self.problem {
            let dim = p.domain.dim();
            if !(p.field.p > 1.0 && p.field.p < dim as f64) {
                return Err(Error::Config {
                    path: "problem.field.p".into(),
                    message: format!("p = {} must lie in (1, N) with N = {dim}", p.field.p),
                });
            }
        }
        Ok(())
    }

    /// Output root: the `NONCOERCIVE_OUT` variable wins over the file.
    pub fn output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output.clone(),
        }
    }
}

/// Creates `dir` and checks that a file can be written in it.
pub fn ensure_writable(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write_test");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_json("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
    }

    #[test]
    fn unknown_field_is_reported_with_path() {
        let err = RunConfig::from_json(r#"{"solver": {"newton_tl": 1e-8}}"#).unwrap_err();
        match err {
            Error::Config { path, message } => {
                assert_eq!(path, "solver.newton_tl");
                assert!(message.contains("newton_tl"), "{message}");
                assert!(message.contains("line 1"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn nested_type_error_path() {
        let text = r#"{"problem": {"domain": {"kind": "radial", "dim": 3, "cells": "many"},
            "field": {"p": 2, "b": {"kind": "constant", "value": 0}}}}"#;
        match RunConfig::from_json(text).unwrap_err() {
            Error::Config { path, message } => {
                assert!(path.starts_with("problem.domain"), "{path}");
                assert!(message.contains("invalid type"), "{message}");
            }
            e => panic!("{e}"),
        }
    }

    #[test]
    fn exponent_outside_range_rejected() {
        let text = r#"{"problem": {"domain": {"kind": "radial", "dim": 2, "cells": 8},
            "field": {"p": 2, "b": {"kind": "constant", "value": 0}}}}"#;
        assert!(matches!(
            RunConfig::from_json(text),
            Err(Error::Config { .. })
        ));
    }

    #[test]
    fn case_defaults_and_names() {
        let c = CaseSpec::from_name(
            "dist_radial",
            serde_json::from_str(r#"{"B": 1, "N": 2}"#).unwrap(),
        )
        .unwrap();
        assert_eq!(
            c,
            CaseSpec::DistRadial {
                amplitude: 1.0,
                dim: 2
            }
        );
        for name in CaseSpec::NAMES {
            if name == "dist_radial" {
                continue;
            }
            let c = CaseSpec::from_name(name, Default::default()).unwrap();
            assert_eq!(c.name(), name);
        }
        assert!(CaseSpec::from_name("nope", Default::default()).is_err());
    }

    #[test]
    fn problem_builds_with_obstacle() {
        let text = r#"{"problem": {"domain": {"kind": "radial", "dim": 3, "cells": 16},
            "field": {"p": 2, "b": {"kind": "constant", "value": 0}},
            "rhs": {"kind": "load", "profile": {"kind": "constant", "value": -3}},
            "obstacle": {"psi": {"kind": "constant", "value": -0.05}}}}"#;
        let cfg = RunConfig::from_json(text).unwrap();
        let built = cfg.problem.unwrap().build(None).unwrap();
        let ob = built.obstacle.unwrap();
        assert!(ob.psi().iter().all(|v| *v == Some(-0.05)));
        assert_eq!(built.mesh.node_count(), 17);
    }

    #[test]
    fn positive_obstacle_needs_witness() {
        let base = r#"{"domain": {"kind": "radial", "dim": 3, "cells": 8},
            "field": {"p": 2, "b": {"kind": "constant", "value": 0}},
            "obstacle": {"psi": {"kind": "constant", "value": 0.1}}}"#;
        let spec: ProblemSpec = serde_json::from_str(base).unwrap();
        assert!(matches!(spec.build(None), Err(Error::NotAdmissible { .. })));
    }
}
