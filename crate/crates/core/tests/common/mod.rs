//! Randomized invariant trials shared by the property tests and the
//! acceptance suite. Each trial derives its inputs from a seed and returns a
//! description of the first violation.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use noncoercive::discretization::FrozenProblem;
use noncoercive::lorentz::{
    distribution_function, lorentz_quasinorm, truncate, LorentzIndex, SampledScalarField,
};
use noncoercive::profile::{
    Coefficient, MatrixCoefficient, MatrixProfile, ScalarProfile, VectorCoefficient,
};
use noncoercive::solver::{frozen_solve_from, SolveConfig};
use noncoercive::structural::{verify_structural, StructuralSample};
use noncoercive::{DiscreteFunction, Mesh, ModelData, QuasilinearField, RhsFunctional};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type Trial = fn(u64) -> Result<(), String>;

pub const TRIALS: usize = 1000;

/// Runs `trial` on seeds `0..count`, returning the number of violations and
/// the first message.
pub fn run_trials(trial: Trial, count: usize) -> (usize, Option<String>) {
    let mut failures = 0;
    let mut first = None;
    for seed in 0..count as u64 {
        if let Err(m) = trial(seed) {
            failures += 1;
            first.get_or_insert(format!("seed {seed}: {m}"));
        }
    }
    (failures, first)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_0000_0000)
}

/// Random SPD matrix with its extreme eigenvalues.
fn spd(rng: &mut ChaCha8Rng, n: usize) -> (Vec<Vec<f64>>, f64, f64) {
    let a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let h = &a * a.transpose() + DMatrix::identity(n, n) * rng.random_range(1.0..2.0);
    let eig = SymmetricEigen::new(h.clone()).eigenvalues;
    let lo = eig.min();
    let hi = eig.max();
    let rows = (0..n)
        .map(|i| (0..n).map(|j| h[(i, j)]).collect())
        .collect();
    (rows, lo * (1.0 - 1e-9), hi * (1.0 + 1e-9))
}

/// Model field with random constant SPD `H` and drift `|B| <= b^{p-1}`.
fn random_model(rng: &mut ChaCha8Rng, dim: usize, p: f64) -> QuasilinearField {
    let (h, lo, hi) = spd(rng, dim);
    let amp = rng.random_range(0.0..0.5);
    let data = ModelData::p_laplacian(dim, p)
        .with_matrix(
            MatrixCoefficient::from_profile(MatrixProfile::Constant { matrix: h }),
            lo,
            hi,
        )
        .with_drift(VectorCoefficient::radial(ScalarProfile::PowerLaw {
            amplitude: amp,
            exponent: -(p - 1.0),
        }));
    let b = Coefficient::from_profile(ScalarProfile::PowerLaw {
        amplitude: amp.powf(1.0 / (p - 1.0)),
        exponent: -1.0,
    });
    QuasilinearField::model(data, b, Coefficient::zero()).expect("valid model data")
}

fn random_function(rng: &mut ChaCha8Rng, mesh: &Arc<Mesh>, scale: f64) -> DiscreteFunction {
    let coeffs = (0..mesh.node_count())
        .map(|i| {
            if mesh.is_boundary(i) {
                0.0
            } else {
                scale * rng.random_range(-1.0..1.0)
            }
        })
        .collect();
    DiscreteFunction::from_coefficients(mesh, coeffs, true).expect("coefficients match mesh")
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-2.0..2.0)).collect()
}

/// Pointwise `⟨A(ξ) − A(η), ξ − η⟩ > 0` and discrete
/// `⟨R(u₁) − R(u₂), u₁ − u₂⟩ > 0` for the frozen operator.
pub fn monotonicity(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let dim = rng.random_range(2..=4usize);
    let p = rng.random_range(1.3..(dim as f64 - 0.1));
    let field = random_model(&mut rng, dim, p);
    let samples: Vec<StructuralSample> = (0..10)
        .map(|_| {
            let mut x = random_vec(&mut rng, dim);
            x.iter_mut().for_each(|v| *v *= 0.5);
            StructuralSample {
                x,
                u: rng.random_range(-3.0..3.0),
                xi: random_vec(&mut rng, dim),
                eta: random_vec(&mut rng, dim),
            }
        })
        .collect();
    let report = verify_structural(&field, &samples).map_err(|e| e.to_string())?;
    if report.monotonicity_violations > 0 {
        return Err(format!(
            "pointwise monotonicity violated: {:?}",
            report.first_violation
        ));
    }
    let mesh =
        Mesh::radial_uniform(dim, 1.0, rng.random_range(4..16)).map_err(|e| e.to_string())?;
    let v = random_function(&mut rng, &mesh, 1.0);
    let rhs = RhsFunctional::constant_load(rng.random_range(-1.0..1.0));
    let problem = FrozenProblem::new(&field, &v, &rhs).map_err(|e| e.to_string())?;
    let u1 = random_function(&mut rng, &mesh, 2.0);
    let u2 = random_function(&mut rng, &mesh, 2.0);
    let r1 = problem.residual(&u1).map_err(|e| e.to_string())?;
    let r2 = problem.residual(&u2).map_err(|e| e.to_string())?;
    let pairing: f64 = (0..r1.len())
        .map(|i| (r1[i] - r2[i]) * (u1.coefficients()[i] - u2.coefficients()[i]))
        .sum();
    if pairing > 1e-14 {
        Ok(())
    } else {
        Err(format!("discrete pairing {pairing:e} (N = {dim}, p = {p})"))
    }
}

/// Frozen solves from two distinct starts agree within `10·newton_tol`.
pub fn uniqueness(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let dim = rng.random_range(2..=3usize);
    let p = rng.random_range(1.5..(dim as f64 - 0.1).min(2.8));
    let field = random_model(&mut rng, dim, p);
    let mesh =
        Mesh::radial_uniform(dim, 1.0, rng.random_range(4..12)).map_err(|e| e.to_string())?;
    let v = random_function(&mut rng, &mesh, 1.0);
    let rhs = RhsFunctional::constant_load(rng.random_range(0.2..2.0));
    let cfg = SolveConfig::default();
    let a = random_function(&mut rng, &mesh, 1.0);
    let b = random_function(&mut rng, &mesh, 1.0);
    let context =
        |e: noncoercive::Error| format!("{e} (N = {dim}, p = {p}, {} cells)", mesh.cell_count());
    let (u1, _) = frozen_solve_from(&field, &v, &rhs, &cfg, &a).map_err(context)?;
    let (u2, _) = frozen_solve_from(&field, &v, &rhs, &cfg, &b).map_err(context)?;
    let diff = u1
        .coefficients()
        .iter()
        .zip(u2.coefficients())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()));
    if diff <= 10.0 * cfg.newton_tol {
        Ok(())
    } else {
        Err(format!("starts differ by {diff:e} (N = {dim}, p = {p})"))
    }
}

/// Forward differences of the residual approach `J d` linearly in `ε`.
pub fn jacobian_fd(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let dim = rng.random_range(2..=4usize);
    let p = rng.random_range(1.5..(dim as f64 - 0.1));
    let field = random_model(&mut rng, dim, p);
    let cells = rng.random_range(4..12);
    let mesh = Mesh::radial_uniform(dim, 1.0, cells).map_err(|e| e.to_string())?;
    let v = random_function(&mut rng, &mesh, 1.0);
    let rhs = RhsFunctional::constant_load(1.0);
    let problem = FrozenProblem::new(&field, &v, &rhs).map_err(|e| e.to_string())?;
    // Decreasing nodal values keep every cell gradient away from zero.
    let n = mesh.node_count();
    let mut coeffs = vec![0.0; n];
    for i in (0..n - 1).rev() {
        coeffs[i] = coeffs[i + 1] + rng.random_range(0.5..2.0) / cells as f64;
    }
    let u = DiscreteFunction::from_coefficients(&mesh, coeffs, true).map_err(|e| e.to_string())?;
    let d = random_function(&mut rng, &mesh, 1.0);
    let j = problem.jacobian(&u).map_err(|e| e.to_string())?;
    let jd = j.mul(d.coefficients());
    let r0 = problem.residual(&u).map_err(|e| e.to_string())?;
    let jd_norm = jd.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    let mismatch = |eps: f64| -> Result<f64, String> {
        let ue = u.axpy(eps, &d).map_err(|e| e.to_string())?;
        let re = problem.residual(&ue).map_err(|e| e.to_string())?;
        let s: f64 = (0..n)
            .map(|i| ((re[i] - r0[i]) / eps - jd[i]).powi(2))
            .sum();
        Ok(s.sqrt() / jd_norm)
    };
    let (e3, e4) = (mismatch(1e-3)?, mismatch(1e-4)?);
    if e3 <= 1e-9 || e4 <= 0.2 * e3 + 1e-9 {
        Ok(())
    } else {
        Err(format!(
            "mismatch {e3:e} at 1e-3, {e4:e} at 1e-4 (N = {dim}, p = {p})"
        ))
    }
}

fn random_field(rng: &mut ChaCha8Rng, n: usize) -> SampledScalarField {
    let heavy = rng.random_bool(0.5);
    let values = (0..n)
        .map(|_| {
            let u: f64 = rng.random_range(1e-6..1.0);
            let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
            sign * if heavy {
                u.powf(-0.8)
            } else {
                rng.random_range(0.0..5.0)
            }
        })
        .collect();
    let weights = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
    SampledScalarField::from_weights(1, vec![0.0; n], values, weights).expect("valid samples")
}

/// `∫|fg| <= ‖f‖_{p,q} ‖g‖_{p',q'}` on shared samples.
pub fn holder_pairing(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = rng.random_range(1..200);
    let f = random_field(&mut rng, n);
    let mut g = random_field(&mut rng, n);
    g = SampledScalarField::from_weights(
        1,
        vec![0.0; n],
        g.values().to_vec(),
        f.weights().to_vec(),
    )
    .expect("valid samples");
    let p = rng.random_range(1.1..8.0);
    let pc = p / (p - 1.0);
    let (q, qc) = match rng.random_range(0..3) {
        0 => (1.0, f64::INFINITY),
        1 => (f64::INFINITY, 1.0),
        _ => {
            let q = rng.random_range(1.05..10.0);
            (q, q / (q - 1.0))
        }
    };
    let lhs: f64 = (0..n)
        .map(|i| (f.values()[i] * g.values()[i]).abs() * f.weights()[i])
        .sum();
    let nf = lorentz_quasinorm(&f, LorentzIndex::new(p, q).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let ng = lorentz_quasinorm(&g, LorentzIndex::new(pc, qc).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    let rhs = nf * ng;
    if lhs <= rhs * (1.0 + 1e-9) + 1e-9 {
        Ok(())
    } else {
        Err(format!("∫|fg| = {lhs:e} > {rhs:e} (p = {p}, q = {q})"))
    }
}

/// `λ_f` is nonincreasing on random grids and `‖f − T_k f‖_{p,∞}` is
/// nonincreasing in `k`.
pub fn distribution_monotone(seed: u64) -> Result<(), String> {
    let mut rng = rng(seed);
    let n = rng.random_range(1..300);
    let f = random_field(&mut rng, n);
    let max = f.max_abs();
    let mut ts: Vec<f64> = (0..50).map(|_| rng.random_range(0.0..1.2 * max)).collect();
    ts.sort_by(f64::total_cmp);
    let lambdas: Vec<f64> = ts.iter().map(|&t| distribution_function(&f, t)).collect();
    if let Some(w) = lambdas.windows(2).position(|w| w[1] > w[0]) {
        return Err(format!(
            "λ({}) = {} > λ({}) = {}",
            ts[w + 1],
            lambdas[w + 1],
            ts[w],
            lambdas[w]
        ));
    }
    let p = rng.random_range(1.1..6.0);
    let weak = LorentzIndex::weak(p).map_err(|e| e.to_string())?;
    let mut prev = f64::INFINITY;
    for &k in &ts {
        let excess = SampledScalarField::from_weights(
            1,
            vec![0.0; n],
            f.values()
                .iter()
                .zip(truncate(&f, k).map_err(|e| e.to_string())?.values())
                .map(|(a, b)| a - b)
                .collect(),
            f.weights().to_vec(),
        )
        .map_err(|e| e.to_string())?;
        let v = lorentz_quasinorm(&excess, weak).map_err(|e| e.to_string())?;
        if v > prev * (1.0 + 1e-12) {
            return Err(format!("‖f − T_k f‖ increased to {v:e} at k = {k}"));
        }
        prev = v;
    }
    Ok(())
}
