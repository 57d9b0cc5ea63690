//! Acceptance suite: one PASS/FAIL line per criterion with its runtime.

mod common;

use std::time::{Duration, Instant};

use noncoercive::solver::SolveConfig;
use noncoercive::verification::{self as cases, CaseResult, CaseStatus};
use noncoercive::Error;

struct Outcome {
    passed: bool,
    detail: String,
}

fn report(id: usize, title: &str, limit: Duration, body: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = body();
    let elapsed = start.elapsed();
    let in_time = elapsed <= limit;
    let verdict = if out.passed && in_time {
        "PASS"
    } else {
        "FAIL"
    };
    println!(
        "[{verdict}] {id}. {title}: {} ({:.2}s, limit {}s)",
        out.detail,
        elapsed.as_secs_f64(),
        limit.as_secs()
    );
    out.passed && in_time
}

fn value(r: &CaseResult, name: &str) -> f64 {
    r.check(name)
        .unwrap_or_else(|| panic!("{} has no check `{name}`", r.case))
        .computed
}

fn passed(r: &CaseResult, name: &str) -> bool {
    r.check(name).and_then(|c| c.passed) == Some(true)
}

fn failures(r: &CaseResult) -> String {
    let f: Vec<String> = r
        .failures()
        .iter()
        .map(|c| format!("{}={:e}", c.name, c.computed))
        .collect();
    if f.is_empty() {
        String::new()
    } else {
        format!(" failing: {}", f.join(", "))
    }
}

fn criterion_1_lorentz_exactness() -> bool {
    report(
        1,
        "distance of B/|x| to L^inf",
        Duration::from_secs(10),
        || {
            let mut ok = true;
            let mut parts = Vec::new();
            for (b, n) in [(1.0, 2), (2.0, 3), (0.5, 4)] {
                let r = cases::dist_radial(b, n).expect("dist case runs");
                let c = r.check("distance").expect("distance check");
                let rel = (c.computed - c.oracle.unwrap()).abs() / c.oracle.unwrap();
                ok &= c.passed == Some(true) && rel <= 1e-3;
                parts.push(format!("(B={b},N={n}) rel err {rel:.1e}"));
            }
            Outcome {
                passed: ok,
                detail: parts.join(", "),
            }
        },
    )
}

fn criterion_2_concentration_identity() -> bool {
    report(
        2,
        "concentration norms independent of n",
        Duration::from_secs(30),
        || {
            let r = cases::example_concentration(3, 2.0, &[1, 2, 4, 8], 3 << 14)
                .expect("concentration case runs");
            let grad_ok = [1, 2, 4, 8].iter().all(|n| {
                let c = r.check(&format!("gradient_norm_n{n}")).unwrap();
                (c.computed - std::f64::consts::PI * 2f64.ln()).abs() <= 0.02 * c.oracle.unwrap()
            });
            let spread =
                value(&r, "gradient_norm_spread").max(value(&r, "lower_order_norm_spread"));
            Outcome {
                passed: grad_ok && spread < 0.02 && r.status() == CaseStatus::Pass,
                detail: format!(
                    "|grad u_1|^2 = {:.6} vs pi log 2, max spread {spread:.1e}{}",
                    value(&r, "gradient_norm_n1"),
                    failures(&r)
                ),
            }
        },
    )
}

fn criterion_3_manufactured_solutions() -> bool {
    report(
        3,
        "manufactured convergence orders",
        Duration::from_secs(60),
        || {
            let cfg = SolveConfig::default();
            let lap = cases::manufactured_laplacian(3, &[64, 128, 256, 512], &cfg)
                .expect("laplacian case runs");
            let pl = cases::manufactured_p_laplacian(4, 3.0, &[32, 64, 128, 256], &cfg)
                .expect("p-laplacian case runs");
            let (o2, o3) = (value(&lap, "observed_order"), value(&pl, "observed_order"));
            Outcome {
                passed: o2 >= 1.8 && o3 >= 0.9,
                detail: format!("nodal order {o2:.3} (p=2), W^1,p order {o3:.3} (p=3, N=4)"),
            }
        },
    )
}

fn criterion_4_scheme_consistency() -> bool {
    report(
        4,
        "truncation scheme consistency",
        Duration::from_secs(120),
        || {
            let cfg = SolveConfig::default();
            let r = cases::scheme_consistency(3, 0.1, 256, None, &cfg).expect("scheme case runs");
            let converged = passed(&r, "scheme_converged");
            let probes = r
                .check("weak_form_defect")
                .map(|c| c.computed <= 10.0 * cfg.newton_tol)
                == Some(true);
            let monitor = r.check("monitor_variation").map(|c| c.computed < 0.05) == Some(true);
            Outcome {
            passed: converged && probes && monitor,
            detail: format!(
                "converged {converged}, probe defect {:.1e}, C_est variation {:.1e}, distance {:.4} < {:.4}{}",
                value(&r, "weak_form_defect"),
                value(&r, "monitor_variation"),
                value(&r, "distance"),
                value(&r, "threshold"),
                failures(&r)
            ),
        }
        },
    )
}

fn criterion_5_nonexistence_behavior() -> bool {
    report(
        5,
        "adjoint oracle and blow-up proxy",
        Duration::from_secs(120),
        || {
            let r = cases::example_nonexistence(1.0, 3, 3, &SolveConfig::default())
                .expect("nonexistence case runs");
            let order = value(&r, "adjoint_residual_order");
            let curve = r.curve("forward").is_some_and(|c| c.rows.len() == 3);
            let proxy = r.check("blowup_proxy").expect("proxy recorded");
            Outcome {
            passed: order >= 0.9 && curve && proxy.passed.is_none(),
            detail: format!(
                "adjoint order {order:.3}, forward curve recorded, growth {:.3}, proxy {} (record only)",
                value(&r, "norm_growth"),
                proxy.computed
            ),
        }
        },
    )
}

fn criterion_6_obstacle() -> bool {
    report(
        6,
        "constant obstacle against the free-boundary oracle",
        Duration::from_secs(120),
        || {
            let cfg = SolveConfig::default();
            let r = cases::obstacle_radial(3, -0.05, &[32, 64, 128, 256], &cfg)
                .expect("obstacle case runs");
            let fb = value(&r, "free_boundary_error_over_h");
            let order = value(&r, "w1p_order");
            let slack = value(&r, "min_slack");
            let agree = value(&r, "unconstrained_agreement");
            Outcome {
            passed: fb <= 2.0 && order >= 0.9 && slack >= -cfg.vi_tol && agree <= 10.0 * cfg.newton_tol,
            detail: format!(
                "free boundary error {fb:.2}h, W^1,p order {order:.3}, min slack {slack:.1e}, -inf path gap {agree:.1e}"
            ),
        }
        },
    )
}

fn criterion_7_regularity_probe() -> bool {
    report(
        7,
        "higher-integrability ratio bounded",
        Duration::from_secs(120),
        || {
            let cfg = SolveConfig::default();
            let r = cases::regularity_model(3, 2.0, 2.5, 0.02, &[32, 64, 128], None, &cfg)
                .expect("regularity case runs");
            let lambda = value(&r, "lambda");
            let spread = value(&r, "ratio_variation");
            let gated = matches!(
                cases::regularity_model(3, 2.0, 2.5, 1.0, &[32], None, &cfg),
                Err(Error::DistanceTooLarge { .. })
            );
            Outcome {
            passed: (lambda - 1.5).abs() < 1e-12 && spread < 0.10 && gated,
            detail: format!("lambda {lambda}, ratio variation {spread:.1e}, large B rejected by the gate: {gated}"),
        }
        },
    )
}

fn criterion_8_invariant_suites() -> bool {
    report(
        8,
        "randomized invariant suites",
        Duration::from_secs(120),
        || {
            let suites: [(&str, common::Trial); 5] = [
                ("monotonicity", common::monotonicity),
                ("uniqueness", common::uniqueness),
                ("jacobian_fd", common::jacobian_fd),
                ("holder", common::holder_pairing),
                ("distribution", common::distribution_monotone),
            ];
            let mut total = 0;
            let mut parts = Vec::new();
            for (name, trial) in suites {
                let (bad, first) = common::run_trials(trial, common::TRIALS);
                total += bad;
                parts.push(match first {
                    None => format!("{name} 0/{}", common::TRIALS),
                    Some(m) => format!("{name} {bad}/{} ({m})", common::TRIALS),
                });
            }
            Outcome {
                passed: total == 0,
                detail: parts.join(", "),
            }
        },
    )
}

fn main() {
    let criteria: [fn() -> bool; 8] = [
        criterion_1_lorentz_exactness,
        criterion_2_concentration_identity,
        criterion_3_manufactured_solutions,
        criterion_4_scheme_consistency,
        criterion_5_nonexistence_behavior,
        criterion_6_obstacle,
        criterion_7_regularity_probe,
        criterion_8_invariant_suites,
    ];
    let failed = criteria.iter().filter(|c| !c()).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
