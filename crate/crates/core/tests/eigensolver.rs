use wavemap_spectral::eigensolver::*;
use wavemap_spectral::profiles::{self, lambda_q};
use wavemap_spectral::specfun;

fn ctx(nu: f64) -> SpectralContext {
    SpectralContext::new(nu).unwrap()
}

const SWEEP: [f64; 5] = [1e-2, 3.162_277_660_168_379_5e-3, 1e-3, 3.162_277_660_168_379_5e-4, 1e-4];

#[test]
fn eigenvalues_stay_in_their_windows() {
    for nu in SWEEP {
        let l = nu.ln().abs();
        let l0 = find_eigenpair(&ctx(nu), 0).unwrap().lambda;
        let l1 = find_eigenpair(&ctx(nu), 1).unwrap().lambda;
        assert!(l0 > 1.0 - 5.0 / l && l0 < 1.0, "nu={nu} lambda0={l0}");
        assert!(l1 > -5.0 / l && l1 < 0.0, "nu={nu} lambda1={l1}");
    }
}

#[test]
fn eigenvalue_close_to_analytic_root() {
    let nu: f64 = 1e-3;
    for j in 0..2 {
        let p = find_eigenpair(&ctx(nu), j).unwrap();
        assert!((p.lambda - p.lambda_hat).abs() <= 100.0 * nu * nu * nu.ln().abs());
    }
}

#[test]
fn matching_radius_does_not_matter() {
    for nu in [1e-3f64, 1e-4] {
        for j in 0..2 {
            let lambdas: Vec<f64> = [0.03, 0.04, 0.06]
                .iter()
                .map(|&d| find_eigenpair(&SpectralContext::with_delta0(nu, d).unwrap(), j).unwrap().lambda)
                .collect();
            let spread = lambdas.iter().cloned().fold(f64::MIN, f64::max) - lambdas.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 10.0 * DEFAULT_ROOT_TOL, "nu={nu} j={j} spread={spread}");
        }
    }
}

#[test]
fn tighter_ode_tolerance_reproduces_eigenvalues() {
    let base = ctx(1e-3);
    let mut tight = base;
    tight.ode_tol *= 1e-2;
    for j in 0..2 {
        let a = find_eigenpair(&base, j).unwrap().lambda;
        let b = find_eigenpair(&tight, j).unwrap().lambda;
        assert!((a - b).abs() <= 10.0 * base.root_tol);
    }
}

#[test]
fn regular_singular_offsets_can_be_doubled() {
    let base = ctx(1e-3);
    let mut doubled = base;
    doubled.series_start *= 2.0;
    doubled.outer_start *= 2.0;
    for j in 0..2 {
        let a = find_eigenpair(&base, j).unwrap().lambda;
        let b = find_eigenpair(&doubled, j).unwrap().lambda;
        assert!((a - b).abs() <= 10.0 * base.root_tol);
    }
}

#[test]
fn defect_slope_scales_with_log_nu() {
    for nu in [1e-2f64, 1e-3, 1e-4] {
        let c = ctx(nu);
        let l = nu.ln().abs();
        for j in 0..2 {
            let p = find_eigenpair(&c, j).unwrap();
            let h = 1e-6;
            let slope = (matching_defect(&c, p.lambda + h).unwrap() - matching_defect(&c, p.lambda - h).unwrap()) / (2.0 * h);
            assert!(slope.abs() >= 0.5 * l, "nu={nu} j={j} slope={slope}");
            // with the slope in hand the stored defect certifies the root tolerance
            assert!(p.defect.abs() <= c.root_tol * slope.abs());
        }
    }
}

#[test]
fn defect_changes_sign_around_the_analytic_root() {
    let nu: f64 = 1e-3;
    let c = ctx(nu);
    for j in 0..2 {
        let centre = lambda_hat(nu, j).unwrap();
        let mut half = 5.0 * nu * nu * nu.ln().abs();
        let found = loop {
            let values: Vec<f64> = (0..50)
                .map(|k| matching_defect(&c, centre - half + 2.0 * half * k as f64 / 49.0).unwrap())
                .collect();
            if values.windows(2).any(|w| w[0].signum() != w[1].signum()) {
                break true;
            }
            half *= 2.0;
            if half > 1e-2 {
                break false;
            }
        };
        assert!(found, "j={j}");
    }
}

#[test]
fn eigenvalues_vary_slowly_with_nu() {
    for nu in [1e-3f64, 1e-4] {
        let l = nu.ln().abs();
        for j in 0..2 {
            let a = find_eigenpair(&ctx(nu), j).unwrap().lambda;
            let b = find_eigenpair(&ctx(nu / 1.05), j).unwrap().lambda;
            assert!((a - b).abs() / 1.05f64.ln() <= 10.0 / (l * l), "nu={nu} j={j}");
        }
    }
}

#[test]
fn matching_constant_near_connection_coefficient() {
    for nu in [1e-3f64, 1e-4] {
        let l: f64 = nu.ln().abs();
        let p = find_eigenpair(&ctx(nu), 1).unwrap();
        let c = specfun::c_conn(p.lambda_hat).unwrap();
        assert!((p.c_match - c).abs() <= 100.0 * nu * nu * l * l, "nu={nu}");
    }
}

#[test]
fn inner_remainder_beyond_correctors_is_fourth_order() {
    for nu in [1e-2f64, 1e-3] {
        let c = ctx(nu);
        for j in 0..2 {
            let lambda = find_eigenpair(&c, j).unwrap().lambda;
            let inner = InnerBranch::solve(&c, lambda, 2.0).unwrap();
            for y in [0.01, 0.1, 0.3, 0.6, 1.0] {
                let (w, _) = inner.remainder(y).unwrap();
                let k = profiles::inner_correctors(y).unwrap();
                let corr = k.t1 + (2.0 * lambda - 1.0) * k.s1 + lambda * (lambda - 1.0) * k.u1;
                assert!((w - nu * nu * corr).abs() <= 100.0 * nu.powi(4) * y.powi(5), "nu={nu} j={j} y={y}");
            }
        }
    }
}

#[test]
fn outer_log_derivative_decays() {
    for nu in [1e-3f64, 1e-4] {
        let c = ctx(nu);
        let d = c.delta0;
        for j in 0..2 {
            let lambda = find_eigenpair(&c, j).unwrap().lambda;
            let outer = OuterBranch::solve(&c, lambda, 0.5 * d).unwrap();
            let (v, dv) = outer.eval_rho(d).unwrap();
            let gap = (dv / v + 1.0 / d).abs();
            assert!(gap <= 10.0 * d * d.ln().abs() / nu.ln().abs(), "nu={nu} j={j} gap={gap}");
        }
    }
}

#[test]
fn glued_eigenfunction_is_continuous() {
    for nu in [1e-2, 1e-3] {
        let c = ctx(nu);
        for j in 0..2 {
            let ef = eigenfunction(&c, j).unwrap();
            let (dv, dd) = ef.glue_jumps().unwrap();
            assert!(dv <= 10.0 * c.root_tol && dd <= 10.0 * c.root_tol, "nu={nu} j={j}: {dv} {dd}");
        }
    }
}

#[test]
fn eigenfunction_normalised_at_origin() {
    let nu = 1e-3;
    let ef = eigenfunction(&ctx(nu), 0).unwrap();
    for rho in [1e-8, 1e-7] {
        let (v, _) = ef.try_eval(rho).unwrap();
        assert!((v * nu * nu / (2.0 * rho) - 1.0).abs() < 1e-6);
        assert!((v - lambda_q(rho / nu) / nu).abs() <= 1e-6 * v.abs());
    }
}

#[test]
fn ansatz_residual_is_small_and_stable() {
    let mut ratios = Vec::new();
    for nu in [1e-2f64, 1e-3] {
        let l = nu.ln().abs();
        for j in 0..2 {
            let r = ansatz_residual(&eigenfunction(&ctx(nu), j).unwrap()).unwrap();
            assert!(r.sup_ratio <= 1e3);
            assert!(r.at_delta0.abs() <= 10.0 * nu * nu * l * l, "nu={nu} j={j} raw={}", r.at_delta0);
            ratios.push(r.sup_ratio);
        }
    }
    for j in 0..2 {
        let (coarse, fine) = (ratios[j], ratios[2 + j]);
        assert!(fine <= 3.0 * coarse && coarse <= 3.0 * fine);
    }
}
