//! Values frozen from an independent arbitrary-precision implementation (mpmath, 30 digits).

use wavemap_spectral::eigensolver::lambda_hat;
use wavemap_spectral::functionals::{closed_form_crosschecks, DEFAULT_TOLERANCE};
use wavemap_spectral::specfun::{c_conn, d0, digamma, h1, ln_gamma};

fn close(got: f64, want: f64, rel: f64) -> bool {
    (got - want).abs() <= rel * want.abs().max(1.0)
}

#[test]
fn digamma_matches_reference() {
    let cases = [
        (0.3, -3.502_524_222_200_133),
        (0.5, -1.963_510_026_021_423_5),
        (1.476, 0.013_812_732_409_031_248),
        (7.25, 1.910_453_526_883_736),
        (12.5, 2.485_195_651_274_912),
    ];
    for (x, want) in cases {
        let got = digamma(x).unwrap();
        assert!(close(got, want, 1e-13), "psi({x}) = {got}, want {want}");
    }
}

#[test]
fn ln_gamma_matches_reference() {
    let cases = [
        (0.2, 1.524_063_822_430_784_5),
        (0.7, 0.260_867_246_531_666_6),
        (3.3, 0.987_098_577_894_734_4),
        (10.5, 13.940_625_219_403_764),
    ];
    for (x, want) in cases {
        assert!(close(ln_gamma(x), want, 1e-13), "lnGamma({x})");
    }
}

#[test]
fn connection_constants_match_reference() {
    let cases = [
        (0.2, 2.182_871_803_312_443, -1.809_942_824_501_201_4),
        (0.9, 2.059_180_934_717_893_5, -0.519_494_708_988_705_6),
        (1.3, 1.803_436_689_729_366_6, -0.031_783_270_588_885_94),
        (-0.2, 1.584_712_880_829_542_3, -3.161_880_164_729_101_6),
    ];
    for (lambda, c, d) in cases {
        assert!(close(c_conn(lambda).unwrap(), c, 1e-13), "c_conn({lambda})");
        assert!(close(d0(lambda).unwrap(), d, 1e-12), "d0({lambda})");
    }
}

#[test]
fn light_cone_solution_matches_reference() {
    let cases = [(0.9, 0.5, 0.990_423_354_619_091), (0.2, 0.85, 0.937_379_050_312_992_2), (1.3, 0.3, 1.018_205_342_884_863)];
    for (lambda, z, want) in cases {
        assert!(close(h1(lambda, z).unwrap(), want, 1e-13), "h1({lambda}, {z})");
    }
}

#[test]
fn analytic_eigenvalue_roots_match_reference() {
    let cases = [
        (1e-2, 0, 0.964_429_916_328_756_4),
        (1e-2, 1, -0.167_632_870_949_974_2),
        (1e-3, 0, 0.976_088_641_034_592_9),
        (1e-3, 1, -0.116_367_456_834_577_05),
        (1e-4, 0, 0.982_008_740_032_545),
        (1e-4, 1, -0.088_592_443_024_705_6),
    ];
    for (nu, j, want) in cases {
        let got = lambda_hat(nu, j).unwrap();
        assert!((got - want).abs() < 1e-12, "lambda_hat({nu}, {j}) = {got}, want {want}");
    }
}

#[test]
fn soliton_sub_integral_matches_reference() {
    let c = closed_form_crosschecks(0.1, 0.9, DEFAULT_TOLERANCE).unwrap();
    assert!((c.sub_integral_exact - 7.250_043_013_880_539).abs() < 1e-13);
    assert!((c.sub_integral - 7.250_043_013_880_539).abs() < 1e-10);
}
