//! Scale-function checks across the model family: the doubling inequality,
//! the two-sided moment bracket, exactness for stable exponents, and the
//! exponent symmetry properties.

use std::sync::Arc;

use levyheat::model::{log_grid, LevyModel};
use levyheat::scaling::{psi_star, pruitt_bracket, ScaleFunction};

use proptest::prelude::*;

fn family() -> Vec<(&'static str, LevyModel)> {
    vec![
        ("stable 0.5", LevyModel::isotropic_stable(1, 0.5)),
        ("cauchy", LevyModel::isotropic_stable(1, 1.0)),
        ("stable 1.5", LevyModel::isotropic_stable(1, 1.5)),
        ("gaussian", LevyModel::brownian(1, 1.0)),
        ("tempered b1", LevyModel::tempered(1, 1.0, 1.0)),
        ("tempered b2", LevyModel::tempered(1, 1.0, 2.0)),
        ("truncated", LevyModel::tempered(1, 0.8, f64::INFINITY)),
    ]
}

#[test]
fn stable_scale_exact() {
    for &alpha in &[0.5, 1.0, 1.5] {
        let m = Arc::new(LevyModel::isotropic_stable(1, alpha));
        let sf = ScaleFunction::new(m).unwrap();
        for &r in log_grid(1e-3, 1e3, 3).iter() {
            let phi = sf.phi(r).unwrap();
            assert!(
                (phi - r.powf(alpha)).abs() <= 1e-10 * r.powf(alpha),
                "alpha {alpha} r {r}"
            );
            let inv = sf.phi_inv(phi).unwrap();
            assert!((inv - r).abs() <= 1e-10 * r, "alpha {alpha} r {r}");
        }
    }
}

#[test]
fn doubling_inequality_all_models() {
    for (name, model) in family() {
        let sf = ScaleFunction::new(Arc::new(model)).unwrap();
        for &t in log_grid(1e-2, 1e2, 2).iter() {
            for &lam in &[1.0, 2.0, 5.0, 10.0, 100.0] {
                let ratio = sf.phi(lam * t).unwrap() / sf.phi(t).unwrap();
                assert!(
                    ratio >= 1.0 - 1e-9 && ratio <= 2.0 * (1.0 + lam * lam) * (1.0 + 1e-9),
                    "{name}: t {t} lam {lam} ratio {ratio}"
                );
            }
        }
    }
}

#[test]
fn moment_bracket_all_models() {
    for (name, model) in family() {
        let sf = ScaleFunction::new(Arc::new(model.clone())).unwrap();
        for &r in log_grid(1e-2, 1e2, 2).iter() {
            let b = pruitt_bracket(&model, &sf, r).unwrap();
            assert!(
                b.holds(),
                "{name} r {r}: {:.4e} <= {:.4e} <= {:.4e}",
                b.lower,
                b.middle,
                b.upper
            );
        }
    }
}

#[test]
fn tempered_psi_star_matches_dense_scan() {
    let m = LevyModel::tempered(1, 1.0, 1.0);
    for &r in &[0.3, 1.0, 4.0, 20.0] {
        let got = psi_star(&m, r).unwrap();
        // dense independent scan
        let mut dense: f64 = 0.0;
        for k in 0..=800 {
            let s = r * k as f64 / 800.0;
            if s == 0.0 {
                continue;
            }
            dense = dense.max(
                levyheat::exponent::psi_jump_radial_tol(&m, s, 1e-10).unwrap(),
            );
        }
        assert!(
            got >= dense * (1.0 - 1e-7) && got <= dense * (1.0 + 1e-4),
            "r {r}: scan {got}, dense {dense}"
        );
    }
}

#[test]
fn phi_inv_right_continuous_inverse_property() {
    let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
    let sf = ScaleFunction::new(m).unwrap();
    for &t in log_grid(1e-3, 1e3, 2).iter() {
        let s = sf.phi_inv(t).unwrap();
        let phi = sf.phi(s).unwrap();
        assert!(
            (phi - t).abs() <= 1e-7 * t,
            "phi(phi_inv({t})) = {phi}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// exponent symmetry and vanishing at the origin
    #[test]
    fn psi_symmetric(xi in -50.0f64..50.0) {
        prop_assume!(xi != 0.0);
        let m = LevyModel::tempered(1, 1.0, 1.0);
        let a = m.psi(&[xi]).unwrap();
        let b = m.psi(&[-xi]).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        prop_assert_eq!(m.psi(&[0.0]).unwrap(), 0.0);
    }

    /// phi is monotone on arbitrary sampled pairs
    #[test]
    fn phi_monotone(a in 1e-4f64..1e4, factor in 1.0f64..100.0) {
        let m = Arc::new(LevyModel::tempered(1, 1.0, 2.0));
        let sf = ScaleFunction::new(m).unwrap();
        let lo = sf.phi(a).unwrap();
        let hi = sf.phi(a * factor).unwrap();
        prop_assert!(hi >= lo * (1.0 - 1e-12));
    }
}
