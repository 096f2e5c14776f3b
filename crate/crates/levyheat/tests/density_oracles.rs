//! Density oracles: independently coded quadratures pinned against the
//! library's inversion path, plus the normalization / Chapman-Kolmogorov /
//! bounded-peak invariants.

use std::sync::Arc;

use levyheat::density::{fit_free_sandwich, DensityEvaluator};
use levyheat::exponent::psi_jump_radial_tol;
use levyheat::model::LevyModel;
use levyheat::scaling::ScaleFunction;

/// Independent oracle for the tempered d=1 exponent: composite Simpson on
/// the stable 2 sin^2 form, no shared code with the library quadrature.
fn tempered_psi_oracle(xi: f64) -> f64 {
    let integrand = |y: f64| -> f64 {
        if y == 0.0 {
            return 0.5 * xi * xi;
        }
        let one_minus_cos = 2.0 * (0.5 * xi * y).sin().powi(2);
        let damp = if y > 1.0 { (y - 1.0).exp() } else { 1.0 };
        one_minus_cos / (y * y * damp)
    };
    let (a, b) = (0.0_f64, 220.0_f64);
    let n = 1 << 22;
    let h = (b - a) / n as f64;
    let mut s = integrand(a) + integrand(b);
    for i in 1..n {
        let y = a + i as f64 * h;
        s += integrand(y) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    2.0 * s * h / 3.0
}

#[test]
fn tempered_exponent_frozen_oracle() {
    // frozen from the Simpson oracle; both paths must agree with it
    let frozen = 1.675_911_735_328_2_f64;
    let oracle = tempered_psi_oracle(1.0);
    assert!(
        (oracle - frozen).abs() < 1e-9 * frozen,
        "oracle drifted: {oracle}"
    );
    let m = LevyModel::tempered(1, 1.0, 1.0);
    let lib = psi_jump_radial_tol(&m, 1.0, 1e-12).unwrap();
    assert!(
        (lib - frozen).abs() < 1e-8 * frozen,
        "library value {lib} vs frozen {frozen}"
    );
}

/// Independent uniform-grid inversion for the tempered density: plain cosine
/// sum over the frequency grid at 4x the resolution a production grid would
/// use. Exponent values come from the (separately validated) quadrature.
fn tempered_density_grid_oracle(t: f64, x: f64) -> f64 {
    let m = LevyModel::tempered(1, 1.0, 1.0);
    // psi(s) ~ pi s for large s: cutoff where t psi ~ 42
    let k_max = 42.0 / (t * std::f64::consts::PI) * 1.5;
    let period = 8.0 * (x.abs() + 40.0 / k_max + 8.0);
    let h = 2.0 * std::f64::consts::PI / period / 4.0; // 4x resolution
    let n = (k_max / h).ceil() as usize;
    let mut acc = 0.5 * 1.0; // s = 0 term, psi(0) = 0, cos(0) = 1, half weight
    for k in 1..=n {
        let s = k as f64 * h;
        let psi = psi_jump_radial_tol(&m, s, 1e-10).unwrap();
        acc += (s * x).cos() * (-t * psi).exp();
    }
    acc * h / std::f64::consts::PI
}

#[test]
fn tempered_density_matches_grid_oracle() {
    let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
    let ev = DensityEvaluator::new(m).unwrap();
    let got = ev.free_density(1.0, &[1.0]).unwrap();
    let oracle = tempered_density_grid_oracle(1.0, 1.0);
    assert!(
        (got - oracle).abs() < 2e-5 * oracle.abs(),
        "library {got}, grid oracle {oracle}"
    );
}

#[test]
fn cauchy_density_against_closed_form_grid() {
    let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
    let ev = DensityEvaluator::new(m).unwrap();
    for &t in &[0.1, 1.0, 10.0] {
        for i in 0..=20 {
            let x = i as f64;
            let got = ev.free_density(t, &[x]).unwrap();
            let want = t / (std::f64::consts::PI * (t * t + x * x));
            assert!(
                (got - want).abs() <= 1e-6 * want,
                "t {t} x {x}: rel {}",
                (got - want).abs() / want
            );
        }
    }
}

#[test]
fn mass_normalization() {
    for model in [
        LevyModel::isotropic_stable(1, 1.0),
        LevyModel::tempered(1, 1.0, 1.0),
    ] {
        let m = Arc::new(model);
        let sf = ScaleFunction::new(m.clone()).unwrap();
        let ev = DensityEvaluator::new(m.clone()).unwrap();
        for &t in &[0.1, 1.0, 10.0] {
            let (mass, tail) = ev.mass_check(&sf, t).unwrap();
            assert!(tail < 1e-4, "tail bound {tail}");
            assert!(
                (0.999..=1.001).contains(&mass),
                "model {:?} t {t}: mass {mass}",
                m.closed_form
            );
        }
    }
}

#[test]
fn chapman_kolmogorov_convolution() {
    // discrete convolution of p(t,.) with p(s,.) vs p(t+s,.) at the mode
    for model in [LevyModel::tempered(1, 1.0, 1.0), LevyModel::brownian(1, 1.0)] {
        let m = Arc::new(model);
        let ev = DensityEvaluator::new(m.clone()).unwrap();
        let (t, s) = (0.5, 0.7);
        let half_width = 40.0;
        let n = 4000usize;
        let dx = 2.0 * half_width / n as f64;
        let mut conv = 0.0;
        for k in 0..=n {
            let u = -half_width + k as f64 * dx;
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            conv += w
                * ev.free_density(t, &[u]).unwrap()
                * ev.free_density(s, &[u]).unwrap();
        }
        conv *= dx;
        let direct = ev.free_density(t + s, &[0.0]).unwrap();
        assert!(
            (conv - direct).abs() < 1e-3 * direct,
            "{:?}: conv {conv}, direct {direct}",
            m.closed_form
        );
    }
}

#[test]
fn peak_scale_bounded_over_four_decades() {
    // sup_x p(t, x) phi_inv(t)^d stays bounded; the sup sits at x = 0
    let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
    let sf = ScaleFunction::new(m.clone()).unwrap();
    let ev = DensityEvaluator::new(m.clone()).unwrap();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for i in 0..=16 {
        let t = 0.01 * 10f64.powf(i as f64 / 4.0);
        let p0 = ev.density_at_origin(t).unwrap();
        let v = p0 * sf.phi_inv(t).unwrap();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    assert!(hi.is_finite() && lo > 0.0, "range [{lo}, {hi}]");
    assert!(hi / lo < 10.0, "peak scale ratio {}", hi / lo);
}

#[test]
fn density_upper_bounded_by_origin() {
    let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
    let ev = DensityEvaluator::new(m).unwrap();
    for &t in &[0.2, 1.0, 5.0] {
        let p0 = ev.density_at_origin(t).unwrap();
        for &x in &[0.1, 0.5, 2.0, 10.0] {
            let p = ev.free_density(t, &[x]).unwrap();
            assert!(p <= p0 * (1.0 + 1e-9), "t {t} x {x}: {p} > {p0}");
        }
    }
}

#[test]
fn cauchy_free_sandwich_fits() {
    let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
    let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
    let ev = DensityEvaluator::new(m.clone()).unwrap();
    let ts: Vec<f64> = vec![0.01, 0.05, 0.25, 1.0];
    let rs: Vec<f64> = vec![0.0, 0.5, 2.0, 10.0, 50.0];
    let rep = fit_free_sandwich(&ev, &sf, &ts, &rs, 1.0).unwrap();
    assert!(rep.passed, "violations: {:?}", rep.violations);
    assert!(rep.c2.is_finite() && rep.c2 >= 1.0);
    for row in &rep.rows {
        assert!(
            row.lower <= row.p * (1.0 + 1e-9) && row.p <= row.upper * (1.0 + 1e-9),
            "sandwich broken at t {} r {}: {} / {} / {}",
            row.t,
            row.r,
            row.lower,
            row.p,
            row.upper
        );
    }
}

#[test]
fn gaussian_free_sandwich_tight() {
    // both sides Gaussian: matched shape constant makes the ratio constant
    let m = Arc::new(LevyModel::brownian(1, 1.0));
    let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
    let ev = DensityEvaluator::new(m.clone()).unwrap();
    let ts: Vec<f64> = vec![0.1, 0.5, 1.0];
    let rs: Vec<f64> = vec![0.0, 0.3, 1.0, 2.0];
    let rep = fit_free_sandwich(&ev, &sf, &ts, &rs, 1.0).unwrap();
    assert!(rep.passed);
    // the Gaussian fit needs no more than the (4 pi)^(d/2) prefactor slack
    assert!(rep.c2 <= 8.0, "c2 = {}", rep.c2);
}
