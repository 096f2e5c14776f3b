//! Small special-function kit: log-gamma, erf, and the stable jump-kernel
//! normalisation constant.

use std::f64::consts::PI;

/// Lanczos coefficients (g = 7, n = 9).
const LANCZOS: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Natural log of the gamma function for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    assert!(x > 0.0, "ln_gamma requires x > 0, got {x}");
    if x < 0.5 {
        // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Gamma function for x > 0.
pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Error function via the incomplete gamma series / continued fraction,
/// good to ~1e-15 relative.
pub fn erf(x: f64) -> f64 {
    if x < 0.0 {
        return -erf(-x);
    }
    if x == 0.0 {
        return 0.0;
    }
    if x > 6.5 {
        return 1.0;
    }
    let x2 = x * x;
    if x < 1.5 {
        // lower incomplete gamma series: erf(x) = x e^{-x^2} sum x^{2n}/Gamma(3/2+n)
        let mut term = 1.0 / gamma(1.5);
        let mut sum = term;
        let mut n = 0.0_f64;
        loop {
            n += 1.0;
            term *= x2 / (0.5 + n);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        x * (-x2).exp() * sum
    } else {
        // continued fraction for the upper incomplete gamma Q(1/2, x^2)
        let mut b = x2 + 0.5;
        let mut c = 1e308;
        let mut d = 1.0 / b;
        let mut h = d;
        let mut i = 1.0_f64;
        loop {
            let an = -i * (i - 0.5);
            b += 2.0;
            d = an * d + b;
            if d.abs() < 1e-300 {
                d = 1e-300;
            }
            c = b + an / c;
            if c.abs() < 1e-300 {
                c = 1e-300;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < 1e-16 {
                break;
            }
            i += 1.0;
        }
        1.0 - (-x2).exp() * x / PI.sqrt() * h
    }
}

/// Normalisation constant of the isotropic alpha-stable jump kernel in
/// dimension d: with J(x) = C |x|^{-d-alpha}, the Levy exponent is exactly
/// |xi|^alpha.
pub fn stable_norm_const(d: usize, alpha: f64) -> f64 {
    assert!(alpha > 0.0 && alpha < 2.0);
    let d = d as f64;
    (alpha * 2f64.powf(alpha - 1.0) * gamma((d + alpha) / 2.0))
        / (PI.powf(d / 2.0) * gamma(1.0 - alpha / 2.0))
}

/// Surface measure of the unit sphere S^{d-1}.
pub fn sphere_area(d: usize) -> f64 {
    let d = d as f64;
    2.0 * PI.powf(d / 2.0) / gamma(d / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_basics() {
        assert!((gamma(1.0) - 1.0).abs() < 1e-14);
        assert!((gamma(0.5) - PI.sqrt()).abs() < 1e-13);
        assert!((gamma(5.0) - 24.0).abs() < 1e-11);
    }

    #[test]
    fn erf_reference_points() {
        // values from standard tables
        assert!((erf(0.5) - 0.5204998778130465).abs() < 1e-12);
        assert!((erf(1.0) - 0.8427007929497149).abs() < 1e-12);
        assert!((erf(2.0) - 0.9953222650189527).abs() < 1e-12);
        assert!((erf(-0.5) + 0.5204998778130465).abs() < 1e-12);
    }

    #[test]
    fn stable_norm_known_values() {
        // alpha = 1, d = 1: Cauchy kernel 1/(pi x^2)
        assert!((stable_norm_const(1, 1.0) - 1.0 / PI).abs() < 1e-14);
        // alpha = 1/2, d = 1: C * 2 * int (1-cos u)/u^{3/2} du = 1
        let c = stable_norm_const(1, 0.5);
        let integral = PI / (2.0 * gamma(1.5) * (PI / 4.0).sin());
        assert!((c * 2.0 * integral - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sphere_areas() {
        assert!((sphere_area(1) - 2.0).abs() < 1e-14);
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-14);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
    }
}
