//! Bessel J0 (Cephes rational approximations) and its positive zeros.

use std::f64::consts::FRAC_PI_4;

const SQ2OPI: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)

const DR1: f64 = 5.783_185_962_946_785;
const DR2: f64 = 30.471_262_343_662_087;

static RP: [f64; 4] = [
    -4.794432209782018e9,
    1.9561749194655657e12,
    -2.4924834436096772e14,
    9.708622510473064e15,
];

static RQ: [f64; 8] = [
    4.99563147152651e2,
    1.737854016763747e5,
    4.844096583399621e7,
    1.1185553704535683e10,
    2.112775201154892e12,
    3.1051822985742256e14,
    3.1812195594320496e16,
    1.7108629408104315e18,
];

static PP: [f64; 7] = [
    7.969367292973471e-4,
    8.283523921074408e-2,
    1.239533716464143,
    5.447250030587687,
    8.74716500199817,
    5.303240382353949,
    1.0,
];

static PQ: [f64; 7] = [
    9.244088105588637e-4,
    8.562884743544745e-2,
    1.2535274390105895,
    5.470977403304171,
    8.761908832370695,
    5.306052882353947,
    1.0,
];

static QP: [f64; 8] = [
    -1.1366383889846916e-2,
    -1.2825271867050931,
    -1.9553954425773597e1,
    -9.320601521237683e1,
    -1.7768116798048806e2,
    -1.4707750515495118e2,
    -5.141053267665993e1,
    -6.050143506007285,
];

static QQ: [f64; 7] = [
    6.43178256118178e1,
    8.564300259769806e2,
    3.8824018360540163e3,
    7.240467741956525e3,
    5.930727011873169e3,
    2.0620933166032783e3,
    2.420057402402914e2,
];

fn polevl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(0.0, |acc, &c| acc * x + c)
}

fn p1evl(x: f64, coef: &[f64]) -> f64 {
    coef.iter().fold(1.0, |acc, &c| acc * x + c)
}

/// Bessel function of the first kind, order zero.
pub fn bessel_j0(mut x: f64) -> f64 {
    if x < 0.0 {
        x = -x;
    }
    if x <= 5.0 {
        let z = x * x;
        if x < 1e-5 {
            return 1.0 - z / 4.0;
        }
        let p = (z - DR1) * (z - DR2);
        return p * polevl(z, &RP) / p1evl(z, &RQ);
    }
    let w = 5.0 / x;
    let q = 25.0 / (x * x);
    let p = polevl(q, &PP) / polevl(q, &PQ);
    let qv = polevl(q, &QP) / p1evl(q, &QQ);
    let xn = x - FRAC_PI_4;
    (p * xn.cos() - w * qv * xn.sin()) * SQ2OPI / x.sqrt()
}

/// First twenty positive zeros of J0.
const J0_ZEROS: [f64; 20] = [
    2.404825557695773,
    5.520078110286311,
    8.653727912911013,
    11.791534439014281,
    14.930917708487786,
    18.071063967910924,
    21.21163662987926,
    24.352471530749302,
    27.493479132040254,
    30.634606468431976,
    33.77582021357357,
    36.917098353664045,
    40.05842576462824,
    43.19979171317673,
    46.341188371661815,
    49.482609897397815,
    52.624051841115,
    55.765510755019976,
    58.90698392608094,
    62.048469190227166,
];

/// k-th positive zero of J0 (k = 1, 2, ...). Beyond the table, McMahon's
/// expansion is used; the absolute error there is far below a half-period,
/// which is all the zero-partition integrator needs.
pub fn j0_zero(k: usize) -> f64 {
    assert!(k >= 1);
    if k <= J0_ZEROS.len() {
        return J0_ZEROS[k - 1];
    }
    let b = (k as f64 - 0.25) * std::f64::consts::PI;
    let e = 8.0 * b;
    b + 1.0 / e - 124.0 / (3.0 * e * e * e) + 120928.0 / (15.0 * e * e * e * e * e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn j0_reference_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j0(0.0) - 1.0).abs() < 1e-15);
        assert!((bessel_j0(1.0) - 0.7651976865579666).abs() < 1e-13);
        assert!((bessel_j0(2.0) - 0.22389077914123567).abs() < 1e-13);
        assert!((bessel_j0(5.0) + 0.17759677131433830).abs() < 1e-13);
        assert!((bessel_j0(10.0) + 0.2459357644513483).abs() < 1e-13);
    }

    #[test]
    fn zeros_are_zeros() {
        for k in 1..=40 {
            let z = j0_zero(k);
            assert!(
                bessel_j0(z).abs() < 5e-9,
                "J0({z}) = {} at k={k}",
                bessel_j0(z)
            );
            if k > 1 {
                assert!(z > j0_zero(k - 1) + 3.0);
            }
        }
    }
}
