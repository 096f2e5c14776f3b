//! Scale functions: psi*(r) = sup_{|z| <= r} psi(z), phi(r) = 1/psi*(1/r),
//! the right-continuous inverse phi^-1, and the coordinate variants psi_1*,
//! phi_1 along the d-th axis.

use std::collections::BTreeMap;
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{LevyError, Result};
use crate::exponent::{kernel_integrals, Exponent};
use crate::model::{direction_net, log_grid, ClosedForm, KernelProfile, LevyModel};

/// Points per decade in the phi table.
const TABLE_PER_DECADE: f64 = 25.0;

/// Inner scan of a radial profile over (0, r]: log-spaced sweep plus a local
/// golden-section refinement around the best point.
fn scan_max<F: Fn(f64) -> Result<f64>>(f: &F, r: f64) -> Result<f64> {
    let n: usize = 48;
    let decades = 6.0;
    let mut best = 0.0_f64;
    let mut best_k = n;
    for k in 0..=n {
        let s = r * 10f64.powf(-decades * (n - k) as f64 / n as f64);
        let v = f(s)?;
        if v > best {
            best = v;
            best_k = k;
        }
    }
    // golden refinement in log space around the bracket [best_k-1, best_k+1]
    let lo_k = best_k.saturating_sub(1);
    let hi_k = (best_k + 1).min(n);
    let mut lo = -decades * (n - lo_k) as f64 / n as f64;
    let mut hi = -decades * (n - hi_k) as f64 / n as f64;
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..28 {
        let m1 = hi - phi * (hi - lo);
        let m2 = lo + phi * (hi - lo);
        let v1 = f(r * 10f64.powf(m1))?;
        let v2 = f(r * 10f64.powf(m2))?;
        if v1 < v2 {
            lo = m1;
        } else {
            hi = m2;
        }
        best = best.max(v1).max(v2);
    }
    Ok(best)
}

/// sup of the exponent over the closed ball of radius r.
///
/// Isotropic models reduce to a one-dimensional scan; anisotropic ones use a
/// deterministic direction net (>= 64 directions in d = 2, 3; coordinate
/// axes and diagonals beyond), each direction maximized over [0, r].
pub fn psi_star(model: &LevyModel, r: f64) -> Result<f64> {
    let ex = Exponent::new(Arc::new(model.clone()));
    psi_star_cached(&ex, r)
}

pub fn psi_star_cached(ex: &Exponent, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let model = ex.model();
    if model.is_isotropic() {
        scan_max(&|s| ex.radial(s), r)
    } else {
        let dirs = direction_net(model.dim, 64);
        let mut best = 0.0_f64;
        for u in dirs {
            let v = scan_max(
                &|s| {
                    let xi: Vec<f64> = u.iter().map(|c| c * s).collect();
                    ex.eval(&xi)
                },
                r,
            )?;
            best = best.max(v);
        }
        Ok(best)
    }
}

/// sup of the exponent along the d-th coordinate over (-r, r).
pub fn psi_star_coord(model: &LevyModel, r: f64) -> Result<f64> {
    let ex = Exponent::new(Arc::new(model.clone()));
    psi_star_coord_cached(&ex, r)
}

pub fn psi_star_coord_cached(ex: &Exponent, r: f64) -> Result<f64> {
    if r <= 0.0 {
        return Ok(0.0);
    }
    let model = ex.model().clone();
    let a_dd = model.gaussian.a_dd();
    let coord_scale = match &model.kernel {
        KernelProfile::Canonical => 1.0,
        KernelProfile::Diagonal(s) => 1.0 / s[model.dim - 1],
    };
    scan_max(
        &|eta| Ok(a_dd * eta * eta + ex.jump_radial(eta * coord_scale)?),
        r,
    )
}

#[derive(Clone, Copy, Debug)]
enum ScaleClosed {
    /// phi(r) = r^alpha
    Power { alpha: f64 },
    /// phi(r) = r^2 / lambda_max
    Quadratic { lam: f64 },
}

/// Tabulated/closed-form phi with monotone inverse. Immutable after
/// construction except the sample table, which extends under a lock.
pub struct ScaleFunction {
    exponent: Arc<Exponent>,
    closed: Option<ScaleClosed>,
    /// index i holds phi(10^{i/25})
    table: RwLock<BTreeMap<i64, f64>>,
    pub inverse_tol: f64,
    /// whether this is the coordinate variant phi_1
    coordinate: bool,
}

impl ScaleFunction {
    pub fn new(model: Arc<LevyModel>) -> Result<Self> {
        let exponent = Arc::new(Exponent::new(model));
        Self::from_exponent(exponent, false)
    }

    /// coordinate variant phi_1 built on psi_1*
    pub fn new_coordinate(model: Arc<LevyModel>) -> Result<Self> {
        let exponent = Arc::new(Exponent::new(model));
        Self::from_exponent(exponent, true)
    }

    pub fn from_exponent(exponent: Arc<Exponent>, coordinate: bool) -> Result<Self> {
        let model = exponent.model();
        let closed = match &model.closed_form {
            Some(ClosedForm::IsotropicStable { alpha })
                if model.gaussian.a0 == 0.0 && model.is_isotropic() =>
            {
                Some(ScaleClosed::Power { alpha: *alpha })
            }
            Some(ClosedForm::Brownian) => {
                let lam = if coordinate {
                    model.gaussian.a_dd()
                } else {
                    model.gaussian.operator_norm()
                };
                Some(ScaleClosed::Quadratic { lam })
            }
            _ => None,
        };
        // entries of the [1e-6, 1e6] working range fill on first use and the
        // table auto-extends beyond it; nothing to precompute here
        Ok(ScaleFunction {
            exponent,
            closed,
            table: RwLock::new(BTreeMap::new()),
            inverse_tol: 1e-10,
            coordinate,
        })
    }

    pub fn model(&self) -> &Arc<LevyModel> {
        self.exponent.model()
    }

    pub fn exponent(&self) -> &Arc<Exponent> {
        &self.exponent
    }

    fn psi_star_at(&self, r: f64) -> Result<f64> {
        if self.coordinate {
            psi_star_coord_cached(&self.exponent, r)
        } else {
            psi_star_cached(&self.exponent, r)
        }
    }

    fn table_value(&self, i: i64) -> Result<f64> {
        if let Some(&v) = self.table.read().expect("phi table lock").get(&i) {
            return Ok(v);
        }
        let r = 10f64.powf(i as f64 / TABLE_PER_DECADE);
        let star = self.psi_star_at(1.0 / r)?;
        if star <= 0.0 {
            return Err(LevyError::Bracket {
                what: "phi table entry (psi* vanished)".into(),
                target: r,
            });
        }
        let mut v = 1.0 / star;
        let mut table = self.table.write().expect("phi table lock");
        // keep the table monotone against quadrature jitter
        if let Some((_, &prev)) = table.range(..i).next_back() {
            v = v.max(prev);
        }
        if let Some((_, &next)) = table.range(i + 1..).next() {
            v = v.min(next);
        }
        table.insert(i, v);
        Ok(v)
    }

    /// phi(r) = 1 / psi*(1/r); log-log interpolation on the sample table.
    pub fn phi(&self, r: f64) -> Result<f64> {
        if r <= 0.0 {
            return Err(LevyError::Domain("phi requires r > 0".into()));
        }
        match self.closed {
            Some(ScaleClosed::Power { alpha }) => Ok(r.powf(alpha)),
            Some(ScaleClosed::Quadratic { lam }) => Ok(r * r / lam),
            None => {
                let pos = r.log10() * TABLE_PER_DECADE;
                let i = pos.floor() as i64;
                let v0 = self.table_value(i)?;
                let v1 = self.table_value(i + 1)?;
                let frac = pos - i as f64;
                if frac == 0.0 {
                    return Ok(v0);
                }
                Ok(10f64.powf(v0.log10() * (1.0 - frac) + v1.log10() * frac))
            }
        }
    }

    /// Right-continuous generalized inverse phi^-1(t) = inf{s : phi(s) > t},
    /// by monotone bisection in log space to `inverse_tol` relative.
    pub fn phi_inv(&self, t: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(LevyError::Domain("phi_inv requires t > 0".into()));
        }
        match self.closed {
            Some(ScaleClosed::Power { alpha }) => Ok(t.powf(1.0 / alpha)),
            Some(ScaleClosed::Quadratic { lam }) => Ok((lam * t).sqrt()),
            None => {
                // bracket on the table, extending as needed
                let mut lo = -6.0 * std::f64::consts::LN_10; // ln(1e-6) as ln r
                let mut hi = 6.0 * std::f64::consts::LN_10;
                let mut guard = 0;
                while self.phi(lo.exp())? > t {
                    lo -= std::f64::consts::LN_10;
                    guard += 1;
                    if guard > 40 {
                        return Err(LevyError::Bracket {
                            what: "phi_inv lower bracket".into(),
                            target: t,
                        });
                    }
                }
                guard = 0;
                while self.phi(hi.exp())? <= t {
                    hi += std::f64::consts::LN_10;
                    guard += 1;
                    if guard > 40 {
                        return Err(LevyError::Bracket {
                            what: "phi_inv upper bracket".into(),
                            target: t,
                        });
                    }
                }
                while (hi - lo) > self.inverse_tol {
                    let mid = 0.5 * (lo + hi);
                    if self.phi(mid.exp())? > t {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                Ok((0.5 * (lo + hi)).exp())
            }
        }
    }
}

/// Ratio range observed for one asymptotic regime.
#[derive(Clone, Debug, Serialize)]
pub struct RatioRange {
    pub description: String,
    pub min: f64,
    pub max: f64,
}

impl RatioRange {
    fn ok(&self) -> bool {
        self.min.is_finite() && self.max.is_finite() && self.min > 0.0
    }
}

/// Report of the phi ~ phi1 / r^2 asymptotics check.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticReport {
    pub small_r: RatioRange,
    pub large_r: RatioRange,
    pub passed: bool,
}

/// Verifies the explicit relation between phi and phi1: for r >= 1 the scale
/// behaves like phi1 when beta = 0 and like r^2 when beta > 0; for r <= 1 it
/// behaves like phi1 without a Gaussian part and like r^2 with one.
pub fn check_l51(model: &LevyModel, sf: &ScaleFunction) -> Result<AsymptoticReport> {
    let beta = model.damp.beta.0;
    let a0 = model.gaussian.a0;

    let mut small = RatioRange {
        description: if a0 == 0.0 {
            "phi(r)/phi1(r) on [1e-3, 1]".into()
        } else {
            "phi(r)/r^2 on [1e-3, 1]".into()
        },
        min: f64::INFINITY,
        max: 0.0,
    };
    for &r in log_grid(1e-3, 1.0, 10).iter() {
        let denom = if a0 == 0.0 {
            model.poly.eval(r)
        } else {
            r * r
        };
        let ratio = sf.phi(r)? / denom;
        small.min = small.min.min(ratio);
        small.max = small.max.max(ratio);
    }

    let mut large = RatioRange {
        description: if beta == 0.0 {
            "phi(r)/phi1(r) on [1, 1e3]".into()
        } else {
            "phi(r)/r^2 on [1, 1e3]".into()
        },
        min: f64::INFINITY,
        max: 0.0,
    };
    for &r in log_grid(1.0, 1e3, 10).iter() {
        let denom = if beta == 0.0 {
            model.poly.eval(r)
        } else {
            r * r
        };
        let ratio = sf.phi(r)? / denom;
        large.min = large.min.min(ratio);
        large.max = large.max.max(ratio);
    }

    let passed = small.ok() && large.ok();
    Ok(AsymptoticReport {
        small_r: small,
        large_r: large,
        passed,
    })
}

/// The two-sided bracket tying the scale function to the truncated second
/// moment of the kernel plus the Gaussian norm.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PruittBracket {
    pub r: f64,
    pub lower: f64,
    pub middle: f64,
    pub upper: f64,
}

impl PruittBracket {
    pub fn holds(&self) -> bool {
        self.lower <= self.middle && self.middle <= self.upper
    }
}

/// (2 phi(r))^-1 <= ||A||/r^2 + int J(z)(1 ^ |z|^2/r^2) dz <= 8(1+2d)/phi(r)
pub fn pruitt_bracket(model: &LevyModel, sf: &ScaleFunction, r: f64) -> Result<PruittBracket> {
    let phi = sf.phi(r)?;
    let jump = if model.has_jumps() {
        kernel_integrals::pruitt_jump_integral(model, r)?
    } else {
        0.0
    };
    let middle = model.gaussian.operator_norm() / (r * r) + jump;
    Ok(PruittBracket {
        r,
        lower: 0.5 / phi,
        middle,
        upper: 8.0 * (1.0 + 2.0 * model.dim as f64) / phi,
    })
}

/// CSV dump rows for the phi table: (r, phi, phi_inv round-trip error).
pub fn phi_table_rows(sf: &ScaleFunction, lo: f64, hi: f64, per_decade: usize) -> Result<Vec<(f64, f64, f64)>> {
    let mut rows = Vec::new();
    for &r in log_grid(lo, hi, per_decade).iter() {
        let phi = sf.phi(r)?;
        let back = sf.phi_inv(phi)?;
        rows.push((r, phi, (back - r).abs() / r));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psi_star_stable_radial() {
        let m = LevyModel::isotropic_stable(1, 1.0);
        assert!((psi_star(&m, 3.0).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn psi_star_anisotropic_gaussian() {
        use crate::model::{Beta, ExpDamp, ModelFile, PolyProfile, MODEL_FORMAT};
        let f = ModelFile {
            format: MODEL_FORMAT.into(),
            dim: 2,
            a0: 1.0,
            a_matrix: Some(vec![vec![1.0, 0.0], vec![0.0, 4.0]]),
            gamma: 4.0,
            phi1: PolyProfile::Power { alpha: 1.0 },
            psi1: ExpDamp {
                beta: Beta(0.0),
                gamma1: 1.0,
                gamma2: 1.0,
                a1: 1.0,
                a2: 1.0,
            },
            kappa1: 1.0,
            kappa2: 1.0,
            kernel_profile: None,
            normalization: Some(0.0),
            closed_form: Some(ClosedForm::Brownian),
        };
        let m = f.build().unwrap();
        for &r in &[0.5, 2.0] {
            let got = psi_star(&m, r).unwrap();
            let want = 4.0 * r * r;
            assert!(
                (got - want).abs() < 2e-4 * want,
                "r {r}: got {got} want {want}"
            );
        }
    }

    #[test]
    fn phi_closed_forms() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let sf = ScaleFunction::new(m).unwrap();
        assert!((sf.phi(2.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((sf.phi_inv(2.0).unwrap() - 2.0).abs() < 1e-12);

        let m = Arc::new(LevyModel::brownian(1, 1.0));
        let sf = ScaleFunction::new(m).unwrap();
        assert!((sf.phi(3.0).unwrap() - 9.0).abs() < 1e-12);
        assert!((sf.phi_inv(4.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn phi_roundtrip_tempered() {
        let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
        let sf = ScaleFunction::new(m).unwrap();
        for &r in log_grid(1e-3, 1e3, 4).iter() {
            let phi = sf.phi(r).unwrap();
            let back = sf.phi_inv(phi).unwrap();
            assert!(
                (back - r).abs() < 1e-8 * r,
                "roundtrip r {r} -> {phi} -> {back}"
            );
        }
    }

    #[test]
    fn phi_monotone_and_scaling_lemma() {
        let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
        let sf = ScaleFunction::new(m).unwrap();
        let grid = log_grid(1e-4, 1e4, 5);
        let mut prev = 0.0;
        for &r in grid.iter() {
            let v = sf.phi(r).unwrap();
            assert!(v >= prev, "phi not monotone at {r}");
            prev = v;
        }
        for &t in log_grid(1e-3, 1e3, 3).iter() {
            for &lam in &[1.0, 2.0, 5.0, 10.0, 100.0] {
                let ratio = sf.phi(lam * t).unwrap() / sf.phi(t).unwrap();
                assert!(
                    (1.0 - 1e-9..=2.0 * (1.0 + lam * lam) * (1.0 + 1e-9)).contains(&ratio),
                    "doubling bound failed: t {t} lam {lam} ratio {ratio}"
                );
            }
        }
    }

    #[test]
    fn check_l51_branches() {
        // stable: a0 = 0, beta = 0 -> phi ~ phi1 everywhere
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let sf = ScaleFunction::new(m.clone()).unwrap();
        let rep = check_l51(&m, &sf).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.large_r.max / rep.large_r.min < 1.0 + 1e-9);

        // relativistic-type: beta = 1, a0 = 0 -> phi ~ r^2 at large r
        let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
        let sf = ScaleFunction::new(m.clone()).unwrap();
        let rep = check_l51(&m, &sf).unwrap();
        assert!(rep.passed, "{rep:?}");

        // gaussian: a0 > 0 -> phi ~ r^2 at small r
        let m = Arc::new(LevyModel::brownian(1, 1.0));
        let sf = ScaleFunction::new(m.clone()).unwrap();
        let rep = check_l51(&m, &sf).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn coordinate_scale_isotropic_matches() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let full = ScaleFunction::new(m.clone()).unwrap();
        let coord = ScaleFunction::new_coordinate(m).unwrap();
        for &r in &[0.3, 1.0, 7.0] {
            let a = full.phi(r).unwrap();
            let b = coord.phi(r).unwrap();
            assert!((a - b).abs() < 1e-10 * a.max(1e-300));
        }
    }
}
