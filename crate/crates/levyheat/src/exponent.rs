//! Radial evaluation of the jump part of the Levy exponent,
//!
//!   psi_J(s) = omega_{d-1} int_0^inf (1 - Lambda_d(s rho)) j(rho) rho^{d-1} drho,
//!
//! with Lambda_d the radial characteristic kernel (cos, J0, sinc for
//! d = 1, 2, 3), plus a guarded piecewise-Chebyshev cache so that density
//! inversion and scale-function tabulation do not re-run the quadrature.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use crate::error::{LevyError, Result};
use crate::model::LevyModel;
use crate::quad::{
    adaptive, gk15, integrate_decaying_tail, integrate_singular_origin, oscillatory, OscKernel,
    OscOpts,
};
use crate::special::sphere_area;

/// Relative accuracy targeted by the direct quadrature path of `psi`.
pub const PSI_REL_TOL: f64 = 1e-8;

/// Tighter target used when filling cache panels.
const CACHE_REL_TOL: f64 = 1e-11;

/// Chebyshev degree per half-decade panel.
const CHEB_N: usize = 24;

pub fn radial_kernel(dim: usize) -> Result<OscKernel> {
    match dim {
        1 => Ok(OscKernel::Cos),
        2 => Ok(OscKernel::BesselJ0),
        3 => Ok(OscKernel::Sinc),
        d => Err(LevyError::Domain(format!(
            "radial quadrature supports d <= 3, got d = {d}; use a closed-form exponent"
        ))),
    }
}

/// Exact radial jump exponent at the default accuracy.
pub fn psi_jump_radial_exact(model: &LevyModel, s: f64) -> Result<f64> {
    psi_jump_radial_tol(model, s, PSI_REL_TOL * 1e-2)
}

/// Exact radial jump exponent to the requested relative accuracy.
///
/// The integral is split at 1/s: the inner part carries the origin
/// singularity (handled by geometric panels with the stable `1 - Lambda`
/// form), the outer part is decomposed into smooth mass minus an oscillatory
/// transform.
pub fn psi_jump_radial_tol(model: &LevyModel, s: f64, rel_tol: f64) -> Result<f64> {
    if s <= 0.0 || !model.has_jumps() {
        return Ok(0.0);
    }
    let kernel = radial_kernel(model.dim)?;
    let area = sphere_area(model.dim);
    let w = |rho: f64| model.j_weight(rho);
    let cutoff = model.kernel_cutoff();
    let m = 1.0 / s;

    let near_hi = cutoff.map_or(m, |c| c.min(m));
    // integrate the singular piece only up to the first kink of the kernel
    // profile; GK panels straddling a derivative jump lose several digits
    let f_near = |rho: f64| kernel.one_minus(s * rho) * w(rho);
    let mut kinks: Vec<f64> = [1.0, 1.0 / model.kappa1]
        .iter()
        .copied()
        .filter(|&k| k > 0.0 && k < near_hi)
        .collect();
    kinks.sort_by(|a, b| a.total_cmp(b));
    kinks.dedup();
    let first_seg_end = kinks.first().copied().unwrap_or(near_hi);
    let mut near = integrate_singular_origin(&f_near, first_seg_end, 1e-300, rel_tol, "psi inner")?;
    let mut seg_lo = first_seg_end;
    for seg_hi in kinks.into_iter().skip(1).chain(std::iter::once(near_hi)) {
        if seg_hi > seg_lo {
            near += adaptive(
                &f_near,
                seg_lo,
                seg_hi,
                rel_tol * near.abs().max(1e-300),
                rel_tol,
                36,
                "psi inner upper",
            )?;
            seg_lo = seg_hi;
        }
    }
    let mut total = near;

    if cutoff.map_or(true, |c| c > m) {
        let abs_tol = rel_tol * near.max(1e-300);
        let mass = match cutoff {
            Some(c) => adaptive(&w, m, c, abs_tol, rel_tol, 30, "psi outer mass")?,
            None => integrate_decaying_tail(&w, m, abs_tol, rel_tol, "psi outer mass")?,
        };
        let osc = osc_transform(model, kernel, s, m, cutoff, abs_tol, rel_tol)?;
        total += mass - osc;
    }
    Ok(area * total)
}

/// int_m^{hi} Lambda(s rho) w(rho) drho.
fn osc_transform(
    model: &LevyModel,
    kernel: OscKernel,
    s: f64,
    m: f64,
    cutoff: Option<f64>,
    abs_tol: f64,
    rel_tol: f64,
) -> Result<f64> {
    let w = |rho: f64| model.j_weight(rho);
    match kernel {
        OscKernel::Cos => {
            // Filon segments: omega-independent cost, exact finite cutoffs;
            // panel edges forced at the kernel kinks
            let hi = cutoff.unwrap_or(f64::INFINITY);
            let kinks = [1.0, 1.0 / model.kappa1];
            crate::quad::fourier_cos_smooth_range(
                &w,
                s,
                m,
                hi,
                &kinks,
                abs_tol,
                rel_tol,
                "psi oscillatory",
            )
        }
        _ => match cutoff {
            None => oscillatory(
                &w,
                kernel,
                s,
                m,
                f64::INFINITY,
                OscOpts {
                    abs_tol,
                    rel_tol,
                    ..OscOpts::default()
                },
                "psi oscillatory",
            ),
            Some(hi) => {
                let half_periods = s * (hi - m) / std::f64::consts::PI;
                if half_periods <= 2048.0 {
                    let g = |rho: f64| kernel.eval(s * rho) * w(rho);
                    let mut acc = 0.0;
                    let mut left = m;
                    let mut k = 1usize;
                    while kernel.zero(k) / s <= m {
                        k += 1;
                    }
                    loop {
                        let right = (kernel.zero(k) / s).min(hi);
                        let (v, _) = gk15(&g, left, right);
                        acc += v;
                        left = right;
                        k += 1;
                        if right >= hi {
                            return Ok(acc);
                        }
                    }
                }
                Err(LevyError::Quadrature {
                    what: "psi oscillatory finite".into(),
                    detail: format!(
                        "truncated kernels with many oscillations only supported in d = 1 \
                         ({half_periods:.0} half-periods)"
                    ),
                    partial: vec![],
                })
            }
        },
    }
}

/// Smooth radial integrals of the kernel used by the Pruitt bracket and the
/// simulation engine. All use j(rho) rho^{d-1} directly.
pub mod kernel_integrals {
    use super::*;

    /// int J(z) (1 and |z|^2 / r^2) dz
    pub fn pruitt_jump_integral(model: &LevyModel, r: f64) -> Result<f64> {
        let area = sphere_area(model.dim);
        let w = |rho: f64| model.j_weight(rho);
        let cutoff = model.kernel_cutoff();
        let inner_hi = cutoff.map_or(r, |c| c.min(r));
        let inner = integrate_singular_origin(
            &|rho: f64| rho * rho / (r * r) * w(rho),
            inner_hi,
            1e-300,
            1e-9,
            "pruitt inner",
        )?;
        let outer = match cutoff {
            Some(c) if c <= r => 0.0,
            Some(c) => adaptive(&w, r, c, 1e-14, 1e-9, 30, "pruitt outer")?,
            None => integrate_decaying_tail(&w, r, inner * 1e-9, 1e-9, "pruitt outer")?,
        };
        Ok(area * (inner + outer))
    }

    /// intensity of jumps with |y| >= eps
    pub fn tail_mass(model: &LevyModel, eps: f64) -> Result<f64> {
        if !model.has_jumps() {
            return Ok(0.0);
        }
        let area = sphere_area(model.dim);
        let w = |rho: f64| model.j_weight(rho);
        match model.kernel_cutoff() {
            Some(c) if c <= eps => Ok(0.0),
            Some(c) => Ok(area * adaptive(&w, eps, c, 1e-14, 1e-10, 30, "jump tail mass")?),
            None => Ok(area
                * integrate_decaying_tail(&w, eps, 1e-300, 1e-10, "jump tail mass")?),
        }
    }

    /// per-coordinate variance rate of jumps with |y| < eps,
    /// (1/d) int_{|y|<eps} |y|^2 J(y) dy
    pub fn small_jump_coord_var(model: &LevyModel, eps: f64) -> Result<f64> {
        if !model.has_jumps() {
            return Ok(0.0);
        }
        let area = sphere_area(model.dim);
        let hi = model.kernel_cutoff().map_or(eps, |c| c.min(eps));
        let v = integrate_singular_origin(
            &|rho: f64| rho * rho * model.j_weight(rho),
            hi,
            1e-300,
            1e-10,
            "small jump variance",
        )?;
        Ok(area * v / model.dim as f64)
    }

    /// survival function of the jump radius law above eps:
    /// T(rho) = int_rho^inf j(u) u^{d-1} du * area
    pub fn radius_tail(model: &LevyModel, rho: f64) -> Result<f64> {
        tail_mass(model, rho)
    }
}

struct Panel {
    /// Chebyshev coefficients on the panel, in log10(s)
    coef: Vec<f64>,
    lo: f64,
    hi: f64,
    /// when the guarded self-check failed, fall back to exact evaluation
    exact_only: bool,
}

/// Cached radial exponent evaluator. Immutable model, guarded memo table;
/// concurrent fills may duplicate work but reads are always consistent.
pub struct Exponent {
    model: Arc<LevyModel>,
    panels: RwLock<HashMap<i64, Arc<Panel>>>,
}

impl Exponent {
    pub fn new(model: Arc<LevyModel>) -> Self {
        Exponent {
            model,
            panels: RwLock::new(HashMap::new()),
        }
    }

    pub fn model(&self) -> &Arc<LevyModel> {
        &self.model
    }

    /// Full radial exponent a0 s^2 + psi_J(s) for isotropic models.
    pub fn radial(&self, s: f64) -> Result<f64> {
        debug_assert!(self.model.is_isotropic());
        let gauss = self.model.gaussian.a0 * s * s;
        Ok(gauss + self.jump_radial(s)?)
    }

    /// Jump part of the radial exponent, cached.
    pub fn jump_radial(&self, s: f64) -> Result<f64> {
        if s <= 0.0 || !self.model.has_jumps() {
            return Ok(0.0);
        }
        // closed forms bypass the cache
        if self.model.closed_form.is_some() {
            return Ok(self.model.jump_exponent_radial(s)?.0);
        }
        let idx = (s.log10() * 2.0).floor() as i64;
        let panel = self.panel(idx)?;
        if panel.exact_only {
            return psi_jump_radial_exact(&self.model, s);
        }
        Ok(cheb_eval(&panel.coef, panel.lo, panel.hi, s.log10()))
    }

    /// General exponent evaluation through the cache.
    pub fn eval(&self, xi: &[f64]) -> Result<f64> {
        let quad = self.model.gaussian.quad_form(xi);
        let smag = match &self.model.kernel {
            crate::model::KernelProfile::Canonical => {
                xi.iter().map(|v| v * v).sum::<f64>().sqrt()
            }
            crate::model::KernelProfile::Diagonal(scales) => xi
                .iter()
                .zip(scales)
                .map(|(v, s)| (v / s) * (v / s))
                .sum::<f64>()
                .sqrt(),
        };
        Ok(quad + self.jump_radial(smag)?)
    }

    fn panel(&self, idx: i64) -> Result<Arc<Panel>> {
        if let Some(p) = self.panels.read().expect("exponent cache lock").get(&idx) {
            return Ok(p.clone());
        }
        let p = Arc::new(self.build_panel(idx)?);
        self.panels
            .write()
            .expect("exponent cache lock")
            .insert(idx, p.clone());
        Ok(p)
    }

    fn build_panel(&self, idx: i64) -> Result<Panel> {
        let lo = idx as f64 / 2.0;
        let hi = (idx + 1) as f64 / 2.0;
        let mut vals = vec![0.0; CHEB_N + 1];
        for (k, v) in vals.iter_mut().enumerate() {
            let x = (std::f64::consts::PI * k as f64 / CHEB_N as f64).cos();
            let logs = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
            *v = psi_jump_radial_tol(&self.model, 10f64.powf(logs), CACHE_REL_TOL)?;
        }
        let coef = cheb_coefficients(&vals);
        // guarded self-check at off-node points
        let mut exact_only = false;
        for &frac in &[0.137, 0.521, 0.883] {
            let logs = lo + frac * (hi - lo);
            let s = 10f64.powf(logs);
            let approx = cheb_eval(&coef, lo, hi, logs);
            let exact = psi_jump_radial_tol(&self.model, s, CACHE_REL_TOL)?;
            let allowed = 1e-9 + self.truncation_osc_floor(s) / exact.abs().max(1e-300);
            if (approx - exact).abs() > allowed * exact.abs().max(1e-300) {
                if std::env::var("LEVYHEAT_DEBUG_PANEL").is_ok() {
                    eprintln!(
                        "panel {idx} self-check miss at s={s:.6e}: approx {approx:.15e} exact {exact:.15e} rel {:.3e}",
                        (approx - exact).abs() / exact.abs().max(1e-300)
                    );
                }
                exact_only = true;
                break;
            }
        }
        Ok(Panel {
            coef,
            lo,
            hi,
            exact_only,
        })
    }

    /// For truncated kernels the exponent carries a genuine oscillation of
    /// magnitude ~ area w(cut) / s that no smooth interpolant can follow;
    /// the self-check tolerance accounts for it.
    fn truncation_osc_floor(&self, s: f64) -> f64 {
        match self.model.kernel_cutoff() {
            None => 0.0,
            Some(c) => {
                let w = self.model.j_weight(c * (1.0 - 1e-9));
                8.0 * sphere_area(self.model.dim) * w / s
            }
        }
    }
}

/// Chebyshev coefficients from values at the extrema nodes (type-1 DCT).
fn cheb_coefficients(vals: &[f64]) -> Vec<f64> {
    let n = vals.len() - 1;
    let mut coef = vec![0.0; n + 1];
    for (j, c) in coef.iter_mut().enumerate() {
        let mut acc = 0.5 * (vals[0] + if j % 2 == 0 { vals[n] } else { -vals[n] });
        for (k, v) in vals.iter().enumerate().take(n).skip(1) {
            acc += v * (std::f64::consts::PI * (j * k) as f64 / n as f64).cos();
        }
        *c = 2.0 * acc / n as f64;
    }
    coef[0] *= 0.5;
    coef[n] *= 0.5;
    coef
}

fn cheb_eval(coef: &[f64], lo: f64, hi: f64, x: f64) -> f64 {
    let t = (2.0 * x - lo - hi) / (hi - lo);
    // Clenshaw
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coef.iter().rev() {
        let b0 = 2.0 * t * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    b1 - t * b2
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::LevyModel;

    /// quadrature agrees with the closed form for stable exponents
    #[test]
    fn stable_quadrature_matches_closed_form() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let mut m = LevyModel::isotropic_stable(1, alpha);
            m.closed_form = None; // force the quadrature path
            for &s in &[0.03, 0.7, 1.0, 5.0, 80.0] {
                let got = psi_jump_radial_exact(&m, s).unwrap();
                let want = s.powf(alpha);
                assert!(
                    (got - want).abs() < 1e-6 * want,
                    "alpha {alpha} s {s}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn stable_quadrature_matches_closed_form_d2() {
        let mut m = LevyModel::isotropic_stable(2, 1.0);
        m.closed_form = None;
        for &s in &[0.5, 2.0, 11.0] {
            let got = psi_jump_radial_exact(&m, s).unwrap();
            assert!(
                (got - s).abs() < 1e-6 * s,
                "d=2 cauchy s {s}: got {got}, want {s}"
            );
        }
    }

    /// frozen oracle: tempered d=1 kernel, phi1 = r, psi1 = e^{r-1} beyond 1,
    /// kappa = 1; value from an independently coded fine Simpson rule (the
    /// oracle itself lives in tests/density_oracles.rs)
    #[test]
    fn tempered_reference_value() {
        let m = LevyModel::tempered(1, 1.0, 1.0);
        let got = psi_jump_radial_tol(&m, 1.0, 1e-12).unwrap();
        let frozen = 1.675_911_735_328_2;
        assert!(
            (got - frozen).abs() < 1e-9 * frozen,
            "got {got}, frozen {frozen}"
        );
    }

    #[test]
    fn cache_matches_exact() {
        let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
        let ex = Exponent::new(m.clone());
        for &s in &[0.01, 0.3, 1.0, 4.2, 300.0, 2.5e4] {
            let cached = ex.jump_radial(s).unwrap();
            let exact = psi_jump_radial_exact(&m, s).unwrap();
            assert!(
                (cached - exact).abs() < 1e-8 * exact.abs().max(1e-30),
                "s {s}: cached {cached} exact {exact}"
            );
        }
    }

    #[test]
    fn truncated_kernel_exponent_sane() {
        let m = LevyModel::tempered(1, 0.8, f64::INFINITY);
        // small s behaves like s^2 (bounded jumps), large s like s^0.8
        let lo = psi_jump_radial_exact(&m, 1e-3).unwrap();
        let lo2 = psi_jump_radial_exact(&m, 2e-3).unwrap();
        assert!((lo2 / lo - 4.0).abs() < 0.05, "ratio {}", lo2 / lo);
        let hi = psi_jump_radial_exact(&m, 1e4).unwrap();
        let hi2 = psi_jump_radial_exact(&m, 2e4).unwrap();
        let ratio = hi2 / hi;
        assert!(
            (ratio - 2f64.powf(0.8)).abs() < 0.02,
            "large-s ratio {ratio}"
        );
    }
}

/// temporary benchmark hook
impl Exponent {
    pub fn bench_parts(&self, s: f64, n: usize) -> (f64, f64, f64) {
        use std::time::Instant;
        let idx = (s.log10() * 2.0).floor() as i64;
        let t0 = Instant::now();
        let mut acc = 0.0f64;
        for _ in 0..n {
            let p = self.panels.read().unwrap();
            acc += p.get(&idx).map(|p| p.lo).unwrap_or(0.0);
        }
        let lock_t = t0.elapsed().as_secs_f64();
        let panel = self.panel(idx).unwrap();
        let t0 = Instant::now();
        for _ in 0..n {
            acc += cheb_eval(&panel.coef, panel.lo, panel.hi, s.log10());
        }
        let cheb_t = t0.elapsed().as_secs_f64();
        let t0 = Instant::now();
        for _ in 0..n {
            acc += self.jump_radial(s).unwrap();
        }
        let full_t = t0.elapsed().as_secs_f64();
        std::hint::black_box(acc);
        (lock_t, cheb_t, full_t)
    }
}
