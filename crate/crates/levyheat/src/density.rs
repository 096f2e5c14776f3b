//! Free-space transition density by Fourier inversion of exp(-t psi), the
//! explicit envelope functions h_{a,T} / k_{a,T} / p^c, and the free-density
//! sandwich fit.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, RwLock};

use serde::Serialize;

use crate::error::{LevyError, Result};
use crate::exponent::Exponent;
use crate::model::{ClosedForm, LevyModel};
use crate::quad::{adaptive, oscillatory, OscOpts};
use crate::scaling::ScaleFunction;
use crate::special::{gamma, sphere_area};

/// How the density is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InversionMethod {
    /// analytic density (Gaussian, or Cauchy for alpha = 1)
    ClosedForm,
    /// one-dimensional radial oscillatory integral (isotropic models)
    RadialBessel,
    /// uniform-grid inversion over the frequency box (d <= 2)
    Grid,
}

#[derive(Clone, Copy, Debug)]
pub struct QuadControls {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub max_panels: usize,
}

impl Default for QuadControls {
    fn default() -> Self {
        QuadControls {
            rel_tol: 1e-8,
            abs_tol: 1e-14,
            max_depth: 40,
            max_panels: 60_000,
        }
    }
}

struct TimeSlice {
    /// frequency where t psi reaches the working decay threshold
    s_cut: f64,
    /// density at the origin
    p0: f64,
}

/// Density evaluator for one model. Immutable after construction except the
/// per-t memo table (concurrent fills may duplicate work, reads stay
/// consistent) and the negative-clamp counter.
pub struct DensityEvaluator {
    model: Arc<LevyModel>,
    exponent: Arc<Exponent>,
    pub method: InversionMethod,
    pub ctrl: QuadControls,
    per_t: RwLock<HashMap<u64, Arc<TimeSlice>>>,
    neg_clamped: AtomicUsize,
}

impl DensityEvaluator {
    pub fn new(model: Arc<LevyModel>) -> Result<Self> {
        let method = match &model.closed_form {
            Some(ClosedForm::Brownian) => InversionMethod::ClosedForm,
            _ if model.is_isotropic() => InversionMethod::RadialBessel,
            _ if model.dim <= 2 => InversionMethod::Grid,
            _ => {
                return Err(LevyError::Domain(
                    "anisotropic density inversion only supported for d <= 2".into(),
                ))
            }
        };
        let exponent = Arc::new(Exponent::new(model.clone()));
        Ok(DensityEvaluator {
            model,
            exponent,
            method,
            ctrl: QuadControls::default(),
            per_t: RwLock::new(HashMap::new()),
            neg_clamped: AtomicUsize::new(0),
        })
    }

    pub fn with_method(mut self, method: InversionMethod) -> Self {
        self.method = method;
        self
    }

    pub fn model(&self) -> &Arc<LevyModel> {
        &self.model
    }

    pub fn exponent(&self) -> &Arc<Exponent> {
        &self.exponent
    }

    /// number of small negative values clamped to zero so far
    pub fn negative_clamps(&self) -> usize {
        self.neg_clamped.load(Ordering::Relaxed)
    }

    /// p(t, x). The evaluation path is even in x by construction.
    pub fn free_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        if t <= 0.0 {
            return Err(LevyError::Domain("free density requires t > 0".into()));
        }
        if x.len() != self.model.dim {
            return Err(LevyError::Domain(format!(
                "expected a {}-vector, got length {}",
                self.model.dim,
                x.len()
            )));
        }
        match self.method {
            InversionMethod::ClosedForm => self.closed_form_density(t, x),
            InversionMethod::RadialBessel => {
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                self.free_density_radial(t, r)
            }
            InversionMethod::Grid => self.grid_density(t, x),
        }
    }

    /// p(t, |x| = r) for isotropic models.
    pub fn free_density_radial(&self, t: f64, r: f64) -> Result<f64> {
        if t <= 0.0 {
            return Err(LevyError::Domain("free density requires t > 0".into()));
        }
        match self.method {
            InversionMethod::ClosedForm => {
                let mut x = vec![0.0; self.model.dim];
                x[0] = r;
                self.closed_form_density(t, &x)
            }
            InversionMethod::Grid => {
                let mut x = vec![0.0; self.model.dim];
                x[0] = r;
                self.grid_density(t, &x)
            }
            InversionMethod::RadialBessel => {
                let slice = self.time_slice(t)?;
                let raw = self.radial_invert(t, r.abs(), &slice)?;
                self.clamp_density(raw, t, r, slice.p0)
            }
        }
    }

    /// p(t, 0) = sup_x p(t, x).
    pub fn density_at_origin(&self, t: f64) -> Result<f64> {
        match self.method {
            InversionMethod::RadialBessel => Ok(self.time_slice(t)?.p0),
            _ => self.free_density_radial(t, 0.0),
        }
    }

    fn clamp_density(&self, raw: f64, t: f64, r: f64, p0: f64) -> Result<f64> {
        // quadrature-backed exponents carry ~1e-9 relative accuracy, which
        // floors the achievable cancellation of the inversion integral
        let floor = if self.exponent_is_closed_form() {
            1e-9
        } else {
            1e-9f64.max(2e-7 * p0)
        };
        if raw < -floor {
            return Err(LevyError::Quadrature {
                what: "free density".into(),
                detail: format!("negative density {raw:.3e} at t={t}, |x|={r}"),
                partial: vec![raw],
            });
        }
        if raw < 0.0 {
            self.neg_clamped.fetch_add(1, Ordering::Relaxed);
            return Ok(0.0);
        }
        if raw < floor && !self.exponent_is_closed_form() {
            // below numerical resolution; report a hard zero rather than noise
            return Ok(raw.max(0.0).min(floor));
        }
        Ok(raw)
    }

    fn exponent_is_closed_form(&self) -> bool {
        self.model.closed_form.is_some() || !self.model.has_jumps()
    }

    fn closed_form_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let d = self.model.dim;
        match &self.model.closed_form {
            Some(ClosedForm::Brownian) => {
                // covariance 2 t A: density (4 pi t)^{-d/2} det(A)^{-1/2}
                // exp(-x'A^{-1}x / 4t)
                let chol = self
                    .model
                    .gaussian
                    .cholesky()
                    .ok_or_else(|| LevyError::Domain("degenerate Gaussian part".into()))?;
                let mut det_sqrt = 1.0;
                for i in 0..d {
                    det_sqrt *= chol[i * d + i];
                }
                // solve L z = x, then |z|^2 = x' A^{-1} x
                let mut z = vec![0.0; d];
                for i in 0..d {
                    let mut acc = x[i];
                    for k in 0..i {
                        acc -= chol[i * d + k] * z[k];
                    }
                    z[i] = acc / chol[i * d + i];
                }
                let quad: f64 = z.iter().map(|v| v * v).sum();
                Ok((4.0 * std::f64::consts::PI * t).powf(-(d as f64) / 2.0) / det_sqrt
                    * (-quad / (4.0 * t)).exp())
            }
            Some(ClosedForm::IsotropicStable { alpha }) if (*alpha - 1.0).abs() < 1e-12 => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                let c = gamma((d as f64 + 1.0) / 2.0)
                    / std::f64::consts::PI.powf((d as f64 + 1.0) / 2.0);
                Ok(c * t / (t * t + r2).powf((d as f64 + 1.0) / 2.0))
            }
            _ => Err(LevyError::Domain(
                "no closed-form density for this model".into(),
            )),
        }
    }

    fn time_slice(&self, t: f64) -> Result<Arc<TimeSlice>> {
        let key = t.to_bits();
        if let Some(s) = self.per_t.read().expect("density cache lock").get(&key) {
            return Ok(s.clone());
        }
        let s_cut = self.decay_cutoff(t)?;
        let p0 = self.radial_invert_raw(t, 0.0, s_cut)?;
        let slice = Arc::new(TimeSlice { s_cut, p0 });
        self.per_t
            .write()
            .expect("density cache lock")
            .insert(key, slice.clone());
        Ok(slice)
    }

    /// Smallest frequency with t psi(s) >= 46; failing to reach it by
    /// doubling is the practical face of a failed integrability condition.
    fn decay_cutoff(&self, t: f64) -> Result<f64> {
        let target = 46.0 / t;
        let mut s = 1.0;
        let mut guard = 0;
        while self.exponent.radial(s)? < target {
            s *= 2.0;
            guard += 1;
            if guard > 70 {
                return Err(LevyError::ExpL {
                    t,
                    detail: format!("t*psi({s:.3e}) still below 46"),
                });
            }
        }
        let mut lo = s / 2.0;
        let mut hi = s;
        if guard == 0 {
            while self.exponent.radial(lo)? >= target && lo > 1e-280 {
                hi = lo;
                lo /= 2.0;
            }
        }
        for _ in 0..30 {
            let mid = (lo * hi).sqrt();
            if self.exponent.radial(mid)? >= target {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi)
    }

    fn radial_invert(&self, t: f64, r: f64, slice: &TimeSlice) -> Result<f64> {
        if r == 0.0 {
            return Ok(slice.p0);
        }
        self.radial_invert_raw(t, r, slice.s_cut)
    }

    fn radial_invert_raw(&self, t: f64, r: f64, s_cut: f64) -> Result<f64> {
        let d = self.model.dim;
        let kernel = crate::exponent::radial_kernel(d)?;
        let pref = (2.0 * std::f64::consts::PI).powi(-(d as i32)) * sphere_area(d);
        let s_hard = 8.0 * s_cut;
        let stash: RefCell<Option<LevyError>> = RefCell::new(None);
        let weight = |s: f64| -> f64 {
            WEIGHT_EVALS.fetch_add(1, Ordering::Relaxed);
            if s <= 0.0 || s >= s_hard {
                return 0.0;
            }
            match self.exponent.radial(s) {
                Ok(psi) => (-t * psi).exp() * s.powi(d as i32 - 1),
                Err(e) => {
                    stash.borrow_mut().get_or_insert(e);
                    0.0
                }
            }
        };
        let abs_tol = self.ctrl.abs_tol / pref;
        let first_zero = kernel.zero(1);
        let integral = if r == 0.0 || first_zero / r >= s_hard {
            // no oscillation inside the support of the weight
            let f = |s: f64| weight(s) * kernel.eval(s * r);
            adaptive(
                &f,
                0.0,
                s_hard,
                abs_tol,
                self.ctrl.rel_tol,
                self.ctrl.max_depth,
                "density radial",
            )?
        } else if d == 1 {
            // Filon panels: cost independent of the oscillation rate
            crate::quad::fourier_cos_smooth(
                &weight,
                r,
                s_hard,
                abs_tol,
                self.ctrl.rel_tol,
                "density radial",
            )?
        } else {
            oscillatory(
                &weight,
                kernel,
                r,
                0.0,
                f64::INFINITY,
                OscOpts {
                    abs_tol,
                    rel_tol: self.ctrl.rel_tol,
                    warmup: 12,
                    max_panels: self.ctrl.max_panels,
                },
                "density radial",
            )?
        };
        if let Some(e) = stash.into_inner() {
            return Err(e);
        }
        Ok(pref * integral)
    }

    /// Uniform-grid inversion over the frequency box; the anisotropic d <= 2
    /// path. Aliasing from heavy spatial tails caps the accuracy around
    /// [`Self::grid_rel_tol`].
    fn grid_density(&self, t: f64, x: &[f64]) -> Result<f64> {
        let d = self.model.dim;
        if d > 2 {
            return Err(LevyError::Domain(
                "grid inversion supports d <= 2 only".into(),
            ));
        }
        let dirs = crate::model::direction_net(d, 64);
        let mut k_box = 1.0_f64;
        'outer: for _ in 0..60 {
            for u in &dirs {
                let xi: Vec<f64> = u.iter().map(|c| c * k_box).collect();
                if t * self.model.psi(&xi)? < 40.0 {
                    k_box *= 2.0;
                    continue 'outer;
                }
            }
            break;
        }
        let xr = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let width = 40.0 / k_box + 4.0 * xr + 4.0;
        let period = 8.0 * width;
        let h = 2.0 * std::f64::consts::PI / period;
        match d {
            1 => {
                let n = ((2.0 * k_box / h).ceil() as usize).clamp(256, 1 << 22);
                let step = 2.0 * k_box / n as f64;
                let mut acc = 0.0;
                for k in 0..n {
                    let xi = -k_box + (k as f64 + 0.5) * step;
                    acc += (xi * x[0]).cos() * (-t * self.model.psi(&[xi])?).exp();
                }
                Ok(acc * step / (2.0 * std::f64::consts::PI))
            }
            _ => {
                let n1 = ((2.0 * k_box / h).ceil() as usize).clamp(64, 4096);
                let step = 2.0 * k_box / n1 as f64;
                let mut acc = 0.0;
                for i in 0..n1 {
                    let xi1 = -k_box + (i as f64 + 0.5) * step;
                    for j in 0..n1 {
                        let xi2 = -k_box + (j as f64 + 0.5) * step;
                        let dot = xi1 * x[0] + xi2 * x[1];
                        acc += dot.cos() * (-t * self.model.psi(&[xi1, xi2])?).exp();
                    }
                }
                Ok(acc * step * step / (2.0 * std::f64::consts::PI).powi(2))
            }
        }
    }

    pub fn grid_rel_tol(&self) -> f64 {
        1e-5
    }

    /// Total mass of p(t, .) within the radius where the scale-function tail
    /// bound drops below 1e-4, plus that tail bound. Isotropic only.
    pub fn mass_check(&self, sf: &ScaleFunction, t: f64) -> Result<(f64, f64)> {
        let d = self.model.dim;
        let c_tail = 8.0 * (1.0 + 2.0 * d as f64);
        let radius = 1.5 * sf.phi_inv(c_tail * t / 1e-4)?;
        let tail_bound = c_tail * t / sf.phi(radius)?;
        let f = |rho: f64| -> f64 {
            self.free_density_radial(t, rho).unwrap_or(0.0) * rho.powi(d as i32 - 1)
        };
        // bulk carries the mass; the far tail decays like a power or faster,
        // one panel per octave reaches well past the target accuracy
        let bulk_edge = (40.0 * sf.phi_inv(t)?).min(radius);
        let mut mass = adaptive(&f, 0.0, bulk_edge, 1e-12, 1e-6, 36, "density mass bulk")?;
        let mut lo = bulk_edge;
        while lo < radius {
            let hi = (2.0 * lo).min(radius);
            let (v, _) = crate::quad::gk15(&f, lo, hi);
            mass += v;
            // the density decreases in radius, so the remaining tail is
            // bounded by its value at the current edge times the leftover
            // shell volume
            let edge = self.free_density_radial(t, hi)?;
            let leftover = edge * (radius.powi(d as i32) - hi.powi(d as i32)) / d as f64;
            lo = hi;
            if leftover < 1e-7 * mass.abs().max(1e-300) {
                break;
            }
        }
        Ok((sphere_area(d) * mass, tail_bound))
    }
}

/// temporary instrumentation
pub static WEIGHT_EVALS: std::sync::atomic::AtomicUsize = std::sync::atomic::AtomicUsize::new(0);

/// p^c(t, r) = t^{-d/2} exp(-r^2/t).
pub fn pc(d: usize, t: f64, r: f64) -> f64 {
    t.powf(-(d as f64) / 2.0) * (-r * r / t).exp()
}

fn log_plus(x: f64) -> f64 {
    x.ln().max(0.0)
}

/// Short-time envelope h_{a,T}(t, r), defined for t in (0, T].
pub fn envelope_h(
    model: &LevyModel,
    sf: &ScaleFunction,
    a: f64,
    t_split: f64,
    t: f64,
    r: f64,
) -> Result<f64> {
    if !(t > 0.0 && t <= t_split) {
        return Err(LevyError::Domain(format!(
            "h envelope needs 0 < t <= T = {t_split}, got t = {t}"
        )));
    }
    let beta = model.damp.beta.0;
    let d = model.dim;
    if beta <= 1.0 || r <= 1.0 {
        let tj = if r == 0.0 {
            f64::INFINITY
        } else {
            t * model.j_radial(a * r)
        };
        let bulk = sf.phi_inv(t)?.powi(-(d as i32));
        Ok(model.gaussian.a0 * pc(d, t, a * r) + bulk.min(tj))
    } else if beta.is_finite() {
        let log_term = (t_split * r / t).ln();
        let inner = (r * log_term.powf((beta - 1.0) / beta)).min(r.powf(beta));
        Ok(t * (-a * inner).exp())
    } else {
        Ok((t / (t_split * r)).powf(a * r))
    }
}

/// Long-time envelope k_{a,T}(t, r), defined for t >= T.
pub fn envelope_k(
    model: &LevyModel,
    sf: &ScaleFunction,
    a: f64,
    t_split: f64,
    t: f64,
    r: f64,
) -> Result<f64> {
    envelope_k_impl(model, sf, a, t_split, t, r, false)
}

/// Same shape with the superseded log factor |log(rT/t)| in the middle
/// branch; kept only for side-by-side comparison tables.
pub fn envelope_k_uncorrected(
    model: &LevyModel,
    sf: &ScaleFunction,
    a: f64,
    t_split: f64,
    t: f64,
    r: f64,
) -> Result<f64> {
    envelope_k_impl(model, sf, a, t_split, t, r, true)
}

fn envelope_k_impl(
    model: &LevyModel,
    sf: &ScaleFunction,
    a: f64,
    t_split: f64,
    t: f64,
    r: f64,
    uncorrected_log: bool,
) -> Result<f64> {
    if t < t_split {
        return Err(LevyError::Domain(format!(
            "k envelope needs t >= T = {t_split}, got t = {t}"
        )));
    }
    let beta = model.damp.beta.0;
    let d = model.dim as f64;
    if beta == 0.0 {
        let tj = if r == 0.0 {
            f64::INFINITY
        } else {
            t * model.j_radial(a * r)
        };
        let bulk = sf.phi_inv(t)?.powi(-(model.dim as i32));
        Ok(bulk.min(model.gaussian.a0 * pc(model.dim, t, a * r) + tj))
    } else if beta <= 1.0 {
        let inner = r.powf(beta).min(r * r * t_split / t);
        Ok(t.powf(-d / 2.0) * (-a * inner).exp())
    } else if beta.is_finite() {
        let logf = if uncorrected_log {
            (r * t_split / t).ln().abs()
        } else {
            1.0 + log_plus(r * t_split / t)
        };
        let inner = (r * logf.powf((beta - 1.0) / beta)).min(r * r * t_split / t);
        Ok(t.powf(-d / 2.0) * (-a * inner).exp())
    } else {
        let inner = r * (1.0 + log_plus(r * t_split / t)).min(r * r * t_split / t);
        Ok(t.powf(-d / 2.0) * (-a * inner).exp())
    }
}

/// Envelope family selector: h for t < T, k for t >= T.
pub fn envelope_hk(
    model: &LevyModel,
    sf: &ScaleFunction,
    a: f64,
    t_split: f64,
    t: f64,
    r: f64,
) -> Result<f64> {
    if t < t_split {
        envelope_h(model, sf, a, t_split, t, r)
    } else {
        envelope_k(model, sf, a, t_split, t, r)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EnvelopeKind {
    H,
    K,
    Pc,
}

/// Bound-shape evaluator bound to a model and scale function.
pub struct Envelope {
    pub kind: EnvelopeKind,
    pub a: f64,
    pub t_split: f64,
    model: Arc<LevyModel>,
    sf: Arc<ScaleFunction>,
}

impl Envelope {
    pub fn new(
        kind: EnvelopeKind,
        a: f64,
        t_split: f64,
        model: Arc<LevyModel>,
        sf: Arc<ScaleFunction>,
    ) -> Result<Self> {
        if a <= 0.0 || t_split <= 0.0 {
            return Err(LevyError::Domain("envelope needs a > 0 and T > 0".into()));
        }
        Ok(Envelope {
            kind,
            a,
            t_split,
            model,
            sf,
        })
    }

    pub fn eval(&self, t: f64, r: f64) -> Result<f64> {
        match self.kind {
            EnvelopeKind::H => envelope_h(&self.model, &self.sf, self.a, self.t_split, t, r),
            EnvelopeKind::K => envelope_k(&self.model, &self.sf, self.a, self.t_split, t, r),
            EnvelopeKind::Pc => Ok(pc(self.model.dim, t, r)),
        }
    }
}

/// Shape-constant candidates used by every fit: {2^k : k = -6..6}.
pub fn candidate_grid() -> Vec<f64> {
    (-6..=6).map(|k| 2f64.powi(k)).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeSandwichRow {
    pub t: f64,
    pub r: f64,
    pub p: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FreeSandwichReport {
    /// shape constant of the lower envelope
    pub c1: f64,
    /// comparability constant
    pub c2: f64,
    /// shape constant of the upper envelope
    pub c3: f64,
    pub worst_t: f64,
    pub worst_r: f64,
    pub rows: Vec<FreeSandwichRow>,
    pub violations: Vec<String>,
    pub passed: bool,
}

/// Finds shape constants (c1 lower, c3 upper) from the candidate grid and the
/// smallest c2 with c2^-1 h_{c1} <= p <= c2 h_{c3} on the grid (k beyond the
/// time split).
pub fn fit_free_sandwich(
    ev: &DensityEvaluator,
    sf: &ScaleFunction,
    t_values: &[f64],
    r_values: &[f64],
    t_split: f64,
) -> Result<FreeSandwichReport> {
    let model = ev.model();
    let mut pts: Vec<(f64, f64, f64)> = Vec::new();
    for &t in t_values {
        for &r in r_values {
            pts.push((t, r, ev.free_density_radial(t, r)?));
        }
    }
    let cands = candidate_grid();

    // lower side: minimize over candidates the worst env/p
    let mut best_lower = (f64::INFINITY, 1.0, 0.0, 0.0); // (c2 needed, shape, worst t, worst r)
    for &a in &cands {
        let mut worst = (0.0f64, 0.0, 0.0);
        let mut feasible = true;
        for &(t, r, p) in &pts {
            let env = envelope_hk(model, sf, a, t_split, t, r)?;
            if p <= 0.0 {
                if env > 0.0 {
                    feasible = false;
                }
                continue;
            }
            let need = env / p;
            if need > worst.0 {
                worst = (need, t, r);
            }
        }
        if feasible && worst.0 < best_lower.0 {
            best_lower = (worst.0, a, worst.1, worst.2);
        }
    }

    // upper side: minimize the worst p/env
    let mut best_upper = (f64::INFINITY, 1.0, 0.0, 0.0);
    for &a in &cands {
        let mut worst = (0.0f64, 0.0, 0.0);
        let mut feasible = true;
        for &(t, r, p) in &pts {
            let env = envelope_hk(model, sf, a, t_split, t, r)?;
            if env <= 0.0 {
                if p > 0.0 {
                    feasible = false;
                }
                continue;
            }
            let need = p / env;
            if need > worst.0 {
                worst = (need, t, r);
            }
        }
        if feasible && worst.0 < best_upper.0 {
            best_upper = (worst.0, a, worst.1, worst.2);
        }
    }

    let mut violations = Vec::new();
    if !best_lower.0.is_finite() {
        violations.push("no lower shape candidate covers the grid".to_string());
    }
    if !best_upper.0.is_finite() {
        violations.push("no upper shape candidate covers the grid".to_string());
    }
    let c2 = best_lower.0.max(best_upper.0).max(1.0);
    let (worst_t, worst_r) = if best_lower.0 > best_upper.0 {
        (best_lower.2, best_lower.3)
    } else {
        (best_upper.2, best_upper.3)
    };
    let rows = pts
        .iter()
        .map(|&(t, r, p)| {
            Ok(FreeSandwichRow {
                t,
                r,
                p,
                lower: envelope_hk(model, sf, best_lower.1, t_split, t, r)? / c2,
                upper: envelope_hk(model, sf, best_upper.1, t_split, t, r)? * c2,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FreeSandwichReport {
        c1: best_lower.1,
        c2,
        c3: best_upper.1,
        worst_t,
        worst_r,
        rows,
        passed: violations.is_empty(),
        violations,
    })
}

/// Bilinear table of log p over (log s, log r), for the killed-density
/// estimator where per-path exact inversion would be prohibitive.
pub struct DensityTable {
    log_s: Vec<f64>,
    log_r: Vec<f64>,
    /// row-major [s][r]
    logp: Vec<f64>,
}

const LOG_P_FLOOR: f64 = -745.0;

impl DensityTable {
    pub fn build(
        ev: &DensityEvaluator,
        s_min: f64,
        s_max: f64,
        r_min: f64,
        r_max: f64,
    ) -> Result<DensityTable> {
        assert!(s_min > 0.0 && s_max > s_min && r_min > 0.0 && r_max > r_min);
        let per_decade = 24.0;
        let ns = ((s_max / s_min).log10() * per_decade).ceil() as usize + 2;
        let nr = ((r_max / r_min).log10() * per_decade).ceil() as usize + 2;
        let log_s: Vec<f64> = (0..ns)
            .map(|i| s_min.ln() + (s_max / s_min).ln() * i as f64 / (ns - 1) as f64)
            .collect();
        let log_r: Vec<f64> = (0..nr)
            .map(|j| r_min.ln() + (r_max / r_min).ln() * j as f64 / (nr - 1) as f64)
            .collect();
        let mut logp = vec![LOG_P_FLOOR; ns * nr];
        let mut peak = f64::NEG_INFINITY;
        'cols: for (j, &lr) in log_r.iter().enumerate() {
            let mut col_max = f64::NEG_INFINITY;
            for (i, &ls) in log_s.iter().enumerate() {
                let p = ev.free_density_radial(ls.exp(), lr.exp())?;
                let lp = if p > 0.0 { p.ln() } else { LOG_P_FLOOR };
                logp[i * nr + j] = lp;
                col_max = col_max.max(lp);
            }
            peak = peak.max(col_max);
            if col_max < peak - 34.5 {
                // this and all farther columns contribute below 1e-15 of the
                // peak; the remaining entries stay at the floor
                break 'cols;
            }
        }
        Ok(DensityTable { log_s, log_r, logp })
    }

    /// Interpolated p(s, r); arguments clamp to the table edges.
    pub fn eval(&self, s: f64, r: f64) -> f64 {
        let ls = s.max(1e-300).ln();
        let lr = r.max(1e-300).ln();
        let (i, fs) = Self::locate(&self.log_s, ls);
        let (j, fr) = Self::locate(&self.log_r, lr);
        let nr = self.log_r.len();
        let v00 = self.logp[i * nr + j];
        let v01 = self.logp[i * nr + j + 1];
        let v10 = self.logp[(i + 1) * nr + j];
        let v11 = self.logp[(i + 1) * nr + j + 1];
        let v = (1.0 - fs) * ((1.0 - fr) * v00 + fr * v01) + fs * ((1.0 - fr) * v10 + fr * v11);
        if v <= LOG_P_FLOOR + 1.0 {
            0.0
        } else {
            v.exp()
        }
    }

    fn locate(grid: &[f64], x: f64) -> (usize, f64) {
        let n = grid.len();
        if x <= grid[0] {
            return (0, 0.0);
        }
        if x >= grid[n - 1] {
            return (n - 2, 1.0);
        }
        let step = (grid[n - 1] - grid[0]) / (n - 1) as f64;
        let i = (((x - grid[0]) / step) as usize).min(n - 2);
        let f = ((x - grid[i]) / step).clamp(0.0, 1.0);
        (i, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cauchy_ev() -> DensityEvaluator {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        DensityEvaluator::new(m).unwrap()
    }

    #[test]
    fn cauchy_at_origin() {
        let ev = cauchy_ev();
        let got = ev.free_density(1.0, &[0.0]).unwrap();
        let want = 1.0 / std::f64::consts::PI;
        assert!((got - want).abs() < 1e-10 * want, "got {got}, want {want}");
    }

    #[test]
    fn gaussian_at_origin() {
        let m = Arc::new(LevyModel::brownian(1, 1.0));
        let ev = DensityEvaluator::new(m).unwrap();
        let got = ev.free_density(1.0, &[0.0]).unwrap();
        let want = (4.0 * std::f64::consts::PI).powf(-0.5);
        assert!((got - want).abs() < 1e-13, "got {got}, want {want}");
    }

    #[test]
    fn cauchy_matches_closed_form_wide() {
        let ev = cauchy_ev();
        for &t in &[0.1, 1.0, 10.0] {
            for &x in &[0.0, 0.3, 1.0, 5.0, 20.0] {
                let got = ev.free_density(t, &[x]).unwrap();
                let want = t / (std::f64::consts::PI * (t * t + x * x));
                assert!(
                    (got - want).abs() < 1e-7 * want,
                    "t {t} x {x}: got {got}, want {want}, rel {}",
                    (got - want).abs() / want
                );
            }
        }
    }

    #[test]
    fn density_even_in_x() {
        let ev = cauchy_ev();
        let a = ev.free_density(0.7, &[1.3]).unwrap();
        let b = ev.free_density(0.7, &[-1.3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn envelope_examples() {
        // beta = 0, a0 = 0: h = phi_inv(t)^-d min t j(ar)
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
        let h = envelope_h(&m, &sf, 1.0, 1.0, 0.5, 3.0).unwrap();
        let expect = (1.0 / 0.5f64).min(0.5 * m.j_radial(3.0));
        assert!((h - expect).abs() < 1e-12);

        // beta = inf, r = 2, T = 1, t = 1/2, a = 1: (t/(Tr))^{ar} = 0.25^2
        let m = Arc::new(LevyModel::tempered(1, 1.0, f64::INFINITY));
        let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
        let h = envelope_h(&m, &sf, 1.0, 1.0, 0.5, 2.0).unwrap();
        assert!((h - 0.0625).abs() < 1e-12, "got {h}");

        // p^c(1, 0) = 1 in d = 2
        assert!((pc(2, 1.0, 0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_branch_mismatch_errors() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
        assert!(envelope_k(&m, &sf, 1.0, 1.0, 0.5, 1.0).is_err());
        assert!(envelope_h(&m, &sf, 1.0, 1.0, 2.0, 1.0).is_err());
    }

    #[test]
    fn envelopes_decreasing_in_r() {
        for beta in [0.0, 0.5, 1.0, 2.0, f64::INFINITY] {
            let m = Arc::new(LevyModel::tempered(1, 1.0, beta));
            let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
            let rs: Vec<f64> = (0..40).map(|i| 0.05 + 0.4 * i as f64).collect();
            for &t in &[0.25, 1.0, 4.0] {
                let mut prev = f64::INFINITY;
                for &r in &rs {
                    let v = envelope_hk(&m, &sf, 1.0, 1.0, t, r).unwrap();
                    assert!(
                        v <= prev * (1.0 + 1e-12),
                        "beta {beta} t {t} r {r}: {v} > {prev}"
                    );
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn single_point_sandwich_degenerates_to_ratio() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let sf = Arc::new(ScaleFunction::new(m.clone()).unwrap());
        let ev = cauchy_ev();
        let rep = fit_free_sandwich(&ev, &sf, &[0.5], &[1.0], 1.0).unwrap();
        assert!(rep.passed);
        let p = ev.free_density_radial(0.5, 1.0).unwrap();
        let lo = envelope_hk(&m, &sf, rep.c1, 1.0, 0.5, 1.0).unwrap();
        let hi = envelope_hk(&m, &sf, rep.c3, 1.0, 0.5, 1.0).unwrap();
        let expect = (lo / p).max(p / hi).max(1.0);
        assert!((rep.c2 - expect).abs() < 1e-12);
    }

    #[test]
    fn density_table_tracks_direct_evaluation() {
        let ev = cauchy_ev();
        let table = DensityTable::build(&ev, 0.01, 1.0, 1e-3, 1e3).unwrap();
        for &(s, r) in &[(0.013, 0.02), (0.4, 1.7), (0.9, 250.0), (0.05, 3.3)] {
            let got = table.eval(s, r);
            let want = ev.free_density_radial(s, r).unwrap();
            assert!(
                (got - want).abs() < 8e-3 * want,
                "s {s} r {r}: table {got}, direct {want}"
            );
        }
    }
}
