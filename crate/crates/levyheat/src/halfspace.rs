//! Monte Carlo engine for the process killed on exiting the upper
//! half-space: path simulation with exact stable increments or a
//! compound-Poisson + Gaussian small-jump surrogate, exit-time sampling, and
//! the estimators built on them (survival probability, killed density, strip
//! exit times, tails).

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Poisson, StandardNormal};
use rand_pcg::Pcg64;
use rayon::prelude::*;
use serde::Serialize;

use crate::density::{DensityEvaluator, DensityTable};
use crate::error::{LevyError, Result};
use crate::exponent::{kernel_integrals, Exponent};
use crate::model::{ClosedForm, KernelProfile, LevyModel};
use crate::scaling::ScaleFunction;

const MAX_SIM_DIM: usize = 4;

/// Path discretisation scheme.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Scheme {
    /// exact stable increments (requires the isotropic-stable tag)
    ExactStable,
    /// compound Poisson large jumps + Gaussian small-jump surrogate
    CpGaussian,
}

/// Simulation parameters.
#[derive(Clone, Debug, Serialize)]
pub struct SimConfig {
    pub dt: f64,
    /// small-jump cutoff for the surrogate scheme
    pub eps: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub bridge_correction: bool,
    pub scheme: Scheme,
}

/// One simulated path's exit data.
#[derive(Clone, Debug, Serialize)]
pub struct ExitRecord {
    /// exit time; +inf when the path survived to the horizon
    pub tau: f64,
    pub x_exit: Vec<f64>,
    pub survived: bool,
    pub path_seed: u64,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SurvivalEstimate {
    pub estimate: f64,
    pub stderr: f64,
    /// sqrt(phi_1(delta)/t) and 1
    pub reference: f64,
    pub ratio: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct DirichletEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub free_term: f64,
    pub killed_term: f64,
    /// the representation can dip below zero under discretisation bias
    pub negative: bool,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct StripEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub bound_value: f64,
    pub fitted_c: f64,
    pub truncated_mass: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct VanishingRow {
    pub m: f64,
    pub sup_prob: f64,
    pub h_value: f64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic per-replica stream seed.
pub fn replica_seed(seed: u64, idx: u64) -> u64 {
    splitmix64(seed ^ splitmix64(idx.wrapping_add(0x5851f42d4c957f2d)))
}

/// Runs replicas in parallel; results come back in replica order, so any
/// later reduction is order-deterministic regardless of thread scheduling.
pub fn run_replicas<T: Send, F: Fn(&mut Pcg64, u64) -> T + Sync>(
    n: usize,
    seed: u64,
    f: F,
) -> Vec<T> {
    (0..n as u64)
        .into_par_iter()
        .map(|idx| {
            let ps = replica_seed(seed, idx);
            let mut rng = Pcg64::seed_from_u64(ps);
            f(&mut rng, ps)
        })
        .collect()
}

/// Symmetric alpha-stable variate with E e^{i xi X} = e^{-|xi|^alpha}
/// (Chambers-Mallows-Stuck).
pub fn sample_sym_stable<R: Rng>(alpha: f64, rng: &mut R) -> f64 {
    let v = std::f64::consts::PI * (rng.gen::<f64>() - 0.5);
    if (alpha - 1.0).abs() < 1e-12 {
        return v.tan();
    }
    let w: f64 = rng.sample::<f64, _>(rand_distr::Exp1);
    let s = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    s * (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha)
}

/// One-sided gamma-stable subordinator variate, E e^{-u S} = e^{-u^gamma},
/// gamma in (0, 1).
pub fn sample_one_sided_stable<R: Rng>(gamma: f64, rng: &mut R) -> f64 {
    let v = std::f64::consts::PI * rng.gen::<f64>().max(1e-300);
    let w: f64 = rng.sample::<f64, _>(rand_distr::Exp1);
    let a = (gamma * v).sin() / v.sin().powf(1.0 / gamma);
    a * (((1.0 - gamma) * v).sin() / w).powf((1.0 - gamma) / gamma)
}

/// Killing domain for the path loop.
#[derive(Clone, Copy, Debug, PartialEq)]
enum Domain {
    Half,
    Strip(f64),
    Free,
}

struct PathOutcome {
    tau: f64,
    pos: [f64; MAX_SIM_DIM],
    survived: bool,
}

/// Per-(model, config) sampler state.
struct StepSampler {
    dim: usize,
    scheme: Scheme,
    dt: f64,
    alpha: f64,
    /// sqrt(2 dt) * chol(A), row-major, when a Gaussian part is present
    chol_scaled: Option<Vec<f64>>,
    /// stdev per coordinate over dt of the small-jump surrogate
    small_sd: f64,
    /// large-jump intensity
    lambda: f64,
    /// quantile table of the jump radius law (log radius at u = j/N)
    quantiles: Vec<f64>,
    /// d(log T)/d(log rho) at the table end, for the extreme tail
    tail_slope: f64,
    /// inverse diagonal scales when the kernel is anisotropic
    inv_scales: Option<Vec<f64>>,
    /// variance of the continuous d-coordinate part over dt
    cont_var_d: f64,
}

const N_QUANTILES: usize = 4096;

impl StepSampler {
    fn new(engine: &Engine, cfg: &SimConfig) -> Result<StepSampler> {
        let model = &engine.model;
        let d = model.dim;
        if d > MAX_SIM_DIM {
            return Err(LevyError::SimConfig(format!(
                "path simulation supports d <= {MAX_SIM_DIM}"
            )));
        }
        if cfg.dt <= 0.0 {
            return Err(LevyError::SimConfig("dt must be positive".into()));
        }
        if model.poly.beta2 >= 2.0 {
            return Err(LevyError::SimConfig(
                "small-jump surrogate variance diverges (upper scaling exponent >= 2)".into(),
            ));
        }
        match cfg.scheme {
            Scheme::ExactStable => {
                let alpha = match &model.closed_form {
                    Some(ClosedForm::IsotropicStable { alpha }) => *alpha,
                    _ => {
                        return Err(LevyError::SimConfig(
                            "exact-stable scheme requires the isotropic-stable tag".into(),
                        ))
                    }
                };
                Ok(StepSampler {
                    dim: d,
                    scheme: cfg.scheme,
                    dt: cfg.dt,
                    alpha,
                    chol_scaled: None,
                    small_sd: 0.0,
                    lambda: 0.0,
                    quantiles: Vec::new(),
                    tail_slope: -1.0,
                    inv_scales: None,
                    cont_var_d: 0.0,
                })
            }
            Scheme::CpGaussian => {
                if cfg.eps <= 0.0 {
                    return Err(LevyError::SimConfig("eps must be positive".into()));
                }
                let chol_scaled = model.gaussian.cholesky().map(|l| {
                    l.iter().map(|v| v * (2.0 * cfg.dt).sqrt()).collect::<Vec<f64>>()
                });
                let coord_var = kernel_integrals::small_jump_coord_var(model, cfg.eps)?;
                let small_sd = (cfg.dt * coord_var).sqrt();
                let lambda = kernel_integrals::tail_mass(model, cfg.eps)?;
                let (quantiles, tail_slope) = if lambda > 0.0 {
                    build_radius_quantiles(model, cfg.eps, lambda)?
                } else {
                    (Vec::new(), -1.0)
                };
                let inv_scales = match &model.kernel {
                    KernelProfile::Canonical => None,
                    KernelProfile::Diagonal(s) => {
                        Some(s.iter().map(|v| 1.0 / v).collect::<Vec<f64>>())
                    }
                };
                let a_dd = model.gaussian.a_dd();
                let cont_var_d = 2.0 * a_dd * cfg.dt + small_sd * small_sd;
                Ok(StepSampler {
                    dim: d,
                    scheme: cfg.scheme,
                    dt: cfg.dt,
                    alpha: 0.0,
                    chol_scaled,
                    small_sd,
                    lambda,
                    quantiles,
                    tail_slope,
                    inv_scales,
                    cont_var_d,
                })
            }
        }
    }

    fn sample_radius<R: Rng>(&self, rng: &mut R) -> f64 {
        let u = rng.gen::<f64>();
        let pos = u * (N_QUANTILES as f64);
        let j = pos as usize;
        if j + 1 < self.quantiles.len() {
            let f = pos - j as f64;
            (self.quantiles[j] * (1.0 - f) + self.quantiles[j + 1] * f).exp()
        } else {
            // extreme tail: local power-law extrapolation of the survival
            // function beyond the last node
            let last = *self.quantiles.last().expect("non-empty quantile table");
            let frac = ((1.0 - u) * N_QUANTILES as f64).max(1e-16);
            (last + frac.ln() / self.tail_slope).exp()
        }
    }

    fn unit_direction<R: Rng>(&self, rng: &mut R, out: &mut [f64; MAX_SIM_DIM]) {
        match self.dim {
            1 => out[0] = if rng.gen::<bool>() { 1.0 } else { -1.0 },
            2 => {
                let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                out[0] = th.cos();
                out[1] = th.sin();
            }
            3 => {
                let z = 2.0 * rng.gen::<f64>() - 1.0;
                let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
                let rho = (1.0 - z * z).sqrt();
                out[0] = rho * th.cos();
                out[1] = rho * th.sin();
                out[2] = z;
            }
            _ => {
                // d = 4: normalized Gaussian vector
                let mut norm2 = 0.0;
                for v in out.iter_mut().take(self.dim) {
                    let g: f64 = rng.sample(StandardNormal);
                    *v = g;
                    norm2 += g * g;
                }
                let inv = norm2.sqrt().recip();
                for v in out.iter_mut().take(self.dim) {
                    *v *= inv;
                }
            }
        }
    }

    /// Advances the position by one step of duration dt * dt_frac.
    /// Returns true when a large jump fired (bridge correction skips those).
    fn step<R: Rng>(&self, rng: &mut R, dt_frac: f64, pos: &mut [f64; MAX_SIM_DIM]) -> bool {
        match self.scheme {
            Scheme::ExactStable => {
                let dte = self.dt * dt_frac;
                if self.dim == 1 {
                    pos[0] += dte.powf(1.0 / self.alpha) * sample_sym_stable(self.alpha, rng);
                } else {
                    let tau =
                        dte.powf(2.0 / self.alpha) * sample_one_sided_stable(self.alpha / 2.0, rng);
                    let sd = (2.0 * tau).sqrt();
                    for v in pos.iter_mut().take(self.dim) {
                        let g: f64 = rng.sample(StandardNormal);
                        *v += sd * g;
                    }
                }
                true
            }
            Scheme::CpGaussian => {
                let root_frac = dt_frac.sqrt();
                if let Some(l) = &self.chol_scaled {
                    let d = self.dim;
                    let mut g = [0.0; MAX_SIM_DIM];
                    for v in g.iter_mut().take(d) {
                        *v = rng.sample::<f64, _>(StandardNormal);
                    }
                    for i in 0..d {
                        let mut acc = 0.0;
                        for (k, gv) in g.iter().enumerate().take(i + 1) {
                            acc += l[i * d + k] * gv;
                        }
                        pos[i] += acc * root_frac;
                    }
                }
                if self.small_sd > 0.0 {
                    for v in pos.iter_mut().take(self.dim) {
                        let g: f64 = rng.sample(StandardNormal);
                        *v += self.small_sd * root_frac * g;
                    }
                }
                let mut jumped = false;
                if self.lambda > 0.0 {
                    let mean = self.lambda * self.dt * dt_frac;
                    let n = Poisson::new(mean).map(|p| p.sample(rng)).unwrap_or(0.0) as usize;
                    let mut dir = [0.0; MAX_SIM_DIM];
                    for _ in 0..n {
                        jumped = true;
                        let r = self.sample_radius(rng);
                        self.unit_direction(rng, &mut dir);
                        match &self.inv_scales {
                            None => {
                                for (p, u) in pos.iter_mut().zip(dir.iter()).take(self.dim) {
                                    *p += r * u;
                                }
                            }
                            Some(inv) => {
                                for ((p, u), s) in
                                    pos.iter_mut().zip(dir.iter()).zip(inv.iter()).take(self.dim)
                                {
                                    *p += r * u * s;
                                }
                            }
                        }
                    }
                }
                jumped
            }
        }
    }
}

/// Log-radius quantile table of the jump law above eps.
fn build_radius_quantiles(model: &LevyModel, eps: f64, total: f64) -> Result<(Vec<f64>, f64)> {
    // survival function T(rho) on a log grid
    let per_decade = 32usize;
    let cutoff = model.kernel_cutoff();
    let mut rhos: Vec<f64> = vec![eps];
    let mut tails: Vec<f64> = vec![total];
    let mut rho = eps;
    let factor = 10f64.powf(1.0 / per_decade as f64);
    for _ in 0..(per_decade * 60) {
        rho *= factor;
        if let Some(c) = cutoff {
            if rho >= c {
                break;
            }
        }
        let t = kernel_integrals::tail_mass(model, rho)?;
        rhos.push(rho);
        tails.push(t);
        if t <= total * 1e-11 {
            break;
        }
    }
    let n = rhos.len();
    if n < 2 {
        return Err(LevyError::SimConfig(
            "jump radius law degenerate above eps".into(),
        ));
    }
    let log_rho: Vec<f64> = rhos.iter().map(|v| v.ln()).collect();
    let log_tail: Vec<f64> = tails.iter().map(|v| v.max(1e-300).ln()).collect();
    // quantiles: T(q_u) = total (1 - u)
    let mut quantiles = Vec::with_capacity(N_QUANTILES + 1);
    for j in 0..=N_QUANTILES {
        let u = j as f64 / N_QUANTILES as f64;
        let target = (total * (1.0 - u).max(1e-13)).ln();
        // binary search in the decreasing log_tail
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if log_tail[mid] > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let f = if log_tail[hi] == log_tail[lo] {
            0.0
        } else {
            (target - log_tail[lo]) / (log_tail[hi] - log_tail[lo])
        };
        quantiles.push(log_rho[lo] + f.clamp(0.0, 1.0) * (log_rho[hi] - log_rho[lo]));
    }
    let tail_slope = {
        let k = n - 1;
        let dy = log_tail[k] - log_tail[k - 1];
        let dx = log_rho[k] - log_rho[k - 1];
        (dy / dx).min(-1e-3)
    };
    Ok((quantiles, tail_slope))
}

/// Monte Carlo engine bound to one model.
pub struct Engine {
    model: Arc<LevyModel>,
    exponent: Arc<Exponent>,
    sf: Arc<ScaleFunction>,
    sf_coord: Arc<ScaleFunction>,
}

impl Engine {
    pub fn new(model: Arc<LevyModel>) -> Result<Engine> {
        let exponent = Arc::new(Exponent::new(model.clone()));
        let sf = Arc::new(ScaleFunction::from_exponent(exponent.clone(), false)?);
        let sf_coord = Arc::new(ScaleFunction::from_exponent(exponent.clone(), true)?);
        Ok(Engine {
            model,
            exponent,
            sf,
            sf_coord,
        })
    }

    pub fn model(&self) -> &Arc<LevyModel> {
        &self.model
    }

    pub fn exponent(&self) -> &Arc<Exponent> {
        &self.exponent
    }

    pub fn scale(&self) -> &Arc<ScaleFunction> {
        &self.sf
    }

    pub fn scale_coord(&self) -> &Arc<ScaleFunction> {
        &self.sf_coord
    }

    /// Default configuration: eps at the step's natural spatial scale
    /// phi^-1(dt), exact increments when the model allows them.
    pub fn default_config(&self, dt: f64, n_paths: usize, seed: u64) -> Result<SimConfig> {
        let scheme = match &self.model.closed_form {
            Some(ClosedForm::IsotropicStable { .. }) => Scheme::ExactStable,
            _ => Scheme::CpGaussian,
        };
        Ok(SimConfig {
            dt,
            eps: self.sf.phi_inv(dt)?,
            n_paths,
            seed,
            bridge_correction: false,
            scheme,
        })
    }

    fn check_start(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.model.dim {
            return Err(LevyError::Domain(format!(
                "expected a {}-vector, got length {}",
                self.model.dim,
                x.len()
            )));
        }
        if x[self.model.dim - 1] <= 0.0 {
            return Err(LevyError::Domain(
                "start point must lie in the upper half-space (x_d > 0)".into(),
            ));
        }
        Ok(())
    }

    fn run_path(
        &self,
        sampler: &StepSampler,
        rng: &mut Pcg64,
        x0: &[f64],
        horizon: f64,
        domain: Domain,
        bridge: bool,
    ) -> PathOutcome {
        let d = sampler.dim;
        let dc = d - 1;
        let mut pos = [0.0; MAX_SIM_DIM];
        pos[..d].copy_from_slice(x0);
        let n_full = (horizon / sampler.dt).floor() as u64;
        let last_frac = (horizon - n_full as f64 * sampler.dt) / sampler.dt;
        let total_steps = n_full + if last_frac > 1e-12 { 1 } else { 0 };
        let exited = |p: &[f64; MAX_SIM_DIM]| -> bool {
            match domain {
                Domain::Half => p[dc] <= 0.0,
                Domain::Strip(r) => p[dc] <= 0.0 || p[dc] >= r,
                Domain::Free => false,
            }
        };
        let mut t = 0.0;
        for k in 0..total_steps {
            let frac = if k < n_full { 1.0 } else { last_frac };
            let dte = sampler.dt * frac;
            let prev_d = pos[dc];
            let prev = pos;
            let jumped = sampler.step(rng, frac, &mut pos);
            t += dte;
            if exited(&pos) {
                return PathOutcome {
                    tau: t,
                    pos,
                    survived: false,
                };
            }
            if bridge && !jumped && sampler.cont_var_d > 0.0 && domain != Domain::Free {
                let sigma2 = sampler.cont_var_d * frac;
                let cur_d = pos[dc];
                let mut p_cross = (-2.0 * prev_d * cur_d / sigma2).exp();
                if let Domain::Strip(r) = domain {
                    p_cross += (-2.0 * (r - prev_d) * (r - cur_d) / sigma2).exp();
                }
                if rng.gen::<f64>() < p_cross {
                    // one bisection of the step: kill midway, on the boundary
                    let mut mid = [0.0; MAX_SIM_DIM];
                    for i in 0..d {
                        mid[i] = 0.5 * (prev[i] + pos[i]);
                    }
                    mid[dc] = 0.0;
                    return PathOutcome {
                        tau: t - 0.5 * dte,
                        pos: mid,
                        survived: false,
                    };
                }
            }
        }
        PathOutcome {
            tau: f64::INFINITY,
            pos,
            survived: true,
        }
    }

    /// One path from x, killed on leaving the half-space.
    pub fn simulate_exit(
        &self,
        cfg: &SimConfig,
        x: &[f64],
        horizon: f64,
    ) -> Result<ExitRecord> {
        Ok(self.exit_records_n(cfg, x, horizon, 1)?.pop().expect("one path"))
    }

    /// Full replica set of exit records.
    pub fn exit_records(&self, cfg: &SimConfig, x: &[f64], horizon: f64) -> Result<Vec<ExitRecord>> {
        self.exit_records_n(cfg, x, horizon, cfg.n_paths)
    }

    fn exit_records_n(
        &self,
        cfg: &SimConfig,
        x: &[f64],
        horizon: f64,
        n: usize,
    ) -> Result<Vec<ExitRecord>> {
        self.check_start(x)?;
        if horizon <= 0.0 {
            return Err(LevyError::Domain("horizon must be positive".into()));
        }
        let sampler = StepSampler::new(self, cfg)?;
        let d = self.model.dim;
        Ok(run_replicas(n, cfg.seed, |rng, ps| {
            let out = self.run_path(&sampler, rng, x, horizon, Domain::Half, cfg.bridge_correction);
            ExitRecord {
                tau: out.tau,
                x_exit: out.pos[..d].to_vec(),
                survived: out.survived,
                path_seed: ps,
            }
        }))
    }

    /// P_x(tau_H > t) with binomial standard error and the scale-function
    /// reference value.
    pub fn survival_prob(&self, cfg: &SimConfig, x: &[f64], t: f64) -> Result<SurvivalEstimate> {
        if cfg.n_paths < 100 {
            return Err(LevyError::SimConfig(
                "survival estimation needs at least 100 paths".into(),
            ));
        }
        self.check_start(x)?;
        let sampler = StepSampler::new(self, cfg)?;
        let survived: Vec<bool> = run_replicas(cfg.n_paths, cfg.seed, |rng, _| {
            self.run_path(&sampler, rng, x, t, Domain::Half, cfg.bridge_correction)
                .survived
        });
        let k = survived.iter().filter(|&&s| s).count();
        let n = cfg.n_paths as f64;
        let p = k as f64 / n;
        let stderr = (p * (1.0 - p) / n).sqrt();
        let delta = x[self.model.dim - 1];
        let reference = (self.sf_coord.phi(delta)? / t).sqrt().min(1.0);
        Ok(SurvivalEstimate {
            estimate: p,
            stderr,
            reference,
            ratio: if reference > 0.0 { p / reference } else { f64::NAN },
            n: cfg.n_paths,
        })
    }

    /// Killed-density estimator p_H(t, x, y) = p(t, x - y)
    /// - E_x[ p(t - tau, X_tau - y); tau < t ].
    pub fn dirichlet_density(
        &self,
        cfg: &SimConfig,
        t: f64,
        x: &[f64],
        y: &[f64],
        ev: &DensityEvaluator,
    ) -> Result<DirichletEstimate> {
        let sep = dist(x, y);
        let p_free = ev.free_density_radial(t, sep)?;
        let table = self.killed_term_table(cfg, t, ev)?;
        self.dirichlet_density_tabled(cfg, t, x, y, p_free, &table)
    }

    /// Table covering the killed term's (s, r) range for horizon t.
    pub fn killed_term_table(
        &self,
        cfg: &SimConfig,
        t: f64,
        ev: &DensityEvaluator,
    ) -> Result<DensityTable> {
        let s_min = (0.25 * cfg.dt).min(t * 0.5);
        DensityTable::build(ev, s_min, t, 1e-6, 1e9)
    }

    pub fn dirichlet_density_tabled(
        &self,
        cfg: &SimConfig,
        t: f64,
        x: &[f64],
        y: &[f64],
        p_free: f64,
        table: &DensityTable,
    ) -> Result<DirichletEstimate> {
        self.check_start(x)?;
        self.check_start(y)?;
        if cfg.n_paths < 100 {
            return Err(LevyError::SimConfig(
                "killed-density estimation needs at least 100 paths".into(),
            ));
        }
        let sampler = StepSampler::new(self, cfg)?;
        let d = self.model.dim;
        let contribs: Vec<f64> = run_replicas(cfg.n_paths, cfg.seed, |rng, _| {
            let out = self.run_path(&sampler, rng, x, t, Domain::Half, cfg.bridge_correction);
            if out.survived || out.tau >= t {
                0.0
            } else {
                let r = dist(&out.pos[..d], y);
                table.eval(t - out.tau, r)
            }
        });
        let n = contribs.len() as f64;
        let mean = contribs.iter().sum::<f64>() / n;
        let var = contribs.iter().map(|c| (c - mean) * (c - mean)).sum::<f64>() / (n - 1.0);
        let stderr = (var / n).sqrt();
        let estimate = p_free - mean;
        Ok(DirichletEstimate {
            estimate,
            stderr,
            free_term: p_free,
            killed_term: mean,
            negative: estimate < 0.0,
            n: contribs.len(),
        })
    }

    /// Mean exit time of the d-th coordinate from (0, r), started at x_d.
    pub fn mean_exit_strip(
        &self,
        cfg: &SimConfig,
        x_d: f64,
        r: f64,
        horizon: f64,
    ) -> Result<StripEstimate> {
        if !(x_d > 0.0 && x_d < r) {
            return Err(LevyError::Domain("need 0 < x_d < r".into()));
        }
        if horizon <= 0.0 {
            return Err(LevyError::Domain("horizon must be positive".into()));
        }
        let sampler = StepSampler::new(self, cfg)?;
        let mut x0 = vec![0.0; self.model.dim];
        x0[self.model.dim - 1] = x_d;
        let taus: Vec<f64> = run_replicas(cfg.n_paths, cfg.seed, |rng, _| {
            let out = self.run_path(&sampler, rng, &x0, horizon, Domain::Strip(r), cfg.bridge_correction);
            out.tau.min(horizon)
        });
        let n = taus.len() as f64;
        let truncated = taus.iter().filter(|&&v| v >= horizon).count() as f64 / n;
        if truncated > 0.05 {
            return Err(LevyError::Domain(format!(
                "horizon too small: {:.1}% of paths truncated; increase the horizon",
                100.0 * truncated
            )));
        }
        let mean = taus.iter().sum::<f64>() / n;
        let var = taus.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
        let delta = x_d.min(r - x_d);
        let bound_value = (self.sf_coord.phi(r)? * self.sf_coord.phi(delta)?).sqrt();
        Ok(StripEstimate {
            estimate: mean,
            stderr: (var / n).sqrt(),
            bound_value,
            fitted_c: mean / bound_value,
            truncated_mass: truncated,
        })
    }

    /// Free increment over a duration; for both schemes the step law composes
    /// exactly, so a single composite step suffices.
    fn free_position<R: Rng>(
        &self,
        sampler: &StepSampler,
        rng: &mut R,
        duration: f64,
    ) -> [f64; MAX_SIM_DIM] {
        let mut pos = [0.0; MAX_SIM_DIM];
        sampler.step(rng, duration / sampler.dt, &mut pos);
        pos
    }

    /// P(|X_t| > r) by direct sampling of the free increment.
    pub fn tail_prob(&self, cfg: &SimConfig, t: f64, r: f64) -> Result<Estimate> {
        if t <= 0.0 || r < 0.0 {
            return Err(LevyError::Domain("tail_prob needs t > 0 and r >= 0".into()));
        }
        let sampler = StepSampler::new(self, cfg)?;
        let d = self.model.dim;
        let hits: Vec<bool> = run_replicas(cfg.n_paths, cfg.seed, |rng, _| {
            let pos = self.free_position(&sampler, rng, t);
            pos[..d].iter().map(|v| v * v).sum::<f64>().sqrt() > r
        });
        let n = hits.len() as f64;
        let p = hits.iter().filter(|&&h| h).count() as f64 / n;
        Ok(Estimate {
            value: p,
            stderr: (p * (1.0 - p) / n).sqrt(),
            n: hits.len(),
        })
    }

    /// sup over sampled t of P(|X_t| > c M phi^-1(t)), for each M; common
    /// random numbers across M so the columns are monotone by construction.
    pub fn vanishing_h(
        &self,
        cfg: &SimConfig,
        c_scale: f64,
        m_list: &[f64],
        t_list: &[f64],
    ) -> Result<Vec<VanishingRow>> {
        let sampler = StepSampler::new(self, cfg)?;
        let d = self.model.dim;
        let mut sup = vec![0.0f64; m_list.len()];
        for (ti, &t) in t_list.iter().enumerate() {
            let scale = self.sf.phi_inv(t)?;
            let radii: Vec<f64> = run_replicas(cfg.n_paths, cfg.seed ^ (ti as u64) << 32, |rng, _| {
                let pos = self.free_position(&sampler, rng, t);
                pos[..d].iter().map(|v| v * v).sum::<f64>().sqrt()
            });
            for (mi, &m) in m_list.iter().enumerate() {
                let thresh = c_scale * m * scale;
                let p = radii.iter().filter(|&&rr| rr > thresh).count() as f64
                    / radii.len() as f64;
                sup[mi] = sup[mi].max(p);
            }
        }
        Ok(m_list
            .iter()
            .zip(sup)
            .map(|(&m, p)| VanishingRow {
                m,
                sup_prob: p,
                h_value: c_scale.powi(-(d as i32)) * p,
            })
            .collect())
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_sampler_symmetric_and_scaling() {
        let mut rng = Pcg64::seed_from_u64(7);
        let n = 200_000;
        let mut mean = 0.0;
        let mut frac_big = 0.0;
        for _ in 0..n {
            let x = sample_sym_stable(1.0, &mut rng);
            mean += x.clamp(-10.0, 10.0);
            if x.abs() > 10.0 {
                frac_big += 1.0;
            }
        }
        mean /= n as f64;
        frac_big /= n as f64;
        // clipped standard Cauchy: sd ~ 2.3, so 4 sigma ~ 0.021
        assert!(mean.abs() < 0.021, "clipped mean {mean}");
        // standard Cauchy: P(|X| > 10) = 2/pi atan(1/10) ~ 0.0634
        let want = 2.0 / std::f64::consts::PI * (0.1f64).atan();
        assert!(
            (frac_big - want).abs() < 0.004,
            "tail {frac_big} vs {want}"
        );
    }

    #[test]
    fn one_sided_stable_laplace_transform() {
        let mut rng = Pcg64::seed_from_u64(11);
        let n = 400_000;
        let mut acc = 0.0;
        for _ in 0..n {
            acc += (-sample_one_sided_stable(0.5, &mut rng)).exp();
        }
        let mean = acc / n as f64;
        let want = (-1.0f64).exp();
        assert!(
            (mean - want).abs() < 3e-3,
            "E e^-S = {mean}, want {want}"
        );
    }

    #[test]
    fn deterministic_streams() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let engine = Engine::new(m).unwrap();
        let cfg = engine.default_config(0.01, 64, 42).unwrap();
        let a = engine.exit_records(&cfg, &[1.0], 1.0).unwrap();
        let b = engine.exit_records(&cfg, &[1.0], 1.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.tau.to_bits(), y.tau.to_bits());
            assert_eq!(x.x_exit, y.x_exit);
            assert_eq!(x.survived, y.survived);
            assert_eq!(x.path_seed, y.path_seed);
        }
    }

    #[test]
    fn far_start_survives() {
        let m = Arc::new(LevyModel::brownian(1, 1.0));
        let engine = Engine::new(m).unwrap();
        let mut cfg = engine.default_config(0.01, 10_000, 3).unwrap();
        cfg.scheme = Scheme::CpGaussian;
        let recs = engine.exit_records(&cfg, &[50.0], 0.5).unwrap();
        let surv = recs.iter().filter(|r| r.survived).count() as f64 / recs.len() as f64;
        assert!(surv >= 0.999, "survival {surv}");
    }

    #[test]
    fn boundary_start_dies_fast() {
        // with the bridge correction the continuous part kills a start one
        // ulp off the boundary within the first step
        let m = Arc::new(LevyModel::brownian(1, 1.0));
        let engine = Engine::new(m).unwrap();
        let mut cfg = engine.default_config(0.01, 200, 5).unwrap();
        cfg.bridge_correction = true;
        let recs = engine.exit_records(&cfg, &[1e-12], 1.0).unwrap();
        for r in &recs {
            assert!(!r.survived);
            assert!(r.tau <= cfg.dt + 1e-12, "tau {}", r.tau);
            assert!(r.x_exit[0] <= 0.0);
        }

        // plain grid detection from the boundary: half the paths exit at the
        // very first step
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let engine = Engine::new(m).unwrap();
        let cfg = engine.default_config(0.01, 400, 5).unwrap();
        let recs = engine.exit_records(&cfg, &[1e-12], 1.0).unwrap();
        let first_step = recs.iter().filter(|r| !r.survived && r.tau <= cfg.dt).count();
        assert!(
            (first_step as f64 / 400.0 - 0.5).abs() < 0.1,
            "first-step exits {first_step}/400"
        );
    }

    #[test]
    fn exit_record_consistency() {
        let m = Arc::new(LevyModel::tempered(1, 1.0, 1.0));
        let engine = Engine::new(m).unwrap();
        let cfg = engine.default_config(0.005, 500, 9).unwrap();
        let recs = engine.exit_records(&cfg, &[0.5], 0.5).unwrap();
        for r in &recs {
            if r.survived {
                assert!(r.tau.is_infinite());
                assert!(r.x_exit[0] > 0.0);
            } else {
                assert!(r.tau <= 0.5 + 1e-12);
                assert!(r.x_exit[0] <= 0.0);
            }
        }
    }

    #[test]
    fn horizon_must_be_positive() {
        let m = Arc::new(LevyModel::isotropic_stable(1, 1.0));
        let engine = Engine::new(m).unwrap();
        let cfg = engine.default_config(0.01, 10, 1).unwrap();
        assert!(engine.exit_records(&cfg, &[1.0], -1.0).is_err());
        assert!(engine.exit_records(&cfg, &[1.0, 1.0], 1.0).is_err());
    }
}
