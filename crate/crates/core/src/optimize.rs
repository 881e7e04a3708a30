//! Derivative-free maximisation of `ν_p(γ, β)` and Fourier warm starts.
//!
//! The search runs in the box `[-2, 2]^{2p}` over the flat vector
//! `[γ_1..γ_p, β_1..β_p]`. Two methods are available: an adaptive
//! Nelder–Mead simplex with restarts, and a trust-region scheme that models
//! each overlap entering the energy by a separable quadratic and maximises
//! the recombined energy inside the trust region.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exact::{nu_exact, nu_from_g, ExactConfig};
use crate::fock::FockDim;
use crate::gmatrix::{Angles, SignedIndex};
use crate::mps::TruncationPolicy;
use crate::scalar::Cplx;
use crate::spinboson::{run_spin_boson, SpinBosonConfig};

/// Half-width of the search box.
pub const BOX: f64 = 2.0;

/// The energy written as `ν = Im Σ_k w_k γ_{i_k} z_k²`.
#[derive(Clone, Debug, PartialEq)]
pub struct Components {
    pub z: Vec<Cplx<f64>>,
    /// `(i_k, w_k)` for every entry of `z`.
    pub weights: Vec<(usize, f64)>,
}

impl Components {
    pub fn energy(&self, gamma: &[f64]) -> f64 {
        self.z
            .iter()
            .zip(&self.weights)
            .map(|(z, &(i, w))| w * gamma[i] * 2.0 * z.re * z.im)
            .sum()
    }
}

/// One objective value, optionally with its decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub nu: f64,
    pub components: Option<Components>,
}

impl From<f64> for Evaluation {
    fn from(nu: f64) -> Self {
        Self {
            nu,
            components: None,
        }
    }
}

/// Something that maps angles to an energy.
pub trait Objective: Sync {
    fn evaluate(&self, angles: &Angles<f64>) -> Result<Evaluation>;
}

/// Wraps a plain closure returning `ν`.
pub struct FnObjective<F>(pub F);

impl<F> Objective for FnObjective<F>
where
    F: Fn(&Angles<f64>) -> Result<f64> + Sync,
{
    fn evaluate(&self, angles: &Angles<f64>) -> Result<Evaluation> {
        (self.0)(angles).map(Evaluation::from)
    }
}

/// `ν` from the brute-force iteration.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExactObjective {
    pub cfg: ExactConfig,
}

impl Objective for ExactObjective {
    fn evaluate(&self, angles: &Angles<f64>) -> Result<Evaluation> {
        let trace = nu_exact(angles, &self.cfg)?;
        let g = trace.iterates.last().expect("non-empty trace");
        let p = angles.p();
        let mut z = Vec::with_capacity(2 * p);
        let mut weights = Vec::with_capacity(2 * p);
        for j in SignedIndex::all(p).filter(|j| j.value() != 0) {
            z.push(g.get(0, j.value())?);
            let w = if j.value() > 0 { -0.5 } else { 0.5 };
            weights.push((j.value().unsigned_abs() as usize - 1, w));
        }
        debug_assert!((nu_from_g(g, angles).0 - trace.nu).abs() < 1e-12);
        Ok(Evaluation {
            nu: trace.nu,
            components: Some(Components { z, weights }),
        })
    }
}

/// `ν` from the spin-boson tensor-train simulation.
#[derive(Clone, Debug)]
pub struct MpsObjective {
    pub d: FockDim,
    pub policy: TruncationPolicy<f64>,
    pub cfg: SpinBosonConfig<f64>,
}

impl Objective for MpsObjective {
    fn evaluate(&self, angles: &Angles<f64>) -> Result<Evaluation> {
        let run = run_spin_boson(angles, self.d, &self.policy, &self.cfg)?;
        let z = run.final_overlaps.iter().map(|g| g.conj()).collect();
        let weights = (0..angles.p()).map(|r| (r, 1.0)).collect();
        Ok(Evaluation {
            nu: run.nu,
            components: Some(Components { z, weights }),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    NelderMead,
    CompositeModel,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::NelderMead => "nelder-mead",
            Method::CompositeModel => "composite-model",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nelder-mead" | "nm" => Ok(Method::NelderMead),
            "composite-model" | "composite" => Ok(Method::CompositeModel),
            _ => Err(Error::Parse(format!("unknown optimizer method `{s}`"))),
        }
    }
}

/// Where the first iterate comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum Init {
    Given(Angles<f64>),
    /// Extrapolated from lower-depth angles.
    Fourier(Angles<f64>),
    /// Uniform in `[-1, 1]^{2p}` from the configured seed.
    Random,
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    pub max_evals: usize,
    pub method: Method,
    pub seed: u64,
    pub init: Init,
    /// Initial simplex edge or trust radius.
    pub initial_step: f64,
}

impl OptimizerConfig {
    /// Budget of `20p` evaluations, Nelder–Mead, random start.
    pub fn new(p: usize) -> Self {
        Self {
            max_evals: 20 * p,
            method: Method::NelderMead,
            seed: 0,
            init: Init::Random,
            initial_step: 0.1,
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        if p == 0 {
            return Err(Error::Precondition("depth p must be at least 1".into()));
        }
        if self.max_evals < 2 * p + 1 {
            return Err(Error::Precondition(format!(
                "max_evals = {} is below 2p+1 = {}",
                self.max_evals,
                2 * p + 1
            )));
        }
        if !(self.initial_step > 0.0 && self.initial_step < BOX) {
            return Err(Error::Precondition("initial step must lie in (0, 2)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TracePoint {
    pub eval: usize,
    pub angles: Angles<f64>,
    pub nu: f64,
    /// Largest `ν` seen up to and including this evaluation.
    pub best_nu: f64,
}

#[derive(Clone, Debug)]
pub struct OptimizationRun {
    pub best_angles: Angles<f64>,
    pub best_nu: f64,
    pub eval_count: usize,
    pub trace: Vec<TracePoint>,
    pub restarts: usize,
}

/// Cosine coefficients of `v` sampled at `(i + ½)/n`.
fn cosine_coefficients(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    (0..v.len())
        .map(|k| {
            let s: f64 = v
                .iter()
                .enumerate()
                .map(|(i, x)| x * (PI * k as f64 * (i as f64 + 0.5) / n).cos())
                .sum();
            if k == 0 {
                s / n
            } else {
                2.0 * s / n
            }
        })
        .collect()
}

fn cosine_series(coef: &[f64], len: usize) -> Vec<f64> {
    (0..len)
        .map(|j| {
            let t = (j as f64 + 0.5) / len as f64;
            coef.iter()
                .enumerate()
                .map(|(k, c)| c * (PI * k as f64 * t).cos())
                .sum()
        })
        .collect()
}

/// Resamples a schedule to `target_p` layers through its cosine series.
pub fn fourier_extrapolate(source: &Angles<f64>, target_p: usize) -> Result<Angles<f64>> {
    if target_p < source.p() {
        return Err(Error::Precondition(format!(
            "target depth {target_p} is below the source depth {}",
            source.p()
        )));
    }
    if target_p == source.p() {
        return Ok(source.clone());
    }
    let gamma = cosine_series(&cosine_coefficients(source.gamma()), target_p);
    let beta = cosine_series(&cosine_coefficients(source.beta()), target_p);
    Angles::new(gamma, beta)
}

struct Tracker<'a, O: Objective + ?Sized> {
    objective: &'a O,
    max_evals: usize,
    trace: Vec<TracePoint>,
    best: Option<(Vec<f64>, f64)>,
}

impl<O: Objective + ?Sized> Tracker<'_, O> {
    fn remaining(&self) -> usize {
        self.max_evals - self.trace.len()
    }

    /// Evaluates as much of the batch as the budget allows, in order.
    fn batch(&mut self, xs: &[Vec<f64>]) -> Result<Vec<Evaluation>> {
        let take = xs.len().min(self.remaining());
        let angles: Vec<Angles<f64>> = xs[..take]
            .iter()
            .map(|x| Angles::from_flat(x))
            .collect::<Result<_>>()?;
        let start = self.trace.len();
        let results: Vec<Result<Evaluation>> =
            angles.par_iter().map(|a| self.objective.evaluate(a)).collect();
        let mut out = Vec::with_capacity(take);
        for (i, (a, r)) in angles.into_iter().zip(results).enumerate() {
            let eval = start + i + 1;
            let e = r.map_err(|e| Error::Evaluator {
                eval,
                source: Box::new(e),
            })?;
            if !e.nu.is_finite() {
                return Err(Error::Evaluator {
                    eval,
                    source: Box::new(Error::NonFinite("objective value")),
                });
            }
            let prev = self.best.as_ref().map_or(f64::NEG_INFINITY, |b| b.1);
            if e.nu > prev {
                self.best = Some((xs[i].clone(), e.nu));
            }
            self.trace.push(TracePoint {
                eval,
                angles: a,
                nu: e.nu,
                best_nu: e.nu.max(prev),
            });
            out.push(e);
        }
        Ok(out)
    }

    fn finish(self, restarts: usize) -> Result<OptimizationRun> {
        let (x, nu) = self
            .best
            .ok_or_else(|| Error::NonConvergence("no evaluation was made".into()))?;
        Ok(OptimizationRun {
            best_angles: Angles::from_flat(&x)?,
            best_nu: nu,
            eval_count: self.trace.len(),
            trace: self.trace,
            restarts,
        })
    }
}

impl OptimizationRun {
    pub fn p(&self) -> usize {
        self.best_angles.p()
    }
}

fn clamp_box(x: &mut [f64]) {
    for v in x {
        *v = v.clamp(-BOX, BOX);
    }
}

fn start_point(p: usize, cfg: &OptimizerConfig) -> Result<Vec<f64>> {
    let mut x = match &cfg.init {
        Init::Given(a) => {
            if a.p() != p {
                return Err(Error::ShapeMismatch(format!(
                    "initial angles have p = {} but p = {p} was requested",
                    a.p()
                )));
            }
            a.to_flat()
        }
        Init::Fourier(src) => fourier_extrapolate(src, p)?.to_flat(),
        Init::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..2 * p).map(|_| rng.random_range(-1.0..=1.0)).collect()
        }
    };
    clamp_box(&mut x);
    Ok(x)
}

/// Maximises the objective at depth `p`.
pub fn optimize<O: Objective + ?Sized>(
    p: usize,
    cfg: &OptimizerConfig,
    objective: &O,
) -> Result<OptimizationRun> {
    cfg.validate(p)?;
    let x0 = start_point(p, cfg)?;
    let mut tracker = Tracker {
        objective,
        max_evals: cfg.max_evals,
        trace: Vec::new(),
        best: None,
    };
    let restarts = match cfg.method {
        Method::NelderMead => nelder_mead(&mut tracker, x0, cfg.initial_step)?,
        Method::CompositeModel => composite(&mut tracker, x0, cfg.initial_step)?,
    };
    tracker.finish(restarts)
}

struct Simplex {
    x: Vec<Vec<f64>>,
    f: Vec<f64>,
}

impl Simplex {
    fn sort(&mut self) {
        let mut idx: Vec<usize> = (0..self.x.len()).collect();
        idx.sort_by(|&a, &b| self.f[a].total_cmp(&self.f[b]));
        self.x = idx.iter().map(|&i| self.x[i].clone()).collect();
        self.f = idx.iter().map(|&i| self.f[i]).collect();
    }

    fn diameter(&self) -> f64 {
        self.x[1..]
            .iter()
            .map(|v| {
                v.iter()
                    .zip(&self.x[0])
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }
}

fn affine(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    let mut v: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
    clamp_box(&mut v);
    v
}

/// Adaptive Nelder–Mead on `-ν`; returns the number of restarts used.
fn nelder_mead<O: Objective + ?Sized>(
    t: &mut Tracker<'_, O>,
    x0: Vec<f64>,
    step: f64,
) -> Result<usize> {
    let n = x0.len();
    let nf = n as f64;
    let (rho, chi, psi, sigma) = (1.0, 1.0 + 2.0 / nf, 0.75 - 0.5 / nf, 1.0 - 1.0 / nf);
    let mut center = x0;
    let mut restarts = 0;
    let mut last_best = f64::NEG_INFINITY;

    loop {
        let mut pts = vec![center.clone()];
        for i in 0..n {
            let mut v = center.clone();
            v[i] += if v[i] + step <= BOX { step } else { -step };
            pts.push(v);
        }
        let fs = t.batch(&pts)?;
        if fs.len() < pts.len() {
            return Ok(restarts);
        }
        let mut s = Simplex {
            x: pts,
            f: fs.iter().map(|e| -e.nu).collect(),
        };

        let converged = loop {
            s.sort();
            let spread = s.f[n] - s.f[0];
            if s.diameter() < 1e-9 || spread <= 1e-14 * (1.0 + s.f[0].abs()) {
                break true;
            }
            let mut c = vec![0.0; n];
            for v in &s.x[..n] {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci += vi / nf;
                }
            }
            let xr = affine(&c, &s.x[n], -rho);
            let Some(fr) = t.batch(std::slice::from_ref(&xr))?.first().map(|e| -e.nu) else {
                break false;
            };
            if fr < s.f[0] {
                let xe = affine(&c, &s.x[n], -rho * chi);
                let Some(fe) = t.batch(std::slice::from_ref(&xe))?.first().map(|e| -e.nu) else {
                    s.x[n] = xr;
                    s.f[n] = fr;
                    break false;
                };
                if fe < fr {
                    s.x[n] = xe;
                    s.f[n] = fe;
                } else {
                    s.x[n] = xr;
                    s.f[n] = fr;
                }
                continue;
            }
            if fr < s.f[n - 1] {
                s.x[n] = xr;
                s.f[n] = fr;
                continue;
            }
            let outside = fr < s.f[n];
            let xc = if outside {
                affine(&c, &s.x[n], -rho * psi)
            } else {
                affine(&c, &s.x[n], psi)
            };
            let Some(fc) = t.batch(std::slice::from_ref(&xc))?.first().map(|e| -e.nu) else {
                break false;
            };
            if (outside && fc <= fr) || (!outside && fc < s.f[n]) {
                s.x[n] = xc;
                s.f[n] = fc;
                continue;
            }
            let shrunk: Vec<Vec<f64>> = s.x[1..].iter().map(|v| affine(&s.x[0], v, sigma)).collect();
            let fs = t.batch(&shrunk)?;
            let done = fs.len() < shrunk.len();
            for (i, (v, e)) in shrunk.into_iter().zip(fs).enumerate() {
                s.x[i + 1] = v;
                s.f[i + 1] = -e.nu;
            }
            if done {
                break false;
            }
        };

        let best = t.best.clone().expect("evaluated");
        if !converged || t.remaining() <= n || best.1 - last_best <= 1e-12 * (1.0 + best.1.abs()) {
            return Ok(restarts);
        }
        last_best = best.1;
        center = best.0;
        restarts += 1;
        log::debug!("nelder-mead restart {restarts} at ν = {:.10}", best.1);
    }
}

/// Separable quadratic through three points per coordinate.
struct Surrogate {
    value: Vec<f64>,
    grad: Vec<Vec<f64>>,
    curv: Vec<Vec<f64>>,
}

impl Surrogate {
    fn at(&self, k: usize, s: &[f64]) -> f64 {
        let mut v = self.value[k];
        for (i, si) in s.iter().enumerate() {
            v += self.grad[k][i] * si + 0.5 * self.curv[k][i] * si * si;
        }
        v
    }
}

fn flatten(c: &Components) -> Vec<f64> {
    c.z.iter().flat_map(|z| [z.re, z.im]).collect()
}

fn model_energy(sur: &Surrogate, weights: &[(usize, f64)], x: &[f64], s: &[f64]) -> f64 {
    weights
        .iter()
        .enumerate()
        .map(|(k, &(i, w))| {
            let re = sur.at(2 * k, s);
            let im = sur.at(2 * k + 1, s);
            w * (x[i] + s[i]) * 2.0 * re * im
        })
        .sum()
}

/// Maximises a cheap function of `s` over `|s_i| ≤ r_i` by Nelder–Mead.
fn inner_maximise(f: impl Fn(&[f64]) -> f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let n = lo.len();
    let clip = |v: &mut Vec<f64>| {
        for i in 0..n {
            v[i] = v[i].clamp(lo[i], hi[i]);
        }
    };
    let g = |v: &[f64]| -f(v);
    let mut x: Vec<Vec<f64>> = vec![vec![0.0; n]];
    for i in 0..n {
        let mut v = vec![0.0; n];
        v[i] = if hi[i] > -lo[i] { 0.5 * hi[i] } else { 0.5 * lo[i] };
        x.push(v);
    }
    let mut fx: Vec<f64> = x.iter().map(|v| g(v)).collect();
    for _ in 0..400 * n {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| fx[a].total_cmp(&fx[b]));
        x = idx.iter().map(|&i| x[i].clone()).collect();
        fx = idx.iter().map(|&i| fx[i]).collect();
        if fx[n] - fx[0] <= 1e-15 * (1.0 + fx[0].abs()) {
            break;
        }
        let mut c = vec![0.0; n];
        for v in &x[..n] {
            for (ci, vi) in c.iter_mut().zip(v) {
                *ci += vi / n as f64;
            }
        }
        let mv = |t: f64| {
            let mut v: Vec<f64> = c.iter().zip(&x[n]).map(|(a, b)| a + t * (b - a)).collect();
            clip(&mut v);
            v
        };
        let xr = mv(-1.0);
        let fr = g(&xr);
        if fr < fx[0] {
            let xe = mv(-2.0);
            let fe = g(&xe);
            (x[n], fx[n]) = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < fx[n - 1] {
            (x[n], fx[n]) = (xr, fr);
        } else {
            let xc = mv(0.5);
            let fc = g(&xc);
            if fc < fx[n] {
                (x[n], fx[n]) = (xc, fc);
            } else {
                for i in 1..=n {
                    let v: Vec<f64> = x[0].iter().zip(&x[i]).map(|(a, b)| a + 0.5 * (b - a)).collect();
                    fx[i] = g(&v);
                    x[i] = v;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| fx[a].total_cmp(&fx[b])).unwrap_or(0);
    x.swap_remove(best)
}

/// Composite-model trust region; falls back to Nelder–Mead when the
/// objective gives no decomposition.
fn composite<O: Objective + ?Sized>(
    t: &mut Tracker<'_, O>,
    x0: Vec<f64>,
    step: f64,
) -> Result<usize> {
    let n = x0.len();
    let Some(first) = t.batch(std::slice::from_ref(&x0))?.pop() else {
        return Ok(0);
    };
    let Some(mut comp) = first.components else {
        log::warn!("objective has no overlap decomposition; using nelder-mead");
        return nelder_mead(t, x0, step);
    };
    let mut x = x0;
    let mut nu = first.nu;
    let mut radius = step;

    while radius > 1e-7 && t.remaining() > 2 * n {
        let h = (0.5 * radius).max(1e-5);
        let mut probes = Vec::with_capacity(2 * n);
        let mut spacing = Vec::with_capacity(n);
        for i in 0..n {
            let up = (x[i] + h).min(BOX) - x[i];
            let down = x[i] - (x[i] - h).max(-BOX);
            let mut a = x.clone();
            a[i] += up;
            let mut b = x.clone();
            b[i] -= down;
            probes.push(a);
            probes.push(b);
            spacing.push((up, down));
        }
        let evals = t.batch(&probes)?;
        if evals.len() < probes.len() {
            break;
        }
        let center = flatten(&comp);
        let m = center.len();
        let mut sur = Surrogate {
            value: center.clone(),
            grad: vec![vec![0.0; n]; m],
            curv: vec![vec![0.0; n]; m],
        };
        for i in 0..n {
            let (hu, hd) = spacing[i];
            let fu = evals[2 * i].components.as_ref().map(flatten);
            let fd = evals[2 * i + 1].components.as_ref().map(flatten);
            let (Some(fu), Some(fd)) = (fu, fd) else {
                return Err(Error::Precondition("objective stopped returning components".into()));
            };
            for k in 0..m {
                let (c0, a, b) = (center[k], fu[k], fd[k]);
                if hu > 0.0 && hd > 0.0 {
                    let du = (a - c0) / hu;
                    let dd = (c0 - b) / hd;
                    sur.curv[k][i] = 2.0 * (du - dd) / (hu + hd);
                    sur.grad[k][i] = (du * hd + dd * hu) / (hu + hd);
                } else if hu > 0.0 {
                    sur.grad[k][i] = (a - c0) / hu;
                } else if hd > 0.0 {
                    sur.grad[k][i] = (c0 - b) / hd;
                }
            }
        }

        let lo: Vec<f64> = x.iter().map(|v| (-radius).max(-BOX - v)).collect();
        let hi: Vec<f64> = x.iter().map(|v| radius.min(BOX - v)).collect();
        let weights = comp.weights.clone();
        let s = inner_maximise(|s| model_energy(&sur, &weights, &x, s), &lo, &hi);
        let predicted = model_energy(&sur, &weights, &x, &s) - model_energy(&sur, &weights, &x, &vec![0.0; n]);

        // A probe may already beat the model step.
        let (pi, pbest) = evals
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.nu.total_cmp(&b.1.nu))
            .map(|(i, e)| (i, e.nu))
            .expect("non-empty probes");

        if predicted <= 1e-15 * (1.0 + nu.abs()) {
            if pbest > nu {
                x = probes[pi].clone();
                nu = pbest;
                comp = evals[pi].components.clone().expect("checked above");
            } else {
                radius *= 0.25;
            }
            continue;
        }
        let mut trial = x.clone();
        for (ti, si) in trial.iter_mut().zip(&s) {
            *ti += si;
        }
        clamp_box(&mut trial);
        let Some(e) = t.batch(std::slice::from_ref(&trial))?.pop() else {
            break;
        };
        let ratio = (e.nu - nu) / predicted;
        if e.nu > nu && e.nu >= pbest {
            x = trial;
            nu = e.nu;
            comp = e.components.clone().ok_or_else(|| {
                Error::Precondition("objective stopped returning components".into())
            })?;
        } else if pbest > nu {
            x = probes[pi].clone();
            nu = pbest;
            comp = evals[pi].components.clone().expect("checked above");
        }
        if ratio > 0.75 {
            radius = (radius * 2.0).min(1.0);
        } else if ratio < 0.25 {
            radius *= 0.25;
        }
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bowl(a: &Angles<f64>) -> Result<f64> {
        let x = a.to_flat();
        Ok(-x
            .iter()
            .enumerate()
            .map(|(i, v)| (i as f64 + 1.0) * (v - 0.3 + 0.1 * i as f64).powi(2))
            .sum::<f64>())
    }

    #[test]
    fn bowl_nelder_mead() {
        let mut cfg = OptimizerConfig::new(2);
        cfg.max_evals = 2000;
        let r = optimize(2, &cfg, &FnObjective(bowl)).unwrap();
        for (i, v) in r.best_angles.to_flat().iter().enumerate() {
            assert!((v - (0.3 - 0.1 * i as f64)).abs() < 1e-6, "{:?}", r.best_angles);
        }
        assert!(r.eval_count <= cfg.max_evals);
    }

    #[test]
    fn budget_and_trace() {
        let mut cfg = OptimizerConfig::new(3);
        cfg.max_evals = 37;
        let r = optimize(3, &cfg, &FnObjective(bowl)).unwrap();
        assert!(r.eval_count <= 37);
        assert_eq!(r.trace.len(), r.eval_count);
        let mx = r.trace.iter().map(|t| t.nu).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(mx, r.best_nu);
        assert!(r.trace.windows(2).all(|w| w[1].best_nu >= w[0].best_nu));
    }

    #[test]
    fn rejects_small_budget() {
        let mut cfg = OptimizerConfig::new(3);
        cfg.max_evals = 6;
        assert!(optimize(3, &cfg, &FnObjective(bowl)).is_err());
    }

    #[test]
    fn evaluator_error_has_context() {
        let cfg = OptimizerConfig::new(1);
        let bad = FnObjective(|_: &Angles<f64>| Err(Error::NonFinite("test")));
        match optimize(1, &cfg, &bad) {
            Err(Error::Evaluator { eval: 1, .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn extrapolate_identity_and_constant() {
        let a = Angles::new(vec![0.2, 0.4, 0.5], vec![0.6, 0.4, 0.1]).unwrap();
        let same = fourier_extrapolate(&a, 3).unwrap();
        assert_eq!(same, a);
        let c = Angles::new(vec![0.3; 4], vec![-0.2; 4]).unwrap();
        let e = fourier_extrapolate(&c, 9).unwrap();
        assert!(e.gamma().iter().all(|g| (g - 0.3).abs() < 1e-12));
        assert!(e.beta().iter().all(|b| (b + 0.2).abs() < 1e-12));
    }

    #[test]
    fn series_reproduces_samples() {
        let v = [0.1, 0.5, -0.2, 0.8, 0.3];
        let back = cosine_series(&cosine_coefficients(&v), v.len());
        for (a, b) in v.iter().zip(back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn p1_exact_from_random() {
        let mut cfg = OptimizerConfig::new(1);
        cfg.max_evals = 60;
        cfg.seed = 3;
        let r = optimize(1, &cfg, &ExactObjective::default()).unwrap();
        assert!((r.best_nu - 0.3033).abs() < 1e-3, "{}", r.best_nu);
    }

    #[test]
    fn exact_components_reproduce_energy() {
        let a = Angles::new(vec![0.3, -0.5], vec![0.4, 0.2]).unwrap();
        let e = ExactObjective::default().evaluate(&a).unwrap();
        let c = e.components.unwrap();
        assert!((c.energy(a.gamma()) - e.nu).abs() < 1e-12);
    }

    #[test]
    fn composite_on_exact_p1() {
        let mut cfg = OptimizerConfig::new(1);
        cfg.method = Method::CompositeModel;
        cfg.max_evals = 200;
        cfg.init = Init::Given(Angles::new(vec![0.3], vec![0.3]).unwrap());
        let r = optimize(1, &cfg, &ExactObjective::default()).unwrap();
        assert!((r.best_nu - 0.3033).abs() < 1e-3, "{}", r.best_nu);
    }
}
