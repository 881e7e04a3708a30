//! Scaling-law fits of the energy deficit `ε(p) = 1 − ν_p / P*`.
//!
//! Two models are supported:
//!
//! * three-parameter: `ε = m / p^η + b`
//! * four-parameter: `ε = m / (p^η + c) + b`
//!
//! Fits are unweighted least squares solved with Levenberg–Marquardt from
//! several starting exponents. Confidence intervals come from a seeded
//! bootstrap over the rows.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-state energy density of the SK model at infinite size.
pub const PARISI: f64 = 0.763166;

/// Exponents tried as starting points.
pub const ETA_STARTS: [f64; 4] = [0.5, 0.75, 1.0, 1.25];

/// Central coverage of reported intervals.
pub const CI_LEVEL: f64 = 0.997;

const MAX_ITER: usize = 2000;

/// Best known infinite-size energies `(p, ν_p)` at optimized angles.
pub const PUBLISHED: [(usize, f64); 37] = [
    (1, 0.3033),
    (2, 0.4075),
    (3, 0.4726),
    (4, 0.5157),
    (5, 0.5476),
    (6, 0.5721),
    (7, 0.5915),
    (8, 0.6073),
    (9, 0.6203),
    (10, 0.6314),
    (11, 0.6408),
    (12, 0.6489),
    (13, 0.6561),
    (14, 0.6623),
    (15, 0.6678),
    (16, 0.6729),
    (17, 0.6772),
    (18, 0.6814),
    (19, 0.6850),
    (20, 0.6884),
    (22, 0.6942),
    (24, 0.6992),
    (26, 0.7035),
    (27, 0.7055),
    (28, 0.7073),
    (30, 0.7106),
    (31, 0.7115),
    (32, 0.7133),
    (34, 0.7159),
    (36, 0.7182),
    (38, 0.7202),
    (40, 0.7222),
    (48, 0.7276),
    (60, 0.7337),
    (80, 0.7397),
    (120, 0.7447),
    (160, 0.7461),
];

/// Rows `(p, ν)` with strictly increasing `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergySeries {
    rows: Vec<(usize, f64)>,
}

impl EnergySeries {
    pub fn new(rows: Vec<(usize, f64)>) -> Result<Self> {
        for w in rows.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Precondition(format!(
                    "depths must be strictly increasing ({} follows {})",
                    w[1].0, w[0].0
                )));
            }
        }
        for &(p, nu) in &rows {
            if !nu.is_finite() {
                return Err(Error::NonFinite("energy series"));
            }
            if !(nu > 0.0 && nu < PARISI) {
                log::warn!("ν = {nu} at p = {p} lies outside (0, P*)");
            }
        }
        Ok(Self { rows })
    }

    pub fn published() -> Self {
        Self {
            rows: PUBLISHED.to_vec(),
        }
    }

    pub fn rows(&self) -> &[(usize, f64)] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows with `p_min ≤ p ≤ p_max`.
    pub fn window(&self, p_min: usize, p_max: usize) -> Self {
        Self {
            rows: self
                .rows
                .iter()
                .copied()
                .filter(|&(p, _)| p >= p_min && p <= p_max)
                .collect(),
        }
    }

    /// Parses `p,nu` lines; a non-numeric first line is taken as a header.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut cols = line.split(',').map(str::trim);
            let (Some(a), Some(b)) = (cols.next(), cols.next()) else {
                return Err(Error::Parse(format!("line {}: expected `p,nu`", i + 1)));
            };
            match (a.parse::<usize>(), b.parse::<f64>()) {
                (Ok(p), Ok(nu)) => rows.push((p, nu)),
                _ if rows.is_empty() && i == 0 => continue,
                _ => return Err(Error::Parse(format!("line {}: cannot parse `{line}`", i + 1))),
            }
        }
        Self::new(rows)
    }
}

/// `(p, 1 − ν/P*)` for every row.
pub fn eps_series(series: &EnergySeries, parisi: f64) -> Result<Vec<(usize, f64)>> {
    if !(parisi > 0.0) {
        return Err(Error::Precondition(format!("Parisi value must be positive, got {parisi}")));
    }
    Ok(series.rows.iter().map(|&(p, nu)| (p, 1.0 - nu / parisi)).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Model {
    #[serde(rename = "3p")]
    ThreeParam,
    #[serde(rename = "4p")]
    FourParam,
}

impl Model {
    pub fn n_params(self) -> usize {
        match self {
            Model::ThreeParam => 3,
            Model::FourParam => 4,
        }
    }

    pub fn min_points(self) -> usize {
        match self {
            Model::ThreeParam => 4,
            Model::FourParam => 5,
        }
    }

    /// Parameter names in vector order.
    pub fn names(self) -> &'static [&'static str] {
        match self {
            Model::ThreeParam => &["m", "eta", "b"],
            Model::FourParam => &["m", "eta", "c", "b"],
        }
    }

    /// Model value at `p` for the parameter vector `theta`.
    pub fn eval(self, theta: &[f64], p: f64) -> f64 {
        match self {
            Model::ThreeParam => theta[0] * p.powf(-theta[1]) + theta[2],
            Model::FourParam => theta[0] / (p.powf(theta[1]) + theta[2]) + theta[3],
        }
    }

    fn gradient(self, theta: &[f64], p: f64, out: &mut [f64]) {
        let lp = p.ln();
        match self {
            Model::ThreeParam => {
                let q = p.powf(-theta[1]);
                out[0] = q;
                out[1] = -theta[0] * lp * q;
                out[2] = 1.0;
            }
            Model::FourParam => {
                let pe = p.powf(theta[1]);
                let den = pe + theta[2];
                out[0] = 1.0 / den;
                out[1] = -theta[0] * pe * lp / (den * den);
                out[2] = -theta[0] / (den * den);
                out[3] = 1.0;
            }
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::ThreeParam => "3p",
            Model::FourParam => "4p",
        })
    }
}

impl FromStr for Model {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "3p" | "three-param" => Ok(Model::ThreeParam),
            "4p" | "four-param" => Ok(Model::FourParam),
            _ => Err(Error::Parse(format!("unknown model `{s}` (expected 3p or 4p)"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn overlaps(&self, lo: f64, hi: f64) -> bool {
        self.lo <= hi && lo <= self.hi
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub model: Model,
    pub m: f64,
    pub eta: f64,
    pub b: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    /// Bootstrap intervals keyed like [`Model::names`].
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ci: Option<Vec<(String, Interval)>>,
    pub r2_complement: f64,
    pub sse: f64,
    pub n_points: usize,
    pub p_min: usize,
    pub p_max: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resamples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failed_resamples: Option<usize>,
}

impl FitReport {
    /// Parameters in model order.
    pub fn params(&self) -> Vec<f64> {
        match self.model {
            Model::ThreeParam => vec![self.m, self.eta, self.b],
            Model::FourParam => vec![self.m, self.eta, self.c.unwrap_or(0.0), self.b],
        }
    }

    pub fn interval(&self, name: &str) -> Option<Interval> {
        self.ci
            .as_ref()?
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, iv)| *iv)
    }

    pub fn predict(&self, p: f64) -> f64 {
        self.model.eval(&self.params(), p)
    }
}

/// Sum of squared residuals of `model(theta)` against `(p, eps)` rows.
pub fn sse(model: Model, theta: &[f64], rows: &[(usize, f64)]) -> f64 {
    rows.iter()
        .map(|&(p, e)| {
            let r = model.eval(theta, p as f64) - e;
            r * r
        })
        .sum()
}

/// Least-squares `(m, b)` for the three-parameter model at fixed `η`.
fn linear_start(eta: f64, rows: &[(usize, f64)]) -> Option<(f64, f64)> {
    let n = rows.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(p, e) in rows {
        let x = (p as f64).powf(-eta);
        sx += x;
        sy += e;
        sxx += x * x;
        sxy += x * e;
    }
    let det = n * sxx - sx * sx;
    if det.abs() < 1e-300 {
        return None;
    }
    let m = (n * sxy - sx * sy) / det;
    Some((m, (sy - m * sx) / n))
}

struct LmResult {
    theta: Vec<f64>,
    sse: f64,
}

fn levenberg_marquardt(model: Model, start: Vec<f64>, rows: &[(usize, f64)]) -> Option<LmResult> {
    let k = model.n_params();
    let n = rows.len();
    let mut theta = start;
    let mut cost = sse(model, &theta, rows);
    if !cost.is_finite() {
        return None;
    }
    let mut lambda = 1e-3;
    let mut jac = DMatrix::<f64>::zeros(n, k);
    let mut res = DVector::<f64>::zeros(n);
    let mut grad_row = vec![0.0; k];

    for _ in 0..MAX_ITER {
        for (i, &(p, e)) in rows.iter().enumerate() {
            let x = p as f64;
            res[i] = model.eval(&theta, x) - e;
            model.gradient(&theta, x, &mut grad_row);
            for (j, g) in grad_row.iter().enumerate() {
                jac[(i, j)] = *g;
            }
        }
        let jtj = jac.transpose() * &jac;
        let jtr = jac.transpose() * &res;
        if jtr.amax() <= 1e-18 * (1.0 + cost) {
            break;
        }

        let mut improved = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for j in 0..k {
                a[(j, j)] += lambda * jtj[(j, j)].max(1e-12);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            let trial_cost = sse(model, &trial, rows);
            if trial_cost.is_finite() && trial_cost <= cost {
                let small = step
                    .iter()
                    .zip(&trial)
                    .all(|(s, t)| s.abs() <= 1e-14 * (t.abs() + 1e-14));
                let flat = cost - trial_cost <= 1e-16 * cost;
                theta = trial;
                cost = trial_cost;
                lambda = (lambda / 10.0).max(1e-15);
                improved = !(small || flat);
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            break;
        }
    }
    cost.is_finite().then_some(LmResult { theta, sse: cost })
}

fn fit_rows(model: Model, rows: &[(usize, f64)]) -> Result<(Vec<f64>, f64)> {
    let mut best: Option<LmResult> = None;
    for &eta in &ETA_STARTS {
        let Some((m, b)) = linear_start(eta, rows) else {
            continue;
        };
        let start = match model {
            Model::ThreeParam => vec![m, eta, b],
            Model::FourParam => vec![m, eta, 0.0, b],
        };
        let Some(r) = levenberg_marquardt(model, start, rows) else {
            continue;
        };
        if !(r.theta[1] > 0.0) || r.theta.iter().any(|t| !t.is_finite()) {
            continue;
        }
        if best.as_ref().is_none_or(|b| r.sse < b.sse) {
            best = Some(r);
        }
    }
    best.map(|r| (r.theta, r.sse)).ok_or_else(|| {
        Error::NonConvergence(format!("{model} fit failed from every starting exponent"))
    })
}

fn check_window(model: Model, rows: &[(usize, f64)]) -> Result<f64> {
    if rows.len() < model.min_points() {
        return Err(Error::Precondition(format!(
            "{model} fit needs at least {} points, window has {}",
            model.min_points(),
            rows.len()
        )));
    }
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / rows.len() as f64;
    let sst: f64 = rows.iter().map(|r| (r.1 - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::Precondition("fit window has no variance in ε".into()));
    }
    Ok(sst)
}

fn report(model: Model, theta: &[f64], sse: f64, sst: f64, rows: &[(usize, f64)]) -> FitReport {
    let (c, b) = match model {
        Model::ThreeParam => (None, theta[2]),
        Model::FourParam => (Some(theta[2]), theta[3]),
    };
    FitReport {
        model,
        m: theta[0],
        eta: theta[1],
        b,
        c,
        ci: None,
        r2_complement: sse / sst,
        sse,
        n_points: rows.len(),
        p_min: rows.first().map_or(0, |r| r.0),
        p_max: rows.last().map_or(0, |r| r.0),
        resamples: None,
        failed_resamples: None,
    }
}

/// Fits `(p, ε)` rows directly.
pub fn fit_eps(rows: &[(usize, f64)], model: Model) -> Result<FitReport> {
    let sst = check_window(model, rows)?;
    let (theta, sse) = fit_rows(model, rows)?;
    Ok(report(model, &theta, sse, sst, rows))
}

/// Fits the deficit of the rows with `p_min ≤ p ≤ p_max`.
pub fn fit(
    series: &EnergySeries,
    model: Model,
    p_min: usize,
    p_max: usize,
    parisi: f64,
) -> Result<FitReport> {
    let rows = eps_series(&series.window(p_min, p_max), parisi)?;
    fit_eps(&rows, model)
}

/// Linear-interpolated (type 7) quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Bootstrap intervals over `(p, ε)` rows.
pub fn bootstrap_eps(
    rows: &[(usize, f64)],
    model: Model,
    resamples: usize,
    seed: u64,
) -> Result<FitReport> {
    if resamples < 200 {
        return Err(Error::Precondition(format!(
            "bootstrap needs at least 200 resamples, got {resamples}"
        )));
    }
    let mut base = fit_eps(rows, model)?;
    let k = model.n_params();
    let n = rows.len();

    let fits: Vec<Option<Vec<f64>>> = (0..resamples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut sample: Vec<(usize, f64)> = (0..n).map(|_| rows[rng.random_range(0..n)]).collect();
            sample.sort_by_key(|r| r.0);
            let mut distinct = sample.iter().map(|r| r.0).collect::<Vec<_>>();
            distinct.dedup();
            if distinct.len() < k + 1 {
                return None;
            }
            fit_rows(model, &sample).ok().map(|(t, _)| t)
        })
        .collect();

    let good: Vec<&Vec<f64>> = fits.iter().flatten().collect();
    let failed = resamples - good.len();
    if failed * 10 > resamples {
        return Err(Error::NonConvergence(format!(
            "{failed} of {resamples} bootstrap fits failed"
        )));
    }
    let tail = (1.0 - CI_LEVEL) / 2.0;
    let ci = model
        .names()
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let mut col: Vec<f64> = good.iter().map(|t| t[j]).collect();
            col.sort_by(f64::total_cmp);
            let iv = Interval {
                lo: quantile(&col, tail),
                hi: quantile(&col, 1.0 - tail),
            };
            (name.to_string(), iv)
        })
        .collect();
    base.ci = Some(ci);
    base.resamples = Some(resamples);
    base.failed_resamples = Some(failed);
    Ok(base)
}

/// Point fit plus bootstrap intervals on the rows in the window.
pub fn bootstrap_ci(
    series: &EnergySeries,
    model: Model,
    p_min: usize,
    p_max: usize,
    parisi: f64,
    resamples: usize,
    seed: u64,
) -> Result<FitReport> {
    let rows = eps_series(&series.window(p_min, p_max), parisi)?;
    bootstrap_eps(&rows, model, resamples, seed)
}

/// `(p^{-η}, ε)` pairs for plotting on the rescaled axis.
pub fn rescaled_rows(report: &FitReport, rows: &[(usize, f64)]) -> Vec<(usize, f64, f64)> {
    rows.iter()
        .map(|&(p, e)| (p, (p as f64).powf(-report.eta), e))
        .collect()
}
