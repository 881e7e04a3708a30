//! Statevector QAOA on finite SK instances.
//!
//! The cost is `C(z) = n^{-1/2} Σ_{j<k} J_{jk} s_j s_k` with `s = 1 − 2·bit`,
//! and one layer applies `exp(−iγC)` followed by `exp(−iβ Σ_j X_j)` to the
//! uniform superposition. With positive angles the circuit raises `⟨C⟩`, so
//! the optimum is the maximum of `C` and the approximation ratio is measured
//! from the minimum up.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::gmatrix::Angles;
use crate::scalar::Cplx;

/// Largest supported instance size.
pub const MAX_QUBITS: usize = 24;

/// A Sherrington–Kirkpatrick instance whose couplings are a pure function
/// of `(seed, j, k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SkInstance {
    n: usize,
    seed: u64,
    /// Row-major upper triangle, `j < k`.
    couplings: Vec<f64>,
}

/// Standard normal keyed by `(seed, j, k)` via Box–Muller.
pub fn coupling(seed: u64, j: usize, k: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((j as u64) << 32) | k as u64);
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Seed of instance `index` in a corpus with base seed `base`.
pub fn instance_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl SkInstance {
    pub fn new(n: usize, seed: u64) -> Result<Self> {
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(Error::Precondition(format!(
                "instance size must lie in 2..={MAX_QUBITS}, got {n}"
            )));
        }
        let mut couplings = Vec::with_capacity(n * (n - 1) / 2);
        for j in 0..n {
            for k in j + 1..n {
                couplings.push(coupling(seed, j, k));
            }
        }
        Ok(Self { n, seed, couplings })
    }

    /// An instance with explicit couplings in row-major upper-triangle order.
    pub fn from_couplings(n: usize, couplings: Vec<f64>) -> Result<Self> {
        if !(2..=MAX_QUBITS).contains(&n) {
            return Err(Error::Precondition(format!(
                "instance size must lie in 2..={MAX_QUBITS}, got {n}"
            )));
        }
        if couplings.len() != n * (n - 1) / 2 {
            return Err(Error::LengthMismatch {
                expected: n * (n - 1) / 2,
                found: couplings.len(),
            });
        }
        Ok(Self {
            n,
            seed: 0,
            couplings,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn j(&self, j: usize, k: usize) -> f64 {
        let (a, b) = if j < k { (j, k) } else { (k, j) };
        self.couplings[a * self.n - a * (a + 1) / 2 + (b - a - 1)]
    }

    /// `C(z)` by direct summation.
    pub fn cost(&self, z: u64) -> f64 {
        let s = |j: usize| if z >> j & 1 == 1 { -1.0 } else { 1.0 };
        let mut c = 0.0;
        for j in 0..self.n {
            for k in j + 1..self.n {
                c += self.j(j, k) * s(j) * s(k);
            }
        }
        c / (self.n as f64).sqrt()
    }

    /// `C(z)` for every basis state, built bit by bit.
    pub fn cost_table(&self) -> Vec<f64> {
        let n = self.n;
        let mut table = vec![0.0; 1 << n];
        for top in 1..n {
            let half = 1usize << top;
            for z in 0..half {
                let mut field = 0.0;
                for k in 0..top {
                    field += if z >> k & 1 == 1 { -self.j(k, top) } else { self.j(k, top) };
                }
                table[z | half] = table[z] - field;
                table[z] += field;
            }
        }
        let scale = 1.0 / (n as f64).sqrt();
        for c in &mut table {
            *c *= scale;
        }
        table
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct InstanceResult {
    /// `None` when every string has the same cost.
    pub ar: Option<f64>,
    pub p_success: f64,
    pub energy: f64,
    pub e_min: f64,
    pub e_max: f64,
}

/// Final QAOA amplitudes for `instance` given its cost table.
pub fn evolve(costs: &[f64], n: usize, angles: &Angles<f64>) -> Vec<Cplx<f64>> {
    let dim = costs.len();
    let amp = 1.0 / (dim as f64).sqrt();
    let mut psi = vec![Cplx::new(amp, 0.0); dim];
    for (&g, &b) in angles.gamma().iter().zip(angles.beta()) {
        for (a, &c) in psi.iter_mut().zip(costs) {
            let (s, co) = (g * c).sin_cos();
            *a *= Cplx::new(co, -s);
        }
        let (s, c) = b.sin_cos();
        for q in 0..n {
            let bit = 1usize << q;
            for z in 0..dim {
                if z & bit != 0 {
                    continue;
                }
                let (x, y) = (psi[z], psi[z | bit]);
                psi[z] = Cplx::new(c * x.re + s * y.im, c * x.im - s * y.re);
                psi[z | bit] = Cplx::new(c * y.re + s * x.im, c * y.im - s * x.re);
            }
        }
    }
    psi
}

fn summarize(costs: &[f64], psi: &[Cplx<f64>]) -> InstanceResult {
    let (e_min, e_max) = costs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    let tol = 1e-9 * (1.0 + e_max.abs());
    let mut energy = 0.0;
    let mut p_success = 0.0;
    for (a, &c) in psi.iter().zip(costs) {
        let w = a.norm_sqr();
        energy += w * c;
        if c >= e_max - tol {
            p_success += w;
        }
    }
    let ar = (e_max > e_min).then(|| (energy - e_min) / (e_max - e_min));
    InstanceResult {
        ar,
        p_success,
        energy,
        e_min,
        e_max,
    }
}

pub fn simulate(instance: &SkInstance, angles: &Angles<f64>) -> Result<InstanceResult> {
    let costs = instance.cost_table();
    let psi = evolve(&costs, instance.n, angles);
    Ok(summarize(&costs, &psi))
}

/// Aggregate over the instances of one `(n, p)` cell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellResult {
    pub n: usize,
    pub p: usize,
    pub instances: usize,
    pub mean_ar: f64,
    pub stderr_ar: f64,
    pub mean_p_success: f64,
    pub stderr_p_success: f64,
}

fn mean_stderr(xs: &[f64]) -> (f64, f64) {
    let m = xs.iter().sum::<f64>() / xs.len() as f64;
    if xs.len() < 2 {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
    (m, (var / xs.len() as f64).sqrt())
}

/// Runs `instances` seeded instances of size `n` at each depth.
///
/// Instance `i` uses [`instance_seed`]`(seed, i)` for every depth, so cells at
/// equal `n` share their corpus.
pub fn run_cell(
    n: usize,
    angles: &[Angles<f64>],
    instances: usize,
    seed: u64,
) -> Result<Vec<CellResult>> {
    if instances == 0 {
        return Err(Error::Precondition("need at least one instance".into()));
    }
    let per_instance: Vec<Vec<InstanceResult>> = (0..instances)
        .into_par_iter()
        .map(|i| {
            let inst = SkInstance::new(n, instance_seed(seed, i as u64))?;
            let costs = inst.cost_table();
            Ok(angles
                .iter()
                .map(|a| summarize(&costs, &evolve(&costs, n, a)))
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(angles
        .iter()
        .enumerate()
        .map(|(k, a)| {
            let ar: Vec<f64> = per_instance.iter().filter_map(|r| r[k].ar).collect();
            let ps: Vec<f64> = per_instance.iter().map(|r| r[k].p_success).collect();
            let (mean_ar, stderr_ar) = mean_stderr(&ar);
            let (mean_p_success, stderr_p_success) = mean_stderr(&ps);
            CellResult {
                n,
                p: a.p(),
                instances,
                mean_ar,
                stderr_ar,
                mean_p_success,
                stderr_p_success,
            }
        })
        .collect())
}

/// Fits `P(n) = A · 2^{−κ n}` by least squares on `log2 P`. Returns `(κ, A)`.
pub fn success_decay_fit(rows: &[(usize, f64)]) -> Result<(f64, f64)> {
    let mut ns: Vec<usize> = rows.iter().map(|r| r.0).collect();
    ns.sort_unstable();
    ns.dedup();
    if ns.len() < 4 {
        return Err(Error::Precondition(format!(
            "decay fit needs at least 4 distinct sizes, got {}",
            ns.len()
        )));
    }
    if let Some(&(n, pr)) = rows.iter().find(|r| !(r.1 > 0.0)) {
        return Err(Error::Precondition(format!(
            "mean success probability {pr} at n = {n} is not positive"
        )));
    }
    let m = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0 as f64).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.log2()).collect();
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok((-slope, (my - slope * mx).exp2()))
}
