#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use skqaoa::mps::Site;
use skqaoa::fock::displacement;
use skqaoa::{Complex64, FockDim, TensorTrain};

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_c(rng: &mut ChaCha8Rng) -> Complex64 {
    c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

/// Random train with the given inner bonds, scaled to unit norm.
pub fn random_train(d: usize, bonds: &[usize], seed: u64) -> TensorTrain {
    let mut r = rng(seed);
    let n = bonds.len() + 1;
    let sites = (0..n)
        .map(|k| {
            let l = if k == 0 { 1 } else { bonds[k - 1] };
            let rr = if k == n - 1 { 1 } else { bonds[k] };
            let data = (0..l * d * rr).map(|_| random_c(&mut r)).collect();
            Site::new(l, d, rr, data).unwrap()
        })
        .collect();
    let t = TensorTrain::from_sites(sites).unwrap();
    let s = 1.0 / t.norm();
    t.scale(c(s, 0.0))
}

/// Amplitudes by multiplying the site matrices for every configuration,
/// site 0 being the fastest digit.
pub fn dense(t: &TensorTrain) -> Vec<Complex64> {
    let d = t.phys_dim();
    let n = t.len();
    let total = d.pow(n as u32);
    (0..total)
        .map(|mut code| {
            let mut row = vec![c(1.0, 0.0)];
            for site in t.sites() {
                let s = code % d;
                code /= d;
                let (l, _, r) = site.shape();
                let mut next = vec![c(0.0, 0.0); r];
                for (b, nb) in next.iter_mut().enumerate() {
                    for (a, ra) in row.iter().enumerate().take(l) {
                        *nb += ra * site.get(a, s, b);
                    }
                }
                row = next;
            }
            row[0]
        })
        .collect()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn dist(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt()
}

/// `op` on digit `site` of a dense vector over `n` sites of dimension `d`.
pub fn apply_dense(v: &[Complex64], d: usize, site: usize, op: &DMatrix<Complex64>) -> Vec<Complex64> {
    let stride = d.pow(site as u32);
    let mut out = vec![c(0.0, 0.0); v.len()];
    for (idx, o) in out.iter_mut().enumerate() {
        let t = (idx / stride) % d;
        let base = idx - t * stride;
        for u in 0..d {
            *o += op[(t, u)] * v[base + u * stride];
        }
    }
    out
}

pub fn random_op(d: usize, seed: u64) -> DMatrix<Complex64> {
    let mut r = rng(seed);
    DMatrix::from_fn(d, d, |_, _| random_c(&mut r))
}

pub const BIG: usize = 40;

/// Spin ⊗ `modes` bosons, stored as the two spin sectors over `BIG^modes`
/// amplitudes, mode 0 fastest.
pub struct Dense {
    pub up: Vec<Complex64>,
    pub down: Vec<Complex64>,
}

/// `∏_t e^{-iβ_t X} D(-iγ_t Z L[:,t])` on `|+⟩|0⟩`, with a `Z` before layer
/// `z_at` when given.
pub fn build(l: &DMatrix<Complex64>, gamma: &[f64], beta: &[f64], z_at: Option<usize>) -> Dense {
    let modes = l.nrows();
    let size = BIG.pow(modes as u32);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let mut s = Dense {
        up: vec![c(0.0, 0.0); size],
        down: vec![c(0.0, 0.0); size],
    };
    s.up[0] = c(h, 0.0);
    s.down[0] = c(h, 0.0);
    let d = FockDim::new(BIG).unwrap();
    for t in 0..gamma.len() {
        if z_at == Some(t) {
            for x in s.down.iter_mut() {
                *x = -*x;
            }
        }
        for m in 0..modes {
            let a = c(0.0, -gamma[t]) * l[(m, t)];
            s.up = apply_dense(&s.up, BIG, m, &displacement(d, a).entries);
            s.down = apply_dense(&s.down, BIG, m, &displacement(d, -a).entries);
        }
        let (cb, ms) = (c(beta[t].cos(), 0.0), c(0.0, -beta[t].sin()));
        let up: Vec<_> = s.up.iter().zip(&s.down).map(|(u, w)| cb * u + ms * w).collect();
        let down: Vec<_> = s.up.iter().zip(&s.down).map(|(u, w)| ms * u + cb * w).collect();
        s = Dense { up, down };
    }
    s
}

/// Squared norm outside `n_mode ≤ cut` for the listed modes.
pub fn tail(s: &Dense, which: &[usize], cut: usize) -> f64 {
    let mut out = 0.0;
    for idx in 0..s.up.len() {
        let outside = which.iter().any(|&m| (idx / BIG.pow(m as u32)) % BIG > cut);
        if outside {
            out += s.up[idx].norm_sqr() + s.down[idx].norm_sqr();
        }
    }
    out
}

pub fn unit_column_l(p_prime: usize, p: usize, seed: u64) -> DMatrix<Complex64> {
    let mut r = rng(seed);
    let mut l = DMatrix::from_fn(p_prime, p, |_, _| random_c(&mut r));
    for mut col in l.column_iter_mut() {
        let n = col.norm();
        col /= c(n, 0.0);
    }
    l
}
