//! Brute-force G-matrix iteration over all `2^{2p+1}` bitstrings.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::gmatrix::{f_two_sided_bits, Angles, GMatrix, SignedIndex};
use crate::scalar::{cexp, cplx, czero, is_finite_c, lit, to_f64, Cplx, Real};

/// Default ceiling on the depth accepted by the exact route.
pub const DEFAULT_P_CAP: usize = 12;

/// The bitstring sum is split into this many fixed blocks (fewer for tiny
/// `p`), so the reduction tree does not depend on the thread count.
const BLOCKS: u64 = 256;

#[derive(Clone, Copy, Debug)]
pub struct ExactConfig {
    pub p_cap: usize,
    /// Worker threads; `0` uses the ambient rayon pool.
    pub workers: usize,
}

impl Default for ExactConfig {
    fn default() -> Self {
        Self {
            p_cap: DEFAULT_P_CAP,
            workers: 0,
        }
    }
}

/// All iterates `G^(0) .. G^(p)` and the resulting energy.
#[derive(Clone, Debug)]
pub struct IterationTrace<T: Real> {
    pub iterates: Vec<GMatrix<T>>,
    pub nu: T,
    /// Real part of `Σ Γ_j G_{0j}²`, which should vanish.
    pub imag_residue: T,
}

fn check_cap(p: usize, cfg: &ExactConfig) -> Result<()> {
    if p > cfg.p_cap {
        Err(Error::DepthOverCap { p, cap: cfg.p_cap })
    } else {
        Ok(())
    }
}

fn run_in_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(e) => {
            log::warn!("could not build a {workers}-thread pool ({e}); using the global pool");
            f()
        }
    }
}

/// `Σ_a f(a) w(a) a_j a_k` with `w(a) = exp(-½ aᵀ (R + iI) a)`, or `w = 1`
/// when `form` is `None`.
fn weighted_sum<T: Real>(
    angles: &Angles<T>,
    form: Option<(&DMatrix<T>, &DMatrix<T>)>,
    cfg: &ExactConfig,
) -> Result<GMatrix<T>> {
    let p = angles.p();
    let n = 2 * p + 1;
    let total: u64 = 1 << n;
    let blocks = BLOCKS.min(total);
    let per = total / blocks;
    let half = lit::<T>(-0.5);

    let block_sum = |b: u64| -> Vec<Cplx<T>> {
        let mut acc = vec![czero::<T>(); n * n];
        let mut bits = vec![1i8; n];
        for code in b * per..(b + 1) * per {
            for (i, bit) in bits.iter_mut().enumerate() {
                *bit = if code >> i & 1 == 1 { -1 } else { 1 };
            }
            let f = f_two_sided_bits(&bits, angles);
            if f.re == T::zero() && f.im == T::zero() {
                continue;
            }
            let w = match form {
                None => f,
                Some((re, im)) => {
                    let (mut qr, mut qi) = (T::zero(), T::zero());
                    for j in 0..n {
                        let (mut rr, mut ri) = (T::zero(), T::zero());
                        for k in 0..n {
                            if bits[k] > 0 {
                                rr += re[(j, k)];
                                ri += im[(j, k)];
                            } else {
                                rr -= re[(j, k)];
                                ri -= im[(j, k)];
                            }
                        }
                        if bits[j] > 0 {
                            qr += rr;
                            qi += ri;
                        } else {
                            qr -= rr;
                            qi -= ri;
                        }
                    }
                    f * cexp(cplx(half * qr, half * qi))
                }
            };
            for j in 0..n {
                for k in j..n {
                    if bits[j] == bits[k] {
                        acc[j * n + k] += w;
                    } else {
                        acc[j * n + k] -= w;
                    }
                }
            }
        }
        acc
    };

    let partials: Vec<Vec<Cplx<T>>> =
        run_in_pool(cfg.workers, || (0..blocks).into_par_iter().map(block_sum).collect());
    let acc = tree_reduce(partials);

    let entries = DMatrix::from_fn(n, n, |j, k| {
        if j <= k {
            acc[j * n + k]
        } else {
            acc[k * n + j]
        }
    });
    if entries.iter().any(|z| !is_finite_c(*z)) {
        return Err(Error::NonFinite("exact G-matrix sum"));
    }
    GMatrix::from_entries(p, entries)
}

fn tree_reduce<T: Real>(mut parts: Vec<Vec<Cplx<T>>>) -> Vec<Cplx<T>> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}

/// `G^(0)_{jk} = Σ_a f(a) a_j a_k`.
pub fn g0<T: Real>(angles: &Angles<T>, cfg: &ExactConfig) -> Result<GMatrix<T>> {
    check_cap(angles.p(), cfg)?;
    weighted_sum(angles, None, cfg)
}

/// One application of the recursion to `prev`.
pub fn g_step<T: Real>(
    prev: &GMatrix<T>,
    angles: &Angles<T>,
    cfg: &ExactConfig,
) -> Result<GMatrix<T>> {
    let p = angles.p();
    check_cap(p, cfg)?;
    if prev.p() != p {
        return Err(Error::ShapeMismatch(format!(
            "G matrix has p = {} but angles have p = {}",
            prev.p(),
            p
        )));
    }
    let gs = angles.gamma_signed_vec();
    let n = 2 * p + 1;
    let re = DMatrix::from_fn(n, n, |j, k| prev.entries()[(j, k)].re * gs[j] * gs[k]);
    let im = DMatrix::from_fn(n, n, |j, k| prev.entries()[(j, k)].im * gs[j] * gs[k]);
    weighted_sum(angles, Some((&re, &im)), cfg)
}

/// `Σ_a f(a) exp(-½ Σ G_{jk} Γ_j Γ_k a_j a_k)`, which should equal one.
pub fn partition_sum<T: Real>(
    g: &GMatrix<T>,
    angles: &Angles<T>,
    cfg: &ExactConfig,
) -> Result<Cplx<T>> {
    check_cap(angles.p(), cfg)?;
    let p = angles.p();
    let n = 2 * p + 1;
    let gs = angles.gamma_signed_vec();
    let half = lit::<T>(-0.5);
    let mut total = czero::<T>();
    let mut bits = vec![1i8; n];
    for code in 0u64..1 << n {
        for (i, bit) in bits.iter_mut().enumerate() {
            *bit = if code >> i & 1 == 1 { -1 } else { 1 };
        }
        let mut q = czero::<T>();
        for j in 0..n {
            for k in 0..n {
                let s = lit::<T>((bits[j] * bits[k]) as f64) * gs[j] * gs[k];
                q += g.entries()[(j, k)] * cplx(s, T::zero());
            }
        }
        total += f_two_sided_bits(&bits, angles) * cexp(q * cplx(half, T::zero()));
    }
    Ok(total)
}

/// `ν = (i/2) Σ_j Γ_j (G_{0,j})²` read from `g`. Returns `(ν, residue)`.
pub fn nu_from_g<T: Real>(g: &GMatrix<T>, angles: &Angles<T>) -> (T, T) {
    let p = g.p();
    let gs = angles.gamma_signed_vec();
    let row = p;
    let mut z = czero::<T>();
    for (k, &gk) in gs.iter().enumerate() {
        let v = g.entries()[(row, k)];
        z += v * v * cplx(gk, T::zero());
    }
    let half = lit::<T>(0.5);
    // (i/2) z = (-Im z + i Re z) / 2
    (-z.im * half, z.re * half)
}

/// `g0` followed by `p` applications of [`g_step`], then the energy.
pub fn nu_exact<T: Real>(angles: &Angles<T>, cfg: &ExactConfig) -> Result<IterationTrace<T>> {
    let p = angles.p();
    check_cap(p, cfg)?;
    let mut iterates = Vec::with_capacity(p + 1);
    iterates.push(g0(angles, cfg)?);
    for _ in 0..p {
        let next = g_step(iterates.last().expect("non-empty"), angles, cfg)?;
        iterates.push(next);
    }
    let (nu, imag_residue) = nu_from_g(iterates.last().expect("non-empty"), angles);
    if !nu.is_finite() {
        return Err(Error::NonFinite("exact energy"));
    }
    if imag_residue.abs() > lit(1e-10) {
        log::warn!(
            "imaginary residue {:.3e} in the exact energy exceeds 1e-10",
            to_f64(imag_residue)
        );
    }
    Ok(IterationTrace {
        iterates,
        nu,
        imag_residue,
    })
}

/// Writes every iterate as rows `m,j,k,re,im`.
pub fn write_iterates_csv<T: Real>(trace: &IterationTrace<T>, mut out: impl Write) -> Result<()> {
    writeln!(out, "m,j,k,re,im")?;
    for (m, g) in trace.iterates.iter().enumerate() {
        let p = g.p();
        for j in SignedIndex::all(p) {
            for k in SignedIndex::all(p) {
                let v = g.get(j.value(), k.value())?;
                writeln!(out, "{m},{j},{k},{:e},{:e}", to_f64(v.re), to_f64(v.im))?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gmatrix::{check_symmetries, f_two_sided, Bitstring};
    use std::f64::consts::PI;

    fn cfg() -> ExactConfig {
        ExactConfig::default()
    }

    #[test]
    fn g0_zero_beta_is_all_ones() {
        let a = Angles::new(vec![0.4, -0.2], vec![0.0, 0.0]).unwrap();
        let g = g0(&a, &cfg()).unwrap();
        for z in g.entries().iter() {
            assert!((z - Cplx::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn g0_p1_matches_hand_enumeration() {
        let a = Angles::new(vec![0.7], vec![PI / 4.0]).unwrap();
        let g = g0(&a, &cfg()).unwrap();
        let mut want = DMatrix::from_element(3, 3, Cplx::new(0.0, 0.0));
        for code in 0..8u64 {
            let b = Bitstring::from_code(code, 1);
            let f = f_two_sided(&b, &a).unwrap();
            for j in 0..3 {
                for k in 0..3 {
                    want[(j, k)] += f * (b.bits()[j] * b.bits()[k]) as f64;
                }
            }
        }
        assert!((g.entries() - want).norm() < 1e-15);
    }

    #[test]
    fn gamma_zero_step_is_g0() {
        let a = Angles::new(vec![0.0, 0.0], vec![0.3, -0.8]).unwrap();
        let g = g0(&a, &cfg()).unwrap();
        let mut other = GMatrix::ones(2);
        other.set(1, 2, Cplx::new(0.3, 0.2)).unwrap();
        let s = g_step(&other, &a, &cfg()).unwrap();
        assert!((s.entries() - g.entries()).norm() < 1e-14);
    }

    #[test]
    fn p1_reference_energy() {
        let a = Angles::new(vec![0.5], vec![PI / 8.0]).unwrap();
        let t = nu_exact(&a, &cfg()).unwrap();
        assert!((t.nu - 0.3032653298563167).abs() < 1e-7, "{}", t.nu);
        assert!(t.imag_residue.abs() < 1e-12);
        for g in &t.iterates {
            assert!(check_symmetries(g, 1e-10).is_empty());
        }
    }

    #[test]
    fn cap_is_enforced() {
        let a = Angles::<f64>::zeros(3).unwrap();
        let c = ExactConfig {
            p_cap: 2,
            workers: 0,
        };
        assert!(matches!(nu_exact(&a, &c), Err(Error::DepthOverCap { .. })));
    }

    #[test]
    fn worker_count_does_not_change_bits() {
        let a = Angles::<f64>::new(vec![0.3, 0.6, 0.1], vec![0.5, 0.3, -0.2]).unwrap();
        let one = nu_exact(&a, &ExactConfig { p_cap: 12, workers: 1 }).unwrap();
        let two = nu_exact(&a, &ExactConfig { p_cap: 12, workers: 2 }).unwrap();
        assert_eq!(one.nu.to_bits(), two.nu.to_bits());
    }
}
