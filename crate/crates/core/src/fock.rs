//! Truncated single-mode Fock space: displacement operators and the
//! truncation-error budget.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{cabs, cplx, czero, lit, Cplx, Real};

/// Per-mode Fock dimension; basis index equals boson number.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(d: usize) -> Result<Self> {
        if d < 2 {
            return Err(Error::Precondition(format!(
                "Fock dimension must be at least 2, got {d}"
            )));
        }
        Ok(FockDim(d))
    }

    pub fn get(self) -> usize {
        self.0
    }
}

/// `exp(α a† − conj(α) a)` restricted to `d` levels.
#[derive(Clone, Debug)]
pub struct DisplacementMatrix<T: Real> {
    pub d: FockDim,
    pub alpha: Cplx<T>,
    pub entries: DMatrix<Cplx<T>>,
}

/// Builds the truncated displacement by exponentiating the truncated
/// generator.
pub fn displacement<T: Real>(d: FockDim, alpha: Cplx<T>) -> DisplacementMatrix<T> {
    let n = d.get();
    if alpha.re == T::zero() && alpha.im == T::zero() {
        return DisplacementMatrix {
            d,
            alpha,
            entries: DMatrix::identity(n, n),
        };
    }
    // a|k⟩ = √k |k-1⟩, so a† has √k at (k, k-1).
    let gen = DMatrix::from_fn(n, n, |r, c| {
        if r == c + 1 {
            alpha * cplx(lit::<T>(r as f64).sqrt(), T::zero())
        } else if c == r + 1 {
            -alpha.conj() * cplx(lit::<T>(c as f64).sqrt(), T::zero())
        } else {
            czero()
        }
    });
    DisplacementMatrix {
        d,
        alpha,
        entries: gen.exp(),
    }
}

/// Coherent-state coefficients `exp(-|α|²/2) αⁿ / √n!` for `n < len`.
pub fn coherent<T: Real>(alpha: Cplx<T>, len: usize) -> Vec<Cplx<T>> {
    let mut out = Vec::with_capacity(len);
    let mut c = cplx((-(alpha.norm_sqr()) * lit(0.5)).exp(), T::zero());
    for k in 0..len {
        if k > 0 {
            c = c * alpha / cplx(lit::<T>(k as f64).sqrt(), T::zero());
        }
        out.push(c);
    }
    out
}

/// Per-mode thresholds `d*_l = (Σ_t |L_{lt}| |γ_t|)²` and the multi-mode bound.
#[derive(Clone, Debug)]
pub struct TruncationBudget<T: Real> {
    pub p: usize,
    pub p_prime: usize,
    pub gamma_max: T,
    pub d_star: Vec<T>,
}

impl<T: Real> TruncationBudget<T> {
    pub fn max_d_star(&self) -> T {
        self.d_star.iter().copied().fold(T::zero(), |a, b| a.max(b))
    }

    /// `2√p' exp(-(d − e·max d*))`, or `None` where the bound does not apply.
    pub fn bound(&self, d: usize) -> Option<T> {
        let slack = lit::<T>(d as f64) - T::e() * self.max_d_star();
        if slack < T::zero() {
            return None;
        }
        Some(lit::<T>(2.0) * lit::<T>(self.p_prime as f64).sqrt() * (-slack).exp())
    }
}

/// Budget for modes described by the rows of `l` (`p' × p`).
pub fn truncation_budget<T: Real>(l: &DMatrix<Cplx<T>>, gamma: &[T]) -> Result<TruncationBudget<T>> {
    if l.ncols() != gamma.len() {
        return Err(Error::LengthMismatch {
            expected: l.ncols(),
            found: gamma.len(),
        });
    }
    let d_star = (0..l.nrows())
        .map(|r| {
            let s = (0..l.ncols()).fold(T::zero(), |acc, t| acc + cabs(l[(r, t)]) * gamma[t].abs());
            s * s
        })
        .collect();
    Ok(TruncationBudget {
        p: gamma.len(),
        p_prime: l.nrows(),
        gamma_max: gamma.iter().fold(T::zero(), |a, g| a.max(g.abs())),
        d_star,
    })
}

/// Smallest `d` with `bound(d) ≤ target`.
pub fn required_dim<T: Real>(budget: &TruncationBudget<T>, target: T) -> Result<usize> {
    if !(target > T::zero() && target < T::one()) {
        return Err(Error::Precondition("target error must lie in (0, 1)".into()));
    }
    let two_root = lit::<T>(2.0) * lit::<T>(budget.p_prime as f64).sqrt();
    let x = T::e() * budget.max_d_star() + (two_root / target).ln();
    let guess = x - lit(1e-9);
    let mut d = guess.ceil().to_usize().unwrap_or(0);
    let accepts = |d: usize| budget.bound(d).is_some_and(|b| b <= target * lit(1.0 + 1e-12));
    while d > 0 && accepts(d - 1) {
        d -= 1;
    }
    while !accepts(d) {
        d += 1;
    }
    Ok(d)
}

/// Checks `xⁿ/n! ≤ e^{-y}` under `n ≥ e·x + y`.
pub fn exp_taylor_bound(x: f64, n: u32, y: f64) -> Result<bool> {
    if x < 0.0 || y < 0.0 || (n as f64) < std::f64::consts::E * x + y {
        return Err(Error::Precondition(format!(
            "exp-Taylor bound needs x ≥ 0, y ≥ 0 and n ≥ e·x + y (x={x}, n={n}, y={y})"
        )));
    }
    if x == 0.0 {
        return Ok(n > 0 || y <= 0.0);
    }
    let ln_fact: f64 = (1..=n).map(|k| (k as f64).ln()).sum();
    Ok(n as f64 * x.ln() - ln_fact <= -y)
}
