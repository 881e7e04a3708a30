//! Index conventions, angle containers, the `f` tensor and the G matrix.
//!
//! Signed indices run over `{1, .., p, 0, -p, .., -1}` and that is also the
//! storage order of every `(2p+1)`-sized array in the crate.

use std::fmt;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{cabs, cone, cplx, czero, lit, to_f64, Cplx, Real};

/// QAOA angles `(γ_1..γ_p, β_1..β_p)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Angles<T: Real> {
    gamma: Vec<T>,
    beta: Vec<T>,
}

impl<T: Real> Angles<T> {
    pub fn new(gamma: Vec<T>, beta: Vec<T>) -> Result<Self> {
        if gamma.len() != beta.len() {
            return Err(Error::LengthMismatch {
                expected: gamma.len(),
                found: beta.len(),
            });
        }
        if gamma.is_empty() {
            return Err(Error::InvalidAngles("depth p must be at least 1".into()));
        }
        if gamma.iter().chain(beta.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidAngles("all angles must be finite".into()));
        }
        Ok(Self { gamma, beta })
    }

    /// Angles with `γ = β = 0` at depth `p`.
    pub fn zeros(p: usize) -> Result<Self> {
        Self::new(vec![T::zero(); p], vec![T::zero(); p])
    }

    /// Reads a slice `[γ_1..γ_p, β_1..β_p]`.
    pub fn from_flat(x: &[T]) -> Result<Self> {
        if !x.len().is_multiple_of(2) {
            return Err(Error::InvalidAngles(format!(
                "flat parameter vector has odd length {}",
                x.len()
            )));
        }
        let p = x.len() / 2;
        Self::new(x[..p].to_vec(), x[p..].to_vec())
    }

    pub fn to_flat(&self) -> Vec<T> {
        self.gamma.iter().chain(self.beta.iter()).copied().collect()
    }

    pub fn p(&self) -> usize {
        self.gamma.len()
    }

    pub fn gamma(&self) -> &[T] {
        &self.gamma
    }

    pub fn beta(&self) -> &[T] {
        &self.beta
    }

    /// `Γ_j`: `γ_j` for `j > 0`, `-γ_{-j}` for `j < 0`, zero at `j = 0`.
    pub fn gamma_signed(&self, j: SignedIndex) -> Result<T> {
        j.check(self.p())?;
        let v = j.value();
        Ok(match v.signum() {
            1 => self.gamma[v as usize - 1],
            -1 => -self.gamma[(-v) as usize - 1],
            _ => T::zero(),
        })
    }

    /// `Γ` in storage order.
    pub fn gamma_signed_vec(&self) -> Vec<T> {
        let p = self.p();
        (0..2 * p + 1)
            .map(|o| {
                self.gamma_signed(SignedIndex::from_offset(o, p))
                    .expect("offset in range")
            })
            .collect()
    }

    /// Uniform draws from `[-half_width, half_width]^{2p}`, γ first.
    pub fn random(p: usize, half_width: f64, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = || lit(rng.random_range(-half_width..=half_width));
        let gamma = (0..p).map(|_| draw()).collect();
        let beta = (0..p).map(|_| draw()).collect();
        Self::new(gamma, beta)
    }

    pub fn to_f64(&self) -> Angles<f64> {
        Angles {
            gamma: self.gamma.iter().map(|&x| to_f64(x)).collect(),
            beta: self.beta.iter().map(|&x| to_f64(x)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Angles<U> {
        Angles {
            gamma: self.gamma.iter().map(|&x| lit(to_f64(x))).collect(),
            beta: self.beta.iter().map(|&x| lit(to_f64(x))).collect(),
        }
    }
}

/// On-disk angle document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AngleFile {
    pub p: usize,
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl AngleFile {
    pub fn into_angles<T: Real>(self) -> Result<Angles<T>> {
        for (name, v) in [("gamma", &self.gamma), ("beta", &self.beta)] {
            if v.len() != self.p {
                return Err(Error::Parse(format!(
                    "angle file declares p = {} but {} has {} entries",
                    self.p,
                    name,
                    v.len()
                )));
            }
        }
        Angles::new(
            self.gamma.into_iter().map(lit).collect(),
            self.beta.into_iter().map(lit).collect(),
        )
    }
}

impl<T: Real> From<&Angles<T>> for AngleFile {
    fn from(a: &Angles<T>) -> Self {
        let a = a.to_f64();
        AngleFile {
            p: a.p(),
            gamma: a.gamma,
            beta: a.beta,
        }
    }
}

pub fn parse_angles<T: Real>(text: &str) -> Result<Angles<T>> {
    let file: AngleFile = serde_json::from_str(text)?;
    file.into_angles()
}

pub fn read_angles<T: Real>(path: impl AsRef<Path>) -> Result<Angles<T>> {
    parse_angles(&std::fs::read_to_string(path)?)
}

pub fn write_angles<T: Real>(path: impl AsRef<Path>, angles: &Angles<T>) -> Result<()> {
    let text = serde_json::to_string_pretty(&AngleFile::from(angles))?;
    std::fs::write(path, text + "\n")?;
    Ok(())
}

/// A time index in `{-p, .., p}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct SignedIndex(i32);

impl SignedIndex {
    pub fn new(value: i32, p: usize) -> Result<Self> {
        let s = SignedIndex(value);
        s.check(p)?;
        Ok(s)
    }

    /// Index without a range check; validated when used against a depth.
    pub const fn raw(value: i32) -> Self {
        SignedIndex(value)
    }

    pub fn value(self) -> i32 {
        self.0
    }

    fn check(self, p: usize) -> Result<()> {
        if self.0.unsigned_abs() as usize > p {
            Err(Error::IndexOutOfRange {
                index: self.0 as i64,
                p,
            })
        } else {
            Ok(())
        }
    }

    /// Storage offset in `{1..p, 0, -p..-1}` order.
    pub fn offset(self, p: usize) -> Result<usize> {
        self.check(p)?;
        let v = self.0 as i64;
        let p = p as i64;
        Ok(match v.signum() {
            1 => v - 1,
            0 => p,
            _ => 2 * p + 1 + v,
        } as usize)
    }

    pub fn from_offset(offset: usize, p: usize) -> Self {
        assert!(offset <= 2 * p, "offset {offset} out of range for p = {p}");
        let (o, p) = (offset as i32, p as i32);
        SignedIndex(if o < p {
            o + 1
        } else if o == p {
            0
        } else {
            o - 2 * p - 1
        })
    }

    /// All indices in storage order.
    pub fn all(p: usize) -> impl Iterator<Item = SignedIndex> {
        (0..2 * p + 1).map(move |o| SignedIndex::from_offset(o, p))
    }
}

impl fmt::Display for SignedIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A `±1` assignment to the `2p+1` signed indices, in storage order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bitstring {
    p: usize,
    bits: Vec<i8>,
}

impl Bitstring {
    pub fn new(bits: Vec<i8>) -> Result<Self> {
        if bits.len().is_multiple_of(2) {
            return Err(Error::LengthMismatch {
                expected: bits.len() + 1,
                found: bits.len(),
            });
        }
        if bits.iter().any(|&b| b != 1 && b != -1) {
            return Err(Error::InvalidAngles("bits must be +1 or -1".into()));
        }
        Ok(Self {
            p: bits.len() / 2,
            bits,
        })
    }

    /// Bit `i` of `code` set means `-1` at storage offset `i`.
    pub fn from_code(code: u64, p: usize) -> Self {
        let bits = (0..2 * p + 1)
            .map(|i| if code >> i & 1 == 1 { -1 } else { 1 })
            .collect();
        Self { p, bits }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn bits(&self) -> &[i8] {
        &self.bits
    }

    pub fn get(&self, j: SignedIndex) -> Result<i8> {
        Ok(self.bits[j.offset(self.p)?])
    }
}

/// `⟨a|exp(i·sign·β·X)|b⟩`.
pub fn x_rotation_element<T: Real>(a: i8, b: i8, beta: T, sign: i8) -> Cplx<T> {
    if a == b {
        cplx(beta.cos(), T::zero())
    } else {
        let s = beta.sin();
        cplx(T::zero(), if sign < 0 { -s } else { s })
    }
}

/// Two-sided `f(a)`; `bits` is in storage order and has length `2p+1`.
pub(crate) fn f_two_sided_bits<T: Real>(bits: &[i8], angles: &Angles<T>) -> Cplx<T> {
    let p = angles.p();
    let beta = angles.beta();
    let plus = |j: usize| bits[j - 1];
    let zero = bits[p];
    let minus = |j: usize| bits[2 * p + 1 - j];

    let mut acc = cplx(lit::<T>(0.5), T::zero());
    for l in 1..p {
        acc *= x_rotation_element(plus(l), plus(l + 1), beta[l - 1], 1);
        acc *= x_rotation_element(minus(l + 1), minus(l), beta[l - 1], -1);
    }
    acc *= x_rotation_element(plus(p), zero, beta[p - 1], 1);
    acc *= x_rotation_element(zero, minus(p), beta[p - 1], -1);
    acc
}

/// The two-sided weight `f(a)` over a full bitstring.
pub fn f_two_sided<T: Real>(a: &Bitstring, angles: &Angles<T>) -> Result<Cplx<T>> {
    if a.p() != angles.p() {
        return Err(Error::LengthMismatch {
            expected: 2 * angles.p() + 1,
            found: a.bits().len(),
        });
    }
    Ok(f_two_sided_bits(a.bits(), angles))
}

/// One-sided tensor `f_{1:p+1}(b) = 2^{-1/2} ∏_t ⟨b_{t+1}|e^{-iβ_t X}|b_t⟩`.
pub fn f_one_sided<T: Real>(b: &[i8], angles: &Angles<T>) -> Result<Cplx<T>> {
    let p = angles.p();
    if b.len() != p + 1 {
        return Err(Error::LengthMismatch {
            expected: p + 1,
            found: b.len(),
        });
    }
    let mut acc = cplx(lit::<T>(0.5).sqrt(), T::zero());
    for t in 0..p {
        acc *= x_rotation_element(b[t + 1], b[t], angles.beta()[t], -1);
    }
    Ok(acc)
}

/// Complex `(2p+1) × (2p+1)` matrix indexed by signed index pairs.
#[derive(Clone, Debug, PartialEq)]
pub struct GMatrix<T: Real> {
    p: usize,
    entries: DMatrix<Cplx<T>>,
}

impl<T: Real> GMatrix<T> {
    pub fn zeros(p: usize) -> Self {
        let n = 2 * p + 1;
        Self {
            p,
            entries: DMatrix::from_element(n, n, czero()),
        }
    }

    pub fn ones(p: usize) -> Self {
        let n = 2 * p + 1;
        Self {
            p,
            entries: DMatrix::from_element(n, n, cone()),
        }
    }

    pub fn from_entries(p: usize, entries: DMatrix<Cplx<T>>) -> Result<Self> {
        let n = 2 * p + 1;
        if entries.nrows() != n || entries.ncols() != n {
            return Err(Error::ShapeMismatch(format!(
                "expected {n}x{n}, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        Ok(Self { p, entries })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Entries in storage order.
    pub fn entries(&self) -> &DMatrix<Cplx<T>> {
        &self.entries
    }

    pub fn get(&self, j: i32, k: i32) -> Result<Cplx<T>> {
        let (r, c) = self.offsets(j, k)?;
        Ok(self.entries[(r, c)])
    }

    pub fn set(&mut self, j: i32, k: i32, value: Cplx<T>) -> Result<()> {
        let (r, c) = self.offsets(j, k)?;
        self.entries[(r, c)] = value;
        Ok(())
    }

    fn offsets(&self, j: i32, k: i32) -> Result<(usize, usize)> {
        Ok((
            SignedIndex::raw(j).offset(self.p)?,
            SignedIndex::raw(k).offset(self.p)?,
        ))
    }

    /// The `(p+1) × (p+1)` corner `H[r, s] = G[r, -s]`, rows and columns
    /// ordered `1, .., p, 0`.
    pub fn hermitian_corner(&self) -> DMatrix<Cplx<T>> {
        let p = self.p as i32;
        let idx = |i: usize| if i < self.p { i as i32 + 1 } else { 0 };
        DMatrix::from_fn(self.p + 1, self.p + 1, |r, s| {
            let (j, k) = (idx(r), idx(s));
            debug_assert!(j.abs() <= p && k.abs() <= p);
            self.get(j, -k).expect("corner index in range")
        })
    }

    /// Smallest eigenvalue of the Hermitian part of [`Self::hermitian_corner`].
    pub fn hermitian_corner_min_eigenvalue(&self) -> T {
        let h = self.hermitian_corner();
        let sym = (&h + h.adjoint()).map(|z| z * cplx(lit::<T>(0.5), T::zero()));
        sym.symmetric_eigenvalues().min()
    }
}

/// A single relation that failed in [`check_symmetries`].
#[derive(Clone, Debug, PartialEq)]
pub struct SymmetryViolation {
    pub relation: &'static str,
    pub j: i32,
    pub k: i32,
    pub deviation: f64,
}

impl fmt::Display for SymmetryViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} at ({}, {}): deviation {:.3e}",
            self.relation, self.j, self.k, self.deviation
        )
    }
}

/// Checks symmetry, unit diagonal and the conjugation relations between the
/// four corners.
pub fn check_symmetries<T: Real>(g: &GMatrix<T>, tol: T) -> Vec<SymmetryViolation> {
    let p = g.p() as i32;
    let at = |j: i32, k: i32| g.get(j, k).expect("index in range");
    let mut out = Vec::new();
    let mut test = |relation: &'static str, j: i32, k: i32, a: Cplx<T>, b: Cplx<T>| {
        let dev = cabs(a - b);
        if !(dev <= tol) {
            out.push(SymmetryViolation {
                relation,
                j,
                k,
                deviation: to_f64(dev),
            });
        }
    };

    for j in -p..=p {
        for k in (j + 1)..=p {
            test("G[j,k] = G[k,j]", j, k, at(j, k), at(k, j));
        }
        test("G[j,j] = 1", j, j, at(j, j), cone());
        if j > 0 {
            test("G[j,-j] = 1", j, -j, at(j, -j), cone());
        }
    }
    for r in 1..=p {
        test("G[0,r] = conj G[0,-r]", 0, r, at(0, r), at(0, -r).conj());
        for s in (r + 1)..=p {
            let v = at(r, s);
            test("G[r,s] = G[r,-s]", r, s, v, at(r, -s));
            test("G[r,s] = conj G[-r,-s]", r, s, v, at(-r, -s).conj());
            test("G[r,s] = conj G[-r,s]", r, s, v, at(-r, s).conj());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn gamma_signed_examples() {
        let a = Angles::new(vec![0.3], vec![0.1]).unwrap();
        let at = |j| a.gamma_signed(SignedIndex::raw(j)).unwrap();
        assert_eq!(at(1), 0.3);
        assert_eq!(at(-1), -0.3);
        assert_eq!(at(0), 0.0);
        assert!(a.gamma_signed(SignedIndex::raw(2)).is_err());
    }

    #[test]
    fn offsets_follow_paper_order() {
        let p = 3;
        let order: Vec<i32> = SignedIndex::all(p).map(|s| s.value()).collect();
        assert_eq!(order, vec![1, 2, 3, 0, -3, -2, -1]);
        for (o, s) in SignedIndex::all(p).enumerate() {
            assert_eq!(s.offset(p).unwrap(), o);
        }
    }

    #[test]
    fn rotation_elements() {
        assert_eq!(x_rotation_element(1, 1, 0.5, 1), cplx(0.5f64.cos(), 0.0));
        assert_eq!(x_rotation_element(1, -1, 0.0, 1), cplx(0.0, 0.0));
        let z = x_rotation_element(1, -1, PI / 2.0, -1);
        assert_relative_eq!(z.re, 0.0);
        assert_relative_eq!(z.im, -1.0);
    }

    #[test]
    fn f_zero_beta_support() {
        let a = Angles::new(vec![0.2, 0.4], vec![0.0, 0.0]).unwrap();
        for code in 0..32 {
            let b = Bitstring::from_code(code, 2);
            let f = f_two_sided(&b, &a).unwrap();
            let equal = b.bits().iter().all(|&x| x == b.bits()[0]);
            assert_eq!(f, cplx(if equal { 0.5 } else { 0.0 }, 0.0));
        }
    }

    #[test]
    fn f_p1_all_plus() {
        let a = Angles::new(vec![0.1], vec![PI / 4.0]).unwrap();
        let f = f_two_sided(&Bitstring::new(vec![1, 1, 1]).unwrap(), &a).unwrap();
        assert_relative_eq!(f.re, 0.25, epsilon = 1e-15);
        assert_relative_eq!(f.im, 0.0);
    }

    #[test]
    fn f_one_sided_examples() {
        let a = Angles::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        let v = f_one_sided(&[-1, -1, -1], &a).unwrap();
        assert_relative_eq!(v.re, 0.5f64.sqrt());
        assert_eq!(f_one_sided(&[1, -1, -1], &a).unwrap(), cplx(0.0, 0.0));
        assert!(f_one_sided(&[1, 1], &a).is_err());
    }

    #[test]
    fn symmetry_checks() {
        let ones = GMatrix::<f64>::ones(2);
        assert!(check_symmetries(&ones, 1e-10).is_empty());
        let mut g = ones.clone();
        g.set(1, 2, cplx(0.0, 1.0)).unwrap();
        g.set(2, 1, cplx(0.0, 1.0)).unwrap();
        g.set(-1, -2, cplx(0.0, 1.0)).unwrap();
        g.set(-2, -1, cplx(0.0, 1.0)).unwrap();
        let v = check_symmetries(&g, 1e-10);
        assert!(v.iter().any(|v| v.relation == "G[r,s] = conj G[-r,-s]"));
    }

    #[test]
    fn angle_file_rejects_mismatch() {
        let bad = r#"{"p": 2, "gamma": [0.1, 0.2], "beta": [0.3]}"#;
        assert!(parse_angles::<f64>(bad).is_err());
        let good = r#"{"p": 1, "gamma": [0.1], "beta": [0.3]}"#;
        assert_eq!(parse_angles::<f64>(good).unwrap().p(), 1);
    }
}
