//! Open-boundary tensor trains over `p` bosonic sites.
//!
//! A site tensor with shape `(l, d, r)` is stored column-major, entry
//! `(a, s, b)` at `a + l*s + l*d*b`. The same buffer is therefore both the
//! `l × (d·r)` and the `(l·d) × r` matrix.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::scalar::{abs2, cone, cplx, czero, lit, to_f64, Cplx, Real};

#[derive(Clone, Debug, PartialEq)]
pub struct Site<T: Real> {
    l: usize,
    d: usize,
    r: usize,
    data: Vec<Cplx<T>>,
}

impl<T: Real> Site<T> {
    pub fn new(l: usize, d: usize, r: usize, data: Vec<Cplx<T>>) -> Result<Self> {
        if data.len() != l * d * r {
            return Err(Error::ShapeMismatch(format!(
                "site buffer has {} entries, shape ({l}, {d}, {r}) needs {}",
                data.len(),
                l * d * r
            )));
        }
        Ok(Self { l, d, r, data })
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.l, self.d, self.r)
    }

    pub fn get(&self, a: usize, s: usize, b: usize) -> Cplx<T> {
        self.data[a + self.l * (s + self.d * b)]
    }

    /// `A†A = 1` on the right bond, within `tol`.
    pub fn is_left_isometry(&self, tol: T) -> bool {
        let g = T::gemm_adj(self.r, self.l * self.d, self.r, &self.data, &self.data);
        let mut dev = T::zero();
        for i in 0..self.r {
            for j in 0..self.r {
                let want = if i == j { cone() } else { czero() };
                dev += abs2(g[i + self.r * j] - want);
            }
        }
        dev.sqrt() <= tol
    }
}

/// Bond truncation rule applied by [`TensorTrain::compress`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy<T: Real> {
    pub svd_cutoff: T,
    pub max_bond: Option<usize>,
    /// Compare singular values to `svd_cutoff` directly instead of to
    /// `svd_cutoff · s_max`.
    pub absolute: bool,
}

impl<T: Real> TruncationPolicy<T> {
    pub fn new(svd_cutoff: T, max_bond: Option<usize>) -> Result<Self> {
        if !(svd_cutoff >= T::zero() && svd_cutoff < T::one()) {
            return Err(Error::Precondition(format!(
                "SVD cutoff must lie in [0, 1), got {}",
                to_f64(svd_cutoff)
            )));
        }
        if max_bond == Some(0) {
            return Err(Error::Precondition("max bond must be positive".into()));
        }
        Ok(Self {
            svd_cutoff,
            max_bond,
            absolute: false,
        })
    }

    pub fn exact() -> Self {
        Self {
            svd_cutoff: T::zero(),
            max_bond: None,
            absolute: false,
        }
    }

    pub fn with_absolute(mut self, absolute: bool) -> Self {
        self.absolute = absolute;
        self
    }

    /// Number of singular values (sorted descending) to keep, and whether the
    /// bond cap was the binding constraint.
    fn keep(&self, s: &[T]) -> (usize, bool) {
        let smax = s.first().copied().unwrap_or(T::zero());
        let threshold = if self.absolute {
            self.svd_cutoff
        } else {
            self.svd_cutoff * smax
        };
        let mut k = s.iter().take_while(|&&x| x >= threshold).count().max(1);
        let mut capped = false;
        if let Some(cap) = self.max_bond {
            if k > cap {
                k = cap;
                capped = true;
            }
        }
        (k, capped)
    }
}

/// Bookkeeping returned by [`TensorTrain::compress`].
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CompressReport<T: Real> {
    /// `Σ discarded s²` over all bonds.
    pub discarded_weight: T,
    /// Discarded weight per bond, bond `k` sitting between sites `k` and `k+1`.
    pub per_bond: Vec<T>,
    pub max_bond: usize,
    /// True if the bond cap, not the cutoff, limited some bond.
    pub cap_active: bool,
    /// Squared norm of the train before truncation.
    pub input_norm_sq: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TensorTrain<T: Real> {
    d: usize,
    sites: Vec<Site<T>>,
}

impl<T: Real> TensorTrain<T> {
    pub fn from_sites(sites: Vec<Site<T>>) -> Result<Self> {
        let first = sites
            .first()
            .ok_or_else(|| Error::ShapeMismatch("a tensor train needs at least one site".into()))?;
        let d = first.d;
        if first.l != 1 || sites.last().map(|s| s.r) != Some(1) {
            return Err(Error::ShapeMismatch("boundary bonds must be 1".into()));
        }
        for (k, w) in sites.windows(2).enumerate() {
            if w[0].r != w[1].l {
                return Err(Error::ShapeMismatch(format!(
                    "bond {k}: right dimension {} does not match left dimension {}",
                    w[0].r, w[1].l
                )));
            }
        }
        if sites.iter().any(|s| s.d != d) {
            return Err(Error::ShapeMismatch("physical dimensions differ".into()));
        }
        Ok(Self { d, sites })
    }

    /// Product state from one normalized vector per site.
    pub fn product_state(d: usize, vectors: &[Vec<Cplx<T>>]) -> Result<Self> {
        let tol = lit::<T>(1e-12).max(T::default_epsilon() * lit(16.0));
        let mut sites = Vec::with_capacity(vectors.len());
        for (k, v) in vectors.iter().enumerate() {
            if v.len() != d {
                return Err(Error::LengthMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            let n = v.iter().fold(T::zero(), |a, z| a + abs2(*z)).sqrt();
            if (n - T::one()).abs() > tol {
                return Err(Error::Unnormalized {
                    site: k,
                    norm: to_f64(n),
                });
            }
            sites.push(Site::new(1, d, 1, v.clone())?);
        }
        Self::from_sites(sites)
    }

    /// All sites in the vacuum.
    pub fn vacuum(p: usize, d: usize) -> Self {
        let mut v = vec![czero(); d];
        v[0] = cone();
        Self::product_state(d, &vec![v; p]).expect("vacuum is a valid product state")
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    pub fn phys_dim(&self) -> usize {
        self.d
    }

    pub fn sites(&self) -> &[Site<T>] {
        &self.sites
    }

    /// Bond dimensions between consecutive sites.
    pub fn bond_dims(&self) -> Vec<usize> {
        self.sites[..self.sites.len() - 1].iter().map(|s| s.r).collect()
    }

    pub fn max_bond(&self) -> usize {
        self.bond_dims().into_iter().max().unwrap_or(1)
    }

    /// Number of stored complex scalars.
    pub fn num_entries(&self) -> usize {
        self.sites.iter().map(|s| s.data.len()).sum()
    }

    pub fn scale(mut self, c: Cplx<T>) -> Self {
        for z in self.sites[0].data.iter_mut() {
            *z *= c;
        }
        self
    }

    /// Applies `op` (`d × d`) to the physical leg of `site`.
    pub fn apply_local(mut self, site: usize, op: &DMatrix<Cplx<T>>) -> Result<Self> {
        self.apply_local_mut(site, op)?;
        Ok(self)
    }

    pub fn apply_local_mut(&mut self, site: usize, op: &DMatrix<Cplx<T>>) -> Result<()> {
        let d = self.d;
        if site >= self.sites.len() {
            return Err(Error::ShapeMismatch(format!(
                "site {site} out of range for {} sites",
                self.sites.len()
            )));
        }
        if op.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "operator is {}x{}, expected {d}x{d}",
                op.nrows(),
                op.ncols()
            )));
        }
        let s = &mut self.sites[site];
        let l = s.l;
        let mut out = vec![czero::<T>(); s.data.len()];
        for b in 0..s.r {
            let base = b * l * d;
            for t in 0..d {
                let dst = base + t * l;
                for u in 0..d {
                    let w = op[(t, u)];
                    if w.re == T::zero() && w.im == T::zero() {
                        continue;
                    }
                    let src = base + u * l;
                    for a in 0..l {
                        out[dst + a] += w * s.data[src + a];
                    }
                }
            }
        }
        s.data = out;
        Ok(())
    }

    fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() || self.d != other.d {
            return Err(Error::ShapeMismatch(format!(
                "tensor trains differ: {} sites of dim {} vs {} sites of dim {}",
                self.len(),
                self.d,
                other.len(),
                other.d
            )));
        }
        Ok(())
    }

    /// `ca·a + cb·b` by block-diagonal stacking.
    pub fn add(a: &Self, ca: Cplx<T>, b: &Self, cb: Cplx<T>) -> Result<Self> {
        a.check_compatible(b)?;
        let d = a.d;
        let n = a.len();
        if n == 1 {
            let data = a.sites[0]
                .data
                .iter()
                .zip(&b.sites[0].data)
                .map(|(x, y)| *x * ca + *y * cb)
                .collect();
            return Self::from_sites(vec![Site::new(1, d, 1, data)?]);
        }
        let mut sites = Vec::with_capacity(n);
        for k in 0..n {
            let (sa, sb) = (&a.sites[k], &b.sites[k]);
            let (l, r) = match k {
                0 => (1, sa.r + sb.r),
                _ if k == n - 1 => (sa.l + sb.l, 1),
                _ => (sa.l + sb.l, sa.r + sb.r),
            };
            let mut data = vec![czero::<T>(); l * d * r];
            let (ka, kb) = if k == 0 { (ca, cb) } else { (cone(), cone()) };
            let (la_off, ra_off) = (0, 0);
            let lb_off = if k == 0 { 0 } else { sa.l };
            let rb_off = if k == n - 1 { 0 } else { sa.r };
            for bb in 0..sa.r {
                for s in 0..d {
                    for aa in 0..sa.l {
                        data[(aa + la_off) + l * (s + d * (bb + ra_off))] = sa.get(aa, s, bb) * ka;
                    }
                }
            }
            for bb in 0..sb.r {
                for s in 0..d {
                    for aa in 0..sb.l {
                        data[(aa + lb_off) + l * (s + d * (bb + rb_off))] = sb.get(aa, s, bb) * kb;
                    }
                }
            }
            sites.push(Site::new(l, d, r, data)?);
        }
        Self::from_sites(sites)
    }

    /// `⟨self|other⟩`, conjugating `self`.
    pub fn overlap(&self, other: &Self) -> Result<Cplx<T>> {
        self.check_compatible(other)?;
        let d = self.d;
        let mut env = vec![cone::<T>()];
        for (a, b) in self.sites.iter().zip(&other.sites) {
            let t = T::gemm(a.l, b.l, d * b.r, &env, &b.data);
            env = T::gemm_adj(a.r, a.l * d, b.r, &a.data, &t);
        }
        Ok(env[0])
    }

    pub fn norm_sq(&self) -> T {
        self.overlap(self).expect("self-compatible").re.max(T::zero())
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    /// QR sweep leaving every site but the last a left isometry.
    pub fn canonicalize_left(mut self) -> Self {
        self.left_sweep();
        self
    }

    fn left_sweep(&mut self) {
        let d = self.d;
        for k in 0..self.sites.len() - 1 {
            let s = &self.sites[k];
            let (rows, cols) = (s.l * d, s.r);
            let (q, r) = T::thin_qr(rows, cols, &s.data);
            let kk = rows.min(cols);
            let l = s.l;
            self.sites[k] = Site { l, d, r: kk, data: q };
            let next = &self.sites[k + 1];
            let merged = T::gemm(kk, next.l, d * next.r, &r, &next.data);
            let nr = next.r;
            self.sites[k + 1] = Site { l: kk, d, r: nr, data: merged };
        }
    }

    /// Left-canonicalizes, then truncates every bond in a right-to-left SVD
    /// sweep.
    pub fn compress(mut self, policy: &TruncationPolicy<T>) -> Result<(Self, CompressReport<T>)> {
        let d = self.d;
        let n = self.sites.len();
        let mut report = CompressReport {
            discarded_weight: T::zero(),
            per_bond: vec![T::zero(); n.saturating_sub(1)],
            max_bond: 1,
            cap_active: false,
            input_norm_sq: T::zero(),
        };
        if n == 1 {
            report.input_norm_sq = self.norm_sq();
            return Ok((self, report));
        }
        self.left_sweep();
        report.input_norm_sq = self.sites[n - 1]
            .data
            .iter()
            .fold(T::zero(), |acc, z| acc + z.norm_sqr());
        for k in (1..n).rev() {
            let site = &self.sites[k];
            let (rows, cols, sr) = (site.l, d * site.r, site.r);
            let (u, s, vt) = T::thin_svd(rows, cols, &site.data)
                .ok_or_else(|| Error::NonConvergence("bond SVD".into()))?;
            let r0 = rows.min(cols);
            let (keep, capped) = policy.keep(&s);
            let dropped = s[keep..].iter().fold(T::zero(), |acc, &x| acc + x * x);
            report.per_bond[k - 1] = dropped;
            report.discarded_weight += dropped;
            report.max_bond = report.max_bond.max(keep);
            report.cap_active |= capped;

            let mut head = Vec::with_capacity(keep * cols);
            for j in 0..cols {
                head.extend_from_slice(&vt[j * r0..j * r0 + keep]);
            }
            let mut us = u;
            us.truncate(rows * keep);
            for (j, col) in us.chunks_mut(rows).enumerate() {
                let sj = cplx(s[j], T::zero());
                for z in col {
                    *z *= sj;
                }
            }
            self.sites[k] = Site { l: keep, d, r: sr, data: head };
            let prev = &self.sites[k - 1];
            let merged = T::gemm(prev.l * d, prev.r, keep, &prev.data, &us);
            let pl = prev.l;
            self.sites[k - 1] = Site { l: pl, d, r: keep, data: merged };
        }
        Ok((self, report))
    }

    /// Full state vector, site 0 being the fastest-varying digit.
    pub fn to_dense(&self) -> Vec<Cplx<T>> {
        let d = self.d;
        let mut v = vec![cone::<T>()];
        let mut rows = 1;
        for s in &self.sites {
            v = T::gemm(rows, s.l, d * s.r, &v, &s.data);
            rows *= d;
        }
        v
    }

    /// CSV rows `bond,dim` of the bond-dimension profile.
    pub fn write_bond_profile(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "bond,dim")?;
        for (k, b) in self.bond_dims().iter().enumerate() {
            writeln!(out, "{k},{b}")?;
        }
        Ok(())
    }
}
