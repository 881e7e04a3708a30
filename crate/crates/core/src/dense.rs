//! Dense complex kernels on column-major buffers, backed by faer.

use faer::{Mat, MatRef};
use num_complex::Complex;

/// Matrix kernels the tensor-train code needs, per scalar precision.
pub trait DenseKernels: Sized {
    /// `a · b` for `a` (`m × k`) and `b` (`k × n`).
    fn gemm(m: usize, k: usize, n: usize, a: &[Complex<Self>], b: &[Complex<Self>]) -> Vec<Complex<Self>>;

    /// `aᴴ · b` for `a` stored as `k × m` and `b` as `k × n`.
    fn gemm_adj(m: usize, k: usize, n: usize, a: &[Complex<Self>], b: &[Complex<Self>]) -> Vec<Complex<Self>>;

    /// Thin QR of an `m × n` matrix: `Q` is `m × r`, `R` is `r × n`, `r = min(m, n)`.
    fn thin_qr(m: usize, n: usize, a: &[Complex<Self>]) -> (Vec<Complex<Self>>, Vec<Complex<Self>>);

    /// Thin SVD of an `m × n` matrix: `U` (`m × r`), descending singular
    /// values and `Vᴴ` (`r × n`). `None` if the iteration did not converge.
    #[allow(clippy::type_complexity)]
    fn thin_svd(m: usize, n: usize, a: &[Complex<Self>]) -> Option<(Vec<Complex<Self>>, Vec<Self>, Vec<Complex<Self>>)>;
}

fn flatten<T: Copy>(m: &Mat<T>) -> Vec<T> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        out.extend_from_slice(m.col_as_slice(j));
    }
    out
}

macro_rules! impl_kernels {
    ($t:ty) => {
        impl DenseKernels for $t {
            fn gemm(m: usize, k: usize, n: usize, a: &[Complex<$t>], b: &[Complex<$t>]) -> Vec<Complex<$t>> {
                let a = MatRef::from_column_major_slice(a, m, k);
                let b = MatRef::from_column_major_slice(b, k, n);
                flatten(&(a * b))
            }

            fn gemm_adj(m: usize, k: usize, n: usize, a: &[Complex<$t>], b: &[Complex<$t>]) -> Vec<Complex<$t>> {
                let a = MatRef::from_column_major_slice(a, k, m);
                let b = MatRef::from_column_major_slice(b, k, n);
                flatten(&(a.adjoint() * b))
            }

            fn thin_qr(m: usize, n: usize, a: &[Complex<$t>]) -> (Vec<Complex<$t>>, Vec<Complex<$t>>) {
                let qr = MatRef::from_column_major_slice(a, m, n).qr();
                (flatten(&qr.compute_thin_Q()), flatten(&qr.thin_R().to_owned()))
            }

            fn thin_svd(
                m: usize,
                n: usize,
                a: &[Complex<$t>],
            ) -> Option<(Vec<Complex<$t>>, Vec<$t>, Vec<Complex<$t>>)> {
                let svd = MatRef::from_column_major_slice(a, m, n).thin_svd().ok()?;
                let r = m.min(n);
                let s: Vec<$t> = (0..r).map(|i| svd.S().column_vector()[i].re).collect();
                let v = svd.V();
                let mut vt = Vec::with_capacity(r * n);
                for j in 0..n {
                    for i in 0..r {
                        vt.push(v[(j, i)].conj());
                    }
                }
                Some((flatten(&svd.U().to_owned()), s, vt))
            }
        }
    };
}

impl_kernels!(f32);
impl_kernels!(f64);
