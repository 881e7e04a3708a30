//! Spin-boson evaluation of the energy: Z-inserted states held as pairs of
//! tensor trains, a growing Cholesky-type factor of their Gram matrix, and
//! the final energy from overlaps.

use std::io::Write;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fock::{displacement, FockDim};
use crate::gmatrix::Angles;
use crate::mps::{CompressReport, TensorTrain, TruncationPolicy};
use crate::scalar::{cabs, cplx, czero, lit, times_minus_i, to_f64, Cplx, Real};

/// A spin-½ ⊗ bosons state split by the spin value.
#[derive(Clone, Debug)]
pub struct SpinBosonState<T: Real> {
    pub psi0: TensorTrain<T>,
    pub psi1: TensorTrain<T>,
}

impl<T: Real> SpinBosonState<T> {
    pub fn norm_sq(&self) -> T {
        self.psi0.norm_sq() + self.psi1.norm_sq()
    }

    pub fn max_bond(&self) -> usize {
        self.psi0.max_bond().max(self.psi1.max_bond())
    }

    pub fn num_entries(&self) -> usize {
        self.psi0.num_entries() + self.psi1.num_entries()
    }
}

/// `⟨a|b⟩` summed over both spin components.
pub fn spin_boson_overlap<T: Real>(a: &SpinBosonState<T>, b: &SpinBosonState<T>) -> Result<Cplx<T>> {
    Ok(a.psi0.overlap(&b.psi0)? + a.psi1.overlap(&b.psi1)?)
}

/// Pauli Z on the spin: negates the spin-1 component.
pub fn apply_z<T: Real>(s: SpinBosonState<T>) -> SpinBosonState<T> {
    SpinBosonState {
        psi0: s.psi0,
        psi1: s.psi1.scale(cplx(-T::one(), T::zero())),
    }
}

/// `(|0⟩ + sign·|1⟩)/√2 ⊗ |vacuum⟩`.
fn initial_state<T: Real>(p: usize, d: usize, sign: T) -> SpinBosonState<T> {
    let h = lit::<T>(0.5).sqrt();
    let vac = TensorTrain::vacuum(p, d);
    SpinBosonState {
        psi0: vac.clone().scale(cplx(h, T::zero())),
        psi1: vac.scale(cplx(sign * h, T::zero())),
    }
}

/// Z-inserted states followed by the plain state, in layer order.
#[derive(Clone, Debug)]
pub struct StateRegistry<T: Real> {
    p: usize,
    d: FockDim,
    states: Vec<SpinBosonState<T>>,
    layers: usize,
}

/// Knobs of the layer loop besides the truncation policy.
#[derive(Clone, Copy, Debug)]
pub struct SpinBosonConfig<T: Real> {
    /// Worker threads for the per-state updates; `0` uses the ambient pool.
    pub workers: usize,
    /// Smallest fraction of its squared norm a single compression may keep
    /// before the state counts as destroyed by truncation.
    pub collapse_floor: T,
}

impl<T: Real> Default for SpinBosonConfig<T> {
    fn default() -> Self {
        Self {
            workers: 0,
            collapse_floor: lit(0.99),
        }
    }
}

fn retained_fraction<T: Real>(r: &CompressReport<T>) -> T {
    if r.input_norm_sq > T::zero() {
        T::one() - r.discarded_weight / r.input_norm_sq
    } else {
        T::one()
    }
}

/// Per-layer bookkeeping.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerReport<T: Real> {
    pub layer: usize,
    pub max_bond: usize,
    pub discarded_weight: T,
    pub min_norm_sq: T,
    pub stored_entries: usize,
    pub cap_active: bool,
}

impl<T: Real> StateRegistry<T> {
    /// An empty registry; the first layer seeds it.
    pub fn new(p: usize, d: FockDim) -> Self {
        Self {
            p,
            d,
            states: Vec::new(),
            layers: 0,
        }
    }

    pub fn states(&self) -> &[SpinBosonState<T>] {
        &self.states
    }

    pub fn layers(&self) -> usize {
        self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Applies one layer: mode displacements controlled by the spin, the
    /// `X` mixer with angle `beta`, compression, then Z on a copy of the
    /// newest state. Returns the overlaps of every earlier state with the
    /// new Z-inserted state.
    pub fn apply_layer(
        mut self,
        alpha: &[Cplx<T>],
        beta: T,
        policy: &TruncationPolicy<T>,
        cfg: &SpinBosonConfig<T>,
    ) -> Result<(Vec<Cplx<T>>, Self, LayerReport<T>)> {
        let (p, d) = (self.p, self.d.get());
        if alpha.len() != p {
            return Err(Error::LengthMismatch {
                expected: p,
                found: alpha.len(),
            });
        }
        if self.states.is_empty() {
            self.states = vec![
                initial_state(p, d, -T::one()),
                initial_state(p, d, T::one()),
            ];
        }
        let plus: Vec<Option<DMatrix<Cplx<T>>>> = alpha
            .iter()
            .map(|&a| (cabs(a) > T::zero()).then(|| displacement(self.d, a).entries))
            .collect();
        let minus: Vec<Option<DMatrix<Cplx<T>>>> = alpha
            .iter()
            .map(|&a| (cabs(a) > T::zero()).then(|| displacement(self.d, -a).entries))
            .collect();
        let (c, s) = (cplx(beta.cos(), T::zero()), cplx(beta.sin(), T::zero()));
        let ms = times_minus_i(s);
        let layer = self.layers + 1;

        let update = |st: SpinBosonState<T>| -> Result<(SpinBosonState<T>, T, bool)> {
            let mut x0 = st.psi0;
            let mut x1 = st.psi1;
            for (k, (dp, dm)) in plus.iter().zip(&minus).enumerate() {
                if let (Some(dp), Some(dm)) = (dp, dm) {
                    x0.apply_local_mut(k, dp)?;
                    x1.apply_local_mut(k, dm)?;
                }
            }
            if s.re == T::zero() {
                return Ok((SpinBosonState { psi0: x0, psi1: x1 }, T::zero(), false));
            }
            let y0 = TensorTrain::add(&x0, c, &x1, ms)?;
            let y1 = TensorTrain::add(&x0, ms, &x1, c)?;
            drop((x0, x1));
            let (y0, r0) = y0.compress(policy)?;
            let (y1, r1) = y1.compress(policy)?;
            for r in [&r0, &r1] {
                let kept = retained_fraction(r);
                if !(kept >= cfg.collapse_floor) {
                    return Err(Error::TruncationCollapse {
                        layer,
                        retained: to_f64(kept),
                    });
                }
            }
            let out = SpinBosonState { psi0: y0, psi1: y1 };
            Ok((
                out,
                r0.discarded_weight + r1.discarded_weight,
                r0.cap_active || r1.cap_active,
            ))
        };

        let states = std::mem::take(&mut self.states);
        let results: Vec<Result<(SpinBosonState<T>, T, bool)>> = run_in_pool(cfg.workers, || {
            states.into_par_iter().map(update).collect()
        });
        let mut new = Vec::with_capacity(results.len() + 1);
        let mut discarded = T::zero();
        let mut cap_active = false;
        for r in results {
            let (st, w, cap) = r?;
            discarded += w;
            cap_active |= cap;
            new.push(st);
        }
        let last = new.last().expect("registry is non-empty").clone();
        let z = apply_z(new.pop().expect("registry is non-empty"));
        new.push(z);
        new.push(last);

        let newest = new.len() - 2;
        let g: Vec<Cplx<T>> = run_in_pool(cfg.workers, || {
            (0..newest)
                .into_par_iter()
                .map(|i| spin_boson_overlap(&new[i], &new[newest]))
                .collect::<Result<Vec<_>>>()
        })?;

        let report = LayerReport {
            layer,
            max_bond: new.iter().map(|s| s.max_bond()).max().unwrap_or(1),
            discarded_weight: discarded,
            min_norm_sq: new
                .iter()
                .map(|s| s.norm_sq())
                .fold(T::one(), |a, b| a.min(b)),
            stored_entries: new.iter().map(|s| s.num_entries()).sum(),
            cap_active,
        };
        self.states = new;
        self.layers = layer;
        Ok((g, self, report))
    }
}

fn run_in_pool<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Upper-triangular `L` with `L†L` equal to the Gram matrix of the
/// Z-inserted states, grown one column per layer.
#[derive(Clone, Debug, PartialEq)]
pub struct LFactor<T: Real> {
    l: DMatrix<Cplx<T>>,
    filled: usize,
}

const PIVOT_TOL: f64 = 1e-12;
const CLAMP_TOL: f64 = 1e-8;

impl<T: Real> LFactor<T> {
    /// Room for `n` columns, none filled.
    pub fn new(n: usize) -> Self {
        Self {
            l: DMatrix::from_element(n, n, czero()),
            filled: 0,
        }
    }

    pub fn filled(&self) -> usize {
        self.filled
    }

    pub fn matrix(&self) -> &DMatrix<Cplx<T>> {
        &self.l
    }

    pub fn get(&self, r: usize, c: usize) -> Cplx<T> {
        self.l[(r, c)]
    }

    /// `L†L` on the filled block.
    pub fn gram(&self) -> DMatrix<Cplx<T>> {
        let b = self.l.view((0, 0), (self.filled, self.filled));
        b.ad_mul(&b)
    }

    /// Appends the column solving `L[..l, ..l]† x = g`, with
    /// `l = g.len() = filled`.
    pub fn grow(mut self, g: &[Cplx<T>]) -> Result<Self> {
        let l = self.filled;
        let layer = l + 1;
        if g.len() != l {
            return Err(Error::LengthMismatch {
                expected: l,
                found: g.len(),
            });
        }
        if l >= self.l.nrows() {
            return Err(Error::ShapeMismatch(format!(
                "factor has room for {} columns",
                self.l.nrows()
            )));
        }
        let mut x = vec![czero::<T>(); l];
        for i in 0..l {
            let mut num = g[i];
            for j in 0..i {
                num -= self.l[(j, i)].conj() * x[j];
            }
            let piv = self.l[(i, i)].re;
            x[i] = if piv.abs() < lit(PIVOT_TOL) {
                if cabs(num) <= lit(CLAMP_TOL) {
                    czero()
                } else {
                    return Err(Error::NearSingular { layer, row: i });
                }
            } else {
                num / cplx(piv, T::zero())
            };
        }
        let nsq = x.iter().fold(T::zero(), |a, z| a + z.norm_sqr());
        let arg = T::one() - nsq;
        let diag = if arg >= T::zero() {
            arg.sqrt()
        } else if arg >= -lit::<T>(CLAMP_TOL) {
            T::zero()
        } else {
            return Err(Error::PsdLoss {
                layer,
                value: to_f64(arg),
            });
        };
        for (i, xi) in x.into_iter().enumerate() {
            self.l[(i, l)] = xi;
        }
        self.l[(l, l)] = cplx(diag, T::zero());
        self.filled += 1;
        Ok(self)
    }
}

/// Summary of a full spin-boson evaluation.
#[derive(Clone, Debug)]
pub struct Diagnostics<T: Real> {
    pub layers: Vec<LayerReport<T>>,
    pub max_bond: usize,
    pub discarded_weight: T,
    /// `1 − min ‖Ψ‖²` over the final registry.
    pub norm_leak: T,
    pub cap_active: bool,
}

impl<T: Real> Diagnostics<T> {
    /// CSV rows of the per-layer reports.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "layer,max_bond,discarded_weight,min_norm_sq,stored_entries,cap_active")?;
        for r in &self.layers {
            writeln!(
                out,
                "{},{},{:e},{:.15},{},{}",
                r.layer,
                r.max_bond,
                to_f64(r.discarded_weight),
                to_f64(r.min_norm_sq),
                r.stored_entries,
                r.cap_active
            )?;
        }
        Ok(())
    }
}

/// Everything produced by the layer loop.
#[derive(Clone, Debug)]
pub struct SpinBosonRun<T: Real> {
    pub nu: T,
    pub l_factor: LFactor<T>,
    /// `⟨Ψ_r|Ψ_0⟩` for `r = 1..p` as returned by the last layer.
    pub final_overlaps: Vec<Cplx<T>>,
    pub diagnostics: Diagnostics<T>,
}

/// Runs all `p` layers and evaluates `ν = Im Σ_r γ_r ⟨Ψ_0|Ψ_r⟩²`.
pub fn run_spin_boson<T: Real>(
    angles: &Angles<T>,
    d: FockDim,
    policy: &TruncationPolicy<T>,
    cfg: &SpinBosonConfig<T>,
) -> Result<SpinBosonRun<T>> {
    let p = angles.p();
    let mut lf = LFactor::new(p + 1).grow(&[])?;
    let mut reg = StateRegistry::new(p, d);
    let mut reports = Vec::with_capacity(p);
    let mut g = Vec::new();
    for layer in 1..=p {
        let gamma = angles.gamma()[layer - 1];
        let mut alpha = vec![czero::<T>(); p];
        for (i, a) in alpha.iter_mut().take(layer).enumerate() {
            *a = times_minus_i(lf.get(i, layer - 1) * cplx(gamma, T::zero()));
        }
        let (col, next, report) = reg.apply_layer(&alpha, angles.beta()[layer - 1], policy, cfg)?;
        log::debug!(
            "layer {layer}: max bond {}, discarded {:.3e}",
            report.max_bond,
            to_f64(report.discarded_weight)
        );
        reg = next;
        lf = lf.grow(&col)?;
        reports.push(report);
        g = col;
    }
    let mut z = czero::<T>();
    for (r, gr) in g.iter().enumerate() {
        let o = gr.conj();
        z += o * o * cplx(angles.gamma()[r], T::zero());
    }
    let nu = z.im;
    if !nu.is_finite() {
        return Err(Error::NonFinite("spin-boson energy"));
    }
    let min_norm = reg
        .states()
        .iter()
        .map(|s| s.norm_sq())
        .fold(T::one(), |a, b| a.min(b));
    let diagnostics = Diagnostics {
        max_bond: reports.iter().map(|r| r.max_bond).max().unwrap_or(1),
        discarded_weight: reports
            .iter()
            .fold(T::zero(), |a, r| a + r.discarded_weight),
        norm_leak: T::one() - min_norm,
        cap_active: reports.iter().any(|r| r.cap_active),
        layers: reports,
    };
    Ok(SpinBosonRun {
        nu,
        l_factor: lf,
        final_overlaps: g,
        diagnostics,
    })
}

/// Energy and diagnostics from [`run_spin_boson`].
pub fn nu_mps<T: Real>(
    angles: &Angles<T>,
    d: FockDim,
    policy: &TruncationPolicy<T>,
    cfg: &SpinBosonConfig<T>,
) -> Result<(T, Diagnostics<T>)> {
    let run = run_spin_boson(angles, d, policy, cfg)?;
    Ok((run.nu, run.diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_grow_sets_unit_corner() {
        let l = LFactor::<f64>::new(3).grow(&[]).unwrap();
        assert_eq!(l.get(0, 0), cplx(1.0, 0.0));
        assert_eq!(l.filled(), 1);
    }

    #[test]
    fn identity_gram_gives_identity_factor() {
        let mut l = LFactor::<f64>::new(4).grow(&[]).unwrap();
        for k in 1..4 {
            l = l.grow(&vec![cplx(0.0, 0.0); k]).unwrap();
        }
        assert_eq!(l.matrix(), &DMatrix::identity(4, 4));
    }

    #[test]
    fn psd_loss_detected() {
        let l = LFactor::<f64>::new(2).grow(&[]).unwrap();
        assert!(matches!(l.grow(&[cplx(1.1, 0.0)]), Err(Error::PsdLoss { .. })));
        let l = LFactor::<f64>::new(2).grow(&[]).unwrap();
        let l = l.grow(&[cplx(1.0 + 1e-10, 0.0)]).unwrap();
        assert_eq!(l.get(1, 1), cplx(0.0, 0.0));
    }

    #[test]
    fn initial_state_normalized() {
        let s = initial_state::<f64>(3, 4, 1.0);
        assert!((spin_boson_overlap(&s, &s).unwrap().re - 1.0).abs() < 1e-15);
        let z = initial_state::<f64>(3, 4, -1.0);
        assert!(spin_boson_overlap(&s, &z).unwrap().norm() < 1e-15);
        let zz = apply_z(apply_z(s.clone()));
        assert!((spin_boson_overlap(&s, &zz).unwrap().re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gamma_zero_gives_zero() {
        let a = Angles::new(vec![0.0; 3], vec![0.3, -0.4, 0.2]).unwrap();
        let (nu, _) = nu_mps(
            &a,
            FockDim::new(4).unwrap(),
            &TruncationPolicy::new(1e-12, None).unwrap(),
            &SpinBosonConfig::default(),
        )
        .unwrap();
        assert_eq!(nu, 0.0);
    }
}
