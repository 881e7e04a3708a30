mod common;

use common::{apply_dense, c, inner, random_c, rng};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use skqaoa::exact::{nu_exact, ExactConfig};
use skqaoa::fock::displacement;
use skqaoa::spinboson::{
    apply_z, nu_mps, run_spin_boson, spin_boson_overlap, LFactor, SpinBosonConfig, StateRegistry,
};
use skqaoa::{Angles, Complex64, FockDim, TruncationPolicy};

type DenseState = (Vec<Complex64>, Vec<Complex64>);

fn dense_state(s: &skqaoa::SpinBosonState) -> DenseState {
    (s.psi0.to_dense(), s.psi1.to_dense())
}

fn dense_overlap(a: &DenseState, b: &DenseState) -> Complex64 {
    inner(&a.0, &b.0) + inner(&a.1, &b.1)
}

/// Registry semantics replayed on full vectors.
struct DenseRegistry {
    d: usize,
    p: usize,
    states: Vec<DenseState>,
}

impl DenseRegistry {
    fn new(p: usize, d: usize) -> Self {
        Self { d, p, states: Vec::new() }
    }

    fn layer(&mut self, alpha: &[Complex64], beta: f64) -> Vec<Complex64> {
        let size = self.d.pow(self.p as u32);
        if self.states.is_empty() {
            let h = std::f64::consts::FRAC_1_SQRT_2;
            let mut vac = vec![c(0.0, 0.0); size];
            vac[0] = c(h, 0.0);
            let neg: Vec<_> = vac.iter().map(|x| -x).collect();
            self.states = vec![(vac.clone(), neg), (vac.clone(), vac)];
        }
        let fd = FockDim::new(self.d).unwrap();
        let (cb, ms) = (c(beta.cos(), 0.0), c(0.0, -beta.sin()));
        for st in self.states.iter_mut() {
            for (k, &a) in alpha.iter().enumerate() {
                st.0 = apply_dense(&st.0, self.d, k, &displacement(fd, a).entries);
                st.1 = apply_dense(&st.1, self.d, k, &displacement(fd, -a).entries);
            }
            let y0 = st.0.iter().zip(&st.1).map(|(x, y)| cb * x + ms * y).collect();
            let y1 = st.0.iter().zip(&st.1).map(|(x, y)| ms * x + cb * y).collect();
            *st = (y0, y1);
        }
        let plain = self.states.pop().unwrap();
        let z = (plain.0.clone(), plain.1.iter().map(|x| -x).collect());
        self.states.push(z);
        self.states.push(plain);
        let newest = self.states.len() - 2;
        (0..newest)
            .map(|i| dense_overlap(&self.states[i], &self.states[newest]))
            .collect()
    }
}

fn random_alpha(p: usize, active: usize, r: &mut rand_chacha::ChaCha8Rng) -> Vec<Complex64> {
    (0..p)
        .map(|k| if k < active { random_c(r) * 0.6 } else { c(0.0, 0.0) })
        .collect()
}

#[test]
fn layer_columns_match_dense_simulation() {
    let (p, d) = (2, 8);
    let mut r = rng(3);
    let policy = TruncationPolicy::exact();
    let cfg = SpinBosonConfig::default();
    let mut reg = StateRegistry::new(p, FockDim::new(d).unwrap());
    let mut oracle = DenseRegistry::new(p, d);
    for layer in 1..=p {
        let alpha = random_alpha(p, layer, &mut r);
        let beta = r.random_range(-1.0..1.0);
        let (g, next, _) = reg.apply_layer(&alpha, beta, &policy, &cfg).unwrap();
        reg = next;
        let want = oracle.layer(&alpha, beta);
        assert_eq!(g.len(), want.len());
        for (x, y) in g.iter().zip(&want) {
            assert!((x - y).norm() < 1e-10, "layer {layer}: {x} vs {y}");
        }
        assert_eq!(reg.states().len(), layer + 2);
        for (s, o) in reg.states().iter().zip(&oracle.states) {
            let ds = dense_state(s);
            assert!(common::dist(&ds.0, &o.0) < 1e-10 && common::dist(&ds.1, &o.1) < 1e-10);
        }
    }
}

#[test]
fn overlap_and_z_match_dense() {
    let (p, d) = (2, 4);
    let mut r = rng(8);
    let mut reg = StateRegistry::new(p, FockDim::new(d).unwrap());
    for layer in 1..=p {
        let alpha = random_alpha(p, layer, &mut r);
        reg = reg
            .apply_layer(&alpha, 0.4, &TruncationPolicy::exact(), &SpinBosonConfig::default())
            .unwrap()
            .1;
    }
    let s = reg.states();
    for a in s {
        for b in s {
            let want = dense_overlap(&dense_state(a), &dense_state(b));
            assert!((spin_boson_overlap(a, b).unwrap() - want).norm() < 1e-12);
        }
        let z = apply_z(a.clone());
        let (d0, d1) = dense_state(&z);
        let (o0, o1) = dense_state(a);
        assert!(common::dist(&d0, &o0) == 0.0);
        assert!(common::dist(&d1, &o1.iter().map(|x| -x).collect::<Vec<_>>()) == 0.0);
        let zz = apply_z(z);
        assert_eq!(zz.psi1.to_dense(), a.psi1.to_dense());
        assert_eq!(a.norm_sq(), apply_z(a.clone()).norm_sq());
    }
}

#[test]
fn identity_layer_repeats_previous_overlaps() {
    let p = 3;
    let mut r = rng(21);
    let policy = TruncationPolicy::exact();
    let cfg = SpinBosonConfig::default();
    let mut reg = StateRegistry::new(p, FockDim::new(5).unwrap());
    let mut last = Vec::new();
    for layer in 1..=2 {
        let (g, next, _) = reg
            .apply_layer(&random_alpha(p, layer, &mut r), 0.7, &policy, &cfg)
            .unwrap();
        reg = next;
        last = g;
    }
    let (g, _, _) = reg.apply_layer(&vec![c(0.0, 0.0); p], 0.0, &policy, &cfg).unwrap();
    assert_eq!(g.len(), last.len() + 1);
    for (x, y) in g.iter().zip(&last) {
        assert!((x - y).norm() < 1e-13);
    }
    assert!((g[last.len()] - c(1.0, 0.0)).norm() < 1e-13);
}

#[test]
fn column_growth_reproduces_a_gram_matrix() {
    let n = 6;
    let mut r = rng(4);
    let mut v = DMatrix::from_fn(n, n, |_, _| random_c(&mut r));
    for mut col in v.column_iter_mut() {
        let s = col.norm();
        col /= c(s, 0.0);
    }
    let g = v.adjoint() * &v;
    let mut lf = LFactor::<f64>::new(n).grow(&[]).unwrap();
    for l in 1..n {
        let col: Vec<_> = (0..l).map(|i| g[(i, l)]).collect();
        lf = lf.grow(&col).unwrap();
    }
    let dev = (lf.gram() - &g).norm();
    assert!(dev < 1e-10, "‖L†L − G‖ = {dev:.3e}");
    for i in 0..n {
        let dd = lf.get(i, i);
        assert!(dd.im == 0.0 && dd.re >= 0.0);
    }
}

fn small_angles(max_p: usize, w: f64) -> impl Strategy<Value = Angles> {
    (1..=max_p).prop_flat_map(move |p| {
        (
            prop::collection::vec(-w..w, p),
            prop::collection::vec(-1.0..1.0f64, p),
        )
            .prop_map(|(g, b)| Angles::new(g, b).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn gram_matches_exact_corner(a in small_angles(4, 0.5)) {
        let run = run_spin_boson(
            &a,
            FockDim::new(16).unwrap(),
            &TruncationPolicy::new(1e-14, None).unwrap(),
            &SpinBosonConfig::default(),
        ).unwrap();
        let trace = nu_exact(&a, &ExactConfig::default()).unwrap();
        let corner = trace.iterates.last().unwrap().hermitian_corner();
        let gram = run.l_factor.gram();
        let dev = (&gram - &corner).iter().map(|z| z.norm()).fold(0.0, f64::max);
        prop_assert!(dev < 1e-8, "max deviation {dev:.3e}\ngram {gram:.5}\ncorner {corner:.5}");
    }

    #[test]
    fn energies_agree_at_moderate_angles(a in small_angles(4, 0.5)) {
        let (nu, _) = nu_mps(
            &a,
            FockDim::new(12).unwrap(),
            &TruncationPolicy::new(1e-12, None).unwrap(),
            &SpinBosonConfig::default(),
        ).unwrap();
        let want = nu_exact(&a, &ExactConfig::default()).unwrap().nu;
        prop_assert!((nu - want).abs() < 1e-8, "{nu} vs {want}");
    }

    #[test]
    fn leak_bounded_by_discarded_weight(a in small_angles(5, 1.0), cut in 1e-6..1e-2f64) {
        let (_, diag) = nu_mps(
            &a,
            FockDim::new(6).unwrap(),
            &TruncationPolicy::new(cut, None).unwrap(),
            &SpinBosonConfig { collapse_floor: 0.0, ..Default::default() },
        ).unwrap();
        prop_assert!(diag.norm_leak <= diag.discarded_weight + 1e-12,
            "leak {:.3e} vs discarded {:.3e}", diag.norm_leak, diag.discarded_weight);
    }
}

#[test]
fn absurd_cutoff_reports_collapse() {
    let a = Angles::new(vec![0.38, 0.67], vec![0.5, 0.27]).unwrap();
    let err = nu_mps(
        &a,
        FockDim::new(8).unwrap(),
        &TruncationPolicy::new(0.9, None).unwrap(),
        &SpinBosonConfig::default(),
    )
    .unwrap_err();
    assert!(err.is_numerical());
    assert!(matches!(err, skqaoa::Error::TruncationCollapse { .. }));
}
