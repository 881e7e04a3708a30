mod common;

use common::c;
use nalgebra::{DMatrix, Matrix2};
use proptest::prelude::*;
use skqaoa::exact::{g0, g_step, nu_exact, partition_sum, ExactConfig};
use skqaoa::gmatrix::check_symmetries;
use skqaoa::{Angles, Complex64, GMatrix};

fn angles(min_p: usize, max_p: usize) -> impl Strategy<Value = Angles> {
    (min_p..=max_p).prop_flat_map(|p| {
        (
            prop::collection::vec(-1.0..1.0f64, p),
            prop::collection::vec(-1.0..1.0f64, p),
        )
            .prop_map(|(g, b)| Angles::new(g, b).unwrap())
    })
}

/// `exp(i·s·β·X)` as a 2×2 matrix, row/column 0 ↔ +1.
fn rot(beta: f64, s: f64) -> Matrix2<Complex64> {
    let (cb, sb) = (c(beta.cos(), 0.0), c(0.0, s * beta.sin()));
    Matrix2::new(cb, sb, sb, cb)
}

/// Deliberately slow reference: bits indexed by signed time, f built from
/// explicit rotation matrices, the quadratic form as a double loop over
/// signed indices.
fn naive_step(prev: Option<&dyn Fn(i32, i32) -> Complex64>, a: &Angles) -> impl Fn(i32, i32) -> Complex64 {
    let p = a.p() as i32;
    let idx = |v: i8| if v > 0 { 0 } else { 1 };
    let gam = |j: i32| match j.signum() {
        1 => a.gamma()[j as usize - 1],
        -1 => -a.gamma()[(-j) as usize - 1],
        _ => 0.0,
    };
    let mut out = std::collections::HashMap::new();
    let n = 2 * p + 1;
    for code in 0u64..1 << n {
        let bit = |j: i32| -> i8 {
            let pos = (j + p) as u32;
            if code >> pos & 1 == 1 {
                -1
            } else {
                1
            }
        };
        let mut f = c(0.5, 0.0);
        for l in 1..p {
            f *= rot(a.beta()[l as usize - 1], 1.0)[(idx(bit(l + 1)), idx(bit(l)))];
            f *= rot(a.beta()[l as usize - 1], -1.0)[(idx(bit(-l - 1)), idx(bit(-l)))];
        }
        f *= rot(a.beta()[p as usize - 1], 1.0)[(idx(bit(p)), idx(bit(0)))];
        f *= rot(a.beta()[p as usize - 1], -1.0)[(idx(bit(0)), idx(bit(-p)))];
        let mut q = c(0.0, 0.0);
        if let Some(g) = prev {
            for j in -p..=p {
                for k in -p..=p {
                    q += g(j, k) * gam(j) * gam(k) * (bit(j) * bit(k)) as f64;
                }
            }
        }
        let w = f * (q * -0.5).exp();
        for j in -p..=p {
            for k in -p..=p {
                *out.entry((j, k)).or_insert(c(0.0, 0.0)) += w * (bit(j) * bit(k)) as f64;
            }
        }
    }
    move |j, k| out[&(j, k)]
}

fn max_dev(g: &GMatrix, reference: &dyn Fn(i32, i32) -> Complex64) -> f64 {
    let p = g.p() as i32;
    let mut dev: f64 = 0.0;
    for j in -p..=p {
        for k in -p..=p {
            dev = dev.max((g.get(j, k).unwrap() - reference(j, k)).norm());
        }
    }
    dev
}

#[test]
fn two_steps_match_naive_reference() {
    let a = Angles::random(2, 1.0, 5).unwrap();
    let cfg = ExactConfig::default();
    let r0 = naive_step(None, &a);
    let r1 = naive_step(Some(&r0 as &dyn Fn(i32, i32) -> Complex64), &a);
    let r2 = naive_step(Some(&r1 as &dyn Fn(i32, i32) -> Complex64), &a);
    let g = g0(&a, &cfg).unwrap();
    assert!(max_dev(&g, &r0) < 1e-13);
    let g = g_step(&g, &a, &cfg).unwrap();
    assert!(max_dev(&g, &r1) < 1e-12);
    let g = g_step(&g, &a, &cfg).unwrap();
    assert!(max_dev(&g, &r2) < 1e-12);
}

/// Moves every free entry outside `1 ≤ r < s ≤ m−1`, keeping the corner
/// conjugation relations so the result is still a valid iterate shape.
fn perturb_outside(g: &GMatrix, m: usize, seed: u64) -> GMatrix {
    let p = g.p() as i32;
    let mut r = common::rng(seed);
    let mut out = g.clone();
    let mut put = |j: i32, k: i32, v: Complex64| {
        out.set(j, k, v).unwrap();
        out.set(k, j, v).unwrap();
    };
    for s in 1..=p {
        let w = g.get(0, s).unwrap() + common::random_c(&mut r) * 0.3;
        put(0, s, w);
        put(0, -s, w.conj());
        for q in 1..s {
            if s <= m as i32 - 1 {
                continue;
            }
            let v = g.get(q, s).unwrap() + common::random_c(&mut r) * 0.3;
            put(q, s, v);
            put(q, -s, v);
            put(-q, -s, v.conj());
            put(-q, s, v.conj());
        }
    }
    out
}

#[test]
fn new_entries_depend_only_on_the_earlier_light_cone() {
    let a = Angles::random(4, 1.0, 17).unwrap();
    let cfg = ExactConfig::default();
    let trace = nu_exact(&a, &cfg).unwrap();
    for m in 1..=4usize {
        let prev = &trace.iterates[m - 1];
        let base = g_step(prev, &a, &cfg).unwrap();
        let moved = g_step(&perturb_outside(prev, m, m as u64), &a, &cfg).unwrap();
        for r in 1..=m as i32 {
            for s in (r + 1)..=m as i32 {
                let dev = (base.get(r, s).unwrap() - moved.get(r, s).unwrap()).norm();
                assert!(dev < 1e-12, "m={m} ({r},{s}) moved by {dev:.3e}");
            }
        }
    }
}

#[test]
fn zero_gamma_energy_is_zero() {
    let a = Angles::new(vec![0.0; 3], vec![0.2, -0.5, 0.9]).unwrap();
    assert_eq!(nu_exact(&a, &ExactConfig::default()).unwrap().nu, 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn iterates_are_symmetric_and_psd(a in angles(1, 5)) {
        let trace = nu_exact(&a, &ExactConfig::default()).unwrap();
        for (m, g) in trace.iterates.iter().enumerate() {
            let v = check_symmetries(g, 1e-10);
            prop_assert!(v.is_empty(), "iterate {m}: {}", v[0]);
            let ev = g.hermitian_corner_min_eigenvalue();
            prop_assert!(ev >= -1e-9, "iterate {m}: min eigenvalue {ev:.3e}");
        }
    }

    #[test]
    fn partition_identity(a in angles(1, 5)) {
        let cfg = ExactConfig::default();
        let trace = nu_exact(&a, &cfg).unwrap();
        let z = partition_sum(trace.iterates.last().unwrap(), &a, &cfg).unwrap();
        prop_assert!((z - c(1.0, 0.0)).norm() < 1e-12, "Z = {z}");
    }

    #[test]
    fn joint_sign_flip_leaves_energy(a in angles(1, 5)) {
        let cfg = ExactConfig::default();
        let neg = Angles::new(
            a.gamma().iter().map(|x| -x).collect(),
            a.beta().iter().map(|x| -x).collect(),
        ).unwrap();
        let nu = nu_exact(&a, &cfg).unwrap().nu;
        let nu_neg = nu_exact(&neg, &cfg).unwrap().nu;
        prop_assert!((nu - nu_neg).abs() < 1e-12, "{nu} vs {nu_neg}");
    }

    #[test]
    fn gamma_flip_negates_energy(a in angles(1, 4)) {
        let cfg = ExactConfig::default();
        let neg = Angles::new(a.gamma().iter().map(|x| -x).collect(), a.beta().to_vec()).unwrap();
        let nu = nu_exact(&a, &cfg).unwrap().nu;
        prop_assert!((nu + nu_exact(&neg, &cfg).unwrap().nu).abs() < 1e-12);
    }

    #[test]
    fn thread_count_is_invisible(a in angles(1, 4)) {
        let one = nu_exact(&a, &ExactConfig { workers: 1, ..Default::default() }).unwrap();
        let three = nu_exact(&a, &ExactConfig { workers: 3, ..Default::default() }).unwrap();
        prop_assert_eq!(one.nu.to_bits(), three.nu.to_bits());
    }
}

#[test]
fn hermitian_corner_layout() {
    let p = 2;
    let n = 2 * p + 1;
    let g = GMatrix::from_entries(p, DMatrix::from_fn(n, n, |j, k| c(j as f64, k as f64))).unwrap();
    let h = g.hermitian_corner();
    assert_eq!(h[(0, 0)], g.get(1, -1).unwrap());
    assert_eq!(h[(0, 2)], g.get(1, 0).unwrap());
    assert_eq!(h[(2, 1)], g.get(0, -2).unwrap());
}
