use proptest::prelude::*;
use skqaoa::exact::{partition_sum, ExactConfig};
use skqaoa::gmatrix::{f_one_sided, f_two_sided, parse_angles, write_angles, read_angles};
use skqaoa::{Angles, Bitstring, GMatrix, SignedIndex};

fn angles(max_p: usize) -> impl Strategy<Value = Angles> {
    (1..=max_p).prop_flat_map(|p| {
        (
            prop::collection::vec(-1.5..1.5f64, p),
            prop::collection::vec(-1.5..1.5f64, p),
        )
            .prop_map(|(g, b)| Angles::new(g, b).unwrap())
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weights_sum_to_one_without_coupling(a in angles(6)) {
        let z = partition_sum(&GMatrix::zeros(a.p()), &a, &ExactConfig::default()).unwrap();
        prop_assert!((z - skqaoa::Complex64::new(1.0, 0.0)).norm() < 1e-12, "sum {z}");
    }

    #[test]
    fn two_sided_factorizes(a in angles(4)) {
        let p = a.p();
        for code in 0u64..1 << (2 * p + 1) {
            let s = Bitstring::from_code(code, p);
            let at = |j: i32| s.get(SignedIndex::new(j, p).unwrap()).unwrap();
            let plus: Vec<i8> = (1..=p as i32).map(at).chain([at(0)]).collect();
            let minus: Vec<i8> = (1..=p as i32).map(|j| at(-j)).chain([at(0)]).collect();
            let want = f_one_sided(&plus, &a).unwrap().conj() * f_one_sided(&minus, &a).unwrap();
            let got = f_two_sided(&s, &a).unwrap();
            prop_assert!((got - want).norm() < 1e-14, "code {code}: {got} vs {want}");
        }
    }

    #[test]
    fn gamma_signed_is_odd(a in angles(8)) {
        let p = a.p() as i32;
        for j in -p..=p {
            let x = a.gamma_signed(SignedIndex::new(j, a.p()).unwrap()).unwrap();
            let y = a.gamma_signed(SignedIndex::new(-j, a.p()).unwrap()).unwrap();
            prop_assert_eq!(x, -y);
        }
    }

    #[test]
    fn offsets_round_trip(p in 1usize..20) {
        for o in 0..2 * p + 1 {
            prop_assert_eq!(SignedIndex::from_offset(o, p).offset(p).unwrap(), o);
        }
    }

    #[test]
    fn angle_file_round_trip(a in angles(10)) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.json");
        write_angles(&path, &a).unwrap();
        let back: Angles = read_angles(&path).unwrap();
        prop_assert_eq!(back, a);
    }
}

#[test]
fn angle_reader_rejects_short_beta() {
    let r = parse_angles::<f64>(r#"{"p": 2, "gamma": [0.1, 0.2], "beta": [0.3]}"#);
    assert!(r.is_err());
}
