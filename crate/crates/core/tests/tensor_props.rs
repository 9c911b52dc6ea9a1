use proptest::prelude::*;
use tn_gbp::tensor::{contract, elem_pow, hadamard, sum_over, IndexLabel, LabeledTensor, C64};

fn labels_from(ids: &[u32], dims: &[usize]) -> Vec<IndexLabel> {
    ids.iter().map(|&i| IndexLabel::new(i, dims[i as usize])).collect()
}

/// A tensor on a random subset of 5 global labels, with values in [-1,1] and
/// roughly half of them zeroed when `sparse_frac` is set.
fn arb_tensor(dims: Vec<usize>, positive: bool) -> impl Strategy<Value = LabeledTensor> {
    let n = dims.len();
    (proptest::sample::subsequence((0..n as u32).collect::<Vec<_>>(), 1..=3), any::<u64>()).prop_map(
        move |(ids, seed)| {
            let labels = labels_from(&ids, &dims);
            let mut s = seed | 1;
            LabeledTensor::from_fn(labels, |_| {
                s ^= s << 13;
                s ^= s >> 7;
                s ^= s << 17;
                let u = (s >> 11) as f64 / (1u64 << 53) as f64;
                let v = if positive { 0.1 + u } else { 2.0 * u - 1.0 };
                C64::new(v, if positive { 0.0 } else { 0.5 * v * v })
            })
        },
    )
}

fn dims() -> Vec<usize> {
    vec![2, 3, 2, 1, 3]
}

fn close(a: &LabeledTensor, b: &LabeledTensor, tol: f64) -> bool {
    let ids = a.label_ids();
    let mut bi = b.label_ids();
    let mut ai = ids.clone();
    ai.sort();
    bi.sort();
    if ai != bi {
        return false;
    }
    let b = b.permute(&ids).unwrap();
    a.materialize().iter().zip(b.materialize()).all(|(x, y)| (x - y).norm() <= tol * (1.0 + x.norm()))
}

fn shuffled(t: &LabeledTensor, seed: usize) -> LabeledTensor {
    let mut ids = t.label_ids();
    let n = ids.len();
    for k in 0..n {
        ids.swap(k, (k * 7 + seed) % n);
    }
    t.permute(&ids).unwrap()
}

proptest! {
    #[test]
    fn hadamard_commutes(a in arb_tensor(dims(), false), b in arb_tensor(dims(), false)) {
        prop_assert!(close(&hadamard(&a, &b).unwrap(), &hadamard(&b, &a).unwrap(), 1e-14));
    }

    #[test]
    fn hadamard_associates(a in arb_tensor(dims(), false), b in arb_tensor(dims(), false), c in arb_tensor(dims(), false)) {
        let l = hadamard(&hadamard(&a, &b).unwrap(), &c).unwrap();
        let r = hadamard(&a, &hadamard(&b, &c).unwrap()).unwrap();
        prop_assert!(close(&l, &r, 1e-13));
    }

    #[test]
    fn ops_invariant_under_axis_shuffle(a in arb_tensor(dims(), false), b in arb_tensor(dims(), false), s in 0usize..5) {
        let h1 = hadamard(&a, &b).unwrap();
        let h2 = hadamard(&shuffled(&a, s), &shuffled(&b, s + 1)).unwrap();
        prop_assert!(close(&h1, &h2, 1e-14));
        let c1 = contract(&a, &b).unwrap();
        let c2 = contract(&shuffled(&a, s + 2), &shuffled(&b, s)).unwrap();
        prop_assert!(close(&c1, &c2, 1e-13));
    }

    #[test]
    fn contract_equals_sum_of_hadamard(a in arb_tensor(dims(), false), b in arb_tensor(dims(), false)) {
        let shared: Vec<IndexLabel> = a.labels.iter().filter(|l| b.position(l.id).is_some()).copied().collect();
        let reference = sum_over(&hadamard(&a, &b).unwrap(), &shared).unwrap();
        prop_assert!(close(&contract(&a, &b).unwrap(), &reference, 1e-13));
    }

    #[test]
    fn pow_roundtrip(t in arb_tensor(dims(), true), p in 0.2f64..3.0) {
        let back = elem_pow(&elem_pow(&t, p).unwrap(), 1.0 / p).unwrap();
        prop_assert!(close(&back, &t, 1e-12));
    }

    #[test]
    fn sparse_and_dense_agree(a in arb_tensor(dims(), false), b in arb_tensor(dims(), false), mask in any::<u64>()) {
        let mut k = 0;
        let zeroed = |t: &LabeledTensor, k: &mut u32| t.map_entries(|z| { *k += 1; if (mask >> (*k % 64)) & 1 == 1 { C64::default() } else { z } });
        let a = zeroed(&a, &mut k);
        let b = zeroed(&b, &mut k);
        let (sa, sb) = (a.to_sparse(), b.to_sparse());
        prop_assert!(close(&hadamard(&a, &b).unwrap(), &hadamard(&sa, &b).unwrap().to_dense(), 1e-13));
        prop_assert!(close(&hadamard(&a, &b).unwrap(), &hadamard(&a, &sb).unwrap().to_dense(), 1e-13));
        prop_assert!(close(&contract(&a, &b).unwrap(), &contract(&sa, &sb).unwrap().to_dense(), 1e-13));
        let drop = vec![a.labels[0]];
        prop_assert!(close(&sum_over(&a, &drop).unwrap(), &sum_over(&sa, &drop).unwrap().to_dense(), 1e-13));
        prop_assert!(close(&elem_pow(&a, 2.0).unwrap(), &elem_pow(&sa, 2.0).unwrap().to_dense(), 1e-13));
        prop_assert_eq!(sa.to_dense(), a);
    }
}
