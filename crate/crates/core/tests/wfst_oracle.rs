use std::collections::BTreeMap;
use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagbench_core::wfst::{compose, train_concept_lm, Fst, FstArc, SymbolTable, EPSILON};

mod oracles;
use oracles::wfst::{decode_case, kn_max_deviation};

#[test]
fn decode_matches_exhaustive_search() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for case in 0..100 {
        if let Err(e) = decode_case(&mut rng) {
            panic!("case {case}: {e}");
        }
    }
}

#[test]
fn kn_distributions_normalize() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for order in 2..=4 {
        let dev = kn_max_deviation(order, &mut rng);
        assert!(dev < 1e-6, "order {order}: {dev}");
    }
}

#[test]
fn kn_highest_order_uses_discounted_counts() {
    // "a" is followed by b twice and c once. Continuation counts: a, b, c have
    // one distinct left neighbour each and </s> has two, so the total is 5.
    let corpus = vec![vec!["a", "b"], vec!["a", "b"], vec!["a", "c"]];
    let lm = train_concept_lm(&corpus, 2, 0.5).unwrap();
    let uni = |w: &str| lm.logprob::<&str>(&[], w).exp();
    assert!((uni("b") - 1.0 / 5.0).abs() < 1e-12);
    assert!((uni("</s>") - 2.0 / 5.0).abs() < 1e-12);
    let gamma = 0.5 * 2.0 / 3.0;
    let expect = (2.0 - 0.5) / 3.0 + gamma * uni("b");
    assert!((lm.logprob(&["a"], "b").exp() - expect).abs() < 1e-12);
}

// ---------- composition ----------

fn random_dag(rng: &mut ChaCha8Rng, syms: &Arc<SymbolTable>) -> Fst {
    let mut f = Fst::new(syms.clone(), syms.clone());
    let n = rng.gen_range(1..=4);
    for _ in 0..n {
        f.add_state();
    }
    f.set_initial(0);
    for s in 0..n {
        if rng.gen_bool(0.5) || s == n - 1 {
            f.set_final(s, rng.gen_range(0..4) as f64 * 0.5);
        }
        for t in s + 1..n {
            for _ in 0..rng.gen_range(0..3) {
                f.add_arc(
                    s,
                    FstArc {
                        ilabel: rng.gen_range(0..3),
                        olabel: rng.gen_range(0..3),
                        weight: rng.gen_range(0..8) as f64 * 0.25,
                        next: t,
                    },
                );
            }
        }
    }
    f
}

/// Every accepting path as (input labels, output labels, cost), epsilons removed.
fn paths(f: &Fst) -> Vec<(Vec<u32>, Vec<u32>, f64)> {
    fn walk(f: &Fst, s: usize, i: &mut Vec<u32>, o: &mut Vec<u32>, c: f64, out: &mut Vec<(Vec<u32>, Vec<u32>, f64)>) {
        if let Some(w) = f.final_weight(s) {
            out.push((i.clone(), o.clone(), c + w));
        }
        for a in f.arcs(s) {
            if a.ilabel != EPSILON {
                i.push(a.ilabel);
            }
            if a.olabel != EPSILON {
                o.push(a.olabel);
            }
            walk(f, a.next, i, o, c + a.weight, out);
            if a.olabel != EPSILON {
                o.pop();
            }
            if a.ilabel != EPSILON {
                i.pop();
            }
        }
    }
    let mut out = Vec::new();
    if let Some(s) = f.initial() {
        walk(f, s, &mut Vec::new(), &mut Vec::new(), 0.0, &mut out);
    }
    out
}

fn best_by_pair(p: impl IntoIterator<Item = (Vec<u32>, Vec<u32>, f64)>) -> BTreeMap<(Vec<u32>, Vec<u32>), f64> {
    let mut m = BTreeMap::new();
    for (i, o, c) in p {
        let e = m.entry((i, o)).or_insert(f64::INFINITY);
        if c < *e {
            *e = c;
        }
    }
    m
}

proptest! {
    #[test]
    fn compose_preserves_min_costs(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let syms = Arc::new(SymbolTable::from_symbols(["a", "b"]));
        let left = random_dag(&mut rng, &syms);
        let right = random_dag(&mut rng, &syms);
        let lp = paths(&left);
        let rp = paths(&right);
        let mut expected = Vec::new();
        for (li, lo, lc) in &lp {
            for (ri, ro, rc) in &rp {
                if lo == ri {
                    expected.push((li.clone(), ro.clone(), lc + rc));
                }
            }
        }
        let expected = best_by_pair(expected);
        let got = best_by_pair(paths(&compose(&left, &right).unwrap()));
        prop_assert_eq!(expected.keys().collect::<Vec<_>>(), got.keys().collect::<Vec<_>>());
        for (k, v) in &expected {
            prop_assert!((got[k] - v).abs() < 1e-12);
        }
    }
}
