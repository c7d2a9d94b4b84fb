//! Exhaustive enumeration over label paths of a small CRF lattice.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tagbench_core::crf::lattice::Lattice;

pub fn all_paths(n: usize, l: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..l).map(move |y| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

pub fn enumerate_score(unary: &[f64], trans: &[f64], l: usize, path: &[usize]) -> f64 {
    let mut s = 0.0;
    // chain order: u0 + t01 + u1 + t12 + ...
    for (i, &y) in path.iter().enumerate() {
        if i > 0 {
            s += trans[path[i - 1] * l + y];
        }
        s += unary[i * l + y];
    }
    s
}

pub fn brute(unary: &[f64], trans: &[f64], n: usize, l: usize) -> (f64, Vec<usize>, f64) {
    let paths = all_paths(n, l);
    let scores: Vec<f64> = paths.iter().map(|p| enumerate_score(unary, trans, l, p)).collect();
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let log_z = m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    // paths are generated in lexicographic order, so the first max is the smallest
    let best = scores.iter().position(|&s| s == m).unwrap();
    (log_z, paths[best].clone(), m)
}

pub fn random_lattice(rng: &mut ChaCha8Rng) -> Lattice {
    let n = rng.gen_range(1..=6);
    let l = rng.gen_range(1..=4);
    let unary = (0..n * l).map(|_| rng.gen_range(-3.0..3.0)).collect();
    let trans = (0..l * l).map(|_| rng.gen_range(-3.0..3.0)).collect();
    Lattice::new(n, l, unary, trans)
}
