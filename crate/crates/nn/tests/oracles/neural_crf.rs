//! Exhaustive enumeration for the start/stop neural CRF.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use tagbench_nn::crf::{log_partition, log_partition_backward, viterbi};
use tagbench_nn::Tensor;

pub fn random(rng: &mut ChaCha8Rng, n: usize, l: usize) -> (Tensor, Tensor) {
    let e = Tensor::matrix(n, l, (0..n * l).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    let w = l + 2;
    let t = Tensor::matrix(w, w, (0..w * w).map(|_| rng.gen_range(-2.0..2.0)).collect()).unwrap();
    (e, t)
}

/// All label sequences of length `n`, in lexicographic order.
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

/// Start transition, emissions and transitions, stop transition.
pub fn score(e: &Tensor, t: &Tensor, path: &[usize]) -> f64 {
    let l = e.cols();
    let w = l + 2;
    let tr = |a: usize, b: usize| t.data()[a * w + b];
    let mut s = tr(l, path[0]) + e.data()[path[0]];
    for i in 1..path.len() {
        s += tr(path[i - 1], path[i]) + e.data()[i * l + path[i]];
    }
    s + tr(path[path.len() - 1], l + 1)
}

pub fn brute_log_z(e: &Tensor, t: &Tensor) -> f64 {
    let scores: Vec<f64> = all_paths(e.rows(), e.cols()).iter().map(|p| score(e, t, p)).collect();
    let m = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + scores.iter().map(|s| (s - m).exp()).sum::<f64>().ln()
}

/// One random instance with N <= 5 and L <= 4: both partition recursions
/// within 1e-8 of enumeration, Viterbi equal to the enumerated argmax.
pub fn case(rng: &mut ChaCha8Rng) -> Result<(), String> {
    let n = rng.gen_range(1..=5);
    let l = rng.gen_range(1..=4);
    let (e, t) = random(rng, n, l);
    let z = brute_log_z(&e, &t);
    let (fwd, bwd) = (log_partition(&e, &t), log_partition_backward(&e, &t));
    if (fwd - z).abs() >= 1e-8 || (bwd - z).abs() >= 1e-8 {
        return Err(format!("N={n} L={l}: log Z {fwd} / {bwd}, enumeration {z}"));
    }
    let paths = all_paths(n, l);
    let mut best = &paths[0];
    for p in &paths {
        if score(&e, &t, p) > score(&e, &t, best) {
            best = p;
        }
    }
    let (path, s) = viterbi(&e, &t);
    if &path != best || (s - score(&e, &t, best)).abs() >= 1e-12 {
        return Err(format!("N={n} L={l}: Viterbi {path:?} ({s}), enumeration {best:?}"));
    }
    Ok(())
}
