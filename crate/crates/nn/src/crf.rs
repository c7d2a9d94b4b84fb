//! Chain inference for the neural CRF output layer. Transitions are an
//! `(L + 2) x (L + 2)` matrix whose last two indices are the start and stop
//! states.

use crate::tensor::Tensor;

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

struct View<'a> {
    e: &'a [f64],
    t: &'a [f64],
    n: usize,
    l: usize,
}

impl View<'_> {
    fn new<'a>(emissions: &'a Tensor, transitions: &'a Tensor) -> View<'a> {
        let l = emissions.cols();
        debug_assert_eq!(transitions.shape(), &[l + 2, l + 2]);
        View {
            e: emissions.data(),
            t: transitions.data(),
            n: emissions.rows(),
            l,
        }
    }
    fn e(&self, i: usize, y: usize) -> f64 {
        self.e[i * self.l + y]
    }
    fn t(&self, a: usize, b: usize) -> f64 {
        self.t[a * (self.l + 2) + b]
    }
    fn start(&self) -> usize {
        self.l
    }
    fn stop(&self) -> usize {
        self.l + 1
    }

    fn forward(&self) -> Vec<f64> {
        let (n, l) = (self.n, self.l);
        let mut alpha = vec![0.0; n * l];
        for y in 0..l {
            alpha[y] = self.t(self.start(), y) + self.e(0, y);
        }
        let mut buf = vec![0.0; l];
        for i in 1..n {
            for b in 0..l {
                for a in 0..l {
                    buf[a] = alpha[(i - 1) * l + a] + self.t(a, b);
                }
                alpha[i * l + b] = self.e(i, b) + logsumexp(&buf);
            }
        }
        alpha
    }

    fn backward(&self) -> Vec<f64> {
        let (n, l) = (self.n, self.l);
        let mut beta = vec![0.0; n * l];
        for y in 0..l {
            beta[(n - 1) * l + y] = self.t(y, self.stop());
        }
        let mut buf = vec![0.0; l];
        for i in (0..n - 1).rev() {
            for a in 0..l {
                for b in 0..l {
                    buf[b] = self.t(a, b) + self.e(i + 1, b) + beta[(i + 1) * l + b];
                }
                beta[i * l + a] = logsumexp(&buf);
            }
        }
        beta
    }

    fn log_z(&self, alpha: &[f64]) -> f64 {
        let l = self.l;
        let last: Vec<f64> = (0..l)
            .map(|y| alpha[(self.n - 1) * l + y] + self.t(y, self.stop()))
            .collect();
        logsumexp(&last)
    }
}

pub fn log_partition(emissions: &Tensor, transitions: &Tensor) -> f64 {
    let v = View::new(emissions, transitions);
    v.log_z(&v.forward())
}

pub fn log_partition_backward(emissions: &Tensor, transitions: &Tensor) -> f64 {
    let v = View::new(emissions, transitions);
    let beta = v.backward();
    let first: Vec<f64> = (0..v.l).map(|y| v.t(v.start(), y) + v.e(0, y) + beta[y]).collect();
    logsumexp(&first)
}

/// Score of a label path: start transition, then emission and transition
/// terms left to right, then the stop transition.
pub fn path_score(emissions: &Tensor, transitions: &Tensor, path: &[usize]) -> f64 {
    let v = View::new(emissions, transitions);
    let mut s = v.t(v.start(), path[0]);
    s += v.e(0, path[0]);
    for i in 1..path.len() {
        s += v.t(path[i - 1], path[i]);
        s += v.e(i, path[i]);
    }
    s + v.t(path[path.len() - 1], v.stop())
}

/// Log partition, node marginals (`N x L`) and expected transition counts
/// (`(L + 2) x (L + 2)`, start and stop rows included).
pub fn marginals(emissions: &Tensor, transitions: &Tensor) -> (f64, Vec<f64>, Vec<f64>) {
    let v = View::new(emissions, transitions);
    let (n, l) = (v.n, v.l);
    let alpha = v.forward();
    let beta = v.backward();
    let log_z = v.log_z(&alpha);
    let node: Vec<f64> = (0..n * l).map(|k| (alpha[k] + beta[k] - log_z).exp()).collect();
    let w = l + 2;
    let mut pair = vec![0.0; w * w];
    for y in 0..l {
        pair[v.start() * w + y] += node[y];
        pair[y * w + v.stop()] += node[(n - 1) * l + y];
    }
    for i in 1..n {
        for a in 0..l {
            let fa = alpha[(i - 1) * l + a];
            for b in 0..l {
                pair[a * w + b] += (fa + v.t(a, b) + v.e(i, b) + beta[i * l + b] - log_z).exp();
            }
        }
    }
    (log_z, node, pair)
}

/// Best path and its score; exact ties go to the lexicographically smallest
/// label sequence.
pub fn viterbi(emissions: &Tensor, transitions: &Tensor) -> (Vec<usize>, f64) {
    let v = View::new(emissions, transitions);
    let (n, l) = (v.n, v.l);
    let mut best = vec![0.0; n * l];
    for y in 0..l {
        best[(n - 1) * l + y] = v.e(n - 1, y) + v.t(y, v.stop());
    }
    for i in (0..n - 1).rev() {
        for a in 0..l {
            let m = (0..l)
                .map(|b| v.t(a, b) + best[(i + 1) * l + b])
                .fold(f64::NEG_INFINITY, f64::max);
            best[i * l + a] = v.e(i, a) + m;
        }
    }
    let pick = |scores: &mut dyn Iterator<Item = f64>| {
        let mut bi = 0;
        let mut bv = f64::NEG_INFINITY;
        for (k, s) in scores.enumerate() {
            if s > bv {
                bv = s;
                bi = k;
            }
        }
        bi
    };
    let mut path = Vec::with_capacity(n);
    path.push(pick(&mut (0..l).map(|y| v.t(v.start(), y) + best[y])));
    for i in 1..n {
        let a = path[i - 1];
        path.push(pick(&mut (0..l).map(|b| v.t(a, b) + best[i * l + b])));
    }
    let s = path_score(emissions, transitions, &path);
    (path, s)
}
