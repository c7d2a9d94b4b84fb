//! Exact inference on a linear chain of `n` positions and `l` labels.

use super::CrfError;

pub fn logsumexp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Position scores (`unary[i * l + y]`) and label-pair scores
/// (`trans[y * l + y']`).
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    pub n: usize,
    pub l: usize,
    pub unary: Vec<f64>,
    pub trans: Vec<f64>,
}

impl Lattice {
    pub fn new(n: usize, l: usize, unary: Vec<f64>, trans: Vec<f64>) -> Self {
        assert_eq!(unary.len(), n * l);
        assert_eq!(trans.len(), l * l);
        Lattice { n, l, unary, trans }
    }

    #[inline]
    pub fn u(&self, i: usize, y: usize) -> f64 {
        self.unary[i * self.l + y]
    }

    #[inline]
    pub fn t(&self, a: usize, b: usize) -> f64 {
        self.trans[a * self.l + b]
    }

    /// Score of a label path summed left to right:
    /// `u(0,y0) + t(y0,y1) + u(1,y1) + ...`.
    pub fn path_score(&self, path: &[usize]) -> f64 {
        let mut s = self.u(0, path[0]);
        for i in 1..path.len() {
            s += self.t(path[i - 1], path[i]);
            s += self.u(i, path[i]);
        }
        s
    }

    /// Forward log-potentials, `alpha[i * l + y]`.
    pub fn forward(&self) -> Vec<f64> {
        let (n, l) = (self.n, self.l);
        let mut alpha = vec![0.0; n * l];
        alpha[..l].copy_from_slice(&self.unary[..l]);
        let mut buf = vec![0.0; l];
        for i in 1..n {
            for b in 0..l {
                for a in 0..l {
                    buf[a] = alpha[(i - 1) * l + a] + self.t(a, b);
                }
                alpha[i * l + b] = self.u(i, b) + logsumexp(&buf);
            }
        }
        alpha
    }

    /// Backward log-potentials, `beta[i * l + y]`, excluding position `i`'s own score.
    pub fn backward(&self) -> Vec<f64> {
        let (n, l) = (self.n, self.l);
        let mut beta = vec![0.0; n * l];
        let mut buf = vec![0.0; l];
        for i in (0..n.saturating_sub(1)).rev() {
            for a in 0..l {
                for b in 0..l {
                    buf[b] = self.t(a, b) + self.u(i + 1, b) + beta[(i + 1) * l + b];
                }
                beta[i * l + a] = logsumexp(&buf);
            }
        }
        beta
    }

    pub fn log_partition(&self) -> f64 {
        let alpha = self.forward();
        logsumexp(&alpha[(self.n - 1) * self.l..])
    }

    pub fn log_partition_backward(&self) -> f64 {
        let beta = self.backward();
        let v: Vec<f64> = (0..self.l).map(|y| self.u(0, y) + beta[y]).collect();
        logsumexp(&v)
    }

    /// Node marginals (`n * l`) and summed pairwise marginals (`l * l`), plus
    /// the log partition.
    pub fn marginals(&self) -> Result<(Vec<f64>, Vec<f64>, f64), CrfError> {
        let (n, l) = (self.n, self.l);
        let alpha = self.forward();
        let beta = self.backward();
        let log_z = logsumexp(&alpha[(n - 1) * l..]);
        if !log_z.is_finite() {
            return Err(CrfError::Numeric(format!("log partition is {log_z}")));
        }
        let node: Vec<f64> = (0..n * l).map(|k| (alpha[k] + beta[k] - log_z).exp()).collect();
        let mut pair = vec![0.0; l * l];
        for i in 1..n {
            for a in 0..l {
                let fa = alpha[(i - 1) * l + a];
                for b in 0..l {
                    pair[a * l + b] += (fa + self.t(a, b) + self.u(i, b) + beta[i * l + b] - log_z).exp();
                }
            }
        }
        Ok((node, pair, log_z))
    }

    /// Highest-scoring path; among exactly tied paths the lexicographically
    /// smallest label sequence wins.
    pub fn viterbi(&self) -> (Vec<usize>, f64) {
        let (n, l) = (self.n, self.l);
        // best[i*l + y]: best score of positions i..n given label y at i
        let mut best = vec![0.0; n * l];
        for y in 0..l {
            best[(n - 1) * l + y] = self.u(n - 1, y);
        }
        for i in (0..n - 1).rev() {
            for a in 0..l {
                let m = (0..l)
                    .map(|b| self.t(a, b) + best[(i + 1) * l + b])
                    .fold(f64::NEG_INFINITY, f64::max);
                best[i * l + a] = self.u(i, a) + m;
            }
        }
        let mut path = Vec::with_capacity(n);
        let first = argmax_first((0..l).map(|y| best[y]));
        path.push(first);
        for i in 1..n {
            let a = path[i - 1];
            path.push(argmax_first((0..l).map(|b| self.t(a, b) + best[i * l + b])));
        }
        let score = self.path_score(&path);
        (path, score)
    }
}

fn argmax_first(xs: impl Iterator<Item = f64>) -> usize {
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for (i, x) in xs.enumerate() {
        if x > bv {
            bv = x;
            bi = i;
        }
    }
    bi
}
