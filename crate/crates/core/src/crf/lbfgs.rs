//! Limited-memory BFGS with a backtracking Armijo line search.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
pub struct Lbfgs {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop once `|g| <= tolerance * max(1, |x|)`.
    pub tolerance: f64,
    pub max_linesearch: usize,
}

impl Default for Lbfgs {
    fn default() -> Self {
        Lbfgs {
            memory: 6,
            max_iterations: 100,
            tolerance: 1e-5,
            max_linesearch: 40,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Stop {
    Converged,
    MaxIterations,
    /// The line search could not decrease the objective along the
    /// steepest-descent direction; `x` is the best point found.
    NoProgress,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub stop: Stop,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Lbfgs {
    /// Minimizes `f`, which returns the value and gradient at a point.
    pub fn minimize<E>(
        &self,
        x0: Vec<f64>,
        mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>), E>,
    ) -> Result<Outcome, E> {
        let mut x = x0;
        let (mut fx, mut g) = f(&x)?;
        let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
        let mut iterations = 0;

        loop {
            if norm(&g) <= self.tolerance * norm(&x).max(1.0) {
                return Ok(Outcome { x, value: fx, iterations, stop: Stop::Converged });
            }
            if iterations >= self.max_iterations {
                return Ok(Outcome { x, value: fx, iterations, stop: Stop::MaxIterations });
            }

            let mut d = self.direction(&g, &pairs);
            let mut slope = dot(&d, &g);
            if slope >= 0.0 {
                pairs.clear();
                d = g.iter().map(|v| -v).collect();
                slope = -dot(&g, &g);
            }
            let mut step = if pairs.is_empty() { 1.0 / norm(&g).max(1.0) } else { 1.0 };

            let mut accepted = None;
            for _ in 0..self.max_linesearch {
                let xn: Vec<f64> = x.iter().zip(&d).map(|(a, b)| a + step * b).collect();
                let (fn_, gn) = f(&xn)?;
                if fn_.is_finite() && fn_ <= fx + 1e-4 * step * slope {
                    accepted = Some((xn, fn_, gn));
                    break;
                }
                step *= 0.5;
            }
            let Some((xn, fn_, gn)) = accepted else {
                if pairs.is_empty() {
                    return Ok(Outcome { x, value: fx, iterations, stop: Stop::NoProgress });
                }
                pairs.clear();
                continue;
            };

            let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y: Vec<f64> = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &y);
            if sy > 1e-12 * norm(&s) * norm(&y) {
                if pairs.len() == self.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, y, 1.0 / sy));
            }
            x = xn;
            fx = fn_;
            g = gn;
            iterations += 1;
        }
    }

    fn direction(&self, g: &[f64], pairs: &VecDeque<(Vec<f64>, Vec<f64>, f64)>) -> Vec<f64> {
        let mut q: Vec<f64> = g.to_vec();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            for qi in &mut q {
                *qi *= gamma;
            }
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        q.iter().map(|v| -v).collect()
    }
}
