//! Central-difference gradient verification.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::graph::{Grads, Graph, NodeId, ParamId, ParamStore};
use crate::NnError;

/// Largest relative error `|a - n| / (|a| + |n| + 1e-12)` between analytic
/// and central-difference derivatives over `points` random coordinates of
/// the `candidates` parameters (all parameters when empty).
///
/// `loss` builds a scalar on the graph it is given and must read parameters
/// only through that graph.
pub fn grad_check<F>(
    store: &ParamStore,
    candidates: &[ParamId],
    points: usize,
    step: f64,
    rng: &mut ChaCha8Rng,
    loss: F,
) -> Result<f64, NnError>
where
    F: Fn(&mut Graph) -> Result<NodeId, NnError>,
{
    if !(1e-6..=1e-3).contains(&step) {
        return Err(NnError::Config(format!("finite-difference step {step} outside [1e-6, 1e-3]")));
    }
    let all: Vec<ParamId> = store.ids().collect();
    let candidates = if candidates.is_empty() { &all[..] } else { candidates };
    if candidates.is_empty() {
        return Ok(0.0);
    }
    let mut grads = Grads::zeros_like(store);
    {
        let mut g = Graph::new(store);
        let out = loss(&mut g)?;
        g.backward(out, &mut grads)?;
    }
    let eval = |s: &ParamStore| -> Result<f64, NnError> {
        let mut g = Graph::new(s);
        let out = loss(&mut g)?;
        Ok(g.value(out).item())
    };
    let mut work = store.clone();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let p = candidates[rng.gen_range(0..candidates.len())];
        let k = rng.gen_range(0..store.get(p).len());
        let orig = work.get(p).data()[k];
        work.get_mut(p).data_mut()[k] = orig + step;
        let fp = eval(&work)?;
        work.get_mut(p).data_mut()[k] = orig - step;
        let fm = eval(&work)?;
        work.get_mut(p).data_mut()[k] = orig;
        let numeric = (fp - fm) / (2.0 * step);
        let analytic = grads.get(p).data()[k];
        let rel = (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12);
        worst = worst.max(rel);
    }
    Ok(worst)
}
