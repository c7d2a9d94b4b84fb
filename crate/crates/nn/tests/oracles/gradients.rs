//! Finite-difference cases for every graph op, the cells, the character
//! convolution and a full LSTM-CRF loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagbench_core::corpus::{Corpus, Sentence};
use tagbench_nn::arch::{build_charset, build_vocab};
use tagbench_nn::cells::{Cell, CellKind, CharConv};
use tagbench_nn::{
    build_tagger, grad_check, ArchitectureConfig, ArchitectureKind, Graph, NnError, NodeId,
    ParamStore, Tensor,
};

pub const STEP: f64 = 1e-5;

pub type OpFn = fn(&mut Graph, &[NodeId], &[Vec<usize>]) -> Result<NodeId, NnError>;

pub struct OpCase {
    pub name: &'static str,
    pub shapes: fn(&mut ChaCha8Rng) -> Vec<Vec<usize>>,
    pub op: OpFn,
}

pub fn random_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(
        shape.to_vec(),
        (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect(),
    )
    .unwrap()
}

pub fn rand_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn dims(rng: &mut ChaCha8Rng) -> (usize, usize) {
    (rng.gen_range(1..=5), rng.gen_range(1..=7))
}

fn matrix_and_vector(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let (m, n) = dims(rng);
    vec![vec![m, n], vec![n]]
}

fn two_same(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let (m, n) = dims(rng);
    vec![vec![m, n], vec![m, n]]
}

fn one_vector(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    vec![vec![rng.gen_range(1..=7)]]
}

fn one_matrix(rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let (m, n) = dims(rng);
    vec![vec![m, n]]
}

/// Every op with a shape generator bounded by (5, 7). The CRF case draws
/// at least two labels: with one label the loss is constant and the
/// relative error compares two roundoff residues.
pub fn op_cases() -> Vec<OpCase> {
    vec![
        OpCase {
            name: "matvec",
            shapes: matrix_and_vector,
            op: |g, x, _| g.matvec(x[0], x[1]),
        },
        OpCase {
            name: "mat_t_vec",
            shapes: |rng| {
                let (m, n) = dims(rng);
                vec![vec![m, n], vec![m]]
            },
            op: |g, x, _| g.mat_t_vec(x[0], x[1]),
        },
        OpCase {
            name: "matmul",
            shapes: |rng| {
                let (m, k) = dims(rng);
                let n = rng.gen_range(1..=7);
                vec![vec![m, k], vec![k, n]]
            },
            op: |g, x, _| g.matmul(x[0], x[1]),
        },
        OpCase {
            name: "add",
            shapes: two_same,
            op: |g, x, _| g.add(x[0], x[1]),
        },
        OpCase {
            name: "sub",
            shapes: two_same,
            op: |g, x, _| g.sub(x[0], x[1]),
        },
        OpCase {
            name: "mul",
            shapes: two_same,
            op: |g, x, _| g.mul(x[0], x[1]),
        },
        OpCase {
            name: "scale",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.scale(x[0], -1.7)),
        },
        OpCase {
            name: "one_minus",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.one_minus(x[0])),
        },
        OpCase {
            name: "sigmoid",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.sigmoid(x[0])),
        },
        OpCase {
            name: "tanh",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.tanh(x[0])),
        },
        OpCase {
            name: "relu",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.relu(x[0])),
        },
        OpCase {
            name: "mask",
            shapes: one_matrix,
            op: |g, x, s| {
                let n = s[0].iter().product();
                g.mask(
                    x[0],
                    (0..n).map(|k| if k % 3 == 1 { 0.0 } else { 2.0 }).collect(),
                )
            },
        },
        OpCase {
            name: "concat",
            shapes: |rng| {
                (0..rng.gen_range(1..=3))
                    .map(|_| vec![rng.gen_range(1..=7)])
                    .collect()
            },
            op: |g, x, _| g.concat(x),
        },
        OpCase {
            name: "slice",
            shapes: one_vector,
            op: |g, x, s| {
                let n = s[0][0];
                g.slice(x[0], n / 3, n - n / 3 - n / 4)
            },
        },
        OpCase {
            name: "stack",
            shapes: |rng| {
                let (m, n) = dims(rng);
                vec![vec![n]; m]
            },
            op: |g, x, _| g.stack(x),
        },
        OpCase {
            name: "row",
            shapes: one_matrix,
            op: |g, x, s| g.row(x[0], s[0][0] - 1),
        },
        OpCase {
            name: "lookup",
            shapes: one_matrix,
            op: |g, _, s| g.lookup(0, s[0][0] / 2),
        },
        OpCase {
            name: "softmax",
            shapes: one_vector,
            op: |g, x, _| g.softmax(x[0]),
        },
        OpCase {
            name: "softmax_ce",
            shapes: one_vector,
            op: |g, x, s| g.softmax_ce(x[0], s[0][0] / 2),
        },
        OpCase {
            name: "conv1d",
            shapes: |rng| {
                let (t, c) = dims(rng);
                let width = rng.gen_range(1..=t.min(3));
                let f = rng.gen_range(1..=4);
                vec![vec![t, c], vec![f, width * c], vec![f]]
            },
            op: |g, x, s| g.conv1d(x[0], x[1], x[2], s[1][1] / s[0][1]),
        },
        OpCase {
            name: "max_over_time",
            shapes: one_matrix,
            op: |g, x, _| g.max_over_time(x[0]),
        },
        OpCase {
            name: "mean_rows",
            shapes: one_matrix,
            op: |g, x, _| g.mean_rows(x[0]),
        },
        OpCase {
            name: "sum",
            shapes: one_matrix,
            op: |g, x, _| Ok(g.sum(x[0])),
        },
        OpCase {
            name: "dot",
            shapes: two_same,
            op: |g, x, _| g.dot(x[0], x[1]),
        },
        OpCase {
            name: "add_all",
            shapes: |rng| vec![vec![1]; rng.gen_range(1..=5)],
            op: |g, x, _| g.add_all(x),
        },
        OpCase {
            name: "crf_nll",
            shapes: |rng| {
                let n = rng.gen_range(1..=5);
                let l = rng.gen_range(2..=4);
                vec![vec![n, l], vec![l + 2, l + 2]]
            },
            op: |g, x, s| {
                let (n, l) = (s[0][0], s[0][1]);
                let gold: Vec<usize> = (0..n).map(|i| (i * 7 + 3) % l).collect();
                g.crf_nll(x[0], x[1], &gold)
            },
        },
    ]
}

/// Largest relative error over 20 random shape/seed pairs. The op output is
/// scalarized with a fixed random projection.
pub fn op_error(case: &OpCase) -> f64 {
    let mut worst: f64 = 0.0;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed * 7919 + case.name.len() as u64);
        let shapes = (case.shapes)(&mut rng);
        let mut store = ParamStore::new();
        for (i, s) in shapes.iter().enumerate() {
            store.add(format!("in{i}"), random_tensor(&mut rng, s), true);
        }
        let out_len = {
            let mut g = Graph::new(&store);
            let xs: Vec<NodeId> = store.ids().map(|p| g.param(p)).collect();
            let out = (case.op)(&mut g, &xs, &shapes).unwrap();
            g.value(out).len()
        };
        let proj: Vec<f64> = (0..out_len)
            .map(|_| rng.gen_range(0.5..1.5) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let loss = |g: &mut Graph| {
            let xs: Vec<NodeId> = (0..shapes.len()).map(|p| g.param(p)).collect();
            let out = (case.op)(g, &xs, &shapes)?;
            let r = g.constant(Tensor::vector(proj.clone()));
            g.dot(out, r)
        };
        worst = worst.max(grad_check(&store, &[], 40, STEP, &mut rng, loss).unwrap());
    }
    worst
}

/// Three steps of a cell from the zero state, all parameters checked.
pub fn cell_error(kind: CellKind) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut store = ParamStore::new();
    let cell = Cell::new(&mut store, "cell", kind, 4, 3, &mut rng);
    let xs: Vec<Tensor> = (0..3)
        .map(|_| Tensor::vector(rand_vec(&mut rng, 4)))
        .collect();
    let r = Tensor::vector(rand_vec(&mut rng, 3));
    grad_check(&store, &[], 60, STEP, &mut rng, |g| {
        let bc = cell.bind(g);
        let xn: Vec<_> = xs.iter().map(|x| g.constant(x.clone())).collect();
        let (_, s) = bc.run(g, &xn, None, false)?;
        let rn = g.constant(r.clone());
        g.dot(s.h, rn)
    })
    .unwrap()
}

pub fn char_conv_error() -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut store = ParamStore::new();
    let conv = CharConv::new(&mut store, "chars", 6, 4, 5, &mut rng);
    let bias = rand_vec(&mut rng, 5);
    store.get_mut(conv.bias).data_mut().copy_from_slice(&bias);
    let r = Tensor::vector(rand_vec(&mut rng, 5));
    grad_check(&store, &[], 80, STEP, &mut rng, |g| {
        let b = conv.bind(g);
        let v = b.embed(g, &[2, 3, 4, 5, 1])?;
        let rn = g.constant(r.clone());
        g.dot(v, rn)
    })
    .unwrap()
}

/// Full LSTM-CRF loss on a 4-token, 3-label sentence, with a second pass
/// focused on the transition matrix.
pub fn lstm_crf_error() -> f64 {
    let s = Sentence::from_pairs(
        &["from", "boston", "to", "denver"],
        &["O", "B-from", "O", "B-to"],
    )
    .unwrap();
    let corpus = Corpus::new(vec![s.clone()], vec![s.clone()]).0;
    let mut c = ArchitectureConfig::new(ArchitectureKind::LstmCrf, 8);
    c.word_dim = 6;
    let labels: Vec<String> = corpus.tag_inventory.iter().cloned().collect();
    assert_eq!(labels.len(), 3);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let t = build_tagger(
        &c,
        &build_vocab(&corpus.train, None),
        &build_charset(&corpus.train),
        &labels,
        None,
        &mut rng,
    )
    .unwrap();
    let enc = t.encode(&s);
    let gold: Vec<usize> = t
        .label_ids(&s.tags)
        .into_iter()
        .map(Option::unwrap)
        .collect();
    let all = grad_check(&t.store, &[], 400, STEP, &mut rng, |g| {
        t.loss(g, &enc, &gold, &mut None)
    })
    .unwrap();
    let tr = t.transitions().unwrap();
    let trans = grad_check(&t.store, &[tr], 25, STEP, &mut rng, |g| {
        t.loss(g, &enc, &gold, &mut None)
    })
    .unwrap();
    all.max(trans)
}
