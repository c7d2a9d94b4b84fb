//! The neural tagging architectures and their forward passes.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tagbench_core::corpus::{vocab_key, EmbeddingTable, Sentence};

use crate::cells::{uniform, CellKind, CharConv, Encoder, Linear, CHAR_UNK};
use crate::crf;
use crate::graph::{softmax, Graph, NodeId, ParamId, ParamStore};
use crate::tensor::Tensor;
use crate::NnError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ArchitectureKind {
    Rnn,
    Lstm,
    LstmCharRep,
    Lstm2Ch,
    Gru,
    Conv,
    FcInit,
    Encoder,
    Attention,
    LstmCrf,
    LstmCrfCharRep,
}

impl ArchitectureKind {
    pub const ALL: [ArchitectureKind; 11] = [
        ArchitectureKind::Rnn,
        ArchitectureKind::Lstm,
        ArchitectureKind::LstmCharRep,
        ArchitectureKind::Lstm2Ch,
        ArchitectureKind::Gru,
        ArchitectureKind::Conv,
        ArchitectureKind::FcInit,
        ArchitectureKind::Encoder,
        ArchitectureKind::Attention,
        ArchitectureKind::LstmCrf,
        ArchitectureKind::LstmCrfCharRep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ArchitectureKind::Rnn => "RNN",
            ArchitectureKind::Lstm => "LSTM",
            ArchitectureKind::LstmCharRep => "LSTM-CHAR-REP",
            ArchitectureKind::Lstm2Ch => "LSTM-2CH",
            ArchitectureKind::Gru => "GRU",
            ArchitectureKind::Conv => "CONV",
            ArchitectureKind::FcInit => "FC-INIT",
            ArchitectureKind::Encoder => "ENCODER",
            ArchitectureKind::Attention => "ATTENTION",
            ArchitectureKind::LstmCrf => "LSTM-CRF",
            ArchitectureKind::LstmCrfCharRep => "LSTM-CRF-CHAR-REP",
        }
    }

    pub fn uses_crf(self) -> bool {
        matches!(self, ArchitectureKind::LstmCrf | ArchitectureKind::LstmCrfCharRep)
    }

    pub fn uses_chars(self) -> bool {
        matches!(self, ArchitectureKind::LstmCharRep | ArchitectureKind::LstmCrfCharRep)
    }

    fn is_decoder(self) -> bool {
        matches!(self, ArchitectureKind::Encoder | ArchitectureKind::Attention)
    }
}

impl fmt::Display for ArchitectureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ArchitectureKind {
    type Err = NnError;
    fn from_str(s: &str) -> Result<Self, NnError> {
        ArchitectureKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| NnError::Config(format!("unknown architecture {s:?}")))
    }
}

impl TryFrom<String> for ArchitectureKind {
    type Error = NnError;
    fn try_from(s: String) -> Result<Self, NnError> {
        s.parse()
    }
}

impl From<ArchitectureKind> for String {
    fn from(k: ArchitectureKind) -> String {
        k.name().to_string()
    }
}

fn default_true() -> bool {
    true
}
fn default_word_dim() -> usize {
    300
}
fn default_char_dim() -> usize {
    30
}
fn default_label_dim() -> usize {
    32
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchitectureConfig {
    pub kind: ArchitectureKind,
    pub hidden: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub drop_rate: f64,
    pub emb_norm: f64,
    #[serde(default = "default_true")]
    pub bidirectional: bool,
    #[serde(default)]
    pub freeze_embeddings: bool,
    #[serde(default)]
    pub seed: u64,
    /// Word vector size when no pretrained table is given.
    #[serde(default = "default_word_dim")]
    pub word_dim: usize,
    #[serde(default = "default_char_dim")]
    pub char_dim: usize,
    /// Size of the previous-label embedding fed to ENCODER/ATTENTION decoders.
    #[serde(default = "default_label_dim")]
    pub label_dim: usize,
}

impl ArchitectureConfig {
    pub fn new(kind: ArchitectureKind, hidden: usize) -> Self {
        ArchitectureConfig {
            kind,
            hidden,
            epochs: 10,
            batch_size: 10,
            lr: 0.001,
            drop_rate: 0.0,
            emb_norm: 6.0,
            bidirectional: true,
            freeze_embeddings: false,
            seed: 0,
            word_dim: default_word_dim(),
            char_dim: default_char_dim(),
            label_dim: default_label_dim(),
        }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        let bad = |m: String| Err(NnError::Config(m));
        if self.hidden == 0 {
            return bad("hidden size must be positive".into());
        }
        if self.bidirectional && self.hidden % 2 != 0 {
            return bad(format!("hidden {} must be even for a bidirectional model", self.hidden));
        }
        if self.kind == ArchitectureKind::Lstm2Ch && self.hidden % 4 != 0 {
            return bad(format!("hidden {} must be divisible by 4 for LSTM-2CH", self.hidden));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return bad(format!("drop rate {} outside [0, 1)", self.drop_rate));
        }
        if !(self.emb_norm > 0.0) {
            return bad(format!("embedding norm {} must be positive", self.emb_norm));
        }
        if self.word_dim == 0 || self.char_dim == 0 || self.label_dim == 0 {
            return bad("embedding sizes must be positive".into());
        }
        Ok(())
    }

    /// Hidden size of each recurrent direction in the main encoder.
    pub fn direction_size(&self) -> usize {
        let channel = if self.kind == ArchitectureKind::Lstm2Ch {
            self.hidden / 2
        } else {
            self.hidden
        };
        if self.bidirectional {
            channel / 2
        } else {
            channel
        }
    }
}

pub const UNKNOWN_WORD: &str = "<unk>";

/// Word ids and per-word character ids of one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoded {
    pub words: Vec<usize>,
    pub chars: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Parts {
    word_emb: ParamId,
    static_emb: Option<ParamId>,
    char_conv: Option<CharConv>,
    encoder: Encoder,
    second: Option<Encoder>,
    convs: Vec<(ParamId, ParamId, usize)>,
    token_fc: Option<Linear>,
    init_fc: Option<Linear>,
    decoder: Option<crate::cells::Cell>,
    label_emb: Option<ParamId>,
    attention: Option<Linear>,
    output: Linear,
    transitions: Option<ParamId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeuralTagger {
    pub config: ArchitectureConfig,
    pub vocab: Vec<String>,
    pub chars: Vec<char>,
    pub labels: Vec<String>,
    pub store: ParamStore,
    parts: Parts,
    word_index: HashMap<String, usize>,
    char_index: HashMap<char, usize>,
}

enum Head {
    Tokens(Vec<NodeId>),
    Crf { emissions: NodeId, transitions: NodeId },
}

/// Builds the model for `config`. Row 0 of `vocab` must be [`UNKNOWN_WORD`];
/// character ids start after the pad and unknown ids. Rows of the word
/// embedding with a pretrained vector start from it.
pub fn build_tagger(
    config: &ArchitectureConfig,
    vocab: &[String],
    chars: &[char],
    labels: &[String],
    pretrained: Option<&EmbeddingTable>,
    rng: &mut ChaCha8Rng,
) -> Result<NeuralTagger, NnError> {
    config.validate()?;
    if vocab.first().map(String::as_str) != Some(UNKNOWN_WORD) {
        return Err(NnError::Config(format!("vocabulary must start with {UNKNOWN_WORD}")));
    }
    if labels.is_empty() {
        return Err(NnError::Config("empty label set".into()));
    }
    let mut config = config.clone();
    if let Some(t) = pretrained {
        config.word_dim = t.dimension;
    }
    let d = config.word_dim;
    let x = config.hidden;
    let nl = labels.len();
    let kind = config.kind;
    let mut store = ParamStore::new();

    let pretrained_matrix = |rng: &mut ChaCha8Rng| {
        let mut m = uniform(rng, &[vocab.len(), d], d);
        if let Some(t) = pretrained {
            for (i, w) in vocab.iter().enumerate() {
                if let Some(v) = t.get(w) {
                    m.row_mut(i).copy_from_slice(v);
                }
            }
        }
        m
    };

    let (word_emb, static_emb) = if kind == ArchitectureKind::Lstm2Ch {
        let stat = pretrained_matrix(rng);
        let stat = store.add("static_emb", stat, false);
        let dynamic = store.add("word_emb", uniform(rng, &[vocab.len(), d], d), true);
        (dynamic, Some(stat))
    } else {
        let frozen = config.freeze_embeddings || kind == ArchitectureKind::Conv;
        let m = pretrained_matrix(rng);
        (store.add("word_emb", m, !frozen), None)
    };

    let char_conv = kind
        .uses_chars()
        .then(|| CharConv::new(&mut store, "chars", chars.len() + 2, config.char_dim, (x / 2).max(1), rng));
    let input = d + char_conv.map_or(0, |c| c.n_filters);

    let cell = match kind {
        ArchitectureKind::Rnn => CellKind::Elman,
        ArchitectureKind::Gru
        | ArchitectureKind::Conv
        | ArchitectureKind::FcInit
        | ArchitectureKind::Encoder
        | ArchitectureKind::Attention => CellKind::Gru,
        _ => CellKind::Lstm,
    };
    let enc_size = if kind == ArchitectureKind::Lstm2Ch { x / 2 } else { x };
    let encoder = Encoder::new(&mut store, "encoder", cell, input, enc_size, config.bidirectional, rng);
    let second = (kind == ArchitectureKind::Lstm2Ch)
        .then(|| Encoder::new(&mut store, "static_encoder", cell, d, enc_size, config.bidirectional, rng));

    let mut convs = Vec::new();
    let mut token_fc = None;
    let mut init_fc = None;
    match kind {
        ArchitectureKind::Conv => {
            let f = (x / 2).max(1);
            for w in 1..=3 {
                let fan = w * d;
                let filt = store.add(format!("conv{w}.filters"), uniform(rng, &[f, fan], fan), true);
                let bias = store.add(format!("conv{w}.bias"), uniform(rng, &[f], fan), true);
                convs.push((filt, bias, w));
            }
            init_fc = Some(Linear::new(&mut store, "init", 3 * f, encoder.output_size(), rng));
        }
        ArchitectureKind::FcInit => {
            token_fc = Some(Linear::new(&mut store, "token_fc", d, x, rng));
            init_fc = Some(Linear::new(&mut store, "init", x, encoder.output_size(), rng));
        }
        _ => {}
    }

    let enc_out = encoder.output_size() + second.map_or(0, |e| e.output_size());
    let (decoder, label_emb, attention) = if kind.is_decoder() {
        let le = store.add("label_emb", uniform(rng, &[nl + 1, config.label_dim], config.label_dim), true);
        let dec_in = config.label_dim + if kind == ArchitectureKind::Attention { enc_out } else { 0 };
        let dec = crate::cells::Cell::new(&mut store, "decoder", CellKind::Gru, dec_in, enc_out, rng);
        let att = (kind == ArchitectureKind::Attention).then(|| Linear::new(&mut store, "attention", d + enc_out, enc_out, rng));
        (Some(dec), Some(le), att)
    } else {
        (None, None, None)
    };

    let output = Linear::new(&mut store, "output", enc_out, nl, rng);
    let transitions = kind
        .uses_crf()
        .then(|| store.add("transitions", uniform(rng, &[nl + 2, nl + 2], nl + 2), true));

    let parts = Parts {
        word_emb,
        static_emb,
        char_conv,
        encoder,
        second,
        convs,
        token_fc,
        init_fc,
        decoder,
        label_emb,
        attention,
        output,
        transitions,
    };
    Ok(NeuralTagger {
        config,
        word_index: vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect(),
        char_index: chars.iter().enumerate().map(|(i, &c)| (c, i + 2)).collect(),
        vocab: vocab.to_vec(),
        chars: chars.to_vec(),
        labels: labels.to_vec(),
        store,
        parts,
    })
}

/// `<unk>` followed by the sorted union of training keys and keys with a
/// pretrained vector.
pub fn build_vocab(train: &[Sentence], pretrained: Option<&EmbeddingTable>) -> Vec<String> {
    let mut set: BTreeSet<String> = train.iter().flat_map(|s| s.tokens.iter().map(|t| t.key())).collect();
    if let Some(t) = pretrained {
        set.extend(t.vectors.keys().cloned());
    }
    set.remove(UNKNOWN_WORD);
    std::iter::once(UNKNOWN_WORD.to_string()).chain(set).collect()
}

pub fn build_charset(train: &[Sentence]) -> Vec<char> {
    let set: BTreeSet<char> = train.iter().flat_map(|s| s.tokens.iter().flat_map(|t| t.surface.chars())).collect();
    set.into_iter().collect()
}

/// Dropout source; `None` disables dropout.
pub type DropoutRng<'r> = Option<&'r mut ChaCha8Rng>;

impl NeuralTagger {
    pub fn kind(&self) -> ArchitectureKind {
        self.config.kind
    }

    pub fn num_parameters(&self) -> usize {
        self.store.num_parameters(true)
    }

    pub fn transitions(&self) -> Option<ParamId> {
        self.parts.transitions
    }

    /// Trainable embedding matrices subject to the max-norm constraint.
    pub fn embedding_params(&self) -> Vec<ParamId> {
        let mut v = vec![self.parts.word_emb];
        if let Some(c) = self.parts.char_conv {
            v.push(c.emb);
        }
        v.retain(|&p| self.store.is_trainable(p));
        v
    }

    /// Encoder cells of the main channel (forward, backward).
    pub fn encoder(&self) -> &Encoder {
        &self.parts.encoder
    }

    pub fn second_encoder(&self) -> Option<&Encoder> {
        self.parts.second.as_ref()
    }

    pub fn encode(&self, sentence: &Sentence) -> Encoded {
        let words = sentence
            .tokens
            .iter()
            .map(|t| self.word_index.get(&vocab_key(&t.surface)).copied().unwrap_or(0))
            .collect();
        let chars = sentence
            .tokens
            .iter()
            .map(|t| t.surface.chars().map(|c| self.char_index.get(&c).copied().unwrap_or(CHAR_UNK)).collect())
            .collect();
        Encoded { words, chars }
    }

    pub fn label_ids(&self, tags: &[String]) -> Vec<Option<usize>> {
        tags.iter().map(|t| self.labels.iter().position(|l| l == t)).collect()
    }

    fn dropout(&self, g: &mut Graph, x: NodeId, rng: &mut DropoutRng) -> Result<NodeId, NnError> {
        let p = self.config.drop_rate;
        match rng {
            Some(r) if p > 0.0 => {
                let keep = 1.0 / (1.0 - p);
                let mask = (0..g.value(x).len()).map(|_| if r.gen::<f64>() < p { 0.0 } else { keep }).collect();
                g.mask(x, mask)
            }
            _ => Ok(x),
        }
    }

    fn forward(&self, g: &mut Graph, s: &Encoded, gold: Option<&[usize]>, rng: &mut DropoutRng) -> Result<Head, NnError> {
        let n = s.words.len();
        if n == 0 {
            return Err(NnError::Data("empty sentence".into()));
        }
        let p = &self.parts;
        let kind = self.kind();
        let emb: Vec<NodeId> = s.words.iter().map(|&w| g.lookup(p.word_emb, w)).collect::<Result<_, _>>()?;

        let mut inputs = Vec::with_capacity(n);
        let char_conv = p.char_conv.map(|c| c.bind(g));
        for i in 0..n {
            let mut x = self.dropout(g, emb[i], rng)?;
            if let Some(cc) = &char_conv {
                let ch = cc.embed(g, &s.chars[i])?;
                x = g.concat(&[x, ch])?;
            }
            inputs.push(x);
        }

        let init = match kind {
            ArchitectureKind::Conv => Some(self.conv_init(g, &emb)?),
            ArchitectureKind::FcInit => Some(self.fc_init(g, &emb)?),
            _ => None,
        };
        let init = match init {
            None => None,
            Some(h) => Some(self.split_init(g, h)?),
        };

        let encoder = p.encoder.bind(g);
        let (mut outs, summary) = encoder.run(g, &inputs, init)?;
        if let Some(second) = p.second {
            let stat = p.static_emb.expect("second channel has static embeddings");
            let xs: Vec<NodeId> = s
                .words
                .iter()
                .map(|&w| {
                    let e = g.lookup(stat, w)?;
                    self.dropout(g, e, rng)
                })
                .collect::<Result<_, _>>()?;
            let enc2 = second.bind(g);
            let (outs2, _) = enc2.run(g, &xs, None)?;
            outs = outs
                .iter()
                .zip(&outs2)
                .map(|(&a, &b)| g.concat(&[a, b]))
                .collect::<Result<_, _>>()?;
        }

        if kind.is_decoder() {
            return self.decode_steps(g, &emb, &outs, summary, gold, rng).map(Head::Tokens);
        }

        let out = p.output.bind(g);
        let mut logits = Vec::with_capacity(n);
        for &h in &outs {
            let h = self.dropout(g, h, rng)?;
            logits.push(out.apply(g, h)?);
        }
        match p.transitions {
            Some(t) => {
                let emissions = g.stack(&logits)?;
                let transitions = g.param(t);
                Ok(Head::Crf { emissions, transitions })
            }
            None => Ok(Head::Tokens(logits)),
        }
    }

    /// Splits an initial-state vector between the two directions.
    fn split_init(&self, g: &mut Graph, h: NodeId) -> Result<(NodeId, Option<NodeId>), NnError> {
        let e = &self.parts.encoder;
        match e.bwd {
            None => Ok((h, None)),
            Some(b) => {
                let f = g.slice(h, 0, e.fwd.hidden)?;
                let r = g.slice(h, e.fwd.hidden, b.hidden)?;
                Ok((f, Some(r)))
            }
        }
    }

    fn conv_init(&self, g: &mut Graph, emb: &[NodeId]) -> Result<NodeId, NnError> {
        let mut rows = emb.to_vec();
        let d = self.config.word_dim;
        while rows.len() < 3 {
            rows.push(g.constant(Tensor::zeros(&[d])));
        }
        let m = g.stack(&rows)?;
        let mut pooled = Vec::new();
        for &(f, b, w) in &self.parts.convs {
            let (fn_, bn) = (g.param(f), g.param(b));
            let c = g.conv1d(m, fn_, bn, w)?;
            let c = g.relu(c);
            pooled.push(g.max_over_time(c)?);
        }
        let feats = g.concat(&pooled)?;
        let fc = self.parts.init_fc.expect("CONV has an init layer").bind(g);
        let h = fc.apply(g, feats)?;
        Ok(g.tanh(h))
    }

    fn fc_init(&self, g: &mut Graph, emb: &[NodeId]) -> Result<NodeId, NnError> {
        let tok = self.parts.token_fc.expect("FC-INIT has a token layer").bind(g);
        let mut rows = Vec::with_capacity(emb.len());
        for &e in emb {
            let h = tok.apply(g, e)?;
            rows.push(g.relu(h));
        }
        let m = g.stack(&rows)?;
        let pooled = g.mean_rows(m)?;
        let fc = self.parts.init_fc.expect("FC-INIT has an init layer").bind(g);
        let h = fc.apply(g, pooled)?;
        Ok(g.tanh(h))
    }

    /// Emits exactly one label per word. The previous label is the gold one
    /// when `gold` is given and the greedy prediction otherwise.
    fn decode_steps(
        &self,
        g: &mut Graph,
        emb: &[NodeId],
        enc_outs: &[NodeId],
        summary: NodeId,
        gold: Option<&[usize]>,
        rng: &mut DropoutRng,
    ) -> Result<Vec<NodeId>, NnError> {
        let p = &self.parts;
        let dec = p.decoder.expect("decoder architecture").bind(g);
        let label_emb = p.label_emb.expect("decoder architecture");
        let out = p.output.bind(g);
        let attention = p.attention.map(|a| a.bind(g));
        let memory = match attention {
            Some(_) => Some(g.stack(enc_outs)?),
            None => None,
        };
        let start = self.labels.len();
        let mut prev = start;
        let mut state = dec.state_from(g, summary);
        let mut logits = Vec::with_capacity(emb.len());
        for i in 0..emb.len() {
            let le = g.lookup(label_emb, prev)?;
            let mut x = self.dropout(g, le, rng)?;
            if let (Some(att), Some(mem)) = (&attention, memory) {
                let q_in = g.concat(&[emb[i], state.h])?;
                let q = att.apply(g, q_in)?;
                let scores = g.matvec(mem, q)?;
                let alpha = g.softmax(scores)?;
                let ctx = g.mat_t_vec(mem, alpha)?;
                x = g.concat(&[x, ctx])?;
            }
            state = dec.step(g, x, state)?;
            let h = self.dropout(g, state.h, rng)?;
            let z = out.apply(g, h)?;
            prev = match gold {
                Some(y) => y[i],
                None => g.value(z).argmax(),
            };
            logits.push(z);
        }
        Ok(logits)
    }

    /// Training loss of one sentence: summed token cross-entropy, or the CRF
    /// negative log-likelihood.
    pub fn loss(&self, g: &mut Graph, s: &Encoded, gold: &[usize], rng: &mut DropoutRng) -> Result<NodeId, NnError> {
        if gold.len() != s.words.len() {
            return Err(NnError::Data(format!("{} labels for {} words", gold.len(), s.words.len())));
        }
        match self.forward(g, s, Some(gold), rng)? {
            Head::Tokens(logits) => {
                let parts = logits
                    .iter()
                    .zip(gold)
                    .map(|(&z, &y)| g.softmax_ce(z, y))
                    .collect::<Result<Vec<_>, _>>()?;
                g.add_all(&parts)
            }
            Head::Crf { emissions, transitions } => g.crf_nll(emissions, transitions, gold),
        }
    }

    pub fn predict_ids(&self, s: &Encoded) -> Result<Vec<usize>, NnError> {
        let mut g = Graph::new(&self.store);
        match self.forward(&mut g, s, None, &mut None)? {
            Head::Tokens(logits) => Ok(logits.iter().map(|&z| g.value(z).argmax()).collect()),
            Head::Crf { emissions, transitions } => Ok(crf::viterbi(g.value(emissions), g.value(transitions)).0),
        }
    }

    pub fn tag(&self, sentence: &Sentence) -> Result<Vec<String>, NnError> {
        let ids = self.predict_ids(&self.encode(sentence))?;
        Ok(ids.into_iter().map(|i| self.labels[i].clone()).collect())
    }

    /// Per-position label distributions of a per-token softmax model; `None`
    /// for CRF models.
    pub fn distributions(&self, sentence: &Sentence) -> Result<Option<Vec<Vec<f64>>>, NnError> {
        let mut g = Graph::new(&self.store);
        match self.forward(&mut g, &self.encode(sentence), None, &mut None)? {
            Head::Tokens(logits) => Ok(Some(logits.iter().map(|&z| softmax(g.value(z).data())).collect())),
            Head::Crf { .. } => Ok(None),
        }
    }

    /// Rebuilds the index maps after deserialization.
    fn reindex(&mut self) {
        self.word_index = self.vocab.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        self.char_index = self.chars.iter().enumerate().map(|(i, &c)| (c, i + 2)).collect();
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TaggerData {
    pub config: ArchitectureConfig,
    pub vocab: Vec<String>,
    pub chars: Vec<char>,
    pub labels: Vec<String>,
    pub store: ParamStore,
    parts: Parts,
}

impl From<&NeuralTagger> for TaggerData {
    fn from(t: &NeuralTagger) -> Self {
        TaggerData {
            config: t.config.clone(),
            vocab: t.vocab.clone(),
            chars: t.chars.clone(),
            labels: t.labels.clone(),
            store: t.store.clone(),
            parts: t.parts.clone(),
        }
    }
}

impl From<TaggerData> for NeuralTagger {
    fn from(d: TaggerData) -> Self {
        let mut t = NeuralTagger {
            config: d.config,
            vocab: d.vocab,
            chars: d.chars,
            labels: d.labels,
            store: d.store,
            parts: d.parts,
            word_index: HashMap::new(),
            char_index: HashMap::new(),
        };
        t.reindex();
        t
    }
}
