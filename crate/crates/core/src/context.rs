//! Sentence handling and context encoding: per-token representations for
//! the whole sentence (global context) and a clamped window around the
//! target (local context).
//!
//! The heavyweight pre-trained encoders this design usually sits on are
//! replaced by a pluggable interface: a tiny trainable encoder (embedding
//! lookup plus single-head self-attention with a residual connection) or
//! verbatim ingestion of precomputed per-token vectors.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Graph, NodeId, ParamInit, ParameterStore, RealMatrix, RealVector};

pub const UNK_TOKEN: &str = "<unk>";

/// A tokenized sentence with the index of the target word.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    tokens: Vec<String>,
    target: usize,
}

impl Sentence {
    pub fn new(tokens: Vec<String>, target: usize) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::arg("a sentence needs at least one token"));
        }
        if target >= tokens.len() {
            return Err(Error::arg(format!(
                "target index {target} out of range for {} tokens",
                tokens.len()
            )));
        }
        Ok(Sentence { tokens, target })
    }

    /// Whitespace tokenization with lowercasing.
    pub fn parse(text: &str, target: usize) -> Result<Self> {
        let tokens = text
            .split_whitespace()
            .map(|t| t.to_lowercase())
            .collect::<Vec<_>>();
        Sentence::new(tokens, target)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn target_index(&self) -> usize {
        self.target
    }

    pub fn target_token(&self) -> &str {
        &self.tokens[self.target]
    }
}

/// Token-to-index mapping with a reserved unknown token at index 0.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Builds a vocabulary from tokens in first-seen order; the unknown
    /// token always occupies index 0.
    pub fn build<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut vocab = Vocab {
            tokens: vec![UNK_TOKEN.to_string()],
            index: HashMap::from([(UNK_TOKEN.to_string(), 0)]),
        };
        for t in tokens {
            vocab.intern(t.as_ref());
        }
        vocab
    }

    pub fn from_tokens(tokens: Vec<String>) -> Result<Self> {
        if tokens.first().map(String::as_str) != Some(UNK_TOKEN) {
            return Err(Error::arg("vocabulary must start with the unknown token"));
        }
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::arg(format!("duplicate vocabulary token '{t}'")));
            }
        }
        Ok(Vocab { tokens, index })
    }

    fn intern(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    /// Index of a token; unseen tokens map to the unknown index.
    pub fn lookup(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn ids(&self, sentence: &Sentence) -> Vec<usize> {
        sentence.tokens().iter().map(|t| self.lookup(t)).collect()
    }
}

/// Per-token context vectors for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextRepr {
    vectors: Vec<RealVector>,
}

impl ContextRepr {
    pub fn new(vectors: Vec<RealVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::arg("context representation cannot be empty"));
        }
        let dim = vectors[0].dim();
        if vectors.iter().any(|v| v.dim() != dim) {
            return Err(Error::arg("context vectors must share one dimension"));
        }
        Ok(ContextRepr { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dim(&self) -> usize {
        self.vectors[0].dim()
    }

    pub fn vectors(&self) -> &[RealVector] {
        &self.vectors
    }

    pub fn get(&self, i: usize) -> &RealVector {
        &self.vectors[i]
    }
}

/// A contiguous slice of the global context around the target word.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalContext {
    pub start: usize,
    pub end: usize,
    vectors: Vec<RealVector>,
}

impl LocalContext {
    pub fn vectors(&self) -> &[RealVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index <= self.end
    }
}

/// Clamped window bounds `[start, end]` for a target at `h` in a sentence
/// of `n` tokens with window size `window` (must be even).
pub fn window_bounds(n: usize, h: usize, window: usize) -> Result<(usize, usize)> {
    if h >= n {
        return Err(Error::arg(format!("target {h} out of range for {n} tokens")));
    }
    if window % 2 != 0 {
        return Err(Error::arg(format!("window size must be even, got {window}")));
    }
    let half = window / 2;
    let start = h.saturating_sub(half);
    let end = (h + half).min(n - 1);
    Ok((start, end))
}

/// Extracts the local context: vectors at indices `max(h - w/2, 0)` through
/// `min(h + w/2, n-1)` inclusive.
pub fn local_window(ctx: &ContextRepr, h: usize, window: usize) -> Result<LocalContext> {
    let (start, end) = window_bounds(ctx.len(), h, window)?;
    Ok(LocalContext {
        start,
        end,
        vectors: ctx.vectors()[start..=end].to_vec(),
    })
}

/// Settings of the tiny trainable encoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ToyEncoderConfig {
    /// Embedding table dimension; also the output dimension.
    pub dim: usize,
    /// Number of stacked self-attention blocks.
    pub layers: usize,
}

impl Default for ToyEncoderConfig {
    fn default() -> Self {
        ToyEncoderConfig { dim: 64, layers: 1 }
    }
}

impl ToyEncoderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.layers == 0 {
            return Err(Error::arg("toy encoder dim and layers must be positive"));
        }
        Ok(())
    }
}

pub(crate) const EMBED_TABLE: &str = "embed.table";

pub(crate) fn encoder_param_names(layers: usize) -> Vec<String> {
    let mut names = Vec::new();
    for l in 0..layers {
        for part in ["wq", "wk", "wv"] {
            names.push(format!("enc.l{l}.{part}"));
        }
    }
    names
}

/// Inserts the embedding table and the encoder projections into a store.
pub(crate) fn init_encoder_params(
    store: &mut ParameterStore,
    vocab_size: usize,
    cfg: &ToyEncoderConfig,
    init: &mut ParamInit,
) -> Result<()> {
    cfg.validate()?;
    store.insert_matrix(EMBED_TABLE, init.matrix(vocab_size, cfg.dim, cfg.dim)?)?;
    for name in encoder_param_names(cfg.layers) {
        store.insert_matrix(&name, init.matrix(cfg.dim, cfg.dim, cfg.dim)?)?;
    }
    Ok(())
}

/// Embedding lookup on the graph: one row per token id.
pub(crate) fn lookup_nodes(graph: &mut Graph, table: NodeId, ids: &[usize]) -> Result<Vec<NodeId>> {
    ids.iter().map(|&id| graph.row(table, id)).collect()
}

/// One self-attention block with residual connection over token nodes:
/// `out_i = x_i + sum_j softmax_j((q_i . k_j) / sqrt(d)) * v_j`.
pub(crate) fn attention_block_nodes(
    graph: &mut Graph,
    inputs: &[NodeId],
    wq: NodeId,
    wk: NodeId,
    wv: NodeId,
    dim: usize,
) -> Result<Vec<NodeId>> {
    let scale = 1.0 / (dim as f64).sqrt();
    let queries: Vec<NodeId> = inputs
        .iter()
        .map(|&x| graph.vecmat(x, wq))
        .collect::<Result<Vec<_>>>()?;
    let keys: Vec<NodeId> = inputs
        .iter()
        .map(|&x| graph.vecmat(x, wk))
        .collect::<Result<Vec<_>>>()?;
    let values: Vec<NodeId> = inputs
        .iter()
        .map(|&x| graph.vecmat(x, wv))
        .collect::<Result<Vec<_>>>()?;

    let mut out = Vec::with_capacity(inputs.len());
    for (i, &x) in inputs.iter().enumerate() {
        let mut logits = Vec::with_capacity(inputs.len());
        for &k in &keys {
            let d = graph.dot(queries[i], k)?;
            logits.push(graph.scale(d, scale));
        }
        let stacked = graph.stack(&logits)?;
        let weights = graph.softmax(stacked)?;
        let pooled = graph.weighted_sum_by(weights, &values)?;
        out.push(graph.add(x, pooled)?);
    }
    Ok(out)
}

/// Runs the toy encoder over already-bound parameter nodes, returning one
/// contextual node per token.
pub(crate) fn toy_encode_nodes(
    graph: &mut Graph,
    token_embeds: &[NodeId],
    layer_mats: &[(NodeId, NodeId, NodeId)],
    dim: usize,
) -> Result<Vec<NodeId>> {
    let mut current = token_embeds.to_vec();
    for &(wq, wk, wv) in layer_mats {
        current = attention_block_nodes(graph, &current, wq, wk, wv, dim)?;
    }
    Ok(current)
}

/// A self-contained trainable encoder: config, vocabulary and parameters.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    pub config: ToyEncoderConfig,
    pub vocab: Vocab,
    pub params: ParameterStore,
}

impl ToyEncoder {
    pub fn seeded(config: ToyEncoderConfig, vocab: Vocab, seed: u64) -> Result<Self> {
        let mut params = ParameterStore::new();
        let mut init = ParamInit::new(seed);
        init_encoder_params(&mut params, vocab.len(), &config, &mut init)?;
        Ok(ToyEncoder {
            config,
            vocab,
            params,
        })
    }
}

/// Precomputed per-sentence token vectors, keyed by the joined token text.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedEmbeddings {
    sentences: HashMap<String, ContextRepr>,
}

fn sentence_key(tokens: &[String]) -> String {
    tokens.join(" ")
}

impl PrecomputedEmbeddings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, sentence: &Sentence, repr: ContextRepr) -> Result<()> {
        if repr.len() != sentence.len() {
            return Err(Error::dim("precomputed token count", sentence.len(), repr.len()));
        }
        self.sentences.insert(sentence_key(sentence.tokens()), repr);
        Ok(())
    }

    pub fn get(&self, sentence: &Sentence) -> Option<&ContextRepr> {
        self.sentences.get(&sentence_key(sentence.tokens()))
    }

    /// Reads one sentence's vectors: a header line `n d`, then `n` lines of
    /// `d` space-separated floats in token order.
    pub fn load_file(path: &Path) -> Result<ContextRepr> {
        let text = std::fs::read_to_string(path)?;
        parse_embedding_text(&text, &path.display().to_string())
    }

    /// Writes vectors in the same format, using shortest round-trip float
    /// formatting so a load reproduces them bit-exactly.
    pub fn save_file(path: &Path, repr: &ContextRepr) -> Result<()> {
        let mut out = String::new();
        let _ = writeln!(out, "{} {}", repr.len(), repr.dim());
        for v in repr.vectors() {
            let line = v
                .values()
                .iter()
                .map(|x| x.to_string())
                .collect::<Vec<_>>()
                .join(" ");
            out.push_str(&line);
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

fn parse_embedding_text(text: &str, path: &str) -> Result<ContextRepr> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 1,
            msg: "empty embedding file".into(),
        })?;
    let mut parts = header.split_whitespace();
    let parse_usize = |s: Option<&str>, what: &str| -> Result<usize> {
        s.and_then(|x| x.parse().ok()).ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: 1,
            msg: format!("header must read 'n d'; bad {what}"),
        })
    };
    let n = parse_usize(parts.next(), "token count")?;
    let d = parse_usize(parts.next(), "dimension")?;

    let mut vectors = Vec::with_capacity(n);
    for _ in 0..n {
        let (lineno, line) = lines.next().ok_or_else(|| Error::Parse {
            path: path.to_string(),
            line: n + 1,
            msg: format!("expected {n} vector lines"),
        })?;
        let values = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>().map_err(|_| Error::Parse {
                    path: path.to_string(),
                    line: lineno + 1,
                    msg: format!("bad float '{s}'"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != d {
            return Err(Error::Parse {
                path: path.to_string(),
                line: lineno + 1,
                msg: format!("expected {d} values, found {}", values.len()),
            });
        }
        vectors.push(RealVector::new(values)?);
    }
    ContextRepr::new(vectors)
}

/// Which encoder produces the context representation.
#[derive(Debug, Clone)]
pub enum EncoderSpec {
    Toy(ToyEncoder),
    Precomputed(PrecomputedEmbeddings),
}

/// Static embedding lookup for each token of a sentence.
pub fn embed_lookup(
    sentence: &Sentence,
    table: &RealMatrix,
    vocab: &Vocab,
) -> Result<Vec<RealVector>> {
    if table.rows() != vocab.len() {
        return Err(Error::dim("embedding table rows", vocab.len(), table.rows()));
    }
    sentence
        .tokens()
        .iter()
        .map(|t| RealVector::new(table.row(vocab.lookup(t)).to_vec()))
        .collect()
}

/// Produces the per-token context representation for a sentence.
pub fn encode(sentence: &Sentence, spec: &EncoderSpec) -> Result<ContextRepr> {
    match spec {
        EncoderSpec::Toy(enc) => {
            let mut graph = Graph::new();
            let table = graph.param(&enc.params, EMBED_TABLE)?;
            let ids = enc.vocab.ids(sentence);
            let embeds = lookup_nodes(&mut graph, table, &ids)?;
            let mats = encoder_param_names(enc.config.layers)
                .chunks(3)
                .map(|chunk| {
                    Ok((
                        graph.param(&enc.params, &chunk[0])?,
                        graph.param(&enc.params, &chunk[1])?,
                        graph.param(&enc.params, &chunk[2])?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?;
            let out = toy_encode_nodes(&mut graph, &embeds, &mats, enc.config.dim)?;
            ContextRepr::new(
                out.iter()
                    .map(|&id| graph.vector_value(id))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        EncoderSpec::Precomputed(pre) => {
            let repr = pre.get(sentence).ok_or_else(|| {
                Error::arg(format!(
                    "no precomputed vectors for sentence '{}'",
                    sentence_key(sentence.tokens())
                ))
            })?;
            if repr.len() != sentence.len() {
                return Err(Error::dim("precomputed token count", sentence.len(), repr.len()));
            }
            Ok(repr.clone())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sent(text: &str, target: usize) -> Sentence {
        Sentence::parse(text, target).unwrap()
    }

    #[test]
    fn sentence_validation() {
        assert!(Sentence::new(vec![], 0).is_err());
        assert!(Sentence::new(vec!["a".into()], 1).is_err());
        assert_eq!(sent("The Cat", 1).target_token(), "cat");
    }

    #[test]
    fn lookup_known_oov_and_repeated_tokens() {
        let vocab = Vocab::build(["cat", "sat"]);
        let table = RealMatrix::new(
            3,
            2,
            vec![
                9.0, 9.0, // <unk>
                1.0, 2.0, // cat
                3.0, 4.0, // sat
            ],
        )
        .unwrap();
        let s = sent("cat sat zzz cat", 0);
        let vecs = embed_lookup(&s, &table, &vocab).unwrap();
        assert_eq!(vecs[0].values(), &[1.0, 2.0]);
        assert_eq!(vecs[1].values(), &[3.0, 4.0]);
        assert_eq!(vecs[2].values(), &[9.0, 9.0]); // OOV hits the unknown row
        assert_eq!(vecs[3].values(), vecs[0].values());
    }

    #[test]
    fn window_clamping() {
        assert_eq!(window_bounds(20, 5, 4).unwrap(), (3, 7));
        assert_eq!(window_bounds(20, 0, 4).unwrap(), (0, 2));
        assert_eq!(window_bounds(6, 3, 100).unwrap(), (0, 5));
        assert!(window_bounds(20, 5, 3).is_err()); // odd window
    }

    #[test]
    fn local_window_covers_whole_sentence_when_large() {
        let vectors = (0..4)
            .map(|i| RealVector::new(vec![i as f64]).unwrap())
            .collect();
        let ctx = ContextRepr::new(vectors).unwrap();
        let local = local_window(&ctx, 2, 100).unwrap();
        assert_eq!((local.start, local.end), (0, 3));
        assert_eq!(local.vectors().len(), 4);
        assert!(local.contains(2));
    }

    #[test]
    fn toy_encoder_shapes_and_determinism() {
        let vocab = Vocab::build(["a", "b", "c"]);
        let enc = ToyEncoder::seeded(ToyEncoderConfig { dim: 8, layers: 1 }, vocab, 3).unwrap();
        let spec = EncoderSpec::Toy(enc);
        let one = encode(&sent("a", 0), &spec).unwrap();
        assert_eq!(one.len(), 1);
        let s = sent("a b c b", 1);
        let x = encode(&s, &spec).unwrap();
        let y = encode(&s, &spec).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn zero_parameter_encoder_is_position_independent() {
        let vocab = Vocab::build(["a", "b"]);
        let cfg = ToyEncoderConfig { dim: 4, layers: 1 };
        let mut params = ParameterStore::new();
        params
            .insert_matrix(EMBED_TABLE, RealMatrix::zeros(vocab.len(), 4).unwrap())
            .unwrap();
        for name in encoder_param_names(1) {
            params
                .insert_matrix(&name, RealMatrix::zeros(4, 4).unwrap())
                .unwrap();
        }
        let enc = ToyEncoder {
            config: cfg,
            vocab,
            params,
        };
        let out = encode(&sent("a b a", 0), &EncoderSpec::Toy(enc)).unwrap();
        let first = out.get(0).clone();
        for v in out.vectors() {
            assert_eq!(v, &first);
        }
    }

    #[test]
    fn precomputed_roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sentence.emb");
        let ctx = ContextRepr::new(vec![
            RealVector::new(vec![0.1, -2.5e-17, 3.0]).unwrap(),
            RealVector::new(vec![1.0 / 3.0, 2.0f64.sqrt(), -0.0]).unwrap(),
        ])
        .unwrap();
        PrecomputedEmbeddings::save_file(&path, &ctx).unwrap();
        let loaded = PrecomputedEmbeddings::load_file(&path).unwrap();
        for (a, b) in ctx.vectors().iter().zip(loaded.vectors()) {
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn precomputed_token_count_mismatch_rejected() {
        let mut pre = PrecomputedEmbeddings::new();
        let s = sent("a b c", 0);
        let short = ContextRepr::new(vec![RealVector::zeros(2).unwrap()]).unwrap();
        assert!(pre.insert(&s, short).is_err());
    }
}
