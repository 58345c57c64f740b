//! The full trainable model: embedding table, context encoder, capsule
//! decomposer, attention composition and the matching (or classification)
//! head, all over one parameter store.

use serde::{Deserialize, Serialize};

use crate::capsule;
use crate::compose::{self, AttentionWeights, SenseRepresentation};
use crate::context::{
    self, encoder_param_names, window_bounds, ContextRepr, Sentence, ToyEncoderConfig, Vocab,
    EMBED_TABLE,
};
use crate::error::{Error, Result};
use crate::matcher::{self, MatchClassifier};
use crate::numerics::{Graph, NodeId, ParamInit, ParameterStore, RealVector};

/// Which encoder supplies the context representation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EncoderKind {
    /// Trainable embedding + self-attention encoder.
    Toy { layers: usize },
    /// Per-token vectors supplied from outside at inference time.
    Precomputed,
}

/// Component switches for ablation experiments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ablation {
    /// Pass the expanded embeddings straight to attention composition,
    /// skipping the routing layers.
    pub no_capsule: bool,
    /// Drop the global-context attention branch.
    pub no_global: bool,
    /// Drop the local-context attention branch.
    pub no_local: bool,
    /// Train a per-sense classification head instead of pair matching.
    pub classification_head: bool,
}

impl Ablation {
    pub fn any(&self) -> bool {
        self.no_capsule || self.no_global || self.no_local || self.classification_head
    }
}

/// All structural hyperparameters. The seed fixes parameter initialization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Number of decomposed vectors.
    pub capsules: usize,
    /// Routing layers in the capsule stack.
    pub layers: usize,
    /// Routing iterations per layer.
    pub routing_iters: usize,
    /// Embedding dimension.
    pub embed_dim: usize,
    /// Capsule dimension; must equal the context dimension.
    pub capsule_dim: usize,
    /// Local window size (even).
    pub window: usize,
    pub encoder: EncoderKind,
    /// Scale attention logits by `1/sqrt(d)` instead of raw dot products.
    pub scaled_attention: bool,
    /// Feed the contextual vector of the target to the decomposer instead
    /// of its static embedding.
    pub contextual_target: bool,
    pub ablation: Ablation,
    pub seed: u64,
    /// Class list for the classification head, as (lemma, sense_id) pairs.
    #[serde(default)]
    pub sense_classes: Option<Vec<(String, String)>>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            capsules: 10,
            layers: 3,
            routing_iters: 3,
            embed_dim: 64,
            capsule_dim: 64,
            window: 10,
            encoder: EncoderKind::Toy { layers: 1 },
            scaled_attention: false,
            contextual_target: false,
            ablation: Ablation::default(),
            seed: 42,
            sense_classes: None,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.capsules == 0 || self.embed_dim == 0 || self.capsule_dim == 0 {
            return Err(Error::arg("capsules and dimensions must be positive"));
        }
        if !self.ablation.no_capsule && (self.layers == 0 || self.routing_iters == 0) {
            return Err(Error::arg("layers and routing_iters must be at least 1"));
        }
        if self.window % 2 != 0 {
            return Err(Error::arg(format!("window must be even, got {}", self.window)));
        }
        if let EncoderKind::Toy { layers } = self.encoder {
            if layers == 0 {
                return Err(Error::arg("toy encoder needs at least one layer"));
            }
            // Attention takes dot products of capsules against context
            // vectors, so their dimensions must agree.
            if self.capsule_dim != self.embed_dim {
                return Err(Error::arg(
                    "toy encoder requires capsule_dim == embed_dim (context and capsule spaces must match)",
                ));
            }
        }
        if self.ablation.classification_head {
            match &self.sense_classes {
                Some(classes) if !classes.is_empty() => {}
                _ => {
                    return Err(Error::arg(
                        "classification head requires a non-empty sense class list",
                    ))
                }
            }
        }
        Ok(())
    }

    fn pair_feature_dim(&self) -> usize {
        4 * self.capsule_dim
    }
}

/// Parameter node handles for one graph.
pub(crate) struct BoundModel {
    pub table: NodeId,
    pub encoder: Vec<(NodeId, NodeId, NodeId)>,
    pub expansion: Vec<NodeId>,
    pub routing: Vec<Vec<Vec<NodeId>>>,
    pub classifier: Option<(NodeId, NodeId)>,
    pub head: Option<(NodeId, NodeId)>,
}

/// Node handles of one sense-representation forward pass.
pub(crate) struct SenseNodes {
    pub q: NodeId,
    pub capsules: Vec<NodeId>,
    pub context_specific: Vec<NodeId>,
    pub weights: NodeId,
    pub attn_global: Option<Vec<NodeId>>,
    pub attn_local: Option<Vec<NodeId>>,
    pub window: (usize, usize),
}

/// Attention rows extracted from a forward pass, when the branch exists.
#[derive(Debug, Clone)]
pub struct AttentionReport {
    pub global: Option<Vec<RealVector>>,
    pub local: Option<Vec<RealVector>>,
    pub window: (usize, usize),
}

/// Everything the inspection commands need from one occurrence.
#[derive(Debug, Clone)]
pub struct SenseAnalysis {
    pub representation: SenseRepresentation,
    pub capsules: Vec<RealVector>,
    pub attention: AttentionReport,
}

/// The checkpointable model: config, vocabulary and parameters.
#[derive(Debug, Clone)]
pub struct DecompositionModel {
    config: ModelConfig,
    vocab: Vocab,
    params: ParameterStore,
}

impl DecompositionModel {
    /// Initializes all parameters from the config seed.
    pub fn new(config: ModelConfig, vocab: Vocab) -> Result<Self> {
        config.validate()?;
        let mut params = ParameterStore::new();
        let mut init = ParamInit::new(config.seed);

        let enc_cfg = ToyEncoderConfig {
            dim: config.embed_dim,
            layers: match config.encoder {
                EncoderKind::Toy { layers } => layers,
                EncoderKind::Precomputed => 0,
            },
        };
        // The embedding table always exists: the decomposer consumes the
        // target's static embedding even when contexts are precomputed.
        params.insert_matrix(
            EMBED_TABLE,
            init.matrix(vocab.len(), config.embed_dim, config.embed_dim)?,
        )?;
        if enc_cfg.layers > 0 {
            for name in encoder_param_names(enc_cfg.layers) {
                params.insert_matrix(&name, init.matrix(enc_cfg.dim, enc_cfg.dim, enc_cfg.dim)?)?;
            }
        }

        for i in 0..config.capsules {
            params.insert_matrix(
                &format!("caps.expand.{i}"),
                init.matrix(config.embed_dim, config.capsule_dim, config.embed_dim)?,
            )?;
        }
        if !config.ablation.no_capsule {
            for l in 0..config.layers {
                for i in 0..config.capsules {
                    for j in 0..config.capsules {
                        params.insert_matrix(
                            &format!("caps.route.l{l}.i{i}.j{j}"),
                            init.matrix(config.capsule_dim, config.capsule_dim, config.capsule_dim)?,
                        )?;
                    }
                }
            }
        }

        if config.ablation.classification_head {
            let classes = config.sense_classes.as_ref().expect("validated").len();
            params.insert_matrix(
                "head.weight",
                init.matrix(config.capsule_dim, classes, config.capsule_dim)?,
            )?;
            params.insert_vector("head.bias", RealVector::zeros(classes)?)?;
        } else {
            let fdim = config.pair_feature_dim();
            params.insert_matrix("clf.weight", init.matrix(fdim, 2, fdim)?)?;
            params.insert_vector("clf.bias", RealVector::zeros(2)?)?;
        }

        Ok(DecompositionModel {
            config,
            vocab,
            params,
        })
    }

    pub(crate) fn from_parts(
        config: ModelConfig,
        vocab: Vocab,
        params: ParameterStore,
    ) -> Result<Self> {
        config.validate()?;
        Ok(DecompositionModel {
            config,
            vocab,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn vocab(&self) -> &Vocab {
        &self.vocab
    }

    pub fn params(&self) -> &ParameterStore {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterStore {
        &mut self.params
    }

    /// The matching classifier as a value-level view.
    pub fn classifier(&self) -> Result<MatchClassifier> {
        MatchClassifier::new(self.params.matrix("clf.weight")?, self.params.vector("clf.bias")?)
    }

    pub(crate) fn bind(&self, graph: &mut Graph) -> Result<BoundModel> {
        let cfg = &self.config;
        let table = graph.param(&self.params, EMBED_TABLE)?;
        let encoder = match cfg.encoder {
            EncoderKind::Toy { layers } => encoder_param_names(layers)
                .chunks(3)
                .map(|chunk| {
                    Ok((
                        graph.param(&self.params, &chunk[0])?,
                        graph.param(&self.params, &chunk[1])?,
                        graph.param(&self.params, &chunk[2])?,
                    ))
                })
                .collect::<Result<Vec<_>>>()?,
            EncoderKind::Precomputed => Vec::new(),
        };
        let expansion = (0..cfg.capsules)
            .map(|i| graph.param(&self.params, &format!("caps.expand.{i}")))
            .collect::<Result<Vec<_>>>()?;
        let routing = if cfg.ablation.no_capsule {
            Vec::new()
        } else {
            (0..cfg.layers)
                .map(|l| {
                    (0..cfg.capsules)
                        .map(|i| {
                            (0..cfg.capsules)
                                .map(|j| {
                                    graph.param(&self.params, &format!("caps.route.l{l}.i{i}.j{j}"))
                                })
                                .collect::<Result<Vec<_>>>()
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()?
        };
        let classifier = if cfg.ablation.classification_head {
            None
        } else {
            Some((
                graph.param(&self.params, "clf.weight")?,
                graph.param(&self.params, "clf.bias")?,
            ))
        };
        let head = if cfg.ablation.classification_head {
            Some((
                graph.param(&self.params, "head.weight")?,
                graph.param(&self.params, "head.bias")?,
            ))
        } else {
            None
        };
        Ok(BoundModel {
            table,
            encoder,
            expansion,
            routing,
            classifier,
            head,
        })
    }

    /// Builds the sense-representation subgraph for one occurrence.
    pub(crate) fn sense_nodes(
        &self,
        graph: &mut Graph,
        bound: &BoundModel,
        sentence: &Sentence,
        precomputed: Option<&ContextRepr>,
    ) -> Result<SenseNodes> {
        let cfg = &self.config;
        let ids = self.vocab.ids(sentence);
        let embeds = context::lookup_nodes(graph, bound.table, &ids)?;

        let ctx: Vec<NodeId> = match cfg.encoder {
            EncoderKind::Toy { .. } => {
                context::toy_encode_nodes(graph, &embeds, &bound.encoder, cfg.embed_dim)?
            }
            EncoderKind::Precomputed => {
                let repr = precomputed.ok_or_else(|| {
                    Error::arg("model uses precomputed contexts; none supplied for this sentence")
                })?;
                if repr.len() != sentence.len() {
                    return Err(Error::dim("precomputed token count", sentence.len(), repr.len()));
                }
                if repr.dim() != cfg.capsule_dim {
                    return Err(Error::dim("precomputed dimension", cfg.capsule_dim, repr.dim()));
                }
                repr.vectors()
                    .iter()
                    .map(|v| graph.constant_vector(v))
                    .collect()
            }
        };

        let h = sentence.target_index();
        let target = if cfg.contextual_target { ctx[h] } else { embeds[h] };

        let capsules = if cfg.ablation.no_capsule {
            capsule::expand_nodes(graph, target, &bound.expansion)?
        } else {
            capsule::decompose_nodes(
                graph,
                target,
                &bound.expansion,
                &bound.routing,
                cfg.routing_iters,
                None,
            )?
        };

        let (start, end) = window_bounds(sentence.len(), h, cfg.window)?;
        let local_ctx: Vec<NodeId> = ctx[start..=end].to_vec();

        let mut attn_global = (!cfg.ablation.no_global).then(Vec::new);
        let mut attn_local = (!cfg.ablation.no_local).then(Vec::new);
        let mut enriched = Vec::with_capacity(capsules.len());
        for &cap in &capsules {
            let g_row = if let Some(rows) = attn_global.as_mut() {
                let row = compose::attention_row_nodes(graph, cap, &ctx, cfg.scaled_attention)?;
                rows.push(row);
                Some((row, ctx.as_slice()))
            } else {
                None
            };
            let l_row = if let Some(rows) = attn_local.as_mut() {
                let row =
                    compose::attention_row_nodes(graph, cap, &local_ctx, cfg.scaled_attention)?;
                rows.push(row);
                Some((row, local_ctx.as_slice()))
            } else {
                None
            };
            enriched.push(compose::enrich_capsule_nodes(graph, cap, g_row, l_row)?);
        }

        let (q, weights) = compose::l2norm_composition_nodes(graph, &enriched)?;
        Ok(SenseNodes {
            q,
            capsules,
            context_specific: enriched,
            weights,
            attn_global,
            attn_local,
            window: (start, end),
        })
    }

    /// Matching logits (2 classes) for a pair of sense nodes.
    pub(crate) fn match_logits_nodes(
        &self,
        graph: &mut Graph,
        bound: &BoundModel,
        q_left: NodeId,
        q_right: NodeId,
    ) -> Result<NodeId> {
        let (w, b) = bound
            .classifier
            .ok_or_else(|| Error::arg("model has no matching classifier (classification head)"))?;
        let features = matcher::pair_feature_nodes(graph, q_left, q_right)?;
        let affine = graph.vecmat(features, w)?;
        graph.add(affine, b)
    }

    /// Class logits of the classification head for one sense node.
    pub(crate) fn head_logits_nodes(
        &self,
        graph: &mut Graph,
        bound: &BoundModel,
        q: NodeId,
    ) -> Result<NodeId> {
        let (w, b) = bound
            .head
            .ok_or_else(|| Error::arg("model has no classification head"))?;
        let affine = graph.vecmat(q, w)?;
        graph.add(affine, b)
    }

    fn analysis_from_nodes(&self, graph: &Graph, nodes: &SenseNodes) -> Result<SenseAnalysis> {
        let collect = |ids: &Vec<NodeId>| -> Result<Vec<RealVector>> {
            ids.iter().map(|&id| graph.vector_value(id)).collect()
        };
        Ok(SenseAnalysis {
            representation: SenseRepresentation {
                q: graph.vector_value(nodes.q)?,
                weights: graph.vector_value(nodes.weights)?,
                context_specific: collect(&nodes.context_specific)?,
            },
            capsules: collect(&nodes.capsules)?,
            attention: AttentionReport {
                global: nodes.attn_global.as_ref().map(collect).transpose()?,
                local: nodes.attn_local.as_ref().map(collect).transpose()?,
                window: nodes.window,
            },
        })
    }

    /// Full forward pass for one occurrence using the model's own encoder.
    pub fn analyze(&self, sentence: &Sentence) -> Result<SenseAnalysis> {
        self.analyze_inner(sentence, None)
    }

    /// Forward pass with externally supplied context vectors.
    pub fn analyze_with_context(
        &self,
        sentence: &Sentence,
        ctx: &ContextRepr,
    ) -> Result<SenseAnalysis> {
        self.analyze_inner(sentence, Some(ctx))
    }

    fn analyze_inner(
        &self,
        sentence: &Sentence,
        ctx: Option<&ContextRepr>,
    ) -> Result<SenseAnalysis> {
        let mut graph = Graph::new();
        let bound = self.bind(&mut graph)?;
        let nodes = self.sense_nodes(&mut graph, &bound, sentence, ctx)?;
        self.analysis_from_nodes(&graph, &nodes)
    }

    /// The composed sense vector for one occurrence.
    pub fn sense_representation(&self, sentence: &Sentence) -> Result<SenseRepresentation> {
        Ok(self.analyze(sentence)?.representation)
    }

    /// Matching probability of two occurrences under the trained classifier.
    pub fn match_probability(&self, left: &Sentence, right: &Sentence) -> Result<f64> {
        let ql = self.sense_representation(left)?.q;
        let qr = self.sense_representation(right)?.q;
        matcher::match_probability(&ql, &qr, &self.classifier()?)
    }

    /// Class scores of the classification head for one occurrence.
    pub(crate) fn head_scores(&self, sentence: &Sentence) -> Result<Vec<f64>> {
        let mut graph = Graph::new();
        let bound = self.bind(&mut graph)?;
        let nodes = self.sense_nodes(&mut graph, &bound, sentence, None)?;
        let logits = self.head_logits_nodes(&mut graph, &bound, nodes.q)?;
        Ok(graph.value(logits).to_vec())
    }
}

/// Attention-weight forward dressed up for the composer's value-level API.
pub fn attention_weights(analysis: &SenseAnalysis) -> Option<AttentionWeights> {
    match (&analysis.attention.global, &analysis.attention.local) {
        (Some(g), Some(l)) => Some(AttentionWeights {
            global: g.clone(),
            local: l.clone(),
        }),
        _ => None,
    }
}
