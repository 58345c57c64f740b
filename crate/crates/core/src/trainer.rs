//! Siamese matching training and sense prediction.
//!
//! Both branches of a pair run through the same model (full parameter
//! sharing); gradients of the mean batch loss drive the optimizer. The
//! best-dev parameters are restored at the end of training.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::Sentence;
use crate::data::{SenseInventory, WSDInstance};
use crate::error::{Error, Result};
use crate::matcher::{match_probability, MatchingPair, MATCH_CLASS};
use crate::model::{Ablation, DecompositionModel};
use crate::numerics::{Graph, Optimizer, OptimizerSettings};

/// Training-loop settings.
#[derive(Debug, Clone, Copy)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerSettings,
    /// Negative gloss pairs per positive during pair generation.
    pub neg_ratio: usize,
    /// Component switches; must agree with the model they were built with.
    pub ablation: Ablation,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerSettings::default(),
            neg_ratio: 1,
            ablation: Ablation::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::arg("epochs and batch_size must be positive"));
        }
        if self.neg_ratio < 1 {
            return Err(Error::arg("neg_ratio must be at least 1"));
        }
        self.optimizer.validate()
    }
}

/// One metrics-log line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_accuracy: f64,
}

/// Per-epoch metrics plus which epoch's parameters the model now carries.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub epochs: Vec<EpochMetrics>,
    pub best_epoch: usize,
    pub best_dev_accuracy: f64,
}

impl TrainReport {
    /// Tab-separated log, one line per epoch: epoch, train_loss, dev_acc.
    pub fn metrics_log(&self) -> String {
        let mut out = String::new();
        for m in &self.epochs {
            let _ = writeln!(out, "{}\t{}\t{}", m.epoch, m.train_loss, m.dev_accuracy);
        }
        out
    }
}

fn param_norm_diagnostic(model: &DecompositionModel) -> String {
    let store = model.params();
    let mut total = 0.0f64;
    let mut worst = (String::new(), 0.0f64);
    for i in 0..store.len() {
        let sq: f64 = store.value_at(i).iter().map(|v| v * v).sum();
        total += sq;
        if sq > worst.1 {
            worst = (store.name_at(i).to_string(), sq);
        }
    }
    format!(
        "total param norm {:.4}, largest '{}' ({:.4})",
        total.sqrt(),
        worst.0,
        worst.1.sqrt()
    )
}

/// Loss of one pair on a fresh graph; backward is the caller's choice.
fn pair_loss(
    model: &DecompositionModel,
    pair: &MatchingPair,
) -> Result<(Graph, crate::numerics::NodeId)> {
    let mut graph = Graph::new();
    let bound = model.bind(&mut graph)?;
    let left = model.sense_nodes(&mut graph, &bound, &pair.left, None)?;
    let right = model.sense_nodes(&mut graph, &bound, &pair.right, None)?;
    let logits = model.match_logits_nodes(&mut graph, &bound, left.q, right.q)?;
    let class = if pair.gold { MATCH_CLASS } else { 1 - MATCH_CLASS };
    let loss = graph.cross_entropy_logits(logits, class)?;
    Ok((graph, loss))
}

/// Matching accuracy of the model on labeled pairs (threshold 0.5).
pub fn dev_matching_accuracy(model: &DecompositionModel, pairs: &[MatchingPair]) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let clf = model.classifier()?;
    let mut correct = 0usize;
    for pair in pairs {
        let ql = model.sense_representation(&pair.left)?.q;
        let qr = model.sense_representation(&pair.right)?.q;
        let p = match_probability(&ql, &qr, &clf)?;
        if (p > 0.5) == pair.gold {
            correct += 1;
        }
    }
    Ok(correct as f64 / pairs.len() as f64)
}

/// Trains the model on matching pairs, logging per-epoch train loss and dev
/// matching accuracy. The parameters of the best dev epoch are kept.
pub fn train(
    model: &mut DecompositionModel,
    pairs: &[MatchingPair],
    dev_pairs: &[MatchingPair],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if pairs.is_empty() {
        return Err(Error::arg("training needs a non-empty pair set"));
    }
    if cfg.ablation != model.config().ablation {
        return Err(Error::arg(
            "train config ablation flags disagree with the model",
        ));
    }
    if model.config().ablation.classification_head {
        return Err(Error::arg(
            "model carries a classification head; use train_classification",
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.config().seed ^ 0x74726e);
    let mut optimizer = Optimizer::new(cfg.optimizer)?;
    let mut order: Vec<usize> = (0..pairs.len()).collect();

    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_dev_accuracy: f64::NEG_INFINITY,
    };
    let mut best_snapshot = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_id, batch) in order.chunks(cfg.batch_size).enumerate() {
            let seed = 1.0 / batch.len() as f64;
            for &idx in batch {
                let (mut graph, loss) = pair_loss(model, &pairs[idx])?;
                let value = graph.scalar_value(loss);
                if !value.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss in epoch {epoch}, batch {batch_id}; {}",
                        param_norm_diagnostic(model)
                    )));
                }
                loss_sum += value;
                graph.backward(loss, seed)?;
                graph.accumulate_param_grads(model.params_mut())?;
            }
            optimizer.step(model.params_mut())?;
        }

        let train_loss = loss_sum / pairs.len() as f64;
        let dev_accuracy = dev_matching_accuracy(model, dev_pairs)?;
        report.epochs.push(EpochMetrics {
            epoch,
            train_loss,
            dev_accuracy,
        });
        if !dev_pairs.is_empty() && dev_accuracy > report.best_dev_accuracy {
            report.best_dev_accuracy = dev_accuracy;
            report.best_epoch = epoch;
            best_snapshot = Some(model.params().snapshot());
        }
    }

    if let Some(snapshot) = best_snapshot {
        model.params_mut().restore(&snapshot)?;
    } else {
        report.best_epoch = cfg.epochs;
        report.best_dev_accuracy = f64::NAN;
    }
    Ok(report)
}

fn class_index_of(model: &DecompositionModel, lemma: &str, sense_id: &str) -> Result<usize> {
    model
        .config()
        .sense_classes
        .as_ref()
        .and_then(|classes| {
            classes
                .iter()
                .position(|(l, s)| l == &lemma.to_lowercase() && s == sense_id)
        })
        .ok_or_else(|| {
            Error::arg(format!(
                "sense '{sense_id}' of '{lemma}' missing from the classification head"
            ))
        })
}

/// Trains the per-sense classification variant directly on labeled
/// occurrences. Dev accuracy is sense-prediction accuracy.
pub fn train_classification(
    model: &mut DecompositionModel,
    train_set: &[WSDInstance],
    dev_set: &[WSDInstance],
    inventory: &SenseInventory,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::arg("training needs a non-empty instance set"));
    }
    if !model.config().ablation.classification_head {
        return Err(Error::arg("model has no classification head; use train"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(model.config().seed ^ 0x74726e);
    let mut optimizer = Optimizer::new(cfg.optimizer)?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report = TrainReport {
        epochs: Vec::with_capacity(cfg.epochs),
        best_epoch: 0,
        best_dev_accuracy: f64::NEG_INFINITY,
    };
    let mut best_snapshot = None;

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (batch_id, batch) in order.chunks(cfg.batch_size).enumerate() {
            let seed = 1.0 / batch.len() as f64;
            for &idx in batch {
                let inst = &train_set[idx];
                let class = class_index_of(model, &inst.lemma, &inst.gold_sense_id)?;
                let sentence = inst.to_sentence()?;
                let mut graph = Graph::new();
                let bound = model.bind(&mut graph)?;
                let nodes = model.sense_nodes(&mut graph, &bound, &sentence, None)?;
                let logits = model.head_logits_nodes(&mut graph, &bound, nodes.q)?;
                let loss = graph.cross_entropy_logits(logits, class)?;
                let value = graph.scalar_value(loss);
                if !value.is_finite() {
                    return Err(Error::Training(format!(
                        "non-finite loss in epoch {epoch}, batch {batch_id}; {}",
                        param_norm_diagnostic(model)
                    )));
                }
                loss_sum += value;
                graph.backward(loss, seed)?;
                graph.accumulate_param_grads(model.params_mut())?;
            }
            optimizer.step(model.params_mut())?;
        }

        let train_loss = loss_sum / train_set.len() as f64;
        let dev_accuracy = if dev_set.is_empty() {
            f64::NAN
        } else {
            let correct = dev_set
                .iter()
                .filter(|inst| {
                    inst.to_sentence()
                        .and_then(|s| predict_sense(model, &s, &inst.lemma, inventory))
                        .is_ok_and(|pred| pred == inst.gold_sense_id)
                })
                .count();
            correct as f64 / dev_set.len() as f64
        };
        report.epochs.push(EpochMetrics {
            epoch,
            train_loss,
            dev_accuracy,
        });
        if !dev_set.is_empty() && dev_accuracy > report.best_dev_accuracy {
            report.best_dev_accuracy = dev_accuracy;
            report.best_epoch = epoch;
            best_snapshot = Some(model.params().snapshot());
        }
    }

    if let Some(snapshot) = best_snapshot {
        model.params_mut().restore(&snapshot)?;
    } else {
        report.best_epoch = cfg.epochs;
        report.best_dev_accuracy = f64::NAN;
    }
    Ok(report)
}

/// Matching score of an occurrence against every candidate sense, in
/// inventory order.
pub fn predict_sense_scored(
    model: &DecompositionModel,
    sentence: &Sentence,
    lemma: &str,
    inventory: &SenseInventory,
) -> Result<Vec<(String, f64)>> {
    let senses = inventory
        .senses(lemma)
        .ok_or_else(|| Error::UnknownLemma(lemma.to_string()))?;
    if senses.is_empty() {
        return Err(Error::UnknownLemma(lemma.to_string()));
    }

    if model.config().ablation.classification_head {
        let scores = model.head_scores(sentence)?;
        return senses
            .iter()
            .map(|s| {
                let class = class_index_of(model, lemma, &s.sense_id)?;
                Ok((s.sense_id.clone(), scores[class]))
            })
            .collect();
    }

    let clf = model.classifier()?;
    let q_occurrence = model.sense_representation(sentence)?.q;
    senses
        .iter()
        .map(|s| {
            let gloss = crate::data::gloss_sentence(lemma, &s.gloss)?;
            let q_gloss = model.sense_representation(&gloss)?.q;
            let p = match_probability(&q_occurrence, &q_gloss, &clf)?;
            Ok((s.sense_id.clone(), p))
        })
        .collect()
}

/// The candidate sense with the highest matching score; ties break toward
/// the lowest sense id.
pub fn predict_sense(
    model: &DecompositionModel,
    sentence: &Sentence,
    lemma: &str,
    inventory: &SenseInventory,
) -> Result<String> {
    let scored = predict_sense_scored(model, sentence, lemma, inventory)?;
    let mut best: Option<(&str, f64)> = None;
    for (sense, score) in &scored {
        best = match best {
            None => Some((sense, *score)),
            Some((bs, bp)) => {
                if *score > bp || (*score == bp && sense.as_str() < bs) {
                    Some((sense, *score))
                } else {
                    Some((bs, bp))
                }
            }
        };
    }
    Ok(best.expect("non-empty candidates").0.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::Vocab;
    use crate::model::ModelConfig;

    fn micro_model(seed: u64) -> DecompositionModel {
        let cfg = ModelConfig {
            capsules: 2,
            layers: 1,
            routing_iters: 2,
            embed_dim: 6,
            capsule_dim: 6,
            window: 2,
            seed,
            ..ModelConfig::default()
        };
        let vocab = Vocab::build(["river", "water", "money", "loan", "bank", ":"]);
        DecompositionModel::new(cfg, vocab).unwrap()
    }

    fn toy_pairs() -> Vec<MatchingPair> {
        let river = Sentence::parse("bank by the river water", 0).unwrap();
        let money = Sentence::parse("bank holds money loan", 0).unwrap();
        let river2 = Sentence::parse("water near the bank river", 3).unwrap();
        vec![
            MatchingPair::new(river.clone(), river2.clone(), "bank", true),
            MatchingPair::new(river, money.clone(), "bank", false),
            MatchingPair::new(money.clone(), money, "bank", true),
        ]
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let mut model = micro_model(3);
        let before = model.params().snapshot();
        let pairs = toy_pairs();
        let cfg = TrainConfig {
            epochs: 2,
            batch_size: 2,
            optimizer: OptimizerSettings::Sgd { lr: 0.0 },
            ..TrainConfig::default()
        };
        let report = train(&mut model, &pairs, &[], &cfg).unwrap();
        assert_eq!(model.params().snapshot(), before);
        // Constant parameters mean constant loss across epochs.
        let losses: Vec<f64> = report.epochs.iter().map(|m| m.train_loss).collect();
        assert!((losses[0] - losses[1]).abs() < 1e-12);
    }

    #[test]
    fn single_pair_is_memorized_quickly() {
        let mut model = micro_model(11);
        let pairs = vec![toy_pairs().remove(0)];
        let cfg = TrainConfig {
            epochs: 200,
            batch_size: 1,
            optimizer: OptimizerSettings::adam(0.01),
            ..TrainConfig::default()
        };
        let report = train(&mut model, &pairs, &[], &cfg).unwrap();
        let last = report.epochs.last().unwrap();
        assert!(
            last.train_loss < 0.01,
            "loss after 200 steps: {}",
            last.train_loss
        );
    }

    #[test]
    fn metrics_log_is_deterministic_under_seed() {
        let pairs = toy_pairs();
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 2,
            ..TrainConfig::default()
        };
        let run = || {
            let mut model = micro_model(21);
            train(&mut model, &pairs, &pairs, &cfg).unwrap().metrics_log()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn predict_sense_argmax_and_ties() {
        let model = micro_model(5);
        let mut inv = SenseInventory::new();
        inv.insert("bank", "bank%1", "money loan").unwrap();
        let s = Sentence::parse("bank money", 0).unwrap();
        // Single candidate: that sense regardless of scores.
        assert_eq!(predict_sense(&model, &s, "bank", &inv).unwrap(), "bank%1");

        inv.insert("bank", "bank%2", "river water").unwrap();
        let scored = predict_sense_scored(&model, &s, "bank", &inv).unwrap();
        let best = predict_sense(&model, &s, "bank", &inv).unwrap();
        let max = scored
            .iter()
            .map(|(_, p)| *p)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!(scored.iter().any(|(s, p)| *p == max && *s == best));

        assert!(matches!(
            predict_sense(&model, &s, "door", &inv),
            Err(Error::UnknownLemma(_))
        ));
    }

    #[test]
    fn ablation_mismatch_rejected() {
        let mut model = micro_model(2);
        let cfg = TrainConfig {
            ablation: Ablation {
                no_capsule: true,
                ..Ablation::default()
            },
            ..TrainConfig::default()
        };
        assert!(train(&mut model, &toy_pairs(), &[], &cfg).is_err());
    }
}
