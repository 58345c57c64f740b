//! Training-pair construction: sentence-gloss positives and negatives plus
//! sentence-sentence pairs of the same lemma, all deterministic under the
//! configured seed.

use indexmap::IndexMap;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::context::Sentence;
use crate::data::inventory::SenseInventory;
use crate::data::wic::WiCInstance;
use crate::data::wsd::WSDInstance;
use crate::error::{Error, Result};
use crate::matcher::{match_state, MatchingPair};

/// Pair-generation policy.
#[derive(Debug, Clone, Copy)]
pub struct PairGenConfig {
    /// Negative gloss pairs sampled per instance (capped by the number of
    /// other candidate senses).
    pub neg_ratio: usize,
    /// Expected sentence-sentence pairs per instance.
    pub sentence_pair_ratio: f64,
    pub seed: u64,
}

impl Default for PairGenConfig {
    fn default() -> Self {
        PairGenConfig {
            neg_ratio: 1,
            sentence_pair_ratio: 1.0,
            seed: 0,
        }
    }
}

impl PairGenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neg_ratio < 1 {
            return Err(Error::arg("neg_ratio must be at least 1"));
        }
        if !self.sentence_pair_ratio.is_finite() || self.sentence_pair_ratio < 0.0 {
            return Err(Error::arg("sentence_pair_ratio must be finite and >= 0"));
        }
        Ok(())
    }
}

/// Generated pairs plus the count of instances skipped because their lemma
/// (or gold sense) was missing from the inventory.
#[derive(Debug)]
pub struct PairGen {
    pub pairs: Vec<MatchingPair>,
    pub skipped: usize,
}

/// The gloss of a sense rendered as a matchable sentence
/// `lemma : gloss-tokens`, target index 0.
pub fn gloss_sentence(lemma: &str, gloss: &str) -> Result<Sentence> {
    Sentence::parse(&format!("{lemma} : {gloss}"), 0)
}

/// Builds the training mixture from sense-labeled occurrences.
pub fn generate_pairs(
    instances: &[WSDInstance],
    inventory: &SenseInventory,
    cfg: &PairGenConfig,
) -> Result<PairGen> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut pairs = Vec::new();
    let mut skipped = 0usize;

    // Same-lemma occurrence groups in first-seen order.
    let mut by_lemma: IndexMap<String, Vec<usize>> = IndexMap::new();
    for (i, inst) in instances.iter().enumerate() {
        by_lemma
            .entry(inst.lemma.to_lowercase())
            .or_default()
            .push(i);
    }

    for (idx, inst) in instances.iter().enumerate() {
        let sentence = inst.to_sentence()?;

        // Gloss pairs: the gold sense as a positive, sampled other senses
        // as negatives.
        match inventory.senses(&inst.lemma) {
            Some(senses) if senses.iter().any(|s| s.sense_id == inst.gold_sense_id) => {
                for sense in senses {
                    if sense.sense_id == inst.gold_sense_id {
                        pairs.push(MatchingPair::new(
                            sentence.clone(),
                            gloss_sentence(&inst.lemma, &sense.gloss)?,
                            &inst.lemma,
                            true,
                        ));
                    }
                }
                let mut others: Vec<&_> = senses
                    .iter()
                    .filter(|s| s.sense_id != inst.gold_sense_id)
                    .collect();
                if others.len() > cfg.neg_ratio {
                    others.shuffle(&mut rng);
                    others.truncate(cfg.neg_ratio);
                }
                for sense in others {
                    pairs.push(MatchingPair::new(
                        sentence.clone(),
                        gloss_sentence(&inst.lemma, &sense.gloss)?,
                        &inst.lemma,
                        false,
                    ));
                }
            }
            _ => {
                skipped += 1;
            }
        }

        // Sentence-sentence pairs against other occurrences of the lemma.
        let group = &by_lemma[&inst.lemma.to_lowercase()];
        if group.len() > 1 {
            let mut count = cfg.sentence_pair_ratio.floor() as usize;
            if rng.gen_bool(cfg.sentence_pair_ratio.fract()) {
                count += 1;
            }
            for _ in 0..count {
                let partner = loop {
                    let cand = group[rng.gen_range(0..group.len())];
                    if cand != idx {
                        break cand;
                    }
                };
                let other = &instances[partner];
                pairs.push(MatchingPair::new(
                    sentence.clone(),
                    other.to_sentence()?,
                    &inst.lemma,
                    match_state(&inst.gold_sense_id, &other.gold_sense_id),
                ));
            }
        }
    }

    Ok(PairGen { pairs, skipped })
}

/// Labeled word-in-context instances as matching pairs; unlabeled
/// instances contribute nothing.
pub fn pairs_from_wic(instances: &[WiCInstance]) -> Vec<MatchingPair> {
    instances
        .iter()
        .filter_map(|inst| {
            inst.gold.map(|gold| {
                MatchingPair::new(inst.left.clone(), inst.right.clone(), &inst.lemma, gold)
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn instance(lemma: &str, sense: &str, tokens: &[&str]) -> WSDInstance {
        WSDInstance {
            sentence: tokens.iter().map(|t| t.to_string()).collect(),
            target_index: 0,
            lemma: lemma.into(),
            gold_sense_id: sense.into(),
        }
    }

    fn three_sense_inventory() -> SenseInventory {
        let mut inv = SenseInventory::new();
        inv.insert("bank", "bank%1", "money institution").unwrap();
        inv.insert("bank", "bank%2", "river side").unwrap();
        inv.insert("bank", "bank%3", "row of machines").unwrap();
        inv
    }

    #[test]
    fn gloss_pair_counts_follow_neg_ratio() {
        let inv = three_sense_inventory();
        let insts = vec![instance("bank", "bank%1", &["bank", "loans"])];
        let cfg = PairGenConfig {
            neg_ratio: 2,
            sentence_pair_ratio: 0.0,
            seed: 1,
        };
        let gen = generate_pairs(&insts, &inv, &cfg).unwrap();
        assert_eq!(gen.pairs.len(), 3); // 1 positive + 2 negatives
        assert_eq!(gen.pairs.iter().filter(|p| p.gold).count(), 1);
        assert_eq!(gen.skipped, 0);
        // Gloss sentences carry the lemma at target index 0.
        assert_eq!(gen.pairs[0].right.target_token(), "bank");
        assert_eq!(gen.pairs[0].right.tokens()[1], ":");
    }

    #[test]
    fn missing_lemma_is_skipped_and_counted() {
        let inv = three_sense_inventory();
        let insts = vec![instance("door", "door%1", &["door", "frame"])];
        let cfg = PairGenConfig {
            sentence_pair_ratio: 0.0,
            ..PairGenConfig::default()
        };
        let gen = generate_pairs(&insts, &inv, &cfg).unwrap();
        assert!(gen.pairs.is_empty());
        assert_eq!(gen.skipped, 1);
    }

    #[test]
    fn sentence_pairs_carry_match_state_of_gold_senses() {
        let inv = three_sense_inventory();
        let insts = vec![
            instance("bank", "bank%1", &["bank", "a"]),
            instance("bank", "bank%1", &["bank", "b"]),
            instance("bank", "bank%2", &["bank", "c"]),
        ];
        let cfg = PairGenConfig {
            neg_ratio: 1,
            sentence_pair_ratio: 1.0,
            seed: 3,
        };
        let gen = generate_pairs(&insts, &inv, &cfg).unwrap();
        for pair in gen.pairs.iter().filter(|p| p.right.tokens().get(1).map(String::as_str) != Some(":")) {
            // Sentence-sentence pair: label must equal sense equality, which
            // we can reconstruct from the corpus (tokens identify instances).
            let senses: Vec<&str> = [&pair.left, &pair.right]
                .iter()
                .map(|s| match s.tokens()[1].as_str() {
                    "a" | "b" => "bank%1",
                    _ => "bank%2",
                })
                .collect();
            assert_eq!(pair.gold, senses[0] == senses[1]);
        }
    }

    #[test]
    fn generation_is_deterministic_under_seed() {
        let inv = three_sense_inventory();
        let insts: Vec<WSDInstance> = (0..10)
            .map(|i| {
                instance(
                    "bank",
                    if i % 2 == 0 { "bank%1" } else { "bank%2" },
                    &["bank", "ctx"],
                )
            })
            .collect();
        let cfg = PairGenConfig {
            neg_ratio: 1,
            sentence_pair_ratio: 0.5,
            seed: 42,
        };
        let a = generate_pairs(&insts, &inv, &cfg).unwrap();
        let b = generate_pairs(&insts, &inv, &cfg).unwrap();
        assert_eq!(a.pairs.len(), b.pairs.len());
        for (x, y) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(x.gold, y.gold);
            assert_eq!(x.left.tokens(), y.left.tokens());
            assert_eq!(x.right.tokens(), y.right.tokens());
        }
    }

    #[test]
    fn wic_labels_pass_through() {
        let left = Sentence::parse("the bed of the river", 1).unwrap();
        let right = Sentence::parse("go to bed", 2).unwrap();
        let insts = vec![
            WiCInstance {
                lemma: "bed".into(),
                pos: crate::data::wic::PartOfSpeech::Noun,
                left: left.clone(),
                right: right.clone(),
                gold: Some(true),
            },
            WiCInstance {
                lemma: "bed".into(),
                pos: crate::data::wic::PartOfSpeech::Noun,
                left,
                right,
                gold: None,
            },
        ];
        let pairs = pairs_from_wic(&insts);
        assert_eq!(pairs.len(), 1);
        assert!(pairs[0].gold);
    }
}
