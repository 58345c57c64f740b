//! Synthetic pseudo-ambiguous corpus. Each pseudo-word merges two true
//! words; contexts for a sense draw on that sense's private collocate
//! tokens plus shared fillers, so sense labels are known by construction
//! and a collocate-set oracle can solve the task perfectly.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::inventory::SenseInventory;
use crate::data::wsd::WSDInstance;
use crate::error::{Error, Result};

/// Distinct collocate tokens reserved per sense.
pub const COLLOCATES_PER_SENSE: usize = 4;
/// Probability that a non-target slot carries a collocate (vs a filler).
const COLLOCATE_RATE: f64 = 0.4;
/// Senses per pseudo-word (two merged true words).
pub const SENSES_PER_WORD: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SyntheticSpec {
    pub seed: u64,
    /// Number of pseudo-words.
    pub words: usize,
    /// Generated contexts per (word, sense).
    pub contexts_per_sense: usize,
    /// Total token vocabulary; collocates are carved out of it and the rest
    /// serve as fillers.
    pub vocab_size: usize,
    pub min_len: usize,
    pub max_len: usize,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 7,
            words: 20,
            contexts_per_sense: 50,
            vocab_size: 400,
            min_len: 8,
            max_len: 12,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.words == 0 || self.contexts_per_sense == 0 || self.vocab_size == 0 {
            return Err(Error::arg("synthetic spec counts must be positive"));
        }
        if self.contexts_per_sense < 3 {
            return Err(Error::arg(
                "need at least 3 contexts per sense to split train/dev/test",
            ));
        }
        if self.min_len < 2 || self.min_len > self.max_len {
            return Err(Error::arg(
                "sentence length range must satisfy 2 <= min_len <= max_len",
            ));
        }
        let collocates = self.words * SENSES_PER_WORD * COLLOCATES_PER_SENSE;
        if self.vocab_size <= collocates {
            return Err(Error::arg(format!(
                "vocabulary of {} cannot host {collocates} disjoint per-sense collocates plus fillers",
                self.vocab_size
            )));
        }
        Ok(())
    }
}

/// The generated splits (disjoint by sentence) and their inventory. Glosses
/// list exactly the sense's collocate tokens.
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub train: Vec<WSDInstance>,
    pub dev: Vec<WSDInstance>,
    pub test: Vec<WSDInstance>,
    pub inventory: SenseInventory,
}

fn lemma_name(word: usize) -> String {
    format!("pw{word:02}")
}

fn sense_name(word: usize, sense: usize) -> String {
    format!("pw{word:02}%{}", sense + 1)
}

/// Builds the corpus. Per (word, sense), 15% of contexts go to dev and 15%
/// to test (at least one each), keeping every split balanced across senses.
pub fn build_synthetic(spec: &SyntheticSpec) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let tokens: Vec<String> = (0..spec.vocab_size).map(|i| format!("t{i:04}")).collect();
    let collocate_count = spec.words * SENSES_PER_WORD * COLLOCATES_PER_SENSE;
    let fillers = &tokens[collocate_count..];

    let collocates_of = |word: usize, sense: usize| -> &[String] {
        let base = (word * SENSES_PER_WORD + sense) * COLLOCATES_PER_SENSE;
        &tokens[base..base + COLLOCATES_PER_SENSE]
    };

    let mut inventory = SenseInventory::new();
    for w in 0..spec.words {
        for s in 0..SENSES_PER_WORD {
            inventory.insert(
                &lemma_name(w),
                &sense_name(w, s),
                &collocates_of(w, s).join(" "),
            )?;
        }
    }

    let held = (spec.contexts_per_sense * 15 / 100).max(1);
    if 2 * held >= spec.contexts_per_sense {
        return Err(Error::arg(
            "contexts_per_sense too small to hold out dev and test",
        ));
    }

    let mut train = Vec::new();
    let mut dev = Vec::new();
    let mut test = Vec::new();

    for w in 0..spec.words {
        for s in 0..SENSES_PER_WORD {
            let lemma = lemma_name(w);
            let sense_id = sense_name(w, s);
            let senses = collocates_of(w, s);
            for c in 0..spec.contexts_per_sense {
                let len = rng.gen_range(spec.min_len..=spec.max_len);
                let target = rng.gen_range(0..len);
                let mut sentence = Vec::with_capacity(len);
                let mut placed_collocate = false;
                for pos in 0..len {
                    if pos == target {
                        sentence.push(lemma.clone());
                    } else if rng.gen_bool(COLLOCATE_RATE) {
                        sentence.push(senses[rng.gen_range(0..senses.len())].clone());
                        placed_collocate = true;
                    } else {
                        sentence.push(fillers[rng.gen_range(0..fillers.len())].clone());
                    }
                }
                if !placed_collocate {
                    let slot = loop {
                        let cand = rng.gen_range(0..len);
                        if cand != target {
                            break cand;
                        }
                    };
                    sentence[slot] = senses[rng.gen_range(0..senses.len())].clone();
                }
                let instance = WSDInstance {
                    sentence,
                    target_index: target,
                    lemma: lemma.clone(),
                    gold_sense_id: sense_id.clone(),
                };
                if c < held {
                    dev.push(instance);
                } else if c < 2 * held {
                    test.push(instance);
                } else {
                    train.push(instance);
                }
            }
        }
    }

    Ok(SyntheticCorpus {
        train,
        dev,
        test,
        inventory,
    })
}

/// Accuracy of a context-blind classifier: always predict the lemma's
/// majority training sense (ties broken by the lowest sense id).
pub fn context_blind_accuracy(train: &[WSDInstance], eval: &[WSDInstance]) -> f64 {
    use std::collections::HashMap;
    let mut counts: HashMap<(&str, &str), usize> = HashMap::new();
    for inst in train {
        *counts
            .entry((inst.lemma.as_str(), inst.gold_sense_id.as_str()))
            .or_default() += 1;
    }
    let mut majority: HashMap<&str, (&str, usize)> = HashMap::new();
    for (&(lemma, sense), &n) in &counts {
        match majority.get(lemma) {
            Some(&(best, best_n)) if best_n > n || (best_n == n && best <= sense) => {}
            _ => {
                majority.insert(lemma, (sense, n));
            }
        }
    }
    if eval.is_empty() {
        return 0.0;
    }
    let correct = eval
        .iter()
        .filter(|inst| {
            majority
                .get(inst.lemma.as_str())
                .is_some_and(|&(sense, _)| sense == inst.gold_sense_id)
        })
        .count();
    correct as f64 / eval.len() as f64
}
