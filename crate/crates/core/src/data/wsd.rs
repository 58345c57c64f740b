//! Sense-labeled occurrences in a JSON-lines format: one object per line
//! with the sentence tokens, target index, lemma and gold sense id.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::context::Sentence;
use crate::data::inventory::SenseInventory;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct WSDInstance {
    pub sentence: Vec<String>,
    pub target_index: usize,
    pub lemma: String,
    pub gold_sense_id: String,
}

impl WSDInstance {
    /// The occurrence as a lowercased sentence.
    pub fn to_sentence(&self) -> Result<Sentence> {
        Sentence::new(
            self.sentence.iter().map(|t| t.to_lowercase()).collect(),
            self.target_index,
        )
    }

    pub fn validate(&self, inventory: &SenseInventory) -> Result<()> {
        if self.target_index >= self.sentence.len() {
            return Err(Error::arg(format!(
                "target index {} out of range for {} tokens",
                self.target_index,
                self.sentence.len()
            )));
        }
        let senses = inventory
            .senses(&self.lemma)
            .ok_or_else(|| Error::UnknownLemma(self.lemma.clone()))?;
        if !senses.iter().any(|s| s.sense_id == self.gold_sense_id) {
            return Err(Error::arg(format!(
                "gold sense '{}' not in the candidate set of '{}'",
                self.gold_sense_id, self.lemma
            )));
        }
        Ok(())
    }
}

pub fn load_wsd(path: &Path) -> Result<Vec<WSDInstance>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let inst: WSDInstance = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            msg: e.to_string(),
        })?;
        if inst.sentence.is_empty() || inst.target_index >= inst.sentence.len() {
            return Err(Error::Parse {
                path: path.display().to_string(),
                line: idx + 1,
                msg: "target index out of range".into(),
            });
        }
        out.push(inst);
    }
    Ok(out)
}

pub fn save_wsd(path: &Path, instances: &[WSDInstance]) -> Result<()> {
    let mut out = String::new();
    for inst in instances {
        let _ = writeln!(out, "{}", serde_json::to_string(inst)?);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jsonl_roundtrip() {
        let instances = vec![WSDInstance {
            sentence: vec!["the".into(), "bank".into(), "closed".into()],
            target_index: 1,
            lemma: "bank".into(),
            gold_sense_id: "bank%1".into(),
        }];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        save_wsd(&path, &instances).unwrap();
        assert_eq!(load_wsd(&path).unwrap(), instances);
    }

    #[test]
    fn bad_target_index_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(
            &path,
            "{\"sentence\":[\"a\"],\"target_index\":3,\"lemma\":\"a\",\"gold_sense_id\":\"x\"}\n",
        )
        .unwrap();
        assert!(load_wsd(&path).is_err());
    }

    #[test]
    fn validate_against_inventory() {
        let mut inv = SenseInventory::new();
        inv.insert("bank", "bank%1", "money place").unwrap();
        let inst = WSDInstance {
            sentence: vec!["bank".into()],
            target_index: 0,
            lemma: "bank".into(),
            gold_sense_id: "bank%1".into(),
        };
        assert!(inst.validate(&inv).is_ok());
        let missing = WSDInstance {
            gold_sense_id: "bank%9".into(),
            ..inst.clone()
        };
        assert!(missing.validate(&inv).is_err());
        let unknown = WSDInstance {
            lemma: "river".into(),
            ..inst
        };
        assert!(matches!(
            unknown.validate(&inv),
            Err(Error::UnknownLemma(_))
        ));
    }
}
