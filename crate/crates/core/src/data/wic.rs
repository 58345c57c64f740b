//! Loader for the tab-separated word-in-context pair format: one line per
//! instance (`lemma<TAB>pos<TAB>i-j<TAB>sentence1<TAB>sentence2`) plus an
//! optional gold file with one `T`/`F` label per line.

use std::path::Path;

use crate::context::Sentence;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartOfSpeech {
    Noun,
    Verb,
}

impl PartOfSpeech {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "N" => Some(PartOfSpeech::Noun),
            "V" => Some(PartOfSpeech::Verb),
            _ => None,
        }
    }
}

/// One word-in-context pair: the same lemma in two sentences, optionally
/// labeled with whether the senses match.
#[derive(Debug, Clone)]
pub struct WiCInstance {
    pub lemma: String,
    pub pos: PartOfSpeech,
    pub left: Sentence,
    pub right: Sentence,
    pub gold: Option<bool>,
}

/// Parsed instances plus non-fatal warnings (e.g. an empty file).
#[derive(Debug)]
pub struct WiCLoad {
    pub instances: Vec<WiCInstance>,
    pub warnings: Vec<String>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

/// Loads instances and, when given, aligns gold labels with them.
/// Malformed lines and label/data length mismatches are rejected outright;
/// nothing is silently dropped.
pub fn load_wic(data_path: &Path, gold_path: Option<&Path>) -> Result<WiCLoad> {
    let text = std::fs::read_to_string(data_path)?;
    let mut instances = Vec::new();
    let mut warnings = Vec::new();

    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 5 {
            return Err(parse_err(
                data_path,
                lineno,
                format!("expected 5 tab-separated fields, found {}", fields.len()),
            ));
        }
        let lemma = fields[0].trim().to_lowercase();
        if lemma.is_empty() {
            return Err(parse_err(data_path, lineno, "empty lemma"));
        }
        let pos = PartOfSpeech::parse(fields[1])
            .ok_or_else(|| parse_err(data_path, lineno, format!("bad pos '{}'", fields[1])))?;
        let (i_str, j_str) = fields[2]
            .split_once('-')
            .ok_or_else(|| parse_err(data_path, lineno, "index field must read 'i-j'"))?;
        let i: usize = i_str
            .parse()
            .map_err(|_| parse_err(data_path, lineno, format!("bad index '{i_str}'")))?;
        let j: usize = j_str
            .parse()
            .map_err(|_| parse_err(data_path, lineno, format!("bad index '{j_str}'")))?;
        let left = Sentence::parse(fields[3], i)
            .map_err(|e| parse_err(data_path, lineno, format!("sentence 1: {e}")))?;
        let right = Sentence::parse(fields[4], j)
            .map_err(|e| parse_err(data_path, lineno, format!("sentence 2: {e}")))?;
        instances.push(WiCInstance {
            lemma,
            pos,
            left,
            right,
            gold: None,
        });
    }

    if instances.is_empty() {
        warnings.push(format!("no instances in {}", data_path.display()));
    }

    if let Some(gold_path) = gold_path {
        let gold_text = std::fs::read_to_string(gold_path)?;
        let labels: Vec<bool> = gold_text
            .lines()
            .enumerate()
            .map(|(idx, line)| match line.trim() {
                "T" => Ok(true),
                "F" => Ok(false),
                other => Err(parse_err(gold_path, idx + 1, format!("bad label '{other}'"))),
            })
            .collect::<Result<Vec<bool>>>()?;
        if labels.len() != instances.len() {
            return Err(Error::dim(
                format!("gold labels in {}", gold_path.display()),
                instances.len(),
                labels.len(),
            ));
        }
        for (inst, label) in instances.iter_mut().zip(labels) {
            inst.gold = Some(label);
        }
    }

    Ok(WiCLoad {
        instances,
        warnings,
    })
}

/// Whether observed split sizes are consistent with the published
/// train/dev/test sizes of roughly 5.4K / 0.63K / 1.4K.
pub fn wic_split_sizes_plausible(train: usize, dev: usize, test: usize) -> bool {
    (5350..=5450).contains(&train) && (600..=680).contains(&dev) && (1350..=1450).contains(&test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn parses_the_documented_line_format() {
        let data = write_temp(
            "bed\tN\t2-6\tThere's a lot of trash on the bed of the river\tI keep a glass of water next to my bed when I sleep\n",
        );
        let load = load_wic(data.path(), None).unwrap();
        assert_eq!(load.instances.len(), 1);
        let inst = &load.instances[0];
        assert_eq!(inst.lemma, "bed");
        assert_eq!(inst.pos, PartOfSpeech::Noun);
        assert_eq!(inst.left.target_index(), 2);
        assert_eq!(inst.right.target_index(), 6);
        assert_eq!(inst.left.tokens()[2], "lot");
        assert!(inst.gold.is_none());
    }

    #[test]
    fn empty_file_yields_empty_list_with_warning() {
        let data = write_temp("");
        let load = load_wic(data.path(), None).unwrap();
        assert!(load.instances.is_empty());
        assert_eq!(load.warnings.len(), 1);
    }

    #[test]
    fn malformed_line_errors_with_line_number() {
        let data = write_temp("bed\tN\t2-6\tonly one sentence\n");
        let err = load_wic(data.path(), None).unwrap_err().to_string();
        assert!(err.contains(":1"), "{err}");
    }

    #[test]
    fn out_of_range_index_rejected() {
        let data = write_temp("bed\tN\t9-0\ttoo short\tbed time\n");
        assert!(load_wic(data.path(), None).is_err());
    }

    #[test]
    fn gold_labels_align() {
        let data = write_temp("bed\tN\t0-0\tbed one\tbed two\ncat\tV\t0-0\tcat a\tcat b\n");
        let gold = write_temp("T\nF\n");
        let load = load_wic(data.path(), Some(gold.path())).unwrap();
        assert_eq!(load.instances[0].gold, Some(true));
        assert_eq!(load.instances[1].gold, Some(false));

        let short = write_temp("T\n");
        assert!(load_wic(data.path(), Some(short.path())).is_err());
    }

    #[test]
    fn published_split_sizes_accepted() {
        assert!(wic_split_sizes_plausible(5428, 638, 1400));
        assert!(!wic_split_sizes_plausible(100, 638, 1400));
    }
}
