//! Dataset ingestion, pair generation, the synthetic pseudo-ambiguous
//! corpus, and scoring.

mod inventory;
mod pairs;
mod score;
mod synthetic;
mod wic;
mod wsd;

pub use inventory::{SenseEntry, SenseInventory};
pub use pairs::{generate_pairs, gloss_sentence, pairs_from_wic, PairGen, PairGenConfig};
pub use score::{wic_accuracy, wsd_f1, WsdScore};
pub use synthetic::{
    build_synthetic, context_blind_accuracy, SyntheticCorpus, SyntheticSpec, COLLOCATES_PER_SENSE,
    SENSES_PER_WORD,
};
pub use wic::{load_wic, wic_split_sizes_plausible, PartOfSpeech, WiCInstance, WiCLoad};
pub use wsd::{load_wsd, save_wsd, WSDInstance};
