//! Corpus ingestion and simulation.

mod manifest;
pub mod simulate;
mod wav;

pub use manifest::{
    manifest_to_string, parse_manifest, scan_corpus, write_manifest, CorpusIndex, Label, ManifestError, UtteranceRecord,
};
pub use simulate::{
    generate_corpus, simulate_corpus, simulate_pair, simulate_recorded, GroundTruth, SeverityDistribution, SimConfig,
    SimError, SimItem, SimulatedUtterance,
};
pub use wav::{decode_wav, encode_wav, load_wav, save_wav, WavError, Waveform};
