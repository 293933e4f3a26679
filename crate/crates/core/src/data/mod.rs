//! Silhouette ingestion, registration, GEI computation, the synthetic
//! walker generator and subject splits.

mod gei;
mod image;
mod register;
mod sequence;
mod split;
mod synth;

pub use gei::{compute_gei, enumerate_icgeis, tc_gei, Gei, RegisteredSequence};
pub use image::{BinaryImage, GrayImage};
pub use register::{register_frame, GEI_SIZE};
pub use sequence::{
    load_sequences, load_silhouette_sequence, parse_manifest, read_manifest, resolve_frames, save_sequences,
    write_manifest, ManifestEntry, Role, SilhouetteSequence, MANIFEST_FILE, MANIFEST_HEADER,
};
pub use split::{split_dataset, DatasetSplit};
pub use synth::{render_walker_frame, synth_walker, WalkerParams, FRAME_HEIGHT, FRAME_WIDTH};
