//! Learned inverse of a non-differentiable renderer, applied to textures.
//!
//! A small MLP maps a rendered color back to the source color that renders
//! to it, so textures corrected by the network come out of the renderer
//! looking as intended.

mod model;
mod oracle;
mod pairs;
mod texture;

pub use model::{correct_color, train_corrector, ColorCorrector, ColorModelDocument, ColorTrainConfig, TrainingMetadata};
pub use oracle::{OraclePreset, RendererOracle};
pub use pairs::{
    generate_training_pairs, interior_samples, INTERIOR, read_pairs, round_trip_fraction, write_pairs, ColorSample,
    PairConfig, DEFAULT_PAIR_COUNT,
};
pub use texture::{blend_relit, correct_texture, DEFAULT_BLEND_ALPHA};
