//! On-disk datasets: PRD1 arrays plus a TOML manifest, laid out as
//! `<root>/<name>/{manifest.toml, arrays/<split>_<role>.prd}`.

pub mod manifest;
pub mod pipeline;
pub mod prd;
pub mod resample;
pub mod synth;

pub use manifest::{
    images_from_prd, ArrayRecord, CalibrationTables, Dataset, DatasetManifest, Recipe, Role, SplitRange, SplitSizes,
};
pub use pipeline::{generate_dataset, generate_example, Example, ExampleContext, Exposure, ForwardModel, GenerateOptions};
pub use prd::{read_prd, write_prd, Dtype, PrdArray, PrdData};
pub use resample::resample_for_end_to_end;
pub use synth::{synth_objects, ObjectGenerator, ObjectSource};

/// Seed domains for [`crate::rng::derive_seed`].
pub(crate) const DOMAIN_OBJECT: u32 = 1;
pub const DOMAIN_SENSOR: u32 = 2;
