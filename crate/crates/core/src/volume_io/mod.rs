//! Volumes, tracking logs and dataset manifests on disk.

mod manifest;
mod nifti;
mod tracking;
mod volume;

pub use manifest::{
    parse_manifest, read_manifest, write_manifest, DatasetManifest, ManifestEntry, Split,
    MANIFEST_HEADER,
};
pub use nifti::{encode_nifti, parse_nifti, read_nifti, write_nifti, DT_FLOAT32, DT_INT16, DT_UINT16};
pub use tracking::{parse_tracking_log, read_tracking_log, write_tracking_log, TRACKING_HEADER};
pub use volume::{Modality, Volume};
