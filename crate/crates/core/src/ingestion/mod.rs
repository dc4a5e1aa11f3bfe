//! Parsing of pre-crawled Instagram exports and profile/post metrics.

mod features;
mod snapshot;

use thiserror::Error;

pub use features::{derive_post_features, PostFeatureSet, POPULAR_FOLLOWER_THRESHOLD};
pub use snapshot::{
    parse_snapshot, parse_snapshot_dir, parse_snapshot_tree, write_snapshot_dir, Comments,
    FollowedAccount, ParseIssue, ParsedSnapshot, PostKind, PostRecord, ProfileSnapshot,
    EXPORT_SCHEMA_VERSION,
};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
}
