//! Pieces of the client-facing gateway that do not depend on a web
//! framework: the wire protocol, session metrics retention and rating
//! aggregation.

mod metrics_store;
mod ratings;
mod wire;

pub use metrics_store::{MetricsReport, MetricsStore, SessionRecord, DEFAULT_RETENTION};
pub use ratings::{
    aggregate_ratings, radar_series, Dimension, RatingInvalid, RatingRecord, RatingStore,
    MAX_SCORE, MIN_SCORE,
};
pub use wire::{
    decode_event, encode_event, parse_client_message, pcm_from_b64, pcm_to_b64, ClientMessage,
    WireError, WireEvent, PROTOCOL_VERSION,
};
