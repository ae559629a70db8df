//! Batch recommendation store, feedback log and the HTTP review API.

pub mod api;
pub mod batch;
pub mod feedback;
pub mod state;

pub use api::router;
pub use batch::{
    generate_batches, BatchSet, BatchStore, RecommendationBatch, ServedRecommendation,
};
pub use feedback::{
    replay, Decision, FeedbackEvent, FeedbackLog, FeedbackState, FeedbackSubmission,
};
pub use state::{
    edited_corpus, regenerate, EditOutcome, EditRequest, ServiceConfig, ServiceError, ServicePaths,
    ServiceState,
};
