//! Building blocks for a draft-generating ad-video editing model.
//!
//! The model consumes product information, a free-form editing prompt and a
//! set of video clips, and emits a JSON edit draft with three tracks. This
//! crate provides everything around the model:
//!
//! - [`draft`]: the draft protocol (strict parsing, canonical serialization,
//!   validation) and [`taxonomy`] of decoration tags.
//! - [`sampling`] and [`compression`]: slow-fast frame sampling, token budgets
//!   and reference compression ops.
//! - [`dataset`]: instruction/draft corpus construction.
//! - [`timeline`]: TTS alignment and asset matching into a render plan.
//! - [`metrics`]: CRA, CSA, DTPR, judge-score aggregation and VSR.
//! - [`backends`]: HTTP client seams for external models plus in-process mocks.

pub mod backends;
pub mod clips;
pub mod compression;
pub mod dataset;
pub mod draft;
pub mod metrics;
pub mod report;
pub mod sampling;
pub mod taxonomy;
pub mod timeline;

pub use clips::{ClipMeta, ClipSet};
pub use draft::{
    parse_draft, serialize_draft, validate_draft, DecorationSetting, Draft, DraftError, TimeMs, VideoNode,
    VoiceSentence,
};
pub use report::{ValidationReport, Violation};
pub use sampling::{PathwayConfig, SamplingPlan, SlowFastConfig};
pub use taxonomy::{TagCategory, TagTaxonomy};
