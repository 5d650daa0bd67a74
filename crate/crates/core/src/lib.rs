//! Early-behaviour analytics for online communities.
//!
//! Reads Reddit-style NDJSON dumps, cuts each community's early window at its
//! k-th member, measures later success, extracts six families of early
//! features and asks how well those features predict success.
//!
//! ```
//! use commsuccess::synth::{generate, SynthParams};
//! use commsuccess::ingest::{extract_early_window, CommunityTimeline};
//!
//! let events = generate(&SynthParams::default()).unwrap();
//! let timeline = CommunityTimeline::new("synth", events).unwrap();
//! let window = extract_early_window(&timeline, 10, 90.0).unwrap();
//! println!("{} members after {:.1} days", window.members.len(), window.days_to_k);
//! ```

pub mod error;
pub mod features;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod stats;
pub mod success;
pub mod synth;

pub use error::{Error, Result};
