//! Lifelog day compilation for chronological day reconstruction.
//!
//! A day's visual, location and phone-context logs are parsed into a
//! [`model::DayLog`], location fixes are reduced to stay points, transitions
//! and places, and everything is laid out as four partitioned timeline
//! tracks. Reviewers then enter episodes strictly in time order.

pub mod geo;
pub mod ingest;
pub mod model;
pub mod pipeline;
pub mod reconstruction;
pub mod timeline;

pub use geo::{DayAnalysis, GeoParams, Place, StayPoint, Transition};
pub use model::{Channel, ContextEvent, CoverageInterval, DayLog, DayWindow, GpsFix, ImageSample, Timestamp};
pub use pipeline::{ChannelTexts, DayArtifacts, PipelineParams};
pub use timeline::{Segment, SegmentKind, Timeline, Track, WindowData, WindowSelection};
