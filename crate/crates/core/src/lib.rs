//! Skeleton-pose human-drone interaction.
//!
//! 2D skeletons (18-joint COCO layout) are classified into a body view,
//! arm gestures and a distance estimate; a control layer turns those into
//! Tello-style text commands for a simulated quadrotor. Everything is wired
//! together by an in-process topic bus.

pub mod bridge;
pub mod bus;
pub mod config;
pub mod control;
pub mod distance;
pub mod error;
pub mod gesture;
pub mod head;
pub mod pipeline;
pub mod scene;
pub mod sim;
pub mod skeleton;
pub mod stability;
pub mod view;

pub use error::{Error, Result};
