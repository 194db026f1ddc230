//! Planar quasi-static simulator of a tendon-driven, highly underactuated
//! four-finger hand with agonist/antagonist tendons and clutch-gear soft
//! synergies.

// Validation deliberately writes `!(x > 0.0)` so NaN fails too, and the
// small dense solves read best with explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod contact;
pub mod drive;
pub mod experiments;
pub mod geom;
pub mod kinematics;
pub mod model;
pub mod render;
pub mod scene;
pub mod solver;

pub use geom::{Frame2, Vec2};
pub use model::{build_default_hand, build_hand, validate, FingerId, HandModel, HandParams, TendonSide};
