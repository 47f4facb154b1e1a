//! Convex equipartitions of planar bodies.
//!
//! A convex polygon `K` is cut into `m` convex cells of equal measure whose
//! values under a continuous functional (perimeter by default) also agree.
//! Prime powers are solved directly by moving the sites of an equal-mass
//! power diagram; other `m` are reduced to those by halving-line sweeps and
//! recursive splitting along the prime factorization of `m`.

pub mod equalize_area;
pub mod equalize_fn;
pub mod error;
pub mod functional;
pub mod geom2d;
mod joint;
pub mod powerdiag;
pub mod recursive;
pub mod sweep;
pub mod verify;

pub use error::{Error, Result};
pub use functional::Functional;
pub use geom2d::{ConvexPolygon, Density, Vec2};
pub use powerdiag::SiteConfig;
