//! Continuous functionals of convex bodies.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geom2d::ConvexPolygon;

/// A named real function of a convex body.
///
/// Only ever evaluated on nondegenerate polygons; clipping reports
/// measure-zero pieces as `None` before they get here.
#[derive(Clone)]
pub struct Functional {
    name: String,
    eval: Arc<dyn Fn(&ConvexPolygon) -> f64 + Send + Sync>,
}

impl fmt::Debug for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_tuple("Functional").field(&self.name).finish()
    }
}

impl Functional {
    pub fn new(name: impl Into<String>, eval: impl Fn(&ConvexPolygon) -> f64 + Send + Sync + 'static) -> Self {
        Self { name: name.into(), eval: Arc::new(eval) }
    }

    pub fn perimeter() -> Self {
        Self::new("perimeter", ConvexPolygon::perimeter)
    }

    pub fn diameter() -> Self {
        Self::new("diameter", ConvexPolygon::diameter)
    }

    pub fn width() -> Self {
        Self::new("width", ConvexPolygon::width)
    }

    /// Look up one of the built-in functionals.
    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "perimeter" => Ok(Self::perimeter()),
            "diameter" => Ok(Self::diameter()),
            "width" => Ok(Self::width()),
            other => Err(Error::InvalidArgument(format!(
                "unknown functional '{other}' (expected perimeter, diameter or width)"
            ))),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn eval(&self, p: &ConvexPolygon) -> f64 {
        (self.eval)(p)
    }
}

impl Default for Functional {
    fn default() -> Self {
        Self::perimeter()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom2d::{regular_polygon, Vec2};

    #[test]
    fn builtins_by_name() {
        let sq = ConvexPolygon::unit_square();
        assert_eq!(Functional::by_name("perimeter").unwrap().eval(&sq), 4.0);
        assert!((Functional::by_name("diameter").unwrap().eval(&sq) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Functional::by_name("width").unwrap().eval(&sq), 1.0);
        assert!(Functional::by_name("area").is_err());
    }

    #[test]
    fn continuous_under_vertex_perturbation() {
        let base = regular_polygon(7, Vec2::ZERO, 1.0, 0.1).unwrap();
        for f in [Functional::perimeter(), Functional::diameter(), Functional::width()] {
            let f0 = f.eval(&base);
            let mut last = f64::INFINITY;
            for k in 1..8 {
                let delta = 10f64.powi(-k);
                let moved: Vec<Vec2> = base
                    .vertices()
                    .iter()
                    .enumerate()
                    .map(|(i, v)| *v + Vec2::polar(i as f64 * 2.3) * delta)
                    .collect();
                let diff = (f.eval(&ConvexPolygon::new(moved).unwrap()) - f0).abs();
                assert!(diff <= 4.0 * delta, "{}: jump {diff} at delta {delta}", f.name());
                assert!(diff <= last + 1e-15);
                last = diff;
            }
        }
    }
}
