//! The quotient space of weighted shapes.
//!
//! A weighted shape is a pair (shape, weight); all zero-weight pairs are
//! identified with a single null class, so a vanishing edge and a missing
//! edge are the same point of the space. The metric mixes the elastic shape
//! distance with the weight difference, with a shortcut through the null
//! class.

use crate::curve::{d_srv, srv_geodesic, SrvCurve};
use crate::error::{Error, Result};

/// A shape with a nonnegative weight. Weight zero means the null class:
/// equality then ignores the stored shape entirely.
#[derive(Debug, Clone)]
pub struct WeightedShape {
    pub shape: SrvCurve,
    pub weight: f64,
}

impl WeightedShape {
    pub fn new(shape: SrvCurve, weight: f64) -> Result<Self> {
        if !(weight >= 0.0) || !weight.is_finite() {
            return Err(Error::Argument(format!(
                "weight must be a nonnegative finite number, got {weight}"
            )));
        }
        Ok(WeightedShape { shape, weight })
    }

    /// The null class, represented by the zero shape.
    pub fn null(samples: usize) -> Self {
        WeightedShape {
            shape: SrvCurve::null(samples),
            weight: 0.0,
        }
    }

    pub fn is_null(&self) -> bool {
        self.weight == 0.0
    }

    /// Equality as quotient classes: zero-weight values are all identified.
    pub fn quotient_eq(&self, other: &WeightedShape, tol: f64) -> bool {
        if self.is_null() && other.is_null() {
            return true;
        }
        if self.is_null() != other.is_null() {
            return false;
        }
        (self.weight - other.weight).abs() <= tol && self.shape.distance(&other.shape) <= tol
    }
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 0.0) || !eta.is_finite() {
        return Err(Error::Argument(format!("eta must be positive, got {eta}")));
    }
    Ok(())
}

/// Metric on weighted shapes:
/// min { d_srv(shapes) + eta*|w0 - w1|,  eta*(w0 + w1) }.
///
/// When either side is null the value reduces to eta times the other weight,
/// independent of the stored shapes, so the quotient identification is exact.
pub fn d_eta(a: &WeightedShape, b: &WeightedShape, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if a.is_null() || b.is_null() {
        return Ok(eta * (a.weight + b.weight));
    }
    let ds = d_srv(&a.shape, &b.shape);
    Ok((ds + eta * (a.weight - b.weight).abs()).min(eta * (a.weight + b.weight)))
}

/// Which of the piecewise geodesic constructions applies to a pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GeodesicCase {
    /// Both weights positive, distance realized by the product-metric term:
    /// interpolate shape and weight together.
    Joint,
    /// Both weights positive, distance realized by the shortcut through the
    /// null class: fade out the first shape, then fade in the second.
    ThroughNull,
    /// Exactly one side is null: constant shape with its weight fading.
    Fade,
    /// Both null: constant null path.
    Null,
}

/// Classify the geodesic between two weighted shapes. Ties between the two
/// terms of the metric resolve to the joint case, which keeps the shape
/// varying continuously.
pub fn geodesic_case(a: &WeightedShape, b: &WeightedShape, eta: f64) -> Result<GeodesicCase> {
    check_eta(eta)?;
    Ok(if a.is_null() && b.is_null() {
        GeodesicCase::Null
    } else if a.is_null() || b.is_null() {
        GeodesicCase::Fade
    } else {
        let joint = d_srv(&a.shape, &b.shape) + eta * (a.weight - b.weight).abs();
        let through = eta * (a.weight + b.weight);
        if joint <= through {
            GeodesicCase::Joint
        } else {
            GeodesicCase::ThroughNull
        }
    })
}

/// Point at parameter `u` on the geodesic from `a` to `b`.
///
/// For the joint case `b.shape` must already be registered to `a.shape`.
/// The through-null case pieces two weight fades together at the breakpoint
/// alpha = w0/(w0+w1), where the path crosses the null class.
pub fn weighted_geodesic(
    a: &WeightedShape,
    b: &WeightedShape,
    eta: f64,
    u: f64,
) -> Result<WeightedShape> {
    let case = geodesic_case(a, b, eta)?;
    if !(0.0..=1.0).contains(&u) {
        return Err(Error::Argument(format!("u must lie in [0,1], got {u}")));
    }
    Ok(match case {
        GeodesicCase::Null => a.clone(),
        GeodesicCase::Fade => {
            let (shape, w0, w1) = if a.is_null() {
                (b.shape.clone(), 0.0, b.weight)
            } else {
                (a.shape.clone(), a.weight, 0.0)
            };
            WeightedShape {
                shape,
                weight: (1.0 - u) * w0 + u * w1,
            }
        }
        GeodesicCase::Joint => WeightedShape {
            shape: srv_geodesic(&a.shape, &b.shape, u),
            weight: (1.0 - u) * a.weight + u * b.weight,
        },
        GeodesicCase::ThroughNull => {
            let total = a.weight + b.weight;
            let alpha = a.weight / total;
            if u <= alpha {
                WeightedShape {
                    shape: a.shape.clone(),
                    weight: (a.weight - u * total).max(0.0),
                }
            } else {
                WeightedShape {
                    shape: b.shape.clone(),
                    weight: (u * total - a.weight).max(0.0),
                }
            }
        }
    })
}
