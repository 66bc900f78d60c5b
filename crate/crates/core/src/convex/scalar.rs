//! One-dimensional conjugation: bracket expansion, gradient bisection and
//! golden-section maximization.

use super::{ConvexError, ConvexFunction, Result};

const ESCAPE: f64 = 1e15;
const MAX_EXPANSIONS: usize = 4000;
const MAX_BISECTIONS: usize = 200;
const GOLDEN_TOL: f64 = 1e-11;

/// Interval on which `∇φ(u) − target` changes sign.
#[derive(Debug, Clone, Copy)]
pub(crate) enum Bracket {
    /// `∇φ(x) = target` exactly at the start point.
    Exact(f64),
    /// `below` has not reached the target, `above` has.
    Interval { below: f64, above: f64, increasing: bool },
    /// The target is beyond the gradient range inside the domain; the
    /// supremum sits on the domain boundary.
    Boundary(f64),
}

/// Raised when the bracket runs off to infinity; callers translate it.
pub(crate) struct Escaped;

fn reached(g: f64, target: f64, increasing: bool) -> bool {
    if increasing {
        g >= target
    } else {
        g <= target
    }
}

pub(crate) fn expand_bracket(
    f: &dyn ConvexFunction,
    target: f64,
    start: f64,
) -> Result<std::result::Result<Bracket, Escaped>> {
    let g0 = f.gradient_at(start)?;
    if g0 == target {
        return Ok(Ok(Bracket::Exact(start)));
    }
    let increasing = g0 < target;
    let dir = if increasing { 1.0 } else { -1.0 };
    let mut inside = start;
    let mut step = start.abs().max(1.0);
    for _ in 0..MAX_EXPANSIONS {
        let cand = inside + dir * step;
        if cand.abs() > ESCAPE {
            return Ok(Err(Escaped));
        }
        let v = f.value_at(cand)?;
        if !v.is_finite() {
            step *= 0.5;
            if step <= 4.0 * f64::EPSILON * (1.0 + inside.abs()) {
                return Ok(Ok(Bracket::Boundary(inside)));
            }
            continue;
        }
        if reached(f.gradient_at(cand)?, target, increasing) {
            return Ok(Ok(Bracket::Interval { below: inside, above: cand, increasing }));
        }
        inside = cand;
        step *= 2.0;
    }
    Ok(Err(Escaped))
}

/// Smallest-norm point in the bracket where the gradient reaches `target`.
pub(crate) fn bisect_gradient(f: &dyn ConvexFunction, target: f64, bracket: Bracket) -> Result<f64> {
    match bracket {
        Bracket::Exact(x) | Bracket::Boundary(x) => Ok(x),
        Bracket::Interval { mut below, mut above, increasing } => {
            for _ in 0..MAX_BISECTIONS {
                let mid = 0.5 * (below + above);
                if mid == below || mid == above {
                    break;
                }
                if reached(f.gradient_at(mid)?, target, increasing) {
                    above = mid;
                } else {
                    below = mid;
                }
            }
            Ok(above)
        }
    }
}

/// Golden-section maximization of a concave objective on `[lo, hi]`.
/// Returns `(argmax, max)`.
pub(crate) fn golden_max<F>(objective: F, lo: f64, hi: f64) -> Result<(f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c)?;
    let mut fd = objective(d)?;
    for _ in 0..300 {
        if (b - a) <= GOLDEN_TOL * (1.0 + c.abs() + d.abs()) {
            break;
        }
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d)?;
        }
    }
    let mut best = if fc >= fd { (c, fc) } else { (d, fd) };
    // Maxima on the bracket ends (domain boundaries) are never interior probes.
    for x in [a, b, lo, hi] {
        let v = objective(x)?;
        if v > best.1 {
            best = (x, v);
        }
    }
    Ok(best)
}

/// `sup_u ξu − φ(u)` and its maximizer for scalar `φ`.
pub(crate) fn conjugate(f: &dyn ConvexFunction, xi: f64, start: f64) -> Result<(f64, f64)> {
    let bracket = expand_bracket(f, xi, start)?
        .map_err(|_| ConvexError::UnboundedDual { direction: vec![xi] })?;
    let objective = |u: f64| -> Result<f64> {
        let v = f.value_at(u)?;
        Ok(if v.is_finite() { xi * u - v } else { f64::NEG_INFINITY })
    };
    match bracket {
        Bracket::Exact(x) | Bracket::Boundary(x) => Ok((objective(x)?, x)),
        Bracket::Interval { below, above, .. } => {
            let (x, v) = golden_max(objective, below, above)?;
            Ok((v, x))
        }
    }
}

/// Solves `∇φ(u) = ξ` for scalar `φ`.
pub(crate) fn invert_gradient(f: &dyn ConvexFunction, xi: f64, start: f64) -> Result<f64> {
    let bracket = expand_bracket(f, xi, start)?
        .map_err(|_| ConvexError::OutOfRange { target: vec![xi] })?;
    bisect_gradient(f, xi, bracket)
}
