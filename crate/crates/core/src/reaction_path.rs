//! Steepest-descent reaction paths.
//!
//! A path is traced by integrating the unit-speed flow `dx/ds = -g/|g|`
//! (`g = grad V`) with classical RK4 and step halving whenever a step fails
//! to lower the energy by a fair share of its first-order estimate. Paths are parametrized by the polyline arc length.

use std::io::Write;

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pes::{MuellerBrownPoints, PesModel, StationaryPoint};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    /// Arc length from the start of the path (bohr).
    pub s: f64,
    pub position: Vec2,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct DescentSettings {
    pub max_step: f64,
    pub min_step: f64,
    /// Stop when `|grad V|` in raw units falls below this.
    pub gradient_tolerance: f64,
    /// Stop (and snap onto the minimum) once this close to a known minimum.
    pub capture_radius: f64,
    /// `([x_min, x_max], [y_min, y_max])`; leaving it is an error.
    pub bounds: ([f64; 2], [f64; 2]),
    pub max_points: usize,
}

impl Default for DescentSettings {
    fn default() -> Self {
        DescentSettings {
            max_step: 1e-2,
            min_step: 1e-6,
            gradient_tolerance: 1e-6,
            capture_radius: 1e-3,
            bounds: ([-2.5, 1.5], [-1.0, 2.5]),
            max_points: 200_000,
        }
    }
}

/// Fraction of the first-order energy drop a step must achieve.
const SUFFICIENT_DECREASE: f64 = 0.1;

/// Departure distance from a saddle along the unstable eigenvector.
pub const SADDLE_DEPARTURE: f64 = 1e-3;

/// `sum_i |p_i - p_{i-1}|`.
pub fn arc_length(points: &[Vec2]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "arc length needs at least two points"));
    }
    Ok(points.windows(2).map(|w| w[1].distance(w[0])).sum())
}

fn descent_direction(model: &PesModel, p: Vec2) -> Vec2 {
    let g = model.gradient(p);
    let n = g.norm();
    if n == 0.0 {
        Vec2::ZERO
    } else {
        g * (-1.0 / n)
    }
}

fn rk4_step(model: &PesModel, p: Vec2, h: f64) -> Vec2 {
    let k1 = descent_direction(model, p);
    let k2 = descent_direction(model, p + k1 * (0.5 * h));
    let k3 = descent_direction(model, p + k2 * (0.5 * h));
    let k4 = descent_direction(model, p + k3 * h);
    p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

fn in_bounds(p: Vec2, bounds: &([f64; 2], [f64; 2])) -> bool {
    let ([x0, x1], [y0, y1]) = *bounds;
    p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1
}

/// Follow the steepest-descent curve from `start` down to a minimum.
///
/// `minima` are capture targets: entering `capture_radius` of one ends the
/// trace with the minimum itself as the last point. Without a capture the
/// trace ends when the raw gradient drops below `gradient_tolerance`, or
/// when step halving stalls next to a minimum.
pub fn trace_descent(
    model: &PesModel,
    start: Vec2,
    settings: &DescentSettings,
    minima: &[Vec2],
) -> Result<Vec<PathPoint>> {
    let raw_grad = |p: Vec2| model.gradient(p).norm() / model.energy_scale;
    let g0 = raw_grad(start);
    if g0 < settings.gradient_tolerance {
        return Err(Error::StationaryStart { start, gradient_norm: g0 });
    }
    if !in_bounds(start, &settings.bounds) {
        return Err(Error::PathEscape { at: start });
    }

    let mut p = start;
    let mut e = model.evaluate(p);
    let mut s = 0.0;
    let mut out = vec![PathPoint { s, position: p, energy: e }];
    let mut h = settings.max_step;

    while out.len() < settings.max_points {
        if let Some(&m) = minima.iter().find(|m| m.distance(p) < settings.capture_radius) {
            if m != p {
                s += m.distance(p);
                out.push(PathPoint { s, position: m, energy: model.evaluate(m) });
            }
            return Ok(out);
        }
        if raw_grad(p) < settings.gradient_tolerance {
            return Ok(out);
        }

        let q = rk4_step(model, p, h);
        let eq = model.evaluate(q);
        // a unit-speed step of length h should lower V by about h |g|
        let expected_drop = h * model.gradient(p).norm();
        if !(eq < e - SUFFICIENT_DECREASE * expected_drop) {
            h *= 0.5;
            if h < settings.min_step {
                // stalled: fine if we are sitting in a basin bottom
                let hess = model.hessian(p);
                let (lo, _) = hess.eigenvalues();
                let newton = hess.solve(model.gradient(p)).map(|d| d.norm());
                if lo > 0.0 && newton.is_some_and(|d| d < 10.0 * settings.min_step) {
                    return Ok(out);
                }
                return Err(Error::StepUnderflow { at: p, min_step: settings.min_step });
            }
            continue;
        }
        if !in_bounds(q, &settings.bounds) {
            return Err(Error::PathEscape { at: q });
        }
        s += q.distance(p);
        p = q;
        e = eq;
        out.push(PathPoint { s, position: p, energy: e });
        h = (2.0 * h).min(settings.max_step);
    }
    Err(Error::StepUnderflow { at: p, min_step: settings.min_step })
}

/// Unstable direction of a saddle (unit vector, sign arbitrary).
pub fn unstable_direction(model: &PesModel, saddle: Vec2) -> Vec2 {
    let h = model.hessian(saddle);
    let (lo, _) = h.eigenvalues();
    h.eigenvector(lo)
}

/// The minimum-energy path joining M3 to M1 through TS2, M2 and TS1.
#[derive(Debug, Clone)]
pub struct ReactionPath {
    pub points: Vec<PathPoint>,
    /// (reactants, products)
    pub endpoints: (StationaryPoint, StationaryPoint),
    /// Interior stationary points in traversal order.
    pub via: Vec<StationaryPoint>,
}

impl ReactionPath {
    pub fn positions(&self) -> Vec<Vec2> {
        self.points.iter().map(|p| p.position).collect()
    }

    pub fn total_length(&self) -> f64 {
        self.points.last().map_or(0.0, |p| p.s)
    }

    /// Position at arc length `s` by linear interpolation (clamped).
    pub fn position_at(&self, s: f64) -> Vec2 {
        let pts = &self.points;
        if s <= pts[0].s {
            return pts[0].position;
        }
        let last = pts[pts.len() - 1];
        if s >= last.s {
            return last.position;
        }
        let i = pts.partition_point(|p| p.s <= s);
        let (a, b) = (pts[i - 1], pts[i]);
        let f = (s - a.s) / (b.s - a.s);
        a.position + (b.position - a.position) * f
    }

    /// `n` points equally spaced in arc length, endpoints included.
    pub fn resample(&self, n: usize) -> Vec<Vec2> {
        let total = self.total_length();
        (0..n)
            .map(|j| {
                let s = if n == 1 { 0.0 } else { total * j as f64 / (n - 1) as f64 };
                self.position_at(s)
            })
            .collect()
    }

    /// Arc length of the path point closest to `p`.
    pub fn s_of_nearest(&self, p: Vec2) -> f64 {
        self.points
            .iter()
            .min_by(|a, b| a.position.distance(p).total_cmp(&b.position.distance(p)))
            .map_or(0.0, |q| q.s)
    }

    /// CSV with columns `s,x,y,V`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "s,x,y,V")?;
        for p in &self.points {
            writeln!(w, "{:.10e},{:.10e},{:.10e},{:.10e}", p.s, p.position.x, p.position.y, p.energy)?;
        }
        Ok(())
    }
}

/// Trace both descents from a saddle; returns `(toward a, toward b)`.
fn descend_both_ways(
    model: &PesModel,
    saddle: &StationaryPoint,
    a: &StationaryPoint,
    b: &StationaryPoint,
    settings: &DescentSettings,
    minima: &[Vec2],
) -> Result<(Vec<PathPoint>, Vec<PathPoint>)> {
    let v = unstable_direction(model, saddle.position);
    let mut legs = Vec::with_capacity(2);
    for sign in [1.0, -1.0] {
        let start = saddle.position + v * (sign * SADDLE_DEPARTURE);
        let mut leg = trace_descent(model, start, settings, minima)?;
        // include the saddle itself and re-zero the arc length
        let head = PathPoint { s: 0.0, position: saddle.position, energy: saddle.energy };
        let offset = start.distance(saddle.position);
        for p in &mut leg {
            p.s += offset;
        }
        leg.insert(0, head);
        legs.push(leg);
    }
    let lands = |leg: &[PathPoint], m: &StationaryPoint| {
        leg.last().is_some_and(|p| p.position.distance(m.position) < 1e-3)
    };
    let (l0, l1) = (legs.remove(0), legs.remove(0));
    if lands(&l0, a) && lands(&l1, b) {
        Ok((l0, l1))
    } else if lands(&l1, a) && lands(&l0, b) {
        Ok((l1, l0))
    } else {
        Err(Error::TopologyMismatch(format!(
            "descents from saddle ({:.4}, {:.4}) did not reach the expected minima",
            saddle.position.x, saddle.position.y
        )))
    }
}

/// Assemble the full M3 -> TS2 -> M2 -> TS1 -> M1 path with one arc-length
/// coordinate starting at M3.
pub fn build_full_path(model: &PesModel, settings: &DescentSettings) -> Result<ReactionPath> {
    let pts = MuellerBrownPoints::locate(model)?;
    let minima: Vec<Vec2> = pts.minima().iter().map(|m| m.position).collect();

    let (ts2_m3, ts2_m2) = descend_both_ways(model, &pts.ts2, &pts.m3, &pts.m2, settings, &minima)?;
    let (ts1_m2, ts1_m1) = descend_both_ways(model, &pts.ts1, &pts.m2, &pts.m1, settings, &minima)?;

    let mut positions: Vec<Vec2> = Vec::new();
    let mut push = |p: Vec2| {
        if positions.last() != Some(&p) {
            positions.push(p);
        }
    };
    ts2_m3.iter().rev().for_each(|p| push(p.position));
    ts2_m2.iter().for_each(|p| push(p.position));
    ts1_m2.iter().rev().for_each(|p| push(p.position));
    ts1_m1.iter().for_each(|p| push(p.position));

    let mut s = 0.0;
    let mut points = Vec::with_capacity(positions.len());
    for (i, &p) in positions.iter().enumerate() {
        if i > 0 {
            s += p.distance(positions[i - 1]);
        }
        points.push(PathPoint { s, position: p, energy: model.evaluate(p) });
    }
    Ok(ReactionPath { points, endpoints: (pts.m3, pts.m1), via: vec![pts.ts2, pts.m2, pts.ts1] })
}
