//! Bohmian (quantum) trajectories by the analytic route: the wave function
//! is propagated on the grid and particles follow its velocity field
//! `v = (hbar/m) Im(grad Psi / Psi)`.
//!
//! Particles advance with explicit midpoint steps of the wave time step.
//! The velocity field is bilinearly interpolated in space and linearly in
//! time between the two most recent wave snapshots.
//!
//! Cells where `|Psi|^2` is below `node_floor * max |Psi|^2` are flagged as
//! nodes. A particle whose step touches a flagged cell retries with 10, 100
//! and 1000 substeps; if all fail it keeps its last valid velocity for the
//! step and the event is counted as a node clamp.
//!
//! A particle whose step would leave the grid is frozen where it is and
//! marked as escaped; the wave function has no absorbing boundary, so such
//! particles belong to the small tail density that reached the edge.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{Trajectory, TrajectoryKind, TrajectorySample};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pes::Potential;
use crate::quantum::{
    field_gradient, write_f64_pairs, write_sidecar, FieldSidecar, GridSpec, LeakWarning, Propagator, WaveField,
};
use crate::HBAR;

pub const DEFAULT_NODE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: GridSpec,
    pub t: f64,
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub node: Vec<bool>,
}

/// Build the velocity field from `Psi` and its gradient.
pub fn velocity_from_gradient(
    grid: &GridSpec,
    t: f64,
    psi: &[Complex64],
    grad_x: &[Complex64],
    grad_y: &[Complex64],
    node_floor: f64,
) -> VelocityField {
    let peak = psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = node_floor * peak;
    let n = grid.len();
    let mut vx = vec![0.0; n];
    let mut vy = vec![0.0; n];
    let mut node = vec![false; n];
    let scale = HBAR / grid.mass;
    for idx in 0..n {
        let z = psi[idx];
        let rho = z.norm_sqr();
        if rho > floor && rho > 0.0 {
            let c = z.conj();
            vx[idx] = scale * (c * grad_x[idx]).im / rho;
            vy[idx] = scale * (c * grad_y[idx]).im / rho;
        } else {
            node[idx] = true;
        }
    }
    VelocityField { grid: *grid, t, vx, vy, node }
}

/// `(hbar/m) Im(grad Psi / Psi)` with the gradient taken spectrally.
pub fn velocity_field(field: &WaveField, mass: f64) -> VelocityField {
    let (gx, gy) = field_gradient(field);
    let grid = GridSpec { mass, ..field.grid };
    velocity_from_gradient(&grid, field.t, &field.psi, &gx, &gy, DEFAULT_NODE_FLOOR)
}

/// Bilinear interpolation weights for a point; `None` outside the grid box.
#[derive(Debug, Clone, Copy)]
struct Stencil {
    idx: [usize; 4],
    w: [f64; 4],
}

fn stencil(grid: &GridSpec, p: Vec2) -> Option<Stencil> {
    if !grid.contains(p) {
        return None;
    }
    // node i sits at x_min + (i + 1/2) dx; clamp into the node hull
    let fx = ((p.x - grid.x_range[0]) / grid.dx() - 0.5).clamp(0.0, (grid.nx - 1) as f64);
    let fy = ((p.y - grid.y_range[0]) / grid.dy() - 0.5).clamp(0.0, (grid.ny - 1) as f64);
    let i = (fx.floor() as usize).min(grid.nx - 2);
    let j = (fy.floor() as usize).min(grid.ny - 2);
    let (tx, ty) = (fx - i as f64, fy - j as f64);
    let base = j * grid.nx + i;
    Some(Stencil {
        idx: [base, base + 1, base + grid.nx, base + grid.nx + 1],
        w: [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty],
    })
}

impl VelocityField {
    /// Interpolated velocity, or `Ok(None)` if the stencil touches a node cell.
    pub fn at(&self, p: Vec2) -> Result<Option<Vec2>> {
        let s = stencil(&self.grid, p).ok_or(Error::OutOfGrid { at: p })?;
        if s.idx.iter().any(|&k| self.node[k]) {
            return Ok(None);
        }
        let mut v = Vec2::ZERO;
        for (k, w) in s.idx.iter().zip(s.w) {
            v += Vec2::new(self.vx[*k], self.vy[*k]) * w;
        }
        Ok(Some(v))
    }
}

/// Velocity at an intermediate time between two snapshots on the same grid.
fn velocity_between(a: &VelocityField, b: &VelocityField, frac: f64, p: Vec2) -> Result<Option<Vec2>> {
    let s = stencil(&a.grid, p).ok_or(Error::OutOfGrid { at: p })?;
    let (wa, wb) = (1.0 - frac, frac);
    let mut v = Vec2::ZERO;
    for (&k, w) in s.idx.iter().zip(s.w) {
        if a.node[k] || b.node[k] {
            return Ok(None);
        }
        v.x += w * (wa * a.vx[k] + wb * b.vx[k]);
        v.y += w * (wa * a.vy[k] + wb * b.vy[k]);
    }
    Ok(Some(v))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Particle {
    position: Vec2,
    velocity: Vec2,
    clamps: u32,
    escaped: bool,
}

/// Midpoint step from `frac0` to `frac1` of the interval between snapshots.
fn midpoint(
    a: &VelocityField,
    b: &VelocityField,
    dt: f64,
    frac0: f64,
    frac1: f64,
    p: Vec2,
) -> Result<Option<(Vec2, Vec2)>> {
    let h = dt * (frac1 - frac0);
    let Some(v0) = velocity_between(a, b, frac0, p)? else { return Ok(None) };
    let half = p + v0 * (0.5 * h);
    let Some(vm) = velocity_between(a, b, 0.5 * (frac0 + frac1), half)? else { return Ok(None) };
    Ok(Some((p + vm * h, vm)))
}

fn advance_particle(a: &VelocityField, b: &VelocityField, dt: f64, part: &mut Particle) -> Result<()> {
    for substeps in [1usize, 10, 100, 1000] {
        let mut p = part.position;
        let mut last_v = part.velocity;
        let mut ok = true;
        for k in 0..substeps {
            let f0 = k as f64 / substeps as f64;
            let f1 = (k + 1) as f64 / substeps as f64;
            match midpoint(a, b, dt, f0, f1, p)? {
                Some((q, v)) => {
                    p = q;
                    last_v = v;
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            part.position = p;
            // momentum is recorded from the field at the new position
            part.velocity = b.at(p)?.unwrap_or(last_v);
            return Ok(());
        }
    }
    let held = part.position + part.velocity * dt;
    if !b.grid.contains(held) {
        return Err(Error::OutOfGrid { at: held });
    }
    part.position = held;
    part.clamps += 1;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BohmianSettings {
    pub t_final: f64,
    /// Report every `stride`-th wave step.
    pub stride: usize,
    pub node_floor: f64,
}

impl Default for BohmianSettings {
    fn default() -> Self {
        BohmianSettings { t_final: 700.0, stride: 20, node_floor: DEFAULT_NODE_FLOOR }
    }
}

/// State handed to observers at `t = 0` and every `stride` steps.
pub struct BohmianFrame<'a> {
    pub step: usize,
    pub t: f64,
    pub positions: &'a [Vec2],
    /// `m v` at each particle.
    pub momenta: &'a [Vec2],
    pub propagator: &'a Propagator,
}

#[derive(Debug, Clone, Default)]
pub struct BohmianOutcome {
    pub node_clamps: Vec<u32>,
    /// Particles that reached the grid edge; they stay at their last
    /// in-grid position with zero velocity from then on.
    pub escaped: Vec<bool>,
    pub leak_warnings: Vec<LeakWarning>,
    pub final_positions: Vec<Vec2>,
}

/// Propagate `field` under `potential` and carry particles from `initials`
/// along, calling `observe` on every reported frame.
pub fn run_bohmian<P, F>(
    potential: &P,
    field: WaveField,
    initials: &[Vec2],
    settings: &BohmianSettings,
    mut observe: F,
) -> Result<BohmianOutcome>
where
    P: Potential + ?Sized,
    F: FnMut(&BohmianFrame<'_>) -> Result<()>,
{
    if settings.stride == 0 {
        return Err(Error::invalid("stride", "must be at least 1"));
    }
    let grid = field.grid;
    let mass = grid.mass;
    let dt = grid.dt;
    let mut prop = Propagator::new(potential, field)?;
    prop.compute_gradient();
    let (gx, gy) = prop.gradient();
    let mut v_prev = velocity_from_gradient(&grid, 0.0, prop.psi(), gx, gy, settings.node_floor);

    let mut particles: Vec<Particle> = initials
        .iter()
        .map(|&p| {
            let velocity = v_prev.at(p)?.unwrap_or(Vec2::ZERO);
            Ok(Particle { position: p, velocity, clamps: 0, escaped: false })
        })
        .collect::<Result<_>>()?;

    let mut positions: Vec<Vec2> = particles.iter().map(|p| p.position).collect();
    let mut momenta: Vec<Vec2> = particles.iter().map(|p| p.velocity * mass).collect();
    observe(&BohmianFrame { step: 0, t: 0.0, positions: &positions, momenta: &momenta, propagator: &prop })?;

    let steps = (settings.t_final / dt).round() as usize;
    for step in 1..=steps {
        prop.step_with_gradient()?;
        let (gx, gy) = prop.gradient();
        let v_next = velocity_from_gradient(&grid, prop.time(), prop.psi(), gx, gy, settings.node_floor);
        particles.par_iter_mut().filter(|part| !part.escaped).try_for_each(|part| {
            match advance_particle(&v_prev, &v_next, dt, part) {
                Err(Error::OutOfGrid { .. }) => {
                    part.escaped = true;
                    part.velocity = Vec2::ZERO;
                    Ok(())
                }
                other => other,
            }
        })?;
        v_prev = v_next;
        if step % settings.stride == 0 {
            for (k, part) in particles.iter().enumerate() {
                positions[k] = part.position;
                momenta[k] = part.velocity * mass;
            }
            observe(&BohmianFrame { step, t: prop.time(), positions: &positions, momenta: &momenta, propagator: &prop })?;
        }
    }
    Ok(BohmianOutcome {
        node_clamps: particles.iter().map(|p| p.clamps).collect(),
        escaped: particles.iter().map(|p| p.escaped).collect(),
        leak_warnings: prop.warnings.clone(),
        final_positions: particles.iter().map(|p| p.position).collect(),
    })
}

/// Full trajectories for every initial position (keep `initials` small:
/// memory grows as particles x recorded frames).
pub fn integrate_bohmian<P: Potential + ?Sized>(
    potential: &P,
    field: WaveField,
    initials: &[Vec2],
    settings: &BohmianSettings,
) -> Result<Vec<Trajectory>> {
    let mut trajs: Vec<Trajectory> = (0..initials.len())
        .map(|id| Trajectory { id, kind: TrajectoryKind::Bohmian, samples: Vec::new(), node_clamps: 0 })
        .collect();
    let outcome = run_bohmian(potential, field, initials, settings, |frame| {
        for (k, tr) in trajs.iter_mut().enumerate() {
            tr.samples.push(TrajectorySample { t: frame.t, position: frame.positions[k], momentum: frame.momenta[k] });
        }
        Ok(())
    })?;
    for (tr, c) in trajs.iter_mut().zip(outcome.node_clamps) {
        tr.node_clamps = c;
    }
    Ok(trajs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumPotentialField {
    pub grid: GridSpec,
    pub t: f64,
    /// Quantum potential `Q`; zero where `valid` is false.
    pub q: Vec<f64>,
    /// `V + Q`.
    pub v_eff: Vec<f64>,
    /// False on node cells and on the outermost ring of cells.
    pub valid: Vec<bool>,
}

/// `Q = (hbar^2 / 4m) [ (1/2) |grad rho / rho|^2 - lap rho / rho ]`,
/// equal to `-(hbar^2 / 2m) lap sqrt(rho) / sqrt(rho)`. Derivatives of rho
/// are assembled from spectral derivatives of `Psi`.
pub fn quantum_potential<P: Potential + ?Sized>(potential: &P, field: &WaveField, mass: f64) -> QuantumPotentialField {
    let g = field.grid;
    let (gx, gy) = field_gradient(field);
    let (gxx, _) = field_gradient(&WaveField { psi: gx.clone(), ..field.clone() });
    let (_, gyy) = field_gradient(&WaveField { psi: gy.clone(), ..field.clone() });
    let peak = field.psi.iter().map(|z| z.norm_sqr()).fold(0.0, f64::max);
    let floor = DEFAULT_NODE_FLOOR * peak;
    let n = g.len();
    let mut q = vec![0.0; n];
    let mut v_eff = vec![0.0; n];
    let mut valid = vec![false; n];
    for idx in 0..n {
        let (i, j) = (idx % g.nx, idx / g.nx);
        let v = potential.value(g.node(idx));
        let z = field.psi[idx];
        let rho = z.norm_sqr();
        let interior = i > 0 && j > 0 && i + 1 < g.nx && j + 1 < g.ny;
        if interior && rho > floor && rho > 0.0 {
            // log-derivatives of psi
            let lx = gx[idx] / z;
            let ly = gy[idx] / z;
            let lxx = gxx[idx] / z;
            let lyy = gyy[idx] / z;
            // grad rho / rho = 2 Re(grad psi / psi); lap rho / rho = 2 Re(lap psi / psi) + 2 |grad psi / psi|^2
            let drx = 2.0 * lx.re;
            let dry = 2.0 * ly.re;
            let lap = 2.0 * (lxx + lyy).re + 2.0 * (lx.norm_sqr() + ly.norm_sqr());
            let bracket = 0.5 * (drx * drx + dry * dry) - lap;
            q[idx] = HBAR * HBAR / (4.0 * mass) * bracket;
            valid[idx] = true;
        }
        v_eff[idx] = v + q[idx];
    }
    QuantumPotentialField { grid: GridSpec { mass, ..g }, t: field.t, q, v_eff, valid }
}

impl QuantumPotentialField {
    /// `(Q, V_eff)` pairs in the wave-function binary layout, plus sidecar.
    pub fn write_binary(&self, path: &std::path::Path) -> Result<()> {
        let values: Vec<[f64; 2]> = self.q.iter().zip(&self.v_eff).map(|(&a, &b)| [a, b]).collect();
        write_f64_pairs(path, &values)?;
        write_sidecar(
            path,
            &FieldSidecar {
                kind: "quantum_potential".into(),
                layout: "row-major, x fastest, little-endian f64 (Q, V_eff) pairs".into(),
                t: self.t,
                norm: f64::NAN,
                grid: self.grid,
            },
        )
    }
}

/// Energy `|p|^2/2m + V` along a Bohmian trajectory, with `p = m v`.
pub fn trajectory_energy_quantum<P: Potential + ?Sized>(
    potential: &P,
    traj: &Trajectory,
    mass: f64,
) -> Result<Vec<(f64, f64)>> {
    if traj.kind != TrajectoryKind::Bohmian {
        return Err(Error::WrongTrajectoryKind { expected: "bohmian", found: traj.kind.as_str() });
    }
    Ok(traj
        .samples
        .iter()
        .map(|s| (s.t, s.momentum.norm_sq() / (2.0 * mass) + potential.value(s.position)))
        .collect())
}
