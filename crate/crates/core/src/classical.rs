//! Classical trajectory ensembles.
//!
//! Initial conditions come either from `rho0 = |Psi0|^2 delta(p - p_c)` (all
//! particles share the packet momentum) or from the Wigner distribution of
//! the initial Gaussian packet. Trajectories are integrated with velocity
//! Verlet using the explicit mass (no mass-scaled coordinates).
//!
//! Sampling is reproducible: trajectory `i` draws from ChaCha8 stream `i` of
//! the ensemble seed, so results do not depend on how the ensemble is split
//! across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pes::Potential;
use crate::HBAR;

/// Proton mass in electron masses, as used throughout.
pub const PROTON_MASS: f64 = 1836.0;
/// Initial packet variance per axis (bohr^2).
pub const DEFAULT_SIGMA_SQ: f64 = 0.0125;
pub const DEFAULT_ENSEMBLE_SIZE: usize = 50_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sampling {
    Rho0,
    Wigner,
}

impl Sampling {
    pub fn as_str(self) -> &'static str {
        match self {
            Sampling::Rho0 => "rho0",
            Sampling::Wigner => "wigner",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    pub sampling: Sampling,
    pub center: Vec2,
    /// Position variance per axis, `(sigma_x^2, sigma_y^2)`.
    pub sigma_sq: (f64, f64),
    /// The packet momentum is `(-p0, p0)`.
    pub p0: f64,
    pub mass: f64,
    pub seed: u64,
}

impl EnsembleSpec {
    /// Default ensemble centred on the reactant minimum.
    pub fn new(center: Vec2, p0: f64, sampling: Sampling, seed: u64) -> Self {
        EnsembleSpec {
            count: DEFAULT_ENSEMBLE_SIZE,
            sampling,
            center,
            sigma_sq: (DEFAULT_SIGMA_SQ, DEFAULT_SIGMA_SQ),
            p0,
            mass: PROTON_MASS,
            seed,
        }
    }

    pub fn momentum_center(&self) -> Vec2 {
        Vec2::new(-self.p0, self.p0)
    }

    /// Per-axis momentum variance of the Wigner distribution,
    /// `hbar^2 / (4 sigma^2)`.
    pub fn wigner_momentum_variance(&self) -> (f64, f64) {
        (
            HBAR * HBAR / (4.0 * self.sigma_sq.0),
            HBAR * HBAR / (4.0 * self.sigma_sq.1),
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("ensemble.count", "must be at least 1"));
        }
        if !(self.sigma_sq.0 > 0.0 && self.sigma_sq.1 > 0.0) {
            return Err(Error::invalid("ensemble.sigma_sq", "must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("ensemble.mass", "must be positive"));
        }
        if !self.p0.is_finite() || !self.center.is_finite() {
            return Err(Error::invalid("ensemble", "center and p0 must be finite"));
        }
        Ok(())
    }

    fn rng_for(&self, id: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id as u64);
        rng
    }

    /// Initial position of particle `id`; shared by both samplings.
    fn draw(&self, id: usize, with_momentum_spread: bool) -> PhasePoint {
        let mut rng = self.rng_for(id);
        let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
        let position = Vec2::new(
            self.center.x + self.sigma_sq.0.sqrt() * normal(),
            self.center.y + self.sigma_sq.1.sqrt() * normal(),
        );
        let mut momentum = self.momentum_center();
        if with_momentum_spread {
            let (vx, vy) = self.wigner_momentum_variance();
            momentum.x += vx.sqrt() * normal();
            momentum.y += vy.sqrt() * normal();
        }
        PhasePoint { position, momentum }
    }

    /// Sample according to `self.sampling`.
    pub fn sample(&self) -> Vec<PhasePoint> {
        match self.sampling {
            Sampling::Rho0 => sample_rho0(self),
            Sampling::Wigner => sample_wigner(self),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub position: Vec2,
    pub momentum: Vec2,
}

/// Positions from `|Psi0|^2`, momenta all exactly `(-p0, p0)`.
pub fn sample_rho0(spec: &EnsembleSpec) -> Vec<PhasePoint> {
    (0..spec.count).map(|i| spec.draw(i, false)).collect()
}

/// Independent Gaussian positions and momenta from the Wigner function of
/// the initial packet. The position of particle `i` equals its `rho0`
/// position for the same seed.
pub fn sample_wigner(spec: &EnsembleSpec) -> Vec<PhasePoint> {
    (0..spec.count).map(|i| spec.draw(i, true)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Classical,
    Bohmian,
}

impl TrajectoryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TrajectoryKind::Classical => "classical",
            TrajectoryKind::Bohmian => "bohmian",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub position: Vec2,
    pub momentum: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub id: usize,
    pub kind: TrajectoryKind,
    pub samples: Vec<TrajectorySample>,
    /// Bohmian only: steps where the velocity had to be held at a node.
    pub node_clamps: u32,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn initial(&self) -> PhasePoint {
        let s = self.samples[0];
        PhasePoint { position: s.position, momentum: s.momentum }
    }

    pub fn last(&self) -> &TrajectorySample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Position at time `t` by linear interpolation between samples (clamped).
    pub fn position_at(&self, t: f64) -> Vec2 {
        let s = &self.samples;
        if t <= s[0].t {
            return s[0].position;
        }
        if t >= s[s.len() - 1].t {
            return s[s.len() - 1].position;
        }
        let i = s.partition_point(|q| q.t <= t);
        let (a, b) = (s[i - 1], s[i]);
        let f = (t - a.t) / (b.t - a.t);
        a.position + (b.position - a.position) * f
    }
}

/// Time stepping for classical runs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassicalStepping {
    pub dt: f64,
    pub t_final: f64,
    /// Record every `stride`-th step.
    pub stride: usize,
}

impl Default for ClassicalStepping {
    fn default() -> Self {
        ClassicalStepping { dt: 0.1, t_final: 700.0, stride: 10 }
    }
}

impl ClassicalStepping {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        if !(self.t_final >= self.dt) {
            return Err(Error::invalid("t_final", "must be at least one time step"));
        }
        if self.stride == 0 {
            return Err(Error::invalid("stride", "must be at least 1"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }

    /// Number of recorded samples including `t = 0`.
    pub fn sample_count(&self) -> usize {
        self.steps() / self.stride + 1
    }
}

/// `|p|^2 / 2m + V(x)`.
pub fn trajectory_energy<P: Potential + ?Sized>(potential: &P, sample: &PhasePoint, mass: f64) -> f64 {
    sample.momentum.norm_sq() / (2.0 * mass) + potential.value(sample.position)
}

/// Velocity-Verlet integration of `x' = p/m`, `p' = -grad V`, calling
/// `observe(step, t, x, p)` on `t = 0` and on every `stride`-th step.
pub fn integrate_with<P, F>(
    potential: &P,
    initial: PhasePoint,
    mass: f64,
    stepping: &ClassicalStepping,
    mut observe: F,
) where
    P: Potential + ?Sized,
    F: FnMut(usize, f64, Vec2, Vec2),
{
    let dt = stepping.dt;
    let mut x = initial.position;
    let mut p = initial.momentum;
    let mut force = -potential.gradient(x);
    observe(0, 0.0, x, p);
    for step in 1..=stepping.steps() {
        p += force * (0.5 * dt);
        x += p * (dt / mass);
        force = -potential.gradient(x);
        p += force * (0.5 * dt);
        if step % stepping.stride == 0 {
            observe(step, step as f64 * dt, x, p);
        }
    }
}

pub fn integrate_classical<P: Potential + ?Sized>(
    potential: &P,
    initial: PhasePoint,
    mass: f64,
    stepping: &ClassicalStepping,
) -> Result<Trajectory> {
    stepping.validate()?;
    let mut samples = Vec::with_capacity(stepping.sample_count());
    integrate_with(potential, initial, mass, stepping, |_, t, position, momentum| {
        samples.push(TrajectorySample { t, position, momentum });
    });
    Ok(Trajectory { id: 0, kind: TrajectoryKind::Classical, samples, node_clamps: 0 })
}

/// Integrate every initial condition, in parallel; trajectory `i` keeps id `i`.
pub fn integrate_ensemble<P: Potential + ?Sized>(
    potential: &P,
    initials: &[PhasePoint],
    mass: f64,
    stepping: &ClassicalStepping,
) -> Result<Vec<Trajectory>> {
    stepping.validate()?;
    initials
        .par_iter()
        .enumerate()
        .map(|(id, &ic)| {
            let mut tr = integrate_classical(potential, ic, mass, stepping)?;
            tr.id = id;
            Ok(tr)
        })
        .collect()
}

/// Spreading energy `hbar^2 / (4 m sigma^2)`.
pub fn spreading_energy(mass: f64, sigma_sq: f64) -> f64 {
    HBAR * HBAR / (4.0 * mass * sigma_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyDiagramRow {
    pub p0: f64,
    /// `p0^2/m + Vbar + delta`: quantum mean energy, equal to the Wigner-ensemble mean.
    pub mean_energy: f64,
    /// `mean_energy - delta`: the `rho0` classical ensemble mean.
    pub mean_energy_rho0: f64,
    /// Single particle at the packet centre with momentum `(-p0, p0)`.
    pub point_energy: f64,
}

/// Mean energies as a function of `p0`. `Vbar` is a Monte-Carlo average over
/// the `rho0` positions of `spec`.
pub fn mean_energy_diagram<P: Potential + ?Sized>(
    potential: &P,
    p0_grid: &[f64],
    spec: &EnsembleSpec,
) -> Result<Vec<EnergyDiagramRow>> {
    spec.validate()?;
    if spec.sigma_sq.0 != spec.sigma_sq.1 {
        return Err(Error::invalid("ensemble.sigma_sq", "energy diagram assumes an isotropic packet"));
    }
    let positions = sample_rho0(spec);
    let v_bar = positions.iter().map(|s| potential.value(s.position)).sum::<f64>() / positions.len() as f64;
    let delta = spreading_energy(spec.mass, spec.sigma_sq.0);
    let v_center = potential.value(spec.center);
    Ok(p0_grid
        .iter()
        .map(|&p0| {
            let kinetic = p0 * p0 / spec.mass;
            EnergyDiagramRow {
                p0,
                mean_energy: kinetic + v_bar + delta,
                mean_energy_rho0: kinetic + v_bar,
                point_energy: kinetic + v_center,
            }
        })
        .collect())
}

/// Smallest `p0` at which `f(p0)` reaches `level`, by linear interpolation of
/// the tabulated rows. `f` must be increasing in `p0` around the crossing.
pub fn crossing_p0(rows: &[EnergyDiagramRow], level: f64, f: impl Fn(&EnergyDiagramRow) -> f64) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let (a, b) = (f(&w[0]), f(&w[1]));
        if a < level && b >= level {
            Some(w[0].p0 + (level - a) / (b - a) * (w[1].p0 - w[0].p0))
        } else {
            None
        }
    })
}
