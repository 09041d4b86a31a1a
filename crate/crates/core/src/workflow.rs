//! Ensemble runs at one packet momentum: the Bohmian ensemble with the wave
//! function's restricted norm, the paired `rho0` classical ensemble and the
//! Wigner classical ensemble. Statistics are accumulated while integrating so
//! large ensembles never hold full trajectories in memory.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{equivariance, EquivarianceReport, ProbabilitySeries, RegionCounter, SeriesMeta};
use crate::bohmian::{run_bohmian, BohmianSettings};
use crate::classical::{
    integrate_classical, integrate_with, ClassicalStepping, EnsembleSpec, PhasePoint, Sampling, Trajectory,
    TrajectoryKind, TrajectorySample, DEFAULT_SIGMA_SQ, PROTON_MASS,
};
use crate::error::Result;
use crate::geometry::Vec2;
use crate::pes::{FrontierLine, Potential};
use crate::quantum::{initial_packet, restricted_norm, GridSpec, LeakWarning, WaveField};

/// Everything needed to run one momentum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudySettings {
    pub grid: GridSpec,
    pub center: Vec2,
    pub sigma_sq: f64,
    pub count: usize,
    pub seed: u64,
    pub t_final: f64,
    pub classical: ClassicalStepping,
    /// Report stride of the Bohmian run in wave steps.
    pub bohmian_stride: usize,
    pub node_floor: f64,
    pub line: FrontierLine,
    pub run_bohmian: bool,
    pub run_classical_rho0: bool,
    pub run_classical_wigner: bool,
    /// Particle ids whose full trajectories are kept.
    pub record: Vec<usize>,
    /// Times at which the Bohmian histogram is compared with `|Psi|^2`.
    pub equivariance_times: Vec<f64>,
    /// Histogram block edge in grid cells.
    pub equivariance_block: usize,
}

impl StudySettings {
    pub fn new(grid: GridSpec, center: Vec2) -> Self {
        StudySettings {
            grid,
            center,
            sigma_sq: DEFAULT_SIGMA_SQ,
            count: 50_000,
            seed: 1,
            t_final: 700.0,
            classical: ClassicalStepping::default(),
            bohmian_stride: 20,
            node_floor: crate::bohmian::DEFAULT_NODE_FLOOR,
            line: FrontierLine::default(),
            run_bohmian: true,
            run_classical_rho0: true,
            run_classical_wigner: true,
            record: Vec::new(),
            equivariance_times: Vec::new(),
            equivariance_block: 4,
        }
    }

    pub fn ensemble(&self, p0: f64, sampling: Sampling) -> EnsembleSpec {
        EnsembleSpec {
            count: self.count,
            sampling,
            center: self.center,
            sigma_sq: (self.sigma_sq, self.sigma_sq),
            p0,
            mass: self.grid.mass,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.grid.validate()?;
        self.ensemble(0.0, Sampling::Rho0).validate()?;
        ClassicalStepping { t_final: self.t_final, ..self.classical }.validate()?;
        if self.bohmian_stride == 0 {
            return Err(crate::Error::invalid("bohmian.stride", "must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
pub struct StudyResult {
    pub p0: f64,
    pub bohmian: Option<ProbabilitySeries>,
    pub classical_rho0: Option<ProbabilitySeries>,
    pub classical_wigner: Option<ProbabilitySeries>,
    /// Recorded Bohmian trajectories, ordered as `record`.
    pub bohmian_trajectories: Vec<Trajectory>,
    /// Classical `rho0` partners of the recorded Bohmian trajectories.
    pub classical_trajectories: Vec<Trajectory>,
    pub equivariance: Vec<EquivarianceReport>,
    pub node_clamps: u64,
    /// Bohmian particles frozen at the grid edge.
    pub escaped: usize,
    pub leak_warnings: Vec<LeakWarning>,
}

/// `W`/`Wbar` of a classical ensemble. Trajectories are integrated in
/// parallel; only their in-region flags are kept.
pub fn classical_probability<P: Potential + ?Sized>(
    potential: &P,
    initials: &[PhasePoint],
    mass: f64,
    stepping: &ClassicalStepping,
    line: FrontierLine,
    meta: SeriesMeta,
) -> Result<ProbabilitySeries> {
    stepping.validate()?;
    let samples = stepping.sample_count();
    let flags: Vec<(Vec<bool>, Vec<bool>)> = initials
        .par_iter()
        .map(|&ic| {
            let mut inside = Vec::with_capacity(samples);
            let mut ever = Vec::with_capacity(samples);
            let mut last: Option<Vec2> = None;
            let mut entered = false;
            integrate_with(potential, ic, mass, stepping, |_, _, x, _| {
                entered |= match last {
                    None => line.in_products_region(x),
                    Some(a) => line.entry_fraction(a, x).is_some(),
                };
                last = Some(x);
                inside.push(line.in_products_region(x));
                ever.push(entered);
            });
            (inside, ever)
        })
        .collect();
    let n = initials.len().max(1) as f64;
    let mut series = ProbabilitySeries { meta: SeriesMeta { n: initials.len(), ..meta }, ..Default::default() };
    for k in 0..samples {
        series.times.push(k as f64 * stepping.stride as f64 * stepping.dt);
        series.w.push(flags.iter().filter(|f| f.0[k]).count() as f64 / n);
        series.wbar.push(flags.iter().filter(|f| f.1[k]).count() as f64 / n);
    }
    Ok(series)
}

/// Bohmian ensemble started from the `rho0` positions, together with the
/// restricted norm of the wave function on the same time axis.
pub fn bohmian_probability<P: Potential + ?Sized>(
    potential: &P,
    settings: &StudySettings,
    p0: f64,
) -> Result<(ProbabilitySeries, StudyResult)> {
    let spec = settings.ensemble(p0, Sampling::Rho0);
    let initials: Vec<Vec2> = spec.sample().iter().map(|s| s.position).collect();
    let field = initial_packet(&settings.grid, settings.center, spec.sigma_sq, spec.momentum_center())?;
    bohmian_from(potential, settings, p0, field, &initials)
}

fn bohmian_from<P: Potential + ?Sized>(
    potential: &P,
    settings: &StudySettings,
    p0: f64,
    field: WaveField,
    initials: &[Vec2],
) -> Result<(ProbabilitySeries, StudyResult)> {
    let meta = SeriesMeta { sampling: "bohmian".into(), p0, n: initials.len(), seed: settings.seed };
    let mut counter = RegionCounter::new(settings.line, meta);
    let mut result = StudyResult { p0, ..Default::default() };
    let mut recorded: Vec<Trajectory> = settings
        .record
        .iter()
        .filter(|&&id| id < initials.len())
        .map(|&id| Trajectory { id, kind: TrajectoryKind::Bohmian, samples: Vec::new(), node_clamps: 0 })
        .collect();
    let wave_dt = settings.grid.dt;
    let bsettings = BohmianSettings { t_final: settings.t_final, stride: settings.bohmian_stride, node_floor: settings.node_floor };
    let outcome = run_bohmian(potential, field, initials, &bsettings, |frame| {
        counter.record(frame.t, frame.positions)?;
        let snapshot = frame.propagator.snapshot();
        counter.record_restricted_norm(restricted_norm(&snapshot, &settings.line));
        for tr in recorded.iter_mut() {
            tr.samples.push(TrajectorySample { t: frame.t, position: frame.positions[tr.id], momentum: frame.momenta[tr.id] });
        }
        if settings.equivariance_times.iter().any(|&t| (t - frame.t).abs() < 0.5 * wave_dt) {
            result.equivariance.push(equivariance(frame.positions, &snapshot, settings.equivariance_block, 4.0, 10.0));
        }
        Ok(())
    })?;
    for tr in recorded.iter_mut() {
        tr.node_clamps = outcome.node_clamps[tr.id];
    }
    result.node_clamps = outcome.node_clamps.iter().map(|&c| c as u64).sum();
    result.escaped = outcome.escaped.iter().filter(|&&e| e).count();
    result.leak_warnings = outcome.leak_warnings;
    result.bohmian_trajectories = recorded;
    Ok((counter.finish(), result))
}

/// Run every enabled ensemble at momentum `p0`.
pub fn study_p0<P: Potential + ?Sized>(potential: &P, settings: &StudySettings, p0: f64) -> Result<StudyResult> {
    settings.validate()?;
    let mass = settings.grid.mass;
    let stepping = ClassicalStepping { t_final: settings.t_final, ..settings.classical };
    let mut result = if settings.run_bohmian {
        let (series, mut r) = bohmian_probability(potential, settings, p0)?;
        r.bohmian = Some(series);
        r
    } else {
        StudyResult { p0, ..Default::default() }
    };
    let meta = |sampling: Sampling| SeriesMeta { sampling: sampling.as_str().into(), p0, n: settings.count, seed: settings.seed };
    if settings.run_classical_rho0 {
        let initials = settings.ensemble(p0, Sampling::Rho0).sample();
        result.classical_rho0 =
            Some(classical_probability(potential, &initials, mass, &stepping, settings.line, meta(Sampling::Rho0))?);
        for &id in settings.record.iter().filter(|&&id| id < initials.len()) {
            // a partner starts exactly where its Bohmian particle does, so the
            // grid's momentum error does not show up as an initial offset
            let start = match result.bohmian_trajectories.iter().find(|t| t.id == id) {
                Some(q) => q.initial(),
                None => initials[id],
            };
            let mut tr = integrate_classical(potential, start, mass, &stepping)?;
            tr.id = id;
            result.classical_trajectories.push(tr);
        }
    }
    if settings.run_classical_wigner {
        let initials = settings.ensemble(p0, Sampling::Wigner).sample();
        result.classical_wigner =
            Some(classical_probability(potential, &initials, mass, &stepping, settings.line, meta(Sampling::Wigner))?);
    }
    Ok(result)
}

/// Default settings on a grid of `n x n` points centred on `center`.
pub fn default_settings(n: usize, center: Vec2) -> StudySettings {
    StudySettings::new(GridSpec { mass: PROTON_MASS, ..GridSpec::default().with_points(n, n) }, center)
}
