//! Command-line driver. Each subcommand writes its data files plus a
//! `manifest.toml` into the output directory.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::analysis::{
    arrival_time, asymptotic_products, caratheodory_window, paired_difference, write_sweep_csv, ProbabilitySeries,
    SeriesMeta, SweepRow,
};
use crate::bohmian::quantum_potential;
use crate::classical::{mean_energy_diagram, EnsembleSpec, Sampling};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::io::{read_trajectories, write_trajectories, Manifest};
use crate::pes::{seed_grid, MuellerBrownPoints, NewtonSettings, PesModel};
use crate::quantum::{initial_packet, restricted_norm, Propagator};
use crate::reaction_path::{build_full_path, DescentSettings};
use crate::workflow::{study_p0, StudyResult};

/// Overrides the output directory from the config file (the `--out` flag
/// still wins).
pub const OUT_ENV: &str = "HJREACT_OUT";

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "hjreact", version, about = "Reaction paths and classical/Bohmian trajectories on the Müller-Brown surface")]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub p0: Option<f64>,
    /// Comma-separated momenta, e.g. `1,2,3.5`.
    #[arg(long, global = true, value_delimiter = ',')]
    pub sweep: Option<Vec<f64>>,
    /// Ensemble size.
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads (0 = all cores). Outputs do not depend on it.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Grid points as `NXxNY`.
    #[arg(long, global = true, value_parser = parse_grid)]
    pub grid: Option<(usize, usize)>,
    /// Wave-function time step.
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long, global = true)]
    pub tfinal: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Locate minima and saddles.
    Stationary,
    /// Minimum-energy path M3 -> TS2 -> M2 -> TS1 -> M1.
    Rp,
    /// Mean packet energy against p0.
    EnergyDiagram,
    /// Classical ensembles at `p0`.
    Classical,
    /// Wave-packet propagation at `p0`: restricted norm and final fields.
    Quantum,
    /// Bohmian ensemble at `p0` with classical partners.
    Bohmian,
    /// All ensembles over the sweep momenta.
    Sweep,
    /// Carathéodory matrix of one stored trajectory against the path.
    Cara {
        /// Trajectory CSV written by `classical` or `bohmian`.
        #[arg(long)]
        traj: PathBuf,
        /// Trajectory id within the file.
        #[arg(long, default_value_t = 0)]
        id: usize,
        /// Write long-format CSV instead of binary.
        #[arg(long)]
        csv: bool,
        /// End the time window when the trajectory reaches this fraction
        /// of the path length.
        #[arg(long)]
        arrival: Option<f64>,
    },
}

fn parse_grid(s: &str) -> std::result::Result<(usize, usize), String> {
    let (a, b) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected NXxNY, got `{s}`"))?;
    let nx = a.trim().parse().map_err(|_| format!("bad NX in `{s}`"))?;
    let ny = b.trim().parse().map_err(|_| format!("bad NY in `{s}`"))?;
    Ok((nx, ny))
}

/// Config file (or defaults) with environment and flag overrides applied.
pub fn resolve_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if let Some(dir) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
        cfg.out = PathBuf::from(dir);
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = common.p0 {
        cfg.p0 = v;
    }
    if let Some(v) = &common.sweep {
        cfg.sweep = v.clone();
    }
    if let Some(v) = common.n {
        cfg.ensemble.n = v;
    }
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.workers {
        cfg.workers = v;
    }
    if let Some((nx, ny)) = common.grid {
        cfg.grid.nx = nx;
        cfg.grid.ny = ny;
    }
    if let Some(v) = common.dt {
        cfg.grid.dt = v;
    }
    if let Some(v) = common.tfinal {
        cfg.t_final = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

struct Output {
    dir: PathBuf,
    manifest: Manifest,
}

impl Output {
    fn new(cfg: &RunConfig, command: &str) -> Result<Self> {
        std::fs::create_dir_all(&cfg.out)?;
        // the hash covers what determines the results, not where or how fast
        let hashed = RunConfig { out: PathBuf::new(), workers: 0, ..cfg.clone() };
        Ok(Output { dir: cfg.out.clone(), manifest: Manifest::new(command, &hashed.to_toml(), cfg.seed) })
    }

    fn write(&mut self, name: &str, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
        let mut w = BufWriter::new(File::create(self.dir.join(name))?);
        body(&mut w)?;
        w.flush()?;
        drop(w);
        self.manifest.add(&self.dir, name)
    }

    /// Record a file written by other means (plus its sidecar, if any).
    fn written(&mut self, name: &str) -> Result<()> {
        self.manifest.add(&self.dir, name)?;
        let sidecar = format!("{name}.toml");
        if self.dir.join(&sidecar).exists() {
            self.manifest.add(&self.dir, &sidecar)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<PathBuf> {
        self.manifest.write(&self.dir)?;
        Ok(self.dir)
    }
}

fn p0_tag(p0: f64) -> String {
    format!("{p0}")
}

fn cmd_stationary(cfg: &RunConfig, model: &PesModel, out: &mut Output) -> Result<()> {
    let s = &cfg.stationary;
    let seeds = seed_grid(s.x_range, s.y_range, s.seeds_nx, s.seeds_ny);
    let found = model.find_stationary_points(&seeds, &NewtonSettings::default())?;
    out.write("stationary.csv", |w| {
        writeln!(w, "kind,x,y,V,lambda1,lambda2")?;
        for p in &found.points {
            writeln!(
                w,
                "{},{:.10},{:.10},{:.10e},{:.10e},{:.10e}",
                p.kind.as_str(),
                p.position.x,
                p.position.y,
                p.energy,
                p.hessian_eigenvalues.0,
                p.hessian_eigenvalues.1
            )?;
        }
        Ok(())
    })
}

fn cmd_rp(model: &PesModel, out: &mut Output) -> Result<()> {
    let path = build_full_path(model, &DescentSettings::default())?;
    out.write("rp.csv", |w| path.write_csv(w))
}

fn cmd_energy_diagram(cfg: &RunConfig, model: &PesModel, out: &mut Output) -> Result<()> {
    let pts = MuellerBrownPoints::locate(model)?;
    let spec = EnsembleSpec {
        count: cfg.ensemble.n,
        sampling: Sampling::Rho0,
        center: pts.m3.position,
        sigma_sq: (cfg.ensemble.sigma_sq, cfg.ensemble.sigma_sq),
        p0: 0.0,
        mass: cfg.ensemble.mass,
        seed: cfg.seed,
    };
    let grid: Vec<f64> = (0..=120).map(|k| k as f64 * 0.1).collect();
    let rows = mean_energy_diagram(model, &grid, &spec)?;
    out.write("energy_diagram.csv", |w| {
        writeln!(w, "p0,E_mean,E_mean_rho0,E_center,V_TS1,V_TS2")?;
        for r in &rows {
            writeln!(
                w,
                "{:.2},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                r.p0, r.mean_energy, r.mean_energy_rho0, r.point_energy, pts.ts1.energy, pts.ts2.energy
            )?;
        }
        Ok(())
    })
}

fn write_series(out: &mut Output, name: &str, series: &ProbabilitySeries) -> Result<()> {
    out.write(name, |w| series.write_csv(w))
}

fn write_study(cfg: &RunConfig, model: &PesModel, out: &mut Output, r: &StudyResult) -> Result<()> {
    let tag = p0_tag(r.p0);
    let mass = cfg.ensemble.mass;
    if let Some(s) = &r.bohmian {
        write_series(out, &format!("prob_bohmian_p0_{tag}.csv"), s)?;
    }
    if let Some(s) = &r.classical_rho0 {
        write_series(out, &format!("prob_classical_rho0_p0_{tag}.csv"), s)?;
    }
    if let Some(s) = &r.classical_wigner {
        write_series(out, &format!("prob_classical_wigner_p0_{tag}.csv"), s)?;
    }
    if !r.bohmian_trajectories.is_empty() {
        out.write(&format!("traj_bohmian_p0_{tag}.csv"), |w| write_trajectories(w, &r.bohmian_trajectories, model, mass))?;
    }
    if !r.classical_trajectories.is_empty() {
        out.write(&format!("traj_classical_p0_{tag}.csv"), |w| {
            write_trajectories(w, &r.classical_trajectories, model, mass)
        })?;
    }
    for q in &r.bohmian_trajectories {
        if let Some(c) = r.classical_trajectories.iter().find(|c| c.id == q.id) {
            let d = paired_difference(q, c, model, mass)?;
            out.write(&format!("pair_p0_{tag}_id_{}.csv", q.id), |w| d.write_csv(w))?;
        }
    }
    Ok(())
}

fn cmd_ensembles(cfg: &RunConfig, model: &PesModel, out: &mut Output, bohmian: bool) -> Result<()> {
    let pts = MuellerBrownPoints::locate(model)?;
    let mut settings = cfg.study(pts.m3.position);
    settings.run_bohmian = bohmian && cfg.runs.bohmian;
    if !bohmian {
        settings.run_classical_rho0 = cfg.runs.classical_rho0;
        settings.run_classical_wigner = cfg.runs.classical_wigner;
    }
    let r = study_p0(model, &settings, cfg.p0)?;
    write_study(cfg, model, out, &r)
}

fn cmd_quantum(cfg: &RunConfig, model: &PesModel, out: &mut Output) -> Result<()> {
    let pts = MuellerBrownPoints::locate(model)?;
    let grid = cfg.grid_spec();
    let sigma = (cfg.ensemble.sigma_sq, cfg.ensemble.sigma_sq);
    let field = initial_packet(&grid, pts.m3.position, sigma, crate::Vec2::new(-cfg.p0, cfg.p0))?;
    let line = crate::pes::FrontierLine::default();
    let mut prop = Propagator::new(model, field)?;
    let steps = (cfg.t_final / grid.dt).round() as usize;
    let mut series = ProbabilitySeries {
        meta: SeriesMeta { sampling: "quantum".into(), p0: cfg.p0, n: 0, seed: cfg.seed },
        ..Default::default()
    };
    series.times.push(0.0);
    series.p.push(restricted_norm(&prop.snapshot(), &line));
    for step in 1..=steps {
        prop.step()?;
        if step % cfg.bohmian.stride == 0 {
            series.times.push(prop.time());
            series.p.push(restricted_norm(&prop.snapshot(), &line));
        }
    }
    let tag = p0_tag(cfg.p0);
    write_series(out, &format!("prob_quantum_p0_{tag}.csv"), &series)?;
    let last = prop.snapshot();
    let name = format!("psi_p0_{tag}_t_{}.bin", last.t);
    last.write_binary(&out.dir.join(&name))?;
    out.written(&name)?;
    let qp = quantum_potential(model, &last, grid.mass);
    let name = format!("qpot_p0_{tag}_t_{}.bin", last.t);
    qp.write_binary(&out.dir.join(&name))?;
    out.written(&name)?;
    if !prop.warnings.is_empty() {
        eprintln!(
            "warning: density reached the grid edge {} times (max fraction {:e})",
            prop.warnings.len(),
            prop.warnings.iter().map(|w| w.fraction).fold(0.0, f64::max)
        );
    }
    Ok(())
}

fn cmd_sweep(cfg: &RunConfig, model: &PesModel, out: &mut Output) -> Result<()> {
    let pts = MuellerBrownPoints::locate(model)?;
    let settings = cfg.study(pts.m3.position);
    let mut rows = Vec::new();
    for &p0 in &cfg.sweep {
        let r = study_p0(model, &settings, p0)?;
        write_study(cfg, model, out, &r)?;
        let wbar = |s: &Option<ProbabilitySeries>| s.as_ref().map_or(Ok(f64::NAN), |s| asymptotic_products(s, cfg.t_final));
        rows.push(SweepRow {
            p0,
            wbar_bohm: wbar(&r.bohmian)?,
            wbar_cl_rho0: wbar(&r.classical_rho0)?,
            wbar_cl_wigner: wbar(&r.classical_wigner)?,
        });
    }
    out.write("sweep.csv", |w| write_sweep_csv(&rows, w))
}

fn cmd_cara(
    cfg: &RunConfig,
    model: &PesModel,
    out: &mut Output,
    traj: &Path,
    id: usize,
    csv: bool,
    arrival: Option<f64>,
) -> Result<()> {
    let trajs = read_trajectories(BufReader::new(File::open(traj)?))?;
    let tr = trajs
        .iter()
        .find(|t| t.id == id)
        .ok_or_else(|| Error::invalid("id", format!("trajectory {id} not found in {}", traj.display())))?;
    let path = build_full_path(model, &DescentSettings::default())?;
    let t0 = tr.samples[0].t;
    let t_end = arrival.and_then(|f| arrival_time(tr, &path, f)).unwrap_or(tr.last().t);
    let m = caratheodory_window(tr, &path, t0, t_end, cfg.cara.points)?;
    let stem = format!("cara_{}_id_{id}", tr.kind.as_str());
    if csv {
        out.write(&format!("{stem}.csv"), |w| m.write_csv(w))?;
    } else {
        let name = format!("{stem}.bin");
        m.write_binary(&out.dir.join(&name))?;
        out.written(&name)?;
    }
    println!("diagonal band fraction (15%): {:.4}", m.diagonal_band_fraction(0.15));
    Ok(())
}

/// Run a parsed command line; returns the output directory.
pub fn run(cli: &Cli) -> Result<PathBuf> {
    let cfg = resolve_config(&cli.common)?;
    if cfg.workers > 0 {
        // a second call in the same process keeps the first pool; harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global();
    }
    let model = cfg.model()?;
    let name = match &cli.command {
        Command::Stationary => "stationary",
        Command::Rp => "rp",
        Command::EnergyDiagram => "energy-diagram",
        Command::Classical => "classical",
        Command::Quantum => "quantum",
        Command::Bohmian => "bohmian",
        Command::Sweep => "sweep",
        Command::Cara { .. } => "cara",
    };
    let mut out = Output::new(&cfg, name)?;
    match &cli.command {
        Command::Stationary => cmd_stationary(&cfg, &model, &mut out)?,
        Command::Rp => cmd_rp(&model, &mut out)?,
        Command::EnergyDiagram => cmd_energy_diagram(&cfg, &model, &mut out)?,
        Command::Classical => cmd_ensembles(&cfg, &model, &mut out, false)?,
        Command::Quantum => cmd_quantum(&cfg, &model, &mut out)?,
        Command::Bohmian => cmd_ensembles(&cfg, &model, &mut out, true)?,
        Command::Sweep => cmd_sweep(&cfg, &model, &mut out)?,
        Command::Cara { traj, id, csv, arrival } => cmd_cara(&cfg, &model, &mut out, traj, *id, *csv, *arrival)?,
    }
    std::fs::write(cfg.out.join("config.toml"), cfg.to_toml())?;
    out.finish()
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_IO,
        e if e.is_usage() => EXIT_USAGE,
        _ => EXIT_NUMERICAL,
    }
}
