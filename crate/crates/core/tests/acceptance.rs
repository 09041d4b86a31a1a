//! End-to-end acceptance checks, one line per criterion.
//!
//! `cargo test --release --test acceptance` runs everything (tens of
//! minutes on one core). Criterion numbers given after `--` select a subset,
//! e.g. `cargo test --test acceptance -- 1 2 3`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use hjreact::analysis::{
    arrival_time, asymptotic_products, caratheodory_window, overtake_p0, paired_difference, SweepRow,
    CARATHEODORY_POINTS,
};
use hjreact::classical::{mean_energy_diagram, spreading_energy, crossing_p0, EnsembleSpec, Sampling, Trajectory};
use hjreact::pes::{default_seeds, FreeSpace, MuellerBrownPoints, NewtonSettings, StationaryKind};
use hjreact::quantum::{energy_expectation, free_gaussian_width, initial_packet, restricted_norm, GridSpec, Propagator};
use hjreact::reaction_path::{build_full_path, DescentSettings, ReactionPath};
use hjreact::workflow::{default_settings, study_p0, StudyResult};
use hjreact::{FrontierLine, PesModel, Vec2};

const T_FINAL: f64 = 700.0;
const LARGE_N: usize = 50_000;
const SWEEP_N: usize = 5_000;
const PAIR_P0: f64 = 9.0;
const PAIRS: usize = 200;
const EQUIVARIANCE_TIMES: [f64; 3] = [100.0, 400.0, 700.0];
/// From this momentum on the packet reaches the left edge of the default
/// box; the box is extended to the left at the same point count.
const WIDE_FROM_P0: f64 = 12.0;
const WIDE_X_RANGE: [f64; 2] = [-3.5, 1.5];

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict { pass, detail: detail.into() }
}

fn model() -> &'static PesModel {
    static M: OnceLock<PesModel> = OnceLock::new();
    M.get_or_init(PesModel::default)
}

fn points() -> &'static MuellerBrownPoints {
    static P: OnceLock<MuellerBrownPoints> = OnceLock::new();
    P.get_or_init(|| MuellerBrownPoints::locate(model()).expect("stationary points"))
}

fn path() -> &'static ReactionPath {
    static P: OnceLock<ReactionPath> = OnceLock::new();
    P.get_or_init(|| build_full_path(model(), &DescentSettings::default()).expect("reaction path"))
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let v = f();
    eprintln!("  [{label}: {:.0} s]", start.elapsed().as_secs_f64());
    v
}

fn large_run(p0: f64) -> &'static StudyResult {
    static RUNS: OnceLock<BTreeMap<u64, OnceLock<StudyResult>>> = OnceLock::new();
    let runs = RUNS.get_or_init(|| [4.0f64, 10.0].iter().map(|p| (p.to_bits(), OnceLock::new())).collect());
    runs[&p0.to_bits()].get_or_init(|| {
        timed(&format!("p0 = {p0}, N = {LARGE_N}"), || {
            let mut s = default_settings(256, points().m3.position);
            s.count = LARGE_N;
            s.equivariance_times = EQUIVARIANCE_TIMES.to_vec();
            study_p0(model(), &s, p0).expect("large run")
        })
    })
}

struct Sweep {
    rows: Vec<SweepRow>,
    pairs: StudyResult,
}

fn sweep() -> &'static Sweep {
    static S: OnceLock<Sweep> = OnceLock::new();
    S.get_or_init(|| {
        let mut rows = Vec::new();
        let mut pairs = None;
        for k in 1..=12 {
            let p0 = k as f64;
            let mut s = default_settings(256, points().m3.position);
            s.count = SWEEP_N;
            if p0 >= WIDE_FROM_P0 {
                s.grid.x_range = WIDE_X_RANGE;
            }
            if p0 == PAIR_P0 {
                s.record = (0..PAIRS).collect();
            }
            let r = timed(&format!("sweep p0 = {p0}"), || study_p0(model(), &s, p0).expect("sweep run"));
            let wbar = |x: &Option<_>| asymptotic_products(x.as_ref().unwrap(), T_FINAL).unwrap();
            let row = SweepRow {
                p0,
                wbar_bohm: wbar(&r.bohmian),
                wbar_cl_rho0: wbar(&r.classical_rho0),
                wbar_cl_wigner: wbar(&r.classical_wigner),
            };
            eprintln!(
                "  [p0 {p0}: Wbar bohm {:.4} rho0 {:.4} wigner {:.4}]",
                row.wbar_bohm, row.wbar_cl_rho0, row.wbar_cl_wigner
            );
            rows.push(row);
            if p0 == PAIR_P0 {
                pairs = Some(r);
            }
        }
        Sweep { rows, pairs: pairs.unwrap() }
    })
}

fn criterion_1() -> Verdict {
    let expected = [
        ((-0.558, 1.442), -0.147, StationaryKind::Minimum),
        ((-0.050, 0.467), -0.081, StationaryKind::Minimum),
        ((0.623, 0.028), -0.108, StationaryKind::Minimum),
        ((-0.822, 0.624), -0.041, StationaryKind::Saddle),
        ((0.212, 0.293), -0.072, StationaryKind::Saddle),
    ];
    let found = match model().find_stationary_points(&default_seeds(), &NewtonSettings::default()) {
        Ok(f) => f.points,
        Err(e) => return verdict(false, e.to_string()),
    };
    if found.len() != 5 {
        return verdict(false, format!("{} stationary points", found.len()));
    }
    let mut worst_x: f64 = 0.0;
    let mut worst_e: f64 = 0.0;
    for ((x, y), e, kind) in expected {
        let target = Vec2::new(x, y);
        let Some(p) = found.iter().min_by(|a, b| a.position.distance(target).total_cmp(&b.position.distance(target)))
        else {
            return verdict(false, "none found");
        };
        if p.kind != kind {
            return verdict(false, format!("point near ({x}, {y}) is a {}", p.kind.as_str()));
        }
        worst_x = worst_x.max(p.position.distance(target));
        worst_e = worst_e.max((p.energy - e).abs());
    }
    verdict(worst_x <= 1e-3 && worst_e <= 1e-3, format!("max position error {worst_x:.2e}, max energy error {worst_e:.2e}"))
}

fn criterion_2() -> Verdict {
    let e: Vec<f64> = path().points.iter().map(|p| p.energy).collect();
    // turning points of the profile, endpoints included
    let mut turns = vec![(0usize, "min")];
    let mut rising = e[1] > e[0];
    for i in 1..e.len() - 1 {
        let up = e[i + 1] > e[i];
        if e[i + 1] != e[i] && up != rising {
            turns.push((i, if rising { "max" } else { "min" }));
            rising = up;
        }
    }
    turns.push((e.len() - 1, "min"));
    let kinds: Vec<&str> = turns.iter().map(|t| t.1).collect();
    let pattern = kinds == ["min", "max", "min", "max", "min"];
    let reference = [-0.108, -0.072, -0.081, -0.041, -0.147];
    let values_ok = pattern && turns.iter().zip(reference).all(|(t, r)| (e[t.0] - r).abs() <= 1e-3);
    verdict(
        pattern && values_ok,
        format!(
            "profile {} at energies {:?}",
            kinds.join("-"),
            turns.iter().map(|t| format!("{:.4}", e[t.0])).collect::<Vec<_>>()
        ),
    )
}

fn criterion_3() -> Verdict {
    let spec = EnsembleSpec { count: LARGE_N, ..EnsembleSpec::new(points().m3.position, 0.0, Sampling::Rho0, 1) };
    let grid: Vec<f64> = (0..=1200).map(|k| k as f64 * 0.01).collect();
    let rows = match mean_energy_diagram(model(), &grid, &spec) {
        Ok(r) => r,
        Err(e) => return verdict(false, e.to_string()),
    };
    let at_ts2 = crossing_p0(&rows, points().ts2.energy, |r| r.mean_energy);
    let at_ts1 = crossing_p0(&rows, points().ts1.energy, |r| r.mean_energy);
    let delta = spreading_energy(spec.mass, spec.sigma_sq.0);
    let ok2 = at_ts2.is_some_and(|p| (p - 3.5).abs() <= 0.5);
    let ok1 = at_ts1.is_some_and(|p| (8.0..=9.5).contains(&p));
    let okd = (delta - 0.010893).abs() <= 1e-6;
    verdict(ok2 && ok1 && okd, format!("crosses TS2 at p0 {at_ts2:.3?}, TS1 at p0 {at_ts1:.3?}, delta {delta:.7}"))
}

fn propagate(grid: GridSpec, p0: f64, potential: &dyn hjreact::Potential) -> Propagator {
    let field = initial_packet(&grid, points().m3.position, (0.0125, 0.0125), Vec2::new(-p0, p0)).unwrap();
    let mut prop = Propagator::new(potential, field).unwrap();
    let steps = (T_FINAL / grid.dt).round() as usize;
    for _ in 0..steps {
        prop.step().unwrap();
    }
    prop
}

fn criterion_4() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    // free spreading; the kinetic step is exact, so a coarse dt is fine
    let free = GridSpec { x_range: [-12.0, 12.0], y_range: [-12.0, 12.0], nx: 512, ny: 512, dt: 1.0, mass: 1836.0 };
    let sigma0 = 0.0125f64.sqrt();
    let field = initial_packet(&free, Vec2::ZERO, (0.0125, 0.0125), Vec2::ZERO).unwrap();
    let mut prop = Propagator::new(&FreeSpace, field).unwrap();
    for _ in 0..700 {
        prop.step().unwrap();
    }
    let var = prop.snapshot().position_variance();
    let expect = free_gaussian_width(sigma0, free.mass, T_FINAL);
    let width_err = (var.x.sqrt() / expect - 1.0).abs().max((var.y.sqrt() / expect - 1.0).abs());
    pass &= width_err <= 1e-3;
    notes.push(format!("free width error {width_err:.1e}"));

    // norm and energy on the surface
    let grid = GridSpec::default().with_points(256, 256);
    let field = initial_packet(&grid, points().m3.position, (0.0125, 0.0125), Vec2::new(-4.0, 4.0)).unwrap();
    let (n0, e0) = (field.norm(), energy_expectation(model(), &field));
    let end = timed("norm/energy run", || propagate(grid, 4.0, model())).snapshot();
    let norm_drift = (end.norm() - n0).abs();
    let energy_drift = (energy_expectation(model(), &end) - e0).abs();
    pass &= norm_drift <= 1e-8 && energy_drift <= 1e-6;
    notes.push(format!("norm drift {norm_drift:.1e}, energy drift {energy_drift:.1e}"));

    // convergence of P(700) at p0 = 10
    let line = FrontierLine::default();
    let p_of = |g: GridSpec| restricted_norm(&propagate(g, 10.0, model()).snapshot(), &line);
    let base = timed("P(700) 256", || p_of(grid));
    let fine = timed("P(700) 512", || p_of(GridSpec::default().with_points(512, 512)));
    let half = timed("P(700) dt/2", || p_of(GridSpec { dt: 0.025, ..grid }));
    let (dg, dd) = ((base - fine).abs(), (base - half).abs());
    pass &= dg <= 1e-3 && dd <= 1e-3;
    notes.push(format!("P(700) = {base:.5}, grid change {dg:.1e}, dt change {dd:.1e}"));
    verdict(pass, notes.join("; "))
}

fn criterion_5() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for p0 in [4.0, 10.0] {
        let r = large_run(p0);
        let times: Vec<f64> = r.equivariance.iter().map(|e| e.t).collect();
        let all_times = EQUIVARIANCE_TIMES.iter().all(|t| times.iter().any(|u| (u - t).abs() < 1e-6));
        pass &= all_times;
        for e in &r.equivariance {
            pass &= e.fraction() >= 0.99;
            notes.push(format!("p0 {p0} t {}: {}/{}", e.t, e.passing, e.cells));
        }
    }
    verdict(pass, notes.join(", "))
}

fn criterion_6() -> Verdict {
    let mut pass = true;
    let mut notes = Vec::new();
    for p0 in [4.0, 10.0] {
        let s = large_run(p0).bohmian.as_ref().unwrap();
        let p = *s.p.last().unwrap();
        let gap = s.max_p_w_gap().unwrap();
        let bound = 3.0 * (p * (1.0 - p) / s.meta.n as f64).sqrt();
        pass &= gap <= bound;
        notes.push(format!("p0 {p0}: max |P - W| {gap:.4} vs {bound:.4}"));
    }
    verdict(pass, notes.join(", "))
}

fn criterion_7() -> Verdict {
    let r4 = large_run(4.0);
    let last = |s: &Option<hjreact::analysis::ProbabilitySeries>, wbar: bool| {
        let s = s.as_ref().unwrap();
        *if wbar { s.wbar.last() } else { s.w.last() }.unwrap()
    };
    let (b4, w4) = (last(&r4.bohmian, true), last(&r4.classical_wigner, true));
    let rows = &sweep().rows;
    let low: Vec<&SweepRow> = rows.iter().filter(|r| r.p0 < 4.0).collect();
    let both_above = low.iter().all(|r| r.wbar_cl_rho0 > r.wbar_bohm && r.wbar_cl_wigner > r.wbar_bohm);
    let a = b4 < w4 && both_above;

    let r10 = large_run(10.0);
    let (b10, rho10, wig10) = (last(&r10.bohmian, false), last(&r10.classical_rho0, false), last(&r10.classical_wigner, false));
    let b = (b10 - wig10).abs() < (b10 - rho10).abs();

    let over_rho0 = overtake_p0(rows, |r| r.wbar_bohm, |r| r.wbar_cl_rho0);
    let over_wigner = overtake_p0(rows, |r| r.wbar_bohm, |r| r.wbar_cl_wigner);
    let c = over_rho0.is_some_and(|p| (3.0..=5.0).contains(&p)) && over_wigner.is_some_and(|p| (7.5..=10.0).contains(&p));
    verdict(
        a && b && c,
        format!(
            "(a) {} Wbar bohm {b4:.4} wigner {w4:.4}, classical above below p0 4: {both_above}; \
             (b) {} W bohm {b10:.4} wigner {wig10:.4} rho0 {rho10:.4}; \
             (c) {} overtakes rho0 at {over_rho0:.2?}, wigner at {over_wigner:.2?}",
            if a { "ok" } else { "FAIL" },
            if b { "ok" } else { "FAIL" },
            if c { "ok" } else { "FAIL" },
        ),
    )
}

fn entered(tr: &Trajectory, line: &FrontierLine) -> bool {
    tr.samples.windows(2).any(|w| line.entry_fraction(w[0].position, w[1].position).is_some())
        || line.in_products_region(tr.samples[0].position)
}

fn reactive(tr: &Trajectory, line: &FrontierLine) -> bool {
    line.in_products_region(tr.last().position)
}

fn criterion_8() -> Verdict {
    let r = &sweep().pairs;
    let line = FrontierLine::default();
    let mut split = 0;
    let mut worst_classical: f64 = 0.0;
    let mut least_quantum = f64::INFINITY;
    for (q, c) in r.bohmian_trajectories.iter().zip(&r.classical_trajectories) {
        let d = match paired_difference(q, c, model(), 1836.0) {
            Ok(d) => d,
            Err(e) => return verdict(false, e.to_string()),
        };
        worst_classical = worst_classical.max(d.classical_energy_spread());
        least_quantum = least_quantum.min(d.quantum_energy_spread());
        if reactive(q, &line) && !entered(c, &line) {
            split += 1;
        }
    }
    let n = r.bohmian_trajectories.len();
    verdict(
        n == PAIRS && split > 0 && worst_classical <= 1e-5 && least_quantum > 1e-4,
        format!(
            "{split} of {n} pairs quantum reactive / classical inelastic; classical spread <= {worst_classical:.1e}, \
             quantum spread >= {least_quantum:.1e}"
        ),
    )
}

fn band(tr: &Trajectory) -> Option<f64> {
    let t0 = tr.samples[0].t;
    let t1 = arrival_time(tr, path(), 0.95).unwrap_or(tr.last().t);
    caratheodory_window(tr, path(), t0, t1, CARATHEODORY_POINTS).ok().map(|m| m.diagonal_band_fraction(0.15))
}

fn criterion_9() -> Verdict {
    let line = FrontierLine::default();
    let trajs = &sweep().pairs.bohmian_trajectories;
    let react = trajs.iter().find(|t| reactive(t, &line));
    let inert = trajs.iter().find(|t| !entered(t, &line));
    let (Some(react), Some(inert)) = (react, inert) else {
        return verdict(false, "need one reactive and one inelastic trajectory");
    };
    let (br, bi) = (band(react), band(inert));
    let pass = br.is_some_and(|f| f >= 0.8) && bi.is_some_and(|f| f < 0.8);
    verdict(pass, format!("reactive id {} band {br:.3?}, inelastic id {} band {bi:.3?}", react.id, inert.id))
}

fn run_cli(args: &[&str], out: &Path) -> bool {
    Command::new(env!("CARGO_BIN_EXE_hjreact"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("HJREACT_OUT")
        .output()
        .is_ok_and(|o| o.status.success())
}

fn data_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != "config.toml")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn criterion_10() -> Verdict {
    let tmp = tempfile::TempDir::new().unwrap();
    let small = ["--n", "200", "--tfinal", "60", "--grid", "128x128", "--p0", "6", "--seed", "3"];
    let commands: [&[&str]; 6] =
        [&["stationary"], &["rp"], &["energy-diagram"], &["classical"], &["bohmian"], &["quantum"]];
    let mut checked = 0;
    for cmd in commands {
        let args: Vec<&str> = cmd.iter().chain(&small).copied().collect();
        let mut seen: Option<BTreeMap<String, Vec<u8>>> = None;
        for (k, workers) in ["1", "2", "1", "3"].iter().enumerate() {
            let out = tmp.path().join(format!("{}-{k}", cmd[0]));
            if !run_cli(&[&args[..], &["--workers", workers]].concat(), &out) {
                return verdict(false, format!("`{}` failed", cmd[0]));
            }
            let files = data_files(&out);
            match &seen {
                None => seen = Some(files),
                Some(first) if *first != files => return verdict(false, format!("`{}` output changed", cmd[0])),
                _ => {}
            }
        }
        checked += seen.map_or(0, |s| s.len());
    }
    verdict(true, format!("{checked} files identical over four runs each"))
}

fn main() {
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let criteria: [(usize, fn() -> Verdict); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut failed = 0;
    for (n, f) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let v = f();
        println!("criterion {n}: {} {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
