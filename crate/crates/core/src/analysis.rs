//! Ensemble statistics over trajectories: the instantaneous products
//! fraction `W`, the first-passage fraction `Wbar`, paired quantum/classical
//! differences and Carathéodory matrices.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::classical::{Trajectory, TrajectoryKind};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pes::{FrontierLine, Potential};
use crate::quantum::{write_sidecar, WaveField};
use crate::reaction_path::ReactionPath;

/// Time tolerance when comparing sample times of different trajectories.
const TIME_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub sampling: String,
    pub p0: f64,
    pub n: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ProbabilitySeries {
    pub times: Vec<f64>,
    /// Restricted norm; empty for purely classical ensembles.
    pub p: Vec<f64>,
    pub w: Vec<f64>,
    pub wbar: Vec<f64>,
    pub meta: SeriesMeta,
}

impl ProbabilitySeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// CSV `t,P,W,Wbar`; absent columns are left blank.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,P,W,Wbar")?;
        for k in 0..self.len() {
            let col = |c: &[f64]| c.get(k).map_or(String::new(), |v| format!("{v:.10e}"));
            writeln!(out, "{:.6},{},{},{}", self.times[k], col(&self.p), col(&self.w), col(&self.wbar))?;
        }
        Ok(())
    }

    /// Largest `|P - W|` over the series.
    pub fn max_p_w_gap(&self) -> Option<f64> {
        if self.p.len() != self.w.len() || self.p.is_empty() {
            return None;
        }
        Some(self.p.iter().zip(&self.w).map(|(p, w)| (p - w).abs()).fold(0.0, f64::max))
    }

    /// Value of a column at the sample closest to `t`.
    pub fn at(&self, column: &[f64], t: f64) -> Option<f64> {
        let k = self
            .times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().total_cmp(&(b.1 - t).abs()))?
            .0;
        column.get(k).copied()
    }
}

/// Streaming `W`/`Wbar` accumulator; feed it the ensemble positions at each
/// recorded time.
#[derive(Debug, Clone)]
pub struct RegionCounter {
    line: FrontierLine,
    ever: Vec<bool>,
    last: Vec<Vec2>,
    series: ProbabilitySeries,
}

impl RegionCounter {
    pub fn new(line: FrontierLine, meta: SeriesMeta) -> Self {
        RegionCounter { line, ever: Vec::new(), last: Vec::new(), series: ProbabilitySeries { meta, ..Default::default() } }
    }

    pub fn record(&mut self, t: f64, positions: &[Vec2]) -> Result<()> {
        if self.series.times.is_empty() {
            self.ever = positions.iter().map(|&p| self.line.in_products_region(p)).collect();
        } else {
            if positions.len() != self.last.len() {
                return Err(Error::TimeAxisMismatch(format!(
                    "ensemble size changed from {} to {} at t = {t}",
                    self.last.len(),
                    positions.len()
                )));
            }
            for ((ever, &a), &b) in self.ever.iter_mut().zip(&self.last).zip(positions) {
                *ever |= self.line.entry_fraction(a, b).is_some();
            }
        }
        let n = positions.len().max(1) as f64;
        let inside = positions.iter().filter(|&&p| self.line.in_products_region(p)).count();
        let entered = self.ever.iter().filter(|&&e| e).count();
        self.series.times.push(t);
        self.series.w.push(inside as f64 / n);
        self.series.wbar.push(entered as f64 / n);
        self.last.clear();
        self.last.extend_from_slice(positions);
        Ok(())
    }

    pub fn record_restricted_norm(&mut self, p: f64) {
        self.series.p.push(p);
    }

    /// Per-particle "has ever entered" flags so far.
    pub fn entered(&self) -> &[bool] {
        &self.ever
    }

    pub fn finish(mut self) -> ProbabilitySeries {
        self.series.meta.n = self.last.len();
        self.series
    }
}

fn check_time_axis(trajs: &[Trajectory]) -> Result<()> {
    let Some(first) = trajs.first() else {
        return Err(Error::TimeAxisMismatch("empty ensemble".into()));
    };
    for tr in &trajs[1..] {
        if tr.samples.len() != first.samples.len()
            || tr.samples.iter().zip(&first.samples).any(|(a, b)| (a.t - b.t).abs() > TIME_TOL)
        {
            return Err(Error::TimeAxisMismatch(format!(
                "trajectory {} differs from trajectory {}",
                tr.id, first.id
            )));
        }
    }
    Ok(())
}

fn series_of(trajs: &[Trajectory], line: FrontierLine) -> Result<ProbabilitySeries> {
    check_time_axis(trajs)?;
    let mut counter = RegionCounter::new(line, SeriesMeta::default());
    let mut positions = vec![Vec2::ZERO; trajs.len()];
    for k in 0..trajs[0].samples.len() {
        for (slot, tr) in positions.iter_mut().zip(trajs) {
            *slot = tr.samples[k].position;
        }
        counter.record(trajs[0].samples[k].t, &positions)?;
    }
    Ok(counter.finish())
}

/// `W(t)`: fraction of trajectories inside the products region at `t`.
/// The returned series also carries `Wbar`.
pub fn count_in_sigma(trajs: &[Trajectory], line: FrontierLine) -> Result<ProbabilitySeries> {
    series_of(trajs, line)
}

/// `Wbar(t)`: fraction of trajectories that have entered the products
/// region at any time up to `t`. The returned series also carries `W`.
pub fn first_crossing_fraction(trajs: &[Trajectory], line: FrontierLine) -> Result<ProbabilitySeries> {
    series_of(trajs, line)
}

/// `Wbar` at the last recorded time; the series must reach `t_required`.
pub fn asymptotic_products(series: &ProbabilitySeries, t_required: f64) -> Result<f64> {
    let t_end = series.times.last().copied().unwrap_or(f64::NEG_INFINITY);
    if t_end < t_required - TIME_TOL {
        return Err(Error::SeriesTooShort { t_end, required: t_required });
    }
    Ok(*series.wbar.last().expect("non-empty series"))
}

/// One row of the sweep summary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub p0: f64,
    pub wbar_bohm: f64,
    pub wbar_cl_rho0: f64,
    pub wbar_cl_wigner: f64,
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "p0,Wbar_bohm,Wbar_cl_rho0,Wbar_cl_wigner")?;
    for r in rows {
        writeln!(out, "{},{:.10e},{:.10e},{:.10e}", r.p0, r.wbar_bohm, r.wbar_cl_rho0, r.wbar_cl_wigner)?;
    }
    Ok(())
}

/// Linear-interpolated `p0` where `a - b` changes sign from negative to
/// positive (`a` overtakes `b`), scanning rows in order.
pub fn overtake_p0(rows: &[SweepRow], a: impl Fn(&SweepRow) -> f64, b: impl Fn(&SweepRow) -> f64) -> Option<f64> {
    rows.windows(2).find_map(|w| {
        let d0 = a(&w[0]) - b(&w[0]);
        let d1 = a(&w[1]) - b(&w[1]);
        (d0 < 0.0 && d1 >= 0.0).then(|| w[0].p0 + (w[1].p0 - w[0].p0) * d0 / (d0 - d1))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedDifference {
    pub times: Vec<f64>,
    pub dx: Vec<f64>,
    pub dy: Vec<f64>,
    pub dpx: Vec<f64>,
    pub dpy: Vec<f64>,
    pub e_quantum: Vec<f64>,
    pub e_classical: Vec<f64>,
}

impl PairedDifference {
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,dx,dy,dpx,dpy,E_quantum,E_classical")?;
        for k in 0..self.times.len() {
            writeln!(
                out,
                "{:.6},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e},{:.10e}",
                self.times[k], self.dx[k], self.dy[k], self.dpx[k], self.dpy[k], self.e_quantum[k], self.e_classical[k]
            )?;
        }
        Ok(())
    }
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    max - min
}

impl PairedDifference {
    /// Max minus min of the classical energy.
    pub fn classical_energy_spread(&self) -> f64 {
        spread(&self.e_classical)
    }

    pub fn quantum_energy_spread(&self) -> f64 {
        spread(&self.e_quantum)
    }
}

/// `A_q(t) - A_cl(t)` for position and momentum, plus both energies.
pub fn paired_difference<P: Potential + ?Sized>(
    q: &Trajectory,
    c: &Trajectory,
    potential: &P,
    mass: f64,
) -> Result<PairedDifference> {
    if q.kind != TrajectoryKind::Bohmian {
        return Err(Error::WrongTrajectoryKind { expected: "bohmian", found: q.kind.as_str() });
    }
    if c.kind != TrajectoryKind::Classical {
        return Err(Error::WrongTrajectoryKind { expected: "classical", found: c.kind.as_str() });
    }
    let (a, b) = (q.initial(), c.initial());
    let deviation = (a.position - b.position).norm().max((a.momentum - b.momentum).norm());
    if deviation > 1e-9 {
        return Err(Error::InitialConditionMismatch { deviation });
    }
    check_time_axis(&[q.clone(), c.clone()])?;
    let energy = |s: &crate::classical::TrajectorySample| s.momentum.norm_sq() / (2.0 * mass) + potential.value(s.position);
    let mut out = PairedDifference {
        times: Vec::new(),
        dx: Vec::new(),
        dy: Vec::new(),
        dpx: Vec::new(),
        dpy: Vec::new(),
        e_quantum: Vec::new(),
        e_classical: Vec::new(),
    };
    for (sq, sc) in q.samples.iter().zip(&c.samples) {
        out.times.push(sq.t);
        out.dx.push(sq.position.x - sc.position.x);
        out.dy.push(sq.position.y - sc.position.y);
        out.dpx.push(sq.momentum.x - sc.momentum.x);
        out.dpy.push(sq.momentum.y - sc.momentum.y);
        out.e_quantum.push(energy(sq));
        out.e_classical.push(energy(sc));
    }
    Ok(out)
}

pub const CARATHEODORY_POINTS: usize = 512;

/// `C_ij = |x(t_i) - x_RP(s_j)|^2`, row-major over `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct CaratheodoryMatrix {
    pub rows: usize,
    pub cols: usize,
    pub times: Vec<f64>,
    pub arc_lengths: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Serialize)]
struct CaratheodorySidecar<'a> {
    kind: &'a str,
    layout: &'a str,
    rows: usize,
    cols: usize,
    row_axis: &'a str,
    col_axis: &'a str,
    t_start: f64,
    t_end: f64,
    s_start: f64,
    s_end: f64,
}

/// Matrix between two polylines already sampled at the desired points.
pub fn caratheodory_points(traj: &[Vec2], times: Vec<f64>, path: &[Vec2], arc_lengths: Vec<f64>) -> CaratheodoryMatrix {
    let mut values = Vec::with_capacity(traj.len() * path.len());
    for p in traj {
        values.extend(path.iter().map(|q| (*p - *q).norm_sq()));
    }
    CaratheodoryMatrix { rows: traj.len(), cols: path.len(), times, arc_lengths, values }
}

/// Resample the trajectory over `[t_start, t_end]` at uniform time and the
/// path at uniform arc length, `n` points each, and build the matrix.
pub fn caratheodory_window(traj: &Trajectory, path: &ReactionPath, t_start: f64, t_end: f64, n: usize) -> Result<CaratheodoryMatrix> {
    if traj.samples.is_empty() || path.points.len() < 2 {
        return Err(Error::invalid("caratheodory", "both curves must be non-empty"));
    }
    if n < 2 || t_end <= t_start {
        return Err(Error::invalid("caratheodory", "need at least two points over a positive time window"));
    }
    let times: Vec<f64> = (0..n).map(|i| t_start + (t_end - t_start) * i as f64 / (n - 1) as f64).collect();
    let xs: Vec<Vec2> = times.iter().map(|&t| traj.position_at(t)).collect();
    let total = path.total_length();
    let arc: Vec<f64> = (0..n).map(|j| total * j as f64 / (n - 1) as f64).collect();
    let ps = path.resample(n);
    Ok(caratheodory_points(&xs, times, &ps, arc))
}

/// Carathéodory matrix over the whole trajectory at the default resolution.
pub fn caratheodory(traj: &Trajectory, path: &ReactionPath) -> Result<CaratheodoryMatrix> {
    let t0 = traj.samples.first().map_or(0.0, |s| s.t);
    let t1 = traj.samples.last().map_or(0.0, |s| s.t);
    caratheodory_window(traj, path, t0, t1, CARATHEODORY_POINTS)
}

/// First time the trajectory's nearest path point lies within the last
/// `1 - fraction` of the path, if ever. Used to end the Carathéodory window
/// once a trajectory has arrived at the product end.
pub fn arrival_time(traj: &Trajectory, path: &ReactionPath, fraction: f64) -> Option<f64> {
    let target = fraction * path.total_length();
    traj.samples.iter().find(|s| path.s_of_nearest(s.position) >= target).map(|s| s.t)
}

impl CaratheodoryMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    /// Column of the smallest entry in each row.
    pub fn row_argmin(&self) -> Vec<usize> {
        self.values
            .chunks(self.cols)
            .map(|row| {
                row.iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map_or(0, |(j, _)| j)
            })
            .collect()
    }

    /// Fraction of rows whose argmin lies within `tolerance` (as a fraction
    /// of the axis length) of the diagonal.
    pub fn diagonal_band_fraction(&self, tolerance: f64) -> f64 {
        let arg = self.row_argmin();
        let rows = (self.rows.max(2) - 1) as f64;
        let cols = (self.cols.max(2) - 1) as f64;
        let near = arg
            .iter()
            .enumerate()
            .filter(|&(i, &j)| (j as f64 / cols - i as f64 / rows).abs() <= tolerance)
            .count();
        near as f64 / self.rows as f64
    }

    /// Little-endian f64 row-major values plus a TOML sidecar.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 8);
        for v in &self.values {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        std::fs::write(path, bytes)?;
        write_sidecar(
            path,
            &CaratheodorySidecar {
                kind: "caratheodory",
                layout: "row-major, little-endian f64, squared distance in bohr^2",
                rows: self.rows,
                cols: self.cols,
                row_axis: "trajectory time, uniform",
                col_axis: "reaction path arc length, uniform",
                t_start: self.times.first().copied().unwrap_or(0.0),
                t_end: self.times.last().copied().unwrap_or(0.0),
                s_start: self.arc_lengths.first().copied().unwrap_or(0.0),
                s_end: self.arc_lengths.last().copied().unwrap_or(0.0),
            },
        )
    }

    /// Long-format CSV `t,s,C`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,s,C")?;
        for i in 0..self.rows {
            for j in 0..self.cols {
                writeln!(out, "{:.6},{:.8e},{:.10e}", self.times[i], self.arc_lengths[j], self.get(i, j))?;
            }
        }
        Ok(())
    }
}

/// Histogram test of Bohmian particle positions against `|Psi|^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquivarianceReport {
    pub t: f64,
    /// Blocks with at least the minimum expected count.
    pub cells: usize,
    pub passing: usize,
    pub worst_z: f64,
}

impl EquivarianceReport {
    pub fn fraction(&self) -> f64 {
        if self.cells == 0 {
            0.0
        } else {
            self.passing as f64 / self.cells as f64
        }
    }
}

/// Bin `positions` into blocks of `block x block` grid cells and compare
/// each count with `N * integral of |Psi|^2` over the block. A block passes
/// if the counts agree within `z * sqrt(expected)`; only blocks expecting at
/// least `min_expected` particles are judged.
pub fn equivariance(positions: &[Vec2], field: &WaveField, block: usize, z: f64, min_expected: f64) -> EquivarianceReport {
    let g = &field.grid;
    let block = block.max(1);
    let bx = g.nx.div_ceil(block);
    let by = g.ny.div_ceil(block);
    let mut expected = vec![0.0; bx * by];
    let total: f64 = field.density().iter().sum();
    for (idx, rho) in field.density().into_iter().enumerate() {
        let (i, j) = (idx % g.nx, idx / g.nx);
        expected[(j / block) * bx + i / block] += rho / total;
    }
    let n = positions.len() as f64;
    for e in &mut expected {
        *e *= n;
    }
    let mut counts = vec![0usize; bx * by];
    for p in positions {
        if !g.contains(*p) {
            continue;
        }
        let i = (((p.x - g.x_range[0]) / g.dx()) as usize).min(g.nx - 1);
        let j = (((p.y - g.y_range[0]) / g.dy()) as usize).min(g.ny - 1);
        counts[(j / block) * bx + i / block] += 1;
    }
    let mut report = EquivarianceReport { t: field.t, cells: 0, passing: 0, worst_z: 0.0 };
    for (e, &c) in expected.iter().zip(&counts) {
        if *e < min_expected {
            continue;
        }
        let zz = (c as f64 - e).abs() / e.sqrt();
        report.cells += 1;
        if zz <= z {
            report.passing += 1;
        }
        report.worst_z = report.worst_z.max(zz);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::TrajectorySample;

    fn line() -> FrontierLine {
        FrontierLine { slope: 0.0, intercept: 0.0 }
    }

    fn traj(id: usize, ys: &[f64]) -> Trajectory {
        Trajectory {
            id,
            kind: TrajectoryKind::Classical,
            samples: ys
                .iter()
                .enumerate()
                .map(|(k, &y)| TrajectorySample { t: k as f64, position: Vec2::new(0.0, y), momentum: Vec2::ZERO })
                .collect(),
            node_clamps: 0,
        }
    }

    #[test]
    fn nothing_enters() {
        let s = count_in_sigma(&[traj(0, &[-1.0, -0.5, -0.2]), traj(1, &[-2.0, -2.0, -2.0])], line()).unwrap();
        assert!(s.w.iter().chain(&s.wbar).all(|&v| v == 0.0));
    }

    #[test]
    fn single_crossing_steps_up() {
        let s = count_in_sigma(&[traj(0, &[-1.0, -0.5, 0.5, 1.0])], line()).unwrap();
        assert_eq!(s.w, vec![0.0, 0.0, 1.0, 1.0]);
        assert_eq!(s.wbar, s.w);
    }

    #[test]
    fn recrossing_counts_once() {
        let s = first_crossing_fraction(&[traj(0, &[-1.0, 1.0, -1.0, -1.0]), traj(1, &[-1.0; 4])], line()).unwrap();
        assert_eq!(s.w, vec![0.0, 0.5, 0.0, 0.0]);
        assert_eq!(s.wbar, vec![0.0, 0.5, 0.5, 0.5]);
    }

    #[test]
    fn time_axis_mismatch() {
        let mut b = traj(1, &[0.0, 0.0]);
        b.samples[1].t = 2.0;
        let err = count_in_sigma(&[traj(0, &[0.0, 0.0]), b], line());
        assert!(matches!(err, Err(Error::TimeAxisMismatch(_))));
        assert!(matches!(count_in_sigma(&[], line()), Err(Error::TimeAxisMismatch(_))));
    }

    #[test]
    fn asymptotic_value_and_short_series() {
        let s = count_in_sigma(&[traj(0, &[-1.0, 1.0, -1.0])], line()).unwrap();
        assert_eq!(asymptotic_products(&s, 2.0).unwrap(), 1.0);
        assert!(asymptotic_products(&s, 2.0).unwrap() >= *s.w.last().unwrap());
        assert!(matches!(asymptotic_products(&s, 700.0), Err(Error::SeriesTooShort { .. })));
    }

    #[test]
    fn series_csv_layout() {
        let mut s = count_in_sigma(&[traj(0, &[-1.0, 1.0])], line()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,P,W,Wbar\n0.000000,,"));
        s.p = vec![0.25, 0.5];
        assert_eq!(s.max_p_w_gap(), Some(0.5));
    }

    #[test]
    fn identical_curves_have_zero_diagonal() {
        let pts: Vec<Vec2> = (0..20).map(|i| Vec2::new(i as f64 * 0.1, (i as f64 * 0.3).sin())).collect();
        let idx: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let c = caratheodory_points(&pts, idx.clone(), &pts, idx);
        for i in 0..20 {
            assert_eq!(c.get(i, i), 0.0);
        }
        assert_eq!(c.row_argmin(), (0..20).collect::<Vec<_>>());
        assert_eq!(c.diagonal_band_fraction(0.0), 1.0);
        assert!(c.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn overtake_interpolates() {
        let rows = [
            SweepRow { p0: 3.0, wbar_bohm: 0.1, wbar_cl_rho0: 0.2, wbar_cl_wigner: 0.3 },
            SweepRow { p0: 4.0, wbar_bohm: 0.3, wbar_cl_rho0: 0.2, wbar_cl_wigner: 0.4 },
        ];
        let x = overtake_p0(&rows, |r| r.wbar_bohm, |r| r.wbar_cl_rho0).unwrap();
        assert!((x - 3.5).abs() < 1e-12);
        assert!(overtake_p0(&rows, |r| r.wbar_bohm, |r| r.wbar_cl_wigner).is_none());
    }

    #[test]
    fn pair_checks() {
        let mut q = traj(0, &[0.0, 0.1]);
        q.kind = TrajectoryKind::Bohmian;
        let c = traj(0, &[0.0, 0.1]);
        let d = paired_difference(&q, &c, &crate::pes::FreeSpace, 1.0).unwrap();
        assert!(d.dx.iter().chain(&d.dy).chain(&d.dpx).all(|&v| v == 0.0));
        let mut c2 = c.clone();
        c2.samples[0].position.x = 1e-6;
        assert!(matches!(
            paired_difference(&q, &c2, &crate::pes::FreeSpace, 1.0),
            Err(Error::InitialConditionMismatch { .. })
        ));
        assert!(matches!(
            paired_difference(&c, &q, &crate::pes::FreeSpace, 1.0),
            Err(Error::WrongTrajectoryKind { .. })
        ));
    }
}
