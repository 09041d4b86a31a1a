//! The Müller-Brown potential energy surface.
//!
//! The surface is a sum of four anisotropic Gaussians,
//!
//! ```text
//! V(x, y) = s * sum_i A_i exp(a_i dx^2 + b_i dx dy + c_i dy^2),   dx = x - x_i, dy = y - y_i
//! ```
//!
//! with the standard Müller-Brown parameter set and an overall energy scale
//! `s`. The default scale of `1e-3` maps the raw surface (minima at about
//! -146.7, -80.8 and -108.2) onto hartree values of -0.147, -0.081 and
//! -0.108. That scale is inferred from the quoted stationary energies; it is
//! not part of the original parameter set.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Sym2, Vec2};

/// Anything that can act as a 2D potential for the dynamics modules.
pub trait Potential: Sync {
    fn value(&self, p: Vec2) -> f64;
    fn gradient(&self, p: Vec2) -> Vec2;
    fn hessian(&self, p: Vec2) -> Sym2;
}

/// One `A exp(a dx^2 + b dx dy + c dy^2)` contribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianTerm {
    pub amplitude: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub center: Vec2,
}

impl GaussianTerm {
    /// True if the quadratic form is negative definite (the term decays).
    pub fn is_decaying(&self) -> bool {
        self.a < 0.0 && 4.0 * self.a * self.c - self.b * self.b > 0.0
    }

    #[inline]
    fn parts(&self, p: Vec2) -> (f64, f64, f64, f64) {
        let dx = p.x - self.center.x;
        let dy = p.y - self.center.y;
        let e = self.amplitude
            * (self.a * dx * dx + self.b * dx * dy + self.c * dy * dy).exp();
        let qx = 2.0 * self.a * dx + self.b * dy;
        let qy = self.b * dx + 2.0 * self.c * dy;
        (e, qx, qy, dx)
    }
}

/// Analytic Müller-Brown surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesModel {
    pub terms: Vec<GaussianTerm>,
    pub energy_scale: f64,
}

/// Standard Müller-Brown parameters.
const MB_AMPLITUDE: [f64; 4] = [-200.0, -100.0, -170.0, 15.0];
const MB_A: [f64; 4] = [-1.0, -1.0, -6.5, 0.7];
const MB_B: [f64; 4] = [0.0, 0.0, 11.0, 0.6];
const MB_C: [f64; 4] = [-10.0, -10.0, -6.5, 0.7];
const MB_CENTERS: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 0.5), (-0.5, 1.5), (-1.0, 1.0)];

pub const DEFAULT_ENERGY_SCALE: f64 = 1e-3;

impl Default for PesModel {
    fn default() -> Self {
        PesModel::mueller_brown(DEFAULT_ENERGY_SCALE)
    }
}

impl PesModel {
    pub fn mueller_brown(energy_scale: f64) -> Self {
        let terms = (0..4)
            .map(|i| GaussianTerm {
                amplitude: MB_AMPLITUDE[i],
                a: MB_A[i],
                b: MB_B[i],
                c: MB_C[i],
                center: MB_CENTERS[i].into(),
            })
            .collect();
        PesModel { terms, energy_scale }
    }

    pub fn validate(&self) -> Result<()> {
        if self.terms.len() != 4 {
            return Err(Error::invalid(
                "terms",
                format!("expected 4 Gaussian terms, got {}", self.terms.len()),
            ));
        }
        if !(self.energy_scale.is_finite() && self.energy_scale > 0.0) {
            return Err(Error::invalid("energy_scale", "must be finite and positive"));
        }
        for (i, t) in self.terms.iter().enumerate() {
            let finite = [t.amplitude, t.a, t.b, t.c, t.center.x, t.center.y]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::invalid(format!("terms[{i}]"), "non-finite coefficient"));
            }
            // attractive wells must decay; the repulsive term may grow
            if t.amplitude < 0.0 && !t.is_decaying() {
                return Err(Error::invalid(
                    format!("terms[{i}]"),
                    "attractive term must have a negative definite quadratic form",
                ));
            }
        }
        Ok(())
    }

    /// Unscaled surface value.
    pub fn raw_value(&self, p: Vec2) -> f64 {
        self.terms.iter().map(|t| t.parts(p).0).sum()
    }

    pub fn evaluate(&self, p: Vec2) -> f64 {
        self.energy_scale * self.raw_value(p)
    }

    pub fn gradient(&self, p: Vec2) -> Vec2 {
        let mut g = Vec2::ZERO;
        for t in &self.terms {
            let (e, qx, qy, _) = t.parts(p);
            g.x += e * qx;
            g.y += e * qy;
        }
        g * self.energy_scale
    }

    pub fn hessian(&self, p: Vec2) -> Sym2 {
        let mut h = Sym2::default();
        for t in &self.terms {
            let (e, qx, qy, _) = t.parts(p);
            h.xx += e * (qx * qx + 2.0 * t.a);
            h.xy += e * (qx * qy + t.b);
            h.yy += e * (qy * qy + 2.0 * t.c);
        }
        Sym2 {
            xx: h.xx * self.energy_scale,
            xy: h.xy * self.energy_scale,
            yy: h.yy * self.energy_scale,
        }
    }

    /// Value and gradient in one pass (used by the integrators).
    pub fn value_and_gradient(&self, p: Vec2) -> (f64, Vec2) {
        let mut v = 0.0;
        let mut g = Vec2::ZERO;
        for t in &self.terms {
            let (e, qx, qy, _) = t.parts(p);
            v += e;
            g.x += e * qx;
            g.y += e * qy;
        }
        (v * self.energy_scale, g * self.energy_scale)
    }

    pub fn from_config_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: PesConfig = toml::from_str(&text).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.into_model().map_err(|e| Error::Config {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

impl Potential for PesModel {
    fn value(&self, p: Vec2) -> f64 {
        self.evaluate(p)
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        PesModel::gradient(self, p)
    }
    fn hessian(&self, p: Vec2) -> Sym2 {
        PesModel::hessian(self, p)
    }
}

/// `V = 0` everywhere.
#[derive(Debug, Clone, Copy, Default)]
pub struct FreeSpace;

impl Potential for FreeSpace {
    fn value(&self, _: Vec2) -> f64 {
        0.0
    }
    fn gradient(&self, _: Vec2) -> Vec2 {
        Vec2::ZERO
    }
    fn hessian(&self, _: Vec2) -> Sym2 {
        Sym2::default()
    }
}

/// Isotropic harmonic well `V = k/2 |p - center|^2`.
#[derive(Debug, Clone, Copy)]
pub struct HarmonicWell {
    pub center: Vec2,
    pub stiffness: f64,
}

impl Potential for HarmonicWell {
    fn value(&self, p: Vec2) -> f64 {
        0.5 * self.stiffness * (p - self.center).norm_sq()
    }
    fn gradient(&self, p: Vec2) -> Vec2 {
        (p - self.center) * self.stiffness
    }
    fn hessian(&self, _: Vec2) -> Sym2 {
        Sym2 { xx: self.stiffness, xy: 0.0, yy: self.stiffness }
    }
}

/// Structured-text (TOML) form of the surface parameters. Every key is
/// optional and falls back to the standard Müller-Brown value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PesConfig {
    pub amplitudes: Option<Vec<f64>>,
    pub a: Option<Vec<f64>>,
    pub b: Option<Vec<f64>>,
    pub c: Option<Vec<f64>>,
    pub centers: Option<Vec<[f64; 2]>>,
    pub energy_scale: Option<f64>,
}

impl PesConfig {
    pub fn into_model(self) -> Result<PesModel> {
        fn pick(field: &str, v: Option<Vec<f64>>, default: [f64; 4]) -> Result<Vec<f64>> {
            match v {
                None => Ok(default.to_vec()),
                Some(v) if v.len() == 4 => Ok(v),
                Some(v) => Err(Error::invalid(
                    format!("pes.{field}"),
                    format!("expected 4 values, got {}", v.len()),
                )),
            }
        }
        let amp = pick("amplitudes", self.amplitudes, MB_AMPLITUDE)?;
        let a = pick("a", self.a, MB_A)?;
        let b = pick("b", self.b, MB_B)?;
        let c = pick("c", self.c, MB_C)?;
        let centers: Vec<Vec2> = match self.centers {
            None => MB_CENTERS.iter().map(|&p| p.into()).collect(),
            Some(v) if v.len() == 4 => v.into_iter().map(|[x, y]| Vec2::new(x, y)).collect(),
            Some(v) => {
                return Err(Error::invalid(
                    "pes.centers",
                    format!("expected 4 centers, got {}", v.len()),
                ))
            }
        };
        let model = PesModel {
            terms: (0..4)
                .map(|i| GaussianTerm {
                    amplitude: amp[i],
                    a: a[i],
                    b: b[i],
                    c: c[i],
                    center: centers[i],
                })
                .collect(),
            energy_scale: self.energy_scale.unwrap_or(DEFAULT_ENERGY_SCALE),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn from_model(model: &PesModel) -> Self {
        PesConfig {
            amplitudes: Some(model.terms.iter().map(|t| t.amplitude).collect()),
            a: Some(model.terms.iter().map(|t| t.a).collect()),
            b: Some(model.terms.iter().map(|t| t.b).collect()),
            c: Some(model.terms.iter().map(|t| t.c).collect()),
            centers: Some(model.terms.iter().map(|t| [t.center.x, t.center.y]).collect()),
            energy_scale: Some(model.energy_scale),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StationaryKind {
    Minimum,
    Saddle,
    Other,
}

impl StationaryKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StationaryKind::Minimum => "minimum",
            StationaryKind::Saddle => "saddle",
            StationaryKind::Other => "other",
        }
    }

    pub fn classify(eigenvalues: (f64, f64)) -> Self {
        let negatives = [eigenvalues.0, eigenvalues.1].iter().filter(|&&e| e < 0.0).count();
        let positives = [eigenvalues.0, eigenvalues.1].iter().filter(|&&e| e > 0.0).count();
        match (negatives, positives) {
            (0, 2) => StationaryKind::Minimum,
            (1, 1) => StationaryKind::Saddle,
            _ => StationaryKind::Other,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StationaryPoint {
    pub position: Vec2,
    pub energy: f64,
    pub kind: StationaryKind,
    /// Ascending.
    pub hessian_eigenvalues: (f64, f64),
}

/// Newton search settings.
#[derive(Debug, Clone, Copy)]
pub struct NewtonSettings {
    /// Convergence threshold on `|grad V|` in raw (unscaled) units.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Converged points closer than this are merged.
    pub dedup_radius: f64,
    /// Longest Newton step allowed (bohr).
    pub max_step: f64,
    /// Points converging outside this box are discarded.
    pub search_box: ([f64; 2], [f64; 2]),
}

impl Default for NewtonSettings {
    fn default() -> Self {
        NewtonSettings {
            tolerance: 1e-10,
            max_iterations: 100,
            dedup_radius: 1e-4,
            max_step: 0.1,
            search_box: ([-2.5, 1.5], [-1.0, 2.5]),
        }
    }
}

/// Result of the stationary-point search: located points plus the per-seed
/// failures (non-fatal).
#[derive(Debug, Default)]
pub struct StationarySearch {
    pub points: Vec<StationaryPoint>,
    pub failures: Vec<Error>,
}

impl PesModel {
    /// Newton iteration on the gradient from a single seed.
    pub fn newton_from(&self, seed: Vec2, settings: &NewtonSettings) -> Result<StationaryPoint> {
        let mut p = seed;
        let scale = self.energy_scale;
        for _ in 0..=settings.max_iterations {
            let g = PesModel::gradient(self, p);
            let h = PesModel::hessian(self, p);
            if (g * (1.0 / scale)).norm() < settings.tolerance {
                let eig = h.eigenvalues();
                return Ok(StationaryPoint {
                    position: p,
                    energy: self.evaluate(p),
                    kind: StationaryKind::classify(eig),
                    hessian_eigenvalues: eig,
                });
            }
            let mut step = match h.solve(-g) {
                Some(s) => s,
                None => break,
            };
            let len = step.norm();
            if len > settings.max_step {
                step = step * (settings.max_step / len);
            }
            p += step;
            if !p.is_finite() {
                break;
            }
        }
        Err(Error::NonConvergence { seed, iterations: settings.max_iterations })
    }

    /// Newton search from every seed; converged points are deduplicated and
    /// ordered by (kind, x).
    pub fn find_stationary_points(
        &self,
        seeds: &[Vec2],
        settings: &NewtonSettings,
    ) -> Result<StationarySearch> {
        if seeds.is_empty() {
            return Err(Error::invalid("seeds", "at least one seed is required"));
        }
        let mut out = StationarySearch::default();
        let ([x0, x1], [y0, y1]) = settings.search_box;
        for &seed in seeds {
            match self.newton_from(seed, settings) {
                Ok(sp) => {
                    let p = sp.position;
                    if p.x < x0 || p.x > x1 || p.y < y0 || p.y > y1 {
                        continue;
                    }
                    if out
                        .points
                        .iter()
                        .all(|q| q.position.distance(p) >= settings.dedup_radius)
                    {
                        out.points.push(sp);
                    }
                }
                Err(e) => out.failures.push(e),
            }
        }
        out.points.sort_by(|a, b| {
            (a.kind as u8)
                .cmp(&(b.kind as u8))
                .then(a.position.x.total_cmp(&b.position.x))
        });
        Ok(out)
    }
}

/// Regular grid of seeds covering `[x0, x1] x [y0, y1]` with `nx * ny` points.
pub fn seed_grid(x_range: [f64; 2], y_range: [f64; 2], nx: usize, ny: usize) -> Vec<Vec2> {
    let lin = |r: [f64; 2], n: usize, i: usize| {
        if n <= 1 {
            0.5 * (r[0] + r[1])
        } else {
            r[0] + (r[1] - r[0]) * i as f64 / (n - 1) as f64
        }
    };
    let mut seeds = Vec::with_capacity(nx * ny);
    for i in 0..nx {
        for j in 0..ny {
            seeds.push(Vec2::new(lin(x_range, nx, i), lin(y_range, ny, j)));
        }
    }
    seeds
}

/// The default seed grid for the Müller-Brown search.
pub fn default_seeds() -> Vec<Vec2> {
    seed_grid([-1.5, 1.2], [-0.2, 2.0], 28, 23)
}

/// The five named stationary points of the Müller-Brown surface, located by
/// Newton refinement from nearby seeds.
#[derive(Debug, Clone, Copy)]
pub struct MuellerBrownPoints {
    /// Products minimum.
    pub m1: StationaryPoint,
    /// Intermediate minimum.
    pub m2: StationaryPoint,
    /// Reactants minimum.
    pub m3: StationaryPoint,
    /// Saddle between M1 and M2.
    pub ts1: StationaryPoint,
    /// Saddle between M2 and M3.
    pub ts2: StationaryPoint,
}

impl MuellerBrownPoints {
    pub fn locate(model: &PesModel) -> Result<Self> {
        let settings = NewtonSettings::default();
        let find = |seed: (f64, f64), kind: StationaryKind| -> Result<StationaryPoint> {
            let sp = model.newton_from(seed.into(), &settings)?;
            if sp.kind != kind {
                return Err(Error::TopologyMismatch(format!(
                    "seed ({}, {}) converged to a {} instead of a {}",
                    seed.0,
                    seed.1,
                    sp.kind.as_str(),
                    kind.as_str()
                )));
            }
            Ok(sp)
        };
        Ok(MuellerBrownPoints {
            m1: find((-0.558, 1.442), StationaryKind::Minimum)?,
            m2: find((-0.050, 0.467), StationaryKind::Minimum)?,
            m3: find((0.623, 0.028), StationaryKind::Minimum)?,
            ts1: find((-0.822, 0.624), StationaryKind::Saddle)?,
            ts2: find((0.212, 0.293), StationaryKind::Saddle)?,
        })
    }

    pub fn minima(&self) -> [StationaryPoint; 3] {
        [self.m1, self.m2, self.m3]
    }
}

/// Straight line `y = slope x + intercept` separating products (above) from
/// the reactant and intermediate basins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierLine {
    pub slope: f64,
    pub intercept: f64,
}

impl Default for FrontierLine {
    fn default() -> Self {
        FrontierLine { slope: 0.8024, intercept: 1.2734 }
    }
}

impl FrontierLine {
    #[inline]
    pub fn height_at(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Strictly above the line; points on the line are not in the products region.
    #[inline]
    pub fn in_products_region(&self, p: Vec2) -> bool {
        p.y > self.height_at(p.x)
    }

    /// Fraction of the segment `a -> b` at which it first enters the
    /// products region, if it does.
    pub fn entry_fraction(&self, a: Vec2, b: Vec2) -> Option<f64> {
        let fa = a.y - self.height_at(a.x);
        let fb = b.y - self.height_at(b.x);
        if fa > 0.0 {
            Some(0.0)
        } else if fb > 0.0 {
            Some(fa / (fa - fb))
        } else {
            None
        }
    }
}

pub fn in_products_region(line: &FrontierLine, p: Vec2) -> bool {
    line.in_products_region(p)
}
