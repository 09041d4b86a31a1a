//! Grid propagation of the 2D time-dependent Schrödinger equation
//! `i dPsi/dt = -(1/2m) lap Psi + V Psi` (hbar = 1) by second-order
//! split-operator stepping: half potential, full kinetic in momentum space,
//! half potential.
//!
//! Grid nodes sit at cell centres, `x_i = x_min + (i + 1/2) dx`, and every
//! quadrature is the midpoint rule over those cells. Amplitudes are stored
//! row-major with x varying fastest: `psi[j * nx + i]`.

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::classical::PROTON_MASS;
use crate::error::{Error, Result};
use crate::fft2::{wavenumbers, Fft2};
use crate::geometry::Vec2;
use crate::pes::{FrontierLine, Potential};
use crate::HBAR;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_range: [f64; 2],
    pub y_range: [f64; 2],
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub mass: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            x_range: [-2.5, 1.5],
            y_range: [-1.0, 2.5],
            nx: 512,
            ny: 512,
            dt: 0.05,
            mass: PROTON_MASS,
        }
    }
}

impl GridSpec {
    pub fn with_points(mut self, nx: usize, ny: usize) -> Self {
        self.nx = nx;
        self.ny = ny;
        self
    }

    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("grid.nx", self.nx), ("grid.ny", self.ny)] {
            if n < 4 || !n.is_power_of_two() {
                return Err(Error::invalid(name, "must be a power of two >= 4"));
            }
        }
        if !(self.x_range[1] > self.x_range[0]) || !(self.y_range[1] > self.y_range[0]) {
            return Err(Error::invalid("grid.range", "upper bound must exceed lower bound"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::invalid("grid.dt", "must be positive"));
        }
        if !(self.mass > 0.0) {
            return Err(Error::invalid("grid.mass", "must be positive"));
        }
        Ok(())
    }

    pub fn dx(&self) -> f64 {
        (self.x_range[1] - self.x_range[0]) / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        (self.y_range[1] - self.y_range[0]) / self.ny as f64
    }

    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_range[0] + (i as f64 + 0.5) * self.dx()
    }

    #[inline]
    pub fn y(&self, j: usize) -> f64 {
        self.y_range[0] + (j as f64 + 0.5) * self.dy()
    }

    #[inline]
    pub fn node(&self, idx: usize) -> Vec2 {
        Vec2::new(self.x(idx % self.nx), self.y(idx / self.nx))
    }

    /// Largest resolvable momentum per axis, `hbar * pi / h`.
    pub fn max_momentum(&self) -> (f64, f64) {
        (HBAR * std::f64::consts::PI / self.dx(), HBAR * std::f64::consts::PI / self.dy())
    }

    pub fn contains(&self, p: Vec2) -> bool {
        p.x >= self.x_range[0] && p.x <= self.x_range[1] && p.y >= self.y_range[0] && p.y <= self.y_range[1]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveField {
    pub grid: GridSpec,
    pub t: f64,
    pub psi: Vec<Complex64>,
}

impl WaveField {
    pub fn density(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn norm(&self) -> f64 {
        self.psi.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.cell_area()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        let s = 1.0 / n.sqrt();
        self.psi.iter_mut().for_each(|z| *z *= s);
    }

    pub fn position_expectation(&self) -> Vec2 {
        let g = &self.grid;
        let mut acc = Vec2::ZERO;
        let mut w = 0.0;
        for (idx, z) in self.psi.iter().enumerate() {
            let r = z.norm_sqr();
            acc += g.node(idx) * r;
            w += r;
        }
        acc * (1.0 / w)
    }

    /// Per-axis position variance.
    pub fn position_variance(&self) -> Vec2 {
        let g = &self.grid;
        let mean = self.position_expectation();
        let mut acc = Vec2::ZERO;
        let mut w = 0.0;
        for (idx, z) in self.psi.iter().enumerate() {
            let r = z.norm_sqr();
            let d = g.node(idx) - mean;
            acc += Vec2::new(d.x * d.x, d.y * d.y) * r;
            w += r;
        }
        acc * (1.0 / w)
    }

    /// `<p>` evaluated in momentum space.
    pub fn momentum_expectation(&self) -> Vec2 {
        let g = &self.grid;
        let mut fft = Fft2::new(g.nx, g.ny);
        let mut k = self.psi.clone();
        fft.forward(&mut k);
        let kx = wavenumbers(g.nx, g.dx());
        let ky = wavenumbers(g.ny, g.dy());
        let mut acc = Vec2::ZERO;
        let mut w = 0.0;
        for (idx, z) in k.iter().enumerate() {
            let r = z.norm_sqr();
            acc += Vec2::new(kx[idx % g.nx], ky[idx / g.nx]) * r;
            w += r;
        }
        acc * (HBAR / w)
    }

    /// Fraction of the norm sitting within `depth` cells of any edge.
    pub fn edge_fraction(&self, depth: usize) -> f64 {
        let g = &self.grid;
        let mut edge = 0.0;
        let mut total = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let r = self.psi[j * g.nx + i].norm_sqr();
                total += r;
                if i < depth || j < depth || i >= g.nx - depth || j >= g.ny - depth {
                    edge += r;
                }
            }
        }
        if total > 0.0 {
            edge / total
        } else {
            0.0
        }
    }

    /// Little-endian `(re, im)` f64 pairs, row-major, plus a TOML sidecar
    /// at `<path>.toml`.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let values: Vec<[f64; 2]> = self.psi.iter().map(|z| [z.re, z.im]).collect();
        write_f64_pairs(path, &values)?;
        let sidecar = FieldSidecar {
            kind: "wavefunction".into(),
            layout: "row-major, x fastest, little-endian f64 (re, im) pairs".into(),
            t: self.t,
            norm: self.norm(),
            grid: self.grid,
        };
        write_sidecar(path, &sidecar)
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let sidecar: FieldSidecar = read_sidecar(path)?;
        let values = read_f64_pairs(path, sidecar.grid.len())?;
        Ok(WaveField {
            grid: sidecar.grid,
            t: sidecar.t,
            psi: values.into_iter().map(|[re, im]| Complex64::new(re, im)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldSidecar {
    pub kind: String,
    pub layout: String,
    pub t: f64,
    pub norm: f64,
    pub grid: GridSpec,
}

pub(crate) fn sidecar_path(path: &Path) -> std::path::PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".toml");
    s.into()
}

pub(crate) fn write_sidecar<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = toml::to_string(value).map_err(|e| Error::Format(e.to_string()))?;
    std::fs::write(sidecar_path(path), text)?;
    Ok(())
}

pub(crate) fn read_sidecar<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let sc = sidecar_path(path);
    let text = std::fs::read_to_string(&sc)?;
    toml::from_str(&text).map_err(|e| Error::Config { path: sc, message: e.to_string() })
}

pub(crate) fn write_f64_pairs(path: &Path, values: &[[f64; 2]]) -> Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 16);
    for [a, b] in values {
        buf.extend_from_slice(&a.to_le_bytes());
        buf.extend_from_slice(&b.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&buf)?;
    Ok(())
}

pub(crate) fn read_f64_pairs(path: &Path, count: usize) -> Result<Vec<[f64; 2]>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() != count * 16 {
        return Err(Error::Format(format!(
            "{}: expected {} bytes, found {}",
            path.display(),
            count * 16,
            buf.len()
        )));
    }
    Ok(buf
        .chunks_exact(16)
        .map(|c| {
            let a = f64::from_le_bytes(c[..8].try_into().unwrap());
            let b = f64::from_le_bytes(c[8..].try_into().unwrap());
            [a, b]
        })
        .collect())
}

/// Gaussian packet
/// `A0 exp(-(x-x0)^2/4sx^2 - (y-y0)^2/4sy^2 + i px (x-x0) + i py (y-y0))`,
/// renormalized on the grid.
pub fn initial_packet(grid: &GridSpec, center: Vec2, sigma_sq: (f64, f64), momentum: Vec2) -> Result<WaveField> {
    grid.validate()?;
    let (sx, sy) = (sigma_sq.0.sqrt(), sigma_sq.1.sqrt());
    let margin_ok = center.x - 6.0 * sx >= grid.x_range[0]
        && center.x + 6.0 * sx <= grid.x_range[1]
        && center.y - 6.0 * sy >= grid.y_range[0]
        && center.y + 6.0 * sy <= grid.y_range[1];
    if !margin_ok {
        return Err(Error::PacketTooWide(format!(
            "packet at ({}, {}) with widths ({sx:.4}, {sy:.4}) is closer than 6 sigma to an edge",
            center.x, center.y
        )));
    }
    // momentum content must stay well inside the grid's band limit
    let (kx_max, ky_max) = grid.max_momentum();
    let (spx, spy) = (HBAR / (2.0 * sx), HBAR / (2.0 * sy));
    if kx_max < 4.0 * (momentum.x.abs() + 3.0 * spx) || ky_max < 4.0 * (momentum.y.abs() + 3.0 * spy) {
        return Err(Error::PacketTooWide(format!(
            "grid resolves |p| <= ({kx_max:.1}, {ky_max:.1}), packet needs 4 x (|p0| + 3 sigma_p)"
        )));
    }
    let a0 = (2.0 * std::f64::consts::PI * sx * sy).powf(-0.5);
    let psi = (0..grid.len())
        .map(|idx| {
            let d = grid.node(idx) - center;
            let re = -d.x * d.x / (4.0 * sigma_sq.0) - d.y * d.y / (4.0 * sigma_sq.1);
            let im = (momentum.x * d.x + momentum.y * d.y) / HBAR;
            Complex64::from_polar(a0 * re.exp(), im)
        })
        .collect();
    let mut field = WaveField { grid: *grid, t: 0.0, psi };
    field.normalize();
    Ok(field)
}

/// Products-region probability: midpoint sum over cells whose centres lie
/// strictly above the frontier line.
pub fn restricted_norm(field: &WaveField, line: &FrontierLine) -> f64 {
    let g = &field.grid;
    field
        .psi
        .iter()
        .enumerate()
        .filter(|(idx, _)| line.in_products_region(g.node(*idx)))
        .map(|(_, z)| z.norm_sqr())
        .sum::<f64>()
        * g.cell_area()
}

/// `<Psi|T + V|Psi>`, kinetic part evaluated spectrally. The field should be
/// normalized; the result is divided by the norm regardless.
pub fn energy_expectation<P: Potential + ?Sized>(potential: &P, field: &WaveField) -> f64 {
    let g = &field.grid;
    let mut fft = Fft2::new(g.nx, g.ny);
    let mut k = field.psi.clone();
    fft.forward(&mut k);
    let kx = wavenumbers(g.nx, g.dx());
    let ky = wavenumbers(g.ny, g.dy());
    let mut kin = 0.0;
    let mut wk = 0.0;
    for (idx, z) in k.iter().enumerate() {
        let r = z.norm_sqr();
        let (a, b) = (kx[idx % g.nx], ky[idx / g.nx]);
        kin += r * HBAR * HBAR * (a * a + b * b) / (2.0 * g.mass);
        wk += r;
    }
    let mut pot = 0.0;
    let mut wr = 0.0;
    for (idx, z) in field.psi.iter().enumerate() {
        let r = z.norm_sqr();
        pot += r * potential.value(g.node(idx));
        wr += r;
    }
    kin / wk + pot / wr
}

/// Edge-density thresholds (fraction of the norm within `depth` cells of an edge).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakPolicy {
    pub depth: usize,
    pub warn: f64,
    pub fail: f64,
    /// Check every this many steps.
    pub every: usize,
}

impl Default for LeakPolicy {
    fn default() -> Self {
        LeakPolicy { depth: 3, warn: 1e-6, fail: 1e-3, every: 20 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakWarning {
    pub t: f64,
    pub fraction: f64,
}

/// Split-operator propagator holding the current wave function.
pub struct Propagator {
    grid: GridSpec,
    fft: Fft2,
    potential: Vec<f64>,
    half_phase: Vec<Complex64>,
    kinetic_phase: Vec<Complex64>,
    kx: Vec<f64>,
    ky: Vec<f64>,
    psi: Vec<Complex64>,
    grad_x: Vec<Complex64>,
    grad_y: Vec<Complex64>,
    step: usize,
    pub leak_policy: LeakPolicy,
    pub warnings: Vec<LeakWarning>,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator").field("grid", &self.grid).field("step", &self.step).finish()
    }
}

impl Propagator {
    pub fn new<P: Potential + ?Sized>(potential: &P, field: WaveField) -> Result<Self> {
        let g = field.grid;
        g.validate()?;
        let norm = field.norm();
        if (norm - 1.0).abs() > 1e-6 {
            return Err(Error::NotNormalized { norm });
        }
        let v: Vec<f64> = (0..g.len()).map(|idx| potential.value(g.node(idx))).collect();
        let half_phase = v
            .iter()
            .map(|&vi| Complex64::from_polar(1.0, -0.5 * g.dt * vi / HBAR))
            .collect();
        let kx = wavenumbers(g.nx, g.dx());
        let ky = wavenumbers(g.ny, g.dy());
        let inv_n = 1.0 / g.len() as f64;
        let kinetic_phase = (0..g.len())
            .map(|idx| {
                let (a, b) = (kx[idx % g.nx], ky[idx / g.nx]);
                let e = HBAR * HBAR * (a * a + b * b) / (2.0 * g.mass);
                Complex64::from_polar(inv_n, -g.dt * e / HBAR)
            })
            .collect();
        let n = g.len();
        Ok(Propagator {
            grid: g,
            fft: Fft2::new(g.nx, g.ny),
            potential: v,
            half_phase,
            kinetic_phase,
            kx,
            ky,
            psi: field.psi,
            grad_x: vec![Complex64::default(); n],
            grad_y: vec![Complex64::default(); n],
            step: 0,
            leak_policy: LeakPolicy::default(),
            warnings: Vec::new(),
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.grid.dt
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    pub fn psi(&self) -> &[Complex64] {
        &self.psi
    }

    pub fn potential_values(&self) -> &[f64] {
        &self.potential
    }

    /// `(dPsi/dx, dPsi/dy)` as of the last [`Propagator::step_with_gradient`].
    pub fn gradient(&self) -> (&[Complex64], &[Complex64]) {
        (&self.grad_x, &self.grad_y)
    }

    pub fn snapshot(&self) -> WaveField {
        WaveField { grid: self.grid, t: self.time(), psi: self.psi.clone() }
    }

    fn advance(&mut self, with_gradient: bool) -> Result<()> {
        for (z, h) in self.psi.iter_mut().zip(&self.half_phase) {
            *z *= h;
        }
        self.fft.forward(&mut self.psi);
        for (z, k) in self.psi.iter_mut().zip(&self.kinetic_phase) {
            *z *= k;
        }
        if with_gradient {
            let nx = self.grid.nx;
            let i = Complex64::new(0.0, 1.0);
            for (idx, z) in self.psi.iter().enumerate() {
                self.grad_x[idx] = i * self.kx[idx % nx] * z;
                self.grad_y[idx] = i * self.ky[idx / nx] * z;
            }
            self.fft.inverse(&mut self.grad_x);
            self.fft.inverse(&mut self.grad_y);
        }
        self.fft.inverse(&mut self.psi);
        if with_gradient {
            // grad(U phi) = U (grad phi - i dt/2 grad V phi); grad V from the grid potential
            self.potential_gradient_correction();
        }
        for (z, h) in self.psi.iter_mut().zip(&self.half_phase) {
            *z *= h;
        }
        self.step += 1;
        if self.step % self.leak_policy.every == 0 {
            self.check_leak()?;
        }
        Ok(())
    }

    fn potential_gradient_correction(&mut self) {
        let g = self.grid;
        let (nx, ny) = (g.nx, g.ny);
        let (hx, hy) = (g.dx(), g.dy());
        let c = Complex64::new(0.0, -0.5 * g.dt / HBAR);
        for j in 0..ny {
            for i in 0..nx {
                let idx = j * nx + i;
                let v = &self.potential;
                // one-sided at the edges
                let dvx = if i == 0 {
                    (v[idx + 1] - v[idx]) / hx
                } else if i == nx - 1 {
                    (v[idx] - v[idx - 1]) / hx
                } else {
                    (v[idx + 1] - v[idx - 1]) / (2.0 * hx)
                };
                let dvy = if j == 0 {
                    (v[idx + nx] - v[idx]) / hy
                } else if j == ny - 1 {
                    (v[idx] - v[idx - nx]) / hy
                } else {
                    (v[idx + nx] - v[idx - nx]) / (2.0 * hy)
                };
                let phi = self.psi[idx];
                let h = self.half_phase[idx];
                self.grad_x[idx] = h * (self.grad_x[idx] + c * dvx * phi);
                self.grad_y[idx] = h * (self.grad_y[idx] + c * dvy * phi);
            }
        }
    }

    fn check_leak(&mut self) -> Result<()> {
        let field = WaveField { grid: self.grid, t: self.time(), psi: Vec::new() };
        let fraction = edge_fraction_of(&self.psi, &field.grid, self.leak_policy.depth);
        if fraction > self.leak_policy.fail {
            return Err(Error::BoundaryLeak { fraction, t: self.time() });
        }
        if fraction > self.leak_policy.warn {
            self.warnings.push(LeakWarning { t: self.time(), fraction });
        }
        Ok(())
    }

    /// One split-operator step.
    pub fn step(&mut self) -> Result<()> {
        self.advance(false)
    }

    /// One step, also computing the spatial gradient of the new wave function.
    pub fn step_with_gradient(&mut self) -> Result<()> {
        self.advance(true)
    }

    /// Compute the gradient of the current wave function spectrally.
    pub fn compute_gradient(&mut self) {
        spectral_gradient(&mut self.fft, &self.psi, &self.kx, &self.ky, &mut self.grad_x, &mut self.grad_y);
    }

    /// Run to `t_final`, returning the initial field and every
    /// `snapshot_stride`-th step.
    pub fn propagate(&mut self, t_final: f64, snapshot_stride: usize) -> Result<Vec<WaveField>> {
        if snapshot_stride == 0 {
            return Err(Error::invalid("snapshot_stride", "must be at least 1"));
        }
        let steps = ((t_final - self.time()) / self.grid.dt).round() as usize;
        let mut out = vec![self.snapshot()];
        for _ in 0..steps {
            self.step()?;
            if self.step % snapshot_stride == 0 {
                out.push(self.snapshot());
            }
        }
        Ok(out)
    }
}

fn edge_fraction_of(psi: &[Complex64], g: &GridSpec, depth: usize) -> f64 {
    let mut edge = 0.0;
    let mut total = 0.0;
    for j in 0..g.ny {
        let row = &psi[j * g.nx..(j + 1) * g.nx];
        let full_row = j < depth || j >= g.ny - depth;
        for (i, z) in row.iter().enumerate() {
            let r = z.norm_sqr();
            total += r;
            if full_row || i < depth || i >= g.nx - depth {
                edge += r;
            }
        }
    }
    if total > 0.0 {
        edge / total
    } else {
        0.0
    }
}

pub(crate) fn spectral_gradient(
    fft: &mut Fft2,
    psi: &[Complex64],
    kx: &[f64],
    ky: &[f64],
    gx: &mut [Complex64],
    gy: &mut [Complex64],
) {
    let nx = kx.len();
    let inv_n = 1.0 / psi.len() as f64;
    let mut k = psi.to_vec();
    fft.forward(&mut k);
    let i = Complex64::new(0.0, inv_n);
    for (idx, z) in k.iter().enumerate() {
        gx[idx] = i * kx[idx % nx] * z;
        gy[idx] = i * ky[idx / nx] * z;
    }
    fft.inverse(gx);
    fft.inverse(gy);
}

/// Gradient of an arbitrary field, spectrally.
pub fn field_gradient(field: &WaveField) -> (Vec<Complex64>, Vec<Complex64>) {
    let g = &field.grid;
    let mut fft = Fft2::new(g.nx, g.ny);
    let kx = wavenumbers(g.nx, g.dx());
    let ky = wavenumbers(g.ny, g.dy());
    let mut gx = vec![Complex64::default(); g.len()];
    let mut gy = vec![Complex64::default(); g.len()];
    spectral_gradient(&mut fft, &field.psi, &kx, &ky, &mut gx, &mut gy);
    (gx, gy)
}

/// Free Gaussian width `sigma0 sqrt(1 + (hbar t / 2 m sigma0^2)^2)`.
pub fn free_gaussian_width(sigma0: f64, mass: f64, t: f64) -> f64 {
    let tau = HBAR * t / (2.0 * mass * sigma0 * sigma0);
    sigma0 * (1.0 + tau * tau).sqrt()
}
