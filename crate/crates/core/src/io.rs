//! Trajectory CSV files and run manifests.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classical::{Trajectory, TrajectoryKind, TrajectorySample};
use crate::error::{Error, Result};
use crate::geometry::Vec2;
use crate::pes::Potential;

/// Header for trajectory CSV files. The `node_clamps` column is written for
/// Bohmian trajectories only.
pub fn trajectory_header(kind: TrajectoryKind) -> &'static str {
    match kind {
        TrajectoryKind::Classical => "id,t,x,y,px,py,E",
        TrajectoryKind::Bohmian => "id,t,x,y,px,py,E,node_clamps",
    }
}

/// Append rows for one trajectory; `E = |p|^2 / 2m + V`.
pub fn write_trajectory_rows<W: Write, P: Potential + ?Sized>(
    out: &mut W,
    traj: &Trajectory,
    potential: &P,
    mass: f64,
) -> std::io::Result<()> {
    for s in &traj.samples {
        let e = s.momentum.norm_sq() / (2.0 * mass) + potential.value(s.position);
        write!(
            out,
            "{},{:.6},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            traj.id, s.t, s.position.x, s.position.y, s.momentum.x, s.momentum.y, e
        )?;
        if traj.kind == TrajectoryKind::Bohmian {
            write!(out, ",{}", traj.node_clamps)?;
        }
        writeln!(out)?;
    }
    Ok(())
}

pub fn write_trajectories<W: Write, P: Potential + ?Sized>(
    mut out: W,
    trajs: &[Trajectory],
    potential: &P,
    mass: f64,
) -> std::io::Result<()> {
    let kind = trajs.first().map_or(TrajectoryKind::Classical, |t| t.kind);
    writeln!(out, "{}", trajectory_header(kind))?;
    for tr in trajs {
        write_trajectory_rows(&mut out, tr, potential, mass)?;
    }
    Ok(())
}

/// Read a trajectory CSV written by [`write_trajectories`], grouping rows by id.
pub fn read_trajectories<R: BufRead>(input: R) -> Result<Vec<Trajectory>> {
    let mut lines = input.lines();
    let header = lines.next().ok_or_else(|| Error::Format("empty trajectory file".into()))??;
    let kind = if header.trim() == trajectory_header(TrajectoryKind::Classical) {
        TrajectoryKind::Classical
    } else if header.trim() == trajectory_header(TrajectoryKind::Bohmian) {
        TrajectoryKind::Bohmian
    } else {
        return Err(Error::Format(format!("unrecognised trajectory header `{header}`")));
    };
    let mut out: Vec<Trajectory> = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let bad = |what: &str| Error::Format(format!("line {}: {what}", k + 2));
        let cols: Vec<&str> = line.split(',').collect();
        let want = if kind == TrajectoryKind::Bohmian { 8 } else { 7 };
        if cols.len() != want {
            return Err(bad("wrong number of columns"));
        }
        let id: usize = cols[0].trim().parse().map_err(|_| bad("bad id"))?;
        let f = |i: usize| cols[i].trim().parse::<f64>().map_err(|_| bad("bad number"));
        let sample = TrajectorySample { t: f(1)?, position: Vec2::new(f(2)?, f(3)?), momentum: Vec2::new(f(4)?, f(5)?) };
        let clamps = if kind == TrajectoryKind::Bohmian {
            cols[7].trim().parse().map_err(|_| bad("bad node_clamps"))?
        } else {
            0
        };
        match out.last_mut() {
            Some(tr) if tr.id == id => tr.samples.push(sample),
            _ => out.push(Trajectory { id, kind, samples: vec![sample], node_clamps: clamps }),
        }
    }
    Ok(out)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestFile {
    pub path: String,
    pub sha256: String,
}

/// Written as `manifest.toml` next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub config_sha256: String,
    pub seed: u64,
    pub files: Vec<ManifestFile>,
}

impl Manifest {
    pub fn new(command: &str, config_text: &str, seed: u64) -> Self {
        Manifest {
            command: command.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            config_sha256: sha256_hex(config_text.as_bytes()),
            seed,
            files: Vec::new(),
        }
    }

    /// Record an output file already written under `dir`.
    pub fn add(&mut self, dir: &Path, name: &str) -> Result<()> {
        let bytes = std::fs::read(dir.join(name))?;
        self.files.push(ManifestFile { path: name.to_owned(), sha256: sha256_hex(&bytes) });
        Ok(())
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Format(e.to_string()))?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pes::FreeSpace;

    #[test]
    fn trajectory_csv_roundtrip() {
        let mk = |id, kind| Trajectory {
            id,
            kind,
            samples: (0..3)
                .map(|k| TrajectorySample {
                    t: k as f64,
                    position: Vec2::new(0.1 * k as f64, -0.2),
                    momentum: Vec2::new(-4.0, 4.0),
                })
                .collect(),
            node_clamps: if kind == TrajectoryKind::Bohmian { 2 } else { 0 },
        };
        for kind in [TrajectoryKind::Classical, TrajectoryKind::Bohmian] {
            let trajs = vec![mk(3, kind), mk(7, kind)];
            let mut buf = Vec::new();
            write_trajectories(&mut buf, &trajs, &FreeSpace, 1836.0).unwrap();
            let back = read_trajectories(buf.as_slice()).unwrap();
            assert_eq!(back.len(), 2);
            assert_eq!(back[1].id, 7);
            assert_eq!(back[0].node_clamps, trajs[0].node_clamps);
            for (a, b) in back[0].samples.iter().zip(&trajs[0].samples) {
                assert!((a.position - b.position).norm() < 1e-12);
            }
        }
        assert!(matches!(read_trajectories("a,b\n".as_bytes()), Err(Error::Format(_))));
    }

    #[test]
    fn hash_is_stable() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
