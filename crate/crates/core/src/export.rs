//! CSV and JSON writers for trajectories, profiles, scans and branches.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::branch::BranchPoint;
use crate::error::Result;
use crate::integrate::Path as IntegrationPath;
use crate::phaseplane::{Equilibrium, Portrait};
use crate::shoot::ScanSample;
use crate::transform::SolutionProfile;

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().has_headers(false).from_writer(out)
}

fn fmt(v: f64) -> String {
    v.to_string()
}

/// `t,z,y` per accepted step.
pub fn write_trajectory<W: Write>(out: W, path: &IntegrationPath<2>) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "z", "y"])?;
    for s in &path.samples {
        w.write_record([fmt(s.t), fmt(s.state[0]), fmt(s.state[1])])?;
    }
    w.flush()?;
    Ok(())
}

/// `t,z,w,r,u`; `u` is empty when it was not reconstructed.
pub fn write_profile<W: Write>(out: W, profile: &SolutionProfile) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["t", "z", "w", "r", "u"])?;
    for i in 0..profile.len() {
        let u = profile.u_values.get(i).map_or(String::new(), |v| fmt(*v));
        w.write_record([
            fmt(profile.t_grid[i]),
            fmt(profile.z_values[i]),
            fmt(profile.w_values[i]),
            fmt(profile.r_grid[i]),
            u,
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `s,mismatch,departure,terminal`; `departure` is empty when undefined.
pub fn write_scan<W: Write>(out: W, scan: &[ScanSample]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["s", "mismatch", "departure", "terminal"])?;
    for s in scan {
        let departure = s.departure.map_or(String::new(), fmt);
        w.write_record([fmt(s.s), fmt(s.mismatch), departure, s.terminal.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `lambda,sup_norm,newton_iterations,residual`.
pub fn write_branch<W: Write>(out: W, points: &[BranchPoint]) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["lambda", "sup_norm", "newton_iterations", "residual"])?;
    for p in points {
        w.write_record([fmt(p.lambda), fmt(p.sup_norm()), p.newton_iterations.to_string(), fmt(p.residual)])?;
    }
    w.flush()?;
    Ok(())
}

/// Equilibrium summary used in JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct EquilibriumRecord {
    pub z: f64,
    pub y: f64,
    pub eigenvalues: [[f64; 2]; 2],
    pub classification: String,
}

impl From<&Equilibrium> for EquilibriumRecord {
    fn from(eq: &Equilibrium) -> Self {
        Self {
            z: eq.point[0],
            y: eq.point[1],
            eigenvalues: [[eq.eigenvalues[0].re, eq.eigenvalues[0].im], [eq.eigenvalues[1].re, eq.eigenvalues[1].im]],
            classification: format!("{:?}", eq.classification),
        }
    }
}

pub fn equilibrium_records(eqs: &[Equilibrium]) -> Vec<EquilibriumRecord> {
    eqs.iter().map(EquilibriumRecord::from).collect()
}

/// Writes one `orbit_<branch>.csv` per traced manifold and
/// `equilibria.json` into `dir`; returns the file names written.
pub fn write_portrait(dir: &Path, portrait: &Portrait) -> Result<Vec<String>> {
    let mut names = Vec::new();
    for trace in &portrait.traces {
        let name = format!("orbit_{}.csv", trace.branch.name());
        write_trajectory(BufWriter::new(File::create(dir.join(&name))?), &trace.trajectory)?;
        names.push(name);
    }
    let name = "equilibria.json".to_string();
    write_json(&dir.join(&name), &equilibrium_records(&portrait.equilibria))?;
    names.push(name);
    Ok(names)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

pub fn write_csv_file(path: &Path, body: impl FnOnce(BufWriter<File>) -> Result<()>) -> Result<()> {
    body(BufWriter::new(File::create(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrate::integrate;

    #[test]
    fn trajectory_csv_has_header_and_rows() {
        let path = integrate(|_, x: &[f64; 2]| [x[1], -x[0]], [1.0, 0.0], 0.0, 1.0, 1e-8, &[]).unwrap();
        let mut buf = Vec::new();
        write_trajectory(&mut buf, &path).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("t,z,y"));
        assert_eq!(lines.count(), path.samples.len());
    }

    #[test]
    fn scan_csv_keeps_infinities() {
        let scan = [
            ScanSample { s: -1.0, mismatch: f64::NEG_INFINITY, departure: Some(-1.0), terminal: "blow_up" },
            ScanSample { s: 0.0, mismatch: 0.0, departure: None, terminal: "reached_end" },
        ];
        let mut buf = Vec::new();
        write_scan(&mut buf, &scan).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("-1,-inf,-1,blow_up"));
        assert!(text.contains("0,0,,reached_end"));
    }

    #[test]
    fn profile_csv_round_trips() {
        let profile = SolutionProfile::from_z(vec![0.0, 0.5, 1.0], vec![0.0, 0.25, 0.125], 1.0, crate::BoundaryKind::Dirichlet).unwrap();
        let mut buf = Vec::new();
        write_profile(&mut buf, &profile).unwrap();
        let mut reader = csv::Reader::from_reader(buf.as_slice());
        let rows: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[1][1].parse::<f64>().unwrap(), 0.25);
        assert_eq!(&rows[1][4], "");
    }
}
