//! CSV and JSON writers. Floats are written in Rust's shortest round-trip
//! form, so identical runs produce byte-identical files.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::Result;
use crate::model::ModelParams;
use crate::ode::Trajectory;
use crate::stochastic::{BrownianPath, EnsembleSummary, RayDensity};

use super::sweep::SweepReport;

fn csv_field(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// Columns `t,x1,x2,x3,L,H,norm`; `H` is the log-form first integral and is
/// left empty outside the positive chart or without parameters.
pub fn write_trajectory_csv<W: Write>(w: W, traj: &Trajectory, params: Option<&ModelParams>) -> Result<()> {
    let traj = traj.clone().with_monitors(params);
    let ch = traj.channels.as_ref().expect("monitors filled");
    let mut w = BufWriter::new(w);
    writeln!(w, "t,x1,x2,x3,L,H,norm")?;
    for k in 0..traj.len() {
        let x = traj.states[k];
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            traj.times[k],
            x[0],
            x[1],
            x[2],
            ch.sphere_defect[k],
            csv_field(ch.log_h[k]),
            ch.norm[k]
        )?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `t,x1,x2,x3,W` for a path integrated on the grid of `path`.
pub fn write_sde_csv<W: Write>(w: W, traj: &Trajectory, path: &BrownianPath) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "t,x1,x2,x3,W")?;
    for ((t, x), wv) in traj.times.iter().zip(&traj.states).zip(path.values()) {
        writeln!(w, "{t},{},{},{},{wv}", x[0], x[1], x[2])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `x,p` on `n_points` equally spaced points of `(0, x_max]`.
pub fn write_density_csv<W: Write>(w: W, density: &RayDensity, x_max: f64, n_points: usize) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "x,p")?;
    for k in 1..=n_points {
        let x = x_max * k as f64 / n_points as f64;
        writeln!(w, "{x},{}", density.pdf(x))?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `kind,coordinate,bin_lo,bin_hi,count,mass` for the endpoint and
/// tail histograms of each coordinate.
pub fn write_histograms_csv<W: Write>(w: W, summary: &EnsembleSummary) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "kind,coordinate,bin_lo,bin_hi,count,mass")?;
    for (kind, hists) in [("endpoint", &summary.endpoint_histograms), ("tail", &summary.tail_histograms)] {
        for (i, h) in hists.iter().enumerate() {
            let edges = h.bin_edges();
            for (b, (c, m)) in h.counts.iter().zip(h.masses()).enumerate() {
                writeln!(w, "{kind},x{},{},{},{c},{m}", i + 1, edges[b], edges[b + 1])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

/// Columns `sigma,regime,absorption_fraction,ray_mass_x1,ray_mass_x2,ray_mass_x3`.
pub fn write_sweep_csv<W: Write>(w: W, report: &SweepReport) -> Result<()> {
    let mut w = BufWriter::new(w);
    writeln!(w, "sigma,regime,absorption_fraction,ray_mass_x1,ray_mass_x2,ray_mass_x3")?;
    for row in &report.rows {
        let regime = match row.regime {
            Some(r) => r.to_string(),
            None => "critical".to_string(),
        };
        let (abs, rays) = match &row.summary {
            Some(s) => (s.absorption_fraction, s.ray_mass),
            None => (None, [None; 3]),
        };
        writeln!(w, "{},{regime},{},{},{},{}", row.sigma, opt(abs), opt(rays[0]), opt(rays[1]), opt(rays[2]))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub mode: String,
    pub config: Value,
    pub master_seed: Option<u64>,
    /// How per-path seeds follow from the master seed.
    pub seed_derivation: &'static str,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(mode: String, config: Value, master_seed: Option<u64>) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            mode,
            config,
            master_seed,
            seed_derivation: "path i: first u64 of ChaCha8(master_seed) on stream i; increments: Box-Muller on words 4k..4k+4 of ChaCha8(path seed)",
            outputs: Vec::new(),
        }
    }
}

/// Collects files written into one output directory.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root)?;
        Ok(OutputDir { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates `rel` (and its parent directories) and hands it to `f`.
    pub fn write<F>(&mut self, rel: &str, f: F) -> Result<PathBuf>
    where
        F: FnOnce(fs::File) -> Result<()>,
    {
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        f(fs::File::create(&path)?)?;
        self.written.push(rel.to_string());
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<PathBuf> {
        self.write(rel, |file| {
            let mut w = BufWriter::new(file);
            serde_json::to_writer_pretty(&mut w, value)?;
            writeln!(w)?;
            w.flush()?;
            Ok(())
        })
    }

    pub fn finish(mut self, mut manifest: Manifest) -> Result<Vec<String>> {
        manifest.outputs = self.written.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(self.written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::{integrate_ode, IntegratorConfig};

    #[test]
    fn trajectory_csv_layout() {
        let p = ModelParams::new([1.0; 3], [0.0; 3]);
        let tr = integrate_ode(&p, [0.5, 0.5, 0.5], &IntegratorConfig::rk4(0.1, 0.2)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &tr, Some(&p)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,x1,x2,x3,L,H,norm");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0,0.5,0.5,0.5,-0.25,"));
    }

    #[test]
    fn off_chart_h_is_blank() {
        let p = ModelParams::new([1.0; 3], [0.0; 3]);
        let tr = integrate_ode(&p, [0.5, 0.0, 0.0], &IntegratorConfig::rk4(0.1, 0.1)).unwrap();
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, &tr, Some(&p)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1).unwrap(), "0,0.5,0,0,-0.75,,0.5");
    }
}
