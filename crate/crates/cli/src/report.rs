//! Run reports: one JSON document per run plus a console table.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use emtomo::config::RunConfig;

#[derive(Serialize)]
pub struct RunReport {
    pub command: String,
    pub config: RunConfig,
    pub metrics: BTreeMap<String, f64>,
    pub artifacts: Vec<String>,
    pub timings_s: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(command: &str, config: RunConfig) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            metrics: BTreeMap::new(),
            artifacts: Vec::new(),
            timings_s: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn artifact(&mut self, path: &Path) {
        self.artifacts.push(path.display().to_string());
    }

    pub fn timing(&mut self, phase: &str, seconds: f64) {
        self.timings_s.insert(phase.to_string(), seconds);
    }

    /// Write `report.json` and print the metric table.
    pub fn finish(&self, out_dir: &Path) -> anyhow::Result<PathBuf> {
        std::fs::create_dir_all(out_dir)?;
        let path = out_dir.join("report.json");
        std::fs::write(&path, serde_json::to_string_pretty(self)?)?;
        println!("== {} ==", self.command);
        for (name, value) in &self.metrics {
            println!("  {name:<32} {value:.6}");
        }
        for (phase, secs) in &self.timings_s {
            println!("  wall[{phase}]: {secs:.2} s");
        }
        for artifact in &self.artifacts {
            println!("  artifact: {artifact}");
        }
        println!("  report: {}", path.display());
        Ok(path)
    }
}

/// Binary or soft grayscale image as a binary PGM (P5) file.
pub fn write_pgm(path: &Path, pixels: &[f64], width: usize, height: usize) -> anyhow::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    write!(f, "P5\n{width} {height}\n255\n")?;
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    f.write_all(&bytes)?;
    Ok(())
}

/// Two-column CSV of paired field vectors (or one column if `b` is empty).
pub fn write_fields_csv(
    path: &Path,
    header: &str,
    a: &[f64],
    b: Option<&[f64]>,
) -> anyhow::Result<()> {
    use std::io::Write;
    let mut f = std::fs::File::create(path)?;
    writeln!(f, "{header}")?;
    for (i, v) in a.iter().enumerate() {
        match b {
            Some(bb) => writeln!(f, "{i},{v},{}", bb[i])?,
            None => writeln!(f, "{i},{v}")?,
        }
    }
    Ok(())
}
