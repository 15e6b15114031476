//! Artifact writing: CSV table, JSON summary and gnuplot template per run.

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::{json, Map, Value};
use std::fs;
use std::path::{Path, PathBuf};

pub struct Artifacts {
    dir: PathBuf,
    stem: String,
}

/// Outcome of the tolerance comparison in check mode.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub passed: bool,
    pub criterion: String,
}

impl Artifacts {
    pub fn new(dir: &Path, stem: &str) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Artifacts { dir: dir.to_path_buf(), stem: stem.to_string() })
    }

    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.stem))
    }

    pub fn csv_name(&self) -> String {
        format!("{}.csv", self.stem)
    }

    pub fn write_csv<R: Serialize>(&self, rows: &[R]) -> Result<()> {
        let path = self.path("csv");
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        for r in rows {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_gnuplot(&self, body: &str) -> Result<()> {
        let script = format!(
            "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\nset output '{}.png'\ndata = '{}'\n{body}\n",
            self.stem,
            self.csv_name()
        );
        fs::write(self.path("gp"), script)?;
        Ok(())
    }

    pub fn write_summary(
        &self,
        command: &str,
        config: Map<String, Value>,
        results: Value,
        check: Option<&CheckOutcome>,
    ) -> Result<()> {
        let seed = config.get("seed").cloned().unwrap_or(Value::Null);
        let summary = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "git_describe": git_describe(),
            "seed": seed,
            "config": config,
            "results": results,
            "check": check,
        });
        let text = serde_json::to_string_pretty(&summary)?;
        fs::write(self.path("json"), text + "\n")?;
        Ok(())
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["-C", env!("CARGO_MANIFEST_DIR"), "describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}
