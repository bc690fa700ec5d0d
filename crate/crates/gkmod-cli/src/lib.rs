pub mod commands;
pub mod config;
pub mod report;

use std::path::PathBuf;

use anyhow::{Context, Result};

use config::RunConfig;
use report::Report;

/// Output directory override.
pub const OUT_DIR_ENV: &str = "GKMOD_OUT_DIR";

/// Where the report goes; `None` means stdout.
pub fn output_path(cfg: &RunConfig) -> Option<PathBuf> {
    let out = cfg.text("out");
    if out == "-" {
        return None;
    }
    let name = if out.is_empty() { format!("{}.{}", cfg.command, cfg.text("format")) } else { out.to_string() };
    let path = PathBuf::from(name);
    if path.is_absolute() {
        return Some(path);
    }
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) => Some(PathBuf::from(dir).join(path)),
        None => Some(path),
    }
}

pub fn render(cfg: &RunConfig, rep: &Report) -> Result<String> {
    match cfg.text("format") {
        "csv" => rep.to_csv(),
        _ => Ok(rep.to_json()),
    }
}

pub fn emit(cfg: &RunConfig, rep: &Report) -> Result<Option<PathBuf>> {
    let text = render(cfg, rep)?;
    match output_path(cfg) {
        None => {
            use std::io::Write;
            match std::io::stdout().lock().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e).context("writing to stdout"),
                _ => Ok(None),
            }
        }
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            }
            std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?;
            Ok(Some(p))
        }
    }
}

pub fn set_threads(n: usize) -> Result<()> {
    if n > 0 {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    Ok(())
}
