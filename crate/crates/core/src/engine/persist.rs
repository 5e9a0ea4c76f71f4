use std::path::{Path, PathBuf};

use super::{EngineError, RunRecord};

/// File names inside `runs/<run_id>/`.
pub struct RunFiles;

impl RunFiles {
    pub const RECORD: &'static str = "run.json";
    pub const PLAN: &'static str = "plan.json";
    pub const TRACE: &'static str = "trace.json";
    pub const REPORT: &'static str = "report.json";
    pub const REPORT_TEXT: &'static str = "report.txt";
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> EngineError + '_ {
    move |e| EngineError::Io(format!("{}: {e}", path.display()))
}

/// Writes the run directory. Files are staged in a hidden sibling directory
/// and moved into place with one rename, so readers never see half a run.
pub fn write_run(runs_dir: &Path, rec: &RunRecord) -> Result<PathBuf, EngineError> {
    if rec.run_id.is_empty() || rec.run_id.contains(['/', '\\']) || rec.run_id.starts_with('.') {
        return Err(EngineError::Io(format!("run id `{}` is not a valid directory name", rec.run_id)));
    }
    std::fs::create_dir_all(runs_dir).map_err(io(runs_dir))?;
    let target = runs_dir.join(&rec.run_id);
    let staging = runs_dir.join(format!(".{}.staging", rec.run_id));
    if staging.exists() {
        std::fs::remove_dir_all(&staging).map_err(io(&staging))?;
    }
    std::fs::create_dir_all(&staging).map_err(io(&staging))?;
    let write = |name: &str, text: String| {
        let p = staging.join(name);
        std::fs::write(&p, text).map_err(io(&p))
    };
    write(RunFiles::RECORD, serde_json::to_string_pretty(rec).expect("record serializes"))?;
    if let Some(plan) = &rec.plan {
        write(RunFiles::PLAN, plan.to_json())?;
    }
    write(RunFiles::TRACE, rec.trace.to_json())?;
    if let Some(report) = &rec.report {
        write(RunFiles::REPORT, report.to_json())?;
        write(RunFiles::REPORT_TEXT, report.render_text())?;
    }
    if target.exists() {
        let old = runs_dir.join(format!(".{}.old", rec.run_id));
        let _ = std::fs::remove_dir_all(&old);
        std::fs::rename(&target, &old).map_err(io(&target))?;
        std::fs::rename(&staging, &target).map_err(io(&target))?;
        let _ = std::fs::remove_dir_all(&old);
    } else {
        std::fs::rename(&staging, &target).map_err(io(&target))?;
    }
    Ok(target)
}

pub fn load_run(runs_dir: &Path, run_id: &str) -> Result<Option<RunRecord>, EngineError> {
    if run_id.contains(['/', '\\']) || run_id.starts_with('.') {
        return Ok(None);
    }
    let path = runs_dir.join(run_id).join(RunFiles::RECORD);
    if !path.exists() {
        return Ok(None);
    }
    let text = std::fs::read_to_string(&path).map_err(io(&path))?;
    serde_json::from_str(&text)
        .map(Some)
        .map_err(|e| EngineError::Io(format!("{}: {e}", path.display())))
}
