//! Subcommand bodies. Every command resolves its output directory,
//! echoes `resolved.cfg` there, and removes whatever it wrote if it
//! fails partway, so a failed run leaves no partial artifacts.

use std::path::{Path, PathBuf};

use thiserror::Error;
use topomacro::qnet::{load_params, save_params};
use topomacro::simenv::{scene_to_string, FormatError, RewardScheme};
use topomacro::topomap::map_to_string;
use topomacro::trainer::{
    evaluate, random_baseline, rollout_map, train, train_scene, TrainError,
};

use crate::config::{ConfigError, RunConfig};
use crate::plot::{read_macro_steps, render_svg, PlotError, Series};

#[derive(Error, Debug)]
pub enum CmdError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Invalid(String),
}

/// Output-directory session: tracks every path the command may write so
/// a failure can delete exactly those files.
pub struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self, CmdError> {
        std::fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    /// Register a path for cleanup before anything gets written to it.
    pub fn track(&mut self, name: &str) -> PathBuf {
        let p = self.path(name);
        self.written.push(p.clone());
        p
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<PathBuf, CmdError> {
        let p = self.track(name);
        std::fs::write(&p, text)?;
        Ok(p)
    }

    fn discard(&self) {
        for p in &self.written {
            let _ = std::fs::remove_file(p);
        }
    }
}

/// Run `body` against a fresh output session; on error, delete whatever
/// it wrote before failing.
fn with_outputs(
    dir: &Path,
    body: impl FnOnce(&mut Outputs) -> Result<(), CmdError>,
) -> Result<(), CmdError> {
    let mut out = Outputs::create(dir)?;
    let r = body(&mut out);
    if r.is_err() {
        out.discard();
    }
    r
}

/// Train over the configured schedule: `metrics.csv`, cadence
/// checkpoints, and the final network land in the output directory.
pub fn cmd_train(cfg: &RunConfig) -> Result<(), CmdError> {
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        // Cadence checkpoints are written by the trainer; register their
        // deterministic names up front so an aborted run removes them.
        if cfg.train.checkpoint_every > 0 {
            let mut e = cfg.train.checkpoint_every;
            while e <= cfg.train.episodes {
                out.track(&format!("checkpoint_{e:05}.qnet"));
                e += cfg.train.checkpoint_every;
            }
        }
        let trained = train(&cfg.train, Some(&out.path("")))?;
        out.write("metrics.csv", &trained.log.to_csv())?;
        let final_path = out.track("final.qnet");
        save_params(&trained.params, &final_path)?;
        Ok(())
    })
}

/// Evaluate a checkpoint on held-out scenes: `eval.csv` and
/// `eval_summary.txt`.
pub fn cmd_eval(cfg: &RunConfig, checkpoint: &Path, n_eval: usize) -> Result<(), CmdError> {
    let params = load_params::<f64>(checkpoint)?;
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        let summary = evaluate(&params, &cfg.train, n_eval)?;
        out.write("eval.csv", &summary.to_csv())?;
        out.write("eval_summary.txt", &summary.summary_text())?;
        Ok(())
    })
}

/// Uniform-policy control on the same held-out protocol:
/// `baseline.csv` and `baseline_summary.txt`.
pub fn cmd_baseline(cfg: &RunConfig, n_eval: usize) -> Result<(), CmdError> {
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        let summary = random_baseline(&cfg.train, n_eval)?;
        out.write("baseline.csv", &summary.to_csv())?;
        out.write("baseline_summary.txt", &summary.summary_text())?;
        Ok(())
    })
}

/// Write the scene a run with this config uses for `scene_index`, as
/// `scene.txt` in the scene text format.
pub fn cmd_gen_scene(cfg: &RunConfig, scene_index: usize) -> Result<(), CmdError> {
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        let (_, scene) = train_scene(&cfg.train, scene_index)?;
        out.write("scene.txt", &scene_to_string(&scene))?;
        Ok(())
    })
}

/// Replay one uniform episode on the scene for `scene_index` and write
/// the topological map it built, as `map.txt` in the map text format.
pub fn cmd_dump_map(cfg: &RunConfig, scene_index: usize) -> Result<(), CmdError> {
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        let (_, map) = rollout_map(&cfg.train, scene_index)?;
        out.write("map.txt", &map_to_string(&map))?;
        Ok(())
    })
}

/// Per-series plot options, aligned by position with the input list.
#[derive(Debug, Clone, Default)]
pub struct SeriesOpts {
    pub labels: Vec<String>,
    pub schemes: Vec<String>,
    pub targets: Vec<u32>,
}

/// Smooth each metrics CSV and render every series into `curves.svg`.
pub fn cmd_plot(cfg: &RunConfig, inputs: &[PathBuf], opts: &SeriesOpts) -> Result<(), CmdError> {
    let mut series = Vec::with_capacity(inputs.len());
    for (i, path) in inputs.iter().enumerate() {
        let scheme = match opts.schemes.get(i).map(String::as_str) {
            None => RewardScheme::Intermediate,
            Some(s) if s.eq_ignore_ascii_case("intermediate") => RewardScheme::Intermediate,
            Some(s) if s.eq_ignore_ascii_case("terminal") => RewardScheme::Terminal,
            Some(s) => {
                return Err(CmdError::Invalid(format!(
                    "series scheme `{s}`: expected `intermediate` or `terminal`"
                )))
            }
        };
        let label = match opts.labels.get(i) {
            Some(l) => l.clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("series {i}")),
        };
        series.push(Series {
            label,
            scheme,
            n_targets: opts.targets.get(i).copied().unwrap_or(1),
            macro_steps: read_macro_steps(path)?,
        });
    }
    with_outputs(&cfg.out_dir, |out| {
        out.write("resolved.cfg", &cfg.resolved_text())?;
        out.write("curves.svg", &render_svg(&series)?)?;
        Ok(())
    })
}
