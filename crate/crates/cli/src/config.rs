//! Run configuration: defaults, `key = value` file, flag overrides.
//!
//! Precedence: defaults < file < flags < `TOPO_MACRO_OUT` (output
//! directory only). Every key's final value and its source are echoed to
//! `resolved.cfg` in the output directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;
use topomacro::simenv::RewardScheme;
use topomacro::trainer::TrainConfig;

#[derive(Error, Debug)]
pub enum ConfigError {
    #[error("config file `{0}`: {1}")]
    MissingFile(PathBuf, #[source] std::io::Error),
    #[error("unknown config key `{key}` ({site})")]
    UnknownKey { key: String, site: String },
    #[error("config key `{key}` ({site}): expected {expected}, got `{got}`")]
    TypeError {
        key: String,
        site: String,
        expected: &'static str,
        got: String,
    },
    #[error("config line {0}: expected `key = value`")]
    Syntax(usize),
}

/// Where a key's final value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Default,
    File,
    Flag,
    Env,
}

impl Provenance {
    fn label(self) -> &'static str {
        match self {
            Provenance::Default => "default",
            Provenance::File => "file",
            Provenance::Flag => "flag",
            Provenance::Env => "env",
        }
    }
}

/// Fully resolved run configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub train: TrainConfig<f64>,
    pub out_dir: PathBuf,
    provenance: BTreeMap<&'static str, Provenance>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            out_dir: PathBuf::from("out"),
            provenance: BTreeMap::new(),
        }
    }
}

/// One configurable key: how to print it, parse it, and describe it.
pub struct KeySpec {
    pub name: &'static str,
    pub expected: &'static str,
    pub help: &'static str,
    get: fn(&RunConfig) -> String,
    set: fn(&mut RunConfig, &str) -> Result<(), ()>,
}

impl KeySpec {
    /// The default value, printed exactly as `resolved.cfg` would.
    pub fn default_value(&self) -> String {
        (self.get)(&RunConfig::default())
    }
}

/// Key whose field parses via `FromStr` and prints via `Display`.
macro_rules! parsed_key {
    ($name:literal, $expected:literal, $help:literal, $($path:tt)+) => {
        KeySpec {
            name: $name,
            expected: $expected,
            help: $help,
            get: |c| c.$($path)+.to_string(),
            set: |m, v| {
                m.$($path)+ = v.parse().map_err(|_| ())?;
                Ok(())
            },
        }
    };
}

/// Every config key, in `resolved.cfg` order. The single source of truth
/// for file parsing, flag names, and help text.
pub static KEYS: &[KeySpec] = &[
    parsed_key!("seed", "integer", "master seed for every derived stream", train.seed),
    parsed_key!("episodes", "integer", "training episodes to run", train.episodes),
    parsed_key!(
        "n_scenes",
        "integer",
        "distinct scene layouts in the training pool",
        train.n_scenes
    ),
    parsed_key!("n_targets", "integer 1-3", "ordered targets per scene", train.n_targets),
    KeySpec {
        name: "scheme",
        expected: "`intermediate` or `terminal`",
        help: "reward scheme: +1 per ordered target, or +1 only on full completion",
        get: |c| {
            match c.train.scheme {
                RewardScheme::Intermediate => "intermediate",
                RewardScheme::Terminal => "terminal",
            }
            .into()
        },
        set: |m, v| {
            m.train.scheme = match v.to_ascii_lowercase().as_str() {
                "intermediate" => RewardScheme::Intermediate,
                "terminal" => RewardScheme::Terminal,
                _ => return Err(()),
            };
            Ok(())
        },
    },
    parsed_key!("macro_cap", "integer", "macro-action budget per episode", train.macro_cap),
    parsed_key!("gamma", "real in [0,1)", "TD discount factor", train.gamma),
    parsed_key!("lr", "real", "SGD learning rate", train.lr),
    parsed_key!("buffer_capacity", "integer", "replay buffer size (ring)", train.buffer_capacity),
    parsed_key!("batch_size", "integer", "transitions per TD step", train.batch_size),
    parsed_key!(
        "target_sync_every",
        "integer",
        "TD steps between target-network syncs",
        train.target_sync_every
    ),
    parsed_key!(
        "bonus",
        "real",
        "selection-time Q bonus for unexplored nodes",
        train.bonus
    ),
    parsed_key!("epsilon", "real in [0,1]", "epsilon-greedy exploration rate", train.epsilon),
    parsed_key!(
        "goal_radius",
        "integer",
        "cells within which a target counts as reached",
        train.goal_radius
    ),
    parsed_key!("hidden", "integer", "hidden-layer width of the Q network", train.hidden),
    parsed_key!(
        "checkpoint_every",
        "integer",
        "episodes between checkpoints (0 disables)",
        train.checkpoint_every
    ),
    parsed_key!("width", "integer", "scene width, cells", train.scene.width),
    parsed_key!("height", "integer", "scene height, cells", train.scene.height),
    parsed_key!(
        "n_objects",
        "integer",
        "objects per scene (targets included)",
        train.scene.n_objects
    ),
    parsed_key!(
        "patch_size",
        "integer",
        "appearance patch side length, pixels",
        train.scene.patch_size
    ),
    parsed_key!(
        "fov_halfwidth_deg",
        "real",
        "sensor field-of-view half-width, degrees",
        train.sensor.fov_halfwidth_deg
    ),
    parsed_key!("range", "integer", "sensor detection range, cells", train.sensor.range),
    parsed_key!(
        "noise_sigma",
        "real",
        "detection position-noise std-dev (0 disables)",
        train.sensor.noise_sigma
    ),
    parsed_key!(
        "merge_radius",
        "integer",
        "detection-to-node merge distance, cells",
        train.map.merge_radius
    ),
    parsed_key!(
        "explored_radius",
        "integer",
        "distance at which passing a node marks it explored",
        train.map.explored_radius
    ),
    KeySpec {
        name: "out_dir",
        expected: "path",
        help: "output directory (TOPO_MACRO_OUT overrides)",
        get: |c| c.out_dir.display().to_string(),
        set: |m, v| {
            if v.is_empty() {
                return Err(());
            }
            m.out_dir = PathBuf::from(v);
            Ok(())
        },
    },
];

fn spec_for(key: &str) -> Option<&'static KeySpec> {
    KEYS.iter().find(|k| k.name == key)
}

impl RunConfig {
    fn apply(
        &mut self,
        key: &str,
        value: &str,
        site: String,
        prov: Provenance,
    ) -> Result<(), ConfigError> {
        let spec = spec_for(key).ok_or_else(|| ConfigError::UnknownKey {
            key: key.into(),
            site: site.clone(),
        })?;
        (spec.set)(self, value).map_err(|()| ConfigError::TypeError {
            key: key.into(),
            site,
            expected: spec.expected,
            got: value.into(),
        })?;
        self.provenance.insert(spec.name, prov);
        Ok(())
    }

    pub fn provenance(&self, key: &str) -> Provenance {
        self.provenance
            .get(key)
            .copied()
            .unwrap_or(Provenance::Default)
    }

    /// The `resolved.cfg` text: every key, final value, and source.
    pub fn resolved_text(&self) -> String {
        let mut out = String::from("# fully resolved configuration: key = value  # source\n");
        for k in KEYS {
            out.push_str(&format!(
                "{} = {}  # {}\n",
                k.name,
                (k.get)(self),
                self.provenance(k.name).label()
            ));
        }
        out
    }
}

/// Parse one `key = value` file body. Full-line and trailing `#` comments
/// are allowed; blank lines are skipped.
fn apply_file(cfg: &mut RunConfig, text: &str) -> Result<(), ConfigError> {
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or(ConfigError::Syntax(line_no))?;
        cfg.apply(
            key.trim(),
            value.trim(),
            format!("line {line_no}"),
            Provenance::File,
        )?;
    }
    Ok(())
}

/// Build the final configuration: defaults, then the optional file, then
/// flag overrides in the order given, then the `TOPO_MACRO_OUT`
/// environment variable for the output directory.
pub fn parse_config(
    file: Option<&Path>,
    flags: &[(String, String)],
) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = file {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::MissingFile(path.to_path_buf(), e))?;
        apply_file(&mut cfg, &text)?;
    }
    for (key, value) in flags {
        cfg.apply(key, value, "flag".into(), Provenance::Flag)?;
    }
    if let Ok(dir) = std::env::var("TOPO_MACRO_OUT") {
        if !dir.is_empty() {
            cfg.out_dir = PathBuf::from(dir);
            cfg.provenance.insert("out_dir", Provenance::Env);
        }
    }
    Ok(cfg)
}
