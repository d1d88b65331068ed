//! `topomacro`: train and inspect macro-action navigation agents.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};

use topomacro_cli::cmd::{
    cmd_baseline, cmd_dump_map, cmd_eval, cmd_gen_scene, cmd_plot, cmd_train, SeriesOpts,
};
use topomacro_cli::config::{parse_config, KEYS};

/// Attach `--config` plus one flag per config key (kebab-case of the key
/// name, help text carries the default) to a subcommand.
fn with_config_args(mut cmd: Command) -> Command {
    cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .value_name("FILE")
            .help("`key = value` config file; flags override its values"),
    );
    for k in KEYS {
        cmd = cmd.arg(
            Arg::new(k.name)
                .long(k.name.replace('_', "-"))
                .value_name("VALUE")
                .help(format!("{} [default: {}]", k.help, k.default_value())),
        );
    }
    cmd
}

fn cli() -> Command {
    Command::new("topomacro")
        .about(
            "Macro-action navigation over object topological maps: \
             train a Q network, evaluate it, and inspect scenes, maps, \
             and learning curves",
        )
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(with_config_args(Command::new("train").about(
            "Train over the configured schedule; writes metrics.csv, checkpoints, final.qnet",
        )))
        .subcommand(
            with_config_args(
                Command::new("eval")
                    .about("Evaluate a checkpoint on held-out scenes (epsilon forced to 0)"),
            )
            .arg(
                Arg::new("checkpoint")
                    .long("checkpoint")
                    .value_name("FILE")
                    .required(true)
                    .help("network checkpoint to load"),
            )
            .arg(
                Arg::new("n_eval")
                    .long("n-eval")
                    .value_name("N")
                    .default_value("100")
                    .value_parser(clap::value_parser!(usize))
                    .help("held-out episodes to run"),
            ),
        )
        .subcommand(
            with_config_args(
                Command::new("baseline")
                    .about("Uniform-random control on the same held-out protocol"),
            )
            .arg(
                Arg::new("n_eval")
                    .long("n-eval")
                    .value_name("N")
                    .default_value("100")
                    .value_parser(clap::value_parser!(usize))
                    .help("held-out episodes to run"),
            ),
        )
        .subcommand(
            with_config_args(
                Command::new("gen-scene").about("Write one training scene in the scene format"),
            )
            .arg(scene_index_arg()),
        )
        .subcommand(
            with_config_args(Command::new("dump-map").about(
                "Replay one uniform episode deterministically and write its topological map",
            ))
            .arg(scene_index_arg()),
        )
        .subcommand(
            with_config_args(
                Command::new("plot")
                    .about("Render metrics CSVs as a smoothed learning-curve SVG"),
            )
            .arg(
                Arg::new("input")
                    .long("input")
                    .value_name("CSV")
                    .action(ArgAction::Append)
                    .required(true)
                    .value_parser(clap::value_parser!(PathBuf))
                    .help("metrics CSV; repeat for several series"),
            )
            .arg(
                Arg::new("series_label")
                    .long("series-label")
                    .value_name("TEXT")
                    .action(ArgAction::Append)
                    .help("legend label for the matching --input (default: file stem)"),
            )
            .arg(
                Arg::new("series_scheme")
                    .long("series-scheme")
                    .value_name("SCHEME")
                    .action(ArgAction::Append)
                    .help(
                        "reward scheme coloring the matching --input: \
                         `intermediate` or `terminal` (default: intermediate)",
                    ),
            )
            .arg(
                Arg::new("series_targets")
                    .long("series-targets")
                    .value_name("N")
                    .action(ArgAction::Append)
                    .value_parser(clap::value_parser!(u32))
                    .help("panel (target count) for the matching --input (default: 1)"),
            ),
        )
}

fn scene_index_arg() -> Arg {
    Arg::new("scene_index")
        .long("scene-index")
        .value_name("I")
        .default_value("0")
        .value_parser(clap::value_parser!(usize))
        .help("scene slot in the training pool")
}

/// Collect `(key, value)` overrides for every config flag present.
fn config_flags(m: &ArgMatches) -> Vec<(String, String)> {
    KEYS.iter()
        .filter_map(|k| {
            m.get_one::<String>(k.name)
                .map(|v| (k.name.to_string(), v.clone()))
        })
        .collect()
}

fn dispatch(name: &str, m: &ArgMatches) -> Result<(), Box<dyn std::error::Error>> {
    let cfg = parse_config(
        m.get_one::<String>("config").map(PathBuf::from).as_deref(),
        &config_flags(m),
    )?;
    match name {
        "train" => cmd_train(&cfg)?,
        "eval" => cmd_eval(
            &cfg,
            &PathBuf::from(m.get_one::<String>("checkpoint").unwrap()),
            *m.get_one::<usize>("n_eval").unwrap(),
        )?,
        "baseline" => cmd_baseline(&cfg, *m.get_one::<usize>("n_eval").unwrap())?,
        "gen-scene" => cmd_gen_scene(&cfg, *m.get_one::<usize>("scene_index").unwrap())?,
        "dump-map" => cmd_dump_map(&cfg, *m.get_one::<usize>("scene_index").unwrap())?,
        "plot" => {
            let inputs: Vec<PathBuf> = m.get_many::<PathBuf>("input").unwrap().cloned().collect();
            let opts = SeriesOpts {
                labels: m
                    .get_many::<String>("series_label")
                    .map(|v| v.cloned().collect())
                    .unwrap_or_default(),
                schemes: m
                    .get_many::<String>("series_scheme")
                    .map(|v| v.cloned().collect())
                    .unwrap_or_default(),
                targets: m
                    .get_many::<u32>("series_targets")
                    .map(|v| v.copied().collect())
                    .unwrap_or_default(),
            };
            cmd_plot(&cfg, &inputs, &opts)?;
        }
        _ => unreachable!("subcommand_required"),
    }
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let (name, sub) = matches.subcommand().expect("subcommand_required");
    match dispatch(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
