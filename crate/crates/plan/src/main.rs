//! Command-line entry point: classical coverage suites over task
//! directories, pixel-gridworld training runs, and width-combinatorics
//! queries. A `--config` file in `key = value` form overrides flags, and
//! `$PLAN_SEED` supplies the seed when no flag or config entry does.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use iwplan::simulator::GridworldEnv;
use plan::classical::{self, parse_algorithms};
use plan::config::ConfigFile;
use plan::pixel::{self, parse_tiles, PixelAlgo, PixelConfig};
use plan::widthmath::width_report;

#[derive(Debug, Parser)]
#[command(
    name = "plan",
    version,
    about = "Width-based planning experiment runner"
)]
struct Cli {
    /// Key-value config file; its entries override command-line flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run planners over a directory of grounded task files.
    Classical(ClassicalArgs),
    /// Train a replanning agent on a pixel gridworld map.
    Pixel(PixelArgs),
    /// Print the width-w novel-state count, its coarse bound, and their ratio.
    Widthmath(WidthmathArgs),
}

#[derive(Debug, Args)]
struct ClassicalArgs {
    /// Directory containing `*.task` files.
    #[arg(long)]
    tasks: PathBuf,
    /// Node-generation budget per instance.
    #[arg(long, default_value_t = 10_000)]
    budget: usize,
    /// Comma-separated planners: iwW, count_riwW, ihiwHL.
    #[arg(long, default_value = "iw1,iw2,ihiw11")]
    algos: String,
    /// Count-based selection temperature for count_riw (inf = uniform).
    #[arg(long, default_value_t = f64::INFINITY)]
    tau: f64,
    /// RNG seed; falls back to $PLAN_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// CSV report path; a JSON twin is written with the same stem.
    #[arg(long, default_value = "report.csv")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct PixelArgs {
    /// ASCII gridworld map file.
    #[arg(long)]
    map: PathBuf,
    /// Agent: pi_iw, pi_iw_plus, pi_hiw, or pi_hiw_n.
    #[arg(long, default_value = "pi_hiw")]
    algo: String,
    /// High-level tile grid, ROWSxCOLS.
    #[arg(long, default_value = "2x2")]
    tiles: String,
    /// Quantization levels of the high-level tiles.
    #[arg(long, default_value_t = 8)]
    quant: u32,
    /// Quantization levels of the low-level cell-resolution tiles.
    #[arg(long, default_value_t = 8)]
    low_quant: u32,
    /// Environment-step training budget.
    #[arg(long, default_value_t = 20_000)]
    steps: usize,
    /// Node-generation budget per replanning step.
    #[arg(long, default_value_t = 32)]
    budget: usize,
    /// Episode step cap for the environment.
    #[arg(long, default_value_t = 200)]
    episode_cap: u32,
    /// Stop early at this mean return over the last 20 episodes.
    #[arg(long)]
    stop_return: Option<f64>,
    /// RNG seed; falls back to $PLAN_SEED, then 0.
    #[arg(long)]
    seed: Option<u64>,
    /// JSON-lines metrics file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct WidthmathArgs {
    /// Number of features.
    #[arg(long)]
    n: u32,
    /// Domain size per feature.
    #[arg(long)]
    d: u32,
    /// Novelty width.
    #[arg(long)]
    w: u32,
}

fn apply_classical(cfg: &ConfigFile, args: &mut ClassicalArgs) -> Result<()> {
    cfg.ensure_known(&["tasks", "budget", "algos", "tau", "seed", "out"])?;
    cfg.set("tasks", &mut args.tasks)?;
    cfg.set("budget", &mut args.budget)?;
    cfg.set("algos", &mut args.algos)?;
    cfg.set("tau", &mut args.tau)?;
    cfg.set_opt("seed", &mut args.seed)?;
    cfg.set("out", &mut args.out)?;
    Ok(())
}

fn apply_pixel(cfg: &ConfigFile, args: &mut PixelArgs) -> Result<()> {
    cfg.ensure_known(&[
        "map",
        "algo",
        "tiles",
        "quant",
        "low_quant",
        "steps",
        "budget",
        "episode_cap",
        "stop_return",
        "seed",
        "out",
    ])?;
    cfg.set("map", &mut args.map)?;
    cfg.set("algo", &mut args.algo)?;
    cfg.set("tiles", &mut args.tiles)?;
    cfg.set("quant", &mut args.quant)?;
    cfg.set("low_quant", &mut args.low_quant)?;
    cfg.set("steps", &mut args.steps)?;
    cfg.set("budget", &mut args.budget)?;
    cfg.set("episode_cap", &mut args.episode_cap)?;
    cfg.set_opt("stop_return", &mut args.stop_return)?;
    cfg.set_opt("seed", &mut args.seed)?;
    cfg.set_opt("out", &mut args.out)?;
    Ok(())
}

fn apply_widthmath(cfg: &ConfigFile, args: &mut WidthmathArgs) -> Result<()> {
    cfg.ensure_known(&["n", "d", "w"])?;
    cfg.set("n", &mut args.n)?;
    cfg.set("d", &mut args.d)?;
    cfg.set("w", &mut args.w)?;
    Ok(())
}

/// Explicit seed (flag or config) first, then `$PLAN_SEED`, then 0.
fn resolve_seed(explicit: Option<u64>, env_value: Option<&str>) -> Result<u64> {
    if let Some(seed) = explicit {
        return Ok(seed);
    }
    match env_value {
        Some(raw) => raw
            .trim()
            .parse()
            .with_context(|| format!("PLAN_SEED must be an unsigned integer, got `{raw}`")),
        None => Ok(0),
    }
}

fn opt_num(value: Option<f64>) -> String {
    value.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.1}"))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let plan_seed = std::env::var("PLAN_SEED").ok();

    match cli.command {
        Command::Classical(mut args) => {
            apply_classical(&config, &mut args)?;
            let seed = resolve_seed(args.seed, plan_seed.as_deref())?;
            let algos = parse_algorithms(&args.algos)?;
            let report =
                classical::run_classical_suite(&args.tasks, args.budget, &algos, seed, args.tau)?;
            report.write(&args.out)?;
            for agg in &report.aggregates {
                println!(
                    "{}: coverage {}%, mean nodes over solved {}, mean ms over solved {}",
                    agg.algorithm,
                    opt_num(agg.coverage_pct),
                    opt_num(agg.mean_generated_solved),
                    opt_num(agg.mean_millis_solved),
                );
            }
            println!("report written to {}", args.out.display());
        }
        Command::Pixel(mut args) => {
            apply_pixel(&config, &mut args)?;
            let seed = resolve_seed(args.seed, plan_seed.as_deref())?;
            let algo = PixelAlgo::parse(&args.algo)?;
            let (tile_rows, tile_cols) = parse_tiles(&args.tiles)?;
            let text = std::fs::read_to_string(&args.map)
                .with_context(|| format!("reading map file {}", args.map.display()))?;
            let env = GridworldEnv::from_ascii(&text, args.episode_cap)?;
            let cfg = PixelConfig {
                algo,
                tile_rows,
                tile_cols,
                quant: args.quant,
                low_quant: args.low_quant,
                total_steps: args.steps,
                planning_budget: args.budget,
                seed,
                stop_return: args.stop_return,
            };
            let outcome = match &args.out {
                Some(path) => {
                    let file = File::create(path)
                        .with_context(|| format!("creating metrics file {}", path.display()))?;
                    let mut writer = BufWriter::new(file);
                    let outcome = pixel::train(&env, &cfg, Some(&mut writer))?;
                    writer.flush()?;
                    outcome
                }
                None => {
                    let stdout = std::io::stdout();
                    let mut lock = stdout.lock();
                    let outcome = pixel::train(&env, &cfg, Some(&mut lock))?;
                    lock.flush()?;
                    outcome
                }
            };
            println!(
                "{}",
                serde_json::json!({
                    "algo": algo.label(),
                    "episodes": outcome.episodes.len(),
                    "total_steps": outcome.total_steps,
                    "mean_return_last_20": outcome.recent_mean,
                    "reached_stop": outcome.reached_stop,
                })
            );
        }
        Command::Widthmath(mut args) => {
            apply_widthmath(&config, &mut args)?;
            let report = width_report(args.n, args.d, args.w)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn classical_defaults_match_the_documented_invocation() {
        let cli = Cli::try_parse_from(["plan", "classical", "--tasks", "tasks"]).unwrap();
        let Command::Classical(args) = cli.command else {
            panic!("expected classical subcommand");
        };
        assert_eq!(args.budget, 10_000);
        assert_eq!(args.algos, "iw1,iw2,ihiw11");
        assert_eq!(args.out, PathBuf::from("report.csv"));
        assert_eq!(args.seed, None);
    }

    #[test]
    fn config_entries_override_flags() {
        let cli = Cli::try_parse_from([
            "plan",
            "classical",
            "--tasks",
            "tasks",
            "--budget",
            "77",
        ])
        .unwrap();
        let Command::Classical(mut args) = cli.command else {
            panic!("expected classical subcommand");
        };
        let cfg = ConfigFile::parse("budget = 123\nseed = 9\n").unwrap();
        apply_classical(&cfg, &mut args).unwrap();
        assert_eq!(args.budget, 123);
        assert_eq!(args.seed, Some(9));
    }

    #[test]
    fn config_rejects_keys_for_other_subcommands() {
        let cfg = ConfigFile::parse("map = maps/small.map\n").unwrap();
        let cli = Cli::try_parse_from(["plan", "classical", "--tasks", "tasks"]).unwrap();
        let Command::Classical(mut args) = cli.command else {
            panic!("expected classical subcommand");
        };
        assert!(apply_classical(&cfg, &mut args).is_err());
    }

    #[test]
    fn pixel_config_overrides_every_field_it_names() {
        let cli = Cli::try_parse_from(["plan", "pixel", "--map", "m.map"]).unwrap();
        let Command::Pixel(mut args) = cli.command else {
            panic!("expected pixel subcommand");
        };
        let cfg = ConfigFile::parse(
            "algo = pi_iw\ntiles = 4x4\nquant = 32\nsteps = 99\nstop_return = 0.9\n",
        )
        .unwrap();
        apply_pixel(&cfg, &mut args).unwrap();
        assert_eq!(args.algo, "pi_iw");
        assert_eq!(args.tiles, "4x4");
        assert_eq!(args.quant, 32);
        assert_eq!(args.steps, 99);
        assert_eq!(args.stop_return, Some(0.9));
        assert_eq!(args.map, PathBuf::from("m.map"));
    }

    #[test]
    fn seed_resolution_prefers_explicit_then_env_then_zero() {
        assert_eq!(resolve_seed(Some(4), Some("7")).unwrap(), 4);
        assert_eq!(resolve_seed(None, Some("7")).unwrap(), 7);
        assert_eq!(resolve_seed(None, None).unwrap(), 0);
        assert!(resolve_seed(None, Some("not a seed")).is_err());
    }
}
