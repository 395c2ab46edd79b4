//! Pixel-gridworld training runs: a replanning agent with a tabular
//! estimator learns across episodes on one map, streaming per-step and
//! per-episode metrics as JSON lines.

use std::collections::VecDeque;
use std::io::Write;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use iwplan::guidance::{
    run_training_episode, EpisodeSummary, FlatReplanner, HierReplanner, ReplanConfig, Replanner,
};
use iwplan::simulator::{BoundGridFeatures, GridworldEnv, TileFeatureMap};

/// Episodes considered by the rolling stop criterion and the final mean.
pub const STOP_WINDOW: usize = 20;

/// Which replanning agent to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PixelAlgo {
    /// Reward-guided replanning only: no value bootstrap at live leaves and
    /// no count tie-breaking in the behavior policy.
    PiIw,
    /// Reward-guided replanning plus value bootstrap and count tie-breaking.
    PiIwPlus,
    /// Two-level replanning over coarse tiles with high-level width 1.
    PiHiw,
    /// Two-level replanning with the full high feature set as the width.
    PiHiwN,
}

impl PixelAlgo {
    pub fn parse(token: &str) -> Result<Self> {
        match token {
            "pi_iw" => Ok(Self::PiIw),
            "pi_iw_plus" => Ok(Self::PiIwPlus),
            "pi_hiw" => Ok(Self::PiHiw),
            "pi_hiw_n" => Ok(Self::PiHiwN),
            _ => bail!(
                "unknown pixel algorithm `{token}` \
                 (expected pi_iw, pi_iw_plus, pi_hiw, or pi_hiw_n)"
            ),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Self::PiIw => "pi_iw",
            Self::PiIwPlus => "pi_iw_plus",
            Self::PiHiw => "pi_hiw",
            Self::PiHiwN => "pi_hiw_n",
        }
    }
}

/// Parses a tile-grid spec `ROWSxCOLS`, e.g. `2x2` or `4x4`.
pub fn parse_tiles(spec: &str) -> Result<(usize, usize)> {
    let Some((rows, cols)) = spec.split_once('x') else {
        bail!("tile spec must be ROWSxCOLS, e.g. `2x2`; got `{spec}`");
    };
    let rows: usize = rows
        .trim()
        .parse()
        .with_context(|| format!("bad tile rows in `{spec}`"))?;
    let cols: usize = cols
        .trim()
        .parse()
        .with_context(|| format!("bad tile cols in `{spec}`"))?;
    if rows == 0 || cols == 0 {
        bail!("tile grid must be at least 1x1");
    }
    Ok((rows, cols))
}

/// Settings of one training run on one map.
#[derive(Debug, Clone)]
pub struct PixelConfig {
    pub algo: PixelAlgo,
    /// High-level (coarse) tile grid shape.
    pub tile_rows: usize,
    pub tile_cols: usize,
    /// Quantization levels of the high-level tile map.
    pub quant: u32,
    /// Quantization levels of the low-level cell-resolution map.
    pub low_quant: u32,
    /// Environment-step training budget over all episodes; the final
    /// episode runs to its own end, so the total may overshoot by up to one
    /// episode cap.
    pub total_steps: usize,
    /// Node-generation budget per replanning step.
    pub planning_budget: usize,
    pub seed: u64,
    /// Stop early once the mean return over the last [`STOP_WINDOW`]
    /// episodes reaches this value.
    pub stop_return: Option<f64>,
}

/// One per-episode line of the metrics stream.
#[derive(Debug, Clone, Serialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub episode_return: f64,
    pub steps: usize,
    pub terminated: bool,
    /// Cumulative environment steps over the whole run.
    pub total_steps: usize,
}

/// A finished training run.
#[derive(Debug)]
pub struct TrainOutcome {
    pub episodes: Vec<EpisodeSummary>,
    pub total_steps: usize,
    /// Mean return over the last [`STOP_WINDOW`] episodes (fewer if the run
    /// was shorter).
    pub recent_mean: f64,
    pub reached_stop: bool,
}

/// Trains the configured agent on `env`, writing JSON-lines metrics to
/// `sink` if given: one line per environment step, then one per episode.
pub fn train(
    env: &GridworldEnv,
    cfg: &PixelConfig,
    sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let low_tiles = TileFeatureMap::new(env.rows(), env.cols(), cfg.low_quant);
    let low = BoundGridFeatures::new(env.clone(), low_tiles);
    match cfg.algo {
        PixelAlgo::PiIw => {
            let config = ReplanConfig::pi_iw(1, cfg.planning_budget);
            let mut agent = FlatReplanner::new(env, low, config, cfg.seed);
            train_loop(&mut agent, env, cfg, sink)
        }
        PixelAlgo::PiIwPlus => {
            let config = ReplanConfig::pi_iw_plus(1, cfg.planning_budget);
            let mut agent = FlatReplanner::new(env, low, config, cfg.seed);
            train_loop(&mut agent, env, cfg, sink)
        }
        PixelAlgo::PiHiw | PixelAlgo::PiHiwN => {
            let high_tiles = TileFeatureMap::new(cfg.tile_rows, cfg.tile_cols, cfg.quant);
            let high = BoundGridFeatures::new(env.clone(), high_tiles);
            let mut config = ReplanConfig::pi_hiw(1, cfg.planning_budget);
            if cfg.algo == PixelAlgo::PiHiwN {
                config.high_width = None;
            }
            let mut agent = HierReplanner::new(env, low, high, config, cfg.seed);
            train_loop(&mut agent, env, cfg, sink)
        }
    }
}

fn train_loop<R: Replanner<GridworldEnv>>(
    agent: &mut R,
    env: &GridworldEnv,
    cfg: &PixelConfig,
    mut sink: Option<&mut dyn Write>,
) -> Result<TrainOutcome> {
    let mut episodes: Vec<EpisodeSummary> = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::new();
    let mut total_steps = 0usize;
    let mut reached_stop = false;
    let mut episode = 0usize;
    while total_steps < cfg.total_steps {
        let cap = env.step_cap() as usize;
        let (summary, records) = run_training_episode(agent, env, cap, episode, total_steps);
        // an episode that takes no steps must still consume budget, or the
        // loop would never end
        total_steps += summary.steps.max(1);
        if let Some(sink) = sink.as_deref_mut() {
            for record in &records {
                serde_json::to_writer(&mut *sink, record).context("writing step record")?;
                sink.write_all(b"\n")?;
            }
            let line = EpisodeRecord {
                episode,
                episode_return: summary.episode_return,
                steps: summary.steps,
                terminated: summary.terminated,
                total_steps,
            };
            serde_json::to_writer(&mut *sink, &line).context("writing episode record")?;
            sink.write_all(b"\n")?;
        }
        if recent.len() == STOP_WINDOW {
            recent.pop_front();
        }
        recent.push_back(summary.episode_return);
        episodes.push(summary);
        episode += 1;
        if let Some(target) = cfg.stop_return {
            if recent.len() == STOP_WINDOW && mean(&recent) >= target {
                reached_stop = true;
                break;
            }
        }
    }
    let recent_mean = if recent.is_empty() { 0.0 } else { mean(&recent) };
    Ok(TrainOutcome {
        episodes,
        total_steps,
        recent_mean,
        reached_stop,
    })
}

fn mean(values: &VecDeque<f64>) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}
