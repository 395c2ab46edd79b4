//! Classical coverage suites: run width-based planners over a directory of
//! grounded STRIPS task files and report per-instance outcomes plus
//! aggregate coverage, as CSV and JSON.
//!
//! Each task is split into single-goal instances first; aggregates count
//! coverage over all instances (parse failures included as unsolved rows),
//! while the node and time means take only solved instances into account.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use iwplan::hierarchy::{ihiw, IhiwConfig};
use iwplan::search::{count_based_riw, iw_search};
use iwplan::simulator::{DeterministicEnv, FeatureMap};
use iwplan::strips::{parse_task, split_single_goal, GroundedTask, StripsEnv, StripsFeatures};

/// One planner column of the coverage report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Algorithm {
    Iw { width: usize },
    CountRiw { width: usize },
    Ihiw { high_width: usize, low_width: usize },
}

impl Algorithm {
    /// Parses `iwW`, `count_riwW`, or `ihiwHL` (H and L single digits).
    pub fn parse(token: &str) -> Result<Self> {
        fn width_of(rest: &str, what: &str) -> Result<usize> {
            let width: usize = rest
                .parse()
                .with_context(|| format!("bad {what} width `{rest}`"))?;
            if width == 0 {
                bail!("{what} width must be >= 1");
            }
            Ok(width)
        }
        if let Some(rest) = token.strip_prefix("count_riw") {
            Ok(Self::CountRiw {
                width: width_of(rest, "count_riw")?,
            })
        } else if let Some(rest) = token.strip_prefix("ihiw") {
            let digits: Vec<u32> = rest.chars().filter_map(|c| c.to_digit(10)).collect();
            if digits.len() != 2 || rest.chars().count() != 2 {
                bail!("ihiw takes two width digits, e.g. `ihiw11`; got `{token}`");
            }
            if digits[0] == 0 || digits[1] == 0 {
                bail!("ihiw widths must be >= 1");
            }
            Ok(Self::Ihiw {
                high_width: digits[0] as usize,
                low_width: digits[1] as usize,
            })
        } else if let Some(rest) = token.strip_prefix("iw") {
            Ok(Self::Iw {
                width: width_of(rest, "iw")?,
            })
        } else {
            bail!("unknown algorithm `{token}` (expected iwW, count_riwW, or ihiwHL)");
        }
    }

    pub fn label(&self) -> String {
        match self {
            Self::Iw { width } => format!("iw{width}"),
            Self::CountRiw { width } => format!("count_riw{width}"),
            Self::Ihiw {
                high_width,
                low_width,
            } => format!("ihiw{high_width}{low_width}"),
        }
    }
}

/// Parses a comma-separated algorithm list, e.g. `iw1,iw2,ihiw11`.
pub fn parse_algorithms(list: &str) -> Result<Vec<Algorithm>> {
    let mut out = Vec::new();
    for token in list.split(',') {
        let token = token.trim();
        if token.is_empty() {
            continue;
        }
        out.push(Algorithm::parse(token)?);
    }
    if out.is_empty() {
        bail!("no algorithms given");
    }
    Ok(out)
}

/// One planner's outcome on one single-goal instance.
#[derive(Debug, Clone, Serialize)]
pub struct AlgoCell {
    pub solved: bool,
    pub expanded: usize,
    pub generated: usize,
    pub millis: u64,
}

/// One report row: a single-goal instance and each planner's outcome on it.
/// A file that fails to parse contributes one row with `error` set and no
/// cells; it still counts against coverage.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceRow {
    pub instance: String,
    pub error: Option<String>,
    pub cells: Vec<AlgoCell>,
}

/// Per-algorithm aggregates; `None` renders as `n/a` (no instances at all,
/// or no solved instances for the means).
#[derive(Debug, Clone, Serialize)]
pub struct AlgoAggregate {
    pub algorithm: String,
    pub coverage_pct: Option<f64>,
    pub mean_generated_solved: Option<f64>,
    pub mean_millis_solved: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub budget: usize,
    pub seed: u64,
    pub algorithms: Vec<String>,
    pub rows: Vec<InstanceRow>,
    pub aggregates: Vec<AlgoAggregate>,
}

/// Runs one planner on one single-goal task under the node budget. Widths
/// are clamped to the task's atom count; `tau` is the count_riw selection
/// temperature.
fn run_algorithm(
    algo: Algorithm,
    task: &GroundedTask,
    budget: usize,
    seed: u64,
    tau: f64,
) -> Result<AlgoCell> {
    let map = StripsFeatures::new(task);
    let len = map.schema().len();
    if len == 0 {
        bail!("task has no atoms");
    }
    let clamp = |w: usize| w.min(len).max(1);
    let env = StripsEnv::goal_task(task.clone());
    let start = Instant::now();
    let (solved, expanded, generated) = match algo {
        Algorithm::Iw { width } => {
            let run = iw_search(&env, &map, clamp(width), budget, env.initial_state());
            (
                run.result.solved,
                run.result.expanded_count,
                run.result.generated_count,
            )
        }
        Algorithm::CountRiw { width } => {
            let run = count_based_riw(
                &env,
                &map,
                clamp(width),
                budget,
                tau,
                seed,
                env.initial_state(),
            );
            (
                run.result.solved,
                run.result.expanded_count,
                run.result.generated_count,
            )
        }
        Algorithm::Ihiw {
            high_width,
            low_width,
        } => {
            let cfg = IhiwConfig {
                high_width: clamp(high_width),
                low_width: clamp(low_width),
                budget,
                seed,
            };
            let run = ihiw(&env, &map, cfg)?;
            (
                run.result.solved,
                run.result.expanded_count,
                run.result.generated_count,
            )
        }
    };
    Ok(AlgoCell {
        solved,
        expanded,
        generated,
        millis: start.elapsed().as_millis() as u64,
    })
}

/// Loads every `*.task` file in `dir` (sorted by name), splits each into
/// single-goal instances, and runs every algorithm on every instance.
pub fn run_classical_suite(
    dir: &Path,
    budget: usize,
    algorithms: &[Algorithm],
    seed: u64,
    tau: f64,
) -> Result<CoverageReport> {
    let mut paths: Vec<_> = fs::read_dir(dir)
        .with_context(|| format!("reading task directory {}", dir.display()))?
        .collect::<Result<Vec<_>, _>>()
        .context("listing task directory")?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|path| path.extension().is_some_and(|ext| ext == "task"))
        .collect();
    paths.sort();

    let mut rows = Vec::new();
    for path in &paths {
        let stem = path
            .file_stem()
            .unwrap_or_default()
            .to_string_lossy()
            .into_owned();
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading task file {}", path.display()))?;
        let task = match parse_task(&text) {
            Ok(task) => task,
            Err(e) => {
                rows.push(InstanceRow {
                    instance: stem,
                    error: Some(e.to_string()),
                    cells: Vec::new(),
                });
                continue;
            }
        };
        let mut instances = split_single_goal(&task);
        let multi_goal = instances.len() > 1;
        if instances.is_empty() {
            // an empty goal is trivially satisfied; keep one instance
            instances.push(task);
        }
        for (i, instance) in instances.iter().enumerate() {
            let name = if multi_goal {
                format!("{stem}#g{i}")
            } else {
                stem.clone()
            };
            let mut cells = Vec::with_capacity(algorithms.len());
            for &algo in algorithms {
                let cell = run_algorithm(algo, instance, budget, seed, tau)
                    .with_context(|| format!("running {} on {name}", algo.label()))?;
                cells.push(cell);
            }
            rows.push(InstanceRow {
                instance: name,
                error: None,
                cells,
            });
        }
    }

    let aggregates = aggregate(algorithms, &rows);
    Ok(CoverageReport {
        budget,
        seed,
        algorithms: algorithms.iter().map(Algorithm::label).collect(),
        rows,
        aggregates,
    })
}

fn aggregate(algorithms: &[Algorithm], rows: &[InstanceRow]) -> Vec<AlgoAggregate> {
    algorithms
        .iter()
        .enumerate()
        .map(|(i, algo)| {
            let solved: Vec<&AlgoCell> = rows
                .iter()
                .filter_map(|row| row.cells.get(i))
                .filter(|cell| cell.solved)
                .collect();
            let coverage_pct = if rows.is_empty() {
                None
            } else {
                Some(100.0 * solved.len() as f64 / rows.len() as f64)
            };
            let mean_over_solved = |value: fn(&AlgoCell) -> f64| {
                if solved.is_empty() {
                    None
                } else {
                    Some(solved.iter().map(|c| value(c)).sum::<f64>() / solved.len() as f64)
                }
            };
            AlgoAggregate {
                algorithm: algo.label(),
                coverage_pct,
                mean_generated_solved: mean_over_solved(|c| c.generated as f64),
                mean_millis_solved: mean_over_solved(|c| c.millis as f64),
            }
        })
        .collect()
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

fn csv_num(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_owned(), |x| format!("{x:.1}"))
}

impl CoverageReport {
    /// CSV with one row per instance — columns `instance`, then
    /// solved/nodes/time per algorithm, then `error` — followed by three
    /// aggregate footer rows (coverage, mean nodes, mean time).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("instance");
        for label in &self.algorithms {
            let _ = write!(out, ",{label}_solved,{label}_nodes,{label}_ms");
        }
        out.push_str(",error\n");

        for row in &self.rows {
            out.push_str(&csv_field(&row.instance));
            if row.cells.is_empty() {
                for _ in &self.algorithms {
                    out.push_str(",,,");
                }
            } else {
                for cell in &row.cells {
                    let _ = write!(
                        out,
                        ",{},{},{}",
                        u8::from(cell.solved),
                        cell.generated,
                        cell.millis
                    );
                }
            }
            let _ = writeln!(out, ",{}", csv_field(row.error.as_deref().unwrap_or("")));
        }

        out.push_str("coverage_pct");
        for agg in &self.aggregates {
            let _ = write!(out, ",{},,", csv_num(agg.coverage_pct));
        }
        out.push_str(",\nmean_nodes_solved");
        for agg in &self.aggregates {
            let _ = write!(out, ",,{},", csv_num(agg.mean_generated_solved));
        }
        out.push_str(",\nmean_ms_solved");
        for agg in &self.aggregates {
            let _ = write!(out, ",,,{}", csv_num(agg.mean_millis_solved));
        }
        out.push_str(",\n");
        out
    }

    pub fn to_json(&self) -> String {
        let mut json = serde_json::to_string_pretty(self).expect("report serializes");
        json.push('\n');
        json
    }

    /// Writes the CSV to `out` and the JSON next to it with a `.json`
    /// extension.
    pub fn write(&self, out: &Path) -> Result<()> {
        fs::write(out, self.to_csv())
            .with_context(|| format!("writing CSV report {}", out.display()))?;
        let json_path = out.with_extension("json");
        fs::write(&json_path, self.to_json())
            .with_context(|| format!("writing JSON report {}", json_path.display()))?;
        Ok(())
    }
}
