use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use alloc_shapley::bounds::{bounds_report, BoundsConfig, Side, DEFAULT_MAX_NEIGH};
use alloc_shapley::exact::{exact_report, ExactConfig, DEFAULT_EXACT_LIMIT};
use alloc_shapley::generator::{extract_subgraph, generate, GeneratorParams, SampleMode};
use alloc_shapley::matching::optimal_allocation;
use alloc_shapley::preprocess::{run_pipeline, split_components};
use alloc_shapley::sampling::{
    fpras_report, range_sampler_report, FprasConfig, RangeMode, RangeSamplerConfig,
};
use alloc_shapley::{Cache, Coalition, Game, Scenario, ShapleyReport, Summation};
use alloc_shapley_cli::{default_threads, solve, Policy, Sampler, THREADS_ENV};

#[derive(Parser)]
#[command(
    name = "alloc-shapley",
    version,
    about = "Shapley values for allocation games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the preprocessing pipeline and summarize what it resolved.
    Preprocess {
        scenario: PathBuf,
        #[command(flatten)]
        out: Output,
        /// Also write every remaining component as a scenario file here.
        #[arg(long)]
        components_dir: Option<PathBuf>,
    },
    /// Split a scenario into connected components, without other
    /// preprocessing.
    Components {
        scenario: PathBuf,
        #[command(flatten)]
        out: Output,
        /// Write each component as a scenario file here.
        #[arg(long)]
        dir: Option<PathBuf>,
    },
    /// Optimal allocation of a coalition (the grand coalition by default).
    Opt {
        scenario: PathBuf,
        /// Comma separated agent ids.
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<String>>,
        #[command(flatten)]
        out: Output,
    },
    /// Exact Shapley values by enumerating all coalitions.
    Exact {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
        limit: usize,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: ReportOutput,
    },
    /// Lower and upper bounds from neighbourhood profiles.
    Bounds {
        scenario: PathBuf,
        /// Comma separated agent ids; all agents by default.
        #[arg(long, value_delimiter = ',')]
        agents: Option<Vec<String>>,
        #[arg(long, default_value_t = DEFAULT_MAX_NEIGH)]
        max_neigh: usize,
        /// lower, upper or both.
        #[arg(long, default_value = "both")]
        side: Side,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: ReportOutput,
    },
    /// Permutation sampler.
    Fpras {
        scenario: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        #[arg(long, default_value_t = 3)]
        runs: usize,
        /// Compute every contribution, even for agents with no neighbour
        /// among their predecessors.
        #[arg(long)]
        no_shortcut: bool,
        /// Do not rescale the estimates to add up to opt(N).
        #[arg(long)]
        no_scale: bool,
        /// Permutations per job.
        #[arg(long, default_value_t = 64)]
        batch: u64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: ReportOutput,
    },
    /// Per-agent sampler with Hoeffding sample sizes.
    RangeSample {
        scenario: PathBuf,
        #[command(flatten)]
        sampling: Sampling,
        /// abs or rel.
        #[arg(long, default_value = "abs")]
        mode: RangeMode,
        /// A `bounds` report whose lower bounds drive relative mode.
        #[arg(long)]
        lower_bounds: Option<PathBuf>,
        /// Samples per job.
        #[arg(long, default_value_t = 1000)]
        batch: u64,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: ReportOutput,
    },
    /// Preprocess, solve each component by policy and merge the results.
    Solve {
        scenario: PathBuf,
        #[arg(long, default_value_t = DEFAULT_EXACT_LIMIT)]
        exact_limit: usize,
        #[arg(long, default_value_t = DEFAULT_MAX_NEIGH)]
        max_neigh: usize,
        /// fpras or range.
        #[arg(long, default_value = "range")]
        sampler: Sampler,
        #[command(flatten)]
        sampling: Sampling,
        /// Range sampler error model: abs or rel.
        #[arg(long, default_value = "abs")]
        mode: RangeMode,
        /// Permutation sampler runs.
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        out: ReportOutput,
    },
    /// Per-agent errors of a report against a reference report.
    Compare {
        report: PathBuf,
        reference: PathBuf,
        /// Exit with status 2 when the maximum relative error exceeds this.
        #[arg(long)]
        threshold: Option<f64>,
        /// Print the comparison as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Generate a synthetic author/publication scenario.
    Generate {
        /// JSON file with generator parameters; flags below override it.
        #[arg(long)]
        params: Option<PathBuf>,
        /// Start from the 3562-author preset.
        #[arg(long)]
        assessment_scale: bool,
        #[arg(long)]
        agents: Option<usize>,
        #[arg(long)]
        goods_per_agent: Option<f64>,
        #[arg(long)]
        coauthorship: Option<f64>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        out: Output,
    },
    /// Restrict a scenario to a random subset of its agents.
    Extract {
        scenario: PathBuf,
        #[arg(long)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// uniform or connected.
        #[arg(long, default_value = "uniform")]
        mode: SampleMode,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct Output {
    /// Write JSON here instead of standard output.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct ReportOutput {
    #[command(flatten)]
    json: Output,
    /// Also write plot data (agent, exact, lb, ub, estimate) as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct Common {
    /// Worker threads.
    #[arg(long, env = THREADS_ENV, default_value_t = default_threads())]
    threads: usize,
    /// plain or compensated.
    #[arg(long, default_value = "plain")]
    summation: Summation,
    /// Most coalition worths kept in memory; 0 disables the cache.
    #[arg(long)]
    cache_limit: Option<usize>,
}

#[derive(Args)]
struct Sampling {
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.01)]
    delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("cannot load scenario {}", path.display()))
}

fn load_report(path: &Path) -> Result<ShapleyReport> {
    ShapleyReport::load(path).with_context(|| format!("cannot load report {}", path.display()))
}

fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).with_context(|| format!("cannot write {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_json<S: Serialize>(out: &Output, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(out.output.as_deref(), &text)
}

fn write_report(out: &ReportOutput, report: &ShapleyReport) -> Result<()> {
    write_json(&out.json, report)?;
    if let Some(path) = &out.csv {
        write_text(Some(path), &report.to_csv())?;
    }
    Ok(())
}

fn game(scenario: Scenario, common: &Common) -> Game {
    match common.cache_limit {
        None => Game::new(scenario),
        Some(0) => Game::with_cache(scenario, Cache::disabled()),
        Some(limit) => Game::with_cache(scenario, Cache::with_limit(limit)),
    }
}

fn agent_indices(scenario: &Scenario, ids: &[String]) -> Result<Vec<usize>> {
    ids.iter()
        .map(|id| {
            scenario
                .agent_index(id)
                .with_context(|| format!("unknown agent `{id}`"))
        })
        .collect()
}

fn write_scenarios<'a>(
    dir: &Path,
    parts: impl Iterator<Item = &'a Scenario>,
) -> Result<Vec<String>> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    parts
        .enumerate()
        .map(|(c, s)| {
            let path = dir.join(format!("component-{c:04}.json"));
            s.save(&path)
                .with_context(|| format!("cannot write {}", path.display()))?;
            Ok(path.display().to_string())
        })
        .collect()
}

#[derive(Serialize)]
struct ComponentsSummary {
    components: usize,
    histogram: BTreeMap<usize, usize>,
    sizes: Vec<usize>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    files: Vec<String>,
}

#[derive(Serialize)]
struct OptOutput {
    coalition: Vec<String>,
    value: f64,
    allocation: BTreeMap<String, Vec<String>>,
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Preprocess {
            scenario,
            out,
            components_dir,
        } => {
            let s = load_scenario(&scenario)?;
            let outcome = run_pipeline(&s);
            let mut summary = serde_json::to_value(outcome.summary(&s))?;
            if let Some(dir) = components_dir {
                let files = write_scenarios(&dir, outcome.components.iter().map(|c| &c.scenario))?;
                summary["files"] = files.into();
            }
            write_json(&out, &summary)?;
        }
        Command::Components { scenario, out, dir } => {
            let s = load_scenario(&scenario)?;
            let parts = split_components(&s);
            let sizes: Vec<usize> = parts.iter().map(|c| c.len()).collect();
            let mut histogram = BTreeMap::new();
            for &l in &sizes {
                *histogram.entry(l).or_insert(0) += 1;
            }
            let files = match dir {
                Some(d) => write_scenarios(&d, parts.iter().map(|c| &c.scenario))?,
                None => Vec::new(),
            };
            write_json(
                &out,
                &ComponentsSummary {
                    components: parts.len(),
                    histogram,
                    sizes,
                    files,
                },
            )?;
        }
        Command::Opt {
            scenario,
            agents,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let n = s.n_agents();
            let c = match agents {
                Some(ids) => Coalition::from_members(n, agent_indices(&s, &ids)?),
                None => Coalition::full(n),
            };
            let (allocation, value) = optimal_allocation(&s, &c);
            let allocation = c
                .iter()
                .map(|a| {
                    let goods = allocation
                        .goods_of(a)
                        .iter()
                        .map(|&g| s.goods()[g].id.clone())
                        .collect();
                    (s.agent_id(a).to_owned(), goods)
                })
                .collect();
            let coalition = c.iter().map(|a| s.agent_id(a).to_owned()).collect();
            write_json(
                &out,
                &OptOutput {
                    coalition,
                    value,
                    allocation,
                },
            )?;
        }
        Command::Exact {
            scenario,
            limit,
            common,
            out,
        } => {
            let g = game(load_scenario(&scenario)?, &common);
            let cfg = ExactConfig {
                workers: common.threads,
                limit,
                summation: common.summation,
                ..ExactConfig::default()
            };
            write_report(&out, &exact_report(&g, &cfg)?)?;
        }
        Command::Bounds {
            scenario,
            agents,
            max_neigh,
            side,
            common,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let agents = agents.map(|ids| agent_indices(&s, &ids)).transpose()?;
            let g = game(s, &common);
            let cfg = BoundsConfig {
                max_neigh,
                side,
                workers: common.threads,
                agents,
                summation: common.summation,
            };
            write_report(&out, &bounds_report(&g, &cfg)?)?;
        }
        Command::Fpras {
            scenario,
            sampling,
            runs,
            no_shortcut,
            no_scale,
            batch,
            common,
            out,
        } => {
            let g = game(load_scenario(&scenario)?, &common);
            let cfg = FprasConfig {
                epsilon: sampling.epsilon,
                delta: sampling.delta,
                runs,
                seed: sampling.seed,
                workers: common.threads,
                shortcut: !no_shortcut,
                batch,
                summation: common.summation,
                scale: !no_scale,
            };
            write_report(&out, &fpras_report(&g, &cfg)?)?;
        }
        Command::RangeSample {
            scenario,
            sampling,
            mode,
            lower_bounds,
            batch,
            common,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let lower_bounds = match lower_bounds {
                None => None,
                Some(path) => {
                    let report = load_report(&path)?;
                    let lbs = (0..s.n_agents())
                        .map(|i| {
                            let id = s.agent_id(i);
                            report
                                .get(id)
                                .and_then(|r| r.lb.or(r.point()))
                                .with_context(|| {
                                    format!(
                                        "{} has no lower bound for agent `{id}`",
                                        path.display()
                                    )
                                })
                        })
                        .collect::<Result<Vec<f64>>>()?;
                    Some(lbs)
                }
            };
            let g = game(s, &common);
            let cfg = RangeSamplerConfig {
                epsilon: sampling.epsilon,
                delta: sampling.delta,
                mode,
                lower_bounds,
                batch,
                seed: sampling.seed,
                workers: common.threads,
                summation: common.summation,
            };
            write_report(&out, &range_sampler_report(&g, &cfg)?)?;
        }
        Command::Solve {
            scenario,
            exact_limit,
            max_neigh,
            sampler,
            sampling,
            mode,
            runs,
            common,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let policy = Policy {
                exact_limit,
                max_neigh,
                sampler,
                epsilon: sampling.epsilon,
                delta: sampling.delta,
                mode,
                runs,
                seed: sampling.seed,
                threads: common.threads,
                summation: common.summation,
            };
            write_report(&out, &solve(&s, &policy)?)?;
        }
        Command::Compare {
            report,
            reference,
            threshold,
            json,
        } => {
            let cmp = load_report(&report)?.compare(&load_report(&reference)?)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&cmp)?);
            } else {
                println!(
                    "{:<24} {:>14} {:>14} {:>12}",
                    "agent", "value", "reference", "rel_error"
                );
                for e in &cmp.agents {
                    println!(
                        "{:<24} {:>14.9} {:>14.9} {:>12.3e}",
                        e.agent, e.value, e.reference, e.rel_error
                    );
                }
                if !cmp.skipped.is_empty() {
                    println!("skipped (no point value): {}", cmp.skipped.join(", "));
                }
                println!("X (max relative error)  = {:.6e}", cmp.max_rel_error);
                println!("Y (mean relative error) = {:.6e}", cmp.mean_rel_error);
            }
            if let Some(t) = threshold {
                if cmp.max_rel_error > t {
                    eprintln!(
                        "maximum relative error {:.6e} exceeds threshold {t}",
                        cmp.max_rel_error
                    );
                    return Ok(ExitCode::from(2));
                }
            }
        }
        Command::Generate {
            params,
            assessment_scale,
            agents,
            goods_per_agent,
            coauthorship,
            k,
            seed,
            out,
        } => {
            let mut p = match (params, assessment_scale) {
                (Some(_), true) => bail!("--params and --assessment-scale are exclusive"),
                (Some(path), false) => {
                    let text = std::fs::read_to_string(&path)
                        .with_context(|| format!("cannot read {}", path.display()))?;
                    serde_json::from_str::<GeneratorParams>(&text).with_context(|| {
                        format!("malformed generator parameters in {}", path.display())
                    })?
                }
                (None, true) => GeneratorParams::assessment_scale(),
                (None, false) => GeneratorParams::default(),
            };
            p.agents = agents.unwrap_or(p.agents);
            p.goods_per_agent = goods_per_agent.unwrap_or(p.goods_per_agent);
            p.coauthorship = coauthorship.unwrap_or(p.coauthorship);
            p.k = k.unwrap_or(p.k);
            p.seed = seed.unwrap_or(p.seed);
            let s: Scenario = generate(&p)?;
            write_text(out.output.as_deref(), &format!("{}\n", s.to_json_string()))?;
        }
        Command::Extract {
            scenario,
            size,
            seed,
            mode,
            out,
        } => {
            let s = load_scenario(&scenario)?;
            let sub = extract_subgraph(&s, size, seed, mode)?;
            write_text(
                out.output.as_deref(),
                &format!("{}\n", sub.to_json_string()),
            )?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
