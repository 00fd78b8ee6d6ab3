use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hedonic_p2p::domain::scenario_file::ScenarioDoc;
use hedonic_p2p::domain::{GaConfig, Kwh, Session, WeightScheme};
use hedonic_p2p::ledger::{verify_chain, Ledger, VerifyReport};
use hedonic_p2p::sim::{self, ExperimentRow, RelationMix, RunOptions, ScenarioSpec, SessionOutcome};

#[derive(Parser)]
#[command(name = "hedonic-p2p", version, about = "Coalition-based P2P energy market simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario file.
    Generate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output scenario file.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run coalition formation, matching and settlement; write results and a ledger.
    Run {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        ga: GaArgs,
        /// Relative delivery shortfall: each seller delivers `1 - u * noise` of its commitment.
        #[arg(long)]
        noise: Option<f64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the coalition-free order-level auction on the same scenario.
    Baseline {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Replicate a run over several coalition thresholds.
    SweepGamma {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma separated thresholds in kWh.
        #[arg(long, value_delimiter = ',', value_parser = parse_kwh, required = true)]
        gammas: Vec<Kwh>,
    },
    /// Replicate a run over several relation mixes on identical orders.
    SweepRelations {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Comma separated `friend/neutral/enemy` fractions.
        #[arg(long, value_delimiter = ',', default_value = "0.6/0.3/0.1,0.1/0.8/0.1,0.1/0.2/0.7")]
        mixes: Vec<RelationMix>,
    },
    /// Compare uniform and relation-promoted coalition weights.
    SweepWeights {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Compare the coalition search with the coalition-free auction.
    CompareBaseline {
        #[command(flatten)]
        exp: ExperimentArgs,
    },
    /// Find the threshold whose mean initial coalition count is closest to a target.
    CalibrateGamma {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        target: f64,
        #[arg(long, default_value_t = 30)]
        replications: usize,
    },
    /// Check the hash chain of a ledger file.
    VerifyLedger { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// 4 buyers and 10 sellers over hours 10 to 12.
    Neighborhood,
    /// 24 buyers and 24 sellers in hour 12.
    Community48,
}

#[derive(Args)]
struct ScenarioArgs {
    #[arg(long, value_enum, default_value = "neighborhood")]
    preset: Preset,
    /// Relation mix as `friend/neutral/enemy`.
    #[arg(long, default_value = "0.6/0.3/0.1")]
    mix: RelationMix,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ScenarioArgs {
    fn spec(&self) -> ScenarioSpec {
        match self.preset {
            Preset::Neighborhood => ScenarioSpec::neighborhood(self.mix, self.seed),
            Preset::Community48 => ScenarioSpec::community48(self.mix, self.seed),
        }
    }
}

#[derive(Args)]
struct InputArgs {
    /// Read the scenario from a file instead of generating it.
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[command(flatten)]
    scenario: ScenarioArgs,
}

impl InputArgs {
    fn load(&self) -> Result<Session> {
        let doc = match &self.scenario_file {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                ScenarioDoc::parse(&text)?
            }
            None => sim::generate_scenario(&self.scenario.spec())?,
        };
        doc.validate().map_err(|e| anyhow!("invalid scenario: {e}"))
    }
}

#[derive(Args)]
struct GaArgs {
    /// Orders above this quantity (kWh) seed their own coalition.
    #[arg(long, value_parser = parse_kwh, default_value = "10")]
    gamma: Kwh,
    #[arg(long, default_value_t = 30)]
    pop_size: usize,
    #[arg(long, default_value_t = 200)]
    iterations: usize,
    #[arg(long, default_value_t = 3)]
    tournament: usize,
    /// Exponent of the ideal-point distance.
    #[arg(long, default_value_t = 1.0)]
    m: f64,
    /// `uniform` or `promoted`.
    #[arg(long, default_value = "uniform")]
    weights: WeightScheme,
    #[arg(long, default_value_t = 1.0)]
    lambda_dup: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda_miss: f64,
    /// Search seed; defaults to the scenario seed.
    #[arg(long)]
    ga_seed: Option<u64>,
}

impl GaArgs {
    fn config(&self, default_seed: u64) -> GaConfig {
        GaConfig {
            gamma: self.gamma,
            pop_size: self.pop_size,
            iterations: self.iterations,
            tournament_k: self.tournament,
            m: self.m,
            weight_scheme: self.weights,
            lambda_dup: self.lambda_dup,
            lambda_miss: self.lambda_miss,
            seed: self.ga_seed.unwrap_or(default_seed),
        }
    }
}

#[derive(Args)]
struct ExperimentArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    ga: GaArgs,
    /// Number of seeds, starting at `--seed`.
    #[arg(long, default_value_t = 30)]
    replications: usize,
    #[arg(long)]
    out: PathBuf,
}

/// Accepts any non-negative decimal, rounded to the nearest Wh.
fn parse_kwh(s: &str) -> Result<Kwh, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(Kwh::from_milli((v * 1000.0).round() as u64)),
        _ => Err(format!("expected a non-negative kWh amount, got `{s}`")),
    }
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_outcome(dir: &Path, outcome: &SessionOutcome) -> Result<()> {
    write(dir, "metrics.csv", &outcome.metrics_csv())?;
    write(dir, "audit.csv", &outcome.audit_csv())?;
    let tx: String = outcome.hours.iter().map(|h| h.report.to_text(&h.book)).collect();
    write(dir, "transactions.txt", &tx)?;
    for h in &outcome.hours {
        if let Some(trace) = &h.trace {
            write(dir, &format!("trace_h{}.csv", h.book.hour()), &trace.to_csv())?;
        }
    }
    Ok(())
}

fn print_metrics(outcome: &SessionOutcome) {
    for m in outcome.metrics() {
        println!(
            "hour {}: {} sell / {} buy coalitions, {} transactions, {} kWh traded, social index {}",
            m.hour, m.sell_coalitions, m.buy_coalitions, m.transactions, m.energy, m.social_index
        );
    }
    println!("total traded: {} kWh", outcome.total_energy());
}

fn write_experiment(exp: &ExperimentArgs, rows: &[ExperimentRow]) -> Result<()> {
    fs::create_dir_all(&exp.out)?;
    write(&exp.out, "rows.csv", &sim::rows_csv(rows))?;
    let summary = sim::summarize(rows);
    let text = sim::summary_csv(&summary);
    write(&exp.out, "summary.csv", &text)?;
    print!("{text}");
    Ok(())
}

fn print_paired(rows: &[ExperimentRow], a: &str, b: &str) {
    let p = sim::paired(rows, a, b);
    println!(
        "{a} vs {b}: {}/{} paired wins, mean energy {:.3} vs {:.3} kWh ({:+.1}%)",
        p.a_wins,
        p.pairs,
        p.mean_a,
        p.mean_b,
        100.0 * p.relative_mean_change()
    );
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate { scenario, out } => {
            let doc = sim::generate_scenario(&scenario.spec())?;
            fs::write(&out, doc.to_text()).with_context(|| format!("writing {}", out.display()))?;
            println!("{} orders written to {}", doc.orders.len(), out.display());
        }
        Command::Run { input, ga, noise, out } => {
            let session = input.load()?;
            let cfg = ga.config(input.scenario.seed);
            fs::create_dir_all(&out)?;
            write(&out, "scenario.txt", &ScenarioDoc::from_session(&session).to_text())?;
            let mut ledger = Ledger::create(&out.join("ledger.bin"))?;
            let outcome = sim::run_session(&session, &cfg, &RunOptions { delivery_noise: noise }, &mut ledger)?;
            write_outcome(&out, &outcome)?;
            print_metrics(&outcome);
        }
        Command::Baseline { input, out } => {
            let session = input.load()?;
            fs::create_dir_all(&out)?;
            let outcome = sim::run_baseline(&session);
            write_outcome(&out, &outcome)?;
            print_metrics(&outcome);
        }
        Command::SweepGamma { exp, gammas } => {
            let cfg = exp.ga.config(exp.scenario.seed);
            let rows = sim::gamma_sweep(
                &exp.scenario.spec(),
                &gammas,
                &cfg,
                &sim::seeds(exp.replications, exp.scenario.seed),
            )?;
            write_experiment(&exp, &rows)?;
            for w in gammas.windows(2) {
                print_paired(&rows, &format!("gamma={}", w[1]), &format!("gamma={}", w[0]));
            }
        }
        Command::SweepRelations { exp, mixes } => {
            let cfg = exp.ga.config(exp.scenario.seed);
            let rows = sim::relation_sweep(
                &exp.scenario.spec(),
                &mixes,
                &cfg,
                &sim::seeds(exp.replications, exp.scenario.seed),
            )?;
            write_experiment(&exp, &rows)?;
            for m in mixes.iter().skip(1) {
                print_paired(&rows, &format!("mix={}", mixes[0]), &format!("mix={m}"));
            }
        }
        Command::SweepWeights { exp } => {
            let cfg = exp.ga.config(exp.scenario.seed);
            let rows =
                sim::weight_promotion(&exp.scenario.spec(), &cfg, &sim::seeds(exp.replications, exp.scenario.seed))?;
            write_experiment(&exp, &rows)?;
            print_paired(&rows, "weights=promoted", "weights=uniform");
        }
        Command::CompareBaseline { exp } => {
            let cfg = exp.ga.config(exp.scenario.seed);
            let rows =
                sim::baseline_comparison(&exp.scenario.spec(), &cfg, &sim::seeds(exp.replications, exp.scenario.seed))?;
            write_experiment(&exp, &rows)?;
            print_paired(&rows, "hedonic", "baseline");
        }
        Command::CalibrateGamma { scenario, target, replications } => {
            if target.is_nan() || target <= 0.0 {
                bail!("target must be positive");
            }
            let seeds = sim::seeds(replications, scenario.seed);
            let gamma = sim::calibrate_gamma(&scenario.spec(), target, &seeds)?;
            let mean = sim::mean_coalition_count(&scenario.spec(), gamma, &seeds)?;
            println!("gamma={gamma} mean_coalitions={mean:.2}");
        }
        Command::VerifyLedger { path } => match verify_chain(&path)? {
            VerifyReport::Pass { blocks } => println!("PASS {blocks} blocks"),
            VerifyReport::Fail { index, reason } => {
                println!("FAIL at block {index}: {reason}");
                return Ok(ExitCode::FAILURE);
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
