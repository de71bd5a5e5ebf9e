//! `tripmix`: synthesize transit days, generate route assignments by
//! annealing, and run the evaluation protocols.
//!
//! Exit codes: 0 success, 2 usage, 3 configuration or parse error, 4 invalid
//! input data, 5 the run cannot proceed, 6 I/O failure, 1 anything else.

mod data;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tripmix::candidates::{build_candidate_sets, CandidateConfig, HistoryRecord, TripHistory};
use tripmix::eval::{EvalConfig, Evaluator, TargetMode};
use tripmix::formats::{
    parse_targets, read_demand, write_mix_table, write_online_table, write_report_histograms,
    write_report_summary, write_targets, write_trace, write_trips, TripRecord,
};
use tripmix::metrics::MismatchSpec;
use tripmix::model::{CandidateSet, DayType, Route};
use tripmix::planner::{Planner, PlannerConfig};
use tripmix::sampler::{run, AnnealingSchedule, SamplerConfig};
use tripmix::synth::{Generator, SynthConfig};
use tripmix::Error;

#[derive(Debug, Parser)]
#[command(
    name = "tripmix",
    version,
    about = "Route assignment by annealing over planner and history candidates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a synthetic network and a multi-day trip history from a TOML config.
    Synth(SynthArgs),
    /// Assign a route to every demand so trip characteristics match the targets.
    Generate(GenerateArgs),
    /// Run an evaluation protocol over a data directory written by `synth`.
    Eval(EvalArgs),
    /// Write empirical targets measured on a trip history.
    Targets(TargetsArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Synthesis config (TOML). Omitted keys take their defaults.
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Destination directory.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    /// Annealing iterations; 0 returns the initial assignment [default: 100000].
    #[arg(long)]
    iterations: Option<u64>,
    /// Temperature multiplier applied once per sweep, in (0, 1] [default: 0.99].
    #[arg(long)]
    decay: Option<f64>,
    /// Initial temperature [default: 1e-4].
    #[arg(long)]
    l0: Option<f64>,
    /// Temperature floor [default: 1e-5].
    #[arg(long)]
    l_min: Option<f64>,
    /// Iterations between trace checkpoints [default: 25000].
    #[arg(long)]
    checkpoint_every: Option<u64>,
    /// Offset added to both errors in the acceptance ratio [default: 1e-9].
    #[arg(long)]
    epsilon: Option<f64>,
    /// Sampler seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
}

impl SamplerArgs {
    fn resolve(&self, base: SamplerConfig) -> SamplerConfig {
        SamplerConfig {
            iterations: self.iterations.unwrap_or(base.iterations),
            schedule: AnnealingSchedule {
                l0: self.l0.unwrap_or(base.schedule.l0),
                decay: self.decay.unwrap_or(base.schedule.decay),
                l_min: self.l_min.unwrap_or(base.schedule.l_min),
            },
            seed: self.seed.unwrap_or(base.seed),
            checkpoint_every: self.checkpoint_every.unwrap_or(base.checkpoint_every),
            epsilon: self.epsilon.unwrap_or(base.epsilon),
        }
    }
}

#[derive(Debug, Args)]
struct CandidateArgs {
    /// Planner routes per demand.
    #[arg(long, default_value_t = 5)]
    planner_k: usize,
    /// Share of candidate weight given to planner routes, in [0, 1].
    #[arg(long, default_value_t = 0.5)]
    lambda_mix: f64,
    /// History matches must board within this many seconds of the departure.
    #[arg(long, default_value_t = 1200)]
    slot_width: u32,
}

impl CandidateArgs {
    fn resolve(&self) -> CandidateConfig {
        CandidateConfig {
            planner_k: self.planner_k,
            lambda_mix: self.lambda_mix,
            slot_width: self.slot_width,
            ..CandidateConfig::default()
        }
    }
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Network file.
    #[arg(long)]
    network: PathBuf,
    /// Demand file: `demand_id, origin, destination, depart_time[, round_trip]`.
    #[arg(long)]
    demand: PathBuf,
    /// Trips file or directory of trips files. Repeatable.
    #[arg(long)]
    history: Vec<PathBuf>,
    /// Only history days strictly before this one are used.
    #[arg(long)]
    before_day: Option<u32>,
    /// Targets file (TOML). Defaults to empirical targets from the history.
    #[arg(long)]
    targets: Option<PathBuf>,
    /// Day index written to the assigned trips.
    #[arg(long, default_value_t = 0)]
    day: u32,
    /// Day type written to the assigned trips.
    #[arg(long, value_enum, default_value_t = DayKind::Working)]
    day_type: DayKind,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    candidates: CandidateArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum EvalMode {
    /// One annealing run on a single test day.
    Oneday,
    /// Every test day in turn, history growing day by day.
    Online,
    /// Matched versus pooled day-type targets on every test day.
    Daytype,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DayKind {
    Working,
    Weekend,
}

impl From<DayKind> for DayType {
    fn from(k: DayKind) -> DayType {
        match k {
            DayKind::Working => DayType::Working,
            DayKind::Weekend => DayType::Weekend,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Targets {
    Matched,
    Pooled,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(value_enum)]
    mode: EvalMode,
    /// Data directory written by `synth`.
    #[arg(long)]
    data: PathBuf,
    /// Test day for `oneday` [default: the last day].
    #[arg(long)]
    day: Option<u32>,
    /// Restricts `online` to days of one type.
    #[arg(long, value_enum)]
    day_type: Option<DayKind>,
    /// Target days for `oneday` and `online`.
    #[arg(long, value_enum, default_value_t = Targets::Matched)]
    targets: Targets,
    #[command(flatten)]
    sampler: SamplerArgs,
    #[command(flatten)]
    candidates: CandidateArgs,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct TargetsArgs {
    #[arg(long)]
    network: PathBuf,
    /// Trips file or directory of trips files. Repeatable.
    #[arg(long, required = true)]
    history: Vec<PathBuf>,
    #[arg(long)]
    before_day: Option<u32>,
    /// Output file.
    #[arg(long, default_value = "targets.toml")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Generate(a) => generate(a),
        Command::Eval(a) => eval(a),
        Command::Targets(a) => targets(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<Error>() {
            return match err {
                Error::Parse { .. } | Error::Config { .. } => 3,
                Error::UnknownStop(_)
                | Error::UnknownLine(_)
                | Error::BinningMismatch(_)
                | Error::Invalid { .. }
                | Error::OutOfRange(_)
                | Error::Degenerate(_)
                | Error::Unreachable(_)
                | Error::NoCandidates(_) => 4,
                Error::FrozenChain | Error::Eval(_) => 5,
                Error::Io(_) | Error::Csv(_) => 6,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 6;
        }
    }
    1
}

fn synth(args: SynthArgs) -> Result<()> {
    let text = data::read_text(&args.config)?;
    let mut config = SynthConfig::from_toml_str(&text, &args.config.display().to_string())?;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let synth = Generator::new(config.clone())?.generate()?;
    data::save(&args.out_dir, &config, &synth)?;
    let weekends = synth
        .days
        .iter()
        .filter(|d| d.day_type == DayType::Weekend)
        .count();
    println!(
        "{} days ({} working, {} weekend), {} stops, {} lines -> {}",
        synth.days.len(),
        synth.days.len() - weekends,
        weekends,
        synth.network.stops().len(),
        synth.network.lines().len(),
        args.out_dir.display()
    );
    Ok(())
}

fn load_history(
    paths: &[PathBuf],
    net: &tripmix::planner::TransitNetwork,
    before_day: Option<u32>,
) -> Result<Vec<TripRecord>> {
    let mut records = Vec::new();
    for p in paths {
        for f in data::trip_files(p)? {
            records.extend(
                data::read_trip_file(&f, net)?
                    .into_iter()
                    .filter(|r| before_day.is_none_or(|b| r.day < b)),
            );
        }
    }
    Ok(records)
}

fn empirical_targets(records: &[TripRecord]) -> Result<MismatchSpec> {
    if records.is_empty() {
        bail!(Error::Config {
            field: "targets".into(),
            message: "no targets file and no history to measure them on".into(),
        });
    }
    let routes: Vec<Route> = records.iter().map(|r| r.route.clone()).collect();
    Ok(MismatchSpec::empirical_from_routes(&routes)?)
}

fn generate(args: GenerateArgs) -> Result<()> {
    let net = Arc::new(data::load_network(&args.network)?);
    let triples = {
        let f = std::fs::File::open(&args.demand)
            .with_context(|| format!("opening {}", args.demand.display()))?;
        read_demand(
            std::io::BufReader::new(f),
            &net,
            &args.demand.display().to_string(),
        )?
    };
    let records = load_history(&args.history, &net, args.before_day)?;
    let spec = match &args.targets {
        Some(p) => parse_targets(&data::read_text(p)?, &p.display().to_string())?,
        None => empirical_targets(&records)?,
    };
    let candidates = args.candidates.resolve();
    let planner = Planner::new(
        net.clone(),
        PlannerConfig {
            k: candidates.planner_k,
            ..PlannerConfig::default()
        },
    );
    let history = TripHistory::from_records(records.into_iter().map(|r| HistoryRecord {
        route: r.route,
        day: r.day,
        day_type: r.day_type,
    }));
    let batch = build_candidate_sets(&triples, &planner, &history, &candidates)?;
    let config = args.sampler.resolve(EvalConfig::default().sampler);
    let trace = run(&batch.sets, &spec, config)?;

    let out = &args.out_dir;
    let mut w = data::create(&out.join("trace.csv"))?;
    write_trace(&mut w, &trace.checkpoints)?;
    w.flush()?;
    let assigned: Vec<TripRecord> = batch
        .sets
        .iter()
        .zip(trace.best_state.assignment())
        .map(|(s, &c)| TripRecord {
            day: args.day,
            day_type: args.day_type.into(),
            demand_id: s.triple().demand_id.clone(),
            route: s.route(c).clone(),
        })
        .collect();
    let mut w = data::create(&out.join("assigned.csv"))?;
    write_trips(&mut w, &assigned)?;
    w.flush()?;
    write_candidates(&out.join("candidates.csv"), &batch.sets)?;
    let mut unassigned = String::new();
    for id in &batch.unassigned {
        unassigned.push_str(id);
        unassigned.push('\n');
    }
    data::write_text(&out.join("unassigned.txt"), &unassigned)?;

    println!(
        "{} demands assigned, {} without candidates; error {:.6} -> {:.6} (best {:.6}), {} of {} proposals accepted",
        batch.sets.len(),
        batch.unassigned.len(),
        trace.initial_error(),
        trace.final_state.error(),
        trace.best_state.error(),
        trace.accepted,
        trace.proposals,
    );
    Ok(())
}

/// `demand_id, candidate, weight, planner_hits, history_frequency, route`.
fn write_candidates(path: &Path, sets: &[CandidateSet]) -> Result<()> {
    let mut w = data::create(path)?;
    writeln!(
        w,
        "demand_id,candidate,weight,planner_hits,history_frequency,route"
    )?;
    for s in sets {
        for (i, c) in s.candidates().iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                s.triple().demand_id,
                i,
                c.weight,
                c.planner_hits,
                c.history_frequency,
                c.route.identity()
            )?;
        }
    }
    w.flush()?;
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let collection = data::load_collection(&args.data)?;
    let base = EvalConfig::default();
    let config = EvalConfig {
        sampler: args.sampler.resolve(base.sampler),
        candidates: args.candidates.resolve(),
        planner: PlannerConfig {
            k: args.candidates.planner_k,
            ..base.planner
        },
        report: base.report,
    };
    let mode = match args.targets {
        Targets::Matched => TargetMode::Matched,
        Targets::Pooled => TargetMode::Pooled,
    };
    let evaluator = Evaluator::new(&collection, config)?;
    let out = &args.out_dir;
    match args.mode {
        EvalMode::Oneday => {
            let day = match args.day {
                Some(d) => d,
                None => *collection.days().last().expect("collection is never empty"),
            };
            let r = evaluator.one_day(day, mode)?;
            let mut w = data::create(&out.join("trace.csv"))?;
            write_trace(&mut w, &r.trace.checkpoints)?;
            w.flush()?;
            for (name, report) in [("before", &r.before), ("after", &r.after)] {
                let mut w = data::create(&out.join(format!("summary_{name}.csv")))?;
                write_report_summary(&mut w, report)?;
                w.flush()?;
                let mut w = data::create(&out.join(format!("histograms_{name}.csv")))?;
                write_report_histograms(&mut w, report)?;
                w.flush()?;
            }
            println!(
                "day {} ({}), {} prior days, {} demands: error {:.6} -> {:.6}",
                r.day,
                r.day_type,
                r.prior_days.len(),
                r.demands,
                r.initial_error(),
                r.final_error()
            );
        }
        EvalMode::Online => {
            let rows = evaluator.online(args.day_type.map(DayType::from), mode)?;
            let mut w = data::create(&out.join("online.csv"))?;
            write_online_table(&mut w, &rows)?;
            w.flush()?;
            for r in &rows {
                println!(
                    "day {:>3} {:<8} prior {:>3}  error {:.6}",
                    r.day, r.day_type, r.prior_days, r.final_error
                );
            }
        }
        EvalMode::Daytype => {
            let rows = evaluator.daytype_mix()?;
            let mut w = data::create(&out.join("daytype.csv"))?;
            write_mix_table(&mut w, &rows)?;
            w.flush()?;
            for r in &rows {
                println!(
                    "day {:>3} {:<8} matched {:.6}  pooled {:.6}",
                    r.day, r.day_type, r.matched_error, r.pooled_error
                );
            }
        }
    }
    Ok(())
}

fn targets(args: TargetsArgs) -> Result<()> {
    let net = data::load_network(&args.network)?;
    let records = load_history(&args.history, &net, args.before_day)?;
    let spec = empirical_targets(&records)?;
    data::write_text(&args.out, &write_targets(&spec))?;
    println!(
        "targets from {} trips -> {}",
        records.len(),
        args.out.display()
    );
    Ok(())
}
