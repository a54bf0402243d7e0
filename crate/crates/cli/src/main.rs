use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufReader, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use acbc_core::estimation::{admissible_populations, error_bound, mle_estimate, wmae, wmae_search};
use acbc_core::io::{parse_design, read_records, write_feasible_csv, write_mi_shares_csv};
use acbc_core::paprika::{constraints_from_tasks, FeasibilityRule, RankingSpace};
use acbc_core::report::{run_report, ReportOptions};
use acbc_core::simulation::{
    estimate_hit_probabilities, write_table_csv, ByoMode, SimulatedRespondent, SimulationSetup, TrialOptions,
    DEFAULT_UTILITIES,
};
use acbc_core::{RespondentRecord, SurveyDesign};
use clap::{Args, Parser, Subcommand, ValueEnum};

const DEFAULT_SEED: u64 = 20_240_601;

#[derive(Parser)]
#[command(name = "acbc", version, about = "Small-sample ACBC analysis toolkit")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (created if missing). Without it, results go to stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a design file, and optionally a records file against it.
    Validate(ValidateArgs),
    /// Monte Carlo recovery of the Most Ideal level for a simulated respondent.
    Simulate(SimulateArgs),
    /// Feasible rankings and Most Ideal shares per respondent.
    Paprika(PaprikaArgs),
    /// MLE and WMAE-minimizing population estimates for one attribute.
    Estimate(EstimateArgs),
    /// Full study report (MT, MI and population sections).
    Report(ReportArgs),
    /// Run the survey HTTP service.
    Serve(ServeArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    records: Option<PathBuf>,
    /// Population size per tag, e.g. `FBO=49`; checks the small-study bound.
    #[arg(long = "population", value_parser = parse_size)]
    populations: Vec<(String, u64)>,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Ideal,
    Typical,
    Random,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Ordinal,
    Exact,
}

impl From<RuleArg> for FeasibilityRule {
    fn from(r: RuleArg) -> Self {
        match r {
            RuleArg::Ordinal => FeasibilityRule::Ordinal,
            RuleArg::Exact => FeasibilityRule::Exact,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum, default_value = "all")]
    mode: ModeArg,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    /// Level utilities, best first, shared by every attribute.
    #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_UTILITIES)]
    utilities: Vec<f64>,
    /// Always give the BYO profile a slot in the tournament field.
    #[arg(long)]
    force_byo_in_field: bool,
    #[arg(long, value_enum, default_value = "ordinal")]
    rule: RuleArg,
}

#[derive(Args)]
struct PaprikaArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    records: PathBuf,
    #[arg(long, value_enum, default_value = "ordinal")]
    rule: RuleArg,
    /// List the feasible rankings of one respondent instead.
    #[arg(long)]
    respondent: Option<String>,
}

#[derive(Args)]
struct EstimateArgs {
    /// Sample counts per level, e.g. `0,6,7`.
    #[arg(long, value_delimiter = ',', required = true)]
    counts: Vec<u64>,
    /// Population size N.
    #[arg(long)]
    population: u64,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    design: PathBuf,
    #[arg(long)]
    records: PathBuf,
    /// Population size per tag, e.g. `FBO=49`. Required for every tag.
    #[arg(long = "population", value_parser = parse_size, required = true)]
    populations: Vec<(String, u64)>,
    #[arg(long, default_value_t = acbc_core::partworth::DEFAULT_RIDGE)]
    ridge: f64,
    #[arg(long, value_enum, default_value = "ordinal")]
    rule: RuleArg,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long)]
    data_dir: PathBuf,
    /// Study id and design file, e.g. `relief=design.json`. Repeatable.
    #[arg(long = "study", value_parser = parse_study, required = true)]
    studies: Vec<(String, PathBuf)>,
}

fn parse_size(s: &str) -> std::result::Result<(String, u64), String> {
    let (tag, n) = s.split_once('=').ok_or_else(|| format!("expected TAG=N, got {s:?}"))?;
    let n = n.trim().parse().map_err(|e| format!("bad population size in {s:?}: {e}"))?;
    Ok((tag.trim().to_string(), n))
}

fn parse_study(s: &str) -> std::result::Result<(String, PathBuf), String> {
    let (id, path) = s.split_once('=').ok_or_else(|| format!("expected ID=DESIGN_FILE, got {s:?}"))?;
    Ok((id.to_string(), PathBuf::from(path)))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Core(#[from] acbc_core::Error),
    #[error(transparent)]
    Service(#[from] acbc_service::error::OpenError),
    #[error("{0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_validation() => 2,
            CliError::Invalid(_) | CliError::Service(acbc_service::error::OpenError::StudyId(_)) => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn load_design(path: &Path) -> Result<SurveyDesign> {
    let text = fs::read_to_string(path).map_err(io_at(path))?;
    Ok(parse_design(&text)?)
}

fn load_records(path: &Path, design: &SurveyDesign) -> Result<Vec<RespondentRecord>> {
    let f = fs::File::open(path).map_err(io_at(path))?;
    Ok(read_records(BufReader::new(f), design)?)
}

/// Writes to `<out>/<name>` when `--out` is set, stdout otherwise.
fn emit(out: Option<&Path>, name: &str, bytes: &[u8]) -> Result<()> {
    match out {
        Some(dir) => {
            fs::create_dir_all(dir).map_err(io_at(dir))?;
            let path = dir.join(name);
            fs::write(&path, bytes).map_err(io_at(&path))
        }
        None => io::stdout().write_all(bytes).map_err(io_at(Path::new("<stdout>"))),
    }
}

fn tally_tags(records: &[RespondentRecord]) -> BTreeMap<&str, u64> {
    let mut m = BTreeMap::new();
    for r in records {
        *m.entry(r.population_tag.as_str()).or_insert(0) += 1;
    }
    m
}

fn validate(args: &ValidateArgs) -> Result<()> {
    let design = load_design(&args.design)?;
    design.validate()?;
    println!(
        "design ok: {} attributes ({}), {} tasks, field of {}",
        design.attribute_count(),
        design.shape(),
        design.choice_tasks,
        design.field_size()
    );
    let Some(path) = &args.records else {
        return Ok(());
    };
    let records = load_records(path, &design)?;
    let tags = tally_tags(&records);
    println!("records ok: {}", records.len());
    let sizes: BTreeMap<_, _> = args.populations.iter().cloned().collect();
    for (tag, n) in &tags {
        match sizes.get(*tag) {
            Some(&big_n) => {
                let check = design.small_study(*n, big_n)?;
                println!(
                    "  {tag}: n = {n}, N = {big_n}, small-study bound {:.1}: {}",
                    check.bound,
                    if check.holds { "holds" } else { "does not hold" }
                );
            }
            None => println!("  {tag}: n = {n}"),
        }
    }
    Ok(())
}

fn simulate(args: &SimulateArgs, seed: u64, out: Option<&Path>) -> Result<()> {
    let design = SurveyDesign::with_level_counts(&[3, 3, 3, 3], 15)?;
    let respondent = SimulatedRespondent::uniform(4, &args.utilities)?;
    let options = TrialOptions {
        force_byo_in_field: args.force_byo_in_field,
        rule: args.rule.into(),
    };
    let setup = SimulationSetup::new(design, respondent, options)?;
    let modes: Vec<ByoMode> = match args.mode {
        ModeArg::Ideal => vec![ByoMode::Ideal],
        ModeArg::Typical => vec![ByoMode::Typical],
        ModeArg::Random => vec![ByoMode::Random],
        ModeArg::All => ByoMode::ALL.to_vec(),
    };
    let rows = modes
        .into_iter()
        .map(|m| estimate_hit_probabilities(&setup, m, args.trials, seed))
        .collect::<acbc_core::Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_table_csv(&mut buf, &rows)?;
    emit(out, "simulation.csv", &buf)
}

fn paprika(args: &PaprikaArgs, out: Option<&Path>) -> Result<()> {
    let design = load_design(&args.design)?;
    let records = load_records(&args.records, &design)?;
    let space = RankingSpace::new(&design)?;
    let rule: FeasibilityRule = args.rule.into();
    if let Some(id) = &args.respondent {
        let rec = records
            .iter()
            .find(|r| &r.id == id)
            .ok_or_else(|| CliError::Invalid(format!("no respondent {id:?} in {}", args.records.display())))?;
        let frs = space.feasible_set(&constraints_from_tasks(&rec.tasks)?, rule);
        let mut buf = Vec::new();
        write_feasible_csv(&mut buf, &design, &frs)?;
        return emit(out, &format!("feasible_{}.csv", sanitize(id)), &buf);
    }
    let rows = records
        .iter()
        .map(|r| {
            let frs = space.feasible_set(&constraints_from_tasks(&r.tasks)?, rule);
            Ok((r.id.clone(), frs.mi_counts()))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut buf = Vec::new();
    write_mi_shares_csv(&mut buf, &design, &rows)?;
    emit(out, "mi_shares.csv", &buf)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn vector(v: &[u64]) -> String {
    let parts: Vec<String> = v.iter().map(u64::to_string).collect();
    format!("({})", parts.join(","))
}

fn estimate(args: &EstimateArgs, out: Option<&Path>) -> Result<()> {
    let ensemble = admissible_populations(&args.counts, args.population)?;
    let search = wmae_search(&ensemble);
    let mle = mle_estimate(&args.counts, args.population)?;
    let mle_id = ensemble.id_of(&mle.counts).expect("MLE is admissible");
    let mut text = String::new();
    text.push_str(&format!(
        "sample {} of n = {}, N = {}, {} admissible populations\n",
        vector(&args.counts),
        args.counts.iter().sum::<u64>(),
        args.population,
        ensemble.len()
    ));
    text.push_str(&format!(
        "mle   {} id {} wmae {:.4}{}\n",
        vector(&mle.counts),
        mle_id,
        wmae(&mle.counts, &ensemble),
        if mle.non_unique { " (not unique)" } else { "" }
    ));
    text.push_str(&format!(
        "wmae  {} id {} wmae {:.4}{}\n",
        vector(&search.best.counts),
        search.best_id,
        search.best.wmae,
        if search.best.non_unique { " (not unique)" } else { "" }
    ));
    text.push_str(&format!("bound {:.4}\n", error_bound(&args.counts, args.population)));
    print!("{text}");

    let Some(dir) = out else {
        return Ok(());
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["id".to_string()];
    header.extend((1..=args.counts.len()).map(|i| format!("N{i}")));
    header.push("wmae".into());
    w.write_record(&header)?;
    for &(id, score) in &search.scores {
        let mut row: Vec<String> = ensemble.get(id).expect("scored id").iter().map(u64::to_string).collect();
        row.insert(0, id.to_string());
        row.push(format!("{score:.6}"));
        w.write_record(&row)?;
    }
    let buf = w.into_inner().map_err(|e| CliError::Invalid(e.to_string()))?;
    emit(Some(dir), "wmae_scores.csv", &buf)?;
    emit(Some(dir), "estimate.txt", text.as_bytes())
}

fn report(args: &ReportArgs, out: Option<&Path>) -> Result<()> {
    let out = out.unwrap_or(Path::new("report"));
    let sizes: BTreeMap<String, u64> = args.populations.iter().cloned().collect();
    let options = ReportOptions {
        ridge: args.ridge,
        rule: args.rule.into(),
    };
    let report = run_report(&args.design, &args.records, &sizes, out, &options)?;
    print!("{}", report.to_text());
    Ok(())
}

fn serve(args: &ServeArgs) -> Result<()> {
    let studies = args
        .studies
        .iter()
        .map(|(id, path)| Ok((id.clone(), load_design(path)?)))
        .collect::<Result<Vec<_>>>()?;
    let service = Arc::new(acbc_service::Service::open(&args.data_dir, studies)?);
    let rt = tokio::runtime::Runtime::new().map_err(io_at(Path::new("<runtime>")))?;
    eprintln!("listening on http://{}", args.addr);
    rt.block_on(acbc_service::serve(args.addr, service))
        .map_err(io_at(Path::new("<listener>")))
}

fn run(cli: Cli) -> Result<()> {
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Validate(a) => validate(a),
        Command::Simulate(a) => simulate(a, cli.seed.unwrap_or(DEFAULT_SEED), out),
        Command::Paprika(a) => paprika(a, out),
        Command::Estimate(a) => estimate(a, out),
        Command::Report(a) => report(a, out),
        Command::Serve(a) => serve(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
