use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use serde_json::Value;

use curio_core::causality::{
    read_edges_csv, scan_group, write_edges_csv, Encoding, GrangerEdge, ScanOptions, DEFAULT_ALPHA,
    DEFAULT_MAX_LAG,
};
use curio_core::corpus::{load_gold, merge_gold_ratings, write_gold_csv};
use curio_core::pattern::{
    mine_all_targets, pattern_records, MineConfig, PatternRecord, UtilitySource, WindowOptions,
    Windowing, DEFAULT_MAX_PATTERN_ITEMS, DEFAULT_MIN_UTILITY,
};
use curio_core::rating::{load_judgments, run_rating_pipeline, RatingOptions, TieBreak};
use curio_core::simulate::{
    generate, simulate_judgments, write_corpus, ScenarioConfig, ANNOTATIONS_FILE, GOLD_FILE,
    JUDGMENTS_FILE,
};
use curio_core::synthesis::{
    influence_census, render_report, synthesize, Census, InfluenceSignature, ReportFormat,
};
use curio_core::{load_corpus, CodeRegistry, Corpus, Error, IngestConfig};

const PATTERNS_FILE: &str = "patterns.json";
const RELIABILITY_FILE: &str = "reliability.json";
const EDGES_FILE: &str = "edges.csv";
const SIGNATURES_FILE: &str = "signatures.json";

#[derive(Parser)]
#[command(
    name = "curio",
    version,
    about = "Curiosity behavior mining pipeline",
    arg_required_else_help = true
)]
struct Cli {
    /// Overrides the scenario seed for `simulate`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, env = "CURIO_OUT", default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Aggregate crowd judgments into gold curiosity labels.
    Rate {
        #[arg(long)]
        judgments: PathBuf,
        #[command(flatten)]
        rate: RateArgs,
    },
    /// Mine high-utility behavior patterns for every member.
    Mine {
        #[arg(long)]
        annotations: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        mine: MineArgs,
    },
    /// Pairwise and conditional Granger scans per group.
    Granger {
        #[arg(long)]
        annotations: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        scan: ScanArgs,
    },
    /// Aggregate significant edges into cross-group signatures.
    Synth {
        #[arg(long)]
        edges: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
    },
    /// Render patterns and signatures as a report.
    Report {
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        signatures: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
    /// Generate a synthetic corpus from a scenario file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every stage on a corpus directory.
    Pipeline {
        /// Directory holding annotations.csv and judgments.csv or gold.csv.
        #[arg(long = "in")]
        input: PathBuf,
        #[command(flatten)]
        ingest: IngestArgs,
        #[command(flatten)]
        rate: RateArgs,
        #[command(flatten)]
        mine: MineArgs,
        #[command(flatten)]
        scan: ScanArgs,
        #[command(flatten)]
        report: ReportArgs,
    },
}

#[derive(Args)]
struct RateArgs {
    /// Label preferred when weighted votes tie: high or low.
    #[arg(long, default_value = "high", value_parser = parse_tie)]
    tie_break: TieBreak,
}

#[derive(Args)]
struct IngestArgs {
    /// Ingest settings (TOML or JSON).
    #[arg(long)]
    codes: Option<PathBuf>,
}

#[derive(Args)]
struct MineArgs {
    #[arg(long, default_value_t = DEFAULT_MIN_UTILITY)]
    min_utility: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_PATTERN_ITEMS)]
    max_items: usize,
    /// tumbling or sliding:<stride>
    #[arg(long, default_value = "tumbling", value_parser = parse_core::<Windowing>)]
    windowing: Windowing,
    /// target or actor
    #[arg(long, default_value = "target", value_parser = parse_core::<UtilitySource>)]
    utility_source: UtilitySource,
}

#[derive(Args)]
struct ScanArgs {
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_MAX_LAG)]
    max_lag: usize,
    /// count or binary
    #[arg(long, default_value = "count", value_parser = parse_core::<Encoding>)]
    encoding: Encoding,
    /// First-difference every series.
    #[arg(long)]
    difference: bool,
    /// Bonferroni-correct alpha over the pairwise tests of a group.
    #[arg(long)]
    bonferroni: bool,
}

#[derive(Args)]
struct ReportArgs {
    /// table, json or csv
    #[arg(long, default_value = "table", value_parser = parse_core::<ReportFormat>)]
    format: ReportFormat,
}

fn parse_core<T: std::str::FromStr<Err = Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_tie(s: &str) -> Result<TieBreak, String> {
    match s {
        "high" => Ok(TieBreak::High),
        "low" => Ok(TieBreak::Low),
        _ => Err(format!("expected high or low, got `{s}`")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let out = cli.out.as_path();
    fs::create_dir_all(out).map_err(|e| io_err(out, e))?;
    match cli.command {
        Command::Rate { judgments, rate } => {
            let gold = rate_stage(&judgments, &rate, out)?;
            info!("wrote {} gold labels", gold.len());
        }
        Command::Mine {
            annotations,
            gold,
            ingest,
            mine,
        } => {
            let corpus = merge_gold_ratings(&load(&annotations, &ingest)?, &load_gold(&gold)?)?;
            mine_stage(&corpus, &mine, out)?;
        }
        Command::Granger {
            annotations,
            ingest,
            scan,
        } => {
            granger_stage(&load(&annotations, &ingest)?, &scan, out)?;
        }
        Command::Synth { edges, alpha } => {
            let file = File::open(&edges).map_err(|e| io_err(&edges, e))?;
            synth_stage(&read_edges_csv(BufReader::new(file))?, alpha, out)?;
        }
        Command::Report {
            patterns,
            signatures,
            ingest,
            report,
        } => {
            let patterns: Vec<PatternRecord> = read_json(&patterns)?;
            let doc: Value = read_json(&signatures)?;
            let signatures: Vec<InfluenceSignature> =
                serde_json::from_value(doc["signatures"].clone())?;
            let census: Census = serde_json::from_value(doc["census"].clone())?;
            let registry = match &ingest.codes {
                Some(p) => CodeRegistry::with_extras(&IngestConfig::from_file(p)?.extra_codes)?,
                None => CodeRegistry::builtin(),
            };
            report_stage(&patterns, &signatures, &census, &registry, &report, out)?;
        }
        Command::Simulate { config } => {
            let mut cfg = ScenarioConfig::from_file(&config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let (corpus, truth) = generate(&cfg)?;
            let judgments = simulate_judgments(&corpus, &cfg);
            write_corpus(&corpus, &truth, Some(&judgments), out)?;
        }
        Command::Pipeline {
            input,
            ingest,
            rate,
            mine,
            scan,
            report,
        } => {
            let corpus = load(&input.join(ANNOTATIONS_FILE), &ingest)?;
            let judgments = input.join(JUDGMENTS_FILE);
            let gold = if judgments.exists() {
                rate_stage(&judgments, &rate, out)?
            } else {
                load_gold(&input.join(GOLD_FILE))?
            };
            let corpus = merge_gold_ratings(&corpus, &gold)?;
            let patterns = mine_stage(&corpus, &mine, out)?;
            let edges = granger_stage(&corpus, &scan, out)?;
            let (signatures, census) = synth_stage(&edges, scan.alpha, out)?;
            report_stage(
                &patterns,
                &signatures,
                &census,
                &corpus.registry,
                &report,
                out,
            )?;
        }
    }
    Ok(())
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn load(path: &Path, ingest: &IngestArgs) -> Result<Corpus, Error> {
    let config = match &ingest.codes {
        Some(p) => IngestConfig::from_file(p)?,
        None => IngestConfig::default(),
    };
    load_corpus(path, &config)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, Error> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| io_err(&path, e))
}

fn write_json<T: serde::Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), Error> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&dir.join(name), e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

fn rate_stage(
    judgments: &Path,
    args: &RateArgs,
    out: &Path,
) -> Result<Vec<curio_core::GoldRating>, Error> {
    let outcome = run_rating_pipeline(
        &load_judgments(judgments)?,
        RatingOptions {
            tie_break: args.tie_break,
        },
    )?;
    write_gold_csv(&outcome.gold, create(out, GOLD_FILE)?)?;
    write_json(out, RELIABILITY_FILE, &outcome.report)?;
    info!("average ICC {:.3}", outcome.report.average_icc);
    Ok(outcome.gold)
}

fn mine_stage(corpus: &Corpus, args: &MineArgs, out: &Path) -> Result<Vec<PatternRecord>, Error> {
    let config = MineConfig {
        min_utility: args.min_utility,
        max_pattern_items: args.max_items,
        windows: WindowOptions {
            windowing: args.windowing,
            utility_source: args.utility_source,
        },
    };
    let results = mine_all_targets(corpus, &config)?;
    let records = pattern_records(&results, &corpus.registry);
    write_json(out, PATTERNS_FILE, &records)?;
    info!("{} patterns over {} targets", records.len(), results.len());
    Ok(records)
}

fn granger_stage(corpus: &Corpus, args: &ScanArgs, out: &Path) -> Result<Vec<GrangerEdge>, Error> {
    let options = ScanOptions {
        alpha: args.alpha,
        max_lag: args.max_lag,
        encoding: args.encoding,
        difference: args.difference,
        bonferroni: args.bonferroni,
    };
    let mut edges = Vec::new();
    for gid in corpus.groups.keys() {
        edges.extend(scan_group(corpus, gid, &options)?);
    }
    write_edges_csv(&edges, create(out, EDGES_FILE)?)?;
    info!("{} edges", edges.len());
    Ok(edges)
}

fn synth_stage(
    edges: &[GrangerEdge],
    alpha: f64,
    out: &Path,
) -> Result<(Vec<InfluenceSignature>, Census), Error> {
    let signatures = synthesize(edges, alpha);
    let census = influence_census(edges, alpha);
    write_json(
        out,
        SIGNATURES_FILE,
        &serde_json::json!({ "census": census, "signatures": signatures }),
    )?;
    Ok((signatures, census))
}

fn report_stage(
    patterns: &[PatternRecord],
    signatures: &[InfluenceSignature],
    census: &Census,
    registry: &CodeRegistry,
    args: &ReportArgs,
    out: &Path,
) -> Result<(), Error> {
    let text = render_report(patterns, signatures, census, registry, args.format)?;
    let name = format!("report.{}", args.format.extension());
    let mut w = create(out, &name)?;
    w.write_all(text.as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| io_err(&out.join(&name), e))
}
