use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};
use sgkit_core::codec::{Diagnostic, DiagnosticKind};
use sgkit_core::graph::validate_graph;
use sgkit_core::metrics::{
    aggregate, evaluate_sgdet, evaluate_soft_batch, evaluate_strict_batch, triplets_from_graph,
    CachingJudge, EvalMode, JudgeClient, MetricsReport, PrecisionDenominator, SynonymJudge,
};
use sgkit_core::prep::psg::{load_psg, PsgSplit};
use sgkit_core::prep::{
    corrupt_graph, filter_zero_relation, label_vocabulary, length_stats, length_stats_from_counts,
    parse_records, read_token_counts, thin_base_annot, CategoryComparison, DatasetSplit,
    GraphFormat, LengthMeasure, LengthStats, RawRecord, Record,
};
use sgkit_core::reward::score_batch;
use sgkit_core::{ParseOutcome, Schema, Vocabulary};

use crate::config::{load_weights, Config};
use crate::error::{CliError, CliResult};
use crate::judge_http::HttpJudge;
use crate::service;

#[derive(Debug, Parser)]
#[command(
    name = "sgkit",
    version,
    about = "Scene-graph conversion, reward scoring and evaluation"
)]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Default schema for records that do not name one.
    #[arg(long, global = true)]
    pub schema: Option<Schema>,
    /// IoU threshold for matching.
    #[arg(long, global = true)]
    pub iou: Option<f64>,
    /// Denominator guard for reward ratios.
    #[arg(long, global = true)]
    pub epsilon: Option<f64>,
    /// Print a 3-decimal table instead of JSON.
    #[arg(long, global = true)]
    pub table: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rewrite records between JSON and TOON graph bodies.
    Convert(ConvertArgs),
    /// Check records; exits 3 if any is invalid.
    Validate(ValidateArgs),
    /// Score completions against ground truth.
    Score(ScoreArgs),
    /// Object and relation precision, recall and F1.
    Eval(EvalArgs),
    /// Ranked-triplet P@K, R@K and F1@K.
    EvalSgdet(SgdetArgs),
    /// Drop records with no relations.
    FilterZeroRel(FilterArgs),
    /// Drop near-duplicate video frames.
    Thin(ThinArgs),
    /// JSON versus TOON length statistics.
    Stats(StatsArgs),
    /// Write perturbed copies of annotations.
    Corrupt(CorruptArgs),
    /// Import a PSG annotation file.
    ImportPsg(ImportPsgArgs),
    /// Run the reward-scoring service.
    Serve(ServeArgs),
    /// Print the effective configuration.
    ShowConfig,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    /// Expected input format; records in the other format are rejected.
    #[arg(long)]
    pub from: Option<GraphFormat>,
    #[arg(long)]
    pub to: GraphFormat,
    #[arg(long)]
    pub input: PathBuf,
    /// Defaults to standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Vocabulary JSON with `object_labels` and `predicates`.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Treat out-of-vocabulary labels as errors.
    #[arg(long, requires = "vocab")]
    pub closed: bool,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub completions: PathBuf,
    /// TOML file of reward weights; replaces the configured weights.
    #[arg(long)]
    pub weights: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Strict,
    Soft,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub gt: PathBuf,
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_enum, default_value = "strict")]
    pub mode: ModeArg,
    #[arg(long, conflicts_with = "judge_stub")]
    pub judge_endpoint: Option<String>,
    /// Synonym table JSON standing in for a judge.
    #[arg(long)]
    pub judge_stub: Option<PathBuf>,
    /// Leave failed samples out of the means.
    #[arg(long)]
    pub exclude_failed: bool,
    #[arg(long)]
    pub max_in_flight: Option<usize>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum DenominatorArg {
    Emitted,
    K,
}

#[derive(Debug, Args)]
pub struct SgdetArgs {
    #[arg(long)]
    pub gt: PathBuf,
    /// Predictions; relation order is rank order.
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub k: Option<Vec<i64>>,
    #[arg(long, value_enum)]
    pub precision_denominator: Option<DenominatorArg>,
}

#[derive(Debug, Args)]
pub struct FilterArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value = "json")]
    pub format: GraphFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ThinMethod {
    BaseAnnot,
}

#[derive(Debug, Args)]
pub struct ThinArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "base-annot")]
    pub method: ThinMethod,
    /// Compare category counts, not just category sets.
    #[arg(long)]
    pub multiset: bool,
    #[arg(long, default_value = "json")]
    pub format: GraphFormat,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Annotations; not needed with `--measure file`.
    #[arg(long, required_unless_present = "counts")]
    pub input: Option<PathBuf>,
    /// chars, bytes, ws, or file (read `--counts`).
    #[arg(long, default_value = "chars")]
    pub measure: String,
    /// JSONL of `{sample_id, json_tokens, toon_tokens}`.
    #[arg(long)]
    pub counts: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CorruptArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = "json")]
    pub format: GraphFormat,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SplitArg {
    Train,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct ImportPsgArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long, value_enum, default_value = "train")]
    pub split: SplitArg,
    #[arg(long, default_value = "json")]
    pub format: GraphFormat,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen on this address instead of standard input/output.
    #[arg(long)]
    pub tcp: Option<String>,
    #[arg(long)]
    pub workers: Option<usize>,
}

impl Cli {
    /// The configuration file with flag overrides applied, validated.
    pub fn effective_config(&self) -> CliResult<Config> {
        let mut c = Config::load(self.config.as_deref())?;
        if let Some(s) = self.schema {
            c.schema = s;
        }
        if let Some(t) = self.iou {
            c.matching.iou_threshold = t;
        }
        if let Some(e) = self.epsilon {
            c.matching.epsilon = e;
        }
        match &self.command {
            Command::Score(a) => {
                if let Some(p) = &a.weights {
                    c.weights = load_weights(p)?;
                }
            }
            Command::Eval(a) => {
                c.eval.exclude_failed |= a.exclude_failed;
                if let Some(n) = a.max_in_flight {
                    c.eval.max_in_flight = n;
                }
                if a.judge_endpoint.is_some() {
                    c.judge.endpoint.clone_from(&a.judge_endpoint);
                }
            }
            Command::EvalSgdet(a) => {
                if let Some(k) = &a.k {
                    c.eval.k.clone_from(k);
                }
                if let Some(d) = a.precision_denominator {
                    c.eval.precision_denominator = match d {
                        DenominatorArg::Emitted => PrecisionDenominator::Emitted,
                        DenominatorArg::K => PrecisionDenominator::K,
                    };
                }
            }
            Command::Serve(a) => {
                if let Some(w) = a.workers {
                    c.service.workers = w;
                }
            }
            _ => {}
        }
        c.validate()?;
        Ok(c)
    }
}

fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

fn read_raw(path: &Path) -> CliResult<Vec<RawRecord>> {
    parse_records(&read_text(path)?).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn write_records(path: &Path, records: &[Record<f64>], format: GraphFormat) -> CliResult<()> {
    let mut out = create(path)?;
    for r in records {
        writeln!(out, "{}", r.to_line(format)?).map_err(|e| CliError::io(path, e))?;
    }
    out.flush().map_err(|e| CliError::io(path, e))
}

fn load_split(path: &Path, schema: Schema) -> CliResult<DatasetSplit<f64>> {
    let name = path
        .file_stem()
        .map_or_else(String::new, |s| s.to_string_lossy().into_owned());
    DatasetSplit::from_raw(name, &read_raw(path)?, schema)
        .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

fn load_annotations(path: &Path, schema: Schema) -> CliResult<Vec<Record<f64>>> {
    read_raw(path)?
        .iter()
        .map(|r| {
            Record::from_raw(r, schema, false)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        })
        .collect()
}

/// Predictions keyed by sample id; unknown ids are an error.
fn load_predictions(
    path: &Path,
    schema: Schema,
    gt: &[Record<f64>],
) -> CliResult<HashMap<String, ParseOutcome>> {
    let known: HashMap<&str, ()> = gt.iter().map(|r| (r.sample_id.as_str(), ())).collect();
    let mut out = HashMap::new();
    for raw in read_raw(path)? {
        if !known.contains_key(raw.sample_id.as_str()) {
            return Err(CliError::Data(format!(
                "{}: prediction `{}` has no ground truth",
                path.display(),
                raw.sample_id
            )));
        }
        let outcome = raw
            .parse(schema)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
        if out.insert(raw.sample_id.clone(), outcome).is_some() {
            return Err(CliError::Data(format!(
                "{}: duplicate prediction `{}`",
                path.display(),
                raw.sample_id
            )));
        }
    }
    Ok(out)
}

fn emit(v: &Value) -> CliResult<()> {
    let mut out = io::stdout().lock();
    writeln!(
        out,
        "{}",
        serde_json::to_string_pretty(v).unwrap_or_default()
    )
    .map_err(|e| CliError::Io(e.to_string()))
}

fn emit_table(header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.len());
        }
    }
    let line = |cells: Vec<String>| {
        cells
            .iter()
            .zip(&widths)
            .map(|(c, w)| format!("{c:>w$}"))
            .collect::<Vec<_>>()
            .join("  ")
    };
    let mut out = io::stdout().lock();
    let mut text = line(header.iter().map(|s| s.to_string()).collect());
    for r in rows {
        text.push('\n');
        text.push_str(&line(r.clone()));
    }
    writeln!(out, "{text}").map_err(|e| CliError::Io(e.to_string()))
}

fn f3(x: f64) -> String {
    format!("{x:.3}")
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = cli.effective_config()?;
    match &cli.command {
        Command::Convert(a) => convert(a, &cfg),
        Command::Validate(a) => validate(a, &cfg),
        Command::Score(a) => score(a, &cfg, cli.table),
        Command::Eval(a) => eval(a, &cfg, cli.table),
        Command::EvalSgdet(a) => eval_sgdet(a, &cfg, cli.table),
        Command::FilterZeroRel(a) => filter(a, &cfg),
        Command::Thin(a) => thin(a, &cfg),
        Command::Stats(a) => stats(a, &cfg, cli.table),
        Command::Corrupt(a) => corrupt(a, &cfg),
        Command::ImportPsg(a) => import_psg(a),
        Command::Serve(a) => serve(a, &cfg),
        Command::ShowConfig => emit(&cfg.echo()),
    }
}

fn convert(a: &ConvertArgs, cfg: &Config) -> CliResult<()> {
    let input = File::open(&a.input).map_err(|e| CliError::io(&a.input, e))?;
    let mut sink: Box<dyn Write> = match &a.output {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let out_path = a
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from("<stdout>"));
    let at = |n: usize, e: &dyn std::fmt::Display| {
        CliError::Data(format!("{}:{n}: {e}", a.input.display()))
    };
    let mut convert_one = |n: usize, raw: RawRecord| -> CliResult<()> {
        let found = if raw.toon.is_some() {
            GraphFormat::Toon
        } else {
            GraphFormat::Json
        };
        if a.from.is_some_and(|f| f != found) {
            return Err(at(
                n,
                &format!("record `{}` is not {:?}", raw.sample_id, a.from.unwrap()),
            ));
        }
        let rec = Record::<f64>::from_raw(&raw, cfg.schema, false).map_err(|e| at(n, &e))?;
        writeln!(sink, "{}", rec.to_line(a.to)?).map_err(|e| CliError::io(&out_path, e))
    };
    let mut reader = BufReader::new(input);
    let mut first = String::new();
    reader
        .read_line(&mut first)
        .map_err(|e| CliError::io(&a.input, e))?;
    if first.trim_start().starts_with('[') {
        let mut rest = first;
        io::Read::read_to_string(&mut reader, &mut rest).map_err(|e| CliError::io(&a.input, e))?;
        for (n, raw) in parse_records(&rest)?.into_iter().enumerate() {
            convert_one(n + 1, raw)?;
        }
    } else {
        let lines = std::iter::once(Ok(first)).chain(reader.lines());
        for (n, line) in lines.enumerate() {
            let line = line.map_err(|e| CliError::io(&a.input, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: RawRecord = serde_json::from_str(&line).map_err(|e| at(n + 1, &e))?;
            convert_one(n + 1, raw)?;
        }
    }
    sink.flush().map_err(|e| CliError::io(&out_path, e))
}

fn validate(a: &ValidateArgs, cfg: &Config) -> CliResult<()> {
    let vocab: Option<Vocabulary> = match &a.vocab {
        Some(p) => Some(
            serde_json::from_str(&read_text(p)?)
                .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?,
        ),
        None => None,
    };
    let (mut total, mut invalid) = (0usize, 0usize);
    let mut err = io::stderr().lock();
    for path in &a.inputs {
        for raw in read_raw(path)? {
            total += 1;
            let mut problems: Vec<String> = Vec::new();
            match raw.parse::<f64>(cfg.schema) {
                Err(e) => problems.push(e.to_string()),
                Ok(outcome) => {
                    problems.extend(outcome.diagnostics.iter().map(Diagnostic::to_string));
                    if let (Some(g), Some(v)) = (&outcome.graph, &vocab) {
                        let report = validate_graph(g, Some(v), a.closed);
                        for viol in report.violations {
                            let s = viol.to_string();
                            if !problems.iter().any(|p| p.ends_with(&s)) {
                                problems.push(s);
                            }
                        }
                    }
                }
            }
            if !problems.is_empty() {
                invalid += 1;
                for p in problems {
                    let _ = writeln!(err, "{}: {}: {p}", path.display(), raw.sample_id);
                }
            }
        }
    }
    let _ = writeln!(err, "{total} records, {invalid} invalid");
    if invalid > 0 {
        return Err(CliError::Data(format!(
            "{invalid} of {total} records invalid"
        )));
    }
    Ok(())
}

const REWARD_COLUMNS: [&str; 10] = [
    "valid_mask",
    "format",
    "obj_cls",
    "obj_box",
    "rel_recall",
    "rel_precision",
    "rel_f1",
    "penalty_obj",
    "penalty_rel",
    "total",
];

fn score(a: &ScoreArgs, cfg: &Config, table: bool) -> CliResult<()> {
    let gt = load_annotations(&a.gt, cfg.schema)?;
    let by_id: HashMap<&str, &Record<f64>> = gt.iter().map(|r| (r.sample_id.as_str(), r)).collect();
    let mut items = Vec::new();
    for raw in read_raw(&a.completions)? {
        let Some(g) = by_id.get(raw.sample_id.as_str()) else {
            return Err(CliError::Data(format!(
                "completion `{}` has no ground truth",
                raw.sample_id
            )));
        };
        let Some(text) = raw.completion else {
            return Err(CliError::Data(format!(
                "record `{}` has no completion field",
                raw.sample_id
            )));
        };
        items.push((raw.sample_id, &g.graph, text));
    }
    if items.is_empty() {
        return Err(CliError::Data("no completions to score".into()));
    }
    let pairs: Vec<_> = items.iter().map(|(_, g, t)| (*g, t.as_str())).collect();
    let results = score_batch(&pairs, &cfg.weights, &cfg.matching);
    let mut rows = Vec::with_capacity(items.len());
    for ((id, _, _), r) in items.iter().zip(results) {
        let mut v = serde_json::to_value(r?).map_err(|e| CliError::Data(e.to_string()))?;
        v["sample_id"] = json!(id);
        rows.push(v);
    }
    let means: BTreeMap<&str, f64> = REWARD_COLUMNS
        .iter()
        .map(|&c| {
            (
                c,
                rows.iter()
                    .map(|r| r[c].as_f64().unwrap_or(0.0))
                    .sum::<f64>()
                    / rows.len() as f64,
            )
        })
        .collect();
    if table {
        let mut header = vec!["sample_id"];
        header.extend(REWARD_COLUMNS);
        let mut body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut cells = vec![r["sample_id"].as_str().unwrap_or_default().to_string()];
                cells.extend(
                    REWARD_COLUMNS
                        .iter()
                        .map(|c| f3(r[c].as_f64().unwrap_or(0.0))),
                );
                cells
            })
            .collect();
        let mut mean_row = vec!["mean".to_string()];
        mean_row.extend(REWARD_COLUMNS.iter().map(|c| f3(means[c])));
        body.push(mean_row);
        return emit_table(&header, &body);
    }
    emit(&json!({"config": cfg.echo(), "samples": rows.len(), "mean": means, "rows": rows}))
}

fn build_judge(a: &EvalArgs, cfg: &Config) -> CliResult<Box<dyn JudgeClient>> {
    if let Some(p) = &a.judge_stub {
        let j = SynonymJudge::from_json(&read_text(p)?)
            .map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
        return Ok(Box::new(j));
    }
    match &cfg.judge.endpoint {
        Some(url) => Ok(Box::new(HttpJudge::new(url, &cfg.judge))),
        None => Err(CliError::Usage(
            "soft evaluation needs --judge-endpoint or --judge-stub".into(),
        )),
    }
}

fn report_table(r: &MetricsReport<f64>) -> CliResult<()> {
    emit_table(
        &[
            "obj_p", "obj_r", "obj_f1", "rel_p", "rel_r", "rel_f1", "sgg", "fail_%",
        ],
        &[vec![
            f3(r.obj_p),
            f3(r.obj_r),
            f3(r.obj_f1),
            f3(r.rel_p),
            f3(r.rel_r),
            f3(r.rel_f1),
            f3(r.sgg_score),
            format!("{:.2}", 100.0 * r.failure_rate),
        ]],
    )
}

fn eval(a: &EvalArgs, cfg: &Config, table: bool) -> CliResult<()> {
    let gt = load_annotations(&a.gt, cfg.schema)?;
    let mut preds = load_predictions(&a.pred, cfg.schema, &gt)?;
    let outcomes: Vec<ParseOutcome> = gt
        .iter()
        .map(|r| {
            preds.remove(&r.sample_id).unwrap_or_else(|| {
                ParseOutcome::failure(Diagnostic::unpositioned(
                    DiagnosticKind::UnexpectedEnd,
                    "no prediction",
                ))
            })
        })
        .collect();
    let items: Vec<_> = gt.iter().map(|r| &r.graph).zip(&outcomes).collect();
    let (mode, results) = match a.mode {
        ModeArg::Strict => (
            EvalMode::Strict,
            evaluate_strict_batch(&items, &cfg.matching),
        ),
        ModeArg::Soft => {
            let judge = CachingJudge::new(build_judge(a, cfg)?);
            let r = evaluate_soft_batch(&items, &cfg.matching, &judge, cfg.eval.max_in_flight)?;
            log::info!("judge cache holds {} verdicts", judge.len());
            (EvalMode::Soft, r)
        }
    };
    let samples = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let report = aggregate(&samples, mode, cfg.eval.exclude_failed)?;
    if table {
        return report_table(&report);
    }
    emit(&json!({"config": cfg.echo(), "report": report}))
}

fn eval_sgdet(a: &SgdetArgs, cfg: &Config, table: bool) -> CliResult<()> {
    let gt = load_annotations(&a.gt, cfg.schema)?;
    let preds = load_predictions(&a.pred, cfg.schema, &gt)?;
    let ks = &cfg.eval.k;
    let mut sums = vec![[0.0f64; 3]; ks.len()];
    for r in &gt {
        let truth = triplets_from_graph(&r.graph);
        let ranked = preds
            .get(&r.sample_id)
            .and_then(ParseOutcome::valid_graph)
            .map(triplets_from_graph)
            .unwrap_or_default();
        for (s, at) in sums.iter_mut().zip(evaluate_sgdet(
            &truth,
            &ranked,
            ks,
            &cfg.matching,
            cfg.eval.precision_denominator,
        )?) {
            s[0] += at.precision;
            s[1] += at.recall;
            s[2] += at.f1;
        }
    }
    if gt.is_empty() {
        return Err(CliError::Data("no ground-truth samples".into()));
    }
    let n = gt.len() as f64;
    let per_k: Vec<Value> = ks
        .iter()
        .zip(&sums)
        .map(|(k, s)| json!({"k": k, "precision": s[0] / n, "recall": s[1] / n, "f1": s[2] / n}))
        .collect();
    if table {
        let rows = per_k
            .iter()
            .map(|v| {
                let mut row = vec![v["k"].to_string()];
                row.extend(
                    ["precision", "recall", "f1"]
                        .iter()
                        .map(|c| f3(v[c].as_f64().unwrap_or(0.0))),
                );
                row
            })
            .collect::<Vec<_>>();
        return emit_table(&["k", "p@k", "r@k", "f1@k"], &rows);
    }
    emit(&json!({"config": cfg.echo(), "samples": gt.len(), "per_k": per_k}))
}

fn filter(a: &FilterArgs, cfg: &Config) -> CliResult<()> {
    let (kept, stats) = filter_zero_relation(load_split(&a.input, cfg.schema)?);
    write_records(&a.output, &kept.records, a.format)?;
    emit(&serde_json::to_value(stats).unwrap_or_default())
}

fn thin(a: &ThinArgs, cfg: &Config) -> CliResult<()> {
    let split = load_split(&a.input, cfg.schema)?;
    let ThinMethod::BaseAnnot = a.method;
    let cmp = if a.multiset {
        CategoryComparison::Multiset
    } else {
        CategoryComparison::Set
    };
    let keep = thin_base_annot(&split.records, cmp);
    let kept: Vec<Record<f64>> = keep.iter().map(|&i| split.records[i].clone()).collect();
    write_records(&a.output, &kept, a.format)?;
    emit(&json!({"before": split.len(), "kept": kept.len(), "removed": split.len() - kept.len()}))
}

fn stats(a: &StatsArgs, cfg: &Config, table: bool) -> CliResult<()> {
    let s: LengthStats = if a.measure == "file" || a.counts.is_some() {
        let Some(p) = &a.counts else {
            return Err(CliError::Usage("--measure file needs --counts FILE".into()));
        };
        length_stats_from_counts(&read_token_counts(&read_text(p)?)?)?
    } else {
        let measure: LengthMeasure = a.measure.parse()?;
        let Some(p) = &a.input else {
            return Err(CliError::Usage("--input is required".into()));
        };
        let recs = load_annotations(p, cfg.schema)?;
        length_stats(recs.iter().map(|r| &r.graph), measure)?
    };
    if table {
        let row = |name: &str, x: &sgkit_core::prep::Summary| {
            vec![
                name.to_string(),
                f3(x.min),
                f3(x.mean),
                f3(x.median),
                f3(x.max),
            ]
        };
        return emit_table(
            &["", "min", "mean", "median", "max"],
            &[
                row("json", &s.json),
                row("toon", &s.toon),
                row("change_%", &s.change_pct),
            ],
        );
    }
    emit(&serde_json::to_value(&s).unwrap_or_default())
}

fn corrupt(a: &CorruptArgs, cfg: &Config) -> CliResult<()> {
    let recs = load_annotations(&a.input, cfg.schema)?;
    let vocab = label_vocabulary(recs.iter().map(|r| &r.graph));
    let out = recs
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let graph = corrupt_graph(
                &r.graph,
                &cfg.corruption,
                &vocab,
                a.seed.wrapping_add(i as u64),
            )?;
            Ok(Record { graph, ..r.clone() })
        })
        .collect::<CliResult<Vec<_>>>()?;
    write_records(&a.output, &out, a.format)
}

fn import_psg(a: &ImportPsgArgs) -> CliResult<()> {
    let split = match a.split {
        SplitArg::Train => PsgSplit::Train,
        SplitArg::Test => PsgSplit::Test,
        SplitArg::All => PsgSplit::All,
    };
    let recs = load_psg(&read_text(&a.input)?, split)?;
    write_records(&a.output, &recs, a.format)?;
    emit(&json!({"records": recs.len()}))
}

fn serve(a: &ServeArgs, cfg: &Config) -> CliResult<()> {
    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| CliError::Io(format!("runtime: {e}")))?;
    let result = match &a.tcp {
        Some(addr) => rt
            .block_on(service::run_tcp(addr, cfg))
            .map_err(|e| CliError::Io(format!("{addr}: {e}"))),
        None => rt
            .block_on(service::run_stdio(cfg))
            .map_err(|e| CliError::Io(e.to_string())),
    };
    rt.shutdown_timeout(std::time::Duration::from_secs(1));
    result
}
