//! Command-line driver.
//!
//! Every command writes its report to stdout in one piece after all work is
//! done; warnings and errors go to stderr. Exit status is 0 on success, 1 when
//! the data is at fault and 2 for usage errors.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::avm::{validate_corpus, Corpus};
use crate::costs::{cost_table, CostMeasure};
use crate::error::{Error, Result};
use crate::io::{load_function, load_inputs, load_pool, Input};
use crate::kappa::{
    attribute_kappas, average_attribute_kappa, build_confusion, kappa, p_agreement,
    restrict_to_attribute, ConfusionMatrix, ScopeFilter,
};
use crate::performance::{
    compare_groups, estimate_function, evaluate_member, evaluate_unit, subdialogue_units,
    units_from_corpus, CostGranularity, GroupComparison, Grouping, NormalizationPool,
    PerformanceFunction, Unit, DEFAULT_THRESHOLD, KAPPA,
};
use crate::report::{fmt_num, round_json, table, Report};
use crate::segment::derive_structure;
use crate::stats::{mean, norm_params, pearson_r};

#[derive(Debug, Parser)]
#[command(
    name = "dialogue-eval",
    version,
    about = "Task success, cost and performance measures for dialogue agents"
)]
pub struct Cli {
    /// Print numbers at full precision instead of 3 decimals.
    #[arg(long, global = true)]
    pub precise: bool,

    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupBy {
    User,
    Dialogue,
}

impl From<GroupBy> for Grouping {
    fn from(g: GroupBy) -> Self {
        match g {
            GroupBy::User => Grouping::PerUser,
            GroupBy::Dialogue => Grouping::PerDialogue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CompareBy {
    Agent,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Granularity {
    PerSegment,
    PerStrategy,
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// Corpus or unit-table JSON file; repeat to merge several.
    #[arg(long = "corpus", required = true, value_name = "FILE")]
    pub corpus: Vec<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MeasureArgs {
    /// Cost measures, NAME[=utterances|events:KIND|annotation:KEY]; comma separated or repeated.
    #[arg(
        long = "measures",
        alias = "measure",
        value_delimiter = ',',
        value_name = "SPEC"
    )]
    pub measures: Vec<String>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Unit of analysis when estimating from a corpus.
    #[arg(long, value_enum, default_value = "user")]
    pub group_by: GroupBy,

    /// Predictors with p at or above this are pruned before the final fit.
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    pub threshold: f64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a corpus against its schema and scenario keys.
    Validate(InputArgs),
    /// Show the segment tree derived from utterance tags.
    Segment {
        #[command(flatten)]
        input: InputArgs,
        /// Only these dialogues.
        #[arg(long = "dialogue")]
        dialogues: Vec<String>,
    },
    /// Confusion matrix and κ over a scope.
    Kappa {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long = "agent")]
        agents: Vec<String>,
        #[arg(long = "user")]
        users: Vec<String>,
        #[arg(long = "scenario")]
        scenarios: Vec<String>,
        #[arg(long = "dialogue")]
        dialogues: Vec<String>,
        /// Only observations of these attributes (name or abbreviation).
        #[arg(long = "attribute")]
        attributes: Vec<String>,
    },
    /// Per-dialogue cost table.
    Costs {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        measures: MeasureArgs,
    },
    /// Fit a performance function against user satisfaction (JSON at full precision).
    Estimate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        measures: MeasureArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Apply a saved performance function to units or subdialogue strategies.
    Evaluate {
        #[command(flatten)]
        input: InputArgs,
        /// Performance function JSON written by `estimate`.
        #[arg(long, value_name = "FILE")]
        function: PathBuf,
        #[command(flatten)]
        measures: MeasureArgs,
        #[arg(long, value_enum, default_value = "user")]
        group_by: GroupBy,
        /// Normalization pool JSON; with --subdialogue it is layered over the computed pool.
        #[arg(long, value_name = "FILE")]
        pool: Option<PathBuf>,
        /// Score subdialogues about these attributes instead of whole units.
        #[arg(long, value_delimiter = ',', value_name = "ATTRS")]
        subdialogue: Vec<String>,
        /// AGENT=LABEL; agents sharing a label form one strategy.
        #[arg(long = "strategy", value_name = "AGENT=LABEL")]
        strategies: Vec<String>,
        #[arg(long, value_enum, default_value = "per-segment")]
        cost_granularity: Granularity,
    },
    /// Compare the performance of two groups with a pooled t-test.
    Compare {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long, value_enum, default_value = "agent")]
        by: CompareBy,
        /// Saved function; estimated from the input when absent.
        #[arg(long, value_name = "FILE")]
        function: Option<PathBuf>,
        /// The two groups to compare, when the input has more.
        #[arg(long, value_delimiter = ',', value_name = "A,B")]
        groups: Vec<String>,
        #[command(flatten)]
        measures: MeasureArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
    /// Full pipeline: validation, κ, costs, estimation and comparison.
    Report {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        measures: MeasureArgs,
        #[command(flatten)]
        model: ModelArgs,
    },
}

/// What a command produced: report text for stdout and an optional error that
/// still sets the exit status after the report is written.
#[derive(Debug)]
pub struct Outcome {
    pub stdout: String,
    pub error: Option<Error>,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome {
            stdout,
            error: None,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match &self.error {
            None => 0,
            Some(e) if e.is_usage() => 2,
            Some(_) => 1,
        }
    }
}

struct StderrLogger;

impl log::Log for StderrLogger {
    fn enabled(&self, metadata: &log::Metadata) -> bool {
        metadata.level() <= log::max_level()
    }

    fn log(&self, record: &log::Record) {
        if self.enabled(record.metadata()) {
            eprintln!(
                "{}: {}",
                record.level().as_str().to_lowercase(),
                record.args()
            );
        }
    }

    fn flush(&self) {}
}

static LOGGER: StderrLogger = StderrLogger;

/// Parses arguments, runs the command, prints, and returns the exit status.
pub fn main_with_args<I: IntoIterator<Item = OsString>>(args: I) -> i32 {
    if log::set_logger(&LOGGER).is_ok() {
        log::set_max_level(log::LevelFilter::Warn);
    }
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let outcome = run(&cli);
    let mut stdout = std::io::stdout().lock();
    if stdout
        .write_all(outcome.stdout.as_bytes())
        .and_then(|_| stdout.flush())
        .is_err()
    {
        return 1;
    }
    if let Some(e) = &outcome.error {
        eprintln!("error: {e}");
    }
    outcome.exit_code()
}

pub fn run(cli: &Cli) -> Outcome {
    let fmt = |default: Format, allowed: &[Format]| -> Result<Format> {
        let f = cli.format.unwrap_or(default);
        if allowed.contains(&f) {
            Ok(f)
        } else {
            Err(Error::usage(
                format!("format {f:?} is not available for this command").to_lowercase(),
            ))
        }
    };
    let p = cli.precise;
    let result = match &cli.command {
        Command::Validate(input) => {
            return match fmt(Format::Text, &[Format::Text, Format::Json])
                .and_then(|f| validate(input, f, p))
            {
                Ok(o) => o,
                Err(e) => Outcome {
                    stdout: String::new(),
                    error: Some(e),
                },
            }
        }
        Command::Segment { input, dialogues } => fmt(Format::Text, &[Format::Text, Format::Json])
            .and_then(|f| segment(input, dialogues, f)),
        Command::Kappa {
            input,
            agents,
            users,
            scenarios,
            dialogues,
            attributes,
        } => fmt(Format::Text, &[Format::Text, Format::Json, Format::Csv]).and_then(|f| {
            let scope = ScopeFilter::all()
                .agents(agents)
                .users(users)
                .scenarios(scenarios)
                .dialogues(dialogues)
                .attributes(attributes);
            kappa_cmd(input, &scope, f, p)
        }),
        Command::Costs { input, measures } => {
            fmt(Format::Csv, &[Format::Text, Format::Csv, Format::Json])
                .and_then(|f| costs(input, measures, f, p))
        }
        Command::Estimate {
            input,
            measures,
            model,
        } => fmt(Format::Json, &[Format::Json, Format::Text])
            .and_then(|f| estimate(input, measures, model, f, p)),
        Command::Evaluate {
            input,
            function,
            measures,
            group_by,
            pool,
            subdialogue,
            strategies,
            cost_granularity,
        } => fmt(Format::Text, &[Format::Text, Format::Json, Format::Csv]).and_then(|f| {
            let req = EvaluateRequest {
                function,
                measures,
                group_by: *group_by,
                pool: pool.as_ref(),
                subdialogue,
                strategies,
                granularity: match cost_granularity {
                    Granularity::PerSegment => CostGranularity::PerSegment,
                    Granularity::PerStrategy => CostGranularity::PerStrategy,
                },
            };
            evaluate_cmd(input, &req, f, p)
        }),
        Command::Compare {
            input,
            by: CompareBy::Agent,
            function,
            groups,
            measures,
            model,
        } => fmt(Format::Text, &[Format::Text, Format::Json])
            .and_then(|f| compare(input, function.as_ref(), groups, measures, model, f, p)),
        Command::Report {
            input,
            measures,
            model,
        } => fmt(Format::Text, &[Format::Text]).and_then(|_| report(input, measures, model, p)),
    };
    match result {
        Ok(s) => Outcome::ok(s),
        Err(e) => Outcome {
            stdout: String::new(),
            error: Some(e),
        },
    }
}

fn json_out<T: Serialize>(value: &T, precise: bool) -> Result<String> {
    let mut s = if precise {
        serde_json::to_string_pretty(value)?
    } else {
        let mut v = serde_json::to_value(value)?;
        round_json(&mut v);
        serde_json::to_string_pretty(&v)?
    };
    s.push('\n');
    Ok(s)
}

fn load_corpus_input(input: &InputArgs) -> Result<Corpus> {
    match load_inputs(&input.corpus)? {
        Input::Corpus(c) => Ok(c),
        Input::Units(_) => Err(Error::usage(
            "this command needs an annotated corpus, not a unit table",
        )),
    }
}

fn parse_measures(args: &MeasureArgs, default: &[&str]) -> Result<Vec<CostMeasure>> {
    let specs: Vec<&str> = if args.measures.is_empty() {
        default.to_vec()
    } else {
        args.measures.iter().map(String::as_str).collect()
    };
    specs
        .iter()
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.parse())
        .collect()
}

fn validate(input: &InputArgs, f: Format, precise: bool) -> Result<Outcome> {
    let corpus = load_corpus_input(input)?;
    let report = validate_corpus(&corpus);
    let count = report.violations.len();
    let stdout = if f == Format::Json {
        json_out(
            &json!({
                "dialogues": corpus.dialogues.len(),
                "scenarios": corpus.scenarios.len(),
                "agents": corpus.agents(),
                "violations": report.violations,
            }),
            precise,
        )?
    } else {
        let mut r = Report::new(precise);
        r.line(format!(
            "{} dialogues, {} scenarios, {} agents",
            corpus.dialogues.len(),
            corpus.scenarios.len(),
            corpus.agents().len()
        ));
        if count == 0 {
            r.line("valid");
        } else {
            r.line(format!("{count} violations"));
            for v in &report.violations {
                r.line(format!("  {v}"));
            }
        }
        r.finish()
    };
    let error = (count > 0).then(|| Error::invalid(format!("corpus has {count} violations")));
    Ok(Outcome { stdout, error })
}

fn segment(input: &InputArgs, only: &[String], f: Format) -> Result<String> {
    let corpus = load_corpus_input(input)?;
    for id in only {
        if corpus.dialogue(id).is_none() {
            return Err(Error::usage(format!("no dialogue {id:?}")));
        }
    }
    let selected: Vec<_> = corpus
        .dialogues
        .iter()
        .filter(|d| only.is_empty() || only.contains(&d.id))
        .collect();
    let trees = selected
        .iter()
        .map(|d| derive_structure(&corpus.schema, d))
        .collect::<Result<Vec<_>>>()?;
    if f == Format::Json {
        let docs: Vec<Value> = selected
            .iter()
            .zip(&trees)
            .map(|(d, t)| json!({"dialogue": d.id, "root": t}))
            .collect();
        return json_out(&docs, true);
    }
    let mut r = Report::new(false);
    for (d, t) in selected.iter().zip(&trees) {
        r.section(&format!("dialogue {}", d.id));
        r.block(&t.render(&corpus.schema));
    }
    Ok(r.finish())
}

#[derive(Serialize)]
struct KappaSummary {
    t: u64,
    p_a: f64,
    p_e: f64,
    kappa: f64,
}

/// One row per attribute with observations in scope; a degenerate attribute is
/// reported as undefined without hiding the others.
fn attribute_lines(m: &ConfusionMatrix, r: &mut Report) {
    let mut rows = Vec::new();
    let mut defined = Vec::new();
    for b in m
        .attribute_blocks
        .iter()
        .filter(|b| b.labels.clone().any(|c| m.column_sum(c) > 0))
    {
        let sub = match restrict_to_attribute(m, &b.name) {
            Ok(sub) => sub,
            Err(_) => continue,
        };
        match kappa(&sub) {
            Ok(k) => {
                defined.push(k.kappa);
                rows.push(vec![
                    b.name.clone(),
                    k.t_total.to_string(),
                    r.n(k.p_a),
                    r.n(k.p_e),
                    r.n(k.kappa),
                ]);
            }
            Err(Error::DegenerateChance { .. }) => rows.push(vec![
                b.name.clone(),
                sub.total().to_string(),
                p_agreement(&sub)
                    .map(|x| r.n(x))
                    .unwrap_or_else(|_| "-".into()),
                r.n(1.0),
                "undefined".into(),
            ]),
            Err(_) => rows.push(vec![
                b.name.clone(),
                "0".into(),
                "-".into(),
                "-".into(),
                "undefined".into(),
            ]),
        }
    }
    if rows.is_empty() {
        return;
    }
    r.block(&table(&["attribute", "T", "P(A)", "P(E)", "kappa"], &rows));
    if defined.len() == rows.len() {
        r.num("average attribute kappa", mean(&defined));
    } else {
        r.kv("average attribute kappa", "undefined");
    }
}

fn kappa_cmd(input: &InputArgs, scope: &ScopeFilter, f: Format, precise: bool) -> Result<String> {
    let corpus = load_corpus_input(input)?;
    let m = build_confusion(&corpus, scope)?;
    if f == Format::Csv {
        return m.to_csv();
    }
    let k = kappa(&m)?;
    if f == Format::Json {
        let per: Vec<Value> = match attribute_kappas(&m) {
            Ok(per) => per
                .iter()
                .map(|(name, k)| json!({"attribute": name, "t": k.t_total, "p_a": k.p_a, "p_e": k.p_e, "kappa": k.kappa}))
                .collect(),
            Err(_) => Vec::new(),
        };
        return json_out(
            &json!({
                "kappa": KappaSummary { t: k.t_total, p_a: k.p_a, p_e: k.p_e, kappa: k.kappa },
                "per_attribute": per,
                "average_attribute_kappa": average_attribute_kappa(&m).ok(),
                "matrix": {"labels": m.labels, "counts": m.counts, "unresolved": m.unresolved},
            }),
            precise,
        );
    }
    let mut r = Report::new(precise);
    r.kv("T", k.t_total.to_string());
    r.num("P(A)", k.p_a);
    r.num("P(E)", k.p_e);
    r.num("kappa", k.kappa);
    r.line("");
    attribute_lines(&m, &mut r);
    Ok(r.finish())
}

fn costs(input: &InputArgs, measures: &MeasureArgs, f: Format, precise: bool) -> Result<String> {
    let corpus = load_corpus_input(input)?;
    let measures = parse_measures(measures, &["utt", "rep"])?;
    let t = cost_table(&corpus, &measures)?;
    match f {
        Format::Json => json_out(&json!({"measures": measures, "rows": t.rows}), precise),
        Format::Csv => t.to_csv(precise),
        Format::Text => {
            let mut header = vec!["dialogue", "agent", "user"];
            header.extend(t.measures.iter().map(String::as_str));
            let rows: Vec<Vec<String>> = t
                .rows
                .iter()
                .map(|row| {
                    let mut cells = vec![row.dialogue.clone(), row.agent.clone(), row.user.clone()];
                    cells.extend(t.measures.iter().map(|m| fmt_num(row.values[m], precise)));
                    cells
                })
                .collect();
            Ok(table(&header, &rows))
        }
    }
}

/// Units plus the measure definitions they were computed with (empty for unit tables).
fn load_units(
    input: &InputArgs,
    measures: &MeasureArgs,
    grouping: Grouping,
) -> Result<(Vec<Unit>, Vec<CostMeasure>)> {
    match load_inputs(&input.corpus)? {
        Input::Corpus(c) => {
            let ms = parse_measures(measures, &["utt", "rep"])?;
            Ok((units_from_corpus(&c, &ms, grouping)?, ms))
        }
        Input::Units(units) => {
            let ms = parse_measures(measures, &[])?;
            Ok((units, ms))
        }
    }
}

fn cost_names(units: &[Unit], measures: &[CostMeasure]) -> Vec<String> {
    if !measures.is_empty() {
        return measures.iter().map(|m| m.name.clone()).collect();
    }
    let names: BTreeSet<&String> = units.iter().flat_map(|u| u.costs.keys()).collect();
    names.into_iter().cloned().collect()
}

fn estimate_units(
    units: &[Unit],
    measures: &[CostMeasure],
    model: &ModelArgs,
) -> Result<PerformanceFunction> {
    let mut pf = estimate_function(units, &cost_names(units, measures), model.threshold)?;
    pf.measures = measures.to_vec();
    Ok(pf)
}

fn function_lines(pf: &PerformanceFunction, r: &mut Report) {
    let mut terms = vec![format!("{} N(kappa)", r.n(pf.alpha))];
    terms.extend(
        pf.cost_weights
            .iter()
            .map(|(k, w)| format!("- {} N({k})", r.n(*w))),
    );
    r.kv("performance", terms.join(" "));
    if let Some(prov) = &pf.provenance {
        r.kv("units", prov.n.to_string());
        r.line("full model:");
        let rows: Vec<Vec<String>> = prov
            .full_model
            .iter()
            .map(|s| {
                vec![
                    s.name.clone(),
                    r.n(s.coefficient),
                    r.n(s.std_error),
                    r.n(s.t),
                    r.n(s.p),
                ]
            })
            .collect();
        r.block(&table(&["predictor", "beta", "se", "t", "p"], &rows));
        r.num("R^2", prov.r_squared);
        r.kv(
            "pruned",
            if prov.pruned.is_empty() {
                "none".into()
            } else {
                prov.pruned.join(", ")
            },
        );
        r.line(format!("final model (p < {}):", prov.threshold));
        let rows: Vec<Vec<String>> = prov
            .final_model
            .iter()
            .map(|s| {
                vec![
                    s.name.clone(),
                    r.n(s.coefficient),
                    r.n(s.std_error),
                    r.n(s.t),
                    r.n(s.p),
                ]
            })
            .collect();
        r.block(&table(&["predictor", "beta", "se", "t", "p"], &rows));
        r.num("R^2", prov.final_r_squared);
        r.kv("residual df", prov.df_residual.to_string());
    }
}

fn estimate(
    input: &InputArgs,
    measures: &MeasureArgs,
    model: &ModelArgs,
    f: Format,
    precise: bool,
) -> Result<String> {
    let (units, ms) = load_units(input, measures, model.group_by.into())?;
    let pf = estimate_units(&units, &ms, model)?;
    if f == Format::Json {
        // a data artifact for `evaluate`, so never rounded
        return json_out(&pf, true);
    }
    let mut r = Report::new(precise);
    function_lines(&pf, &mut r);
    Ok(r.finish())
}

struct EvaluateRequest<'a> {
    function: &'a PathBuf,
    measures: &'a MeasureArgs,
    group_by: GroupBy,
    pool: Option<&'a PathBuf>,
    subdialogue: &'a [String],
    strategies: &'a [String],
    granularity: CostGranularity,
}

/// Measures for recomputing a function's costs: explicit ones, the function's
/// own definitions, or the default reading of its cost names.
fn function_measures(pf: &PerformanceFunction, args: &MeasureArgs) -> Result<Vec<CostMeasure>> {
    if !args.measures.is_empty() {
        return parse_measures(args, &[]);
    }
    pf.weighted_measures()
        .or_else(|_| pf.cost_weights.keys().map(|n| n.parse()).collect())
}

fn strategy_map(specs: &[String]) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for s in specs {
        let (agent, label) = s
            .split_once('=')
            .filter(|(a, l)| !a.trim().is_empty() && !l.trim().is_empty())
            .ok_or_else(|| Error::usage(format!("bad strategy {s:?}, expected AGENT=LABEL")))?;
        if out
            .insert(agent.trim().to_string(), label.trim().to_string())
            .is_some()
        {
            return Err(Error::usage(format!("agent {agent} given two strategies")));
        }
    }
    Ok(out)
}

fn evaluate_cmd(
    input: &InputArgs,
    req: &EvaluateRequest,
    f: Format,
    precise: bool,
) -> Result<String> {
    let pf = load_function(req.function)?;
    let given_pool = req.pool.map(|p| load_pool(p)).transpose()?;

    let (pool, members) = if !req.subdialogue.is_empty() {
        let corpus = load_corpus_input(input)?;
        let attrs = req
            .subdialogue
            .iter()
            .map(|a| corpus.schema.require_attribute(a))
            .collect::<Result<BTreeSet<usize>>>()?;
        let labels = strategy_map(req.strategies)?;
        let measures = function_measures(&pf, req.measures)?;
        let mut pool = subdialogue_units(&corpus, &attrs, &labels, &measures, req.granularity)?;
        if let Some(g) = &given_pool {
            pool = pool.overlay(g);
        }
        let members = pool.members.clone();
        (pool, members)
    } else if let Some(pool) = given_pool {
        let members = pool.members.clone();
        (pool, members)
    } else {
        let measures = function_measures(&pf, req.measures)?;
        let units = match load_inputs(&input.corpus)? {
            Input::Corpus(c) => units_from_corpus(&c, &measures, req.group_by.into())?,
            Input::Units(u) => u,
        };
        let pool = pf.estimation_pool();
        let rows = units
            .iter()
            .map(|u| Ok((u.id.clone(), u.group.clone(), evaluate_unit(&pf, u, &pool)?)))
            .collect::<Result<Vec<_>>>()?;
        return unit_scores(&pool, &rows, f, precise);
    };

    let scored = members
        .iter()
        .map(|m| Ok((m, evaluate_member(&pf, m, &pool)?)))
        .collect::<Result<Vec<_>>>()?;
    let costs: Vec<&String> = pf.cost_weights.keys().collect();
    match f {
        Format::Json => json_out(
            &json!({
                "pool": pool,
                "performance": scored.iter().map(|(m, v)| json!({"scope": m.scope, "performance": v})).collect::<Vec<_>>(),
            }),
            precise,
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["scope", "performance"])?;
            for (m, v) in &scored {
                w.write_record([m.scope.clone(), fmt_num(*v, precise)])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Text => {
            let mut r = Report::new(precise);
            r.kv("pool", &pool.pool_id);
            if let Some(k) = pool.kappa_norm {
                r.kv(
                    "kappa pool",
                    format!("mean {} std {}", r.n(k.mean), r.n(k.std)),
                );
            }
            for (name, p) in &pool.cost_norms {
                r.kv(
                    &format!("{name} pool"),
                    format!("mean {} std {}", r.n(p.mean), r.n(p.std)),
                );
            }
            let mut header = vec!["scope".to_string(), "kappa".into(), "N(kappa)".into()];
            for c in &costs {
                header.push(c.to_string());
                header.push(format!("N({c})"));
            }
            header.push("performance".into());
            let na = || "-".to_string();
            let rows: Vec<Vec<String>> = scored
                .iter()
                .map(|(m, v)| {
                    let mut row = vec![m.scope.clone()];
                    row.push(m.kappa.map(|k| r.n(k)).unwrap_or_else(na));
                    row.push(
                        m.kappa
                            .zip(pool.kappa_norm)
                            .map(|(k, p)| r.n(p.z(k)))
                            .unwrap_or_else(na),
                    );
                    for c in &costs {
                        let val = m.costs.get(*c).copied();
                        row.push(val.map(|x| r.n(x)).unwrap_or_else(na));
                        row.push(
                            val.zip(pool.cost_norms.get(*c))
                                .map(|(x, p)| r.n(p.z(x)))
                                .unwrap_or_else(na),
                        );
                    }
                    row.push(r.n(*v));
                    row
                })
                .collect();
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            r.block(&table(&header, &rows));
            Ok(r.finish())
        }
    }
}

fn unit_scores(
    pool: &NormalizationPool,
    rows: &[(String, String, f64)],
    f: Format,
    precise: bool,
) -> Result<String> {
    let mut groups: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for (_, g, v) in rows {
        groups.entry(g.as_str()).or_default().push(*v);
    }
    match f {
        Format::Json => json_out(
            &json!({
                "pool": pool.pool_id,
                "units": rows.iter().map(|(id, g, v)| json!({"id": id, "group": g, "performance": v})).collect::<Vec<_>>(),
                "group_means": groups.iter().map(|(g, v)| (g.to_string(), mean(v))).collect::<BTreeMap<_, _>>(),
            }),
            precise,
        ),
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["unit", "group", "performance"])?;
            for (id, g, v) in rows {
                w.write_record([id.clone(), g.clone(), fmt_num(*v, precise)])?;
            }
            let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
        }
        Format::Text => {
            let mut r = Report::new(precise);
            r.kv("pool", &pool.pool_id);
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|(id, g, v)| vec![id.clone(), g.clone(), r.n(*v)])
                .collect();
            r.block(&table(&["unit", "group", "performance"], &body));
            r.line("");
            let means: Vec<Vec<String>> = groups
                .iter()
                .map(|(g, v)| vec![g.to_string(), v.len().to_string(), r.n(mean(v))])
                .collect();
            r.block(&table(&["group", "n", "mean"], &means));
            Ok(r.finish())
        }
    }
}

/// The two groups to compare, in the order given or sorted.
fn split_groups(
    units: &[Unit],
    wanted: &[String],
) -> Result<(String, String, Vec<Unit>, Vec<Unit>)> {
    let present: BTreeSet<&str> = units.iter().map(|u| u.group.as_str()).collect();
    let (a, b) = match wanted {
        [] if present.len() == 2 => {
            let mut it = present.iter();
            (
                it.next().unwrap().to_string(),
                it.next().unwrap().to_string(),
            )
        }
        [] => {
            return Err(Error::usage(format!(
                "input has {} groups ({}); pick two with --groups",
                present.len(),
                present.iter().copied().collect::<Vec<_>>().join(", ")
            )))
        }
        [a, b] if a != b => (a.clone(), b.clone()),
        _ => return Err(Error::usage("--groups takes two distinct group names")),
    };
    let pick = |g: &str| -> Result<Vec<Unit>> {
        let v: Vec<Unit> = units.iter().filter(|u| u.group == g).cloned().collect();
        if v.is_empty() {
            return Err(Error::usage(format!("no units in group {g:?}")));
        }
        Ok(v)
    };
    let (ga, gb) = (pick(&a)?, pick(&b)?);
    Ok((a, b, ga, gb))
}

fn comparison_lines(
    pf: &PerformanceFunction,
    names: (&str, &str),
    c: &GroupComparison,
    r: &mut Report,
) {
    let mut terms = vec![format!("{} N(kappa)", r.n(pf.alpha))];
    terms.extend(
        pf.cost_weights
            .iter()
            .map(|(k, w)| format!("- {} N({k})", r.n(*w))),
    );
    r.kv("performance", terms.join(" "));
    let rows = vec![
        vec![
            names.0.to_string(),
            c.performance_a.len().to_string(),
            r.n(c.mean_a),
        ],
        vec![
            names.1.to_string(),
            c.performance_b.len().to_string(),
            r.n(c.mean_b),
        ],
    ];
    r.block(&table(&["group", "n", "mean performance"], &rows));
    r.num("t", c.t);
    r.kv("df", c.df.to_string());
    r.num("p (two-sided)", c.p);
}

fn compare(
    input: &InputArgs,
    function: Option<&PathBuf>,
    groups: &[String],
    measures: &MeasureArgs,
    model: &ModelArgs,
    f: Format,
    precise: bool,
) -> Result<String> {
    let pf_saved = function.map(|p| load_function(p)).transpose()?;
    let (units, ms) = match (&pf_saved, load_inputs(&input.corpus)?) {
        (_, Input::Units(u)) => (u, parse_measures(measures, &[])?),
        (Some(pf), Input::Corpus(c)) => {
            let ms = function_measures(pf, measures)?;
            (units_from_corpus(&c, &ms, model.group_by.into())?, ms)
        }
        (None, Input::Corpus(c)) => {
            let ms = parse_measures(measures, &["utt", "rep"])?;
            (units_from_corpus(&c, &ms, model.group_by.into())?, ms)
        }
    };
    let pf = match pf_saved {
        Some(pf) => pf,
        None => estimate_units(&units, &ms, model)?,
    };
    let (a, b, ga, gb) = split_groups(&units, groups)?;
    let c = compare_groups(&pf, &ga, &gb, &pf.estimation_pool())?;
    if f == Format::Json {
        return json_out(
            &json!({"group_a": a, "group_b": b, "comparison": c}),
            precise,
        );
    }
    let mut r = Report::new(precise);
    comparison_lines(&pf, (&a, &b), &c, &mut r);
    Ok(r.finish())
}

fn report(
    input: &InputArgs,
    measures: &MeasureArgs,
    model: &ModelArgs,
    precise: bool,
) -> Result<String> {
    let mut r = Report::new(precise);
    let (units, ms) = match load_inputs(&input.corpus)? {
        Input::Corpus(corpus) => {
            let ms = parse_measures(measures, &["utt", "rep"])?;
            corpus_sections(&corpus, &ms, &mut r)?;
            let rated = corpus
                .dialogues
                .iter()
                .filter(|d| d.satisfaction.is_some())
                .count();
            if rated < corpus.dialogues.len() || rated == 0 {
                r.section("performance function");
                r.kv(
                    "not estimated",
                    format!(
                        "{rated} of {} dialogues have a satisfaction rating",
                        corpus.dialogues.len()
                    ),
                );
                return Ok(r.finish());
            }
            match units_from_corpus(&corpus, &ms, model.group_by.into()) {
                Ok(u) => (u, ms),
                Err(e) => {
                    r.section("performance function");
                    r.kv("not estimated", e.to_string());
                    return Ok(r.finish());
                }
            }
        }
        Input::Units(u) => {
            r.section("units");
            r.kv("units", u.len().to_string());
            (u, parse_measures(measures, &[])?)
        }
    };
    unit_sections(&units, &ms, model, &mut r);
    Ok(r.finish())
}

fn corpus_sections(corpus: &Corpus, measures: &[CostMeasure], r: &mut Report) -> Result<()> {
    let agents = corpus.agents();
    r.section("corpus");
    r.kv("dialogues", corpus.dialogues.len().to_string());
    r.kv("scenarios", corpus.scenarios.len().to_string());
    r.kv(
        "agents",
        if agents.is_empty() {
            "none".into()
        } else {
            agents.join(", ")
        },
    );
    let validation = validate_corpus(corpus);
    if validation.is_empty() {
        r.kv("validation", "ok");
    } else {
        r.kv(
            "validation",
            format!("{} violations", validation.violations.len()),
        );
        for v in &validation.violations {
            r.line(format!("  {v}"));
        }
        return Ok(());
    }

    r.section("segments");
    let mut rows = Vec::new();
    for d in corpus.dialogues.iter().filter(|d| !d.utterances.is_empty()) {
        let root = derive_structure(&corpus.schema, d)?;
        rows.push(vec![
            d.id.clone(),
            d.utterances.len().to_string(),
            root.iter().count().to_string(),
            root.depth().to_string(),
        ]);
    }
    if rows.is_empty() {
        r.line("no annotated utterances");
    } else {
        r.block(&table(
            &["dialogue", "utterances", "segments", "depth"],
            &rows,
        ));
    }

    let mut scopes = vec![("all".to_string(), ScopeFilter::all())];
    if agents.len() > 1 {
        scopes.extend(
            agents
                .iter()
                .map(|a| (format!("agent {a}"), ScopeFilter::all().agents([a]))),
        );
    }
    for (title, scope) in scopes {
        r.section(&format!("kappa: {title}"));
        let m = build_confusion(corpus, &scope)?;
        match kappa(&m) {
            Ok(k) => {
                r.kv("T", k.t_total.to_string());
                r.num("P(A)", k.p_a);
                r.num("P(E)", k.p_e);
                r.num("kappa", k.kappa);
                attribute_lines(&m, r);
            }
            Err(e) => {
                r.kv("kappa", format!("undefined ({e})"));
            }
        }
    }

    r.section("costs");
    let t = cost_table(corpus, measures)?;
    for w in &t.warnings {
        r.kv("note", w);
    }
    let mut header = vec!["agent", "dialogues"];
    header.extend(t.measures.iter().map(String::as_str));
    let rows: Vec<Vec<String>> = agents
        .iter()
        .map(|a| {
            let mine: Vec<_> = t.rows.iter().filter(|row| &row.agent == a).collect();
            let mut cells = vec![a.clone(), mine.len().to_string()];
            for m in &t.measures {
                let vals: Vec<f64> = mine.iter().map(|row| row.values[m]).collect();
                cells.push(if vals.is_empty() {
                    "-".into()
                } else {
                    r.n(mean(&vals))
                });
            }
            cells
        })
        .collect();
    r.block(&table(&header, &rows));
    Ok(())
}

fn unit_sections(units: &[Unit], measures: &[CostMeasure], model: &ModelArgs, r: &mut Report) {
    let names = cost_names(units, measures);
    r.section("measures");
    let mut cols: Vec<(String, Vec<f64>)> = Vec::new();
    if units.iter().all(|u| u.satisfaction.is_some()) && !units.is_empty() {
        cols.push((
            "satisfaction".into(),
            units
                .iter()
                .map(|u| u.satisfaction.unwrap_or_default())
                .collect(),
        ));
    }
    cols.push((KAPPA.into(), units.iter().map(|u| u.kappa).collect()));
    for n in &names {
        if let Some(v) = units
            .iter()
            .map(|u| u.costs.get(n).copied())
            .collect::<Option<Vec<f64>>>()
        {
            cols.push((n.clone(), v));
        }
    }
    let rows: Vec<Vec<String>> = cols
        .iter()
        .map(|(n, v)| match norm_params(v) {
            Ok(p) => vec![n.clone(), r.n(p.mean), r.n(p.std)],
            Err(_) if !v.is_empty() => vec![n.clone(), r.n(mean(v)), "-".into()],
            Err(_) => vec![n.clone(), "-".into(), "-".into()],
        })
        .collect();
    r.block(&table(&["measure", "mean", "std"], &rows));
    if cols.len() > 1 {
        r.line("correlations:");
        let mut rows = Vec::new();
        for i in 0..cols.len() {
            for j in i + 1..cols.len() {
                let v = pearson_r(&cols[i].1, &cols[j].1)
                    .map(|x| r.n(x))
                    .unwrap_or_else(|_| "-".into());
                rows.push(vec![cols[i].0.clone(), cols[j].0.clone(), v]);
            }
        }
        r.block(&table(&["x", "y", "r"], &rows));
    }

    r.section("performance function");
    let pf = match estimate_units(units, measures, model) {
        Ok(pf) => pf,
        Err(e) => {
            r.kv("not estimated", e.to_string());
            return;
        }
    };
    function_lines(&pf, r);

    r.section("comparison");
    match split_groups(units, &[]).and_then(|(a, b, ga, gb)| {
        Ok((a, b, compare_groups(&pf, &ga, &gb, &pf.estimation_pool())?))
    }) {
        Ok((a, b, c)) => comparison_lines(&pf, (&a, &b), &c, r),
        Err(e) => {
            r.kv("not compared", e.to_string());
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("dialogue-eval").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn measures_split_on_commas() {
        let cli = parse(&["estimate", "--corpus", "x.json", "--measures", "utt,rep"]);
        match cli.command {
            Command::Estimate { measures, .. } => assert_eq!(measures.measures, vec!["utt", "rep"]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn strategies_parse() {
        let m = strategy_map(&["A=R_A".into(), "B = R_B".into()]).unwrap();
        assert_eq!(m["B"], "R_B");
        assert!(strategy_map(&["A".into()]).unwrap_err().is_usage());
        assert!(strategy_map(&["A=x".into(), "A=y".into()])
            .unwrap_err()
            .is_usage());
    }

    #[test]
    fn missing_file_is_a_usage_error() {
        let out = run(&parse(&[
            "validate",
            "--corpus",
            "/nonexistent/corpus.json",
        ]));
        assert_eq!(out.exit_code(), 2);
        assert!(out.stdout.is_empty());
    }

    #[test]
    fn format_not_offered_is_a_usage_error() {
        let out = run(&parse(&["report", "--corpus", "x.json", "--format", "csv"]));
        assert_eq!(out.exit_code(), 2);
    }
}
