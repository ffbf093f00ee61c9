//! The `dir` command line: one subcommand per pipeline stage plus query,
//! chat, eval, corpus and serve.
//!
//! Stages hand over through artifacts in the workdir
//! (`<table>.context.json`, `.extractions.json`, `.catalog.json`,
//! `.schema.json`) and the store file. Exit codes: 0 success, 1 user error,
//! 2 internal error.

use std::io::{BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use dir_core::agent::{route_table, route_targets, step, AgentTurn, SessionStore};
use dir_core::eval::{
    evaluate, generate_corpus, generate_suite, mock_engine, read_suite, write_suite, CorpusSpec, EvalReport, System,
};
use dir_core::ingest::{collect_text_fields, load_context_table, write_csv, SourceFormat};
use dir_core::model::{ContextTable, DialogState, EnumerationCatalog, ExtractionSet};
use dir_core::pipeline::{
    clamp_policy, discretize_stage, enumerate_stage, generate_stage, read_artifact, read_catalog, write_artifact,
    write_catalog, Answer, ArtifactKind,
};
use dir_core::tablegen::{Store, DEFAULT_MAX_COLUMNS};
use dir_core::{Config, Engine, Error, Result};

#[derive(Debug, Parser)]
#[command(name = "dir", about = "Discrete information retrieval over product tables", version)]
struct Cli {
    /// TOML configuration file; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured workdir.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a CSV or JSONL file and pick its free-text columns.
    Ingest(IngestArgs),
    /// Extract key-value tuples from every row's free text.
    Discretize(TableArg),
    /// Build the enumeration catalog (consolidated and capped).
    Enumerate(TableArg),
    /// Materialize the inference table and the joined view in the store.
    Generate(TableArg),
    /// Compile one question to SQL, validate it and run it.
    Query(QueryArgs),
    /// Multi-turn session on stdin, one utterance per line.
    Chat(ChatArgs),
    /// Score dIR and the baselines on the synthetic corpus.
    Eval(EvalArgs),
    /// Write the synthetic corpus, its lexicon and a query suite to disk.
    Corpus(CorpusArgs),
    /// Start the HTTP service.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
struct TableArg {
    #[arg(long)]
    table: String,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    table: String,
    /// Domain id; defaults to the table id.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    primary_key: Option<String>,
    /// Comma-separated free-text columns; detected when omitted.
    #[arg(long, value_delimiter = ',')]
    text_columns: Option<Vec<String>>,
    /// csv or jsonl; guessed from the extension when omitted.
    #[arg(long)]
    format: Option<String>,
}

#[derive(Debug, Args)]
struct QueryArgs {
    /// Routed by vocabulary overlap when omitted.
    #[arg(long)]
    table: Option<String>,
    /// Print the full answer as JSON.
    #[arg(long)]
    json: bool,
    question: String,
}

#[derive(Debug, Args)]
struct ChatArgs {
    /// Resumes the session if it exists; a fresh `chat-N` id otherwise.
    #[arg(long)]
    session: Option<String>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long, value_delimiter = ',', default_value = "dir,like,lexical")]
    systems: Vec<String>,
    /// JSONL suite file; generated from the seed when omitted.
    #[arg(long)]
    suite: Option<PathBuf>,
    #[arg(long, default_value_t = 400)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    queries: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 400)]
    rows: usize,
    #[arg(long, default_value_t = 50)]
    queries: usize,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Overrides `service.bind`.
    #[arg(long)]
    bind: Option<String>,
}

/// Runs one command line. `args` excludes the program name.
pub fn run_command<I, S>(args: I, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let argv = std::iter::once("dir".to_string()).chain(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let rendered = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{rendered}");
                    0
                }
                _ => {
                    let _ = write!(stderr, "{rendered}");
                    1
                }
            };
        }
    };
    match run(cli, stdin, stdout) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error[{}]: {e}", e.kind());
            if e.is_user_error() {
                1
            } else {
                2
            }
        }
    }
}

fn load_config(cli: &Cli) -> Result<Config> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(w) = &cli.workdir {
        config.workdir = w.clone();
    }
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    Ok(config)
}

fn run(cli: Cli, stdin: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let config = load_config(&cli)?;
    match cli.command {
        Command::Ingest(a) => ingest(&config, a, out),
        Command::Discretize(a) => discretize(&config, &a.table, out),
        Command::Enumerate(a) => enumerate(&config, &a.table, out),
        Command::Generate(a) => generate(&config, &a.table, out),
        Command::Query(a) => query(&config, a, out),
        Command::Chat(a) => chat(&config, a, stdin, out),
        Command::Eval(a) => eval(&config, a, out),
        Command::Corpus(a) => corpus(&config, a, out),
        Command::Serve(a) => serve(&config, a),
    }
}

fn ingest(config: &Config, a: IngestArgs, out: &mut dyn Write) -> Result<()> {
    let mut section = config.ingest.clone();
    if let Some(pk) = a.primary_key {
        section.primary_key = pk;
    }
    if a.text_columns.is_some() {
        section.text_columns = a.text_columns;
    }
    let cfg = section.ingest_config()?;
    let format = match a.format.as_deref() {
        None => SourceFormat::from_path(&a.input),
        Some("csv") => SourceFormat::Csv,
        Some("jsonl") => SourceFormat::Jsonl,
        Some(other) => return Err(Error::Config(format!("unknown format {other:?}, expected csv or jsonl"))),
    };
    let file = std::fs::File::open(&a.input)
        .map_err(|e| Error::Config(format!("cannot open {}: {e}", a.input.display())))?;
    let domain = a.domain.unwrap_or_else(|| a.table.clone());
    let table = load_context_table(std::io::BufReader::new(file), format, &a.table, &domain, &cfg)?;
    let text = collect_text_fields(&table, &cfg)?;
    let table = table.with_text_columns(text);
    let path = write_artifact(&config.workdir, &a.table, ArtifactKind::Context, &table)?;
    writeln!(out, "ingested {}: {} rows, {} columns", table.table_id, table.rows.len(), table.columns.len())?;
    let names: Vec<&str> = table.text_columns.iter().map(|c| c.as_str()).collect();
    writeln!(out, "text columns: {}", if names.is_empty() { "(none)".into() } else { names.join(", ") })?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn discretize(config: &Config, table_id: &str, out: &mut dyn Write) -> Result<()> {
    let context: ContextTable = read_artifact(&config.workdir, table_id, ArtifactKind::Context)?;
    let gateway = config.gateway()?;
    let templates = config.templates()?;
    let extractions = discretize_stage(&context, &gateway, &templates.discretize, &config.cap_policy()?)?;
    let path = write_artifact(&config.workdir, table_id, ArtifactKind::Extractions, &extractions)?;
    let failed = extractions.failed_rows().count();
    let tuples: usize = extractions.per_row.values().map(|r| r.tuples.len()).sum();
    writeln!(out, "discretized {table_id}: {} rows, {tuples} tuples, {failed} failed", extractions.per_row.len())?;
    for (key, row) in extractions.failed_rows() {
        writeln!(out, "  failed {key}: {}", row.failure.as_deref().unwrap_or("unknown"))?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn enumerate(config: &Config, table_id: &str, out: &mut dyn Write) -> Result<()> {
    let context: ContextTable = read_artifact(&config.workdir, table_id, ArtifactKind::Context)?;
    let extractions: ExtractionSet = read_artifact(&config.workdir, table_id, ArtifactKind::Extractions)?;
    let policy = clamp_policy(&config.cap_policy()?, DEFAULT_MAX_COLUMNS, context.columns.len());
    let catalog = enumerate_stage(&extractions, context.rows.len(), &policy)?;
    let path = write_catalog(&config.workdir, &catalog)?;
    writeln!(out, "enumerated {table_id}: {} columns", catalog.entries.len())?;
    for (column, values) in &catalog.entries {
        writeln!(out, "  {column}: {} values", values.len())?;
    }
    for dropped in &catalog.dropped {
        writeln!(out, "  dropped {}: {}", dropped.column, dropped.reason)?;
    }
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn generate(config: &Config, table_id: &str, out: &mut dyn Write) -> Result<()> {
    let context: ContextTable = read_artifact(&config.workdir, table_id, ArtifactKind::Context)?;
    let extractions: ExtractionSet = read_artifact(&config.workdir, table_id, ArtifactKind::Extractions)?;
    let catalog: EnumerationCatalog = read_catalog(&config.workdir, table_id)?;
    let store = Store::open(config.store_path())?;
    let schema = generate_stage(&context, &extractions, &catalog, &store)?;
    let path = write_artifact(&config.workdir, table_id, ArtifactKind::Schema, &schema)?;
    writeln!(out, "generated {}: {} columns", schema.view, schema.columns.len())?;
    for c in &schema.columns {
        writeln!(out, "  {} {} ({})", c.name, c.kind, c.origin)?;
    }
    writeln!(out, "store checksum {}", store.checksum()?)?;
    writeln!(out, "wrote {}", path.display())?;
    Ok(())
}

fn pick_table(engine: &Engine, table: Option<String>, question: &str, margin: f64) -> Result<String> {
    match table {
        Some(t) => Ok(t),
        None => Ok(route_table(question, &route_targets(engine), None, margin)?.table_id),
    }
}

/// Plain-text rendering of a one-shot answer.
pub fn render_answer(answer: &Answer) -> String {
    let q = &answer.query;
    let mut s = format!("table: {}\nsql: {}\nstatus: {}\n", answer.table_id, q.raw_sql, q.report.status);
    for r in &q.report.repairs {
        s.push_str(&format!("repair: {} {:?} -> {:?}\n", r.location, r.before, r.after));
    }
    for i in &q.report.issues {
        let hint = i.suggestion.as_deref().map(|h| format!(" (did you mean {h:?}?)")).unwrap_or_default();
        s.push_str(&format!("issue: {} at {}: {}{hint}\n", i.kind, i.location, i.detail));
    }
    match &answer.rows {
        None => s.push_str("rows: not executed\n"),
        Some(rows) => {
            s.push_str(&format!("rows: {}\n", rows.rows.len()));
            s.push_str(&rows.columns.join("\t"));
            s.push('\n');
            for row in &rows.rows {
                let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                s.push_str(&cells.join("\t"));
                s.push('\n');
            }
        }
    }
    s
}

fn query(config: &Config, a: QueryArgs, out: &mut dyn Write) -> Result<()> {
    if a.question.trim().is_empty() {
        return Err(Error::EmptyUtterance);
    }
    let engine = config.engine()?;
    let table = pick_table(&engine, a.table, &a.question, config.agent.switch_margin)?;
    let answer = engine.ask(&table, &a.question, &DialogState::new(&table))?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&answer)?)?;
    } else {
        write!(out, "{}", render_answer(&answer))?;
    }
    Ok(())
}

/// Plain-text rendering of one agent turn, shared by `chat` and tests that
/// compare HTTP sessions against it.
pub fn render_turn(turn: &AgentTurn) -> String {
    let mut s = format!("[{}] > {}\n", turn.turn_index, turn.utterance);
    s.push_str(&format!("thought: {}\n", turn.thought));
    let args = serde_json::to_string(&turn.action.arguments).unwrap_or_default();
    let tool = serde_json::to_value(turn.action.tool).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    s.push_str(&format!("action: {tool} {args}\n"));
    if let Some(o) = &turn.observation {
        s.push_str(&format!("observation: {} rows from {} [{}]", o.row_count, o.table_id, o.status));
        if let Some(e) = &o.error {
            s.push_str(&format!(" error: {e}"));
        }
        s.push('\n');
        if !o.sql.is_empty() {
            s.push_str(&format!("sql: {}\n", o.sql));
        }
    }
    let state = &turn.state_after;
    if state.constraints.is_empty() {
        s.push_str("state: (empty)\n");
    } else {
        let parts: Vec<String> = state
            .constraints
            .iter()
            .map(|(col, c)| format!("{col} {} {} (turn {})", c.op, c.operand, c.turn_index))
            .collect();
        s.push_str(&format!("state[{}]: {}\n", state.active_table, parts.join("; ")));
    }
    if let Some(r) = &turn.response {
        s.push_str(&format!("< {r}\n"));
    }
    s
}

fn chat(config: &Config, a: ChatArgs, stdin: &mut dyn BufRead, out: &mut dyn Write) -> Result<()> {
    let engine = config.engine()?;
    let sessions = SessionStore::new(config.session_dir())?;
    let id = match a.session {
        Some(id) => id,
        None => {
            let taken = sessions.list()?;
            (1..).map(|n| format!("chat-{n}")).find(|id| !taken.contains(id)).expect("unbounded range")
        }
    };
    let mut session = if sessions.exists(&id)? { sessions.load(&id)? } else { sessions.create(&id)? };
    writeln!(out, "session {id}")?;
    let mut line = String::new();
    loop {
        line.clear();
        if stdin.read_line(&mut line)? == 0 {
            break;
        }
        let utterance = line.trim();
        if utterance.is_empty() {
            continue;
        }
        if utterance == "exit" || utterance == "quit" {
            break;
        }
        let turn = step(&session, utterance, &engine, &config.agent)?;
        sessions.append(&id, &turn)?;
        write!(out, "{}", render_turn(&turn))?;
        session.push(turn);
    }
    Ok(())
}

fn eval(config: &Config, a: EvalArgs, out: &mut dyn Write) -> Result<()> {
    let systems = a.systems.iter().map(|s| s.trim().parse::<System>()).collect::<Result<Vec<_>>>()?;
    let spec = CorpusSpec::standard(a.rows, config.seed);
    let corpus = generate_corpus(&spec)?;
    let engine = if config.provider.provider_id == "mock" {
        mock_engine(&corpus, Store::in_memory()?)?
    } else {
        let engine = Engine::new(config.gateway()?, config.templates()?, config.cap_policy()?, Store::in_memory()?);
        for t in &corpus.tables {
            engine.build_table(t.clone())?;
        }
        engine
    };
    let suite = match &a.suite {
        Some(path) => read_suite(
            std::fs::File::open(path).map_err(|e| Error::Config(format!("cannot open {}: {e}", path.display())))?,
        )?,
        None => generate_suite(&spec, &corpus, a.queries, config.seed)?,
    };
    let reports = systems.iter().map(|s| evaluate(*s, &suite, &engine, &corpus)).collect::<Result<Vec<_>>>()?;
    let report = EvalReport { rows_per_domain: a.rows, seed: config.seed, systems: reports };
    write!(out, "{}", report.to_text())?;
    if let Some(path) = &a.json {
        let mut text = serde_json::to_string_pretty(&report)?;
        text.push('\n');
        std::fs::write(path, text)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(())
}

fn corpus(config: &Config, a: CorpusArgs, out: &mut dyn Write) -> Result<()> {
    let spec = CorpusSpec::standard(a.rows, config.seed);
    let corpus = generate_corpus(&spec)?;
    std::fs::create_dir_all(&a.out)?;
    let mut written = Vec::new();
    for table in &corpus.tables {
        let path = a.out.join(format!("{}.csv", table.table_id));
        write_csv(table, std::fs::File::create(&path)?)?;
        written.push(path);
    }
    let lexicon = a.out.join("lexicon.json");
    std::fs::write(&lexicon, serde_json::to_string_pretty(&corpus.lexicon)? + "\n")?;
    let truth = a.out.join("truth.json");
    std::fs::write(&truth, serde_json::to_string_pretty(&corpus.truth)? + "\n")?;
    let suite_path = a.out.join("suite.jsonl");
    let suite = generate_suite(&spec, &corpus, a.queries, config.seed)?;
    write_suite(&suite, std::fs::File::create(&suite_path)?)?;
    written.extend([lexicon, truth, suite_path]);
    for p in written {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn serve(config: &Config, a: ServeArgs) -> Result<()> {
    let bind = a.bind.unwrap_or_else(|| config.service.bind.clone());
    let state = Arc::new(crate::http::AppState::from_config(config)?);
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    runtime.block_on(crate::http::serve(state, &bind))
}
