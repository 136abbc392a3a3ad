use std::io::{self, BufRead, Write};
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use sqlclarify_core::aligner::TokenFilter;
use sqlclarify_core::encoder::{self, synthetic, EmbeddingTable, TrainedModel, UnknownVector};
use sqlclarify_core::orchestrator::session::{Phase, SessionState, SessionStore};
use sqlclarify_core::orchestrator::simulator::{simulate, SimulatorConfig};
use sqlclarify_core::orchestrator::{Config, Pipeline};
use sqlclarify_core::question_gen::Answer;
use sqlclarify_core::restater::TemplateTable;
use sqlclarify_core::schema::{load_examples, load_schemas};
use sqlclarify_core::sql::parse_sql;
use sqlclarify_core::text::StopWordList;
use sqlclarify_cli::server::{router, AppState};

#[derive(Parser)]
#[command(name = "sqlclarify", version, about = "Interactive repair of text-to-SQL predictions")]
struct Cli {
    /// TOML config; SQLCLARIFY_* variables override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic embeddings covering the corpus vocabulary.
    SynthEmbeddings {
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        dim: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Fit the projection and threshold on the example corpus.
    Train {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the simulated user over the example corpus.
    Simulate {
        /// Report destination (JSON); stdout gets the summary either way.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the configured cap; 0 disables it.
        #[arg(long)]
        cap: Option<usize>,
        /// Keep every option instead of filtering by the gold query.
        #[arg(long)]
        no_gold_filter: bool,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
        /// Directory of static assets for the web console.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
    /// Answer the questions for one question in the terminal.
    Session {
        #[arg(long)]
        db: String,
        question: String,
    },
    /// Print the restatement of a SQL query.
    Restate {
        #[arg(long)]
        db: String,
        sql: String,
    },
    /// Print the alignment matrix for a question.
    Align {
        #[arg(long)]
        db: String,
        question: String,
        /// Align against this SQL instead of the parser's prediction.
        #[arg(long)]
        sql: Option<String>,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let config = Config::load(cli.config.as_deref())?;
    match cli.command {
        Command::SynthEmbeddings { out, dim, seed } => synth_embeddings(&config, out, dim, seed),
        Command::Train { out } => train(&config, out),
        Command::Simulate { out, cap, no_gold_filter } => run_simulation(&config, out, cap, !no_gold_filter),
        Command::Serve { addr, assets } => serve(&config, &addr, assets),
        Command::Session { db, question } => session(&config, &db, &question),
        Command::Restate { db, sql } => {
            let pipeline = Pipeline::from_config(&config)?;
            let schema = pipeline.schema(&db)?;
            let query = parse_sql(&sql, schema)?;
            println!("{}", pipeline.restate(&query, schema)?.text);
            Ok(())
        }
        Command::Align { db, question, sql } => {
            let pipeline = Pipeline::from_config(&config)?;
            let schema = pipeline.schema(&db)?;
            let query = match sql {
                Some(s) => parse_sql(&s, schema)?,
                None => pipeline.gateway.parse(&question, &db)?,
            };
            let restated = pipeline.restate(&query, schema)?;
            let alignment = pipeline.align(&question, &restated, schema)?;
            println!("sql: {query}\nrestated: {}\nthreshold: {:.4}\n", restated.text, alignment.threshold);
            print!("{}", alignment.dump());
            println!("\nuncertain: {:?}", alignment.uncertain_tokens());
            Ok(())
        }
    }
}

fn templates(config: &Config) -> Result<TemplateTable> {
    Ok(match &config.templates {
        Some(p) => TemplateTable::load(p)?,
        None => TemplateTable::default(),
    })
}

fn synth_embeddings(config: &Config, out: Option<PathBuf>, dim: usize, seed: u64) -> Result<()> {
    let schemas = load_schemas(&config.schemas)?;
    let examples = load_examples(&config.examples, &schemas)?;
    let vocab = synthetic::corpus_vocabulary(&schemas, &examples, &templates(config)?);
    let table = synthetic::generate(&vocab, &synthetic::SyntheticConfig { dim, seed, ..Default::default() })?;
    let out = out.unwrap_or_else(|| config.embeddings.clone());
    table.save(&out)?;
    log::info!("wrote {} vectors of dimension {dim} to {}", table.len(), out.display());
    Ok(())
}

fn train(config: &Config, out: Option<PathBuf>) -> Result<()> {
    let schemas = load_schemas(&config.schemas)?;
    let examples = load_examples(&config.examples, &schemas)?;
    let templates = templates(config)?;
    let stop_words = match &config.stop_words {
        Some(p) => StopWordList::load(p).with_context(|| p.display().to_string())?,
        None => StopWordList::default(),
    };
    let table = EmbeddingTable::load(&config.embeddings, UnknownVector::Mean)?;
    let triples = encoder::make_triples(&examples, &schemas, &templates, &config.train)?;
    log::info!("{} triples from {} examples", triples.len(), examples.len());
    let outcome = encoder::train(&triples, &table, &TokenFilter::new(stop_words, &templates), &config.train)?;
    for (i, l) in outcome.epoch_losses.iter().enumerate() {
        log::info!("epoch {:>2}: mean loss {l:.5}", i + 1);
    }
    let model = TrainedModel { projection: outcome.projection, threshold: outcome.threshold };
    let out = out.unwrap_or_else(|| config.model.clone());
    model.save(&out)?;
    log::info!("threshold {:.6}; model written to {}", model.threshold, out.display());
    Ok(())
}

fn run_simulation(config: &Config, out: Option<PathBuf>, cap: Option<usize>, filter_by_gold: bool) -> Result<()> {
    let pipeline = Pipeline::from_config(config)?;
    let examples = load_examples(&config.examples, &pipeline.gateway.schemas().cloned().collect::<Vec<_>>())?;
    let cap = match cap {
        Some(0) => None,
        Some(c) => Some(c),
        None => config.cap(),
    };
    let report = simulate(&pipeline, &examples, &SimulatorConfig { cap, filter_by_gold });
    if let Some(out) = out {
        std::fs::write(&out, serde_json::to_string_pretty(&report)?).with_context(|| out.display().to_string())?;
    }
    println!("examples        {}", report.total);
    println!("SQLAcc before   {:.4}", report.sql_acc_before);
    println!("SQLAcc after    {:.4}", report.sql_acc_after);
    println!("Avg#T (all)     {:.4}", report.avg_turns);
    println!("Avg#T (asked)   {:.4}", report.avg_turns_interactive);
    println!("None ratio      {:.4}", report.none_ratio);
    println!();
    print!("{}", report.histogram_table());
    Ok(())
}

fn serve(config: &Config, addr: &str, assets: Option<PathBuf>) -> Result<()> {
    let pipeline = Pipeline::from_config(config)?;
    let ttl = Duration::from_secs(config.session_ttl_secs);
    let store = match &config.session_log {
        Some(p) => SessionStore::open(ttl, p)?,
        None => SessionStore::new(ttl),
    };
    let app = router(Arc::new(AppState { pipeline, store }), assets);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}

fn session(config: &Config, db: &str, question: &str) -> Result<()> {
    let pipeline = Pipeline::from_config(config)?;
    let mut state = SessionState::new("terminal", db, question);
    state.start(&pipeline)?;
    println!("predicted: {}", state.sql_before.as_ref().map(ToString::to_string).unwrap_or_default());
    println!("restated:  {}", state.restated.as_deref().unwrap_or_default());
    let stdin = io::stdin();
    let mut lines = stdin.lock().lines();
    while state.phase == Phase::Asking {
        let (index, q) = state.current().map(|(i, q)| (i, q.clone())).expect("asking sessions have a current question");
        println!("\n{}", q.prompt);
        for (i, o) in q.options.iter().enumerate() {
            println!("  [{i}] {}", o.surface);
        }
        let option = loop {
            print!("> ");
            io::stdout().flush()?;
            let Some(line) = lines.next() else { bail!("input ended before every question was answered") };
            match line?.trim().parse::<usize>() {
                Ok(n) if n < q.options.len() => break n,
                _ => println!("enter a number from 0 to {}", q.options.len() - 1),
            }
        };
        state.submit_answer(&pipeline, Answer { question: index, option })?;
    }
    println!("\nquestion:  {}", state.modified_question.as_deref().unwrap_or_default());
    println!("sql:       {}", state.sql_after.as_ref().map(ToString::to_string).unwrap_or_default());
    Ok(())
}
