use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use mdim_core::actions::Scenario;
use mdim_core::chat::engine::{aggregate, read_results};
use mdim_core::chat::{ChatConfig, ChatEngine, PolicyPool};
use mdim_core::domain::Domain;
use mdim_core::harness::curves::{read_run_curves, summarize, write_summary, CurveRow};
use mdim_core::harness::training::{dialogue_settings, run_dir};
use mdim_core::harness::{run_evaluation, run_training, EvalExploration, ExperimentConfig};
use mdim_core::selection::{AgentEnsemble, Variant};

#[derive(Parser)]
#[command(name = "mdim", version, about = "Multi-dimensional dialogue manager: training, evaluation and chat")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one variant for several runs.
    Train(TrainArgs),
    /// Evaluate frozen ensembles against the simulator.
    Eval(EvalArgs),
    /// Average per-run learning curves across runs and variants.
    Curves(CurvesArgs),
    /// Show the policy feature layout.
    Features(FeaturesArgs),
    /// Serve trained ensembles to human users over HTTP.
    ChatServe(ChatArgs),
    /// Summarise stored questionnaires per policy.
    Questionnaire(QuestionnaireArgs),
}

#[derive(Args)]
struct ConfigArg {
    /// TOML experiment config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl ConfigArg {
    fn load(&self) -> anyhow::Result<(ExperimentConfig, PathBuf)> {
        match &self.config {
            Some(p) => {
                let base = p.parent().map(Path::to_path_buf).unwrap_or_default();
                Ok((ExperimentConfig::load(p)?, base))
            }
            None => Ok((ExperimentConfig::default(), PathBuf::from("."))),
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    variant: Option<Variant>,
    #[arg(long)]
    scenario: Option<Scenario>,
    #[arg(long)]
    dialogues: Option<u64>,
    #[arg(long)]
    runs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// mdim_src output (or a single ensemble) to copy AutoFeedback and SOM from.
    #[arg(long)]
    transfer_from: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Ensemble directories, optionally `label=dir`. A training output
    /// directory expands to the final ensemble of each run.
    #[arg(long, required = true, num_args = 1..)]
    policies: Vec<String>,
    #[arg(long)]
    dialogues: Option<usize>,
    #[arg(long)]
    error_rate: Option<f64>,
    /// `off` for greedy selection, or a Boltzmann temperature.
    #[arg(long, default_value = "off")]
    exploration: String,
    #[arg(long, default_value_t = 11)]
    seed: u64,
    /// Write the report as JSON here.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write one JSON episode log per line here.
    #[arg(long)]
    log: Option<PathBuf>,
}

#[derive(Args)]
struct CurvesArgs {
    /// Training output directories (each holding curves.csv).
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    config: ConfigArg,
    #[arg(long)]
    print_map: bool,
    /// Use the Evaluation agent's layout (with candidate-presence bits).
    #[arg(long)]
    evaluation: bool,
}

#[derive(Args)]
struct ChatArgs {
    #[command(flatten)]
    config: ConfigArg,
    /// Pool entries as `label=dir`, served round-robin in the given order.
    #[arg(long, required = true, num_args = 1..)]
    policies: Vec<String>,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Pool counter, results log and transcripts.
    #[arg(long, default_value = "chat-state")]
    state_dir: PathBuf,
    #[arg(long, default_value_t = 30)]
    max_turns: usize,
    #[arg(long)]
    no_task_cards: bool,
}

#[derive(Args)]
struct QuestionnaireArgs {
    /// Results log written by chat-serve.
    #[arg(long)]
    results: PathBuf,
    #[arg(long)]
    json: bool,
}

fn split_label(entry: &str) -> (String, PathBuf) {
    match entry.split_once('=') {
        Some((label, dir)) => (label.to_string(), PathBuf::from(dir)),
        None => {
            let dir = PathBuf::from(entry);
            let label = dir
                .file_name()
                .map_or_else(|| entry.to_string(), |n| n.to_string_lossy().into_owned());
            (label, dir)
        }
    }
}

/// Expands `label=dir` entries into ensemble directories.
fn ensemble_dirs(entries: &[String]) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in entries {
        let (label, dir) = split_label(entry);
        if dir.join("manifest.json").is_file() {
            out.push((label, dir));
            continue;
        }
        let mut run = 0;
        while run_dir(&dir, run).join("final/manifest.json").is_file() {
            out.push((format!("{label}/run_{run}"), run_dir(&dir, run).join("final")));
            run += 1;
        }
        if run == 0 {
            bail!("{} holds no ensemble", dir.display());
        }
    }
    Ok(out)
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let (mut config, base) = args.config.load()?;
    if let Some(v) = args.variant {
        config.variant = v;
    }
    config.scenario = args.scenario.or(config.scenario);
    if let Some(n) = args.dialogues {
        config.n_dialogues = n;
    }
    if let Some(r) = args.runs {
        config.n_runs = r;
    }
    if let Some(s) = args.seed {
        config.seed = s;
    }
    if args.transfer_from.is_some() {
        config.transfer_source = args.transfer_from;
    }
    if args.out.is_some() {
        config.out_dir = args.out;
    }
    let domain = Domain::from_config(&config.domain, &base)?;
    let start = std::time::Instant::now();
    let artifacts = run_training(&config, &domain)?;
    log::info!("trained {} runs in {:.1?}", config.n_runs, start.elapsed());
    let settings = dialogue_settings(&config, &domain, config.error_rate)?;
    let early = config.early_checkpoint();
    let mut rows = Vec::new();
    for run in &artifacts.runs {
        let mut row = serde_json::json!({ "run": run.run });
        let stages = [("final", Some(&run.final_ensemble)), ("early", run.checkpoint(early))];
        for (name, ensemble) in stages {
            let Some(ensemble) = ensemble else { continue };
            let pool = vec![(name.to_string(), ensemble.clone())];
            let (report, _) = run_evaluation(&pool, &domain, &settings, config.eval_dialogues, config.seed, EvalExploration::Off, false)?;
            println!(
                "run {} {name:>5}: success {:5.1}%  length {:5.2}  reward {:6.2}",
                run.run, report.overall.success_rate, report.overall.average_length, report.overall.average_reward
            );
            row[name] = serde_json::to_value(&report.overall)?;
        }
        rows.push(row);
    }
    if let Some(dir) = &config.out_dir {
        let path = dir.join("evaluation.json");
        std::fs::write(&path, serde_json::to_vec_pretty(&rows)?).with_context(|| path.display().to_string())?;
        println!("artifacts written to {}", dir.display());
    }
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let (config, base) = args.config.load()?;
    let domain = Domain::from_config(&config.domain, &base)?;
    let exploration = match args.exploration.as_str() {
        "off" => EvalExploration::Off,
        t => EvalExploration::At(t.parse().context("--exploration takes `off` or a temperature")?),
    };
    let pool = ensemble_dirs(&args.policies)?
        .into_iter()
        .map(|(label, dir)| Ok((label, AgentEnsemble::load(&dir, &domain)?)))
        .collect::<anyhow::Result<Vec<_>>>()?;
    let settings = dialogue_settings(&config, &domain, args.error_rate.unwrap_or(config.error_rate))?;
    let n = args.dialogues.unwrap_or(config.eval_dialogues);
    let (report, logs) = run_evaluation(&pool, &domain, &settings, n, args.seed, exploration, args.log.is_some())?;
    for p in &report.per_policy {
        println!(
            "{:<24} n={:<5} success {:5.1}%  length {:5.2}  reward {:6.2}",
            p.label, p.stats.n_dialogues, p.stats.success_rate, p.stats.average_length, p.stats.average_reward
        );
    }
    println!(
        "{:<24} n={:<5} success {:5.1}%  length {:5.2}  reward {:6.2}",
        "overall", report.overall.n_dialogues, report.overall.success_rate, report.overall.average_length, report.overall.average_reward
    );
    if let Some(path) = &args.out {
        std::fs::write(path, serde_json::to_vec_pretty(&report)?).with_context(|| path.display().to_string())?;
    }
    if let Some(path) = &args.log {
        let mut text = String::new();
        for log in &logs {
            text.push_str(&serde_json::to_string(log)?);
            text.push('\n');
        }
        std::fs::write(path, text).with_context(|| path.display().to_string())?;
    }
    Ok(())
}

fn curves(args: CurvesArgs) -> anyhow::Result<()> {
    let mut rows: Vec<CurveRow> = Vec::new();
    for dir in &args.inputs {
        rows.extend(read_run_curves(dir.join("curves.csv"))?);
    }
    let summary = summarize(&rows);
    write_summary(&summary, &args.out)?;
    println!("{} summary rows written to {}", summary.len(), args.out.display());
    Ok(())
}

fn features(args: FeaturesArgs) -> anyhow::Result<()> {
    let (config, base) = args.config.load()?;
    let domain = Domain::from_config(&config.domain, &base)?;
    let map = if args.evaluation { &domain.evaluation_features } else { &domain.features };
    println!("{} features, layout hash {}", map.len(), map.hash());
    if args.print_map {
        for (i, name) in map.names().iter().enumerate() {
            println!("{i:>3}  {name}");
        }
    }
    Ok(())
}

fn chat_serve(args: ChatArgs) -> anyhow::Result<()> {
    let (config, base) = args.config.load()?;
    let domain = Domain::from_config(&config.domain, &base)?;
    let dirs: Vec<(String, PathBuf)> = args.policies.iter().map(|s| split_label(s)).collect();
    std::fs::create_dir_all(&args.state_dir).with_context(|| args.state_dir.display().to_string())?;
    let pool = PolicyPool::load(&dirs, &domain, Some(&args.state_dir))?;
    let chat = ChatConfig {
        state_dir: Some(args.state_dir),
        max_turns: args.max_turns,
        task_cards: !args.no_task_cards,
        goals: config.goals,
        realization: config.realization,
        seed: 0,
    };
    let engine = Arc::new(ChatEngine::new(domain, pool, chat)?);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(mdim_core::chat::http::serve(engine, args.addr))?;
    Ok(())
}

fn questionnaire(args: QuestionnaireArgs) -> anyhow::Result<()> {
    let summary = aggregate(&read_results(&args.results)?);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!("{:<20} {:>4} {:>7}  {:>13} {:>13} {:>11} {:>11} {:>11} {:>11}", "policy", "N", "AvgLen", "Q1 [%]", "Q2 [%]", "Q3", "Q4", "Q5", "Q6");
    for s in summary {
        let cells: Vec<String> = (0..6)
            .map(|q| {
                let prec = if q < 2 { 1 } else { 2 };
                format!("{:.prec$} ({:.prec$})", s.mean[q], s.std[q])
            })
            .collect();
        println!(
            "{:<20} {:>4} {:>7.2}  {:>13} {:>13} {:>11} {:>11} {:>11} {:>11}",
            s.label, s.n, s.average_length, cells[0], cells[1], cells[2], cells[3], cells[4], cells[5]
        );
    }
    Ok(())
}

fn main() -> anyhow::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Curves(a) => curves(a),
        Command::Features(a) => features(a),
        Command::ChatServe(a) => chat_serve(a),
        Command::Questionnaire(a) => questionnaire(a),
    }
}
