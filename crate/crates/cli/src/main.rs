//! `cef`: operator commands for preparing, simulating, analysing and serving a study.
//!
//! Failures print one JSON object on stderr and exit 1; usage errors exit 2.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use cef_analytics::report::{analyze, load_study, write_report, AnalysisOptions};
use cef_core::catalog::{cluster_and_select, load_catalog, score_profiles, Catalog};
use cef_core::domain::{CharacterRep, Provenance};
use cef_core::persona::{DemographicTables, MetConversion};
use cef_core::rank::{
    data_digest, evaluate_cv_with, load_ranked_labels, train_with, FoldBy, LabelContext, ModelFile, TrainOptions,
    DEFAULT_C, DEFAULT_ITERATIONS,
};
use cef_core::recommender::{foil_agreement_analysis, Models};
use cef_core::seed;
use cef_study::bots::{run_bot, BotPolicy};
use cef_study::clock::StepClock;
use cef_study::context::{generate_characters, StudyCharacter, StudyContext};
use cef_study::export::write_exports;
use cef_study::instruments::Instruments;
use cef_study::store::NdjsonStore;
use cef_study::{Condition, Engine};
use clap::{Parser, Subcommand};
use serde::Serialize;

/// Start of the simulated clock, 2025-10-09T08:53:20Z.
const SIM_EPOCH_MS: i64 = 1_760_000_000_000;
const SIM_STEP_MS: i64 = 1_000;

#[derive(Debug, Parser)]
#[command(name = "cef", version, about = "Contrastive explanation study tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample synthetic characters from demographic tables.
    GenCharacters {
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = cef_core::bootstrap::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Directory with demographics.csv and goal_mapping.csv; bundled tables otherwise.
        #[arg(long)]
        tables: Option<PathBuf>,
        /// Subtract resting metabolism from MET capacity.
        #[arg(long)]
        reserve: bool,
    },
    /// Train a ranking model on ranked labels and report leave-one-group-out accuracy.
    Train {
        #[arg(long)]
        labels: PathBuf,
        /// Characters file written by gen-characters.
        #[arg(long)]
        characters: PathBuf,
        /// Exercise catalog CSV; the bundled catalog otherwise.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value = "character")]
        fold_by: FoldBy,
        #[arg(long, default_value_t = DEFAULT_C)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[arg(long, default_value = "expert", value_parser = parse_provenance)]
        provenance: Provenance,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster catalog exercises by score profile and print one representative per cluster.
    SelectDropdown {
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 7)]
        k: usize,
        #[arg(long)]
        characters: PathBuf,
        /// Also write the ids here, one per line.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run scripted participants through every requested condition.
    Simulate {
        /// `all` or a comma-separated list of conditions.
        #[arg(long, default_value = "all")]
        conditions: String,
        #[arg(long)]
        participants_per_condition: usize,
        /// `all` or a comma-separated list of policies.
        #[arg(long)]
        bot_policy: String,
        /// Softmax temperature for human_model_follower.
        #[arg(long)]
        temperature: Option<f64>,
        /// Per-trial learning rate for noisy_learner.
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long, default_value_t = cef_core::bootstrap::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute metrics and statistics for a study directory.
    Analyze {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Instrument definitions JSON; bundled instruments otherwise.
        #[arg(long)]
        instruments: Option<PathBuf>,
    },
    /// Serve the participant and admin API.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// How often the predicted foil matches the expert model's runner-up.
    FoilAudit {
        #[arg(long)]
        expert: PathBuf,
        #[arg(long)]
        human: PathBuf,
        #[arg(long, default_value_t = 10)]
        datasets: usize,
        #[arg(long, default_value_t = 100)]
        size: usize,
        /// Drop-down catalog CSV; the bundled drop-down otherwise.
        #[arg(long)]
        dropdown: Option<PathBuf>,
        #[arg(long, default_value_t = cef_core::bootstrap::DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_provenance(s: &str) -> Result<Provenance, String> {
    match s {
        "expert" => Ok(Provenance::Expert),
        "human" => Ok(Provenance::Human),
        "synthetic" => Ok(Provenance::Synthetic),
        other => Err(format!("expected expert, human or synthetic, got `{other}`")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({"error": {"message": format!("{e:#}")}});
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::GenCharacters {
            count,
            seed,
            out,
            tables,
            reserve,
        } => gen_characters(count, seed, &out, tables.as_deref(), reserve),
        Command::Train {
            labels,
            characters,
            catalog,
            fold_by,
            c,
            iterations,
            provenance,
            seed,
            out,
        } => {
            let opts = TrainOptions {
                iterations,
                ..TrainOptions::default()
            };
            train(&labels, &characters, catalog.as_deref(), fold_by, c, provenance, seed, &opts, &out)
        }
        Command::SelectDropdown {
            catalog,
            model,
            k,
            characters,
            out,
        } => select_dropdown(catalog.as_deref(), &model, k, &characters, out.as_deref()),
        Command::Simulate {
            conditions,
            participants_per_condition,
            bot_policy,
            temperature,
            learning_rate,
            seed,
            out,
        } => {
            let conditions = parse_conditions(&conditions)?;
            let policies = parse_policies(&bot_policy, temperature, learning_rate)?;
            simulate(&conditions, participants_per_condition, &policies, seed, &out)
        }
        Command::Analyze { study, out, instruments } => analyze_study(&study, &out, instruments.as_deref()),
        Command::Serve { config } => serve(&config),
        Command::FoilAudit {
            expert,
            human,
            datasets,
            size,
            dropdown,
            seed,
            out,
        } => foil_audit(&expert, &human, datasets, size, dropdown.as_deref(), seed, out.as_deref()),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn pretty<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    Ok(text.into_bytes())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    stdout.write_all(&pretty(value)?)?;
    Ok(())
}

fn catalog_or_bundled(path: Option<&Path>) -> Result<(Catalog, Vec<u8>)> {
    match path {
        Some(p) => Ok((load_catalog(p)?, read(p)?)),
        None => Ok((Catalog::bundled(), cef_core::data::CATALOG_CSV.as_bytes().to_vec())),
    }
}

fn load_characters(path: &Path) -> Result<(Vec<StudyCharacter>, Vec<u8>)> {
    let bytes = read(path)?;
    let chars: Vec<StudyCharacter> =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing characters in {}", path.display()))?;
    if chars.is_empty() {
        bail!("{} holds no characters", path.display());
    }
    Ok((chars, bytes))
}

fn gen_characters(count: usize, seed: u64, out: &Path, tables: Option<&Path>, reserve: bool) -> Result<()> {
    if count == 0 {
        bail!("--count must be at least 1");
    }
    let tables = match tables {
        Some(dir) => DemographicTables::load(dir)?,
        None => DemographicTables::bundled(),
    };
    let conversion = if reserve { MetConversion::Reserve } else { MetConversion::Absolute };
    let characters: Vec<StudyCharacter> = generate_characters(&tables, count, seed)
        .into_iter()
        .map(|p| StudyCharacter::from_profile(p, &tables, conversion))
        .collect();
    write(out, &pretty(&characters)?)
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    labels: usize,
    pairs: usize,
    fold_by: FoldBy,
    folds: usize,
    cv_accuracy: f64,
    cv_accuracy_sd: f64,
    cv_auc: Option<f64>,
    train_accuracy: f64,
    model: &'a Path,
}

#[allow(clippy::too_many_arguments)]
fn train(
    labels_path: &Path,
    characters_path: &Path,
    catalog: Option<&Path>,
    fold_by: FoldBy,
    c: f64,
    provenance: Provenance,
    seed: u64,
    opts: &TrainOptions,
    out: &Path,
) -> Result<()> {
    let (catalog, catalog_bytes) = catalog_or_bundled(catalog)?;
    let (characters, character_bytes) = load_characters(characters_path)?;
    let labels = load_ranked_labels(labels_path, &catalog.ids())?;
    let ctx = LabelContext {
        characters: characters.iter().map(|c| (c.id().to_string(), c.rep)).collect(),
        exercises: catalog.reps().into_iter().collect(),
    };
    let report = evaluate_cv_with(&labels, &ctx, fold_by, c, seed, opts)?;
    let samples: Vec<_> = ctx.expand_all(&labels, seed)?.into_iter().flatten().collect();
    let clf = train_with(&samples, c, seed, opts)?;
    let digest = data_digest([read(labels_path)?.as_slice(), &character_bytes, &catalog_bytes]);
    ModelFile::from_classifier(&clf, provenance, digest).save(out)?;
    print_json(&TrainSummary {
        labels: labels.len(),
        pairs: samples.len(),
        fold_by,
        folds: report.folds.len(),
        cv_accuracy: report.mean_accuracy,
        cv_accuracy_sd: report.std_accuracy,
        cv_auc: report.mean_auc,
        train_accuracy: cef_core::rank::pairwise_accuracy(&clf, &samples),
        model: out,
    })
}

fn select_dropdown(catalog: Option<&Path>, model: &Path, k: usize, characters: &Path, out: Option<&Path>) -> Result<()> {
    let (catalog, _) = catalog_or_bundled(catalog)?;
    let model = ModelFile::load(model)?.model();
    let (characters, _) = load_characters(characters)?;
    let reps: Vec<(String, CharacterRep)> = characters.iter().map(|c| (c.id().to_string(), c.rep)).collect();
    let profiles = score_profiles(&catalog, &reps, &model)?;
    let ids = cluster_and_select(&profiles, k)?;
    let text: String = ids.iter().map(|id| format!("{id}\n")).collect();
    if let Some(out) = out {
        write(out, text.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn split_list(text: &str) -> impl Iterator<Item = &str> {
    text.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_conditions(text: &str) -> Result<Vec<Condition>> {
    if text.trim() == "all" {
        return Ok(Condition::ALL.to_vec());
    }
    let conditions: Vec<Condition> = split_list(text).map(str::parse).collect::<Result<_, _>>()?;
    if conditions.is_empty() {
        bail!("--conditions names no condition");
    }
    Ok(conditions)
}

fn parse_policies(text: &str, temperature: Option<f64>, learning_rate: Option<f64>) -> Result<Vec<BotPolicy>> {
    let names: Vec<&str> = if text.trim() == "all" {
        BotPolicy::NAMES.to_vec()
    } else {
        split_list(text).collect()
    };
    if names.is_empty() {
        bail!("--bot-policy names no policy");
    }
    names
        .into_iter()
        .map(|name| {
            let mut policy: BotPolicy = name.parse()?;
            match &mut policy {
                BotPolicy::HumanModelFollower { temperature: t } => *t = temperature.unwrap_or(*t),
                BotPolicy::NoisyLearner { rate } => *rate = learning_rate.unwrap_or(*rate),
                _ => {}
            }
            Ok(policy)
        })
        .collect()
}

#[derive(Serialize)]
struct SimulationSummary {
    sessions: usize,
    by_status: BTreeMap<&'static str, usize>,
    out: PathBuf,
}

fn simulate(conditions: &[Condition], per_condition: usize, policies: &[BotPolicy], seed: u64, out: &Path) -> Result<()> {
    if per_condition == 0 {
        bail!("--participants-per-condition must be at least 1");
    }
    if out.join(cef_study::store::EVENTS_FILE).exists() {
        bail!("{} already holds an event log; choose an empty directory", out.display());
    }
    let ctx = Arc::new(StudyContext::bundled(seed)?);
    let store = Arc::new(NdjsonStore::open(out)?.without_sync());
    let engine = Engine::open(ctx.clone(), store, Arc::new(StepClock::new(SIM_EPOCH_MS, SIM_STEP_MS)))?;
    let mut stream = 0u64;
    for policy in policies {
        for &condition in conditions {
            for i in 0..per_condition {
                let pid = format!("{policy}-{condition}-{:03}", i + 1);
                run_bot(&engine, *policy, Some(condition), pid, seed::derive(seed, stream))?;
                stream += 1;
            }
        }
    }
    let sessions = engine.sessions();
    write_exports(out, &sessions, &ctx.instruments)?;
    print_json(&SimulationSummary {
        sessions: sessions.len(),
        by_status: engine.count_by_status(),
        out: out.to_path_buf(),
    })
}

fn analyze_study(study: &Path, out: &Path, instruments: Option<&Path>) -> Result<()> {
    let instruments = match instruments {
        Some(p) => Instruments::load(p)?,
        None => Instruments::bundled(),
    };
    let data = load_study(study, &instruments)?;
    let report = analyze(&data, &instruments, &AnalysisOptions::default())?;
    let written = write_report(out, &report)?;
    print_json(&serde_json::json!({
        "n_sessions": report.summary.n_sessions,
        "n_analyzed": report.summary.n_analyzed,
        "files": written,
    }))
}

fn serve(config: &Path) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .with_writer(std::io::stderr)
        .init();
    let cfg = cef_service::ApiConfig::load(config)?;
    let runtime = tokio::runtime::Runtime::new().context("starting the async runtime")?;
    runtime.block_on(cef_service::serve(cfg))?;
    Ok(())
}

fn foil_audit(
    expert: &Path,
    human: &Path,
    datasets: usize,
    size: usize,
    dropdown: Option<&Path>,
    seed: u64,
    out: Option<&Path>,
) -> Result<()> {
    if datasets == 0 || size == 0 {
        bail!("--datasets and --size must be at least 1");
    }
    let expert = ModelFile::load(expert)?.model();
    let human = ModelFile::load(human)?.model();
    let dropdown = match dropdown {
        Some(p) => load_catalog(p)?,
        None => Catalog::bundled_dropdown(),
    };
    let tables = DemographicTables::bundled();
    let sets: Vec<Vec<CharacterRep>> = (0..datasets)
        .map(|d| {
            generate_characters(&tables, size, seed::derive(seed, d as u64))
                .into_iter()
                .map(|p| StudyCharacter::from_profile(p, &tables, MetConversion::Absolute).rep)
                .collect()
        })
        .collect();
    let models = Models {
        expert: &expert,
        human: &human,
    };
    let agreement = foil_agreement_analysis(&sets, &dropdown.reps(), models, seed)?;
    if let Some(out) = out {
        write(out, &pretty(&agreement)?)?;
    }
    print_json(&agreement)
}
