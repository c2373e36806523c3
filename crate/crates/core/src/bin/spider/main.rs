//! Command-line surface: parse/validate template strings, forge
//! datasets, sample stage mixtures, train the controller, gradient-check
//! it, run the end-to-end demo, and emit pseudo datasets.
//!
//! Exit codes: 0 success, 2 parse error, 3 planner miss, 64 usage error,
//! 1 anything else. All randomness flows from `--seed` (falling back to
//! the `SPIDER_SEED` environment variable, then 0) through documented
//! substreams, so reruns reproduce artifacts byte-for-byte.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use spider_core::controller::{
    load_checkpoint, save_checkpoint, Controller, ControllerConfig,
};
use spider_core::forge::{
    build_dataset, builtin_pool, default_count, emit_pseudo_dataset, load_captions, load_pool,
    read_instances, save_captions, save_pool, synth_captions, synth_gallery, write_instances,
    write_pseudo, Flavor, SourceKind, StageMix, TmmInstance,
};
use spider_core::numerics::AdamState;
use spider_core::pipeline::{
    assemble_items, pilot_items_from_gallery, run_pipeline, train_loop, Gallery, MockEncoders,
    PipelineError, Planner,
};
use spider_core::template::{parse_answer, parse_question, ParseError};

#[derive(Parser)]
#[command(name = "spider", version, about = "Any-to-many modality generation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a question or answer string and print its structure.
    Parse(ParseArgs),
    /// Forge a dataset flavor from a captions file and an instruction pool.
    Forge(ForgeArgs),
    /// Sample dataset names (or merge instance files) per stage proportions.
    Mix(MixArgs),
    /// Train the decoders-controller and write a checkpoint plus metrics.
    Train(TrainArgs),
    /// Check controller gradients against central finite differences.
    Gradcheck(GradcheckArgs),
    /// Run one question through the full pipeline.
    Demo(DemoArgs),
    /// Emit a pseudo many-modal dataset from a trained checkpoint.
    Pseudo(PseudoArgs),
    /// Generate synthetic inputs: captions, galleries, or pool files.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ParseArgs {
    /// Question string to parse.
    #[arg(long, conflicts_with = "answer")]
    question: Option<String>,
    /// Answer string to parse.
    #[arg(long)]
    answer: Option<String>,
    /// Emit JSON instead of a readable summary.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ForgeArgs {
    #[arg(long)]
    flavor: Flavor,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Captions JSONL file (see `synth --what captions`).
    #[arg(long)]
    captions: PathBuf,
    /// Instruction pool JSON file; defaults to the builtin pool.
    #[arg(long)]
    pool: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MixArgs {
    /// Training stage (1, 2, or 3).
    #[arg(long)]
    stage: u8,
    #[arg(long)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Optional `name=path` instance files to merge by drawn name.
    #[arg(long = "data", value_parser = parse_name_path)]
    data: Vec<(String, PathBuf)>,
}

#[derive(Args)]
struct TrainArgs {
    /// Forged instances JSONL; omitted = one item per gallery asset.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    gallery: PathBuf,
    /// Controller config JSON; defaults to the standard configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    steps: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    metrics: PathBuf,
    /// Items per optimization step.
    #[arg(long, default_value_t = 4)]
    batch: usize,
}

#[derive(Args)]
struct GradcheckArgs {
    /// Controller config JSON; defaults to a compact check-sized config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scale one backward rule by 1.1 to prove the oracle catches it.
    #[arg(long)]
    corrupt: bool,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    eps: f64,
}

#[derive(Args)]
struct DemoArgs {
    #[arg(long)]
    question: String,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    gallery: PathBuf,
}

#[derive(Args)]
struct PseudoArgs {
    #[arg(long)]
    flavor: Flavor,
    /// Records to emit; defaults to the flavor's standard count.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    ckpt: PathBuf,
    #[arg(long)]
    gallery: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct SynthArgs {
    /// What to generate: captions | gallery | pool.
    #[arg(long)]
    what: String,
    /// Caption corpus for `--what captions`: cc3m | webvid | audiocap |
    /// coco | cities.
    #[arg(long)]
    source: Option<SourceKind>,
    /// Flavor for `--what pool`.
    #[arg(long)]
    flavor: Option<Flavor>,
    #[arg(long, default_value_t = 200)]
    count: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_name_path(s: &str) -> Result<(String, PathBuf), String> {
    s.split_once('=')
        .map(|(name, path)| (name.to_string(), PathBuf::from(path)))
        .ok_or_else(|| format!("expected name=path, got `{s}`"))
}

/// Error wrapper deciding the process exit code.
enum CliError {
    Parse(ParseError),
    PlannerMiss(String),
    Usage(String),
    Other(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Parse(_) => 2,
            CliError::PlannerMiss(_) => 3,
            CliError::Usage(_) => 64,
            CliError::Other(_) => 1,
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Parse(e) => format!("parse error: {e}"),
            CliError::PlannerMiss(m) => format!("planner: {m}"),
            CliError::Usage(m) => format!("usage: {m}"),
            CliError::Other(m) => m.clone(),
        }
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::Parse(e)
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Parse(p) => CliError::Parse(p),
            PipelineError::Plan(p) => CliError::PlannerMiss(p.to_string()),
            other => CliError::Other(other.to_string()),
        }
    }
}

macro_rules! other_from {
    ($($ty:ty),+ $(,)?) => {$(
        impl From<$ty> for CliError {
            fn from(e: $ty) -> Self {
                CliError::Other(e.to_string())
            }
        }
    )+};
}

other_from!(
    std::io::Error,
    serde_json::Error,
    spider_core::forge::CaptionsError,
    spider_core::forge::DatasetError,
    spider_core::forge::PoolError,
    spider_core::forge::PseudoError,
    spider_core::forge::SynthError,
    spider_core::forge::MixError,
    spider_core::forge::dataset::InstancesReadError,
    spider_core::pipeline::GalleryError,
    spider_core::pipeline::TrainingDataError,
    spider_core::controller::CheckpointError,
    spider_core::controller::ControllerError,
    spider_core::controller::ConfigError,
);

fn resolve_seed(flag: Option<u64>) -> u64 {
    flag.or_else(|| {
        std::env::var("SPIDER_SEED")
            .ok()
            .and_then(|s| s.parse().ok())
    })
    .unwrap_or(0)
}

/// Print a potentially large payload, exiting quietly if the consumer
/// closed the pipe (e.g. `spider demo ... | head`).
fn emit(payload: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if out
        .write_all(payload.as_bytes())
        .and_then(|_| out.write_all(b"\n"))
        .is_err()
    {
        std::process::exit(0);
    }
}

fn git_describe() -> String {
    std::process::Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".to_string())
}

/// Written next to every output artifact so a run can be replayed.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    seed: u64,
    config: Option<String>,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    wall_clock_secs: f64,
    unix_time_secs: u64,
    git_describe: String,
}

impl RunManifest {
    fn new(command: &str, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            seed,
            config: None,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            wall_clock_secs: 0.0,
            unix_time_secs: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            git_describe: git_describe(),
        }
    }

    fn input(mut self, key: &str, path: impl AsRef<Path>) -> Self {
        self.inputs
            .insert(key.to_string(), path.as_ref().display().to_string());
        self
    }

    fn output(mut self, path: impl AsRef<Path>) -> Self {
        self.outputs.push(path.as_ref().display().to_string());
        self
    }

    fn write(mut self, started: Instant, primary_out: &Path) -> Result<(), CliError> {
        self.wall_clock_secs = started.elapsed().as_secs_f64();
        let mut name = primary_out.as_os_str().to_os_string();
        name.push(".manifest.json");
        fs::write(
            PathBuf::from(name),
            serde_json::to_string_pretty(&self)? + "\n",
        )?;
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("{}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Parse(args) => cmd_parse(args),
        Command::Forge(args) => cmd_forge(args),
        Command::Mix(args) => cmd_mix(args),
        Command::Train(args) => cmd_train(args),
        Command::Gradcheck(args) => cmd_gradcheck(args),
        Command::Demo(args) => cmd_demo(args),
        Command::Pseudo(args) => cmd_pseudo(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn cmd_parse(args: ParseArgs) -> Result<(), CliError> {
    match (args.question, args.answer) {
        (Some(q), None) => {
            let message = parse_question(&q)?;
            if args.json {
                emit(&serde_json::to_string_pretty(&message)?);
            } else {
                println!("task: {}", message.task_prompt);
                match &message.input_asset {
                    Some(a) => println!("input asset: {} ({})", a.asset_ref, a.modality),
                    None => println!("input asset: none"),
                }
                println!("instruction: {}", message.instruction);
            }
            Ok(())
        }
        (None, Some(a)) => {
            let message = parse_answer(&a)?;
            if args.json {
                emit(&serde_json::to_string_pretty(&message)?);
            } else {
                println!("groups: {}", message.groups.len());
                for (i, g) in message.groups.iter().enumerate() {
                    println!(
                        "  {i}: {} t_prompt=`{}` text=`{}`",
                        g.modality, g.t_prompt, g.text_response
                    );
                }
                println!("tail: `{}`", message.tail_text);
            }
            Ok(())
        }
        _ => Err(CliError::Usage(
            "pass exactly one of --question or --answer".into(),
        )),
    }
}

fn cmd_forge(args: ForgeArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = resolve_seed(args.seed);
    let records = load_captions(&args.captions)?;
    let pool = match &args.pool {
        Some(path) => load_pool(path)?,
        None => builtin_pool(args.flavor),
    };
    let instances = build_dataset(args.flavor, args.count, seed, &records, &pool)?;
    write_instances(&args.out, &instances)?;
    println!(
        "forged {} {} instances -> {}",
        instances.len(),
        args.flavor,
        args.out.display()
    );
    let mut manifest = RunManifest::new("forge", seed)
        .input("captions", &args.captions)
        .output(&args.out);
    if let Some(pool) = &args.pool {
        manifest = manifest.input("pool", pool);
    }
    manifest.write(started, &args.out)
}

fn cmd_mix(args: MixArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = resolve_seed(args.seed);
    let mix = StageMix::for_stage(args.stage)?;
    let mut rng = spider_core::rng::Rng::new(seed).substream("mix");
    if args.data.is_empty() {
        let mut out = String::new();
        for _ in 0..args.count {
            out.push_str(mix.sample(&mut rng));
            out.push('\n');
        }
        fs::write(&args.out, out)?;
    } else {
        let mut sources: BTreeMap<String, (Vec<TmmInstance>, usize)> = BTreeMap::new();
        for (name, path) in &args.data {
            sources.insert(name.clone(), (read_instances(path)?, 0));
        }
        let mut merged = Vec::with_capacity(args.count);
        for _ in 0..args.count {
            let name = mix.sample(&mut rng);
            let Some((instances, cursor)) = sources.get_mut(name) else {
                return Err(CliError::Usage(format!(
                    "stage {} draws dataset `{name}` but no --data {name}=path was given",
                    args.stage
                )));
            };
            if instances.is_empty() {
                return Err(CliError::Other(format!("dataset `{name}` is empty")));
            }
            merged.push(instances[*cursor % instances.len()].clone());
            *cursor += 1;
        }
        write_instances(&args.out, &merged)?;
    }
    println!(
        "stage {} mix of {} draws -> {}",
        args.stage,
        args.count,
        args.out.display()
    );
    let mut manifest = RunManifest::new("mix", seed).output(&args.out);
    for (name, path) in &args.data {
        manifest = manifest.input(name, path);
    }
    manifest.write(started, &args.out)
}

fn load_config(path: &Option<PathBuf>) -> Result<Option<ControllerConfig>, CliError> {
    match path {
        None => Ok(None),
        Some(p) => {
            let config: ControllerConfig = serde_json::from_str(&fs::read_to_string(p)?)?;
            config.validate()?;
            Ok(Some(config))
        }
    }
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = resolve_seed(args.seed);
    let config = load_config(&args.config)?.unwrap_or_default();
    let encoders = MockEncoders::new(config.d, config.d_c);
    let gallery = Gallery::load(&args.gallery, &encoders)?;
    let items = match &args.data {
        Some(path) => assemble_items(&read_instances(path)?, &encoders, config.l)?,
        None => pilot_items_from_gallery(&gallery, &encoders, config.l),
    };
    let mut controller = Controller::init(config, seed)?;
    let mut adam = AdamState::with_defaults();
    let mut csv =
        String::from("step,loss_total,loss_align,loss_recon,mean_cos_align,mean_cos_recon\r\n");
    let history = train_loop(
        &mut controller,
        &mut adam,
        &items,
        args.steps,
        args.batch,
        seed,
        |step, stats| {
            let _ = write!(
                csv,
                "{step},{},{},{},{},{}\r\n",
                stats.loss_total,
                stats.loss_align,
                stats.loss_recon,
                stats.mean_cos_align,
                stats.mean_cos_recon
            );
        },
    )?;
    fs::write(&args.metrics, csv)?;
    save_checkpoint(&args.ckpt, &controller)?;
    let eval = controller.evaluate(&items)?;
    println!(
        "trained {} steps on {} items: loss {:.4} -> {:.4}, cos(S,T_e)={:.4}, cos(Qbar,E)={:.4}",
        history.len(),
        items.len(),
        history.first().map_or(f64::NAN, |s| s.loss_total),
        eval.loss_total,
        eval.mean_cos_align,
        eval.mean_cos_recon
    );
    let mut manifest = RunManifest::new("train", seed)
        .input("gallery", &args.gallery)
        .output(&args.ckpt)
        .output(&args.metrics);
    if let Some(data) = &args.data {
        manifest = manifest.input("data", data);
    }
    if let Some(config) = &args.config {
        manifest.config = Some(config.display().to_string());
    }
    manifest.write(started, &args.ckpt)
}

fn cmd_gradcheck(args: GradcheckArgs) -> Result<(), CliError> {
    let seed = resolve_seed(args.seed);
    let config = load_config(&args.config)?.unwrap_or(ControllerConfig {
        d: 16,
        d_c: 8,
        router_hidden: 8,
        ..ControllerConfig::default()
    });
    let controller = Controller::init(config.clone(), seed)?;
    let encoders = MockEncoders::new(config.d, config.d_c);
    let mut rng = spider_core::rng::Rng::new(seed).substream("gradcheck");
    let items: Vec<_> = spider_core::template::Modality::ALL
        .iter()
        .take(2)
        .map(|&m| {
            let asset = format!("gc_{m}_{}", rng.next_u64());
            let context = encoders.encode_modality(&asset, m);
            spider_core::controller::BatchItem {
                modality: m,
                m_e: encoders.llm_hidden(&context, m, config.l),
                t_e: encoders
                    .encode_text(&format!("probe caption {}", rng.next_u64()))
                    .expect("non-empty probe"),
                e: context,
            }
        })
        .collect();
    let report = controller.grad_check(&items, args.eps, args.corrupt)?;
    println!(
        "max relative error {:.3e} at `{}`[{}] (analytic {:.6e}, numeric {:.6e})",
        report.max_rel_err, report.worst_param, report.worst_index, report.analytic, report.numeric
    );
    if report.max_rel_err <= 1e-4 {
        Ok(())
    } else {
        Err(CliError::Other(format!(
            "gradient check failed: {:.3e} > 1e-4",
            report.max_rel_err
        )))
    }
}

fn cmd_demo(args: DemoArgs) -> Result<(), CliError> {
    let controller = load_checkpoint(&args.ckpt)?;
    let encoders = MockEncoders::new(controller.config.d, controller.config.d_c);
    let gallery = Gallery::load(&args.gallery, &encoders)?;
    let planner = Planner::with_builtin_pools();
    let result = run_pipeline(&args.question, &controller, &gallery, &encoders, &planner)?;
    emit(&serde_json::to_string_pretty(&result)?);
    Ok(())
}

fn cmd_pseudo(args: PseudoArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = resolve_seed(args.seed);
    let controller = load_checkpoint(&args.ckpt)?;
    let encoders = MockEncoders::new(controller.config.d, controller.config.d_c);
    let gallery = Gallery::load(&args.gallery, &encoders)?;
    let planner = Planner::with_builtin_pools();
    let count = args.count.unwrap_or_else(|| default_count(args.flavor));
    let records = emit_pseudo_dataset(
        args.flavor,
        count,
        seed,
        &controller,
        &gallery,
        &encoders,
        &planner,
    )?;
    write_pseudo(&args.out, &records)?;
    println!(
        "emitted {} pseudo {} records -> {}",
        records.len(),
        args.flavor,
        args.out.display()
    );
    RunManifest::new("pseudo", seed)
        .input("ckpt", &args.ckpt)
        .input("gallery", &args.gallery)
        .output(&args.out)
        .write(started, &args.out)
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let started = Instant::now();
    let seed = resolve_seed(args.seed);
    match args.what.as_str() {
        "captions" => {
            let source = args
                .source
                .ok_or_else(|| CliError::Usage("--what captions needs --source".into()))?;
            let records = synth_captions(source, args.count, seed);
            save_captions(&args.out, &records)?;
            println!(
                "wrote {} {} captions -> {}",
                records.len(),
                source.name(),
                args.out.display()
            );
        }
        "gallery" => {
            let records = synth_gallery(args.count, seed)?;
            Gallery::save(&args.out, &records)?;
            println!("wrote {}-asset gallery -> {}", records.len(), args.out.display());
        }
        "pool" => {
            let flavor = args
                .flavor
                .ok_or_else(|| CliError::Usage("--what pool needs --flavor".into()))?;
            let pool = builtin_pool(flavor);
            save_pool(&args.out, &pool)?;
            println!(
                "wrote {}-template {} pool -> {}",
                pool.len(),
                flavor,
                args.out.display()
            );
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown --what `{other}` (captions | gallery | pool)"
            )))
        }
    }
    RunManifest::new("synth", seed)
        .output(&args.out)
        .write(started, &args.out)
}
