use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;
use shiftbench::attacks::{
    attack_batch, stratified_subsample, AttackError, AttackInput, AttackPreset, AttackSpec, DifferentiableClassifier,
    Norm, SoftmaxClassifier,
};
use shiftbench::corruptions::{corrupt_batch, CorruptionError, CorruptionKind, CorruptionSpec, Flavor, Image};
use shiftbench::report::{
    build_grid, correlation_analysis, emit_band, emit_correlations, emit_fit, emit_grid, emit_scatter, format_g6,
    run_shift_analyses, AnalysisConfig, Format, Overrides, ReportError, ShiftPair, Testbed, EXIT_DATA,
    EXIT_VALIDATION,
};

#[derive(Parser)]
#[command(name = "shiftbench", version, about = "Robustness analysis under distribution shift")]
struct Cli {
    /// More log output (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load the testbed named by a config and report grid problems.
    Ingest(Common),
    /// Scatter data, baseline fit and bootstrap band for each shift.
    Analyze(AnalyzeArgs),
    /// Correlations of effective robustness between shifts.
    Correlate(Common),
    /// The model × setting accuracy grid.
    Grid(Common),
    /// Apply one corruption to a directory of images.
    Corrupt(CorruptArgs),
    /// PGD against the toy classifier over a directory of images.
    Attack(AttackArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config's `out_dir`; defaults to the current directory.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    common: Common,
    /// Only these shifts (repeatable); all shifts by default.
    #[arg(long = "shift")]
    shifts: Vec<String>,
    #[arg(long, value_enum, default_value_t = OutFormat::Csv)]
    format: OutFormat,
    /// Bootstrap replicates for every shift (0 disables the band).
    #[arg(long)]
    replicates: Option<usize>,
    /// Bootstrap worker threads.
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum OutFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Memory,
    Disk,
}

#[derive(Args)]
struct CorruptArgs {
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    kind: String,
    #[arg(long, allow_negative_numbers = true)]
    severity: i64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `memory` writes PNG; `disk` JPEG-encodes the result.
    #[arg(long, value_enum, default_value_t = FlavorArg::Memory)]
    flavor: FlavorArg,
    #[arg(long, default_value_t = shiftbench::corruptions::DEFAULT_DISK_QUALITY)]
    jpeg_quality: u8,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    in_dir: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// linf0.5, linf2, l2-0.1 or l2-0.5.
    #[arg(long, conflicts_with_all = ["norm", "eps", "step", "steps"])]
    preset: Option<String>,
    #[arg(long, requires_all = ["eps", "step"])]
    norm: Option<String>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    #[arg(long, default_value_t = 100)]
    steps: usize,
    #[arg(long)]
    random_start: bool,
    /// Class-balanced fraction of images to attack.
    #[arg(long)]
    subsample: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// `file_name,label` lines; labels default to the clean prediction.
    #[arg(long)]
    labels: Option<PathBuf>,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    /// Seed of the toy classifier's weights.
    #[arg(long, default_value_t = 0)]
    model_seed: u64,
}

/// A failure with the exit status it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_VALIDATION,
            message: message.into(),
        }
    }

    fn data(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_DATA,
            message: message.into(),
        }
    }
}

impl From<ReportError> for Failure {
    fn from(e: ReportError) -> Self {
        Self {
            code: e.exit_code(),
            message: e.to_string(),
        }
    }
}

impl From<CorruptionError> for Failure {
    fn from(e: CorruptionError) -> Self {
        match e {
            CorruptionError::Codec { .. } | CorruptionError::Io { .. } | CorruptionError::InvalidImage(_) => {
                Failure::data(e.to_string())
            }
            _ => Failure::validation(e.to_string()),
        }
    }
}

impl From<AttackError> for Failure {
    fn from(e: AttackError) -> Self {
        match e {
            AttackError::InputLength { .. } | AttackError::InputRange(_) | AttackError::LabelOutOfRange { .. } => {
                Failure::data(e.to_string())
            }
            _ => Failure::validation(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::data(format!("{}: {e}", path.display()))
}

fn load_config(c: &Common, extra: Overrides) -> Result<AnalysisConfig, Failure> {
    let mut config = AnalysisConfig::load(&c.config)?;
    config.apply(&Overrides {
        seed: c.seed,
        out_dir: c.out_dir.clone(),
        ..extra
    });
    Ok(config)
}

fn out_dir(config: &AnalysisConfig) -> Result<PathBuf, Failure> {
    let dir = config.out_dir.clone().unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&dir).map_err(|e| io_failure(&dir, e))?;
    Ok(dir)
}

fn ingest(c: &Common) -> Result<(), Failure> {
    let config = load_config(c, Overrides::default())?;
    let tb = Testbed::load(&config)?;
    let report = tb.validate();
    let mut text = String::new();
    let _ = writeln!(
        text,
        "{} models, {} settings, {} cells",
        tb.registry.len(),
        tb.store.settings().count(),
        tb.store.coverage().len()
    );
    for issue in &report.issues {
        let _ = writeln!(text, "{issue}");
    }
    print!("{text}");
    if config.out_dir.is_some() {
        let path = out_dir(&config)?.join("validation.txt");
        fs::write(&path, &text).map_err(|e| io_failure(&path, e))?;
    }
    if report.has_structural_errors() {
        return Err(Failure::validation("grid has structural errors"));
    }
    Ok(())
}

fn analyze(a: &AnalyzeArgs) -> Result<(), Failure> {
    let config = load_config(
        &a.common,
        Overrides {
            replicates: a.replicates,
            workers: a.workers,
            ..Overrides::default()
        },
    )?;
    let shifts: Vec<ShiftPair> = if a.shifts.is_empty() {
        config.shifts.clone()
    } else {
        a.shifts
            .iter()
            .map(|s| config.shift(s).cloned())
            .collect::<Result<_, _>>()?
    };
    if shifts.is_empty() {
        return Err(Failure::validation("config defines no shifts"));
    }
    let tb = Testbed::load(&config)?;
    let reports = run_shift_analyses(&tb, &shifts, config.seed)?;
    let dir = out_dir(&config)?;
    let format = match a.format {
        OutFormat::Csv => Format::Csv,
        OutFormat::Json => Format::Json,
    };
    for r in &reports {
        let id = &r.shift_id;
        emit_scatter(r, dir.join(format!("{id}.scatter.{}", format.extension())), format)?;
        emit_fit(&r.fit, dir.join(format!("{id}.fit.json")))?;
        if let Some(band) = &r.band {
            emit_band(band, &r.fit, dir.join(format!("{id}.band.csv")))?;
        }
        info!("{id}: {} models, {} missing", r.rows.len(), r.missing_models.len());
    }
    Ok(())
}

fn correlate(c: &Common) -> Result<(), Failure> {
    let config = load_config(c, Overrides::default())?;
    let corr = config
        .correlation
        .as_ref()
        .ok_or_else(|| Failure::validation("config has no [correlation] section"))?;
    let pick = |ids: &[String]| -> Result<Vec<ShiftPair>, ReportError> {
        ids.iter().map(|i| config.shift(i).cloned()).collect()
    };
    let tb = Testbed::load(&config)?;
    let entries = correlation_analysis(&tb, &pick(&corr.rows)?, &pick(&corr.cols)?, corr.model_filter()?)?;
    emit_correlations(&entries, out_dir(&config)?.join("correlations.csv"))?;
    Ok(())
}

fn grid(c: &Common) -> Result<(), Failure> {
    let config = load_config(c, Overrides::default())?;
    let tb = Testbed::load(&config)?;
    emit_grid(&build_grid(&tb)?, out_dir(&config)?.join("grid.csv"))?;
    Ok(())
}

/// Image files (png, jpg, jpeg) of a directory, sorted by name.
fn list_images(dir: &Path) -> Result<Vec<PathBuf>, Failure> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| io_failure(dir, e))? {
        let path = entry.map_err(|e| io_failure(dir, e))?.path();
        let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
        if matches!(ext.as_deref(), Some("png" | "jpg" | "jpeg")) {
            out.push(path);
        }
    }
    out.sort();
    if out.is_empty() {
        return Err(Failure::data(format!("no png or jpeg images in {}", dir.display())));
    }
    Ok(out)
}

fn stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn load_images(dir: &Path) -> Result<Vec<(String, Image)>, Failure> {
    list_images(dir)?
        .iter()
        .map(|p| Ok((stem(p), Image::open(p)?)))
        .collect()
}

fn corrupt(a: &CorruptArgs) -> Result<(), Failure> {
    let kind: CorruptionKind = a.kind.parse()?;
    let flavor = match a.flavor {
        FlavorArg::Memory => Flavor::InMemory,
        FlavorArg::Disk => Flavor::OnDisk { quality: a.jpeg_quality },
    };
    if !(1..=100).contains(&a.jpeg_quality) {
        return Err(CorruptionError::InvalidQuality(a.jpeg_quality).into());
    }
    let spec = CorruptionSpec::new(kind, a.severity)?.with_seed(a.seed).with_flavor(flavor);
    let items = load_images(&a.in_dir)?;
    let out = corrupt_batch(&items, &spec)?;
    fs::create_dir_all(&a.out_dir).map_err(|e| io_failure(&a.out_dir, e))?;
    for ((id, _), img) in items.iter().zip(&out) {
        match flavor {
            Flavor::InMemory => img.save_png(&a.out_dir.join(format!("{id}.png")))?,
            // The kernel output already went through the JPEG round trip;
            // this encode is the file the evaluation reads.
            Flavor::OnDisk { quality } => img.save_jpeg(&a.out_dir.join(format!("{id}.jpg")), quality)?,
        }
    }
    info!("{}: wrote {} images", spec.setting_id(), out.len());
    Ok(())
}

fn attack_spec(a: &AttackArgs) -> Result<AttackSpec, Failure> {
    let spec = match (&a.preset, &a.norm) {
        (Some(p), _) => p.parse::<AttackPreset>()?.spec(),
        (None, Some(n)) => {
            let norm: Norm = n.parse()?;
            AttackSpec::new(norm, a.eps.unwrap_or_default(), a.step.unwrap_or_default(), a.steps)?
        }
        (None, None) => return Err(Failure::validation("give --preset or --norm/--eps/--step")),
    };
    Ok(spec.with_random_start(a.random_start))
}

fn read_labels(path: &Path) -> Result<std::collections::HashMap<String, usize>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut out = std::collections::HashMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = || Failure::data(format!("{}:{}: expected `file_name,label`", path.display(), i + 1));
        let (name, label) = line.split_once(',').ok_or_else(bad)?;
        let label = label.trim().parse().map_err(|_| bad())?;
        out.insert(stem(Path::new(name.trim())), label);
    }
    Ok(out)
}

fn attack(a: &AttackArgs) -> Result<(), Failure> {
    let spec = attack_spec(a)?;
    if a.classes < 2 {
        return Err(Failure::validation("--classes must be at least 2"));
    }
    let items = load_images(&a.in_dir)?;
    let (h, w) = (items[0].1.height(), items[0].1.width());
    if let Some((id, _)) = items.iter().find(|(_, i)| (i.height(), i.width()) != (h, w)) {
        return Err(Failure::data(format!("{id} is not {h}×{w} like the first image")));
    }
    let model = SoftmaxClassifier::toy(h * w * 3, a.classes, a.model_seed);
    let labels = a.labels.as_deref().map(read_labels).transpose()?;
    let mut inputs = Vec::with_capacity(items.len());
    for (id, img) in &items {
        let label = match &labels {
            Some(map) => *map
                .get(id)
                .ok_or_else(|| Failure::data(format!("no label for {id}")))?,
            None => model.predict(img.data()),
        };
        inputs.push(AttackInput {
            example_id: id.clone(),
            x: img.data().to_vec(),
            label,
        });
    }
    if let Some(f) = a.subsample {
        let keyed: Vec<(String, usize)> = inputs.iter().map(|i| (i.example_id.clone(), i.label)).collect();
        let keep = stratified_subsample(&keyed, f, a.seed)?;
        inputs = keep.into_iter().map(|k| inputs[k].clone()).collect();
    }
    let outcomes = attack_batch(&model, &inputs, &spec, a.seed)?;

    fs::create_dir_all(&a.out_dir).map_err(|e| io_failure(&a.out_dir, e))?;
    let mut manifest = String::from("example_id,label,initial_loss,final_loss,linf,l2\n");
    for (inp, out) in inputs.iter().zip(&outcomes) {
        let img = Image::new(h, w, out.adversarial.clone())?;
        img.save_png(&a.out_dir.join(format!("{}.png", inp.example_id)))?;
        let delta: Vec<f64> = out.adversarial.iter().zip(&inp.x).map(|(a, b)| a - b).collect();
        let linf = delta.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let l2 = delta.iter().map(|d| d * d).sum::<f64>().sqrt();
        let _ = writeln!(
            manifest,
            "{},{},{},{},{},{}",
            inp.example_id,
            inp.label,
            format_g6(out.initial_loss()),
            format_g6(out.final_loss()),
            format_g6(linf),
            format_g6(l2)
        );
    }
    let path = a.out_dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|e| io_failure(&path, e))?;
    info!("{spec}: attacked {} of {} images", inputs.len(), items.len());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Ingest(c) => ingest(c),
        Command::Analyze(a) => analyze(a),
        Command::Correlate(c) => correlate(c),
        Command::Grid(c) => grid(c),
        Command::Corrupt(a) => corrupt(a),
        Command::Attack(a) => attack(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code as u8)
        }
    }
}
