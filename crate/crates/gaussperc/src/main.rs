//! Command-line front end. Subcommands map one-to-one onto the library's
//! experiment drivers; machine-readable outputs (GPF1/GPM1 binaries, CSV
//! tables, JSON-lines reports) land under `--out`, human summaries on
//! stdout.
//!
//! Exit codes: 0 success, 1 usage or runtime error, 2 when a deterministic
//! invariant fails (trifurcation/boundary inequality, shift lower bounds,
//! inclusion-map well-definedness).

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use gaussperc::burton_keane::trifurcation_density_sweep;
use gaussperc::connectivity::{
    excursion_mask, giant_components, label_components, Adjacency, ExcursionMask, GiantCriterion,
};
use gaussperc::counting::{count_boundary_components, count_discrete_critical_points};
use gaussperc::experiments::{
    estimate_crossing_probability, estimate_level_threshold, global_equivalence_rate,
    shift_event_frequency_compare, uniqueness_statistics, ExperimentConfig, ExperimentReport,
    GiantRule, ShiftEvent, ShiftParams,
};
use gaussperc::grid::{copy_window, GridSpec};
use gaussperc::io::{
    append_jsonl, load_profile_csv, read_field, read_mask, write_count_csv, write_field,
    write_labeling_csv, write_mask, write_sweep_csv, CountRecord,
};
use gaussperc::kernels::KernelSpec;
use gaussperc::shift::{shift_sample, ShiftSpec};
use gaussperc::synthesis::{CirculantEmbedding, FieldSample, SpectralSynthesizer};
use gaussperc::{Error, Result};
use ndarray::{ArrayD, IxDyn};

#[derive(Parser)]
#[command(
    name = "gaussperc",
    version,
    about = "Monte Carlo laboratory for excursion sets of stationary Gaussian fields",
    long_about = "Synthesizes stationary Gaussian fields, labels excursion components, \
                  builds sample-wise lower-bounding shifts, and runs the uniqueness-of-the-\
                  unbounded-component experiments. Boxes of scale L are [-L, L]^d."
)]
struct Cli {
    /// JSON experiment config; replaces the per-flag config of experiment
    /// subcommands (threshold, uniqueness, ge-rate, cm-compare).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed; overrides both flag and config-file seeds.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for reports and tables (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize field samples and write them as GPF1 files.
    Synth(SynthArgs),
    /// Label the components of a field's excursion set (or a stored mask).
    Label(LabelArgs),
    /// Count boundary-shell components and discrete critical points.
    Count(CountArgs),
    /// Build or apply a nonnegative lower-bounding shift.
    #[command(subcommand)]
    Shift(ShiftCmd),
    /// Sweep trifurcation statistics across box scales.
    Trifurcate(TrifurcateArgs),
    /// Bisect for the level at which crossing probability is 1/2.
    Threshold(ThresholdArgs),
    /// Distribution of the number of giant components per box scale.
    Uniqueness(UniquenessArgs),
    /// Rate of percolation equivalence outside a ball under the shift.
    GeRate(GeRateArgs),
    /// Compare event frequencies between plain and shifted ensembles.
    CmCompare(CmCompareArgs),
}

/// Kernel selector: `bf`, `bf:<scale>`, `cauchy:<alpha>`, `tab:<file.csv>`.
fn parse_kernel(spec: &str, dim: usize) -> Result<KernelSpec> {
    let (family, param) = match spec.split_once(':') {
        Some((f, p)) => (f, Some(p)),
        None => (spec, None),
    };
    match family {
        "bf" => {
            let scale = match param {
                Some(p) => p.parse::<f64>().map_err(|e| {
                    Error::InvalidConfig(format!("bf length scale {p:?}: {e}"))
                })?,
                None => 1.0,
            };
            KernelSpec::bargmann_fock(scale, dim)
        }
        "cauchy" => {
            let alpha = param.ok_or_else(|| {
                Error::InvalidConfig("cauchy kernel needs an exponent: cauchy:<alpha>".into())
            })?;
            let alpha = alpha.parse::<f64>().map_err(|e| {
                Error::InvalidConfig(format!("cauchy exponent {alpha:?}: {e}"))
            })?;
            KernelSpec::cauchy(alpha, dim)
        }
        "tab" => {
            let path = param.ok_or_else(|| {
                Error::InvalidConfig("tabulated kernel needs a file: tab:<profile.csv>".into())
            })?;
            KernelSpec::tabulated(load_profile_csv(path)?, dim)
        }
        other => Err(Error::InvalidConfig(format!(
            "unknown kernel family {other:?} (expected bf, cauchy, or tab)"
        ))),
    }
}

/// Parse a comma-separated list of seeds and/or half-open `a..b` ranges,
/// e.g. `7`, `1,2,3`, `0..16`, or `1,8..12`.
fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    let mut out = Vec::new();
    for token in spec.split(',') {
        let token = token.trim();
        if let Some((a, b)) = token.split_once("..") {
            let a: u64 = a
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("seed range start {a:?}: {e}")))?;
            let b: u64 = b
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("seed range end {b:?}: {e}")))?;
            if a >= b {
                return Err(Error::InvalidConfig(format!("empty seed range {a}..{b}")));
            }
            out.extend(a..b);
        } else {
            let s: u64 = token
                .parse()
                .map_err(|e| Error::InvalidConfig(format!("seed {token:?}: {e}")))?;
            out.push(s);
        }
    }
    Ok(out)
}

fn parse_f64_list(spec: &str, what: &str) -> Result<Vec<f64>> {
    spec.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| Error::InvalidConfig(format!("{what} entry {s:?}: {e}")))
        })
        .collect()
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthMethod {
    /// Exact covariance through circulant embedding on an enlarged torus.
    Circulant,
    /// Spectral mode sampling (approximate, works when embedding fails).
    Spectral,
}

#[derive(Args)]
struct SynthArgs {
    /// Kernel: bf, bf:<scale>, cauchy:<alpha>, tab:<profile.csv>.
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    dim: usize,
    /// Vertices per axis.
    #[arg(long)]
    cells: usize,
    /// Physical box edge length (spacing = extent / cells).
    #[arg(long)]
    extent: f64,
    /// Seeds: comma-separated numbers and/or half-open ranges, e.g.
    /// `7`, `1,2,3`, or `0..400`.
    #[arg(long)]
    seeds: String,
    #[arg(long, value_enum, default_value_t = SynthMethod::Circulant)]
    method: SynthMethod,
}

#[derive(Args)]
struct LabelArgs {
    /// GPF1 field file to threshold and label.
    #[arg(long, conflicts_with = "mask")]
    field: Option<PathBuf>,
    /// GPM1 mask file to label directly.
    #[arg(long)]
    mask: Option<PathBuf>,
    /// Excursion level (used with --field).
    #[arg(long, default_value_t = 0.0)]
    level: f64,
    /// Use (3^d - 1)-neighbour adjacency instead of faces.
    #[arg(long)]
    diagonals: bool,
    /// Also store the thresholded mask as GPM1 next to the CSV.
    #[arg(long)]
    save_mask: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CountWhat {
    Boundary,
    Critical,
    Both,
}

#[derive(Args)]
struct CountArgs {
    #[arg(long, value_enum)]
    what: CountWhat,
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    spacing: f64,
    /// Excursion levels for boundary counts, comma separated.
    #[arg(long, default_value = "0")]
    levels: String,
    /// Box scales L (boxes are [-L, L]^d), comma separated.
    #[arg(long = "L")]
    l: String,
    /// Samples per scale.
    #[arg(long, default_value_t = 100)]
    n: usize,
}

#[derive(Subcommand)]
enum ShiftCmd {
    /// Choose the floor, assemble the shift, verify its bounds on a grid,
    /// and store the spec as JSON.
    Build(ShiftBuildArgs),
    /// Add a stored shift to a GPF1 field sample.
    Apply(ShiftApplyArgs),
}

#[derive(Args)]
struct ShiftBuildArgs {
    #[arg(long)]
    kernel: String,
    #[arg(long)]
    dim: usize,
    #[arg(long)]
    spacing: f64,
    /// Excursion level the shifted field must reach on the ball.
    #[arg(long)]
    level: f64,
    /// Ball radius the guarantee covers.
    #[arg(long)]
    radius: f64,
    /// Target probability for the Monte Carlo floor choice.
    #[arg(long, default_value_t = 0.75)]
    prob: f64,
    /// Pin the floor directly instead of choosing it by quantile.
    #[arg(long)]
    floor_m: Option<f64>,
    /// Samples for the floor choice.
    #[arg(long, default_value_t = 100)]
    floor_samples: usize,
    /// Physical half-extent of the verification grid (default 2 x radius).
    #[arg(long)]
    half_extent: Option<f64>,
}

#[derive(Args)]
struct ShiftApplyArgs {
    /// Shift spec JSON produced by `shift build`.
    #[arg(long)]
    spec: PathBuf,
    /// GPF1 field to shift.
    #[arg(long)]
    field: PathBuf,
}

#[derive(Args)]
struct TrifurcateArgs {
    #[arg(long, default_value = "bf")]
    kernel: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.5)]
    spacing: f64,
    #[arg(long, allow_hyphen_values = true)]
    level: f64,
    /// Ball radius removed around each lattice point.
    #[arg(long = "R")]
    r: f64,
    /// Box scales, comma separated.
    #[arg(long = "L")]
    l: String,
    /// Samples per scale.
    #[arg(long)]
    n: usize,
}

#[derive(Args)]
struct ExperimentFlags {
    #[arg(long, default_value = "bf")]
    kernel: String,
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 0.25)]
    spacing: f64,
    /// Samples per probe.
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
}

impl ExperimentFlags {
    fn config(&self, levels: Vec<f64>, box_scales: Vec<f64>) -> Result<ExperimentConfig> {
        Ok(ExperimentConfig {
            kernel: parse_kernel(&self.kernel, self.dim)?,
            spacing: self.spacing,
            levels,
            box_scales,
            n_samples: self.n,
            seed: self.base_seed,
            giant_rule: GiantRule::CrossesAxis0,
            shift: None,
        })
    }
}

#[derive(Args)]
struct ThresholdArgs {
    #[command(flatten)]
    common: ExperimentFlags,
    /// Initial level bracket `lo,hi` with crossing above/below 1/2.
    #[arg(long, default_value = "-0.6,0.6", allow_hyphen_values = true)]
    bracket: String,
    /// Box scale for the probes.
    #[arg(long = "L", default_value_t = 16.0)]
    l: f64,
}

#[derive(Args)]
struct UniquenessArgs {
    #[command(flatten)]
    common: ExperimentFlags,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    level: f64,
    /// Box scales, comma separated.
    #[arg(long = "L", default_value = "8,16,32")]
    l: String,
}

#[derive(Args)]
struct ShiftFlags {
    /// Ball radius the shift must dominate.
    #[arg(long)]
    radius: f64,
    /// Pin the floor; otherwise it is chosen by quantile.
    #[arg(long)]
    floor_m: Option<f64>,
    #[arg(long, default_value_t = 0.75)]
    prob: f64,
    #[arg(long, default_value_t = 100)]
    floor_samples: usize,
}

impl ShiftFlags {
    fn params(&self) -> ShiftParams {
        ShiftParams {
            radius: self.radius,
            floor_m: self.floor_m,
            target_prob: self.prob,
            floor_samples: self.floor_samples,
        }
    }
}

#[derive(Args)]
struct GeRateArgs {
    #[command(flatten)]
    common: ExperimentFlags,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    level: f64,
    /// Box scale of the synthesis window.
    #[arg(long = "L", default_value_t = 16.0)]
    l: f64,
    #[command(flatten)]
    shift: ShiftFlags,
    /// Exclusion-ball radii, comma separated (default R, 2R, 4R).
    #[arg(long)]
    radii: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CompareEvent {
    /// The field exceeds the level somewhere in the event ball.
    ExceedsLevel,
    /// At least k giant components intersect the event ball.
    GiantsBall,
}

#[derive(Args)]
struct CmCompareArgs {
    #[command(flatten)]
    common: ExperimentFlags,
    #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
    level: f64,
    #[arg(long = "L", default_value_t = 16.0)]
    l: f64,
    #[command(flatten)]
    shift: ShiftFlags,
    #[arg(long, value_enum, default_value_t = CompareEvent::ExceedsLevel)]
    event: CompareEvent,
    /// Ball radius defining the event (default: the shift radius).
    #[arg(long)]
    event_radius: Option<f64>,
    /// Giant count for the giants-ball event.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(exit_code_for(&e));
        }
    }
}

/// Deterministic-invariant failures exit 2; anything else exits 1.
fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvariantViolation(_)
        | Error::ShiftBoundViolation { .. }
        | Error::NotASubset { .. } => 2,
        _ => 1,
    }
}

fn ensure_out_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// Load the experiment config from `--config`, or fall back to `build`.
/// A `--seed` flag overrides either source.
fn resolve_config(
    cli_config: &Option<PathBuf>,
    cli_seed: Option<u64>,
    build: impl FnOnce() -> Result<ExperimentConfig>,
) -> Result<ExperimentConfig> {
    let mut cfg = match cli_config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            serde_json::from_str::<ExperimentConfig>(&text)?
        }
        None => build()?,
    };
    if let Some(seed) = cli_seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Exit code from a report's deterministic spot checks.
fn report_code(bk_checks: usize, bk_violations: usize) -> i32 {
    if bk_violations > 0 {
        eprintln!(
            "INVARIANT FAILURE: {bk_violations} of {bk_checks} trifurcation-inequality checks failed"
        );
        2
    } else {
        println!("trifurcation-inequality spot checks: {bk_checks} passed, 0 failed");
        0
    }
}

fn print_report_cells(report: &ExperimentReport) {
    for cell in &report.cells {
        println!(
            "  {:<42} {:.4}  [{:.4}, {:.4}]  n={}",
            cell.label, cell.estimate, cell.ci_low, cell.ci_high, cell.n
        );
        if !cell.counts.is_empty() {
            let hist: Vec<String> = cell
                .counts
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect();
            println!("    {}", hist.join(", "));
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::InvalidConfig(format!("thread pool: {e}")))?;
    }
    ensure_out_dir(&cli.out)?;

    match &cli.command {
        Command::Synth(args) => run_synth(&cli, args),
        Command::Label(args) => run_label(&cli, args),
        Command::Count(args) => run_count(&cli, args),
        Command::Shift(ShiftCmd::Build(args)) => run_shift_build(&cli, args),
        Command::Shift(ShiftCmd::Apply(args)) => run_shift_apply(&cli, args),
        Command::Trifurcate(args) => run_trifurcate(&cli, args),
        Command::Threshold(args) => run_threshold(&cli, args),
        Command::Uniqueness(args) => run_uniqueness(&cli, args),
        Command::GeRate(args) => run_ge_rate(&cli, args),
        Command::CmCompare(args) => run_cm_compare(&cli, args),
    }
}

fn run_synth(cli: &Cli, args: &SynthArgs) -> Result<i32> {
    let kernel = parse_kernel(&args.kernel, args.dim)?;
    let grid = GridSpec::cubic(args.dim, args.cells, args.extent)?;
    let seeds = parse_seeds(&args.seeds)?;

    enum Planned {
        Circulant(CirculantEmbedding),
        Spectral(SpectralSynthesizer),
    }
    let plan = match args.method {
        SynthMethod::Circulant => Planned::Circulant(CirculantEmbedding::plan(&kernel, &grid)?),
        SynthMethod::Spectral => Planned::Spectral(SpectralSynthesizer::plan(&kernel, &grid)?),
    };

    for &seed in &seeds {
        let sample = match &plan {
            Planned::Circulant(p) => p.sample(seed),
            Planned::Spectral(p) => p.sample(seed),
        };
        let path = cli.out.join(format!("sample_{seed:06}.gpf"));
        write_field(&path, &sample)?;
    }
    println!(
        "wrote {} sample(s) for kernel {} on a {}^{} grid to {}",
        seeds.len(),
        kernel.id(),
        args.cells,
        args.dim,
        cli.out.display()
    );
    Ok(0)
}

fn mask_from_label_args(args: &LabelArgs) -> Result<(ExcursionMask, String)> {
    match (&args.field, &args.mask) {
        (Some(field_path), None) => {
            let sample = read_field(field_path)?;
            let mask = excursion_mask(&sample, args.level);
            let stem = field_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "field".into());
            Ok((mask, stem))
        }
        (None, Some(mask_path)) => {
            let mask = read_mask(mask_path)?;
            let stem = mask_path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "mask".into());
            Ok((mask, stem))
        }
        _ => Err(Error::InvalidConfig(
            "label needs exactly one of --field or --mask".into(),
        )),
    }
}

fn run_label(cli: &Cli, args: &LabelArgs) -> Result<i32> {
    let (mask, stem) = mask_from_label_args(args)?;
    let adjacency = if args.diagonals {
        Adjacency::FacesAndDiagonals
    } else {
        Adjacency::Faces
    };
    let labeling = label_components(&mask, adjacency);

    let csv_path = cli.out.join(format!("{stem}_components.csv"));
    write_labeling_csv(&csv_path, &labeling)?;
    if args.save_mask {
        write_mask(cli.out.join(format!("{stem}.gpm")), &mask)?;
    }

    let giants = giant_components(&labeling, GiantCriterion::TouchesAllFaces);
    let largest = labeling.components().iter().map(|c| c.size).max();
    println!(
        "{} vertices in mask, {} component(s), largest {:?}, {} touching all faces",
        mask.count_true(),
        labeling.count(),
        largest,
        giants.len()
    );
    println!("component table: {}", csv_path.display());
    Ok(0)
}

fn run_count(cli: &Cli, args: &CountArgs) -> Result<i32> {
    let kernel = parse_kernel(&args.kernel, args.dim)?;
    let levels = parse_f64_list(&args.levels, "levels")?;
    let scales = parse_f64_list(&args.l, "L")?;
    if scales.is_empty() || levels.is_empty() {
        return Err(Error::InvalidConfig("need at least one L and level".into()));
    }
    let largest = scales.iter().cloned().fold(f64::NAN, f64::max);
    let half = (largest / args.spacing).round() as usize;
    let grid = GridSpec::centered(args.dim, half, args.spacing)?;
    let plan = CirculantEmbedding::plan(&kernel, &grid)?;
    let base_seed = cli.seed.unwrap_or(0);
    let samples = plan.ensemble(base_seed, args.n);

    let want_boundary = matches!(args.what, CountWhat::Boundary | CountWhat::Both);
    let want_critical = matches!(args.what, CountWhat::Critical | CountWhat::Both);

    for &level in &levels {
        let mut rows = Vec::new();
        for (i, sample) in samples.iter().enumerate() {
            for &l in &scales {
                let n_boundary = if want_boundary {
                    let mask = excursion_mask(sample, level);
                    Some(count_boundary_components(&mask, l)?)
                } else {
                    None
                };
                let n_critical = if want_critical {
                    let window = sample.grid().box_window(l)?;
                    let sub_grid = GridSpec::new(
                        vec![window.side(); args.dim],
                        sample.grid().spacing().to_vec(),
                    )?;
                    let values =
                        copy_window(sample.values_flat(), sample.grid().cells(), &window);
                    let sub = FieldSample::from_values(
                        sub_grid,
                        ArrayD::from_shape_vec(
                            IxDyn(&vec![window.side(); args.dim]),
                            values,
                        )
                        .expect("window shape matches copied data"),
                        sample.kernel_id(),
                        sample.seed(),
                        sample.method(),
                    )?;
                    Some(count_discrete_critical_points(&sub)?)
                } else {
                    None
                };
                rows.push(CountRecord {
                    box_scale: l,
                    sample: i as u64,
                    n_boundary,
                    n_critical,
                });
            }
        }
        let path = cli.out.join(format!("counts_level_{level}.csv"));
        write_count_csv(&path, &rows)?;
        println!("level {level}: {} rows -> {}", rows.len(), path.display());
    }
    Ok(0)
}

fn run_shift_build(cli: &Cli, args: &ShiftBuildArgs) -> Result<i32> {
    let kernel = parse_kernel(&args.kernel, args.dim)?;
    let spacing = args.spacing;
    let half_extent = args.half_extent.unwrap_or(2.0 * args.radius);
    let half = (half_extent / spacing).round() as usize;
    let grid = GridSpec::centered(args.dim, half, spacing)?;

    let floor_m = match args.floor_m {
        Some(m) => m,
        None => {
            let choice = gaussperc::shift::choose_floor_m(
                &kernel,
                &grid,
                args.radius,
                args.prob,
                args.floor_samples,
                cli.seed.unwrap_or(0),
            )?;
            println!(
                "floor by quantile: M = {} (target prob {}, {} samples, 95% band [{:.3}, {:.3}])",
                choice.m, choice.target_prob, choice.n_samples, choice.band.0, choice.band.1
            );
            choice.m
        }
    };

    let spec = gaussperc::shift::build_shift(&kernel, args.level, args.radius, floor_m)?;
    let field = spec.field(&grid)?; // verifies h >= 0 and the ball bound
    let path = cli.out.join("shift_spec.json");
    std::fs::write(&path, serde_json::to_string_pretty(&spec)?)
        .map_err(|e| Error::io(&path, e))?;

    println!(
        "shift {}: amplitude {:.6}, {} centers, min on ball {:.6} (needs {:.6}), max {:.6}",
        spec.id(),
        spec.amplitude(),
        spec.centers().len(),
        field.min_on_ball(),
        spec.guaranteed_floor(),
        field.max_overall()
    );
    println!("spec: {}", path.display());
    Ok(0)
}

fn run_shift_apply(cli: &Cli, args: &ShiftApplyArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let spec: ShiftSpec = serde_json::from_str(&text)?;
    let sample = read_field(&args.field)?;
    let field = spec.field(sample.grid())?;
    let shifted = shift_sample(&sample, &field)?;

    let stem = args
        .field
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "field".into());
    let path = cli.out.join(format!("{stem}_shifted.gpf"));
    write_field(&path, &shifted)?;
    println!(
        "added shift {} (amplitude {:.6}) to {}; wrote {}",
        spec.id(),
        spec.amplitude(),
        args.field.display(),
        path.display()
    );
    Ok(0)
}

fn run_trifurcate(cli: &Cli, args: &TrifurcateArgs) -> Result<i32> {
    let kernel = parse_kernel(&args.kernel, args.dim)?;
    let scales = parse_f64_list(&args.l, "L")?;
    let rows = trifurcation_density_sweep(
        &kernel,
        args.level,
        args.r,
        &scales,
        args.spacing,
        args.n,
        cli.seed.unwrap_or(0),
    )?;

    let csv_path = cli.out.join("trifurcation_sweep.csv");
    write_sweep_csv(&csv_path, &rows)?;
    let jsonl_path = cli.out.join("trifurcation_sweep.jsonl");
    let mut violations = 0usize;
    println!("{:>8} {:>10} {:>12} {:>12} {:>12}", "L", "mean T", "se", "T/L^d", "violations");
    for row in &rows {
        append_jsonl(&jsonl_path, row)?;
        println!(
            "{:>8} {:>10.4} {:>12.4} {:>12.6} {:>12}",
            row.l, row.mean_t, row.se_t, row.trifurcation_density, row.violations
        );
        violations += row.violations;
    }
    println!("tables: {} and {}", csv_path.display(), jsonl_path.display());
    if violations > 0 {
        eprintln!("INVARIANT FAILURE: {violations} trifurcation-inequality violations");
        return Ok(2);
    }
    Ok(0)
}

fn run_threshold(cli: &Cli, args: &ThresholdArgs) -> Result<i32> {
    let cfg = resolve_config(&cli.config, cli.seed, || {
        let bracket = parse_f64_list(&args.bracket, "bracket")?;
        if bracket.len() != 2 {
            return Err(Error::InvalidConfig("bracket must be lo,hi".into()));
        }
        args.common.config(bracket, vec![args.l])
    })?;

    // A full crossing-probability scan across the bracket ends first: it is
    // cheap context for the bisection and lands in the same report stream.
    let scan = estimate_crossing_probability(&cfg)?;
    append_jsonl(cli.out.join("threshold.jsonl"), &scan)?;

    let report = estimate_level_threshold(&cfg)?;
    append_jsonl(cli.out.join("threshold.jsonl"), &report)?;
    println!(
        "threshold estimate {:.4}, confident band [{:.4}, {:.4}], {} probes (config {})",
        report.estimate, report.band.0, report.band.1, report.probes.len(), report.config_hash
    );
    for probe in &report.probes {
        println!(
            "  level {:+.4}: crossing {:.3} [{:.3}, {:.3}] n={}",
            probe.level, probe.crossing_probability, probe.ci_low, probe.ci_high, probe.n
        );
    }
    Ok(report_code(
        report.bk_checks + scan.bk_checks,
        report.bk_violations + scan.bk_violations,
    ))
}

fn run_uniqueness(cli: &Cli, args: &UniquenessArgs) -> Result<i32> {
    let cfg = resolve_config(&cli.config, cli.seed, || {
        let scales = parse_f64_list(&args.l, "L")?;
        let mut cfg = args.common.config(vec![args.level], scales)?;
        cfg.giant_rule = GiantRule::TouchesAllFaces;
        Ok(cfg)
    })?;
    let report = uniqueness_statistics(&cfg)?;
    append_jsonl(cli.out.join("uniqueness.jsonl"), &report)?;
    println!("giant-component multiplicity (config {}):", report.config_hash);
    print_report_cells(&report);
    if let Some(fit) = &report.fit {
        println!("  log-log slope of {}: {:.3}", fit.what, fit.slope);
    }
    Ok(report_code(report.bk_checks, report.bk_violations))
}

fn run_ge_rate(cli: &Cli, args: &GeRateArgs) -> Result<i32> {
    let cfg = resolve_config(&cli.config, cli.seed, || {
        let mut cfg = args.common.config(vec![args.level], vec![args.l])?;
        cfg.giant_rule = GiantRule::TouchesAllFaces;
        cfg.shift = Some(args.shift.params());
        Ok(cfg)
    })?;
    let radii = match &args.radii {
        Some(spec) => Some(parse_f64_list(spec, "radii")?),
        None => None,
    };
    let report = global_equivalence_rate(&cfg, radii.as_deref())?;
    append_jsonl(cli.out.join("ge_rate.jsonl"), &report)?;
    println!(
        "percolation equivalence outside the ball (config {}):",
        report.config_hash
    );
    print_report_cells(&report);
    Ok(report_code(report.bk_checks, report.bk_violations))
}

fn run_cm_compare(cli: &Cli, args: &CmCompareArgs) -> Result<i32> {
    let cfg = resolve_config(&cli.config, cli.seed, || {
        let mut cfg = args.common.config(vec![args.level], vec![args.l])?;
        cfg.giant_rule = GiantRule::TouchesAllFaces;
        cfg.shift = Some(args.shift.params());
        Ok(cfg)
    })?;
    let event_radius = args.event_radius.unwrap_or(args.shift.radius);
    let event = match args.event {
        CompareEvent::ExceedsLevel => ShiftEvent::ExceedsLevelInBall {
            radius: event_radius,
        },
        CompareEvent::GiantsBall => ShiftEvent::GiantsIntersectBall {
            k: args.k,
            radius: event_radius,
        },
    };
    let report = shift_event_frequency_compare(&cfg, event)?;
    append_jsonl(cli.out.join("cm_compare.jsonl"), &report)?;
    println!("event {:?} (config {}):", report.event, report.config_hash);
    println!(
        "  plain   {:.4}  [{:.4}, {:.4}]  n={}",
        report.plain.estimate, report.plain.ci_low, report.plain.ci_high, report.plain.n
    );
    println!(
        "  shifted {:.4}  [{:.4}, {:.4}]  n={}",
        report.shifted.estimate, report.shifted.ci_low, report.shifted.ci_high, report.shifted.n
    );
    if report.consistent {
        println!("  verdict: both zero or both positive within resolution");
    } else {
        println!(
            "  verdict: WARNING - one frequency is zero while the other is significantly positive"
        );
    }
    Ok(report_code(report.bk_checks, report.bk_violations))
}
