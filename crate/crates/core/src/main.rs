use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use rectikit::accept::{run_acceptance, AcceptConfig};
use rectikit::analysis::{ahlfors_summary, alpha, beta1, carleson_profile, reifenberg_flatness, TangentField};
use rectikit::ccbp::{build_ccbp, validate_ccbp, CcbpConfig};
use rectikit::generate::{generate, GeneratorKind, GeneratorSpec, WeightMode};
use rectikit::io::{read_cloud, write_cloud, Report};
use rectikit::param::{containment_check, distortion, sigma0_grid, MapPipeline};
use rectikit::planefit::fit_plane;
use rectikit::poincare::{poincare_ratio, quasiconvexity, FieldSpec, GradKind, GradMode, NeighborGraph};
use rectikit::IndexedCloud;

#[derive(Parser)]
#[command(name = "rectikit", version, about = "Multiscale rectifiability diagnostics for weighted point clouds")]
struct Cli {
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    /// TOML or JSON file with `generator` and `ccbp` tables.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file (reports go to stdout when absent).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cloud as CSV plus JSON sidecar.
    Generate(GenerateArgs),
    /// Alpha profiles, Ahlfors constant and flatness table.
    Analyze(AnalyzeArgs),
    /// Center-of-mass plane at one point and scale.
    Fit(FitArgs),
    /// Build and validate a coherent collection of balls and planes.
    Ccbp(CcbpArgs),
    /// Distortion, budgets and containment of the parameterization.
    Param(ParamArgs),
    /// Poincare ratios and quasiconvexity.
    Poincare(PoincareArgs),
    /// Run acceptance criteria; exit status reports the verdict.
    Accept(AcceptArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    PlaneDisk,
    SphereCap,
    LipschitzGraph,
    PuncturedDisk,
    TwoPlaneBlend,
}

impl From<Kind> for GeneratorKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::PlaneDisk => GeneratorKind::PlaneDisk,
            Kind::SphereCap => GeneratorKind::SphereCap,
            Kind::LipschitzGraph => GeneratorKind::LipschitzGraph,
            Kind::PuncturedDisk => GeneratorKind::PuncturedDisk,
            Kind::TwoPlaneBlend => GeneratorKind::TwoPlaneBlend,
        }
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    kind: Option<Kind>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    amplitude: Option<f64>,
    /// Use cell masses instead of uniform weights.
    #[arg(long)]
    cell_weights: bool,
}

#[derive(Args)]
struct CloudArgs {
    /// Cloud CSV (with optional sidecar).
    #[arg(long)]
    input: PathBuf,
    /// Intrinsic dimension when there is no sidecar.
    #[arg(long)]
    n: Option<usize>,
    /// PCA tangent radius; defaults to twice the mean spacing.
    #[arg(long)]
    tangent_radius: Option<f64>,
    /// Regenerate exact tangents from the sidecar's generator spec.
    #[arg(long)]
    exact_tangents: bool,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[command(flatten)]
    cloud: CloudArgs,
    #[arg(long, default_value_t = 10)]
    centers: usize,
    #[arg(long, default_value_t = 6)]
    depth: usize,
    #[arg(long, default_value_t = 0.1)]
    base: f64,
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    cloud: CloudArgs,
    /// Center, comma separated.
    #[arg(long, value_delimiter = ',')]
    x: Vec<f64>,
    #[arg(long)]
    r: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

#[derive(Args, Clone)]
struct CcbpFlags {
    #[arg(long)]
    depth: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    anchor: Option<Vec<f64>>,
    #[arg(long)]
    region_scale: Option<f64>,
    #[arg(long)]
    region_factor: Option<f64>,
}

#[derive(Args)]
struct CcbpArgs {
    #[command(flatten)]
    cloud: CloudArgs,
    #[command(flatten)]
    flags: CcbpFlags,
}

#[derive(Args)]
struct ParamArgs {
    #[command(flatten)]
    cloud: CloudArgs,
    #[command(flatten)]
    flags: CcbpFlags,
    /// Sigma_0 grid spacing; defaults to the finest level radius.
    #[arg(long)]
    grid: Option<f64>,
    /// Number of distortion pairs.
    #[arg(long, default_value_t = 5000)]
    pairs: usize,
    #[arg(long)]
    symmetric: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Tangential,
    Lip,
}

#[derive(Args)]
struct PoincareArgs {
    #[command(flatten)]
    cloud: CloudArgs,
    #[arg(long, default_value_t = 2.0)]
    p: f64,
    #[arg(long, default_value_t = 2.0)]
    lambda: f64,
    #[arg(long, value_enum, default_value_t = Mode::Tangential)]
    mode: Mode,
    #[arg(long, default_value_t = 20)]
    family_size: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [0.1, 0.2])]
    radii: Vec<f64>,
    #[arg(long, default_value_t = 5)]
    centers: usize,
    /// Neighbor-graph radius; defaults to 1.5 x mean spacing.
    #[arg(long)]
    graph_radius: Option<f64>,
}

#[derive(Args)]
struct AcceptArgs {
    /// Criteria to run (all when omitted).
    #[arg(long, value_delimiter = ',')]
    criteria: Vec<usize>,
    /// Write every generated corpus here.
    #[arg(long)]
    corpus: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default)]
struct FileConfig {
    generator: Option<GeneratorSpec>,
    ccbp: Option<CcbpConfig>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cfg = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(cfg)
}

struct Loaded {
    ic: IndexedCloud,
    field: TangentField,
}

fn load(args: &CloudArgs) -> Result<Loaded> {
    let (cloud, sidecar) = read_cloud(&args.input, args.n).with_context(|| format!("reading {}", args.input.display()))?;
    let ic = IndexedCloud::new(cloud);
    let field = if args.exact_tangents {
        let spec = sidecar
            .as_ref()
            .and_then(|s| s.spec.clone())
            .context("--exact-tangents needs a sidecar with a generator spec")?;
        generate(&spec)?.tangents.context("generator has no exact tangents")?
    } else {
        let h = args.tangent_radius.unwrap_or_else(|| TangentField::default_radius(&ic));
        TangentField::estimate(&ic, h)
    };
    let invalid = field.len() - field.valid_count();
    if invalid > 0 {
        log::warn!("{invalid} samples have no usable tangent estimate");
    }
    Ok(Loaded { ic, field })
}

fn ccbp_config(base: Option<CcbpConfig>, flags: &CcbpFlags) -> CcbpConfig {
    let mut c = base.unwrap_or_default();
    if let Some(v) = flags.depth {
        c.depth = v;
    }
    if let Some(v) = flags.lambda {
        c.lambda = v;
    }
    if let Some(v) = &flags.anchor {
        c.anchor = Some(v.clone());
    }
    if let Some(v) = flags.region_scale {
        c.region_scale = v;
    }
    if let Some(v) = flags.region_factor {
        c.region_factor = v;
    }
    c
}

fn sample_centers(ic: &IndexedCloud, count: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let all: Vec<usize> = (0..ic.cloud.len()).collect();
    let mut picked: Vec<usize> = all.choose_multiple(&mut rng, count.min(all.len())).copied().collect();
    picked.sort_unstable();
    picked
}

fn run_generate(cli: &Cli, cfg: FileConfig, args: &GenerateArgs) -> Result<bool> {
    let mut spec = cfg.generator.unwrap_or_default();
    spec.seed = cli.seed;
    if let Some(k) = args.kind {
        spec.kind = k.into();
    }
    if let Some(v) = args.count {
        spec.count = v;
    }
    if let Some(v) = args.n {
        spec.n = v;
        if spec.hole_center.len() != v {
            spec.hole_center.resize(v, 0.0);
        }
    }
    if let Some(v) = args.d {
        spec.d = v;
    }
    if let Some(v) = args.amplitude {
        spec.amplitude = v;
    }
    if args.cell_weights {
        spec.weights = WeightMode::Cell;
    }
    let g = generate(&spec)?;
    let path = cli.out.clone().unwrap_or_else(|| PathBuf::from("cloud.csv"));
    write_cloud(&path, &g.cloud, Some(&spec))?;
    let summary = json!({
        "path": path,
        "count": g.cloud.len(),
        "total_mass": g.cloud.total_mass(),
        "spec": spec,
    });
    Report::new("generate", cli.seed, summary).emit(None)?;
    Ok(true)
}

#[derive(Serialize)]
struct FlatnessRow {
    center: Vec<f64>,
    radius: f64,
    value: f64,
    cloud_to_plane: f64,
    plane_to_cloud: f64,
}

fn run_analyze(cli: &Cli, args: &AnalyzeArgs) -> Result<bool> {
    let Loaded { ic, field, .. } = load(&args.cloud)?;
    let centers = sample_centers(&ic, args.centers, cli.seed);
    let mut profiles = Vec::new();
    let mut flatness = Vec::new();
    for &i in &centers {
        let x = ic.point(i);
        match carleson_profile(&ic, &field, x, args.depth, args.base) {
            Ok(p) => profiles.push(p),
            Err(e) => log::warn!("profile at sample {i}: {e}"),
        }
        let f = reifenberg_flatness(&ic, x, args.base)?;
        flatness.push(FlatnessRow {
            center: x.to_vec(),
            radius: args.base,
            value: f.value,
            cloud_to_plane: f.cloud_to_plane,
            plane_to_cloud: f.plane_to_cloud,
        });
    }
    let floor = 2.0 * ic.mean_spacing();
    let scales: Vec<f64> = (0..6)
        .map(|k| args.base * 2f64.powi(-k))
        .filter(|&r| r >= floor)
        .collect();
    let ahlfors = ahlfors_summary(&ic, &centers, &scales);
    let result = json!({
        "tangent_radius": field.radius(),
        "profiles": profiles,
        "ahlfors": ahlfors,
        "ahlfors_scales": scales,
        "flatness": flatness,
    });
    Report::new("analyze", cli.seed, result).emit(cli.out.as_deref())?;
    Ok(true)
}

fn run_fit(cli: &Cli, args: &FitArgs) -> Result<bool> {
    let Loaded { ic, field, .. } = load(&args.cloud)?;
    if args.x.len() != ic.dim_ambient() {
        bail!("--x needs {} coordinates", ic.dim_ambient());
    }
    let fit = fit_plane(&ic, &field, &args.x, args.r, args.lambda)?;
    let b = beta1(&ic, &args.x, args.r, &fit.plane)?;
    let a = alpha(&ic, &field, &args.x, args.lambda * args.r)?;
    let result = json!({
        "base": fit.plane.base(),
        "frame": fit.plane.frame(),
        "eigenvalues": fit.eigenvalues,
        "beta1": b,
        "alpha": a,
        "beta1_over_alpha": if a > 0.0 { Some(b / a) } else { None },
    });
    Report::new("fit", cli.seed, result).emit(cli.out.as_deref())?;
    Ok(true)
}

fn run_ccbp(cli: &Cli, cfg: FileConfig, args: &CcbpArgs) -> Result<bool> {
    let Loaded { ic, field, .. } = load(&args.cloud)?;
    let config = ccbp_config(cfg.ccbp, &args.flags);
    let c = build_ccbp(&ic, &field, &config)?;
    let report = validate_ccbp(&c);
    if let Err(e) = c.check_structure() {
        log::warn!("structure check: {e}");
    }
    Report::new("ccbp", cli.seed, json!({ "config": config, "ccbp": c, "compat": report }))
        .emit(cli.out.as_deref())?;
    Ok(true)
}

fn run_param(cli: &Cli, cfg: FileConfig, args: &ParamArgs) -> Result<bool> {
    let Loaded { ic, field, .. } = load(&args.cloud)?;
    let config = ccbp_config(cfg.ccbp, &args.flags);
    let c = build_ccbp(&ic, &field, &config)?;
    let compat = validate_ccbp(&c);
    let pipe = MapPipeline::full(&c);
    let finest = c.radius(c.depth() - 1);
    let spacing = args.grid.unwrap_or(finest);
    let (grid, _) = sigma0_grid(&c, c.region_radius, spacing);
    if grid.len() < 2 {
        bail!("grid spacing {spacing} leaves fewer than two grid points");
    }
    let total = grid.len() * (grid.len() - 1) / 2;
    let stride = (total / args.pairs.max(1)).max(1);
    let pairs: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|i| ((i + 1)..grid.len()).map(move |j| (i, j)))
        .step_by(stride)
        .collect();
    let d = distortion(&pipe, &grid, &pairs)?;
    let containment = containment_check(&ic, &pipe, c.region_radius, spacing, args.symmetric)?;
    let mut decay = vec![0.0; pipe.depth];
    for z in &grid {
        let t = pipe.map_f(z);
        for (k, s) in t.steps.iter().enumerate() {
            decay[k] = f64::max(decay[k], *s);
        }
    }
    let result = json!({
        "k_est": d.k_est,
        "min_ratio": d.min_ratio,
        "max_ratio": d.max_ratio,
        "pairs": d.pairs_used,
        "max_budget": d.max_budget,
        "budgets": d.budgets,
        "containment": containment,
        "per_level_max_step": decay,
        "level_radii": (0..c.depth()).map(|k| c.radius(k)).collect::<Vec<_>>(),
        "compat": compat,
    });
    Report::new("param", cli.seed, result).emit(cli.out.as_deref())?;
    Ok(true)
}

fn run_poincare(cli: &Cli, args: &PoincareArgs) -> Result<bool> {
    let Loaded { ic, field, .. } = load(&args.cloud)?;
    let graph_radius = args.graph_radius.unwrap_or_else(|| NeighborGraph::default_radius(&ic));
    let graph = NeighborGraph::build(&ic, graph_radius);
    let h = args.cloud.tangent_radius.unwrap_or_else(|| TangentField::default_radius(&ic));
    let (mode, kind) = match args.mode {
        Mode::Tangential => (GradMode::Tangential { tangents: &field, h }, GradKind::Tangential),
        Mode::Lip => (GradMode::Lip { graph: &graph }, GradKind::Lip),
    };
    let centers = sample_centers(&ic, args.centers, cli.seed);
    let family = FieldSpec::hinge_family(args.family_size, ic.dim_ambient(), cli.seed);
    let mut rows = Vec::new();
    let mut cp = 0.0f64;
    for f in &family {
        let values = f.eval_all(&ic);
        for &i in &centers {
            for &r in &args.radii {
                let ratio = poincare_ratio(&ic, &values, ic.point(i), r, args.lambda, args.p, &mode)?;
                cp = cp.max(ratio);
                rows.push(json!({ "field": f, "center": i, "r": r, "ratio": ratio }));
            }
        }
    }
    let pairs: Vec<(usize, usize)> = centers
        .iter()
        .flat_map(|&a| centers.iter().filter(move |&&b| b > a).map(move |&b| (a, b)))
        .collect();
    let kappa = match quasiconvexity(&ic, &graph, &pairs) {
        Ok(q) => json!(q.kappa),
        Err(e) => json!(e.to_string()),
    };
    let result = json!({
        "mode": kind,
        "p": args.p,
        "lambda": args.lambda,
        "graph_radius": graph_radius,
        "empirical_cp": cp,
        "kappa": kappa,
        "ratios": rows,
    });
    Report::new("poincare", cli.seed, result).emit(cli.out.as_deref())?;
    Ok(true)
}

fn run_accept(cli: &Cli, args: &AcceptArgs) -> Result<bool> {
    let cfg = AcceptConfig {
        seed: cli.seed,
        corpus_dir: args.corpus.clone(),
    };
    let report = run_acceptance(&args.criteria, &cfg);
    for v in &report.verdicts {
        eprintln!("{}", v.render());
    }
    let pass = report.all_pass;
    Report::new("accept", cli.seed, report).emit(cli.out.as_deref())?;
    Ok(pass)
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = load_config(cli.config.as_deref()).and_then(|cfg| match &cli.command {
        Command::Generate(a) => run_generate(&cli, cfg, a),
        Command::Analyze(a) => run_analyze(&cli, a),
        Command::Fit(a) => run_fit(&cli, a),
        Command::Ccbp(a) => run_ccbp(&cli, cfg, a),
        Command::Param(a) => run_param(&cli, cfg, a),
        Command::Poincare(a) => run_poincare(&cli, a),
        Command::Accept(a) => run_accept(&cli, a),
    });
    match outcome {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
