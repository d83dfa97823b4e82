use clap::{Parser, Subcommand, ValueEnum};
use mesh_attention::config::{ConfigError, RunConfig};
use mesh_attention::fusion::{
    load_checkpoint, planted_features, planted_signal, predict, save_checkpoint, train_fusion, Checkpoint, FusionError,
    PlantedConfig, TrainExample,
};
use mesh_attention::mesh::{bumpy_sphere, cube, icosphere, load_mesh, save_mesh, torus, Mesh, MeshError};
use mesh_attention::metrics::{
    auc_judd, cc, kl_div, mse, multimatch, nss, read_fixations, read_saliency, read_scanpath, write_saliency_binary,
    write_scanpath, MetricError, SaliencyMap,
};
use mesh_attention::scanpath::{generate_scanpath, load_policy, save_policy, train_scanpath, ScanEnv, ScanpathError};
use mesh_attention::unproject::{
    read_featb, read_pxf, unproject_mesh, write_featb, FeatureField, SyntheticFeatures, SyntheticSources, UnprojectError,
};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "meshattn", version, about = "Mesh saliency prediction and scanpath generation")]
struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// key=value configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Single KEY=VALUE override, applied after the file; repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    print_config: bool,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum FixtureKind {
    Icosphere,
    Cube,
    Torus,
    Bumpy,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthMode {
    Planted,
    Constant,
}

#[derive(Subcommand)]
enum Command {
    /// Write a deterministic fixture mesh.
    Fixture {
        #[arg(long, value_enum)]
        kind: FixtureKind,
        #[arg(long, default_value_t = 2)]
        subdiv: u32,
        /// Bump count for the bumpy sphere.
        #[arg(long, default_value_t = 6)]
        bumps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predicted saliency map against ground truth.
    Evaluate {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        fixations: Option<PathBuf>,
    },
    /// Write a synthetic per-vertex feature file.
    SynthFeatures {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long, value_enum, default_value = "planted")]
        mode: SynthMode,
        /// Channel count; planted mode uses net.sem_dim.
        #[arg(long, default_value_t = 32)]
        dim: usize,
        #[arg(long)]
        out: PathBuf,
        /// Planted mode only: also write the matching target map.
        #[arg(long)]
        target_out: Option<PathBuf>,
    },
    /// Transfer per-view pixel features onto the vertices.
    Unproject {
        #[arg(long)]
        mesh: PathBuf,
        /// Directory of fused per-view maps named view_000.pxf, view_001.pxf, ...
        #[arg(long, conflicts_with = "synthetic")]
        views: Option<PathBuf>,
        /// Use seeded smooth synthetic sources instead of files.
        #[arg(long)]
        synthetic: bool,
        #[arg(long, default_value_t = 16)]
        diffusion_dim: usize,
        #[arg(long, default_value_t = 16)]
        dino_dim: usize,
        #[arg(long, default_value_t = 4)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the fusion network on a manifest of `mesh featb smap` lines.
    TrainFusion {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Predict a saliency map with a trained checkpoint.
    Predict {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a scanpath policy on one mesh and saliency map.
    TrainScanpath {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        saliency: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Generate scanpaths with a trained policy.
    GenScanpath {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        saliency: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 1)]
        n: usize,
        /// Take the most probable action instead of sampling.
        #[arg(long)]
        deterministic: bool,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Compare two scanpaths.
    Multimatch {
        a: PathBuf,
        b: PathBuf,
        /// Mesh that sets the distance scale; defaults to the one named in `a`.
        #[arg(long)]
        mesh: Option<PathBuf>,
    },
}

enum CliError {
    Usage(String),
    Data(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Data(_) => 3,
            Self::Numeric(_) => 4,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Usage(_) => "usage",
            Self::Data(_) => "data",
            Self::Numeric(_) => "numeric",
        }
    }

    fn message(&self) -> &str {
        match self {
            Self::Usage(m) | Self::Data(m) | Self::Numeric(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io(_) => Self::Data(e.to_string()),
            _ => Self::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<MeshError> for CliError {
    fn from(e: MeshError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<MetricError> for CliError {
    fn from(e: MetricError) -> Self {
        match e {
            MetricError::ZeroVariance | MetricError::ZeroMass => Self::Numeric(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<UnprojectError> for CliError {
    fn from(e: UnprojectError) -> Self {
        Self::Data(e.to_string())
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        match e {
            FusionError::Numeric(_) | FusionError::NonFiniteLoss { .. } => Self::Numeric(e.to_string()),
            FusionError::Config(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

impl From<ScanpathError> for CliError {
    fn from(e: ScanpathError) -> Self {
        match e {
            ScanpathError::NonFinite(_) => Self::Numeric(e.to_string()),
            ScanpathError::Config(_) => Self::Usage(e.to_string()),
            _ => Self::Data(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn require(path: &Path) -> CliResult<&Path> {
    if path.is_file() {
        Ok(path)
    } else {
        Err(CliError::Data(format!("missing input file {}", path.display())))
    }
}

fn mesh_at(path: &Path) -> CliResult<Mesh> {
    Ok(load_mesh(require(path)?, None)?)
}

fn saliency_for(mesh: &Mesh, path: &Path) -> CliResult<SaliencyMap> {
    let s = read_saliency(require(path)?)?;
    if s.len() != mesh.len() {
        return Err(CliError::Data(format!("{} has {} values for {} vertices", path.display(), s.len(), mesh.len())));
    }
    Ok(s)
}

fn features_for(mesh: &Mesh, path: &Path) -> CliResult<FeatureField> {
    let f = read_featb(require(path)?)?;
    if f.len() != mesh.len() {
        return Err(CliError::Data(format!("{} has {} rows for {} vertices", path.display(), f.len(), mesh.len())));
    }
    Ok(f)
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::default();
    cfg.set_seed(cli.seed);
    if let Some(p) = &cli.config {
        cfg.apply_file(p)?;
    }
    for a in &cli.overrides {
        cfg.set_assignment(a)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, cfg: &RunConfig) -> CliResult<Value> {
    let seed = cli.seed;
    match &cli.cmd {
        Command::Fixture { kind, subdiv, bumps, out } => {
            let mesh = match kind {
                FixtureKind::Icosphere => icosphere(*subdiv),
                FixtureKind::Cube => cube(),
                FixtureKind::Torus => torus(1.0, 0.35, 24, 12),
                FixtureKind::Bumpy => bumpy_sphere(*subdiv, *bumps, seed),
            };
            save_mesh(&mesh, out, None)?;
            Ok(json!({ "out": out, "vertices": mesh.len(), "faces": mesh.faces().len() }))
        }
        Command::Evaluate { mesh, gt, pred, fixations } => {
            let mesh = mesh_at(mesh)?;
            let gt = saliency_for(&mesh, gt)?;
            let pred = saliency_for(&mesh, pred)?;
            let (g, p) = (gt.values(), pred.values());
            let (nss_v, auc_v) = match fixations {
                Some(f) => {
                    let fix = read_fixations(require(f)?, mesh.len())?;
                    (Some(nss(p, &fix)?), Some(auc_judd(p, &fix)?))
                }
                None => (None, None),
            };
            Ok(json!({ "kl": kl_div(g, p)?, "cc": cc(g, p)?, "nss": nss_v, "auc": auc_v, "mse": mse(g, p)? }))
        }
        Command::SynthFeatures { mesh: path, mode, dim, out, target_out } => {
            let mesh = mesh_at(path)?;
            let field = match mode {
                SynthMode::Planted => {
                    let pc = PlantedConfig { sem_dim: cfg.net.sem_dim, ..PlantedConfig::default() };
                    let signal = planted_signal(&mesh, &pc, seed);
                    if let Some(t) = target_out {
                        let target = mesh_attention::fusion::planted_target(&mesh, &signal, &pc);
                        write_saliency_binary(t, &SaliencyMap::new(target)?)?;
                    }
                    planted_features(&mesh, &signal, &pc, seed)
                }
                SynthMode::Constant => {
                    if target_out.is_some() {
                        return Err(CliError::Usage("--target-out needs --mode planted".into()));
                    }
                    FeatureField::new(mesh.len(), *dim, vec![1.0; mesh.len() * dim], vec![1; mesh.len()])?
                }
            };
            write_featb(out, &field)?;
            Ok(json!({ "out": out, "vertices": field.len(), "dim": field.dim() }))
        }
        Command::Unproject { mesh: path, views, synthetic, diffusion_dim, dino_dim, steps, out } => {
            let mesh = mesh_at(path)?;
            let u = &cfg.unproject;
            let field = match (views, synthetic) {
                (Some(dir), false) => unproject_mesh(&mesh, u, |v, _| read_pxf(&dir.join(format!("view_{v:03}.pxf"))))
                    .map_err(|e| CliError::Data(format!("{}: {e}", dir.display())))?,
                (None, true) => {
                    let src = SyntheticSources {
                        diffusion: SyntheticFeatures::Smooth { dim: *diffusion_dim, seed },
                        steps: *steps,
                        dino: SyntheticFeatures::Smooth { dim: *dino_dim, seed: seed.wrapping_add(1) },
                    };
                    let diag = mesh.bbox_diagonal();
                    unproject_mesh(&mesh, u, |_, view| src.fused(view, diag, u))?
                }
                _ => return Err(CliError::Usage("give exactly one of --views or --synthetic".into())),
            };
            write_featb(out, &field)?;
            let covered = field.coverage().iter().filter(|&&c| c > 0).count();
            Ok(json!({ "out": out, "vertices": field.len(), "dim": field.dim(), "covered": covered, "views": u.n_elev * u.n_azim }))
        }
        Command::TrainFusion { manifest, out, curve } => {
            let data = read_manifest(manifest)?;
            let outcome = train_fusion(&data, &cfg.net, &cfg.train)?;
            save_checkpoint(out, &Checkpoint::new(cfg.net.clone(), outcome.params.clone(), outcome.norm.clone(), Some(&cfg.train)))?;
            if let Some(c) = curve {
                std::fs::write(c, outcome.curve_csv())?;
            }
            let best = &outcome.curve[outcome.best_epoch];
            Ok(json!({
                "out": out,
                "meshes": data.len(),
                "steps": outcome.steps,
                "best_epoch": outcome.best_epoch,
                "best_loss": best.mean_loss,
            }))
        }
        Command::Predict { mesh: path, features, checkpoint, out } => {
            let mesh = mesh_at(path)?;
            let feats = features_for(&mesh, features)?;
            let ck = load_checkpoint(require(checkpoint)?)?;
            let y = predict(&mesh, &feats, &ck.params, &ck.norm, &ck.net, cfg.train.samples, seed)?;
            write_saliency_binary(out, &SaliencyMap::new(y)?)?;
            Ok(json!({ "out": out, "vertices": mesh.len(), "mode": ck.net.mode.name() }))
        }
        Command::TrainScanpath { mesh: path, saliency, out, curve } => {
            let mesh = mesh_at(path)?;
            let sal = saliency_for(&mesh, saliency)?;
            let env = ScanEnv::new(mesh, sal.into_values(), cfg.reward)?;
            let outcome = train_scanpath(&env, &cfg.ppo)?;
            save_policy(out, &outcome.policy)?;
            if let Some(c) = curve {
                std::fs::write(c, outcome.curve_csv())?;
            }
            Ok(json!({ "out": out, "rollouts": outcome.curve.len(), "best_mean_return": outcome.best_return }))
        }
        Command::GenScanpath { mesh: path, saliency, policy, n, deterministic, out_dir } => {
            let mesh = mesh_at(path)?;
            let sal = saliency_for(&mesh, saliency)?;
            let env = ScanEnv::new(mesh, sal.into_values(), cfg.reward)?;
            let pol = load_policy(require(policy)?)?;
            std::fs::create_dir_all(out_dir)?;
            let name = path.to_string_lossy();
            let mut files = Vec::with_capacity(*n);
            for i in 0..*n {
                let sp = generate_scanpath(&env, &pol, *deterministic, cfg.ppo.start_mode, &name, seed.wrapping_add(i as u64))?;
                let file = out_dir.join(format!("scanpath_{i:03}.json"));
                write_scanpath(&file, &sp)?;
                files.push(file);
            }
            Ok(json!({ "files": files }))
        }
        Command::Multimatch { a, b, mesh } => {
            let (sa, sb) = (read_scanpath(require(a)?)?, read_scanpath(require(b)?)?);
            let mesh_path = mesh.clone().unwrap_or_else(|| PathBuf::from(&sa.mesh));
            let m = mesh_at(&mesh_path)?;
            sa.validate(m.vertices())?;
            sb.validate(m.vertices())?;
            let s = multimatch(&sa, &sb, m.bbox_diagonal())?;
            Ok(serde_json::to_value(s).expect("score serializes"))
        }
    }
}

/// Relative paths resolve against the manifest's directory.
fn read_manifest(path: &Path) -> CliResult<Vec<TrainExample>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let text = std::fs::read_to_string(require(path)?)?;
    let mut data = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let parts: Vec<&str> = line.split_whitespace().collect();
        let [m, f, s] = parts[..] else {
            return Err(CliError::Data(format!("{} line {}: expected 'mesh featb smap'", path.display(), i + 1)));
        };
        let mesh = mesh_at(&base.join(m))?;
        let features = features_for(&mesh, &base.join(f))?;
        let gt = saliency_for(&mesh, &base.join(s))?.into_values();
        data.push(TrainExample { mesh, features, gt });
    }
    if data.is_empty() {
        return Err(CliError::Data(format!("{} lists no meshes", path.display())));
    }
    Ok(data)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = resolve_config(&cli).and_then(|cfg| {
        if cli.print_config {
            print!("{}", cfg.to_text());
            return Ok(None);
        }
        run(&cli, &cfg).map(Some)
    });
    match result {
        Ok(Some(report)) => {
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Ok(None) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.message() }));
            ExitCode::from(e.code())
        }
    }
}
