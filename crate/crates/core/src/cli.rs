//! Command-line experiments over run directories.
//!
//! Every command serializes its full configuration to `config.json` in its
//! output directory before doing anything else; `lpaf replay <config.json>`
//! re-executes it and reproduces the same files byte for byte. Concurrent
//! invocations must use distinct output directories.
//!
//! Run directory contents:
//!
//! | command   | files |
//! |-----------|-------|
//! | `gen`     | `protocol.json`, `d_r.bin`, `d_m.bin`, `d_r_large.bin`, `heldout.bin` |
//! | `train`   | `losses.csv`, `policy.ckpt`, `fusion.ckpt` (fusion arm only), `provenance.json`, `stage3.csv`, `digest.txt` |
//! | `eval`    | `sweep.csv`, `alignment.csv`, `summary.txt` |
//! | `ablate`  | `sweep.csv`, `ablation.json`, `summary.txt` |
//! | `heatmap` | `heatmap_<θ>_raw.ppm`, `heatmap_<θ>_fused.ppm`, `heatmaps.csv` |

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::encoder::EncoderSpec;
use crate::error::{Error, Result};
use crate::evalkit::{
    alignment_report, export, heatmap_file_name, sweep, sweep_controller, token_heatmap,
    write_heatmap, Report, SweepSpec,
};
use crate::fusion::{AlignKind, FusionModule};
use crate::nncore::{read_checkpoint, write_checkpoint};
use crate::policy::PolicyParams;
use crate::trainer::{
    run_ablations, train_baseline_mixed, train_baseline_reference, train_lpaf, Arm, PreparedData,
    Provenance, StageConfig, TrainedBundle,
};
use crate::worldgen::{
    build_datasets, build_reference_set, heldout_pairs, read_dataset, sample_scene, write_dataset,
    Dataset, DatasetProtocol, ExpertController,
};

#[derive(Parser, Debug)]
#[command(
    name = "lpaf",
    version,
    about = "Multiview latent alignment experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CliCommand,
}

#[derive(Subcommand, Debug)]
pub enum CliCommand {
    #[command(flatten)]
    Run(RunConfig),
    /// Re-execute a persisted config.json
    Replay { config: PathBuf },
}

/// A fully specified, serializable experiment.
#[derive(Subcommand, Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum RunConfig {
    /// Build D_R, D_M, the enlarged reference set and a held-out paired set
    Gen(GenArgs),
    /// Train one arm: the three-stage fusion pipeline or a baseline
    Train(TrainArgs),
    /// Viewpoint sweep plus alignment diagnostics for a trained run
    Eval(EvalArgs),
    /// Run the six-arm ablation and write the tables
    Ablate(AblateArgs),
    /// Token-similarity heatmaps, raw and fused
    Heatmap(HeatmapArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    fn on(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenArgs {
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 45.0)]
    pub a_deg: f64,
    #[arg(long, default_value_t = 4)]
    pub v: usize,
    #[arg(long, default_value_t = 3)]
    pub s: usize,
    #[arg(long, default_value_t = 28)]
    pub j: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    /// Viewpoints of the held-out paired set
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-90,-45,-30,0,30,45,90"
    )]
    pub heldout_views: Vec<f64>,
    #[arg(long, default_value_t = 20)]
    pub heldout_per_view: usize,
}

impl GenArgs {
    pub fn protocol(&self) -> DatasetProtocol {
        DatasetProtocol {
            a_deg: self.a_deg,
            v: self.v,
            s: self.s,
            j: self.j,
            seed: self.seed,
            horizon: self.horizon,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageArgs {
    #[arg(long, default_value_t = 40)]
    pub epochs1: usize,
    #[arg(long, default_value_t = 60)]
    pub epochs2: usize,
    #[arg(long, default_value_t = 30)]
    pub epochs3: usize,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 3e-4)]
    pub lr_stage3: f64,
    #[arg(long, default_value_t = 1.0)]
    pub align_weight: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl StageArgs {
    fn config(&self) -> StageConfig {
        StageConfig {
            stage1_epochs: self.epochs1,
            stage2_epochs: self.epochs2,
            stage3_epochs: self.epochs3,
            batch_size: self.batch_size,
            lr: self.lr,
            lr_stage3: self.lr_stage3,
            align_weight: self.align_weight,
            seed: self.seed,
            ..StageConfig::default()
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainArgs {
    /// Directory written by `gen`
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "lpaf")]
    pub arm: Arm,
    #[arg(long, default_value = "cos")]
    pub align: AlignKind,
    #[arg(long, value_enum, default_value_t = Toggle::On)]
    pub progressive: Toggle,
    #[arg(long = "freeze-stage3", value_enum, default_value_t = Toggle::Off)]
    pub freeze_stage3: Toggle,
    #[command(flatten)]
    pub stages: StageArgs,
}

impl TrainArgs {
    pub fn config(&self) -> StageConfig {
        StageConfig {
            align_kind: self.align,
            progressive: self.progressive.on(),
            freeze_policy_stage3: self.freeze_stage3.on(),
            ..self.stages.config()
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepArgs {
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "-90,-80,-70,-60,-50,-40,-30,-20,-10,0,10,20,30,40,50,60,70,80,90"
    )]
    pub views: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    pub episodes: usize,
    #[arg(long, default_value_t = 50)]
    pub horizon: usize,
    #[arg(long, default_value_t = 0)]
    pub sweep_seed: u64,
}

impl SweepArgs {
    pub fn spec(&self) -> SweepSpec {
        SweepSpec {
            viewpoints: self.views.clone(),
            episodes_per_view: self.episodes,
            horizon: self.horizon,
            seed: self.sweep_seed,
        }
    }
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalArgs {
    /// Directory written by `train`; not needed with `--expert`
    #[arg(long)]
    pub run: Option<PathBuf>,
    /// Directory written by `gen`, for the held-out alignment report
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Drive the sweep with the scripted expert instead of a trained policy
    #[arg(long)]
    pub expert: bool,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblateArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
    pub seeds: Vec<u64>,
    /// One seed, quarter-length stages and 10 episodes per view
    #[arg(long)]
    pub quick: bool,
    #[command(flatten)]
    pub stages: StageArgs,
    #[command(flatten)]
    pub sweep: SweepArgs,
}

#[derive(Args, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapArgs {
    /// Directory written by `train`; supplies the encoder and fusion module
    #[arg(long)]
    pub run: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub scene_seed: u64,
    #[arg(long, default_value_t = 0)]
    pub task: usize,
    #[arg(
        long,
        value_delimiter = ',',
        allow_hyphen_values = true,
        default_value = "0,45,90"
    )]
    pub thetas: Vec<f64>,
    /// Also emit heatmaps of the fused latent
    #[arg(long)]
    pub fused: bool,
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    if !path.exists() {
        return Err(Error::MissingInput(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Format {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes") + "\n"
}

impl RunConfig {
    pub fn out_dir(&self) -> &Path {
        match self {
            RunConfig::Gen(a) => &a.out,
            RunConfig::Train(a) => &a.out,
            RunConfig::Eval(a) => &a.out,
            RunConfig::Ablate(a) => &a.out,
            RunConfig::Heatmap(a) => &a.out,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        read_json(path)
    }

    /// Writes `config.json`, then runs the command. Returns the lines meant
    /// for standard output.
    pub fn execute(&self) -> Result<Vec<String>> {
        let dir = self.out_dir();
        create_dir(dir)?;
        write_file(&dir.join("config.json"), to_json(self))?;
        match self {
            RunConfig::Gen(a) => cmd_gen(a),
            RunConfig::Train(a) => cmd_train(a),
            RunConfig::Eval(a) => cmd_eval(a),
            RunConfig::Ablate(a) => cmd_ablate(a),
            RunConfig::Heatmap(a) => cmd_heatmap(a),
        }
    }
}

pub fn cmd_gen(args: &GenArgs) -> Result<Vec<String>> {
    let protocol = args.protocol();
    protocol.validate()?;
    let (d_r, d_m) = build_datasets(&protocol)?;
    let large = build_reference_set(&protocol, (protocol.v + 1) * protocol.j)?;
    let heldout = Dataset {
        trajectories: Vec::new(),
        paired_states: heldout_pairs(protocol.seed, &args.heldout_views, args.heldout_per_view)?,
    };
    write_file(&args.out.join("protocol.json"), to_json(&protocol))?;
    for (name, ds) in [
        ("d_r", &d_r),
        ("d_m", &d_m),
        ("d_r_large", &large),
        ("heldout", &heldout),
    ] {
        write_dataset(&args.out.join(format!("{name}.bin")), ds)?;
    }
    let mut lines = vec![
        format!(
            "D_R: {} trajectories, {} steps",
            d_r.trajectories.len(),
            d_r.step_count()
        ),
        format!(
            "D_M: {} trajectories, {} steps, {} paired states",
            d_m.trajectories.len(),
            d_m.step_count(),
            d_m.paired_states.len()
        ),
        format!(
            "total: {} trajectories",
            d_r.trajectories.len() + d_m.trajectories.len()
        ),
        format!(
            "reference baseline set: {} trajectories",
            large.trajectories.len()
        ),
        format!("held-out pairs: {}", heldout.paired_states.len()),
    ];
    if d_m.is_empty() {
        lines.push("warning: D_M is empty; only reference-view training is possible".into());
    }
    Ok(lines)
}

fn load_split(dir: &Path, name: &str) -> Result<Dataset> {
    read_dataset(&dir.join(format!("{name}.bin")))
}

/// Encodes the splits of a `gen` directory.
pub fn load_prepared(data: &Path, with_large: bool) -> Result<PreparedData> {
    let d_r = load_split(data, "d_r")?;
    let d_m = load_split(data, "d_m")?;
    let large = if with_large {
        Some(load_split(data, "d_r_large")?)
    } else {
        None
    };
    PreparedData::new(EncoderSpec::default(), &d_r, &d_m, large.as_ref())
}

fn losses_csv(bundle: &TrainedBundle) -> String {
    let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
    let mut s = String::from("epoch,stage,action_loss,align_loss\n");
    for r in &bundle.curves {
        s.push_str(&format!(
            "{},{},{},{}\n",
            r.epoch,
            r.stage,
            opt(r.action_loss),
            opt(r.align_loss)
        ));
    }
    s
}

fn stage3_csv(bundle: &TrainedBundle) -> String {
    let mut s = String::from("batch,epoch,action,align,total\n");
    for (i, b) in bundle.stage3_batches.iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{}\n",
            b.epoch, b.action, b.align, b.total
        ));
    }
    s
}

/// Persists a trained bundle into `dir`.
pub fn save_bundle(dir: &Path, bundle: &TrainedBundle) -> Result<()> {
    create_dir(dir)?;
    write_checkpoint(&dir.join("policy.ckpt"), bundle.policy.mlp())?;
    if let Some(f) = &bundle.fusion {
        write_checkpoint(&dir.join("fusion.ckpt"), f.mlp())?;
        write_file(&dir.join("stage3.csv"), stage3_csv(bundle))?;
    }
    write_file(&dir.join("provenance.json"), to_json(&bundle.provenance))?;
    write_file(&dir.join("losses.csv"), losses_csv(bundle))?;
    write_file(&dir.join("digest.txt"), bundle.digest() + "\n")
}

/// Restores parameters and provenance written by [`save_bundle`]; loss
/// curves are not reloaded.
pub fn load_bundle(dir: &Path) -> Result<TrainedBundle> {
    let provenance: Provenance = read_json(&dir.join("provenance.json"))?;
    let policy = PolicyParams::from_mlp(read_checkpoint(&dir.join("policy.ckpt"))?)?;
    let fusion_path = dir.join("fusion.ckpt");
    let fusion = match provenance.arm {
        Arm::Lpaf => Some(FusionModule::from_mlp(read_checkpoint(&fusion_path)?)?),
        _ => None,
    };
    Ok(TrainedBundle {
        policy,
        fusion,
        provenance,
        curves: Vec::new(),
        stage3_batches: Vec::new(),
    })
}

pub fn cmd_train(args: &TrainArgs) -> Result<Vec<String>> {
    let cfg = args.config();
    cfg.validate()?;
    let data = load_prepared(&args.data, args.arm == Arm::RefOnly)?;
    let bundle = match args.arm {
        Arm::Lpaf => train_lpaf(&cfg, &data)?,
        Arm::RefOnly => train_baseline_reference(&cfg, &data)?,
        Arm::Mixed => train_baseline_mixed(&cfg, &data)?,
    };
    save_bundle(&args.out, &bundle)?;
    let mut lines = vec![format!("arm {} trained", args.arm.label())];
    for stage in 1..=3u8 {
        if let Some(last) = bundle.curves.iter().rfind(|r| r.stage == stage) {
            lines.push(format!(
                "stage {stage}: {} epochs, final action {:?}, align {:?}",
                last.epoch + 1,
                last.action_loss,
                last.align_loss
            ));
        }
    }
    lines.push(format!("digest {}", bundle.digest()));
    Ok(lines)
}

pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<String>> {
    let spec = args.sweep.spec();
    spec.validate()?;
    let mut report = Report::default();
    if args.expert {
        report.sweeps.push(sweep_controller(
            &ExpertController,
            "expert",
            spec.seed,
            &spec,
        )?);
    } else {
        let run = args.run.as_ref().ok_or_else(|| {
            Error::InvalidConfig("eval needs --run unless --expert is given".into())
        })?;
        let bundle = load_bundle(run)?;
        report.sweeps.push(sweep(&bundle, &spec)?);
        if let Some(data) = &args.data {
            let heldout = load_split(data, "heldout")?;
            let encoder = EncoderSpec::from_seed(bundle.provenance.encoder_seed);
            report.alignment = Some(alignment_report(
                bundle.fusion.as_ref(),
                &encoder,
                &heldout.paired_states,
            )?);
        }
    }
    export(&report, &args.out)?;
    let r = &report.sweeps[0];
    let mut lines: Vec<String> = r
        .views
        .iter()
        .map(|v| format!("{:>6}°  {:>3}/{:<3}", v.theta_deg, v.successes, v.episodes))
        .collect();
    lines.push(format!(
        "mean success {:.2}%",
        100.0 * r.mean_success(None)?
    ));
    Ok(lines)
}

pub fn cmd_ablate(args: &AblateArgs) -> Result<Vec<String>> {
    let mut cfg = args.stages.config();
    let mut spec = args.sweep.spec();
    let mut seeds = args.seeds.clone();
    if args.quick {
        cfg.stage1_epochs = cfg.stage1_epochs.div_ceil(4);
        cfg.stage2_epochs = cfg.stage2_epochs.div_ceil(4);
        cfg.stage3_epochs = cfg.stage3_epochs.div_ceil(4);
        spec.episodes_per_view = 10;
        seeds.truncate(1);
    }
    let data = load_prepared(&args.data, false)?;
    let ablation = run_ablations(&cfg, &data, &seeds, &spec)?;
    let tables = ablation.render();
    write_file(&args.out.join("ablation.json"), to_json(&ablation))?;
    export(
        &Report {
            sweeps: ablation.sweeps.clone(),
            tables: Some(tables.clone()),
            ..Report::default()
        },
        &args.out,
    )?;
    Ok(tables.lines().map(str::to_string).collect())
}

pub fn cmd_heatmap(args: &HeatmapArgs) -> Result<Vec<String>> {
    let bundle = args.run.as_ref().map(|r| load_bundle(r)).transpose()?;
    let encoder = bundle.as_ref().map_or_else(EncoderSpec::default, |b| {
        EncoderSpec::from_seed(b.provenance.encoder_seed)
    });
    let fusion = if args.fused {
        let missing =
            || Error::MissingInput(args.run.clone().unwrap_or_default().join("fusion.ckpt"));
        Some(
            bundle
                .as_ref()
                .ok_or_else(missing)?
                .fusion
                .as_ref()
                .ok_or_else(missing)?,
        )
    } else {
        None
    };
    let scene = sample_scene(args.task, args.scene_seed)?;
    let mut csv = String::from("theta_deg,fused,mean,target_mean\n");
    let target = crate::evalkit::target_tokens(&scene);
    let mut lines = Vec::new();
    for &theta in &args.thetas {
        let mut maps = vec![token_heatmap(
            None,
            &encoder,
            &scene,
            scene.gripper_start,
            theta,
        )?];
        if let Some(f) = fusion {
            maps.push(token_heatmap(
                Some(f),
                &encoder,
                &scene,
                scene.gripper_start,
                theta,
            )?);
        }
        for h in maps {
            let name = heatmap_file_name(&h);
            write_heatmap(&args.out.join(&name), &h)?;
            csv.push_str(&format!(
                "{theta},{},{},{}\n",
                h.fused,
                h.mean(),
                h.mean_over(&target)
            ));
            lines.push(format!(
                "{name}: mean {:.4}, target tokens {:.4}",
                h.mean(),
                h.mean_over(&target)
            ));
        }
    }
    write_file(&args.out.join("heatmaps.csv"), csv)?;
    Ok(lines)
}

/// Dispatches parsed arguments.
pub fn run(cli: Cli) -> Result<Vec<String>> {
    match cli.command {
        CliCommand::Run(cfg) => cfg.execute(),
        CliCommand::Replay { config } => RunConfig::load(&config)?.execute(),
    }
}
