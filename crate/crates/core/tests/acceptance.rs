//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails. Expensive models are trained once and shared between
//! the criteria that need them; each criterion's runtime is the sum of the
//! work it depends on.
//!
//!     cargo test --release --test acceptance

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use clap::Parser;
use lpaf::cli::{run, Cli};
use lpaf::encoder::{EncoderSpec, LatentVec, LATENT_DIM};
use lpaf::evalkit::{
    alignment_report, sweep, sweep_controller, target_tokens, token_heatmap, SweepSpec,
};
use lpaf::fusion::{alignment_loss, fuse, AlignKind, FusionModule};
use lpaf::nncore::{
    cosine_loss, finite_diff_grad, max_relative_error, mlp_backward, mlp_forward, mse_loss,
    Activation, Layer, MlpParams, Tensor,
};
use lpaf::policy::{action_loss, policy_forward, PolicyParams};
use lpaf::seed::{self, tag};
use lpaf::trainer::{
    run_ablations, stage1_action_only, stage2_fusion_only, stage3_joint, train_baseline_mixed,
    train_baseline_reference, AblationArm, PreparedData, StageConfig, TrainedBundle,
    PAPER_REFERENCE, TABLE_TITLES,
};
use lpaf::worldgen::{
    build_datasets, build_reference_set, heldout_pairs, sample_scene, DatasetProtocol,
    ExpertController, TASK_COUNT,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GRAD_TOL: f64 = 1e-4;
const GRAD_INSTANCES: u64 = 10;
const OOD_VIEWS: [f64; 6] = [-30.0, -20.0, -10.0, 10.0, 20.0, 30.0];
const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];
const EPISODES: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
    elapsed: Duration,
    limit: Option<Duration>,
}

impl Outcome {
    fn new(pass: bool, detail: String, elapsed: Duration, limit_s: Option<u64>) -> Self {
        let limit = limit_s.map(Duration::from_secs);
        Outcome {
            pass,
            detail,
            elapsed,
            limit,
        }
    }

    fn ok(&self) -> bool {
        self.pass && self.limit.is_none_or(|l| self.elapsed <= l)
    }
}

fn report(n: usize, name: &str, o: &Outcome) {
    let time = match o.limit {
        Some(l) => format!("{:.1}s of {}s", o.elapsed.as_secs_f64(), l.as_secs()),
        None => format!("{:.1}s", o.elapsed.as_secs_f64()),
    };
    let status = if o.ok() { "PASS" } else { "FAIL" };
    println!("{status} [{n}] {name}: {} ({time})", o.detail);
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn random(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.gen_range(-1.0..1.0))
}

fn small_mlp(rng: &mut ChaCha8Rng, dims: &[usize]) -> MlpParams {
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| Layer {
            weight: random(rng, w[1], w[0]) * 0.5,
            bias: ndarray::Array1::from_shape_fn(w[1], |_| rng.gen_range(-0.2..0.2)),
            activation: if i + 2 < dims.len() {
                Activation::Tanh
            } else {
                Activation::Identity
            },
        })
        .collect();
    MlpParams::from_layers(layers).unwrap()
}

/// Worst relative error of the analytic gradient over `GRAD_INSTANCES` seeds.
fn gradient_suite() -> Vec<(&'static str, f64)> {
    let fd = |f: &dyn Fn(&Tensor) -> f64, x: &Tensor| finite_diff_grad(f, x, 1e-6).unwrap();
    let mut worst = vec![
        ("MSE", 0.0f64),
        ("COS", 0.0),
        ("action", 0.0),
        ("fusion", 0.0),
        ("policy", 0.0),
    ];
    for s in 0..GRAD_INSTANCES {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + s);
        let shape = vec![3, 7];
        let pred = Tensor::new(
            shape.clone(),
            random(&mut rng, 3, 7).into_raw_vec_and_offset().0,
        )
        .unwrap();
        let target =
            Tensor::new(shape, random(&mut rng, 3, 7).into_raw_vec_and_offset().0).unwrap();

        let (_, g) = mse_loss(&pred, &target).unwrap();
        let n = fd(&|p| mse_loss(p, &target).unwrap().0, &pred);
        worst[0].1 = worst[0].1.max(max_relative_error(g.data(), n.data()));

        let (_, g) = cosine_loss(&pred, &target).unwrap();
        let n = fd(&|p| cosine_loss(p, &target).unwrap().0, &pred);
        worst[1].1 = worst[1].1.max(max_relative_error(g.data(), n.data()));

        // Action loss through the policy, with respect to its latent input.
        let p = PolicyParams::from_mlp(small_mlp(&mut rng, &[9 + TASK_COUNT, 6, 2])).unwrap();
        let z = random(&mut rng, 4, 9);
        let a = random(&mut rng, 4, 2) * 0.1;
        let tasks = [0, 1, 2, (s % 3) as usize];
        let out = action_loss(&p, z.view(), &tasks, a.view()).unwrap();
        let zt = Tensor::new(vec![4, 9], z.iter().copied().collect()).unwrap();
        let n = fd(
            &|t| {
                let zz = Array2::from_shape_vec((4, 9), t.data().to_vec()).unwrap();
                action_loss(&p, zz.view(), &tasks, a.view()).unwrap().loss
            },
            &zt,
        );
        let gz: Vec<f64> = out.grad_z.iter().copied().collect();
        worst[2].1 = worst[2].1.max(max_relative_error(&gz, n.data()));

        // Policy parameters.
        let flat = Tensor::vector(p.mlp().flatten()).unwrap();
        let n = fd(
            &|t| {
                let mut m = p.mlp().clone();
                m.set_flat(t.data()).unwrap();
                let q = PolicyParams::from_mlp(m).unwrap();
                action_loss(&q, z.view(), &tasks, a.view()).unwrap().loss
            },
            &flat,
        );
        worst[4].1 = worst[4]
            .1
            .max(max_relative_error(&out.grads.flatten(), n.data()));

        // Fusion parameters under both alignment losses, plus a raw MLP
        // backward against an arbitrary linear functional of its output.
        let f = FusionModule::from_mlp(small_mlp(&mut rng, &[8, 5, 8])).unwrap();
        let (za, zr) = (random(&mut rng, 3, 8), random(&mut rng, 3, 8));
        let flat = Tensor::vector(f.mlp().flatten()).unwrap();
        for kind in [AlignKind::Mse, AlignKind::Cos] {
            let out = alignment_loss(kind, &f, za.view(), zr.view()).unwrap();
            let n = fd(
                &|t| {
                    let mut m = f.mlp().clone();
                    m.set_flat(t.data()).unwrap();
                    let g = FusionModule::from_mlp(m).unwrap();
                    alignment_loss(kind, &g, za.view(), zr.view()).unwrap().loss
                },
                &flat,
            );
            worst[3].1 = worst[3]
                .1
                .max(max_relative_error(&out.grads.flatten(), n.data()));
            let n = fd(
                &|t| {
                    let zz = Array2::from_shape_vec((3, 8), t.data().to_vec()).unwrap();
                    alignment_loss(kind, &f, zz.view(), zr.view()).unwrap().loss
                },
                &Tensor::new(vec![3, 8], za.iter().copied().collect()).unwrap(),
            );
            let gz: Vec<f64> = out.grad_z_aux.iter().copied().collect();
            worst[3].1 = worst[3].1.max(max_relative_error(&gz, n.data()));
        }
        let x = Tensor::new(vec![2, 8], random(&mut rng, 2, 8).iter().copied().collect()).unwrap();
        let w = random(&mut rng, 2, 8);
        let (_, cache) = mlp_forward(f.mlp(), &x).unwrap();
        let gy = Tensor::new(vec![2, 8], w.iter().copied().collect()).unwrap();
        let (_, gx) = mlp_backward(f.mlp(), &cache, &gy).unwrap();
        let n = fd(
            &|t| {
                let (y, _) = mlp_forward(f.mlp(), t).unwrap();
                y.data().iter().zip(w.iter()).map(|(a, b)| a * b).sum()
            },
            &x,
        );
        worst[3].1 = worst[3].1.max(max_relative_error(gx.data(), n.data()));
    }
    worst
}

fn mean_rate(b: &TrainedBundle, views: &[f64], label: &str) -> (f64, String) {
    let spec = SweepSpec::with_views(views.to_vec(), EPISODES, 0);
    let r = sweep(b, &spec).unwrap();
    (
        r.mean_success(None).unwrap(),
        format!("{label} {:.1}%", 100.0 * r.mean_success(None).unwrap()),
    )
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn exec(args: &[String]) -> lpaf::Result<Vec<String>> {
    run(
        Cli::try_parse_from(std::iter::once("lpaf".to_string()).chain(args.iter().cloned()))
            .unwrap(),
    )
}

/// Runs each command, then replays its config into a fresh directory and
/// compares every CSV byte for byte.
fn determinism() -> (bool, String) {
    let tmp = tempfile::tempdir().unwrap();
    let p = |n: &str| tmp.path().join(n).to_string_lossy().into_owned();
    let commands: Vec<Vec<String>> = [
        format!("gen --out {} --j 2 --v 2 --horizon 30 --heldout-per-view 2", p("data")),
        format!("train --data {} --out {} --epochs1 2 --epochs2 2 --epochs3 2", p("data"), p("run")),
        format!("train --data {} --out {} --arm ref-only --epochs1 2", p("data"), p("ref")),
        format!("eval --run {} --data {} --out {} --episodes 4 --views -30,0,30", p("run"), p("data"), p("eval")),
        format!("heatmap --run {} --out {} --fused --thetas 0,45", p("run"), p("heat")),
        format!(
            "ablate --data {} --out {} --seeds 0 --epochs1 1 --epochs2 2 --epochs3 1 --episodes 2 --views -10,10",
            p("data"),
            p("ablate")
        ),
    ]
    .iter()
    .map(|c| c.split_whitespace().map(str::to_string).collect())
    .collect();
    let mut checked = 0;
    for (i, cmd) in commands.iter().enumerate() {
        if let Err(e) = exec(cmd) {
            return (false, format!("`{}` failed: {e}", cmd[0]));
        }
        let out = Path::new(&cmd[cmd.iter().position(|a| a == "--out").unwrap() + 1]).to_path_buf();
        let first = snapshot(&out);
        let replay = tmp.path().join(format!("replay{i}"));
        fs::create_dir_all(&replay).unwrap();
        fs::copy(out.join("config.json"), replay.join("config.json")).unwrap();
        fs::remove_dir_all(&out).unwrap();
        let args = vec![
            "replay".to_string(),
            replay.join("config.json").to_string_lossy().into_owned(),
        ];
        if let Err(e) = exec(&args) {
            return (false, format!("replay of `{}` failed: {e}", cmd[0]));
        }
        let second = snapshot(&out);
        let csvs: Vec<&(String, Vec<u8>)> =
            first.iter().filter(|(n, _)| n.ends_with(".csv")).collect();
        checked += csvs.len();
        if first != second {
            return (false, format!("`{}` output differs after replay", cmd[0]));
        }
    }
    (
        checked > 0,
        format!(
            "{} commands replayed, {checked} CSV files identical",
            commands.len()
        ),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut emit = |n: usize, name: &'static str, o: Outcome| {
        report(n, name, &o);
        results.push((n, name, o));
    };

    // 1. Gradient suite.
    let (worst, t) = timed(gradient_suite);
    let pass = worst.iter().all(|(_, e)| *e <= GRAD_TOL);
    let detail = worst
        .iter()
        .map(|(n, e)| format!("{n} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    emit(
        1,
        "gradient suite",
        Outcome::new(pass, format!("worst relative error {detail}"), t, Some(10)),
    );

    // 2. Expert oracle.
    let (r, t) =
        timed(|| sweep_controller(&ExpertController, "expert", 0, &SweepSpec::default()).unwrap());
    let total: usize = r.views.iter().map(|v| v.episodes).sum();
    let wins: usize = r.views.iter().map(|v| v.successes).sum();
    emit(
        2,
        "expert oracle",
        Outcome::new(
            wins == total && total == 950,
            format!("{wins}/{total}"),
            t,
            Some(30),
        ),
    );

    // 6. Identity at initialization (cheap, run early).
    let (res, t) = timed(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let policy = PolicyParams::new(0);
        let modules: Vec<FusionModule> = (0..5).map(FusionModule::new).collect();
        let mut same = 0;
        for i in 0..1000u64 {
            let z: Vec<f64> = (0..LATENT_DIM).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let fused = fuse(
                &modules[(i % 5) as usize],
                &LatentVec::new(z.clone()).unwrap(),
            )
            .unwrap();
            let task = (i % TASK_COUNT as u64) as usize;
            let a = policy_forward(&policy, &z, task).unwrap().greedy();
            let b = policy_forward(&policy, fused.as_slice(), task)
                .unwrap()
                .greedy();
            if a.map(f64::to_bits) == b.map(f64::to_bits) {
                same += 1;
            }
        }
        same
    });
    emit(
        6,
        "identity at init",
        Outcome::new(
            res == 1000,
            format!("{res}/1000 actions bit-identical"),
            t,
            None,
        ),
    );

    // 8. Determinism through the command line.
    let ((pass, detail), t) = timed(determinism);
    emit(8, "determinism", Outcome::new(pass, detail, t, None));

    // Shared data at the default protocol.
    let protocol = DatasetProtocol::default();
    let (data, t_data) = timed(|| {
        let (d_r, d_m) = build_datasets(&protocol).unwrap();
        let large = build_reference_set(&protocol, (protocol.v + 1) * protocol.j).unwrap();
        PreparedData::new(EncoderSpec::default(), &d_r, &d_m, Some(&large)).unwrap()
    });
    println!(
        "      data: D_R {} steps, D_M {} steps, {} pairs, reference baseline {} steps ({:.1}s)",
        data.reference.len(),
        data.multiview.len(),
        data.pairs.len(),
        data.reference_large.as_ref().map_or(0, |d| d.len()),
        t_data.as_secs_f64()
    );
    let base = StageConfig::default();

    // 3. Stage-1 sanity: reference-only baseline at θ=0.
    let (ref0, t_ref0) = timed(|| train_baseline_reference(&base, &data).unwrap());
    let (rate, t) = timed(|| mean_rate(&ref0, &[0.0], "θ=0").0);
    emit(
        3,
        "stage-1 sanity",
        Outcome::new(
            rate >= 0.9,
            format!(
                "reference-only success at θ=0 {:.1}% (need ≥ 90%)",
                100.0 * rate
            ),
            t_data + t_ref0 + t,
            Some(180),
        ),
    );

    // 4. Alignment efficacy after stage 2.
    let ((fusion0, _), t_s2) =
        timed(|| stage2_fusion_only(&base, FusionModule::new(base.seed), &data).unwrap());
    let (alignment, t_al) = timed(|| {
        let pairs = heldout_pairs(protocol.seed, &[-90.0, -45.0, 30.0, 45.0, 90.0], 50).unwrap();
        alignment_report(Some(&fusion0), &data.encoder, &pairs).unwrap()
    });
    let trained = [-90.0, -45.0, 45.0, 90.0];
    let rows: Vec<_> = trained.iter().map(|&t| alignment.row(t).unwrap()).collect();
    let raw = rows.iter().map(|r| r.raw_mse).sum::<f64>() / rows.len() as f64;
    let fused = rows.iter().map(|r| r.fused_mse).sum::<f64>() / rows.len() as f64;
    let r30 = alignment.row(30.0).unwrap();
    let (mse_ok, cos_ok) = (fused <= 0.2 * raw, r30.fused_cos > r30.raw_cos);
    emit(
        4,
        "alignment efficacy",
        Outcome::new(
            mse_ok && cos_ok,
            format!(
                "trained views fused/raw MSE {:.4}/{:.4} = {:.2} (need ≤ 0.20) {}; cos at 30° raw {:.4} → fused {:.4} {}",
                fused,
                raw,
                fused / raw,
                if mse_ok { "ok" } else { "FAILS" },
                r30.raw_cos,
                r30.fused_cos,
                if cos_ok { "ok" } else { "FAILS" }
            ),
            t_data + t_s2 + t_al,
            Some(300),
        ),
    );

    // 5. Out-of-distribution uplift over seeds.
    let mut t5 = t_data;
    let (mut lpaf_rates, mut ref_rates, mut mixed_rates) = (Vec::new(), Vec::new(), Vec::new());
    let mut lpaf0 = None;
    for &s in &SEEDS {
        let cfg = StageConfig {
            seed: s,
            ..base.clone()
        };
        let (bundles, t) = timed(|| {
            let reference = if s == 0 {
                None
            } else {
                Some(train_baseline_reference(&cfg, &data).unwrap())
            };
            let mixed = train_baseline_mixed(&cfg, &data).unwrap();
            let (policy, _) = stage1_action_only(&cfg, &data.reference).unwrap();
            let fusion = if s == 0 {
                fusion0.clone()
            } else {
                stage2_fusion_only(&cfg, FusionModule::new(s), &data)
                    .unwrap()
                    .0
            };
            let lpaf = stage3_joint(&cfg, policy, fusion, &data).unwrap();
            (reference, mixed, lpaf)
        });
        t5 += t + if s == 0 {
            t_ref0 + t_s2
        } else {
            Duration::ZERO
        };
        let (reference, mixed, lpaf) = bundles;
        let reference = reference.as_ref().unwrap_or(&ref0);
        let ((l, r, m), t) = timed(|| {
            (
                mean_rate(&lpaf, &OOD_VIEWS, "lpaf"),
                mean_rate(reference, &OOD_VIEWS, "ref"),
                mean_rate(&mixed, &OOD_VIEWS, "mixed"),
            )
        });
        t5 += t;
        println!("      seed {s}: {}, {}, {}", l.1, r.1, m.1);
        lpaf_rates.push(l.0);
        ref_rates.push(r.0);
        mixed_rates.push(m.0);
        if s == 0 {
            lpaf0 = Some(lpaf);
        }
    }
    let avg = |v: &[f64]| 100.0 * v.iter().sum::<f64>() / v.len() as f64;
    let (l, r, m) = (avg(&lpaf_rates), avg(&ref_rates), avg(&mixed_rates));
    emit(
        5,
        "OOD uplift",
        Outcome::new(
            l - r >= 15.0 && l >= m,
            format!("unseen-view success lpaf {l:.1}%, reference-only {r:.1}%, mixed {m:.1}% (need lpaf − ref ≥ 15 pp and lpaf ≥ mixed)"),
            t5,
            Some(1800),
        ),
    );

    // 9. Heatmap property on held-out scenes.
    let lpaf0 = lpaf0.unwrap();
    let fusion = lpaf0.fusion.as_ref().unwrap();
    let ((wins, scenes), t) = timed(|| {
        let mut wins = 0;
        let scenes = 20;
        for i in 0..scenes as u64 {
            let mut rng = seed::rng(&[protocol.seed, tag::HEATMAP, i]);
            let scene = sample_scene((i % TASK_COUNT as u64) as usize, rng.gen()).unwrap();
            let target = target_tokens(&scene);
            let raw =
                token_heatmap(None, &data.encoder, &scene, scene.gripper_start, 45.0).unwrap();
            let fused = token_heatmap(
                Some(fusion),
                &data.encoder,
                &scene,
                scene.gripper_start,
                45.0,
            )
            .unwrap();
            if fused.mean_over(&target) > raw.mean_over(&target) {
                wins += 1;
            }
        }
        (wins, scenes)
    });
    emit(
        9,
        "heatmap property",
        Outcome::new(
            wins * 5 >= scenes * 4,
            format!(
                "fused beats raw on target tokens at 45° in {wins}/{scenes} scenes (need ≥ 80%)"
            ),
            t,
            None,
        ),
    );

    // 7. Ablation harness at reduced length: completion and table layout only.
    let ((ablation, text), t) = timed(|| {
        let quick = StageConfig {
            stage1_epochs: 4,
            stage2_epochs: 6,
            stage3_epochs: 3,
            ..base.clone()
        };
        let spec = SweepSpec::with_views(OOD_VIEWS.to_vec(), 10, 0);
        let report = run_ablations(&quick, &data, &[0], &spec).unwrap();
        let text = report.render();
        (report, text)
    });
    let complete = AblationArm::ALL
        .iter()
        .all(|a| ablation.arm(a.id).is_some_and(|o| o.completed()));
    let titles = TABLE_TITLES.iter().all(|title| text.contains(title));
    let labels = AblationArm::ALL.iter().all(|a| text.contains(a.label));
    let paper = PAPER_REFERENCE
        .iter()
        .all(|v| text.contains(&format!("{v:.2}")));
    println!(
        "{}",
        text.lines()
            .map(|l| format!("      {l}"))
            .collect::<Vec<_>>()
            .join("\n")
    );
    emit(
        7,
        "ablation harness",
        Outcome::new(
            complete && titles && labels && paper,
            format!(
                "6 arms complete: {complete}, tables/labels/paper annotations present: {}",
                titles && labels && paper
            ),
            t,
            None,
        ),
    );

    results.sort_by_key(|r| r.0);
    let failed: Vec<String> = results
        .iter()
        .filter(|r| !r.2.ok())
        .map(|r| r.0.to_string())
        .collect();
    println!(
        "acceptance: {}/{} criteria pass{} (total {:.0}s)",
        results.len() - failed.len(),
        results.len(),
        if failed.is_empty() {
            String::new()
        } else {
            format!("; failing: {}", failed.join(", "))
        },
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
