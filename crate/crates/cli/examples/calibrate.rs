//! Parameter calibration grids for the robustness experiments.
//!
//! Prints tables to stdout; run with `--release` and pick a phase:
//!
//! ```text
//! cargo run --release -p air-cli --example calibrate [PHASE]
//!
//! PHASE: rho | lambda | sgd | airsgd | auc | probe | geom | baseline
//!        | solvercmp | exact | subsample | tiny | final | all
//! ```
//!
//! The integration suite pins the constants these grids justify.

use air_cli::config::{
    BlobsSection, DatasetConfig, ExperimentConfig, MetricsConfig, NoiseConfig, RegConfig,
    SadmmSection, SgdSection, SolverConfig,
};
use air_cli::harness::{self, Prepared, RunSummary};
use air_core::loss::{loss_value, LossKind, MiniBatch};
use air_core::noise::NoiseConvention;
use air_core::rng::{rng_stream, streams};
use air_core::sadmm::SadmmConfig;
use air_core::{Dataset, WeightRule, Weights};

fn blob_config(seed: u64, level: f64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        dataset: DatasetConfig::Blobs(BlobsSection {
            num_examples: 2500,
            feature_dim: 50,
            num_classes: 10,
            separation: 3.0,
            stddev: 1.0,
            test_fraction: 0.2,
        }),
        noise: if level > 0.0 {
            NoiseConfig::Confusion {
                level,
                convention: NoiseConvention::KeepProb,
            }
        } else {
            NoiseConfig::None
        },
        solver: SolverConfig::default(),
        regularizer: RegConfig::default(),
        metrics: MetricsConfig::default(),
        sweep: None,
    }
}

/// Geometry the integration suite pins: tight clusters so the clean
/// structure is learnable, wide enough spread that a noise-fitting
/// baseline visibly degrades.
fn frozen_config(seed: u64, level: f64) -> ExperimentConfig {
    let mut cfg = blob_config(seed, level);
    if let DatasetConfig::Blobs(b) = &mut cfg.dataset {
        b.stddev = 0.75;
    }
    cfg
}

struct Cell {
    summary: RunSummary,
}

fn run(cfg: &ExperimentConfig, prepared: &Prepared, seed: u64) -> Cell {
    let run = harness::run_training(cfg, prepared, seed).expect("training");
    let summary = harness::summarize(
        cfg,
        prepared,
        seed,
        &run.weights,
        &run.epochs,
        run.activation.as_ref(),
    )
    .expect("summary");
    Cell { summary }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into())
}

fn print_cell(tag: &str, cell: &Cell) {
    let s = &cell.summary;
    println!(
        "{tag:<40} seed={} obj={:>10.3} train={:.4} true={} test={} auc {}->{}",
        s.seed,
        s.final_objective.unwrap_or(f64::NAN),
        s.train.accuracy.unwrap_or(f64::NAN),
        fmt_opt(s.train_accuracy_true_labels),
        fmt_opt(s.test.as_ref().and_then(|t| t.accuracy)),
        fmt_opt(s.activation.and_then(|a| a.first_auc)),
        fmt_opt(s.activation.and_then(|a| a.last_auc)),
    );
}

fn phase_rho() {
    println!("== rho_max grid, sadmm, levels 0 and 0.5 ==");
    for &level in &[0.0, 0.5] {
        for seed in 0..2u64 {
            let base = blob_config(seed, level);
            let prepared = harness::build_dataset(&base, seed).expect("data");
            for &rho_max in &[30.0, 100.0, 300.0, 1e3, 1e4] {
                let mut cfg = base.clone();
                cfg.solver = SolverConfig::AirSadmm(SadmmSection {
                    rho_max,
                    ..SadmmSection::default()
                });
                let cell = run(&cfg, &prepared, seed);
                print_cell(&format!("level={level} rho_max={rho_max}"), &cell);
            }
        }
    }
}

fn phase_lambda() {
    println!("== lambda_g grid at rho_max=100, level 0.5 ==");
    for seed in 0..2u64 {
        let base = blob_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        for lambda_g in [None, Some(0.05), Some(0.2), Some(1.0)] {
            let mut cfg = base.clone();
            cfg.solver = SolverConfig::AirSadmm(SadmmSection {
                rho_max: 100.0,
                ..SadmmSection::default()
            });
            cfg.regularizer.lambda_g = lambda_g;
            let cell = run(&cfg, &prepared, seed);
            let tag = match lambda_g {
                None => "lambda_g=size-normalized".to_string(),
                Some(v) => format!("lambda_g={v}"),
            };
            print_cell(&tag, &cell);
        }
    }
}

fn sgd_solver(kind: &str, lr: f64) -> SolverConfig {
    let section = SgdSection {
        learning_rate: lr,
        ..SgdSection::default()
    };
    match kind {
        "air-sgd" => SolverConfig::AirSgd(section),
        "l2-sgd" => SolverConfig::L2Sgd(section),
        "hinge-sgd" => SolverConfig::HingeSgd(section),
        _ => unreachable!(),
    }
}

fn phase_sgd() {
    println!("== l2-sgd learning rate grid, levels 0 and 0.5 ==");
    for &level in &[0.0, 0.5] {
        for seed in 0..2u64 {
            let base = blob_config(seed, level);
            let prepared = harness::build_dataset(&base, seed).expect("data");
            for &lr in &[3e-5, 1e-4, 3e-4, 1e-3, 3e-3] {
                let mut cfg = base.clone();
                cfg.solver = sgd_solver("l2-sgd", lr);
                let cell = run(&cfg, &prepared, seed);
                print_cell(&format!("level={level} l2 lr={lr}"), &cell);
            }
        }
    }
}

fn phase_airsgd() {
    println!("== air-sgd learning rate grid, level 0.5 ==");
    for seed in 0..2u64 {
        let base = blob_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        for &lr in &[3e-5, 1e-4, 3e-4, 1e-3] {
            let mut cfg = base.clone();
            cfg.solver = sgd_solver("air-sgd", lr);
            let cell = run(&cfg, &prepared, seed);
            print_cell(&format!("air-sgd lr={lr}"), &cell);
        }
    }
}

fn phase_subsample() {
    println!("== group subsampling at the frozen geometry, level 0.5 ==");
    let mut totals: std::collections::BTreeMap<String, f64> = Default::default();
    for seed in 0..5u64 {
        let base = frozen_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        for &fraction in &[1.0, 0.5, 0.1] {
            let mut cfg = base.clone();
            cfg.solver = SolverConfig::AirSadmm(SadmmSection {
                rho_max: 100.0,
                ..SadmmSection::default()
            });
            cfg.regularizer.lambda_g = Some(0.05);
            cfg.regularizer.subsample_fraction = fraction;
            let cell = run(&cfg, &prepared, seed);
            print_cell(&format!("fraction={fraction}"), &cell);
            let test = cell
                .summary
                .test
                .as_ref()
                .and_then(|t| t.accuracy)
                .unwrap_or(f64::NAN);
            *totals.entry(format!("{fraction}")).or_insert(0.0) += test;
        }
    }
    println!("-- mean test accuracy over 5 seeds --");
    for (fraction, total) in &totals {
        println!("fraction={fraction}: {:.4}", total / 5.0);
    }
}

fn auc_of(op: &air_core::GroupOperator, w: &Weights, ds: &Dataset) -> Option<f64> {
    let values = air_core::metrics::example_activations(op, w, ds.labels()).expect("activations");
    let mask = ds.clean_mask().expect("mask");
    air_core::metrics::ranking_auc(&values, mask)
}

fn phase_probe() {
    println!("== averaged vs raw iterate activation auc, level 0.5 ==");
    for seed in 0..2u64 {
        let base = blob_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        let ds = &prepared.train;
        let op = air_core::GroupOperator::from_dataset(ds, WeightRule::Fixed(1.0)).expect("op");
        for &(lambda_g, rho_max) in &[(0.05, 30.0), (0.05, 100.0), (0.1, 30.0), (0.1, 100.0)] {
            let cfg = SadmmConfig {
                weight_rule: WeightRule::Fixed(lambda_g),
                rho_max,
                epochs: 60,
                tolerance: 0.0,
                seed,
                ..SadmmConfig::default()
            };
            let mut trail: Vec<(usize, Option<f64>, Option<f64>)> = Vec::new();
            let outcome = air_core::sadmm::train_with_observer(ds, &cfg, |view| {
                if view.epoch % 20 == 19 || view.epoch == 0 {
                    trail.push((
                        view.epoch,
                        auc_of(&op, view.model, ds),
                        auc_of(&op, view.iterate, ds),
                    ));
                }
            })
            .expect("train");
            let acc = air_core::metrics::accuracy(&outcome.weights, ds).expect("acc");
            print!("seed={seed} lambda_g={lambda_g} rho_max={rho_max:>4} acc={acc:.3} ");
            for (epoch, avg, raw) in &trail {
                print!("[ep{epoch} avg={} raw={}] ", fmt_opt(*avg), fmt_opt(*raw));
            }
            println!();
        }
    }
}

fn phase_baseline() {
    println!("== sgd learning-rate grids at the frozen geometry ==");
    for &level in &[0.0, 0.5] {
        for seed in 0..2u64 {
            let base = frozen_config(seed, level);
            let prepared = harness::build_dataset(&base, seed).expect("data");
            for name in ["l2-sgd", "air-sgd"] {
                for &lr in &[1e-5, 3e-5, 1e-4, 3e-4, 1e-3] {
                    let mut cfg = base.clone();
                    cfg.solver = sgd_solver(name, lr);
                    let cell = run(&cfg, &prepared, seed);
                    print_cell(&format!("level={level} {name} lr={lr}"), &cell);
                }
            }
        }
    }
}

fn exact_objective(ds: &Dataset, w: &Weights, lambda_g: f64) -> f64 {
    let op = air_core::GroupOperator::from_dataset(ds, WeightRule::Fixed(lambda_g)).expect("op");
    air_core::objective::air_objective(ds, &op, w, 1e-4, LossKind::Softmax).expect("objective")
}

fn phase_exact() {
    println!("== exact objectives, sadmm vs air-sgd at the frozen benchmark ==");
    let mut totals: std::collections::BTreeMap<String, (f64, f64)> = Default::default();
    for seed in 0..5u64 {
        let base = frozen_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        let mut entries: Vec<(String, SolverConfig)> = vec![
            (
                "sadmm rho=100".into(),
                SolverConfig::AirSadmm(SadmmSection {
                    rho_max: 100.0,
                    ..SadmmSection::default()
                }),
            ),
            (
                "sadmm rho=300".into(),
                SolverConfig::AirSadmm(SadmmSection {
                    rho_max: 300.0,
                    ..SadmmSection::default()
                }),
            ),
        ];
        for &lr in &[3e-6, 1e-5, 3e-5] {
            entries.push((format!("air-sgd lr={lr}"), sgd_solver("air-sgd", lr)));
        }
        for (name, solver) in entries {
            let mut cfg = base.clone();
            cfg.solver = solver;
            cfg.regularizer.lambda_g = Some(0.05);
            let run = harness::run_training(&cfg, &prepared, seed).expect("training");
            let obj = exact_objective(&prepared.train, &run.weights, 0.05);
            let summary = harness::summarize(
                &cfg,
                &prepared,
                seed,
                &run.weights,
                &run.epochs,
                run.activation.as_ref(),
            )
            .expect("summary");
            let test = summary
                .test
                .as_ref()
                .and_then(|t| t.accuracy)
                .unwrap_or(f64::NAN);
            println!("seed={seed} {name:<18} exact_obj={obj:>10.3} test={test:.4}");
            let e = totals.entry(name).or_insert((0.0, 0.0));
            e.0 += obj;
            e.1 += test;
        }
    }
    println!("-- means over 5 seeds --");
    for (name, (obj, test)) in &totals {
        println!(
            "{name:<18} exact_obj={:.3} test={:.4}",
            obj / 5.0,
            test / 5.0
        );
    }
}

fn phase_solvercmp() {
    println!("== sadmm vs subgradient sgd on the size-normalized objective, level 0.5 ==");
    let mut totals: std::collections::BTreeMap<String, (f64, f64)> = Default::default();
    for seed in 0..5u64 {
        let base = frozen_config(seed, 0.5);
        let prepared = harness::build_dataset(&base, seed).expect("data");
        let mut entries: Vec<(String, SolverConfig)> = vec![(
            "sadmm rho=100".into(),
            SolverConfig::AirSadmm(SadmmSection {
                rho_max: 100.0,
                ..SadmmSection::default()
            }),
        )];
        for &lr in &[3e-6, 1e-5, 3e-5, 1e-4, 3e-4] {
            entries.push((format!("air-sgd lr={lr}"), sgd_solver("air-sgd", lr)));
        }
        for (name, solver) in entries {
            let mut cfg = base.clone();
            cfg.solver = solver;
            let run = harness::run_training(&cfg, &prepared, seed).expect("training");
            let obj = exact_objective(&prepared.train, &run.weights, 0.2);
            let summary = harness::summarize(
                &cfg,
                &prepared,
                seed,
                &run.weights,
                &run.epochs,
                run.activation.as_ref(),
            )
            .expect("summary");
            let test = summary
                .test
                .as_ref()
                .and_then(|t| t.accuracy)
                .unwrap_or(f64::NAN);
            println!("seed={seed} {name:<18} exact_obj={obj:>10.3} test={test:.4}");
            let e = totals.entry(name).or_insert((0.0, 0.0));
            e.0 += obj;
            e.1 += test;
        }
    }
    println!("-- means over 5 seeds --");
    for (name, (obj, test)) in &totals {
        println!(
            "{name:<18} exact_obj={:.3} test={:.4}",
            obj / 5.0,
            test / 5.0
        );
    }
}

fn phase_geom() {
    println!("== geometry: separation x stddev, air vs l2, level 0.5 ==");
    for &separation in &[3.0, 4.0] {
        for &stddev in &[0.5, 0.75, 1.0] {
            for seed in 0..2u64 {
                let mut base = blob_config(seed, 0.5);
                if let DatasetConfig::Blobs(b) = &mut base.dataset {
                    b.separation = separation;
                    b.stddev = stddev;
                }
                let prepared = harness::build_dataset(&base, seed).expect("data");

                let mut air = base.clone();
                air.solver = SolverConfig::AirSadmm(SadmmSection {
                    rho_max: 100.0,
                    epochs: 40,
                    ..SadmmSection::default()
                });
                air.regularizer.lambda_g = Some(0.05);
                let cell = run(&air, &prepared, seed);
                print_cell(&format!("sep={separation} sd={stddev} air"), &cell);

                let mut l2 = base.clone();
                l2.solver = SolverConfig::L2Sgd(SgdSection {
                    learning_rate: 3e-5,
                    epochs: 40,
                    ..SgdSection::default()
                });
                let cell = run(&l2, &prepared, seed);
                print_cell(&format!("sep={separation} sd={stddev} l2 "), &cell);
            }
        }
    }
}

fn phase_auc() {
    println!("== activation auc vs epochs and separation, level 0.5 ==");
    for &separation in &[3.0, 3.5, 4.0] {
        for &epochs in &[30usize, 60, 100] {
            for seed in 0..2u64 {
                let mut base = blob_config(seed, 0.5);
                if let DatasetConfig::Blobs(b) = &mut base.dataset {
                    b.separation = separation;
                }
                let prepared = harness::build_dataset(&base, seed).expect("data");

                let mut air = base.clone();
                air.solver = SolverConfig::AirSadmm(SadmmSection {
                    rho_max: 100.0,
                    epochs,
                    ..SadmmSection::default()
                });
                let cell = run(&air, &prepared, seed);
                print_cell(&format!("sep={separation} ep={epochs} air-sadmm"), &cell);

                let mut l2 = base.clone();
                l2.solver = SolverConfig::L2Sgd(SgdSection {
                    learning_rate: 3e-5,
                    epochs,
                    ..SgdSection::default()
                });
                let cell = run(&l2, &prepared, seed);
                print_cell(&format!("sep={separation} ep={epochs} l2-sgd"), &cell);
            }
        }
    }
}

/// Full-batch subgradient descent on the group-regularized objective,
/// computed from raw definitions (no operator code shared with the
/// solver under test). Returns the best objective seen.
fn reference_minimum(dataset: &Dataset, lambda1: f64, lambda_g: f64, iters: usize) -> f64 {
    let x = dataset.features();
    let (n, p) = x.dim();
    let c = dataset.num_classes();
    let mut w = Weights::zeros((p, c));
    let full = MiniBatch::full(n).expect("nonempty");
    let mut best = f64::INFINITY;

    let objective = |w: &Weights| -> f64 {
        let value = loss_value(LossKind::Softmax, w, dataset, &full).expect("loss");
        let ridge: f64 = w.iter().map(|a| a * a).sum::<f64>() * lambda1;
        let mut penalty = 0.0;
        for i in 0..n {
            for class in 0..c {
                let norm: f64 = (0..p)
                    .map(|j| {
                        let r = x[[i, j]] * w[[j, class]];
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt();
                penalty += lambda_g * norm;
            }
        }
        value + ridge + penalty
    };

    for k in 0..iters {
        best = best.min(objective(&w));
        let (_, mut grad) =
            air_core::loss::loss_and_gradient(LossKind::Softmax, &w, dataset, &full)
                .expect("gradient");
        // Ridge gradient plus the group subgradient, from the definition.
        for class in 0..c {
            for j in 0..p {
                grad[[j, class]] += 2.0 * lambda1 * w[[j, class]];
            }
        }
        for i in 0..n {
            for class in 0..c {
                let norm: f64 = (0..p)
                    .map(|j| {
                        let r = x[[i, j]] * w[[j, class]];
                        r * r
                    })
                    .sum::<f64>()
                    .sqrt();
                if norm > 0.0 {
                    for j in 0..p {
                        grad[[j, class]] += lambda_g * x[[i, j]] * x[[i, j]] * w[[j, class]] / norm;
                    }
                }
            }
        }
        let step = 0.05 / (1.0 + (k as f64 / 2000.0)).sqrt();
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1e-12);
        w.zip_mut_with(&grad, |wv, gv| *wv -= step / grad_norm * gv);
    }
    best.min(objective(&w))
}

fn tiny_dataset(seed: u64) -> Dataset {
    let spec = air_core::data::BlobSpec {
        num_examples: 20,
        feature_dim: 5,
        num_classes: 2,
        separation: 2.5,
        stddev: 1.0,
    };
    let mut rng = rng_stream(seed, streams::BLOBS);
    air_core::data::generate_blobs(&spec, &mut rng).expect("blobs")
}

fn phase_tiny() {
    println!("== tiny-problem convergence: sadmm vs reference ==");
    let lambda1 = 1e-4;
    for seed in 0..2u64 {
        let ds = tiny_dataset(seed);
        for &lambda_g in &[2.0, 0.5, 0.1] {
            let reference = reference_minimum(&ds, lambda1, lambda_g, 200_000);
            for &(rho_max, epochs) in &[(1e3, 2000usize), (1e3, 8000), (100.0, 8000), (30.0, 8000)]
            {
                let cfg = SadmmConfig {
                    lambda1,
                    weight_rule: WeightRule::Fixed(lambda_g),
                    batch_size: 20,
                    epochs,
                    rho_max,
                    tolerance: 0.0,
                    seed,
                    ..SadmmConfig::default()
                };
                let outcome = air_core::sadmm::train(&ds, &cfg).expect("sadmm");
                let op = air_core::GroupOperator::from_dataset(&ds, WeightRule::Fixed(lambda_g))
                    .expect("op");
                let achieved = air_core::objective::air_objective(
                    &ds,
                    &op,
                    &outcome.weights,
                    lambda1,
                    LossKind::Softmax,
                )
                .expect("objective");
                let residual = outcome.history.epochs.last().map(|e| e.residual);
                println!(
                    "seed={seed} lambda_g={lambda_g} rho_max={rho_max:>6} epochs={epochs:>5}: \
                     ref={reference:.6} sadmm={achieved:.6} rel_gap={:+.3e} residual={}",
                    (achieved - reference) / reference.abs().max(1.0),
                    fmt_opt(residual),
                );
            }
        }
    }
}

fn phase_final() {
    println!("== paired comparison at the frozen geometry, 5 seeds, levels 0 and 0.5 ==");
    let solvers: Vec<(&str, SolverConfig)> = vec![
        (
            "air-sadmm",
            SolverConfig::AirSadmm(SadmmSection {
                rho_max: 100.0,
                ..SadmmSection::default()
            }),
        ),
        ("air-sgd", sgd_solver("air-sgd", 1e-5)),
        ("l2-sgd", sgd_solver("l2-sgd", 3e-5)),
    ];
    let mut acc: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
    let mut first_auc: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut last_auc: std::collections::BTreeMap<String, Vec<f64>> = Default::default();
    let mut objective: std::collections::BTreeMap<(String, String), Vec<f64>> = Default::default();
    for &level in &[0.0, 0.5] {
        for seed in 0..5u64 {
            let base = frozen_config(seed, level);
            let prepared = harness::build_dataset(&base, seed).expect("data");
            for (name, solver) in &solvers {
                let mut cfg = base.clone();
                cfg.solver = solver.clone();
                if matches!(solver, SolverConfig::AirSadmm(_) | SolverConfig::AirSgd(_)) {
                    cfg.regularizer.lambda_g = Some(0.05);
                }
                let cell = run(&cfg, &prepared, seed);
                print_cell(&format!("level={level} {name}"), &cell);
                let test = cell
                    .summary
                    .test
                    .as_ref()
                    .and_then(|t| t.accuracy)
                    .unwrap_or(f64::NAN);
                acc.entry((name.to_string(), format!("{level}")))
                    .or_default()
                    .push(test);
                objective
                    .entry((name.to_string(), format!("{level}")))
                    .or_default()
                    .push(cell.summary.final_objective.unwrap_or(f64::NAN));
                if level > 0.0 {
                    if let Some(a) = cell.summary.activation.and_then(|a| a.first_auc) {
                        first_auc.entry(name.to_string()).or_default().push(a);
                    }
                    if let Some(a) = cell.summary.activation.and_then(|a| a.last_auc) {
                        last_auc.entry(name.to_string()).or_default().push(a);
                    }
                }
            }
        }
    }
    println!("-- means --");
    for ((name, level), values) in &acc {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("test acc {name} level={level}: mean={mean:.4} min={min:.4}  {values:?}");
    }
    for ((name, level), values) in &objective {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        println!("objective {name} level={level}: mean={mean:.3} max={max:.3}");
    }
    for (name, values) in &first_auc {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        println!("first auc {name} level=0.5: mean={mean:.4}  {values:?}");
    }
    for (name, values) in &last_auc {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
        println!("last auc {name} level=0.5: mean={mean:.4} min={min:.4}  {values:?}");
    }
}

fn main() {
    let phase = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let all = phase == "all";
    if all || phase == "rho" {
        phase_rho();
    }
    if all || phase == "lambda" {
        phase_lambda();
    }
    if all || phase == "sgd" {
        phase_sgd();
    }
    if all || phase == "airsgd" {
        phase_airsgd();
    }
    if all || phase == "auc" {
        phase_auc();
    }
    if all || phase == "probe" {
        phase_probe();
    }
    if all || phase == "geom" {
        phase_geom();
    }
    if all || phase == "baseline" {
        phase_baseline();
    }
    if all || phase == "solvercmp" {
        phase_solvercmp();
    }
    if all || phase == "exact" {
        phase_exact();
    }
    if all || phase == "subsample" {
        phase_subsample();
    }
    if all || phase == "tiny" {
        phase_tiny();
    }
    if all || phase == "final" {
        phase_final();
    }
}
