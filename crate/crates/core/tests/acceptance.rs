//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits nonzero if any failed.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::time::Instant;

use ocl_core::analysis::{beta_t, loss_decay, verify_prop1, Prop1Config, Tolerances};
use ocl_core::harness::{cli_verify, execute, landscape_experiment, RunConfig, VerifyOptions, TASK1_TRAIN};
use ocl_core::tuner::{iteration_action_sets, ActionSpace, BanditPolicy, SoftmaxArms};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

type Outcome = Result<(bool, String), String>;

const SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

fn report(n: usize, name: &str, budget_s: Option<f64>, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let out = f();
    let secs = start.elapsed().as_secs_f64();
    let (ok, detail) = match out {
        Ok((ok, d)) => (ok, d),
        Err(e) => (false, format!("error: {e}")),
    };
    let over = budget_s.is_some_and(|b| secs > b);
    let ok = ok && !over;
    let budget = budget_s.map_or(String::new(), |b| format!(" / {b:.0} s"));
    println!(
        "criterion {n:2} [{}] {name}: {detail} ({secs:.1} s{budget})",
        if ok { "PASS" } else { "FAIL" }
    );
    ok
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

fn gradients() -> Outcome {
    let r = cli_verify(
        "gradients",
        &VerifyOptions {
            models: 50,
            ..VerifyOptions::default()
        },
    )
    .map_err(e)?;
    Ok((
        r.passed(),
        format!(
            "{} checks, max rel error {:.2e} (< 1e-4)",
            r.details["checks"],
            r.details["max_rel_error"].as_f64().unwrap_or(f64::NAN)
        ),
    ))
}

fn reservoir() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (m, n) in [(2, 4), (10, 100)] {
        let o = VerifyOptions {
            m,
            n,
            trials: Some(200_000),
            ..VerifyOptions::default()
        };
        let r = cli_verify("reservoir", &o).map_err(e)?;
        ok &= r.passed();
        parts.push(format!(
            "M={m} N={n} max |z| {:.2}",
            r.details["max_abs_z"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    Ok((ok, format!("{} (<= 3)", parts.join(", "))))
}

fn prop2() -> Outcome {
    let r = cli_verify(
        "prop2",
        &VerifyOptions {
            trials: Some(1_000_000),
            ..VerifyOptions::default()
        },
    )
    .map_err(e)?;
    let w = r.details["empirical_weight"].as_f64().unwrap_or(f64::NAN);
    let cos = r.details["cosine"].as_f64().unwrap_or(f64::NAN);
    let ok = r.passed() && ((w - 2.0) / 2.0).abs() <= 0.02 && cos > 0.999;
    Ok((ok, format!("weight {w:.4} (2 +- 2%), cosine {cos:.6} (> 0.999)")))
}

fn prop1() -> Outcome {
    let (dt, dm) = (6usize, 3usize);
    let lambda = dt as f64 / dm as f64;
    let tol = Tolerances {
        weight: 0.03,
        ..Tolerances::default()
    };
    // Balanced tasks: N_past = |D_T|. Absorbing t batches of 2 gives N_cur = 2t.
    let weights: Vec<(usize, f64, f64, bool)> = (0..=dt / 2)
        .into_par_iter()
        .map(|absorbed| {
            let cfg = Prop1Config::tiny(dt, dm, dt as u64, absorbed, 0);
            let v = verify_prop1(&cfg, 1_000_000, 1, tol).map_err(e)?;
            Ok((absorbed, v.empirical_weight, v.weight_ci_half_width, v.passed()))
        })
        .collect::<Result<_, String>>()?;
    let (_, end_w, _, end_pass) = *weights.last().expect("nonempty");
    let ratio = end_w / lambda;
    let end_ok = end_pass && ((ratio - 1.0 / 3.0) * 3.0).abs() <= 0.03;
    let betas: Vec<f64> = (0..=dt as u64)
        .map(|n| beta_t(n, dt as u64))
        .collect::<Result<_, _>>()
        .map_err(e)?;
    let analytic_monotone = betas.windows(2).all(|w| w[1] < w[0]);
    let empirical_monotone = weights.windows(2).all(|w| w[1].1 + w[1].2 < w[0].1 - w[0].2);
    let all_pass = weights.iter().all(|w| w.3);
    let ws: Vec<String> = weights.iter().map(|w| format!("{:.3}", w.1 / lambda)).collect();
    Ok((
        end_ok && analytic_monotone && empirical_monotone && all_pass,
        format!(
            "end-of-task weight/lambda {ratio:.4} (1/3 +- 3%), by t [{}] decreasing {}",
            ws.join(", "),
            empirical_monotone && analytic_monotone
        ),
    ))
}

fn prop3() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for g in ["flip", "rot4"] {
        let o = VerifyOptions {
            group: g.into(),
            trials: Some(100_000),
            ..VerifyOptions::default()
        };
        let r = cli_verify("prop3", &o).map_err(e)?;
        let cos = r.details["cosine"].as_f64().unwrap_or(f64::NAN);
        ok &= r.passed() && cos > 0.999;
        parts.push(format!("{g} cosine {cos:.6}"));
    }
    Ok((ok, format!("{} (> 0.999)", parts.join(", "))))
}

fn metrics() -> Outcome {
    let r = cli_verify(
        "metrics",
        &VerifyOptions {
            matrices: 1000,
            ..VerifyOptions::default()
        },
    )
    .map_err(e)?;
    Ok((
        r.passed(),
        format!(
            "1000 matrices, max identity error {:.1e}, inequality violations {}",
            r.details["max_identity_error"].as_f64().unwrap_or(f64::NAN),
            r.details["inequality_violations"]
        ),
    ))
}

const DECAY_BASE: &str = "\
stream.num_tasks = 2
stream.classes_per_task = 2
stream.train_per_class = 250
stream.test_per_class = 100
stream.image_side = 8
stream.class_separation = 3
model.hidden = 64
rehearsal.k = 10
rehearsal.lr = 0.1
rehearsal.memory_capacity = 100
output.checkpoints = false
output.memory_dump = false
";

const NO_AUG: &str = "aug.ops = identity\naug.q = 0\naug.target = none\n";

fn config(text: &str, seed: u64) -> Result<RunConfig, String> {
    RunConfig::parse(&format!("{text}stream.seed = {seed}\n")).map_err(e)
}

fn decay() -> Outcome {
    let rer_text = format!("{DECAY_BASE}{NO_AUG}");
    let rar_text = format!("{DECAY_BASE}aug.ops = default\naug.p = 1\naug.q = 30\naug.target = both\n");
    let gaps: Vec<(f64, f64, f64, f64)> = SEEDS
        .par_iter()
        .map(|&seed| {
            let run = |text: &str| -> Result<(f64, f64), String> {
                let cfg = config(text, seed)?;
                let out = execute(&cfg).map_err(e)?;
                let task2 = (250 * 2 / cfg.stream.batch_size) as u64;
                let d = loss_decay(&out.result.trace, task2).map_err(e)?;
                Ok((d.incoming_ratio, d.memory_ratio))
            };
            let (ri, rm) = run(&rer_text)?;
            let (ai, am) = run(&rar_text)?;
            Ok((ri, rm, ai, am))
        })
        .collect::<Result<_, String>>()?;
    let mean = |f: fn(&(f64, f64, f64, f64)) -> f64| gaps.iter().map(f).sum::<f64>() / gaps.len() as f64;
    let (ri, rm, ai, am) = (mean(|g| g.0), mean(|g| g.1), mean(|g| g.2), mean(|g| g.3));
    let (rer_gap, rar_gap) = (rm - ri, am - ai);
    let shrink = 1.0 - rar_gap / rer_gap;
    Ok((
        ri < rm && shrink >= 0.5,
        format!(
            "RER incoming {ri:.3} < memory {rm:.3}; RAR incoming {ai:.3}, memory {am:.3}; gap shrink {:.1}% (>= 50%)",
            100.0 * shrink
        ),
    ))
}

const DILEMMA_BASE: &str = "\
stream.num_tasks = 5
stream.classes_per_task = 2
stream.train_per_class = 250
stream.test_per_class = 100
stream.input_dim = 50
stream.class_separation = 3
model.hidden = 64
rehearsal.lr = 0.03
rehearsal.memory_capacity = 100
output.checkpoints = false
output.memory_dump = false
";

const VECTOR_AUG: &str = "aug.ops = default\naug.p = 1\naug.q = 14\naug.target = both\n";

fn dilemma() -> Outcome {
    let variants = [
        format!("{DILEMMA_BASE}rehearsal.k = 1\n{NO_AUG}"),
        format!("{DILEMMA_BASE}rehearsal.k = 10\n{NO_AUG}"),
        format!("{DILEMMA_BASE}rehearsal.k = 10\n{VECTOR_AUG}"),
    ];
    let jobs: Vec<(usize, u64)> = (0..3).flat_map(|v| SEEDS.iter().map(move |&s| (v, s))).collect();
    let res: Vec<(usize, f64, f64)> = jobs
        .par_iter()
        .map(|&(v, seed)| {
            let out = execute(&config(&variants[v], seed)?).map_err(e)?;
            let gap = out.result.mean_memory_gap().ok_or("no memory gap")?;
            Ok((v, out.metrics.average_accuracy, gap))
        })
        .collect::<Result<_, String>>()?;
    let mean = |v: usize, f: fn(&(usize, f64, f64)) -> f64| {
        let xs: Vec<f64> = res.iter().filter(|r| r.0 == v).map(f).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let acc: Vec<f64> = (0..3).map(|v| mean(v, |r| r.1)).collect();
    let gap: Vec<f64> = (0..3).map(|v| mean(v, |r| r.2)).collect();
    let (er, rer, rar) = (0, 1, 2);
    let ok = acc[rar] > acc[er] && acc[rar] > acc[rer] && gap[rer] > gap[er] && gap[rar] < gap[rer];
    Ok((
        ok,
        format!(
            "A_T ER {:.3}, RER {:.3}, RAR {:.3}; memory gap ER {:.3}, RER {:.3}, RAR {:.3}",
            acc[er], acc[rer], acc[rar], gap[er], gap[rer], gap[rar]
        ),
    ))
}

fn landscape() -> Outcome {
    let base = DILEMMA_BASE.replace("num_tasks = 5", "num_tasks = 2");
    let rer_text = format!("{base}rehearsal.k = 10\n{NO_AUG}");
    let rar_text = format!("{base}rehearsal.k = 10\n{VECTOR_AUG}");
    let res: Vec<(f64, f64, f64, bool)> = SEEDS
        .par_iter()
        .map(|&seed| {
            let mut machinery = 0.0f64;
            let mut origin_ok = true;
            let mut gaps = [0.0; 2];
            for (i, text) in [&rer_text, &rar_text].into_iter().enumerate() {
                let cfg = config(text, seed)?;
                let o = landscape_experiment(&cfg, 21).map_err(e)?;
                let s = &o.summary;
                machinery = machinery.max(s.e1_dot_e2.abs()).max(s.w2.residual).max(s.w2ft.residual);
                let stream = cfg.build_stream().map_err(e)?;
                let train = ocl_core::stream::to_batch(&stream.tasks()[0].train).map_err(e)?;
                let direct = o.w1.loss(&train, cfg.rehearsal.incoming_loss()).map_err(e)?;
                let (ia, ib) = o.grid.nearest_cell(0.0, 0.0);
                let d = o.grid.dataset_index(TASK1_TRAIN).ok_or("missing dataset")?;
                origin_ok &= o.grid.cell(ia, ib)[d].to_bits() == direct.to_bits();
                gaps[i] = s.cl_cell_gap.ok_or("missing memory")?;
            }
            Ok((machinery, gaps[0], gaps[1], origin_ok))
        })
        .collect::<Result<_, String>>()?;
    let machinery = res.iter().map(|r| r.0).fold(0.0, f64::max);
    let origin_ok = res.iter().all(|r| r.3);
    let n = res.len() as f64;
    let (rer, rar) = (
        res.iter().map(|r| r.1).sum::<f64>() / n,
        res.iter().map(|r| r.2).sum::<f64>() / n,
    );
    let wins = res.iter().filter(|r| r.2 < r.1).count();
    Ok((
        machinery < 1e-10 && origin_ok && rar < rer,
        format!(
            "max |e1.e2| / residual {machinery:.1e}, origin cell bitwise {origin_ok}; task-1 test-memory loss gap RER {rer:.3} > RAR {rar:.3} ({wins}/{} seeds)",
            res.len()
        ),
    ))
}

fn tuner() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut fd_worst: f64 = 0.0;
    for _ in 0..200 {
        let n = rng.random_range(2..=20);
        let arms = SoftmaxArms::from_weights((0..n).map(|_| rng.random_range(-3.0..3.0)).collect()).map_err(e)?;
        let set: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
        if set.is_empty() {
            continue;
        }
        let g = arms.log_mass_gradient(&set);
        for j in 0..n {
            let h = 1e-5;
            let mut up = arms.weights().to_vec();
            let mut down = up.clone();
            up[j] += h;
            down[j] -= h;
            let f = |w: Vec<f64>| SoftmaxArms::from_weights(w).map(|a| a.mass(&set).ln());
            let fd = (f(up).map_err(e)? - f(down).map_err(e)?) / (2.0 * h);
            fd_worst = fd_worst.max((fd - g[j]).abs());
        }
    }

    let space = ActionSpace::default();
    let mut violations = 0;
    for _ in 0..1000 {
        let w: Vec<f64> = (0..space.iteration_arms().len())
            .map(|_| rng.random_range(-3.0..3.0))
            .collect();
        let mut arms = SoftmaxArms::from_weights(w).map_err(e)?;
        let chosen = rng.random_range(0..space.iteration_arms().len());
        let a_m: f64 = rng.random();
        let sets = iteration_action_sets(&space, chosen, a_m, 0.9).map_err(e)?;
        let (plus, minus) = (arms.mass(&sets.better), arms.mass(&sets.worse));
        arms.bpg_update((a_m - 0.9).abs(), &sets.better, &sets.worse, 1e-3)
            .map_err(e)?;
        if arms.mass(&sets.better) < plus - 1e-15 || arms.mass(&sets.worse) > minus + 1e-15 {
            violations += 1;
        }
    }

    // K = 5 meets the target exactly; other arms miss by 0.2 in the
    // direction of their iteration count.
    let target = 0.5;
    let mut policy = BanditPolicy::new(ActionSpace::default(), 0.5, target).map_err(e)?;
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..500 {
        let a = policy.sample_action(&mut rng);
        let acc = match a.k.cmp(&5) {
            std::cmp::Ordering::Equal => target,
            std::cmp::Ordering::Greater => target + 0.2,
            std::cmp::Ordering::Less => target - 0.2,
        };
        policy.update(&a, acc).map_err(e)?;
    }
    let near: f64 = policy.iteration_policy().probabilities()[3..6].iter().sum();
    policy.reset_on_task_boundary();
    let uniform = [policy.iteration_policy(), policy.aug_policy()].iter().all(|p| {
        let pr = p.probabilities();
        pr.iter().all(|&x| x == 1.0 / pr.len() as f64)
    });
    Ok((
        fd_worst < 1e-6 && violations == 0 && near > 0.6 && uniform,
        format!("fd error {fd_worst:.1e}, mass violations {violations}/1000, mass near target arm {near:.3} (> 0.6), reset uniform {uniform}"),
    ))
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(e)?;
    let cfg = dir.path().join("c.txt");
    fs::write(
        &cfg,
        format!("{DILEMMA_BASE}rehearsal.k = 5\n{VECTOR_AUG}stream.seed = 3\n"),
    )
    .map_err(e)?;
    let run = |out: &str| -> Result<Vec<u8>, String> {
        let st = Command::new(env!("CARGO_BIN_EXE_ocl"))
            .args(["run", "--config", &cfg.display().to_string(), "--out", out])
            .current_dir(dir.path())
            .env_remove("OCL_SEED")
            .output()
            .map_err(e)?;
        if !st.status.success() {
            return Err(String::from_utf8_lossy(&st.stderr).into_owned());
        }
        fs::read(Path::new(dir.path()).join(out).join("accuracy.csv")).map_err(e)
    };
    let (a, b) = (run("a")?, run("b")?);
    Ok((
        a == b && !a.is_empty(),
        format!("accuracy.csv identical across two runs: {}", a == b),
    ))
}

fn main() -> ExitCode {
    let results = [
        report(1, "gradient correctness", Some(30.0), gradients),
        report(2, "reservoir uniformity", Some(60.0), reservoir),
        report(3, "start-of-task memory weight", Some(300.0), prop2),
        report(4, "end-of-task memory weight", Some(600.0), prop1),
        report(5, "augmented rehearsal unbiasedness", Some(300.0), prop3),
        report(6, "metrics identity", Some(5.0), metrics),
        report(7, "decaying regularization", Some(600.0), decay),
        report(8, "underfitting-overfitting dilemma", Some(1200.0), dilemma),
        report(9, "loss landscape", Some(900.0), landscape),
        report(10, "bandit tuner", Some(60.0), tuner),
        report(11, "determinism", None, determinism),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
