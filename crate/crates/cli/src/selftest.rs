//! Built-in oracle checks: finite differences, closed forms, statistics.

use std::time::Instant;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use xmaml_core::autodiff::{finite_difference_grad, scalar_params, value};
use xmaml_core::meta::{inner_adapt, meta_gradient_with, MetaOrder};
use xmaml_core::model::{init_model, task_loss_on_tape, Batch, ModelSpec, TaskKind, Targets};
use xmaml_core::seed::rng_from;
use xmaml_core::typology::{bonferroni, paired_t_test};
use xmaml_core::{Tape, Tensor, Var};

use crate::error::CliError;

type Check = (&'static str, fn() -> Result<String, String>);

fn random_batch(seed: u64, n: usize) -> Batch {
    let mut rng = rng_from(seed, "selftest-batch", &[]);
    let x: Vec<f64> = (0..n * 4).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
    Batch::new(Tensor::matrix(n, 4, x).expect("n x 4"), Targets::Classes(y)).expect("matching rows")
}

fn finite_differences() -> Result<String, String> {
    let spec = ModelSpec::new(4, vec![8], 3, TaskKind::Classification);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let theta = init_model(&spec, seed).map_err(|e| e.to_string())?.params;
        let support = random_batch(seed, 6);
        let query = random_batch(seed + 1000, 6);
        let s = |t: &mut Tape, p: &[Var]| task_loss_on_tape(t, &spec, p, &support);
        let q = |t: &mut Tape, p: &[Var]| task_loss_on_tape(t, &spec, p, &query);
        let (g, _) = meta_gradient_with(&theta, s, q, 0.1, 1, MetaOrder::Full).map_err(|e| e.to_string())?;
        let fd = finite_difference_grad(|th| value(q, &inner_adapt(th, s, 0.1, 1)?), &theta, 1e-5)
            .map_err(|e| e.to_string())?;
        let err = g.sub(&fd).map_err(|e| e.to_string())?.norm() / fd.norm().max(1e-12);
        worst = worst.max(err);
    }
    let msg = format!("worst relative error {worst:.2e} over 20 seeds");
    if worst <= 1e-4 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn quadratic(center: f64) -> impl Fn(&mut Tape, &[Var]) -> xmaml_core::Result<Var> {
    move |t: &mut Tape, p: &[Var]| {
        let c = t.constant(Tensor::scalar(center));
        let d = t.sub(p[0], c);
        let sq = t.mul(d, d);
        Ok(t.sum_all(sq))
    }
}

fn closed_form() -> Result<String, String> {
    let theta = scalar_params(2.0);
    let run = |order| {
        meta_gradient_with(&theta, quadratic(0.0), quadratic(1.0), 0.1, 1, order)
            .map(|(g, _)| g.flatten()[0])
            .map_err(|e| e.to_string())
    };
    let (full, first) = (run(MetaOrder::Full)?, run(MetaOrder::First)?);
    let msg = format!("full {full:.12} (expect 0.96), first-order {first:.12} (expect 1.2)");
    if (full - 0.96).abs() <= 1e-10 && (first - 1.2).abs() <= 1e-10 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn statistics() -> Result<String, String> {
    let t = paired_t_test(&[1.0, 2.0, 3.0, 4.0, 5.0], &[0.0; 5]).map_err(|e| e.to_string())?;
    let cutoff = bonferroni(0.05, 200).map_err(|e| e.to_string())?;
    let msg = format!("t = {:.4}, p = {:.5}, bonferroni(0.05, 200) = {cutoff}", t.t, t.p);
    if (t.p - 0.0132).abs() <= 5e-4 && cutoff == 0.00025 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

pub fn cmd_selftest() -> Result<(), CliError> {
    let checks: [Check; 3] = [
        ("meta-gradient vs finite differences", finite_differences),
        ("closed-form quadratic", closed_form),
        ("t-test and Bonferroni", statistics),
    ];
    let mut failed = Vec::new();
    for (name, check) in checks {
        let start = Instant::now();
        let result = check();
        let ms = start.elapsed().as_secs_f64() * 1e3;
        match &result {
            Ok(msg) => println!("ok    {name}: {msg} ({ms:.0} ms)"),
            Err(msg) => {
                println!("FAIL  {name}: {msg} ({ms:.0} ms)");
                failed.push(name);
            }
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::SelfTest(failed.join(", ")))
    }
}
