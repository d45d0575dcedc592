//! Fits the forest on a noisy two-feature problem and prints the metrics.

use illicit_walk::evaluation::FPR_CAPS;
use illicit_walk::{evaluate, fit, ForestConfig, Matrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sample(rng: &mut ChaCha8Rng, n: usize) -> (Matrix, Vec<u8>, Vec<u32>) {
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let label = rng.gen_bool(0.2);
        let shift = if label { 0.6 } else { 0.0 };
        rows.push([rng.gen::<f64>() + shift, rng.gen::<f64>()]);
        y.push(u8::from(label));
    }
    let steps = (0..n as u32).map(|i| 1 + i % 5).collect();
    (Matrix::from_rows(&rows).unwrap(), y, steps)
}

fn main() -> illicit_walk::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (x_train, y_train, _) = sample(&mut rng, 800);
    let (x_test, y_test, steps) = sample(&mut rng, 400);

    let model = fit(
        &x_train,
        &y_train,
        &ForestConfig {
            n_trees: 30,
            ..Default::default()
        },
    )?;
    let scores = model.predict_proba(&x_test)?;
    let report = evaluate(&y_test, &scores, &steps, 0.5)?;

    println!(
        "precision {:.3}  recall {:.3}  f1 {:.3}",
        report.precision_illicit, report.recall_illicit, report.f1_illicit
    );
    println!("micro-f1 {:.3}  auc {:.3}", report.micro_f1, report.auc);
    for (cap, (_, recall)) in FPR_CAPS.iter().zip(&report.recall_at_fpr) {
        println!("recall at {:.0}% fpr: {recall:.3}", cap * 100.0);
    }
    for (step, f1) in &report.per_timestep_f1 {
        println!("step {step}: f1 {:.3}", f1.f1);
    }
    println!("{:?}", report.confusion);
    Ok(())
}
