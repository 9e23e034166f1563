//! Train the 129-parameter classifier on a labeled latent dataset and
//! evaluate it on a held-out split.
//!
//! Run with: cargo run --release --example fewshot_training

use latentsat::fewshot::{evaluate, train, Classifier};
use latentsat::fixtures::gen_latent_dataset;

fn main() -> latentsat::Result<()> {
    // Two separable clusters in latent space, balanced labels,
    // disjoint eval split of the same size.
    let (train_set, eval_set) = gen_latent_dataset(3, 400, 4.0);
    println!(
        "train {} samples, eval {} samples, {} features",
        train_set.labels.len(),
        eval_set.labels.len(),
        train_set.latents[0].len()
    );

    let init = Classifier::zeros();
    let (clf, timings) = train(&init, &train_set, 50, 64, 0.1, 42)?;
    println!("trained {} parameters over {} epochs", clf.param_count(), timings.len());
    let mean_epoch = timings.iter().map(|t| t.duration_s).sum::<f64>() / timings.len() as f64;
    println!(
        "mean epoch {:.6}s ({} batches of {})",
        mean_epoch, timings[0].batches, timings[0].batch_size
    );

    let m = evaluate(&clf, &eval_set, 0.5)?;
    println!(
        "auprc {:.4} precision {:.4} recall {:.4} f1 {:.4} (tp {} fp {} tn {} fn {})",
        m.auprc, m.precision, m.recall, m.f1, m.tp, m.fp, m.tn, m.fn_
    );
    Ok(())
}
