//! Sweep classifier training over several batch sizes and report
//! per-epoch timing plus evaluation quality for each.
//!
//! Run with: cargo run --release --example bench_training

use latentsat::bench::bench_training;
use latentsat::fixtures::gen_latent_dataset;

fn main() -> latentsat::Result<()> {
    let (train_set, eval_set) = gen_latent_dataset(3, 1305, 4.0);
    let rows = bench_training(&train_set, &eval_set, &[32, 64, 128, 256], 10, 0.1, 42)?;

    println!("{:>10}  {:>12}  {:>12}  {:>6}  {:>6}", "batch_size", "mean_epoch_s", "std_epoch_s", "auprc", "f1");
    for r in &rows {
        println!(
            "{:>10}  {:>12.6}  {:>12.6}  {:.4}  {:.4}",
            r.batch_size, r.mean_epoch_s, r.std_epoch_s, r.metrics.auprc, r.metrics.f1
        );
    }
    Ok(())
}
