//! Trains a score network on one class of synthetic covariances and saves
//! the checkpoint.
//!
//!     cargo run --release --example train_score -- [iterations] [out.ckpt]

use scmgen::data::{generate_synthetic_dataset, Label, SynthConfig};
use scmgen::pipeline::{train_on, RunConfig};
use scmgen::score::{load_checkpoint, save_checkpoint, TrainConfig};

fn main() -> scmgen::Result<()> {
    let mut args = std::env::args().skip(1);
    let iterations = args
        .next()
        .map_or(2000, |s| s.parse().expect("iterations must be an integer"));
    let out = args.next().unwrap_or_else(|| "left.ckpt".into());

    let mut cfg = RunConfig::default();
    cfg.train = TrainConfig {
        iterations,
        log_every: iterations.div_ceil(10),
        ..cfg.train
    };
    let real = generate_synthetic_dataset(&SynthConfig {
        bands: 3,
        trials_per_class: 100,
        ..SynthConfig::default()
    })?;
    let (ck, report) = train_on(&cfg, &real, Some(Label::Left))?;
    for (it, loss) in &report.trace {
        println!("iteration {it:>6}  mean loss {loss:.4}");
    }
    let (head, tail) = report.head_tail_medians(0.1);
    println!("median loss first 10% {head:.4}, last 10% {tail:.4}");
    println!(
        "{} parameters, norm {:.3}",
        ck.network.param_count(),
        report.final_param_norm
    );

    save_checkpoint(&ck, &out)?;
    assert_eq!(load_checkpoint(&out)?, ck);
    println!("saved {out}");
    Ok(())
}
