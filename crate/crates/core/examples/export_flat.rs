//! Exports real and generated matrices as a flat tab-separated table for
//! downstream statistics, standardized per matrix.
//!
//!     cargo run --release --example export_flat -- [out.tsv]

use scmgen::data::{generate_synthetic_dataset, Label, SynthConfig};
use scmgen::eval::{export_flat, read_flat};
use scmgen::pipeline::{sample_class, train_on, RunConfig};
use scmgen::score::TrainConfig;

fn main() -> scmgen::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "flat.tsv".into());
    let real = generate_synthetic_dataset(&SynthConfig {
        bands: 2,
        trials_per_class: 20,
        discriminative_bands: vec![1],
        ..SynthConfig::default()
    })?;
    let mut cfg = RunConfig::default();
    cfg.train = TrainConfig {
        iterations: 300,
        ..cfg.train
    };
    cfg.sampler.steps = 200;
    let (ck, _) = train_on(&cfg, &real, Some(Label::Right))?;
    let generated = real.with_samples(sample_class(&cfg.sampler, &ck, Label::Right, 5, None)?)?;

    let rows = export_flat(&[&real, &generated], true, &out)?;
    let back = read_flat(std::fs::File::open(&out)?)?;
    assert_eq!(back.len(), rows);
    let mean: f64 = back[0].entries.iter().sum::<f64>() / back[0].entries.len() as f64;
    println!(
        "wrote {rows} rows to {out}; first row has {} entries with mean {mean:.2e}",
        back[0].entries.len()
    );
    Ok(())
}
