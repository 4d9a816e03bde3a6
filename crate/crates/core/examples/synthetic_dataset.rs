//! Generates a synthetic two-class covariance dataset, writes it as JSON
//! lines and reads it back.
//!
//!     cargo run --example synthetic_dataset -- [out.jsonl]

use scmgen::data::{generate_synthetic_dataset, load_dataset, save_dataset, Label, SynthConfig};
use scmgen::spd::eig_sym;

fn main() -> scmgen::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "synthetic.jsonl".into());
    let cfg = SynthConfig {
        bands: 3,
        trials_per_class: 50,
        ..SynthConfig::default()
    };
    let d = generate_synthetic_dataset(&cfg)?;
    println!(
        "{} matrices, {} channels {:?}, {} bands",
        d.len(),
        d.channel_count(),
        d.channel_names(),
        d.band_count()
    );
    for label in Label::ALL {
        for band in 0..d.band_count() {
            let diag: Vec<f64> = d
                .samples_for(label, band)
                .fold(vec![0.0; d.channel_count()], |mut acc, s| {
                    for (a, v) in acc.iter_mut().zip(s.matrix.diagonal()) {
                        *a += v / cfg.trials_per_class as f64;
                    }
                    acc
                });
            println!("{:<5} band {band}  mean diagonal {:.3?}", label.as_str(), diag);
        }
    }
    let first = &d.samples()[0];
    println!("first matrix eigenvalues {:.4?}", eig_sym(&first.matrix)?.eigenvalues());

    save_dataset(&d, &out)?;
    let back = load_dataset(&out)?;
    assert_eq!(back, d);
    println!("wrote and re-read {out}");
    Ok(())
}
