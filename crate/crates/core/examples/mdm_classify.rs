//! Minimum-distance-to-mean classification of synthetic trials, with the
//! model written to and read back from its JSON-lines file.
//!
//!     cargo run --release --example mdm_classify

use scmgen::data::{generate_synthetic_dataset, SynthConfig};
use scmgen::eval::{fit_mdm, load_mdm, save_mdm};

fn main() -> scmgen::Result<()> {
    let synth = SynthConfig {
        bands: 3,
        trials_per_class: 100,
        ..SynthConfig::default()
    };
    let train = generate_synthetic_dataset(&synth)?;
    let test = generate_synthetic_dataset(&SynthConfig {
        seed: synth.seed + 1,
        ..synth
    })?;

    let model = fit_mdm(&train)?;
    let path = std::env::temp_dir().join("scmgen-mdm.jsonl");
    save_mdm(&model, &path)?;
    let model = load_mdm(&path)?;

    for (name, d) in [("train", &train), ("held-out", &test)] {
        let c = model.classify_trials(d)?;
        println!(
            "{name:<8} accuracy {:.3} over {} trials, confusion {:?}",
            c.accuracy(),
            c.total(),
            c.0
        );
    }
    Ok(())
}
