//! Trains SmartSVM and one-vs-one on a labeled CSV file and reports the
//! test ARI of each on a stratified 70/30 split.
//!
//! cargo run --release --example compare -- satimage.csv [label-column]

use std::process::ExitCode;
use std::time::Instant;

use smartsvm::dataset::{load_csv, stratified_split, LabelColumn};
use smartsvm::multiclass::metrics::adjusted_rand_index;
use smartsvm::multiclass::{Classifier, ModelDocument, Strategy, TrainConfig};

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let Some(path) = args.next() else {
        eprintln!("usage: compare <data.csv> [label-column]");
        return ExitCode::from(1);
    };
    let label: LabelColumn = args.next().map_or_else(LabelColumn::default, |s| s.parse().unwrap());
    match run(&path, &label) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
    }
}

fn run(path: &str, label: &LabelColumn) -> smartsvm::Result<()> {
    let ds = load_csv(path, label)?;
    let (train, test) = stratified_split(&ds, 0.7, 42)?;
    let cfg = TrainConfig::default();
    println!(
        "{} samples, {} features, {} classes",
        ds.n_samples(),
        ds.n_features(),
        ds.n_classes()
    );
    let mut scores = Vec::new();
    for strategy in [Strategy::SmartSvm, Strategy::Ovo] {
        let start = Instant::now();
        let (model, _) = ModelDocument::train(&train, strategy, &cfg)?;
        let predicted = model.predict(test.features())?;
        let truth: Vec<usize> = test
            .labels()
            .iter()
            .map(|&y| {
                let name = test.class_name(y);
                model.classes().iter().position(|c| c == name).unwrap_or(usize::MAX)
            })
            .collect();
        let ari = adjusted_rand_index(&truth, &predicted)?;
        println!(
            "{strategy}: ARI {ari:.4}, {} binary models, {:.1}s",
            model.n_models(),
            start.elapsed().as_secs_f64()
        );
        scores.push(ari);
    }
    println!("ARI gap (ovo - smartsvm): {:.4}", scores[1] - scores[0]);
    Ok(())
}
