// Scratch pilot: timing and threshold calibration. Not part of the test suite.
use jointrec_core::data::synth::{generate_synthetic, SynthConfig};
use jointrec_core::data::{split_70_30, Split};
use jointrec_core::embedder::{backward, forward, ModelParams};
use jointrec_core::eval::{joint_identification, joint_verification, GallerySelection, Metric};
use jointrec_core::train::{embed_split, train, RunConfig, TrainLoss};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let mode = args.get(1).map(|s| s.as_str()).unwrap_or("timing");

    if mode == "timing" {
        let params = ModelParams::init(8, 1).unwrap();
        let mut r = jointrec_core::rng::stream(2);
        let image = jointrec_core::kernels::Tensor::from_fn(&[1, 48, 48], |_| {
            jointrec_core::rng::next_gaussian(&mut r) * 0.2 + 0.5
        });
        let t0 = Instant::now();
        let n = 50;
        for _ in 0..n {
            let trace = forward(&image, &params).unwrap();
            let _ = backward(&trace, &params, &vec![0.1; 8]).unwrap();
        }
        let dt = t0.elapsed();
        println!("fwd+bwd: {:.2} ms/image", dt.as_secs_f64() * 1000.0 / n as f64);
        return;
    }

    // full pilot: synth default, train siamese-SMCL, evaluate
    let out_dir = std::path::PathBuf::from("/tmp/pilot_synth");
    let cfg = SynthConfig::default();
    let t0 = Instant::now();
    let mut manifest = generate_synthetic(&cfg, &out_dir).unwrap();
    split_70_30(&mut manifest, cfg.seed).unwrap();
    println!("synth: {} images in {:.1}s", manifest.samples.len(), t0.elapsed().as_secs_f64());

    let epochs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let loss: TrainLoss = args
        .get(3)
        .map(|s| s.parse().unwrap())
        .unwrap_or(TrainLoss::ContrastiveSingleMargin);
    let run = RunConfig {
        loss,
        epochs,
        ..RunConfig::default()
    };
    let t0 = Instant::now();
    let outcome = train(&manifest, &run).unwrap();
    let train_secs = t0.elapsed().as_secs_f64();
    println!(
        "train {} epochs of {}: {:.1}s ({:.2}s/epoch), first loss {:.4}, last loss {:.4}",
        epochs,
        loss.name(),
        train_secs,
        train_secs / epochs.max(1) as f64,
        outcome.log.first().map(|l| l.mean_loss).unwrap_or(0.0),
        outcome.log.last().map(|l| l.mean_loss).unwrap_or(0.0),
    );

    let t0 = Instant::now();
    let test = embed_split(&manifest, &outcome.params, Some(Split::Test)).unwrap();
    println!("embed test split ({}): {:.1}s", test.len(), t0.elapsed().as_secs_f64());
    for metric in [Metric::Seuclidean, Metric::Cosine] {
        let cmc = joint_identification(&test, metric, 3, GallerySelection::SmallestSampleId).unwrap();
        let roc = joint_verification(&test, metric).unwrap();
        println!(
            "{:?}: rank1 {:.4} rank2 {:.4} rank3 {:.4} | tmr@1% {:.4} tmr@5% {:.4} (gen {} imp {})",
            metric,
            cmc.rates[0],
            cmc.rates[1],
            cmc.rates[2],
            roc.tmr_at_1pct_fmr,
            roc.tmr_at_5pct_fmr,
            roc.n_genuine,
            roc.n_impostor
        );
    }
}
