//! Continual-learning behavior check: forgetting with beta = 0 versus the
//! regularized runs.

use std::time::Instant;

use hypertpp::eval::run_cl;
use hypertpp::hawkes::{simulate, DescriptorLink};
use hypertpp::model::ModelKind;
use hypertpp::seqdata::{Descriptor, EventSequence};
use hypertpp::train::TrainConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(21);
    let dim = 8usize;
    let n = 10usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // Descriptors along one latent axis: dynamics drift monotonically
    // through the stream.
    let axis: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0f64..1.0)).collect();
    let norm: f64 = axis.iter().map(|v| v * v).sum::<f64>().sqrt();
    let axis: Vec<f64> = axis.iter().map(|v| v / norm).collect();

    let link = DescriptorLink {
        weight_matrix: [
            axis.iter().map(|v| v * 1.3).collect(),
            axis.iter().map(|v| v * -0.5).collect(),
            axis.iter().map(|v| v * 0.4).collect(),
        ],
        intercept: [(0.45f64).ln(), (0.25f64).ln(), 0.0],
        noise_scale: 0.0,
    };

    let mut stream: Vec<(EventSequence, Descriptor)> = Vec::new();
    for i in 0..n {
        let frac = i as f64 / (n - 1) as f64;
        let t = 2.0 * frac.powf(1.6) - 1.0;
        let d: Vec<f64> = axis
            .iter()
            .map(|v| t * v + rng.gen_range(-0.05..0.05))
            .collect();
        let params = link.map(&d, &mut rng).unwrap();
        let events = loop {
            let s = simulate(&params, 220.0, rng.gen());
            if s.len() >= 12 {
                break s;
            }
        };
        let id = format!("seq-{i:03}");
        let seq = EventSequence::from_raw(id.clone(), &events, i).unwrap();
        stream.push((seq, Descriptor { id, values: d }));
    }
    let sizes: Vec<usize> = stream.iter().map(|(s, _)| s.len()).collect();
    println!("seed {seed}: stream sizes {sizes:?}");

    let cfg = TrainConfig {
        epochs: 50,
        patience: 50,
        history_len: 10,
        lr: 1.5e-3,
        variant: ModelKind::HyperFnn,
        ..TrainConfig::default()
    };
    let t0 = Instant::now();
    let out = run_cl(&stream, &cfg, &[0.1, 0.5], 1).unwrap();
    println!("run_cl (3 betas) took {:.1}s", t0.elapsed().as_secs_f64());
    for run in &out.runs {
        let curve: Vec<String> = run.avg_mnll.iter().map(|v| format!("{v:.3}")).collect();
        let mono = run.avg_mnll[4..].windows(2).all(|w| w[1] >= w[0]);
        println!("beta={}: final-half monotone={mono}, curve {:?}", run.beta, curve);
    }
}
