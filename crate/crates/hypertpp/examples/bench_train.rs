//! Rough training-throughput check used to size test configurations.

use std::time::Instant;

use hypertpp::hawkes::{generate_corpus, DescriptorLink};
use hypertpp::model::ModelKind;
use hypertpp::seqdata::{make_split, SplitSetup};
use hypertpp::train::TrainConfig;
use hypertpp::eval::run_setup;
use hypertpp::seqdata::Corpus;

fn main() {
    let link = DescriptorLink::random(8, 0.0, 5);
    let gen = generate_corpus(&link, 50, 8, 100.0, 13).unwrap();
    let n_events: usize = gen.entries.iter().map(|(s, _)| s.len()).sum();
    println!("corpus: 50 seqs, {n_events} events (mean {})", n_events / 50);
    let corpus = Corpus::new(gen.entries);
    let split = make_split(&corpus.ids(), SplitSetup::ZeroShot, 7).unwrap();

    let cfg = TrainConfig {
        epochs: 150,
        patience: 25,
        history_len: 10,
        lr: 3e-3,
        ..TrainConfig::default()
    };
    for kind in ModelKind::all() {
        let t0 = Instant::now();
        let out = run_setup(&corpus, &split, kind, &cfg, 1).unwrap();
        println!(
            "{kind}: {:.1}s; test MNLL {:.4}, MAE {:.5}, predicted {}, failures {}",
            t0.elapsed().as_secs_f64(),
            out.report.mnll,
            out.report.mae,
            out.report.n_predicted,
            out.report.prediction_failures
        );
    }
}
