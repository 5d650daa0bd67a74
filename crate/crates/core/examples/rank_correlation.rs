//! Spearman and Kendall correlation between success measures across a synthetic corpus.
use commsuccess::ingest::extract_early_window;
use commsuccess::pipeline::ingest_events;
use commsuccess::stats::{correlation_matrix, kendall_tau, spearman, CorrelationMethod};
use commsuccess::success::{compute_measures, Horizons};
use commsuccess::synth::{generate_corpus, CorpusParams};

fn main() -> commsuccess::Result<()> {
    let (x, y) = ([1.0, 2.0, 3.0], [1.0, 3.0, 2.0]);
    println!("spearman {:?}, kendall {:?}", spearman(&x, &y), kendall_tau(&x, &y));

    let corpus = generate_corpus(&CorpusParams {
        n_communities: 120,
        ..CorpusParams::default()
    })?;
    let checkpoint = ingest_events(corpus.events, Some(2014));
    let k = 20;
    let measures: Vec<_> = checkpoint
        .summary
        .focal
        .iter()
        .filter_map(|name| {
            let timeline = checkpoint.corpus.get(name)?;
            let window = extract_early_window(timeline, k, 90.0).ok()?;
            Some(compute_measures(timeline, window.t_k, &Horizons::default()))
        })
        .collect();
    println!("{} communities reach k={k}", measures.len());

    for method in CorrelationMethod::ALL {
        let matrix = correlation_matrix(k, &measures, method)?;
        println!("{method}:");
        for (a, b, r) in matrix.pairs() {
            match r {
                Some(r) => println!("  {a:<18} {b:<18} {r:+.3}"),
                None => println!("  {a:<18} {b:<18} undefined"),
            }
        }
    }
    Ok(())
}
