//! Parent communities of early members and the language distance to them.
use commsuccess::features::parents::{build_genealogy, cross_entropy, find_parents, parent_family};
use commsuccess::ingest::extract_early_window;
use commsuccess::pipeline::ingest_events;
use commsuccess::synth::{generate_corpus, CorpusParams};

fn main() -> commsuccess::Result<()> {
    let a = ["the", "cat", "sat"];
    let b = ["the", "dog", "sat", "down"];
    println!("H(a, a) = {:.4} nats", cross_entropy(&a, &a).unwrap());
    println!("H(a, b) = {:.4} nats", cross_entropy(&a, &b).unwrap());

    let corpus = generate_corpus(&CorpusParams {
        n_communities: 60,
        ..CorpusParams::default()
    })?;
    let checkpoint = ingest_events(corpus.events, Some(2014));
    let shown = checkpoint
        .summary
        .focal
        .iter()
        .rev()
        .filter_map(|name| extract_early_window(checkpoint.corpus.get(name)?, 10, 90.0).ok())
        .map(|window| {
            let parents = find_parents(&window, &checkpoint.history);
            (window, parents)
        })
        .filter(|(_, parents)| !parents.is_empty())
        .take(3);
    for (window, parents) in shown {
        let genealogy = build_genealogy(&parents);
        println!("{}: {} parents, {} genealogy edges", window.community, parents.len(), genealogy.graph.edge_count());
        for f in parent_family(&window, &checkpoint.history, &checkpoint.corpus).features {
            println!("  {:<28} {:.3}", f.name, f.value);
        }
    }
    Ok(())
}
