//! Every stage end to end on a small synthetic corpus, written to a scratch directory.
use commsuccess::model::ExperimentConfig;
use commsuccess::pipeline::{self, Layout, LexiconSource};
use commsuccess::synth::CorpusParams;

fn main() -> commsuccess::Result<()> {
    let dir = std::env::args()
        .nth(1)
        .map(std::path::PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("commsuccess-example"));
    let layout = Layout::new(&dir);
    let params = CorpusParams {
        n_communities: 120,
        ..CorpusParams::default()
    };
    let corpus = pipeline::cmd_synth(&params, &layout)?;
    println!("{} events", corpus.events.len());

    let summary = pipeline::cmd_ingest(&layout.synth_posts(), &layout.synth_comments(), &layout, Some(2014))?;
    println!("{} focal communities", summary.focal.len());

    let config = ExperimentConfig {
        k_min: 10,
        k_max: 50,
        k_step: 20,
        ..ExperimentConfig::default()
    };
    pipeline::run_all(&layout, &config, &LexiconSource::Bundled)?;
    println!("{}", std::fs::read_to_string(layout.report_auc()).map_err(|e| commsuccess::Error::io(layout.report_auc(), e))?);
    println!("outputs in {}", dir.display());
    Ok(())
}
