//! Reply network of early members and its structural features.
use commsuccess::features::graph::{build_reply_graph, graph_features};
use commsuccess::ingest::{extract_early_window, CommunityTimeline};
use commsuccess::synth::{generate, SynthParams};

fn main() -> commsuccess::Result<()> {
    for reply_prob in [0.1, 0.5, 0.9] {
        let params = SynthParams {
            reply_prob,
            seed: 4,
            ..SynthParams::default()
        };
        let timeline = CommunityTimeline::new(params.community.clone(), generate(&params)?)?;
        let window = extract_early_window(&timeline, 30, 90.0).expect("30 members within 90 days");
        let graph = build_reply_graph(&window);
        let fv = graph_features(&graph, &window);
        println!("reply_prob {reply_prob}: {} edges", graph.graph.edge_count());
        for f in &fv.features {
            println!("  {:<28} {:.3}{}", f.name, f.value, if f.flagged { " (undefined)" } else { "" });
        }
    }

    let params = SynthParams { seed: 4, ..SynthParams::default() };
    let timeline = CommunityTimeline::new(params.community.clone(), generate(&params)?)?;
    let window = extract_early_window(&timeline, 10, 90.0).expect("10 members");
    println!("edge list at k=10:");
    build_reply_graph(&window).write_edge_list(std::io::stdout())
}
