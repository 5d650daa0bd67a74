//! The six success measures for a handful of synthetic communities, and their median split.
use commsuccess::ingest::{extract_early_window, CommunityTimeline};
use commsuccess::success::{compute_measures, Horizons, LabelSet, Measure};
use commsuccess::synth::{generate, SynthParams};

fn main() -> commsuccess::Result<()> {
    let k = 10;
    let mut names = Vec::new();
    let mut measures = Vec::new();
    for (i, (arrival_rate, churn)) in [(0.3, 0.3), (1.0, 0.1), (2.0, 0.05), (0.5, 0.5), (3.0, 0.2)].into_iter().enumerate() {
        let params = SynthParams {
            community: format!("c{i}"),
            n_members: 200,
            arrival_rate,
            churn,
            seed: i as u64,
            ..SynthParams::default()
        };
        let timeline = CommunityTimeline::new(params.community.clone(), generate(&params)?)?;
        let Ok(window) = extract_early_window(&timeline, k, 90.0) else {
            println!("{}: fewer than {k} members in 90 days", params.community);
            continue;
        };
        let m = compute_measures(&timeline, window.t_k, &Horizons::default());
        println!(
            "{}: commenters {:>3} posters {:>3} retention {:.3} survival {:.3} posts/mo {:.2} comments/mo {:.2}",
            params.community, m.growth_commenters, m.growth_posters, m.retention, m.survival, m.avg_posts, m.avg_comments
        );
        names.push(params.community);
        measures.push(m);
    }

    let labels = LabelSet::build(k, names.clone(), measures);
    for measure in Measure::ALL {
        let positive: Vec<&str> = names
            .iter()
            .zip(labels.labels_for(measure))
            .filter(|(_, &l)| l)
            .map(|(n, _)| n.as_str())
            .collect();
        println!("{:<18} median {:>7.3}  above: {positive:?}", measure.name(), labels.threshold_for(measure));
    }
    Ok(())
}
