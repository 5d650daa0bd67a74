//! Inequality of early activity: who produces the content?
use commsuccess::features::activity::distribution_features;
use commsuccess::features::gini;
use commsuccess::ingest::{extract_early_window, CommunityTimeline};
use commsuccess::synth::{generate, SynthParams};

fn main() -> commsuccess::Result<()> {
    for x in [[1.0, 1.0, 1.0, 1.0], [4.0, 0.0, 0.0, 0.0], [1.0, 2.0, 3.0, 4.0]] {
        println!("gini({x:?}) = {}", gini(&x));
    }

    // Same community, from evenly shared to founder-driven activity.
    for concentration in [50.0, 2.0, 0.5, 0.0] {
        let params = SynthParams {
            concentration,
            seed: 1,
            ..SynthParams::default()
        };
        let timeline = CommunityTimeline::new(params.community.clone(), generate(&params)?)?;
        let window = extract_early_window(&timeline, 20, 90.0).expect("20 members within 90 days");
        let fv = distribution_features(&window);
        println!(
            "concentration {concentration:>4}: posts/user {:.3}, comments/user {:.3}, comment gaps {:.3}",
            fv.get("gini_posts_per_user").unwrap(),
            fv.get("gini_comments_per_user").unwrap(),
            fv.get("gini_comment_gaps").unwrap(),
        );
    }
    Ok(())
}
