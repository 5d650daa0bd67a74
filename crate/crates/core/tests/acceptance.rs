//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.
//!
//! Run with `cargo test --test acceptance`.

use std::collections::BTreeSet;
use std::fs;
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use commsuccess::features::activity::gini;
use commsuccess::features::graph::{build_reply_graph, graph_features, SimpleGraph};
use commsuccess::features::FeatureManifest;
use commsuccess::features::text::CategoryLexicon;
use commsuccess::ingest::{extract_early_window, CommunityTimeline, EarlyWindow, Event, EventKind, MONTH_SECONDS};
use commsuccess::model::{
    auc, logistic::loss_and_gradient, run_experiment, train_logistic, ExperimentConfig, FeatureTable, Matrix, ModelVariant,
    TrainOptions,
};
use commsuccess::pipeline::{self, Layout, LexiconSource};
use commsuccess::stats::{kendall_tau, spearman};
use commsuccess::success::{compute_measures, Horizons, LabelSet, Measure, SuccessMeasures};
use commsuccess::synth::{generate_corpus, CorpusParams};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 9] = [
        ("gini oracle", gini_oracle),
        ("success measure oracle", success_oracle),
        ("graph metrics", graph_metrics),
        ("rank correlation", rank_correlation),
        ("logistic regression", logistic_regression),
        ("auc oracle", auc_oracle),
        ("planted signal recovery", planted_signal),
        ("pipeline determinism", determinism),
        ("qualification monotonicity", qualification_monotonicity),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.pass {
            failures += 1;
        }
        println!(
            "criterion {}: {} {name} ({:.1}s) {}",
            i + 1,
            if result.pass { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            result.detail
        );
    }
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- gini

/// Literal double sum: sum_i sum_j |x_i - x_j| / (2 n sum_i |x_i|).
fn gini_double_sum(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    let total: f64 = x.iter().map(|v| v.abs()).sum();
    if total == 0.0 {
        return 0.0;
    }
    let mut pairs = 0.0;
    for a in x {
        for b in x {
            pairs += (a - b).abs();
        }
    }
    pairs / (2.0 * n * total)
}

fn gini_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let len = rng.gen_range(1..=200);
        let x: Vec<f64> = (0..len)
            .map(|_| match i % 3 {
                0 => rng.gen_range(0.0..1.0),
                1 => rng.gen_range(0..6) as f64,
                _ => {
                    if rng.gen_bool(0.7) {
                        0.0
                    } else {
                        rng.gen_range(0.0..1000.0)
                    }
                }
            })
            .collect();
        worst = worst.max((gini(&x) - gini_double_sum(&x)).abs());
    }
    let elapsed = start.elapsed();
    let fixed = gini(&[1.0, 1.0, 1.0, 1.0]) == 0.0
        && gini(&[4.0, 0.0, 0.0, 0.0]) == 0.75
        && gini(&[1.0, 2.0, 3.0, 4.0]) == 0.25;
    outcome(
        worst <= 1e-12 && fixed && elapsed < Duration::from_secs(5),
        format!("max |fast - double sum| = {worst:.2e} (tol 1e-12), fixed cases exact: {fixed}, {elapsed:.2?} (limit 5s)"),
    )
}

// ---------------------------------------------------------------- success measures

const T_K: i64 = 1_400_000_000;
const HORIZON: i64 = 24;

/// Activity as (seconds after t_k, author, kind); negative offsets precede t_k.
type Fixture = Vec<(i64, String, EventKind)>;

fn at(month: i64, slot: i64) -> i64 {
    (month - 1) * MONTH_SECONDS + slot * 60
}

fn push_month(f: &mut Fixture, month: i64, users: &[String], kind: EventKind) {
    for (slot, u) in users.iter().enumerate() {
        f.push((at(month, slot as i64), u.clone(), kind));
    }
}

fn names(prefix: &str, range: std::ops::Range<usize>) -> Vec<String> {
    range.map(|i| format!("{prefix}{i}")).collect()
}

/// Straight-from-formula evaluation over explicit month sets.
fn measures_oracle(fixture: &Fixture) -> SuccessMeasures {
    let sentinel = |a: &str| a == "[deleted]";
    let mut months: Vec<Vec<(&str, EventKind)>> = vec![Vec::new(); HORIZON as usize];
    for (offset, author, kind) in fixture {
        if *offset >= 0 && *offset < HORIZON * MONTH_SECONDS {
            months[(*offset / MONTH_SECONDS) as usize].push((author.as_str(), *kind));
        }
    }
    let users = |m: usize, kind: Option<EventKind>| -> BTreeSet<&str> {
        months[m]
            .iter()
            .filter(|(a, k)| !sentinel(a) && kind.is_none_or(|want| *k == want))
            .map(|(a, _)| *a)
            .collect()
    };
    let count = |m: usize, kind: EventKind| months[m].iter().filter(|(_, k)| *k == kind).count();

    let union = |kind: EventKind| (0..12).flat_map(|m| users(m, Some(kind))).collect::<BTreeSet<_>>().len();
    let mut retention_sum = 0.0;
    for i in 0..12 {
        let (cur, next) = (users(i, None), users(i + 1, None));
        if !cur.is_empty() {
            retention_sum += cur.intersection(&next).count() as f64 / cur.len() as f64;
        }
    }
    let total: usize = (0..24).map(|m| count(m, EventKind::Post) + count(m, EventKind::Comment)).sum();
    let tail: usize = (21..24).map(|m| count(m, EventKind::Post) + count(m, EventKind::Comment)).sum();
    let posts: usize = (0..12).map(|m| count(m, EventKind::Post)).sum();
    let comments: usize = (0..12).map(|m| count(m, EventKind::Comment)).sum();
    SuccessMeasures {
        growth_commenters: union(EventKind::Comment),
        growth_posters: union(EventKind::Post),
        retention: retention_sum / 12.0,
        survival: if total == 0 { 0.0 } else { tail as f64 / total as f64 },
        avg_posts: posts as f64 / 12.0,
        avg_comments: comments as f64 / 12.0,
        survival_undefined: total == 0,
    }
}

fn fixture_timeline(fixture: &Fixture) -> CommunityTimeline {
    let events: Vec<Event> = fixture
        .iter()
        .enumerate()
        .map(|(i, (offset, author, kind))| Event {
            event_id: format!("e{i}"),
            kind: *kind,
            author: author.clone(),
            community: "fixture".into(),
            created_at: T_K + offset,
            parent_id: None,
            link_id: None,
            title: (*kind == EventKind::Post).then(|| "t".into()),
            body: "text".into(),
            score: 1,
        })
        .collect();
    CommunityTimeline::new("fixture", events).expect("non-empty fixture")
}

fn success_fixtures() -> Vec<(&'static str, Fixture, Option<SuccessMeasures>)> {
    use EventKind::{Comment, Post};
    let mut out: Vec<(&'static str, Fixture, Option<SuccessMeasures>)> = Vec::new();
    let pinned = |gc, gp, retention, survival, avg_posts, avg_comments, undefined| SuccessMeasures {
        growth_commenters: gc,
        growth_posters: gp,
        retention,
        survival,
        avg_posts,
        avg_comments,
        survival_undefined: undefined,
    };

    // Sliding window of ten users, five returning each month.
    let mut f = Fixture::new();
    for m in 1..=24 {
        let s = 5 * (m as usize - 1);
        push_month(&mut f, m, &names("u", s..s + 10), Comment);
    }
    out.push(("retention one half", f, Some(pinned(65, 0, 0.5, 30.0 / 240.0, 0.0, 10.0, false))));

    let mut f = Fixture::new();
    for m in 1..=13 {
        push_month(&mut f, m, &names("u", 0..4), Comment);
    }
    out.push(("identical users", f, Some(pinned(4, 0, 1.0, 0.0, 0.0, 4.0, false))));

    let mut f = Fixture::new();
    for m in 1..=13 {
        push_month(&mut f, m, &names(&format!("m{m}_"), 0..3), Post);
    }
    out.push(("disjoint users", f, Some(pinned(0, 36, 0.0, 0.0, 3.0, 0.0, false))));

    let mut f = Fixture::new();
    for m in 1..=24 {
        f.push((at(m, 0), "solo".into(), Post));
    }
    out.push(("uniform survival", f, Some(pinned(0, 1, 1.0, 0.125, 1.0, 0.0, false))));

    let mut f = Fixture::new();
    for m in 1..=3 {
        push_month(&mut f, m, &names("u", 0..3), Comment);
    }
    out.push(("early activity only", f, None));

    let mut f = Fixture::new();
    f.push((-MONTH_SECONDS, "founder".into(), Post));
    for m in 22..=24 {
        push_month(&mut f, m, &names("u", 0..3), Comment);
    }
    out.push(("late activity only", f, Some(pinned(0, 0, 0.0, 1.0, 0.0, 0.0, false))));

    let f = vec![(-10, "founder".into(), Post), (HORIZON * MONTH_SECONDS, "late".into(), Comment)];
    out.push(("no activity in horizon", f, Some(pinned(0, 0, 0.0, 0.0, 0.0, 0.0, true))));

    let mut f = Fixture::new();
    push_month(&mut f, 1, &names("u", 0..2), Comment);
    push_month(&mut f, 2, &names("u", 1..3), Comment);
    out.push(("commenter union", f, None));

    let mut f = Fixture::new();
    for m in 1..=24 {
        push_month(&mut f, m, &names("u", 0..5), Comment);
        push_month(&mut f, m, &names("u", 0..5), Post);
    }
    out.push(("same five every month", f, None));

    let mut f = Fixture::new();
    for slot in 0..12 {
        f.push((at(1, slot), "poster".into(), Post));
    }
    out.push(("posts in first month", f, None));

    let mut f = Fixture::new();
    for m in 1..=12 {
        push_month(&mut f, m, &names("c", 0..7), Comment);
    }
    out.push(("seven comments monthly", f, None));

    let mut f = Fixture::new();
    for m in 1..=12 {
        push_month(&mut f, m, &names("p", 0..m as usize), Post);
    }
    out.push(("ramping posts", f, None));

    let mut f = Fixture::new();
    for m in 1..=14 {
        let mut users = names("u", 0..3);
        users.push("[deleted]".into());
        users.push("[deleted]".into());
        push_month(&mut f, m, &users, if m % 2 == 0 { Post } else { Comment });
    }
    out.push(("deleted authors", f, None));

    let mut f = Fixture::new();
    for slot in 0..20 {
        f.push((-1 - slot * 1000, format!("early{slot}"), Comment));
        f.push((HORIZON * MONTH_SECONDS + slot, format!("late{slot}"), Post));
    }
    push_month(&mut f, 6, &names("u", 0..2), Comment);
    out.push(("outside horizon ignored", f, None));

    let mut f = Fixture::new();
    for m in 1..=13 {
        push_month(&mut f, m, &names("poster", 0..2), Post);
        push_month(&mut f, m, &names("talker", 0..(m as usize % 4)), Comment);
    }
    out.push(("posters and commenters differ", f, None));

    let mut f = Fixture::new();
    for m in [1, 2, 5, 6, 7, 11, 13, 20, 23] {
        push_month(&mut f, m, &names("u", 0..3), Comment);
    }
    out.push(("empty months between", f, None));

    let f = vec![
        (0, "a".into(), Post),
        (MONTH_SECONDS - 1, "b".into(), Comment),
        (MONTH_SECONDS, "c".into(), Comment),
        (23 * MONTH_SECONDS - 1, "d".into(), Comment),
        (21 * MONTH_SECONDS, "e".into(), Post),
        (24 * MONTH_SECONDS - 1, "a".into(), Comment),
    ];
    out.push(("month boundaries", f, None));

    let mut f = Fixture::new();
    for m in 1..=24 {
        for u in 0..10usize {
            if m as usize % (u + 1) == 0 {
                f.push((at(m, u as i64), format!("u{u}"), if u % 3 == 0 { Post } else { Comment }));
            }
        }
    }
    out.push(("periodic users", f, None));

    let mut f = Fixture::new();
    for m in 1..=24 {
        let active = 24usize.saturating_sub(m as usize);
        push_month(&mut f, m, &names("u", 0..active), Comment);
        push_month(&mut f, m, &names("u", 0..active / 3), Post);
    }
    out.push(("slow decline", f, None));

    let mut f = Fixture::new();
    for m in [3, 4, 9, 22] {
        for burst in 0..15 {
            let author = format!("u{}", (burst * m) % 7);
            f.push((at(m, burst), author, if burst % 4 == 0 { Post } else { Comment }));
        }
    }
    out.push(("bursty months", f, None));
    out
}

fn success_oracle() -> Outcome {
    let horizons = Horizons::default();
    let fixtures = success_fixtures();
    let mut mismatches = Vec::new();
    for (name, fixture, pinned) in &fixtures {
        let got = compute_measures(&fixture_timeline(fixture), T_K, &horizons);
        let expected = measures_oracle(fixture);
        if got != expected {
            mismatches.push(format!("{name}: got {got:?}, oracle {expected:?}"));
        }
        if let Some(p) = pinned {
            if *p != expected {
                mismatches.push(format!("{name}: oracle {expected:?} differs from pinned {p:?}"));
            }
        }
    }
    outcome(
        mismatches.is_empty() && fixtures.len() == 20,
        if mismatches.is_empty() {
            format!("{} fixtures, all six measures exact", fixtures.len())
        } else {
            mismatches.join("; ")
        },
    )
}

// ---------------------------------------------------------------- graphs

fn graph_metrics() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut problems = Vec::new();
    for trial in 0..200 {
        let n = rng.gen_range(1..=12);
        let p = rng.gen_range(0.0..1.0);
        let mut adj = vec![vec![false; n]; n];
        let mut g = SimpleGraph::new(n);
        for a in 0..n {
            for b in a + 1..n {
                if rng.gen_bool(p) {
                    adj[a][b] = true;
                    adj[b][a] = true;
                    g.add_edge(a, b);
                }
            }
        }
        let mut triangles = 0;
        let mut triples = 0;
        let mut local = vec![(0usize, 0usize); n];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    if a < b && b < c && adj[a][b] && adj[b][c] && adj[a][c] {
                        triangles += 1;
                    }
                    // path b - a - c centred at a
                    if b < c && b != a && c != a && adj[a][b] && adj[a][c] {
                        triples += 1;
                        local[a].1 += 1;
                        if adj[b][c] {
                            local[a].0 += 1;
                        }
                    }
                }
            }
        }
        let edges = (0..n).flat_map(|a| (a + 1..n).map(move |b| (a, b))).filter(|&(a, b)| adj[a][b]).count();
        let transitivity = (triples > 0).then(|| 3.0 * triangles as f64 / triples as f64);
        let clustering = local
            .iter()
            .map(|&(t, p)| if p == 0 { 0.0 } else { t as f64 / p as f64 })
            .sum::<f64>()
            / n as f64;
        let density = (n >= 2).then(|| 2.0 * edges as f64 / (n * (n - 1)) as f64);
        if g.triangle_count() != triangles
            || g.connected_triples() != triples
            || g.edge_count() != edges
            || g.transitivity() != transitivity
            || g.average_clustering() != Some(clustering)
            || g.density() != density
        {
            problems.push(format!("random graph {trial} (n={n})"));
        }
    }

    let expect = |name: &str, window: EarlyWindow, want: &[(&str, f64)], problems: &mut Vec<String>| {
        let fv = graph_features(&build_reply_graph(&window), &window);
        for (feature, value) in want {
            if fv.get(feature) != Some(*value) {
                problems.push(format!("{name}: {feature} = {:?}, want {value}", fv.get(feature)));
            }
        }
    };
    expect(
        "triangle",
        reply_window(&["a", "b", "c"], &[("a", None), ("b", Some(0)), ("c", Some(1)), ("c", Some(0))]),
        &[
            ("transitivity", 1.0),
            ("avg_clustering", 1.0),
            ("density", 1.0),
            ("largest_component_fraction", 1.0),
            ("singleton_fraction", 0.0),
        ],
        &mut problems,
    );
    expect(
        "path",
        reply_window(&["a", "b", "c"], &[("a", None), ("b", Some(0)), ("c", Some(1))]),
        &[("transitivity", 0.0), ("avg_clustering", 0.0), ("density", 2.0 / 3.0)],
        &mut problems,
    );
    expect(
        "star",
        reply_window(
            &["a", "b", "c", "d"],
            &[("a", None), ("b", Some(0)), ("c", Some(0)), ("d", Some(0))],
        ),
        &[
            ("transitivity", 0.0),
            ("avg_clustering", 0.0),
            ("density", 0.5),
            ("largest_component_fraction", 1.0),
            ("singleton_fraction", 0.0),
        ],
        &mut problems,
    );
    expect(
        "single edge",
        reply_window(
            &["a", "b", "c", "d"],
            &[("a", None), ("b", Some(0)), ("c", None), ("d", None)],
        ),
        &[("singleton_fraction", 0.5), ("largest_component_fraction", 0.5)],
        &mut problems,
    );
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            "200 random graphs match exhaustive enumeration; triangle, path, star and single-edge fixtures exact".into()
        } else {
            problems.join("; ")
        },
    )
}

/// Window whose events are (author, index of the replied-to event); `None` is a post.
fn reply_window(members: &[&str], events: &[(&str, Option<usize>)]) -> EarlyWindow {
    let events: Vec<Event> = events
        .iter()
        .enumerate()
        .map(|(i, (author, parent))| Event {
            event_id: format!("e{i}"),
            kind: if parent.is_some() { EventKind::Comment } else { EventKind::Post },
            author: author.to_string(),
            community: "g".into(),
            created_at: T_K + i as i64,
            parent_id: parent.map(|p| {
                let kind = if events[p].1.is_some() { "t1" } else { "t3" };
                format!("{kind}_e{p}")
            }),
            link_id: None,
            title: parent.is_none().then(|| "t".into()),
            body: String::new(),
            score: 0,
        })
        .collect();
    EarlyWindow {
        community: "g".into(),
        k: members.len(),
        created_at: events[0].created_at,
        members: members.iter().map(|s| s.to_string()).collect(),
        t_k: events.last().map(|e| e.created_at).unwrap_or(T_K),
        events,
        days_to_k: 0.0,
    }
}

// ---------------------------------------------------------------- correlation

fn rank_correlation() -> Outcome {
    let x = [1.0, 2.0, 3.0];
    let y = [1.0, 3.0, 2.0];
    let rho = spearman(&x, &y);
    let tau = kendall_tau(&x, &y);
    let hand = matches!(rho, Some(r) if (r - 0.5).abs() <= 1e-12) && matches!(tau, Some(t) if (t - 1.0 / 3.0).abs() <= 1e-12);

    let transforms: [(&str, fn(f64) -> f64); 4] = [
        ("exp", f64::exp),
        ("cube", |v| v * v * v),
        ("atan", f64::atan),
        ("affine", |v| 3.0 * v + 7.0),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let n = rng.gen_range(3..60);
        let ties = i % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| -> f64 {
            if ties {
                rng.gen_range(-5..5) as f64 / 2.0
            } else {
                rng.gen_range(-3.0..3.0)
            }
        };
        let xs: Vec<f64> = (0..n).map(|_| draw(&mut rng)).collect();
        let ys: Vec<f64> = xs.iter().map(|&v| v + draw(&mut rng)).collect();
        let (name, f) = transforms[i % transforms.len()];
        let fx: Vec<f64> = xs.iter().map(|&v| f(v)).collect();
        for (method, corr) in [("spearman", spearman as fn(&[f64], &[f64]) -> Option<f64>), ("kendall", kendall_tau)] {
            match (corr(&xs, &ys), corr(&fx, &ys)) {
                (Some(a), Some(b)) => worst = worst.max((a - b).abs()),
                (None, None) => {}
                other => return outcome(false, format!("{method} under {name}: {other:?}")),
            }
        }
    }
    outcome(
        hand && worst <= 1e-12,
        format!("spearman {rho:?} (0.5), kendall {tau:?} (1/3); max invariance gap {worst:.2e} (tol 1e-12)"),
    )
}

// ---------------------------------------------------------------- logistic regression

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Matrix {
    Matrix::from_vec(n, d, (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect())
}

fn logistic_regression() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let n = rng.gen_range(1..=40);
        let d = rng.gen_range(1..=10);
        let x = random_matrix(&mut rng, n, d);
        let y: Vec<f64> = (0..n).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let lambda = 10f64.powf(rng.gen_range(-4.0..1.0));
        let params: Vec<f64> = (0..=d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (_, analytic) = loss_and_gradient(&x, &y, lambda, &params);
        let mut diff_sq = 0.0;
        let mut scale_sq = 0.0;
        for j in 0..=d {
            let mut plus = params.clone();
            let mut minus = params.clone();
            plus[j] += h;
            minus[j] -= h;
            let numeric = (loss_and_gradient(&x, &y, lambda, &plus).0 - loss_and_gradient(&x, &y, lambda, &minus).0) / (2.0 * h);
            diff_sq += (analytic[j] - numeric).powi(2);
            scale_sq += analytic[j].powi(2).max(numeric.powi(2));
        }
        worst = worst.max(diff_sq.sqrt() / scale_sq.sqrt().max(1e-12));
    }

    let options = TrainOptions::default();
    let x = random_matrix(&mut rng, 40, 6);
    let y: Vec<f64> = (0..40).map(|i| if x.get(i, 0) + 0.3 * x.get(i, 1) > 0.0 { 1.0 } else { -1.0 }).collect();
    let heavy = train_logistic(&x, &y, 1e6, &options).expect("fit");
    let heavy_norm = heavy.weights.iter().map(|w| w * w).sum::<f64>().sqrt();

    // Separable with margin: label is the sign of the first feature, kept away from zero.
    let mut sep = random_matrix(&mut rng, 40, 3);
    let labels: Vec<f64> = (0..40).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
    for (i, &l) in labels.iter().enumerate() {
        sep.set(i, 0, l * (0.5 + sep.get(i, 0).abs()));
    }
    let light = train_logistic(&sep, &labels, 1e-6, &options).expect("fit");
    let scores = light.decision_function(&sep);
    let accuracy = scores.iter().zip(&labels).filter(|(s, l)| **s * **l > 0.0).count() as f64 / labels.len() as f64;

    let elapsed = start.elapsed();
    outcome(
        worst <= 1e-6 && heavy_norm < 1e-3 && accuracy == 1.0 && elapsed < Duration::from_secs(30),
        format!(
            "max relative gradient error {worst:.2e} (tol 1e-6), ||w|| at lambda=1e6 {heavy_norm:.2e} (< 1e-3), \
             separable training accuracy {accuracy} (1.0), {elapsed:.2?} (limit 30s)"
        ),
    )
}

// ---------------------------------------------------------------- auc

/// Doubled pairwise wins of positives over negatives, ties counting one.
fn doubled_wins(scores: &[f64], labels: &[bool]) -> (u64, u64) {
    let mut wins = 0;
    let mut pairs = 0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] && !labels[j] {
                pairs += 1;
                wins += match si.partial_cmp(&sj).unwrap() {
                    std::cmp::Ordering::Greater => 2,
                    std::cmp::Ordering::Equal => 1,
                    std::cmp::Ordering::Less => 0,
                };
            }
        }
    }
    (wins, 2 * pairs)
}

fn auc_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut problems = Vec::new();
    let mut checked = 0;
    for trial in 0..100 {
        let n = rng.gen_range(2..=500);
        let levels = if trial % 2 == 0 { 5 } else { 1_000_000 };
        let scores: Vec<f64> = (0..n).map(|_| rng.gen_range(0..levels) as f64 / levels as f64).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let (wins, total) = doubled_wins(&scores, &labels);
        let fast = auc(&scores, &labels).expect("both classes");
        let inverted: Vec<bool> = labels.iter().map(|l| !l).collect();
        let fast_inv = auc(&scores, &inverted).expect("both classes");
        let (wins_inv, total_inv) = doubled_wins(&scores, &inverted);
        if fast != wins as f64 / total as f64 {
            problems.push(format!("set {trial}: {fast} vs oracle {}", wins as f64 / total as f64));
        }
        // Inversion: wins of the old negatives are the complement of the old wins.
        if total_inv != total || wins_inv != total - wins || (fast_inv - (1.0 - fast)).abs() > 1e-15 {
            problems.push(format!("set {trial}: inverted {fast_inv} vs 1 - {fast}"));
        }
        checked += 1;
    }
    let ties = auc(&[0.3; 9], &[true, false, true, false, false, true, false, true, false]).expect("both classes");
    if ties != 0.5 {
        problems.push(format!("all ties gave {ties}"));
    }
    outcome(
        problems.is_empty(),
        if problems.is_empty() {
            format!("{checked} sets equal the pairwise oracle exactly; all ties 0.5; inversion gives 1 - a")
        } else {
            problems.join("; ")
        },
    )
}

// ---------------------------------------------------------------- end to end

const SIGNAL_SEEDS: [u64; 3] = [1, 2, 3];
const GROWTH: [Measure; 2] = [Measure::GrowthCommenters, Measure::GrowthPosters];

fn k_sweep() -> Vec<usize> {
    (10..=100).step_by(10).collect()
}

struct SweepResult {
    qualifying: Vec<usize>,
    /// Per growth measure: test AUC of the all-features model at each k.
    real: Vec<Vec<f64>>,
    shuffled: Vec<Vec<f64>>,
}

fn median(values: &[f64]) -> f64 {
    commsuccess::success::median(values).unwrap_or(f64::NAN)
}

fn sweep(seed: u64) -> SweepResult {
    let corpus = generate_corpus(&CorpusParams {
        seed,
        ..CorpusParams::default()
    })
    .expect("synth corpus");
    let checkpoint = pipeline::ingest_events(corpus.events, Some(2014));
    let lexicon = CategoryLexicon::default_bundled();
    let ks = k_sweep();
    let config = ExperimentConfig::default();
    let manifest = FeatureManifest::for_lexicon(Some(&lexicon));
    let tables = pipeline::features_for_ks(&checkpoint, &ks, config.qualification_days, Some(&lexicon));

    let mut result = SweepResult {
        qualifying: tables.iter().map(|(rows, _)| rows.len()).collect(),
        real: vec![Vec::new(); GROWTH.len()],
        shuffled: vec![Vec::new(); GROWTH.len()],
    };
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for (&k, (rows, _)) in ks.iter().zip(&tables) {
        let table = FeatureTable::from_vectors(k, manifest.features.clone(), rows).expect("table");
        let measures: Vec<SuccessMeasures> = rows
            .iter()
            .map(|fv| {
                let timeline = checkpoint.corpus.get(&fv.community).expect("timeline");
                let window = extract_early_window(timeline, k, config.qualification_days).expect("qualifying");
                compute_measures(timeline, window.t_k, &config.horizons())
            })
            .collect();
        let labels = LabelSet::build(k, rows.iter().map(|r| r.community.clone()).collect(), measures);
        for (slot, &measure) in GROWTH.iter().enumerate() {
            let y = labels.labels_for(measure);
            if let Ok(r) = run_experiment(&table, y, measure, ModelVariant::All, &config, config.seed) {
                result.real[slot].push(r.auc);
            }
            let mut shuffled = y.to_vec();
            shuffled.shuffle(&mut shuffle_rng);
            if let Ok(r) = run_experiment(&table, &shuffled, measure, ModelVariant::All, &config, config.seed) {
                result.shuffled[slot].push(r.auc);
            }
        }
    }
    result
}

fn sweeps() -> &'static [(u64, SweepResult)] {
    static CELL: std::sync::OnceLock<Vec<(u64, SweepResult)>> = std::sync::OnceLock::new();
    CELL.get_or_init(|| SIGNAL_SEEDS.iter().map(|&s| (s, sweep(s))).collect())
}

fn planted_signal() -> Outcome {
    let start = Instant::now();
    let results = sweeps();
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(300);
    let mut parts = Vec::new();
    for (seed, r) in results {
        let mut real = Vec::new();
        for (slot, measure) in GROWTH.iter().enumerate() {
            let m = median(&r.real[slot]);
            pass &= m > 0.85;
            real.push(format!("{}={m:.3}", measure.name()));
        }
        let null = GROWTH
            .iter()
            .enumerate()
            .map(|(slot, _)| median(&r.shuffled[slot]))
            .sum::<f64>()
            / GROWTH.len() as f64;
        pass &= (0.45..=0.55).contains(&null);
        parts.push(format!("seed {seed}: {} shuffled={null:.3}", real.join(" ")));
    }
    outcome(
        pass,
        format!(
            "median test AUC over k=10..100 (> 0.85; shuffled in [0.45, 0.55]); {}; {elapsed:.2?} (limit 300s)",
            parts.join("; ")
        ),
    )
}

fn qualification_monotonicity() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (seed, r) in sweeps() {
        pass &= r.qualifying.windows(2).all(|w| w[1] <= w[0]);
        parts.push(format!("seed {seed}: {:?}", r.qualifying));
    }
    outcome(pass, format!("qualifying counts for k=10..100: {}", parts.join("; ")))
}

fn determinism() -> Outcome {
    let config = ExperimentConfig::default();
    let params = CorpusParams::default();
    let run = || -> tempfile::TempDir {
        let dir = tempfile::tempdir().expect("temp dir");
        let layout = Layout::new(dir.path());
        pipeline::cmd_synth(&params, &layout).expect("synth");
        pipeline::cmd_ingest(&layout.synth_posts(), &layout.synth_comments(), &layout, Some(2014)).expect("ingest");
        pipeline::run_all(&layout, &config, &LexiconSource::Bundled).expect("pipeline");
        dir
    };
    let (a, b) = (run(), run());
    let (la, lb) = (Layout::new(a.path()), Layout::new(b.path()));
    let files = [
        (la.report_auc(), lb.report_auc()),
        (la.report_correlations(), lb.report_correlations()),
        (la.report_top_features(), lb.report_top_features()),
        (la.experiments(), lb.experiments()),
    ];
    let mut differing = Vec::new();
    let mut bytes = 0;
    for (x, y) in &files {
        let (bx, by) = (fs::read(x).expect("report"), fs::read(y).expect("report"));
        bytes += bx.len();
        if bx != by {
            differing.push(x.file_name().unwrap().to_string_lossy().into_owned());
        }
    }
    outcome(
        differing.is_empty() && bytes > 0,
        if differing.is_empty() {
            format!("{} report files ({bytes} bytes) identical across two runs", files.len())
        } else {
            format!("differing: {}", differing.join(", "))
        },
    )
}
