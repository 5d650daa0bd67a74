//! Reply network among the early members.

use std::collections::{BTreeSet, HashMap};
use std::io::Write;

use super::{Family, FeatureVector};
use crate::error::Result;
use crate::ingest::EarlyWindow;

pub(crate) const SOCIAL_FEATURES: [&str; 7] = [
    "transitivity",
    "avg_clustering",
    "density",
    "largest_component_fraction",
    "singleton_fraction",
    "frac_posts_replied",
    "frac_comments_replied",
];

/// Undirected simple graph on `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimpleGraph {
    adjacency: Vec<BTreeSet<usize>>,
}

impl SimpleGraph {
    pub fn new(n: usize) -> Self {
        SimpleGraph {
            adjacency: vec![BTreeSet::new(); n],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    /// Adds `{a, b}`; self-loops and repeated edges are ignored. Returns
    /// whether the edge is new.
    pub fn add_edge(&mut self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        let inserted = self.adjacency[a].insert(b);
        self.adjacency[b].insert(a);
        inserted
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a].contains(&b)
    }

    pub fn neighbors(&self, node: usize) -> &BTreeSet<usize> {
        &self.adjacency[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.adjacency[node].len()
    }

    pub fn edge_count(&self) -> usize {
        self.adjacency.iter().map(BTreeSet::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(a, ns)| ns.range(a + 1..).map(move |&b| (a, b)))
    }

    /// Triangles through `node`.
    pub fn node_triangles(&self, node: usize) -> usize {
        let ns: Vec<usize> = self.adjacency[node].iter().copied().collect();
        let mut count = 0;
        for (i, &u) in ns.iter().enumerate() {
            for &v in &ns[i + 1..] {
                if self.has_edge(u, v) {
                    count += 1;
                }
            }
        }
        count
    }

    pub fn triangle_count(&self) -> usize {
        self.edges()
            .map(|(a, b)| {
                self.adjacency[a]
                    .intersection(&self.adjacency[b])
                    .filter(|&&c| c > b)
                    .count()
            })
            .sum()
    }

    /// Paths of length two counted at their centre: `sum_v C(deg v, 2)`.
    pub fn connected_triples(&self) -> usize {
        self.adjacency
            .iter()
            .map(|ns| ns.len() * ns.len().saturating_sub(1) / 2)
            .sum()
    }

    /// `3 * triangles / connected triples`; `None` without any triple.
    pub fn transitivity(&self) -> Option<f64> {
        let triples = self.connected_triples();
        (triples > 0).then(|| 3.0 * self.triangle_count() as f64 / triples as f64)
    }

    /// Local clustering coefficient; 0 for degree below two.
    pub fn local_clustering(&self, node: usize) -> f64 {
        let d = self.degree(node);
        if d < 2 {
            return 0.0;
        }
        self.node_triangles(node) as f64 / (d * (d - 1) / 2) as f64
    }

    pub fn average_clustering(&self) -> Option<f64> {
        let n = self.node_count();
        (n > 0).then(|| (0..n).map(|v| self.local_clustering(v)).sum::<f64>() / n as f64)
    }

    /// `2|E| / (n (n - 1))`; `None` below two nodes.
    pub fn density(&self) -> Option<f64> {
        let n = self.node_count();
        (n >= 2).then(|| 2.0 * self.edge_count() as f64 / (n * (n - 1)) as f64)
    }

    /// Sizes of connected components, largest first.
    pub fn component_sizes(&self) -> Vec<usize> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut sizes = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut size = 0;
            while let Some(v) = stack.pop() {
                size += 1;
                for &u in &self.adjacency[v] {
                    if !seen[u] {
                        seen[u] = true;
                        stack.push(u);
                    }
                }
            }
            sizes.push(size);
        }
        sizes.sort_unstable_by(|a, b| b.cmp(a));
        sizes
    }
}

/// Undirected reply graph over exactly the window's members.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReplyGraph {
    pub members: Vec<String>,
    pub graph: SimpleGraph,
    /// Comments whose parent is not an event of the window.
    pub dangling_replies: usize,
}

impl ReplyGraph {
    pub fn edge_names(&self) -> Vec<(&str, &str)> {
        self.graph
            .edges()
            .map(|(a, b)| {
                let (x, y) = (self.members[a].as_str(), self.members[b].as_str());
                if x <= y {
                    (x, y)
                } else {
                    (y, x)
                }
            })
            .collect()
    }

    /// Writes the edge list as `member_a,member_b` CSV.
    pub fn write_edge_list<W: Write>(&self, writer: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(writer);
        out.write_record(["member_a", "member_b"])?;
        let mut edges = self.edge_names();
        edges.sort_unstable();
        for (a, b) in edges {
            out.write_record([a, b])?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn build_reply_graph(window: &EarlyWindow) -> ReplyGraph {
    let index: HashMap<&str, usize> = window
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| (m.as_str(), i))
        .collect();
    let authors: HashMap<String, &str> = window
        .events
        .iter()
        .map(|e| (e.fullname(), e.author.as_str()))
        .collect();
    let mut graph = SimpleGraph::new(window.members.len());
    let mut dangling_replies = 0;
    for comment in window.comments() {
        let Some(parent) = comment.parent_id.as_ref().or(comment.link_id.as_ref()) else {
            dangling_replies += 1;
            continue;
        };
        let Some(parent_author) = authors.get(parent) else {
            dangling_replies += 1;
            continue;
        };
        if let (Some(&a), Some(&b)) = (index.get(comment.author.as_str()), index.get(parent_author)) {
            graph.add_edge(a, b);
        }
    }
    ReplyGraph {
        members: window.members.clone(),
        graph,
        dangling_replies,
    }
}

pub fn graph_features(reply: &ReplyGraph, window: &EarlyWindow) -> FeatureVector {
    let mut fv = FeatureVector::new(window.community.clone(), window.k);
    let family = Family::Social;
    let g = &reply.graph;
    let n = g.node_count();

    fv.push_opt("transitivity", family, g.transitivity());
    fv.push_opt("avg_clustering", family, g.average_clustering());
    fv.push_opt("density", family, g.density());
    let sizes = g.component_sizes();
    let largest = sizes.first().copied().unwrap_or(0);
    let singletons = (0..n).filter(|&v| g.degree(v) == 0).count();
    fv.push_opt("largest_component_fraction", family, (n > 0).then(|| largest as f64 / n as f64));
    fv.push_opt("singleton_fraction", family, (n > 0).then(|| singletons as f64 / n as f64));

    let mut replied: HashMap<String, bool> = window.events.iter().map(|e| (e.fullname(), false)).collect();
    for c in window.comments() {
        if let Some(flag) = c.parent_id.as_ref().and_then(|p| replied.get_mut(p)) {
            *flag = true;
        }
    }
    let fraction = |want_post: bool| {
        let targets: Vec<bool> = window
            .events
            .iter()
            .filter(|e| e.is_post() == want_post)
            .map(|e| replied[&e.fullname()])
            .collect();
        (!targets.is_empty()).then(|| targets.iter().filter(|&&r| r).count() as f64 / targets.len() as f64)
    };
    fv.push_opt("frac_posts_replied", family, fraction(true));
    fv.push_opt("frac_comments_replied", family, fraction(false));
    fv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{Event, EventKind, DELETED_AUTHOR};

    fn ev(id: &str, kind: EventKind, author: &str, parent: Option<&str>, t: i64) -> Event {
        Event {
            event_id: id.into(),
            kind,
            author: author.into(),
            community: "c".into(),
            created_at: 1_400_000_000 + t,
            parent_id: parent.map(String::from),
            link_id: None,
            title: (kind == EventKind::Post).then(|| "t".into()),
            body: String::new(),
            score: 0,
        }
    }

    fn window(members: &[&str], events: Vec<Event>) -> EarlyWindow {
        EarlyWindow {
            community: "c".into(),
            k: members.len(),
            created_at: events[0].created_at,
            members: members.iter().map(|s| s.to_string()).collect(),
            t_k: events.last().unwrap().created_at,
            events,
            days_to_k: 0.0,
        }
    }

    fn from_edges(n: usize, edges: &[(usize, usize)]) -> SimpleGraph {
        let mut g = SimpleGraph::new(n);
        for &(a, b) in edges {
            g.add_edge(a, b);
        }
        g
    }

    #[test]
    fn reply_edges() {
        let w = window(
            &["a", "b"],
            vec![
                ev("p", EventKind::Post, "a", None, 0),
                ev("c1", EventKind::Comment, "b", Some("t3_p"), 1),
                ev("c2", EventKind::Comment, "b", Some("t3_p"), 2),
                ev("c3", EventKind::Comment, "a", Some("t3_p"), 3),
            ],
        );
        let g = build_reply_graph(&w);
        assert_eq!(g.edge_names(), vec![("a", "b")]);
        assert_eq!(g.dangling_replies, 0);
    }

    #[test]
    fn self_reply_adds_no_edge() {
        let w = window(
            &["a"],
            vec![
                ev("p", EventKind::Post, "a", None, 0),
                ev("c1", EventKind::Comment, "a", Some("t3_p"), 1),
            ],
        );
        assert_eq!(build_reply_graph(&w).graph.edge_count(), 0);
    }

    #[test]
    fn deleted_and_dangling_parents() {
        let w = window(
            &["a"],
            vec![
                ev("p", EventKind::Post, DELETED_AUTHOR, None, 0),
                ev("c1", EventKind::Comment, "a", Some("t3_p"), 1),
                ev("c2", EventKind::Comment, "a", Some("t1_missing"), 2),
            ],
        );
        let g = build_reply_graph(&w);
        assert_eq!(g.graph.edge_count(), 0);
        assert_eq!(g.dangling_replies, 1);
    }

    #[test]
    fn triangle_path_and_star_metrics() {
        let tri = from_edges(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(tri.transitivity(), Some(1.0));
        assert_eq!(tri.average_clustering(), Some(1.0));
        assert_eq!(tri.density(), Some(1.0));
        assert_eq!(tri.component_sizes(), vec![3]);

        let path = from_edges(3, &[(0, 1), (1, 2)]);
        assert_eq!(path.transitivity(), Some(0.0));
        assert_eq!(path.average_clustering(), Some(0.0));
        assert!((path.density().unwrap() - 2.0 / 3.0).abs() < 1e-15);

        let star = from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        assert_eq!(star.connected_triples(), 6);
        assert_eq!(star.transitivity(), Some(0.0));
        assert_eq!(star.density(), Some(0.4));
    }

    #[test]
    fn single_edge_among_four() {
        let w = window(
            &["a", "b", "c", "d"],
            vec![
                ev("p", EventKind::Post, "a", None, 0),
                ev("c1", EventKind::Comment, "b", Some("t3_p"), 1),
                ev("p2", EventKind::Post, "c", None, 2),
                ev("p3", EventKind::Post, "d", None, 3),
            ],
        );
        let fv = graph_features(&build_reply_graph(&w), &w);
        assert_eq!(fv.get("singleton_fraction"), Some(0.5));
        assert_eq!(fv.get("largest_component_fraction"), Some(0.5));
        assert!(fv.is_flagged("transitivity"));
        assert!((fv.get("frac_posts_replied").unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(fv.get("frac_comments_replied"), Some(0.0));
    }

    #[test]
    fn single_member_density_is_flagged() {
        let w = window(&["a"], vec![ev("p", EventKind::Post, "a", None, 0)]);
        let fv = graph_features(&build_reply_graph(&w), &w);
        assert!(fv.is_flagged("density"));
        assert_eq!(fv.get("singleton_fraction"), Some(1.0));
    }

    #[test]
    fn edge_list_csv() {
        let w = window(
            &["b", "a"],
            vec![
                ev("p", EventKind::Post, "b", None, 0),
                ev("c1", EventKind::Comment, "a", Some("t3_p"), 1),
            ],
        );
        let mut buf = Vec::new();
        build_reply_graph(&w).write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "member_a,member_b\na,b\n");
    }
}
