//! Directed follow graph, generated by asking each agent whom it befriends.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

use crate::exec::{map_range, ExecutionMode};
use crate::llm::{prompts, ChatParams, Gateway, GatewayError, Message};
use crate::persona::{profile_string, Persona};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FollowGraph {
    n_agents: usize,
    /// (follower, followee)
    edges: BTreeSet<(usize, usize)>,
}

#[derive(Debug, Error)]
pub enum SocialNetError {
    #[error("need at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("persona at position {position} has agent_id {agent_id}")]
    IdMismatch { position: usize, agent_id: usize },
    #[error("edge ({0}, {1}) is a self-loop or out of range")]
    BadEdge(usize, usize),
    #[error("follow-list generation failed for agent {agent}: {source}")]
    Provider {
        agent: usize,
        source: GatewayError,
        partial: Box<FollowGraph>,
        report: GenerationReport,
    },
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl FollowGraph {
    pub fn new(n_agents: usize) -> Self {
        Self { n_agents, edges: BTreeSet::new() }
    }

    pub fn from_edges(n_agents: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, SocialNetError> {
        let mut g = Self::new(n_agents);
        for (a, b) in edges {
            g.insert(a, b)?;
        }
        Ok(g)
    }

    /// Returns whether the edge was new.
    pub fn insert(&mut self, follower: usize, followee: usize) -> Result<bool, SocialNetError> {
        if follower == followee || follower >= self.n_agents || followee >= self.n_agents {
            return Err(SocialNetError::BadEdge(follower, followee));
        }
        Ok(self.edges.insert((follower, followee)))
    }

    pub fn follows(&self, follower: usize, followee: usize) -> bool {
        self.edges.contains(&(follower, followee))
    }

    pub fn n_agents(&self) -> usize {
        self.n_agents
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    /// Edges in sorted order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedFollows {
    pub ids: Vec<usize>,
    pub dropped: usize,
}

/// Parses a comma-separated ID list. Duplicates, self-IDs, out-of-range IDs
/// and non-numeric tokens are dropped and counted; empty tokens are ignored.
pub fn parse_follow_list(text: &str, self_id: usize, n_agents: usize) -> ParsedFollows {
    let mut seen = BTreeSet::new();
    let mut ids = Vec::new();
    let mut dropped = 0;
    for tok in text.split([',', '\n', ';']) {
        let tok = tok.trim().trim_end_matches('.').trim();
        if tok.is_empty() {
            continue;
        }
        match tok.parse::<usize>() {
            Ok(id) if id != self_id && id < n_agents && seen.insert(id) => ids.push(id),
            _ => dropped += 1,
        }
    }
    ParsedFollows { ids, dropped }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct GenerationReport {
    /// Dropped-token count per agent; `None` where the call failed.
    pub dropped: Vec<Option<usize>>,
}

impl GenerationReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().flatten().sum()
    }
}

pub fn generate_network(
    personas: &[Persona],
    gateway: &Gateway,
    seed: u64,
    mode: ExecutionMode,
) -> Result<(FollowGraph, GenerationReport), SocialNetError> {
    let n = personas.len();
    if n < 2 {
        return Err(SocialNetError::TooFewAgents(n));
    }
    if let Some((position, p)) = personas.iter().enumerate().find(|(i, p)| p.agent_id != *i) {
        return Err(SocialNetError::IdMismatch { position, agent_id: p.agent_id });
    }
    let profiles: Vec<String> = personas.iter().map(profile_string).collect();
    let results = map_range(mode, n, |i| {
        let others: Vec<String> = (0..n).filter(|&j| j != i).map(|j| profiles[j].clone()).collect();
        let (system, user) = prompts::social_net(&profiles[i], &others);
        let params = ChatParams::agent(seed);
        gateway
            .complete(&[Message::system(system), Message::user(user)], &params)
            .map(|c| parse_follow_list(&c.text, i, n))
    });

    let mut graph = FollowGraph::new(n);
    let mut report = GenerationReport { dropped: vec![None; n] };
    let mut first_err = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(parsed) => {
                if parsed.dropped > 0 {
                    log::debug!("agent {i}: dropped {} follow tokens", parsed.dropped);
                }
                report.dropped[i] = Some(parsed.dropped);
                for j in parsed.ids {
                    graph.insert(i, j).expect("parser filters invalid ids");
                }
            }
            Err(e) => {
                log::error!("agent {i}: follow-list generation failed: {e}");
                first_err.get_or_insert((i, e));
            }
        }
    }
    match first_err {
        None => Ok((graph, report)),
        Some((agent, source)) => Err(SocialNetError::Provider {
            agent,
            source,
            partial: Box::new(graph),
            report,
        }),
    }
}

pub fn edges_to_string(graph: &FollowGraph) -> String {
    let mut out = String::new();
    for (a, b) in graph.edges() {
        let _ = writeln!(out, "{a},{b}");
    }
    out
}

pub fn save_edges(graph: &FollowGraph, path: &Path) -> Result<(), SocialNetError> {
    std::fs::write(path, edges_to_string(graph)).map_err(|source| SocialNetError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn parse_edges(text: &str, n_agents: usize) -> Result<FollowGraph, SocialNetError> {
    let mut g = FollowGraph::new(n_agents);
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let perr = |message: String| SocialNetError::Parse { line: line_no, message };
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| perr(format!("expected `follower,followee`, got {line:?}")))?;
        let a: usize = a.trim().parse().map_err(|_| perr(format!("bad follower id {a:?}")))?;
        let b: usize = b.trim().parse().map_err(|_| perr(format!("bad followee id {b:?}")))?;
        g.insert(a, b)
            .map_err(|_| perr(format!("edge {a},{b} is a self-loop or outside 0..{n_agents}")))?;
    }
    Ok(g)
}

/// The id range cannot be recovered from an edge list, so `n_agents` is
/// supplied by the caller.
pub fn load_edges(path: &Path, n_agents: usize) -> Result<FollowGraph, SocialNetError> {
    let text = std::fs::read_to_string(path).map_err(|source| SocialNetError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_edges(&text, n_agents)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::scripted::FollowRule;
    use crate::llm::{ChatProvider, ProviderError, RetryPolicy, ScriptedProvider, ScriptedRuleSet};
    use crate::persona::{sample_population, DemographicMarginals};
    use proptest::prelude::*;
    use std::sync::Arc;

    fn fixed(response: &str) -> Gateway {
        let mut rules = ScriptedRuleSet::policy_sensitive();
        rules.follow = FollowRule::Fixed { response: response.into() };
        Gateway::new(Arc::new(ScriptedProvider::new(rules, 0)), RetryPolicy::immediate(1), 4)
    }

    #[test]
    fn direct_parse() {
        assert_eq!(parse_follow_list("1, 2", 0, 3), ParsedFollows { ids: vec![1, 2], dropped: 0 });
        assert_eq!(parse_follow_list("1, 1, 0, xyz, 999", 0, 3), ParsedFollows { ids: vec![1], dropped: 4 });
        assert_eq!(parse_follow_list("", 0, 3), ParsedFollows { ids: vec![], dropped: 0 });
    }

    #[test]
    fn fixed_response_graph() {
        let personas = sample_population(&DemographicMarginals::bundled(), 3, 1);
        let (g, report) = generate_network(&personas, &fixed("1, 2"), 0, ExecutionMode::Sequential).unwrap();
        let edges: Vec<_> = g.edges().collect();
        // agent 1 and 2 drop their own id
        assert_eq!(edges, vec![(0, 1), (0, 2), (1, 2), (2, 1)]);
        assert_eq!(report.dropped, vec![Some(0), Some(1), Some(1)]);
    }

    #[test]
    fn homophily_matches_oracle() {
        let personas = sample_population(&DemographicMarginals::bundled(), 30, 5);
        let gw = Gateway::new(
            Arc::new(ScriptedProvider::new(
                ScriptedRuleSet {
                    follow: FollowRule::SamePoliticalBelief { max_follows: usize::MAX },
                    ..ScriptedRuleSet::policy_sensitive()
                },
                9,
            )),
            RetryPolicy::immediate(1),
            8,
        );
        let (g, _) = generate_network(&personas, &gw, 2, ExecutionMode::Parallel).unwrap();
        let mut oracle = FollowGraph::new(30);
        for a in &personas {
            for b in &personas {
                if a.agent_id != b.agent_id && a.political_belief == b.political_belief {
                    oracle.insert(a.agent_id, b.agent_id).unwrap();
                }
            }
        }
        assert_eq!(g, oracle);
        let (again, _) = generate_network(&personas, &gw, 2, ExecutionMode::Sequential).unwrap();
        assert_eq!(g, again);
    }

    struct Broken;
    impl ChatProvider for Broken {
        fn complete(&self, m: &[Message], _: &ChatParams) -> Result<String, ProviderError> {
            if m[0].content.starts_with("Pretend you are 1.") {
                Err(ProviderError::Transport("down".into()))
            } else {
                Ok("1".into())
            }
        }
        fn id(&self) -> String {
            "broken".into()
        }
    }

    #[test]
    fn provider_failure_keeps_partial_graph() {
        let personas = sample_population(&DemographicMarginals::bundled(), 3, 1);
        let gw = Gateway::new(Arc::new(Broken), RetryPolicy::immediate(2), 2);
        match generate_network(&personas, &gw, 0, ExecutionMode::Sequential) {
            Err(SocialNetError::Provider { agent, partial, report, .. }) => {
                assert_eq!(agent, 1);
                assert_eq!(partial.edges().collect::<Vec<_>>(), vec![(0, 1), (2, 1)]);
                assert_eq!(report.dropped[1], None);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few() {
        let personas = sample_population(&DemographicMarginals::bundled(), 1, 1);
        assert!(matches!(
            generate_network(&personas, &fixed(""), 0, ExecutionMode::Sequential),
            Err(SocialNetError::TooFewAgents(1))
        ));
    }

    #[test]
    fn edge_file_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("edges.csv");
        let empty = FollowGraph::new(4);
        save_edges(&empty, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "");
        assert_eq!(load_edges(&path, 4).unwrap(), empty);

        let g = FollowGraph::from_edges(4, [(3, 0), (0, 2), (0, 1)]).unwrap();
        save_edges(&g, &path).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "0,1\n0,2\n3,0\n");
    }

    #[test]
    fn load_errors_carry_line_numbers() {
        let err = parse_edges("0,1\n2;3\n", 4).unwrap_err();
        assert!(matches!(err, SocialNetError::Parse { line: 2, .. }));
        assert!(matches!(parse_edges("0,1\n1,1\n", 4), Err(SocialNetError::Parse { line: 2, .. })));
        assert!(matches!(parse_edges("0,9\n", 4), Err(SocialNetError::Parse { line: 1, .. })));
    }

    proptest! {
        #[test]
        fn round_trip(edges in proptest::collection::vec((0usize..60, 0usize..60), 0..500)) {
            let g = FollowGraph::from_edges(60, edges.into_iter().filter(|(a, b)| a != b)).unwrap();
            prop_assert_eq!(parse_edges(&edges_to_string(&g), 60).unwrap(), g);
        }

        #[test]
        fn parsed_ids_valid(text in "[0-9, a-z.]{0,60}", me in 0usize..10) {
            let p = parse_follow_list(&text, me, 10);
            prop_assert!(p.ids.iter().all(|&i| i != me && i < 10));
            let set: BTreeSet<_> = p.ids.iter().collect();
            prop_assert_eq!(set.len(), p.ids.len());
        }
    }
}
