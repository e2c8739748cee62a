//! Machine inference from a single long symbol sequence, in three steps:
//! pick a synchronizing context whose empirical next-symbol distribution is a
//! convex-hull vertex of all short-context distributions, grow the transition
//! structure breadth-first by matching extension distributions within a
//! radius `epsilon` (sup norm), then run the sequence through the graph and
//! turn transition counts into observation rows. The returned machine is the
//! closed strongly connected component carrying the most visit mass, so it
//! always validates.

use std::collections::{BTreeMap, VecDeque};

use thiserror::Error;

use crate::graph;
use crate::pfsa::{Pfsa, StateRecord, SymbolSeq};

/// Soft floor on input length; shorter sequences cannot support even the
/// trivial one-state estimate.
pub const MIN_INPUT_LEN: usize = 100;

#[derive(Debug, Error)]
pub enum InferError {
    #[error("input of {len} symbols is too short (need at least {min})")]
    InputTooShort { len: usize, min: usize },
    #[error(
        "no candidate context reached the required support; input too short for these parameters"
    )]
    NoCandidates,
    #[error("symbol {symbol} >= alphabet size {alphabet_size}")]
    SymbolOutOfRange { symbol: usize, alphabet_size: usize },
    #[error("bad inference parameter: {0}")]
    BadParams(String),
    #[error("counted transitions contain no recurrent structure; use a positive smoothing_alpha or more data")]
    NoRecurrentStructure,
}

/// Empirical next-symbol distribution after a context `y`: each occurrence of
/// `y` in `x` that is followed by at least one more symbol contributes its
/// follower.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalDerivative {
    /// Normalized follower frequencies; all zeros when `support_count == 0`,
    /// in which case the distribution is undefined and must not be trusted.
    pub dist: Vec<f64>,
    pub support_count: usize,
}

impl EmpiricalDerivative {
    pub fn is_defined(&self) -> bool {
        self.support_count > 0
    }
}

/// Counts followed occurrences of `y` (indices `i` with `i + |y| < |x|` and
/// `x[i..i+|y|] == y`) by direct scan.
pub fn empirical_derivative(
    x: &SymbolSeq,
    y: &[usize],
    alphabet_size: usize,
) -> EmpiricalDerivative {
    let xs = x.as_slice();
    let mut counts = vec![0u64; alphabet_size];
    let mut support = 0u64;
    if y.len() < xs.len() {
        for i in 0..(xs.len() - y.len()) {
            if &xs[i..i + y.len()] == y {
                counts[xs[i + y.len()]] += 1;
                support += 1;
            }
        }
    }
    let dist = if support > 0 {
        counts.iter().map(|&c| c as f64 / support as f64).collect()
    } else {
        vec![0.0; alphabet_size]
    };
    EmpiricalDerivative {
        dist,
        support_count: support as usize,
    }
}

/// Tuning knobs for [`infer`].
#[derive(Debug, Clone)]
pub struct InferParams {
    /// Matching radius: extension distributions within this sup-norm distance
    /// of an existing state's distribution reuse that state.
    pub epsilon: f64,
    /// Minimum followed-occurrence count for a context to be trusted; weaker
    /// evidence routes to the closest existing state instead of spawning.
    pub min_count: usize,
    pub max_states: usize,
    /// Pseudo-count added to every transition cell before normalizing, so the
    /// inferred rows have full support and finite log-likelihoods.
    pub smoothing_alpha: f64,
}

impl InferParams {
    pub fn new(epsilon: f64) -> Self {
        InferParams {
            epsilon,
            ..Default::default()
        }
    }

    fn check(&self) -> Result<(), InferError> {
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return Err(InferError::BadParams(format!(
                "epsilon {} not in (0, 1)",
                self.epsilon
            )));
        }
        if self.min_count < 1 {
            return Err(InferError::BadParams("min_count must be >= 1".into()));
        }
        if self.max_states < 1 {
            return Err(InferError::BadParams("max_states must be >= 1".into()));
        }
        if self.smoothing_alpha < 0.0 {
            return Err(InferError::BadParams("smoothing_alpha must be >= 0".into()));
        }
        Ok(())
    }
}

impl Default for InferParams {
    fn default() -> Self {
        InferParams {
            epsilon: 0.05,
            min_count: 5,
            max_states: 64,
            smoothing_alpha: 0.5,
        }
    }
}

/// Longest candidate context considered during synchronization:
/// `floor(log_alphabet(1/epsilon))`.
fn max_candidate_len(alphabet_size: usize, epsilon: f64) -> usize {
    let l = (1.0 / epsilon).log(alphabet_size as f64);
    (l + 1e-9).max(0.0).floor() as usize
}

struct Candidate {
    y: Vec<usize>,
    deriv: EmpiricalDerivative,
}

/// Enumerates every context of length `<= max_len` occurring in `x` with at
/// least `min_count` followed occurrences, in (length, lexicographic) order.
fn enumerate_candidates(
    xs: &[usize],
    alphabet_size: usize,
    max_len: usize,
    min_count: usize,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let max_len = max_len.min(xs.len().saturating_sub(1));
    for len in 0..=max_len {
        let mut counts: BTreeMap<&[usize], Vec<u64>> = BTreeMap::new();
        for i in 0..(xs.len() - len) {
            let entry = counts
                .entry(&xs[i..i + len])
                .or_insert_with(|| vec![0; alphabet_size]);
            entry[xs[i + len]] += 1;
        }
        for (w, c) in counts {
            let support: u64 = c.iter().sum();
            if support as usize >= min_count {
                let dist = c.iter().map(|&v| v as f64 / support as f64).collect();
                out.push(Candidate {
                    y: w.to_vec(),
                    deriv: EmpiricalDerivative {
                        dist,
                        support_count: support as usize,
                    },
                });
            }
        }
    }
    out
}

/// Index of the candidate whose distribution lies farthest (Euclidean) from
/// the centroid of all candidate distributions. That point is always a vertex
/// of their convex hull. Ties prefer shorter contexts, then higher support,
/// then lexicographically smaller contexts.
fn select_from_candidates(candidates: &[Candidate]) -> usize {
    let k = candidates[0].deriv.dist.len();
    let mut centroid = vec![0.0; k];
    for c in candidates {
        for (acc, &v) in centroid.iter_mut().zip(&c.deriv.dist) {
            *acc += v;
        }
    }
    for v in &mut centroid {
        *v /= candidates.len() as f64;
    }
    let dist2 = |c: &Candidate| -> f64 {
        c.deriv
            .dist
            .iter()
            .zip(&centroid)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    };
    let mut best = 0;
    let mut best_d = dist2(&candidates[0]);
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let d = dist2(c);
        let better = d > best_d
            || (d == best_d && {
                let b = &candidates[best];
                c.y.len() < b.y.len()
                    || (c.y.len() == b.y.len()
                        && (c.deriv.support_count > b.deriv.support_count
                            || (c.deriv.support_count == b.deriv.support_count && c.y < b.y)))
            });
        if better {
            best = i;
            best_d = d;
        }
    }
    best
}

/// Picks the approximately synchronizing context used to seed inference.
pub fn select_sync_sequence(
    x: &SymbolSeq,
    alphabet_size: usize,
    params: &InferParams,
) -> Result<SymbolSeq, InferError> {
    params.check()?;
    check_symbols(x, alphabet_size)?;
    let max_len = max_candidate_len(alphabet_size, params.epsilon);
    let candidates = enumerate_candidates(x.as_slice(), alphabet_size, max_len, params.min_count);
    if candidates.is_empty() {
        return Err(InferError::NoCandidates);
    }
    let best = select_from_candidates(&candidates);
    Ok(SymbolSeq::new(candidates[best].y.clone()))
}

fn check_symbols(x: &SymbolSeq, alphabet_size: usize) -> Result<(), InferError> {
    if alphabet_size < 2 {
        return Err(InferError::BadParams(format!(
            "alphabet size {alphabet_size} < 2"
        )));
    }
    if let Some(max) = x.max_symbol() {
        if max >= alphabet_size {
            return Err(InferError::SymbolOutOfRange {
                symbol: max,
                alphabet_size,
            });
        }
    }
    Ok(())
}

fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// What happened during inference, for callers that need to judge the result.
#[derive(Debug, Clone)]
pub struct InferReport {
    pub state_count: usize,
    /// Transition-count mass per final state from the counting pass.
    pub visit_counts: Vec<u64>,
    /// Extension contexts seen fewer than `min_count` times (but at least
    /// once); their edges were routed to the closest existing state.
    pub low_support_edges: usize,
    /// Extension contexts never seen at all; their edges go to the sync state.
    pub zero_support_edges: usize,
    pub max_states_hit: bool,
    /// Largest accepted match distance; close to `epsilon` means coarse
    /// merges happened.
    pub max_match_distance: f64,
    pub closed_scc_count: usize,
    pub sync_sequence: SymbolSeq,
}

#[derive(Debug, Clone)]
pub struct Inferred {
    pub machine: Pfsa,
    pub report: InferReport,
}

/// The closed strongly connected component (no edges leaving it) with the
/// highest total weight; among several closed components ties go to the one
/// containing the smallest state index. Every finite digraph has at least one
/// closed component.
pub fn scc_terminal(adj: &[Vec<usize>], weights: &[f64]) -> Vec<usize> {
    let comps = graph::sccs(adj);
    let closed = graph::closed_components(adj, &comps);
    let best = closed
        .into_iter()
        .max_by(|&a, &b| {
            let mass = |ci: usize| -> f64 { comps[ci].iter().map(|&q| weights[q]).sum() };
            mass(a)
                .partial_cmp(&mass(b))
                .unwrap()
                .then_with(|| comps[b][0].cmp(&comps[a][0]))
        })
        .expect("a finite digraph always has a closed component");
    comps[best].clone()
}

/// Infers a machine from `x`. See the module docs for the three steps; the
/// report records every judgment call taken on the way.
pub fn infer(
    x: &SymbolSeq,
    alphabet_size: usize,
    params: &InferParams,
) -> Result<Inferred, InferError> {
    params.check()?;
    check_symbols(x, alphabet_size)?;
    if x.len() < MIN_INPUT_LEN {
        return Err(InferError::InputTooShort {
            len: x.len(),
            min: MIN_INPUT_LEN,
        });
    }
    let sync = select_sync_sequence(x, alphabet_size, params)?;

    // Step two: breadth-first structure discovery seeded by the sync context.
    struct StateInfo {
        ident: Vec<usize>,
        dist: Vec<f64>,
    }
    let seed = empirical_derivative(x, sync.as_slice(), alphabet_size);
    let mut states = vec![StateInfo {
        ident: sync.as_slice().to_vec(),
        dist: seed.dist,
    }];
    let mut edges: Vec<Vec<usize>> = vec![vec![usize::MAX; alphabet_size]];
    let mut queue = VecDeque::from([0usize]);
    let mut low_support_edges = 0usize;
    let mut zero_support_edges = 0usize;
    let mut max_states_hit = false;
    let mut max_match_distance = 0.0f64;

    let closest = |states: &[StateInfo], dist: &[f64]| -> (usize, f64) {
        let mut best = 0;
        let mut best_d = sup_dist(&states[0].dist, dist);
        for (i, s) in states.iter().enumerate().skip(1) {
            let d = sup_dist(&s.dist, dist);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        (best, best_d)
    };

    while let Some(q) = queue.pop_front() {
        for sym in 0..alphabet_size {
            let mut ext = states[q].ident.clone();
            ext.push(sym);
            let deriv = empirical_derivative(x, &ext, alphabet_size);
            let target = if deriv.support_count == 0 {
                zero_support_edges += 1;
                0
            } else if deriv.support_count < params.min_count {
                low_support_edges += 1;
                closest(&states, &deriv.dist).0
            } else {
                let (best_q, best_d) = closest(&states, &deriv.dist);
                if best_d <= params.epsilon {
                    max_match_distance = max_match_distance.max(best_d);
                    best_q
                } else if states.len() < params.max_states {
                    states.push(StateInfo {
                        ident: ext,
                        dist: deriv.dist,
                    });
                    edges.push(vec![usize::MAX; alphabet_size]);
                    queue.push_back(states.len() - 1);
                    states.len() - 1
                } else {
                    max_states_hit = true;
                    best_q
                }
            };
            edges[q][sym] = target;
        }
    }

    // Step three: run the sequence through the full graph, counting
    // transitions from the sync state (no burn-in).
    let n = states.len();
    let mut counts = vec![vec![0u64; alphabet_size]; n];
    let mut cur = 0usize;
    for &sym in x.iter() {
        counts[cur][sym] += 1;
        cur = edges[cur][sym];
    }

    // Keep the closed component where the data actually lives. With smoothing
    // every row has full support, so the whole discovered edge set counts;
    // without smoothing only traversed cells carry data, and states the path
    // never left are pruned (their rows would be fabricated).
    let (members, machine) = if params.smoothing_alpha > 0.0 {
        let weights: Vec<f64> = counts
            .iter()
            .map(|c| c.iter().sum::<u64>() as f64)
            .collect();
        let members = if graph::is_strongly_connected(&edges) {
            (0..n).collect::<Vec<_>>()
        } else {
            scc_terminal(&edges, &weights)
        };
        let remap: BTreeMap<usize, usize> = members
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let alpha = params.smoothing_alpha;
        let records = members
            .iter()
            .map(|&q| {
                let total = counts[q].iter().sum::<u64>() as f64 + alpha * alphabet_size as f64;
                let (probs, next): (Vec<f64>, Vec<Option<usize>>) = (0..alphabet_size)
                    .map(|sym| {
                        let target = remap[&edges[q][sym]];
                        ((counts[q][sym] as f64 + alpha) / total, Some(target))
                    })
                    .unzip();
                StateRecord::new(probs, next)
            })
            .collect();
        (members, Pfsa::new(alphabet_size, records))
    } else {
        // Cells survive while their count is positive and their target is
        // still kept; a state with no surviving cells is dropped and the
        // pruning repeats. The path's cycles always survive.
        let mut kept = vec![true; n];
        loop {
            let mut dropped = false;
            for q in 0..n {
                if kept[q] {
                    let alive =
                        (0..alphabet_size).any(|sym| counts[q][sym] > 0 && kept[edges[q][sym]]);
                    if !alive {
                        kept[q] = false;
                        dropped = true;
                    }
                }
            }
            if !dropped {
                break;
            }
        }
        let pruned: Vec<usize> = (0..n).filter(|&q| kept[q]).collect();
        if pruned.is_empty() {
            return Err(InferError::NoRecurrentStructure);
        }
        let local: BTreeMap<usize, usize> =
            pruned.iter().enumerate().map(|(i, &q)| (q, i)).collect();
        let adj: Vec<Vec<usize>> = pruned
            .iter()
            .map(|&q| {
                (0..alphabet_size)
                    .filter(|&sym| counts[q][sym] > 0 && kept[edges[q][sym]])
                    .map(|sym| local[&edges[q][sym]])
                    .collect()
            })
            .collect();
        let weights: Vec<f64> = pruned
            .iter()
            .map(|&q| counts[q].iter().sum::<u64>() as f64)
            .collect();
        let keep_local = if graph::is_strongly_connected(&adj) {
            (0..pruned.len()).collect::<Vec<_>>()
        } else {
            scc_terminal(&adj, &weights)
        };
        let members: Vec<usize> = keep_local.iter().map(|&i| pruned[i]).collect();
        let remap: BTreeMap<usize, usize> = members
            .iter()
            .enumerate()
            .map(|(new, &old)| (old, new))
            .collect();
        let records = members
            .iter()
            .map(|&q| {
                let total: u64 = (0..alphabet_size)
                    .filter(|&sym| remap.contains_key(&edges[q][sym]))
                    .map(|sym| counts[q][sym])
                    .sum();
                let (probs, next): (Vec<f64>, Vec<Option<usize>>) = (0..alphabet_size)
                    .map(|sym| {
                        let target = remap.get(&edges[q][sym]).copied();
                        match target {
                            Some(t) if counts[q][sym] > 0 => {
                                (counts[q][sym] as f64 / total as f64, Some(t))
                            }
                            _ => (0.0, None),
                        }
                    })
                    .unzip();
                StateRecord::new(probs, next)
            })
            .collect();
        (members, Pfsa::new(alphabet_size, records))
    };

    debug_assert!(machine.is_valid(), "inferred machine failed validation");
    let visit_counts: Vec<u64> = members.iter().map(|&q| counts[q].iter().sum()).collect();
    let comps = graph::sccs(&edges);
    let closed_scc_count = graph::closed_components(&edges, &comps).len();

    let report = InferReport {
        state_count: machine.num_states(),
        visit_counts,
        low_support_edges,
        zero_support_edges,
        max_states_hit,
        max_match_distance,
        closed_scc_count,
        sync_sequence: sync,
    };
    Ok(Inferred { machine, report })
}
