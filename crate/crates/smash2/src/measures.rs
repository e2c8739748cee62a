//! Information measures for PFSA processes, all in bits.
//!
//! The entropy rate of a machine is the stationary-weighted entropy of its
//! observation rows. The divergence of one machine from another is the
//! expected row-to-row divergence under the joint pair-state distribution
//! reached when a path from the first machine drives both transition maps.
//! Per-symbol negative log-likelihood of a sequence under a machine converges
//! to entropy rate plus divergence, which is what the distance metric in
//! [`crate::metric`] is built on.

use thiserror::Error;

use crate::pfsa::{Pfsa, PfsaError, StateDist, SymbolSeq};

/// Probability floor for the streaming filter. The filter clamps a vanishing
/// step probability to this value and resets, so log-likelihoods stay finite
/// on machines with structural zeros; clamp events are surfaced to callers.
pub const PROB_FLOOR: f64 = 1e-12;

const JOINT_TOL: f64 = 1e-10;
const JOINT_MAX_ITERS: usize = 500_000;

#[derive(Debug, Error)]
pub enum MeasureError {
    #[error("log-likelihood needs a nonempty sequence")]
    EmptySequence,
    #[error("symbol {symbol} >= alphabet size {alphabet_size}")]
    SymbolOutOfRange { symbol: usize, alphabet_size: usize },
    #[error("machines have different alphabet sizes ({0} vs {1})")]
    AlphabetMismatch(usize, usize),
    #[error("joint chain did not converge within {0} iterations")]
    NoConvergence(usize),
    #[error(transparent)]
    Pfsa(#[from] PfsaError),
}

fn entropy_bits(row: &[f64]) -> f64 {
    row.iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

fn kl_bits(p: &[f64], q: &[f64]) -> f64 {
    p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi > 0.0)
        .map(|(&pi, &qi)| pi * (pi / qi).log2())
        .sum()
}

/// Entropy rate in bits per symbol: the stationary-weighted entropy of the
/// observation rows. Always within `[0, log2(alphabet_size)]`.
pub fn entropy_rate(m: &Pfsa) -> Result<f64, MeasureError> {
    let stat = m.stationary_distribution()?;
    Ok(stat
        .probs()
        .iter()
        .enumerate()
        .map(|(q, &p)| p * entropy_bits(m.obs_row(q)))
        .sum())
}

/// Stationary distribution over pairs `(q, q')` of states of `g` and `h` when
/// a `g`-generated path drives both transition maps.
#[derive(Debug, Clone)]
pub struct JointDist {
    g_states: usize,
    h_states: usize,
    probs: Vec<f64>,
    /// Number of `(pair, symbol)` kernel entries where `h` cannot consume a
    /// symbol `g` emits; their mass is respread over `h`'s stationary
    /// distribution, mirroring the filter reset.
    pub undefined_transitions: usize,
}

impl JointDist {
    pub fn prob(&self, g_state: usize, h_state: usize) -> f64 {
        self.probs[g_state * self.h_states + h_state]
    }

    pub fn g_states(&self) -> usize {
        self.g_states
    }

    pub fn h_states(&self) -> usize {
        self.h_states
    }

    /// Marginal over `h`'s states; equals `g`'s stationary distribution.
    pub fn g_marginal(&self) -> Vec<f64> {
        (0..self.g_states)
            .map(|i| (0..self.h_states).map(|j| self.prob(i, j)).sum())
            .collect()
    }
}

/// Computes the joint pair-state distribution by power iteration on the
/// half-lazy kernel from `p_g (x) uniform`. The plain kernel can be periodic
/// or have several closed classes, so the raw iterates need not settle; the
/// lazy average shares the limit and converges geometrically.
pub fn joint_stationary(g: &Pfsa, h: &Pfsa) -> Result<JointDist, MeasureError> {
    if g.alphabet_size() != h.alphabet_size() {
        return Err(MeasureError::AlphabetMismatch(
            g.alphabet_size(),
            h.alphabet_size(),
        ));
    }
    let ng = g.num_states();
    let nh = h.num_states();
    let stat_g = g.stationary_distribution()?;
    let stat_h = h.stationary_distribution()?;

    let mut p = vec![0.0; ng * nh];
    for i in 0..ng {
        for j in 0..nh {
            p[i * nh + j] = stat_g.probs()[i] / nh as f64;
        }
    }

    let mut undefined = 0usize;
    let step = |p: &[f64], count: bool, undefined: &mut usize| -> Vec<f64> {
        let mut out = vec![0.0; ng * nh];
        for i in 0..ng {
            for j in 0..nh {
                let mass = p[i * nh + j];
                if mass == 0.0 {
                    continue;
                }
                for sym in 0..g.alphabet_size() {
                    let w = g.obs_prob(i, sym);
                    if w == 0.0 {
                        continue;
                    }
                    let gi = g.next(i, sym).expect("valid machine");
                    match h.next(j, sym) {
                        Some(hj) => out[gi * nh + hj] += mass * w,
                        None => {
                            // h cannot follow this symbol: reset its component.
                            if count {
                                *undefined += 1;
                            }
                            for (hj, &ph) in stat_h.probs().iter().enumerate() {
                                out[gi * nh + hj] += mass * w * ph;
                            }
                        }
                    }
                }
            }
        }
        out
    };

    let mut converged = false;
    for iter in 0..JOINT_MAX_ITERS {
        let stepped = step(&p, iter == 0, &mut undefined);
        let resid = p
            .iter()
            .zip(&stepped)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if resid <= JOINT_TOL {
            converged = true;
            break;
        }
        let mut nextp: Vec<f64> = p.iter().zip(&stepped).map(|(a, b)| 0.5 * (a + b)).collect();
        let sum: f64 = nextp.iter().sum();
        for v in &mut nextp {
            *v /= sum;
        }
        p = nextp;
    }
    if !converged {
        return Err(MeasureError::NoConvergence(JOINT_MAX_ITERS));
    }
    Ok(JointDist {
        g_states: ng,
        h_states: nh,
        probs: p,
        undefined_transitions: undefined,
    })
}

/// Divergence of `h` from `g` in bits per symbol, plus the degenerate-path
/// bookkeeping callers use to judge whether the value is trustworthy.
#[derive(Debug, Clone, Copy)]
pub struct KlDivergence {
    pub bits: f64,
    /// Pairs whose `h` row needed flooring because `g` emits a symbol the row
    /// forbids; nonzero smoothing means the true divergence is infinite.
    pub smoothed_pairs: usize,
    /// Joint-kernel entries where `h`'s transition was undefined.
    pub undefined_transitions: usize,
}

/// Closed-form divergence: the joint-pair-weighted divergence between the
/// machines' observation rows. Nonnegative, and zero when both machines
/// generate identical finite-dimensional distributions.
pub fn kl_divergence(g: &Pfsa, h: &Pfsa) -> Result<KlDivergence, MeasureError> {
    let joint = joint_stationary(g, h)?;
    let mut bits = 0.0;
    let mut smoothed_pairs = 0usize;
    for i in 0..g.num_states() {
        for j in 0..h.num_states() {
            let mass = joint.prob(i, j);
            if mass <= 1e-15 {
                continue;
            }
            let grow = g.obs_row(i);
            let hrow = h.obs_row(j);
            let needs_floor = grow
                .iter()
                .zip(hrow)
                .any(|(&pg, &ph)| pg > 0.0 && ph == 0.0);
            if needs_floor {
                smoothed_pairs += 1;
                let mut floored: Vec<f64> = hrow.iter().map(|&p| p.max(PROB_FLOOR)).collect();
                let sum: f64 = floored.iter().sum();
                for v in &mut floored {
                    *v /= sum;
                }
                bits += mass * kl_bits(grow, &floored);
            } else {
                bits += mass * kl_bits(grow, hrow);
            }
        }
    }
    Ok(KlDivergence {
        bits,
        smoothed_pairs,
        undefined_transitions: joint.undefined_transitions,
    })
}

/// One step of the state-distribution filter.
#[derive(Debug, Clone)]
pub struct FilterStep {
    pub dist: StateDist,
    pub step_prob: f64,
    /// True when the step probability fell below [`PROB_FLOOR`]; the
    /// probability was clamped and the distribution reset to stationary.
    pub clamped: bool,
}

/// Advances the distribution over states after observing one symbol and
/// returns the probability of that symbol under the current distribution.
pub fn filter_update(m: &Pfsa, p: &StateDist, symbol: usize) -> FilterStep {
    let n = m.num_states();
    let mut step_prob = 0.0;
    let mut out = vec![0.0; n];
    for (q, &mass) in p.probs().iter().enumerate() {
        if mass == 0.0 {
            continue;
        }
        let w = m.obs_prob(q, symbol);
        if w > 0.0 {
            let t = m.next(q, symbol).expect("valid machine");
            out[t] += mass * w;
            step_prob += mass * w;
        }
    }
    if step_prob < PROB_FLOOR {
        let stationary = m
            .stationary_distribution()
            .unwrap_or_else(|_| StateDist::uniform(n));
        return FilterStep {
            dist: stationary,
            step_prob: PROB_FLOOR,
            clamped: true,
        };
    }
    for v in &mut out {
        *v /= step_prob;
    }
    FilterStep {
        dist: StateDist::from_raw(out),
        step_prob,
        clamped: false,
    }
}

/// Exact probability of the machine generating `x` from its stationary start.
/// The empty sequence has probability one; a symbol the machine cannot emit
/// anywhere yields exactly zero (no clamping here).
pub fn seq_probability(m: &Pfsa, x: &SymbolSeq) -> Result<f64, MeasureError> {
    for &sym in x.iter() {
        if sym >= m.alphabet_size() {
            return Err(MeasureError::SymbolOutOfRange {
                symbol: sym,
                alphabet_size: m.alphabet_size(),
            });
        }
    }
    let n = m.num_states();
    let stat = m.stationary_distribution()?;
    let mut p = stat.probs().to_vec();
    let mut prob = 1.0;
    for &sym in x.iter() {
        let mut step = 0.0;
        let mut out = vec![0.0; n];
        for (q, &mass) in p.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            let w = m.obs_prob(q, sym);
            if w > 0.0 {
                out[m.next(q, sym).expect("valid machine")] += mass * w;
                step += mass * w;
            }
        }
        if step == 0.0 {
            return Ok(0.0);
        }
        prob *= step;
        for v in &mut out {
            *v /= step;
        }
        p = out;
    }
    Ok(prob)
}

/// Per-symbol negative log-probability of `x` under `m`, in bits.
#[derive(Debug, Clone, Copy)]
pub struct LogLikelihood {
    pub bits: f64,
    /// Number of filter resets; zero on full-support machines. A nonzero
    /// count means the score leaned on the probability floor.
    pub clamp_events: usize,
}

/// Streaming log-likelihood: runs the filter from the stationary distribution
/// and averages `-log2` of the per-step probabilities. Clamping keeps the
/// result finite even when the machine forbids an observed symbol.
pub fn log_likelihood(x: &SymbolSeq, m: &Pfsa) -> Result<LogLikelihood, MeasureError> {
    if x.is_empty() {
        return Err(MeasureError::EmptySequence);
    }
    for &sym in x.iter() {
        if sym >= m.alphabet_size() {
            return Err(MeasureError::SymbolOutOfRange {
                symbol: sym,
                alphabet_size: m.alphabet_size(),
            });
        }
    }
    let mut p = m.stationary_distribution()?;
    let mut log_sum = 0.0;
    let mut clamp_events = 0usize;
    for &sym in x.iter() {
        let step = filter_update(m, &p, sym);
        log_sum += step.step_prob.log2();
        if step.clamped {
            clamp_events += 1;
        }
        p = step.dist;
    }
    Ok(LogLikelihood {
        bits: -log_sum / x.len() as f64,
        clamp_events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pfsa::testutil::*;
    use crate::pfsa::{Pfsa, Start, StateDist, StateRecord};
    use proptest::prelude::*;

    #[test]
    fn entropy_rate_of_reference_machines() {
        assert!((entropy_rate(&machine_g()).unwrap() - 0.9710).abs() < 5e-4);
        assert!((entropy_rate(&machine_h()).unwrap() - 0.8069).abs() < 5e-4);
    }

    #[test]
    fn entropy_rate_of_fair_coin_is_exactly_one() {
        assert_eq!(entropy_rate(&fair_coin()).unwrap(), 1.0);
    }

    #[test]
    fn joint_of_identical_machines_sits_on_diagonal() {
        let g = machine_g();
        let joint = joint_stationary(&g, &g).unwrap();
        assert!((joint.prob(0, 0) - 0.5).abs() < 1e-9);
        assert!((joint.prob(1, 1) - 0.5).abs() < 1e-9);
        assert!(joint.prob(0, 1).abs() < 1e-9);
        assert!(joint.prob(1, 0).abs() < 1e-9);
    }

    #[test]
    fn joint_marginal_recovers_driver_stationary() {
        let joint = joint_stationary(&machine_g(), &machine_h()).unwrap();
        let marginal = joint.g_marginal();
        assert!((marginal[0] - 0.5).abs() < 1e-9);
        assert!((marginal[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn joint_of_single_state_machines() {
        let coin = fair_coin();
        let joint = joint_stationary(&coin, &coin).unwrap();
        assert!((joint.prob(0, 0) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn kl_between_reference_machines() {
        let gh = kl_divergence(&machine_g(), &machine_h()).unwrap();
        let hg = kl_divergence(&machine_h(), &machine_g()).unwrap();
        assert!((gh.bits - 0.2266).abs() < 5e-4, "{}", gh.bits);
        assert!((hg.bits - 0.2030).abs() < 5e-4, "{}", hg.bits);
        assert_eq!(gh.smoothed_pairs, 0);
    }

    #[test]
    fn kl_self_divergence_is_zero() {
        let g = machine_g();
        let d = kl_divergence(&g, &g).unwrap();
        assert!(d.bits.abs() < 1e-9, "{}", d.bits);
    }

    #[test]
    fn kl_relabeled_copy_is_zero() {
        let g = machine_g();
        // Swap the two states of g.
        let relabeled = Pfsa::checked(
            2,
            vec![
                StateRecord::full(vec![0.4, 0.6], vec![1, 0]),
                StateRecord::full(vec![0.6, 0.4], vec![1, 0]),
            ],
        )
        .unwrap();
        let d = kl_divergence(&g, &relabeled).unwrap();
        assert!(d.bits.abs() < 1e-9, "{}", d.bits);
    }

    #[test]
    fn kl_smooths_forbidden_symbols() {
        // Deterministic alternator forbids repeating a symbol.
        let alternator = Pfsa::checked(
            2,
            vec![
                StateRecord::new(vec![0.0, 1.0], vec![None, Some(1)]),
                StateRecord::new(vec![1.0, 0.0], vec![Some(0), None]),
            ],
        )
        .unwrap();
        let d = kl_divergence(&machine_g(), &alternator).unwrap();
        assert!(d.smoothed_pairs > 0);
        assert!(d.undefined_transitions > 0);
        assert!(d.bits.is_finite() && d.bits > 0.0);
    }

    #[test]
    fn seq_probability_matches_hand_values() {
        let g = machine_g();
        let p0 = seq_probability(&g, &SymbolSeq::from_digits("0").unwrap()).unwrap();
        assert!((p0 - 0.5).abs() < 1e-12);
        let p00 = seq_probability(&g, &SymbolSeq::from_digits("00").unwrap()).unwrap();
        assert!((p00 - 0.3).abs() < 1e-12);
        let empty = seq_probability(&g, &SymbolSeq::empty()).unwrap();
        assert_eq!(empty, 1.0);
    }

    fn assert_normalized(m: &Pfsa, max_len: usize) {
        let k = m.alphabet_size();
        for d in 1..=max_len {
            let mut total = 0.0;
            let mut x = vec![0usize; d];
            loop {
                total += seq_probability(m, &SymbolSeq::new(x.clone())).unwrap();
                // Odometer increment over the alphabet.
                let mut pos = d;
                loop {
                    if pos == 0 {
                        break;
                    }
                    pos -= 1;
                    x[pos] += 1;
                    if x[pos] < k {
                        break;
                    }
                    x[pos] = 0;
                }
                if x.iter().all(|&s| s == 0) {
                    break;
                }
            }
            assert!((total - 1.0).abs() < 1e-9, "d={d}: total={total}");
        }
    }

    #[test]
    fn seq_probability_normalizes_for_reference_machines() {
        assert_normalized(&machine_g(), 10);
        assert_normalized(&machine_h(), 10);
    }

    #[test]
    fn filter_update_hand_steps() {
        let g = machine_g();
        let start = g.stationary_distribution().unwrap();
        let step = filter_update(&g, &start, 0);
        assert!((step.step_prob - 0.5).abs() < 1e-12);
        assert!((step.dist.probs()[0] - 1.0).abs() < 1e-12);
        assert!(step.dist.probs()[1].abs() < 1e-12);

        let from_q0 = filter_update(&g, &StateDist::point(2, 0), 1);
        assert!((from_q0.step_prob - 0.4).abs() < 1e-12);
        assert_eq!(from_q0.dist.probs(), &[0.0, 1.0]);
    }

    #[test]
    fn filter_update_single_state_machine() {
        let coin = fair_coin();
        let step = filter_update(&coin, &StateDist::point(1, 0), 1);
        assert_eq!(step.dist.probs(), &[1.0]);
        assert!((step.step_prob - 0.5).abs() < 1e-12);
    }

    #[test]
    fn filter_update_clamps_impossible_symbol() {
        let alternator = Pfsa::checked(
            2,
            vec![
                StateRecord::new(vec![0.0, 1.0], vec![None, Some(1)]),
                StateRecord::new(vec![1.0, 0.0], vec![Some(0), None]),
            ],
        )
        .unwrap();
        let step = filter_update(&alternator, &StateDist::point(2, 0), 0);
        assert!(step.clamped);
        assert_eq!(step.step_prob, PROB_FLOOR);
    }

    #[test]
    fn log_likelihood_hand_values() {
        let g = machine_g();
        let l1 = log_likelihood(&SymbolSeq::from_digits("0").unwrap(), &g).unwrap();
        assert!((l1.bits - 1.0).abs() < 1e-12);
        let l2 = log_likelihood(&SymbolSeq::from_digits("00").unwrap(), &g).unwrap();
        let expect = -(0.5f64.log2() + 0.6f64.log2()) / 2.0;
        assert!((l2.bits - expect).abs() < 1e-12);
        assert_eq!(l2.clamp_events, 0);
        assert!(log_likelihood(&SymbolSeq::empty(), &g).is_err());
    }

    #[test]
    fn log_likelihood_converges_to_entropy_rate() {
        let g = machine_g();
        let x = g.sample(50_000, 11, Start::Stationary).unwrap();
        let l = log_likelihood(&x, &g).unwrap();
        let h = entropy_rate(&g).unwrap();
        assert!((l.bits - h).abs() <= 0.02, "{} vs {}", l.bits, h);
    }

    #[test]
    fn minimize_preserves_sequence_probabilities() {
        let dup = duplicated_g();
        let min = dup.minimize();
        let g = machine_g();
        for d in 0..=8usize {
            for code in 0..(1usize << d) {
                let x: Vec<usize> = (0..d).map(|i| (code >> i) & 1).collect();
                let seq = SymbolSeq::new(x);
                let a = seq_probability(&dup, &seq).unwrap();
                let b = seq_probability(&min, &seq).unwrap();
                let c = seq_probability(&g, &seq).unwrap();
                assert!((a - b).abs() < 1e-9);
                assert!((b - c).abs() < 1e-9);
            }
        }
    }

    proptest! {
        #[test]
        fn prop_entropy_rate_within_bounds(m in crate::pfsa::testutil::arb_pfsa(6, 3)) {
            let h = entropy_rate(&m).unwrap();
            prop_assert!(h >= 0.0);
            prop_assert!(h <= (m.alphabet_size() as f64).log2() + 1e-12);
        }

        #[test]
        fn prop_kl_nonnegative(g in crate::pfsa::testutil::arb_pfsa(4, 2), h in crate::pfsa::testutil::arb_pfsa(4, 2)) {
            let d = kl_divergence(&g, &h).unwrap();
            prop_assert!(d.bits >= -1e-12);
        }

        #[test]
        fn prop_sequence_probabilities_normalize(m in crate::pfsa::testutil::arb_pfsa(4, 2)) {
            assert_normalized(&m, 10);
        }

        #[test]
        fn prop_log_likelihood_matches_seq_probability(
            m in crate::pfsa::testutil::arb_pfsa(4, 2),
            x in proptest::collection::vec(0usize..2, 1..24),
        ) {
            let seq = SymbolSeq::new(x);
            let l = log_likelihood(&seq, &m).unwrap();
            prop_assert_eq!(l.clamp_events, 0);
            let p = seq_probability(&m, &seq).unwrap();
            let direct = -p.log2() / seq.len() as f64;
            prop_assert!((l.bits - direct).abs() < 1e-9);
        }

        #[test]
        fn prop_minimize_preserves_short_sequence_probs(m in crate::pfsa::testutil::arb_pfsa(6, 2)) {
            let min = m.minimize();
            for d in 0..=8usize {
                for code in 0..(1usize << d) {
                    let x: Vec<usize> = (0..d).map(|i| (code >> i) & 1).collect();
                    let seq = SymbolSeq::new(x);
                    let a = seq_probability(&m, &seq).unwrap();
                    let b = seq_probability(&min, &seq).unwrap();
                    prop_assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }
}
