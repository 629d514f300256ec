//! Stable matchings: Gale-Shapley with round traces, the blocking-pair
//! test, and brute-force enumeration over all pairings.
//!
//! One Gale-Shapley round is a simultaneous proposal phase (every unengaged
//! proposer acts) followed by a simultaneous review phase (every reviewer
//! keeps the best of her current partner and the new proposals). Sequential
//! proposal processing would produce different round counts.

use std::fmt;

use itertools::Itertools;
use thiserror::Error;

use crate::profiles::{PreferenceProfile, Rank, Side};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MatchingError {
    #[error("pairing must be a permutation of 0..{n}")]
    NotBijection { n: usize },
    #[error("pairing size {got} does not match instance size {n}")]
    WrongSize { n: usize, got: usize },
    #[error("exhaustive enumeration is limited to n <= {max}, got n = {n}")]
    TooLarge { n: usize, max: usize },
    #[error("profile is not joint, so uniform matchings are undefined")]
    NotJoint,
}

/// Upper bound on proposable instance sizes for `n!`-pairing enumeration.
pub const ENUMERATION_MAX_N: usize = 8;

/// A bijection man -> woman with per-couple egalitarian costs.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matching {
    pairing: Vec<usize>,
    per_couple_costs: Vec<u32>,
}

impl Matching {
    pub fn new(profile: &PreferenceProfile, pairing: Vec<usize>) -> Result<Self, MatchingError> {
        let n = profile.n();
        if pairing.len() != n {
            return Err(MatchingError::WrongSize {
                n,
                got: pairing.len(),
            });
        }
        let mut seen = vec![false; n];
        for &w in &pairing {
            if w >= n || std::mem::replace(&mut seen[w], true) {
                return Err(MatchingError::NotBijection { n });
            }
        }
        let per_couple_costs = pairing
            .iter()
            .enumerate()
            .map(|(m, &w)| profile.pair_cost(m, w))
            .collect();
        Ok(Matching {
            pairing,
            per_couple_costs,
        })
    }

    pub fn n(&self) -> usize {
        self.pairing.len()
    }

    /// Woman married to man `m`.
    pub fn woman_of(&self, m: usize) -> usize {
        self.pairing[m]
    }

    /// Man married to woman `w`.
    pub fn man_of(&self, w: usize) -> usize {
        self.pairing.iter().position(|&x| x == w).expect("bijection")
    }

    pub fn pairing(&self) -> &[usize] {
        &self.pairing
    }

    pub fn per_couple_costs(&self) -> &[u32] {
        &self.per_couple_costs
    }

    pub fn total_cost(&self) -> u32 {
        self.per_couple_costs.iter().sum()
    }

    /// The distinct mutual rankings among the couples, sorted.
    pub fn rank_pairs(&self, profile: &PreferenceProfile) -> Vec<(Rank, Rank)> {
        self.pairing
            .iter()
            .enumerate()
            .map(|(m, &w)| profile.mutual_ranks(m, w))
            .sorted()
            .dedup()
            .collect()
    }
}

impl fmt::Display for Matching {
    /// 1-based `(m,w)` pairs in man order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}",
            self.pairing
                .iter()
                .enumerate()
                .map(|(m, &w)| format!("({},{})", m + 1, w + 1))
                .join(" ")
        )
    }
}

/// A man and a woman who both strictly prefer each other to their partners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct BlockingPair {
    pub man: usize,
    pub woman: usize,
}

/// All blocking pairs of `matching`, sorted by (man, woman). Empty iff stable.
pub fn blocking_pairs(profile: &PreferenceProfile, matching: &Matching) -> Vec<BlockingPair> {
    let n = profile.n();
    let husband_of: Vec<usize> = (0..n).map(|w| matching.man_of(w)).collect();
    let mut pairs = Vec::new();
    for m in 0..n {
        let his = profile.men_rank(m, matching.woman_of(m));
        for w in 0..n {
            if matching.woman_of(m) == w {
                continue;
            }
            let hers = profile.women_rank(w, husband_of[w]);
            if profile.men_rank(m, w) < his && profile.women_rank(w, m) < hers {
                pairs.push(BlockingPair { man: m, woman: w });
            }
        }
    }
    pairs
}

pub fn is_stable(profile: &PreferenceProfile, matching: &Matching) -> bool {
    blocking_pairs(profile, matching).is_empty()
}

/// What happened to one proposer in one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RoundState {
    /// Engaged at the end of the round (target = partner).
    Engaged,
    /// Proposed or was dumped this round and ended it unengaged.
    RejectedThisRound,
    /// Proposed this round (accessor-only state; see [`GsRound::state_of`]).
    Proposing,
    Idle,
}

/// One simultaneous round: who proposed where, the engagement set at the end
/// of the round, and who ended the round freshly rejected. All indices are
/// proposer-side first, reviewer-side second.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsRound {
    pub proposals: Vec<(usize, usize)>,
    pub engaged: Vec<(usize, usize)>,
    pub rejected: Vec<(usize, usize)>,
}

impl GsRound {
    /// End-of-round state of proposer `p` and their current target.
    pub fn state_of(&self, p: usize) -> (RoundState, Option<usize>) {
        if let Some(&(_, q)) = self.engaged.iter().find(|&&(x, _)| x == p) {
            return (RoundState::Engaged, Some(q));
        }
        if let Some(&(_, q)) = self.rejected.iter().find(|&&(x, _)| x == p) {
            return (RoundState::RejectedThisRound, Some(q));
        }
        if let Some(&(_, q)) = self.proposals.iter().find(|&&(x, _)| x == p) {
            return (RoundState::Proposing, Some(q));
        }
        (RoundState::Idle, None)
    }
}

/// A full deferred-acceptance run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GsTrace {
    proposing_side: Side,
    rounds: Vec<GsRound>,
    matching: Matching,
}

impl GsTrace {
    pub fn proposing_side(&self) -> Side {
        self.proposing_side
    }

    pub fn rounds(&self) -> &[GsRound] {
        &self.rounds
    }

    /// Final matching, always keyed man -> woman.
    pub fn matching(&self) -> &Matching {
        &self.matching
    }

    /// The classical bound `n^2 - n + 1` on the number of rounds.
    pub fn round_bound(n: usize) -> usize {
        n * n - n + 1
    }

    pub fn within_round_bound(&self) -> bool {
        self.rounds.len() <= Self::round_bound(self.matching.n())
    }

    /// Stable text rendering: one line per round,
    /// `round <k>: proposals p->q ...; engaged (m,w) ...; rejected p ...`.
    ///
    /// Indices are 1-based. Proposals and rejections use proposer-first
    /// order (`w->m` when women propose); engaged pairs are always `(m,w)`.
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (k, round) in self.rounds.iter().enumerate() {
            let proposals = round
                .proposals
                .iter()
                .map(|(p, q)| format!("{}->{}", p + 1, q + 1))
                .join(" ");
            let engaged = round
                .engaged
                .iter()
                .map(|&(p, q)| {
                    let (m, w) = match self.proposing_side {
                        Side::Men => (p, q),
                        Side::Women => (q, p),
                    };
                    format!("({},{})", m + 1, w + 1)
                })
                .join(" ");
            let rejected = round.rejected.iter().map(|(p, _)| (p + 1).to_string()).join(" ");
            out.push_str(&format!("round {}: proposals {proposals}", k + 1));
            out.push_str(&format!("; engaged {engaged}"));
            out.push_str("; rejected");
            if !rejected.is_empty() {
                out.push(' ');
                out.push_str(&rejected);
            }
            out.push('\n');
        }
        out
    }
}

/// Runs deferred acceptance with the given side proposing.
///
/// The men-proposing run is man-optimal and woman-pessimal; mirrored for
/// women. Proposers are iterated in ascending index, which fixes the trace
/// layout but never the outcome.
pub fn gale_shapley(profile: &PreferenceProfile, proposing_side: Side) -> GsTrace {
    let n = profile.n();
    let proposer_rank = |p: usize, q: usize| match proposing_side {
        Side::Men => profile.men_rank(p, q),
        Side::Women => profile.women_rank(p, q),
    };
    let reviewer_rank = |q: usize, p: usize| match proposing_side {
        Side::Men => profile.women_rank(q, p),
        Side::Women => profile.men_rank(q, p),
    };

    // Preference lists: reviewers in ascending rank order per proposer.
    let pref: Vec<Vec<usize>> = (0..n)
        .map(|p| {
            (0..n)
                .sorted_by_key(|&q| proposer_rank(p, q))
                .collect::<Vec<_>>()
        })
        .collect();
    let mut next = vec![0usize; n];
    let mut fiance_of_reviewer: Vec<Option<usize>> = vec![None; n];
    let mut fiance_of_proposer: Vec<Option<usize>> = vec![None; n];
    let mut rounds = Vec::new();

    loop {
        let free: Vec<usize> = (0..n).filter(|&p| fiance_of_proposer[p].is_none()).collect();
        if free.is_empty() {
            break;
        }
        let mut proposals = Vec::with_capacity(free.len());
        for &p in &free {
            let q = pref[p][next[p]];
            next[p] += 1;
            proposals.push((p, q));
        }

        let mut rejected = Vec::new();
        for q in 0..n {
            let suitors: Vec<usize> = proposals
                .iter()
                .filter(|&&(_, to)| to == q)
                .map(|&(p, _)| p)
                .collect();
            if suitors.is_empty() {
                continue;
            }
            let mut best = fiance_of_reviewer[q];
            for &p in &suitors {
                match best {
                    None => best = Some(p),
                    Some(cur) if reviewer_rank(q, p) < reviewer_rank(q, cur) => {
                        best = Some(p);
                    }
                    Some(_) => {}
                }
            }
            let winner = best.expect("at least one suitor");
            if let Some(old) = fiance_of_reviewer[q] {
                if old != winner {
                    fiance_of_proposer[old] = None;
                    rejected.push((old, q));
                }
            }
            fiance_of_reviewer[q] = Some(winner);
            fiance_of_proposer[winner] = Some(q);
            for &p in &suitors {
                if p != winner {
                    rejected.push((p, q));
                }
            }
        }

        rejected.sort_unstable();
        let engaged: Vec<(usize, usize)> = (0..n)
            .filter_map(|p| fiance_of_proposer[p].map(|q| (p, q)))
            .collect();
        rounds.push(GsRound {
            proposals,
            engaged,
            rejected,
        });
    }

    let pairing: Vec<usize> = match proposing_side {
        Side::Men => (0..n).map(|m| fiance_of_proposer[m].expect("engaged")).collect(),
        Side::Women => {
            let mut pairing = vec![0; n];
            for w in 0..n {
                pairing[fiance_of_proposer[w].expect("engaged")] = w;
            }
            pairing
        }
    };
    let matching = Matching::new(profile, pairing).expect("GS yields a bijection");
    GsTrace {
        proposing_side,
        rounds,
        matching,
    }
}

/// Every stable matching, by brute force over all `n!` pairings, sorted
/// lexicographically by pairing. Guarded to `n <= 8`.
pub fn enumerate_stable_matchings(
    profile: &PreferenceProfile,
) -> Result<Vec<Matching>, MatchingError> {
    let n = profile.n();
    if n > ENUMERATION_MAX_N {
        return Err(MatchingError::TooLarge {
            n,
            max: ENUMERATION_MAX_N,
        });
    }
    let matchings = (0..n)
        .permutations(n)
        .filter_map(|pairing| {
            let m = Matching::new(profile, pairing).expect("permutation");
            is_stable(profile, &m).then_some(m)
        })
        .collect();
    Ok(matchings)
}

/// A stable matching minimizing total egalitarian cost; ties broken by the
/// lexicographically smallest pairing.
pub fn egalitarian_matching(profile: &PreferenceProfile) -> Result<Matching, MatchingError> {
    let all = enumerate_stable_matchings(profile)?;
    Ok(all
        .into_iter()
        .min_by_key(|m| (m.total_cost(), m.pairing().to_vec()))
        .expect("deferred acceptance guarantees at least one stable matching"))
}

/// Entry `(m, w)` is true iff some stable matching pairs them.
pub fn valid_partners(profile: &PreferenceProfile) -> Result<Vec<Vec<bool>>, MatchingError> {
    let n = profile.n();
    let mut table = vec![vec![false; n]; n];
    for m in enumerate_stable_matchings(profile)? {
        for man in 0..n {
            table[man][m.woman_of(man)] = true;
        }
    }
    Ok(table)
}

/// The matching marrying every couple with mutual ranking `(i, j)`, which
/// exists in a joint profile exactly when `j = f(i)`. Returns `Ok(None)`
/// for rankings the key does not realize.
pub fn uniform_matching(
    profile: &PreferenceProfile,
    ranking: (Rank, Rank),
) -> Result<Option<Matching>, MatchingError> {
    let key = profile.extract_key().ok_or(MatchingError::NotJoint)?;
    let (i, j) = ranking;
    if i < 1 || i as usize > profile.n() || key.apply(i) != j {
        return Ok(None);
    }
    let n = profile.n();
    let mut pairing = vec![0; n];
    for w in 0..n {
        let m = (0..n)
            .find(|&m| profile.women_rank(w, m) == i)
            .expect("women's matrix is Latin in a joint profile");
        pairing[m] = w;
    }
    Ok(Some(Matching::new(profile, pairing).expect("bijection")))
}

/// Stability of the uniform matching at ranking `(i, f(i))`, decided from
/// the key alone: unstable iff some `k < i` has `f(k) < f(i)`.
pub fn uniform_stable_by_key(key: &crate::profiles::KeyFunction, i: Rank) -> bool {
    let j = key.apply(i);
    !(1..i).any(|k| key.apply(k) < j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::profiles::KeyFunction;

    fn two_couples() -> PreferenceProfile {
        PreferenceProfile::new(vec![vec![1, 2], vec![2, 1]], vec![vec![2, 1], vec![2, 1]])
            .unwrap()
    }

    #[test]
    fn gs_two_couples_single_round() {
        let p = two_couples();
        let trace = gale_shapley(&p, Side::Men);
        assert_eq!(trace.rounds().len(), 1);
        assert_eq!(trace.matching().pairing(), &[0, 1]);
    }

    #[test]
    fn gs_walkthrough_reaches_identity_in_four_rounds() {
        let p = catalog::gs_walkthrough_profile();
        let trace = gale_shapley(&p, Side::Men);
        assert_eq!(trace.rounds().len(), 4);
        assert_eq!(trace.matching().pairing(), &[0, 1, 2, 3]);
        assert!(trace.within_round_bound());
    }

    #[test]
    fn gs_walkthrough_trace_renders_exactly() {
        let p = catalog::gs_walkthrough_profile();
        let trace = gale_shapley(&p, Side::Men);
        let expected = "\
round 1: proposals 1->1 2->1 3->1 4->2; engaged (1,1) (4,2); rejected 2 3
round 2: proposals 2->2 3->2; engaged (1,1) (2,2); rejected 3 4
round 3: proposals 3->3 4->3; engaged (1,1) (2,2) (3,3); rejected 4
round 4: proposals 4->4; engaged (1,1) (2,2) (3,3) (4,4); rejected
";
        assert_eq!(trace.render(), expected);
    }

    #[test]
    fn round_states_from_lists() {
        let p = catalog::gs_walkthrough_profile();
        let trace = gale_shapley(&p, Side::Men);
        let r1 = &trace.rounds()[0];
        assert_eq!(r1.state_of(0), (RoundState::Engaged, Some(0)));
        assert_eq!(r1.state_of(1), (RoundState::RejectedThisRound, Some(0)));
        let r2 = &trace.rounds()[1];
        // Man 4 was dumped in round 2 by woman 2.
        assert_eq!(r2.state_of(3), (RoundState::RejectedThisRound, Some(1)));
    }

    #[test]
    fn mirror_profile_matches_soulmates_in_one_round() {
        for n in 1..=4 {
            let p = PreferenceProfile::from_key(&KeyFunction::identity(n));
            for side in [Side::Men, Side::Women] {
                let trace = gale_shapley(&p, side);
                assert_eq!(trace.rounds().len(), 1);
                assert_eq!(trace.matching().total_cost(), 2 * n as u32);
            }
        }
    }

    #[test]
    fn gs_output_has_no_blocking_pairs() {
        let p = catalog::gs_walkthrough_profile();
        for side in [Side::Men, Side::Women] {
            let trace = gale_shapley(&p, side);
            assert!(blocking_pairs(&p, trace.matching()).is_empty());
        }
    }

    #[test]
    fn two_hell_couples_block_each_other() {
        // Both couples of the identity matching rank each other last.
        let p = PreferenceProfile::new(
            vec![vec![2, 1], vec![1, 2]],
            vec![vec![2, 1], vec![1, 2]],
        )
        .unwrap();
        let hell = Matching::new(&p, vec![0, 1]).unwrap();
        let blocks = blocking_pairs(&p, &hell);
        assert!(!blocks.is_empty());
        assert!(blocks
            .iter()
            .all(|b| (b.man == 0 && b.woman == 1) || (b.man == 1 && b.woman == 0)));
    }

    #[test]
    fn enumerate_two_couples_gives_single_matching() {
        let p = two_couples();
        let all = enumerate_stable_matchings(&p).unwrap();
        assert_eq!(all.len(), 1);
        assert_eq!(all[0].pairing(), &[0, 1]);
        let partners = valid_partners(&p).unwrap();
        assert_eq!(partners, vec![vec![true, false], vec![false, true]]);
    }

    #[test]
    fn enumerate_graeco_latin_profile_gives_two() {
        let p = catalog::graeco_latin_profile();
        assert_eq!(enumerate_stable_matchings(&p).unwrap().len(), 2);
    }

    #[test]
    fn pseudo_latin_n3_has_three_stable_matchings() {
        let p = PreferenceProfile::from_key(&KeyFunction::reversal(3));
        let all = enumerate_stable_matchings(&p).unwrap();
        assert_eq!(all.len(), 3);
        // Three disjoint uniform matchings cover nine valid-partner slots.
        let partners = valid_partners(&p).unwrap();
        let trues = partners.iter().flatten().filter(|&&b| b).count();
        assert_eq!(trues, 9);
        assert_eq!(egalitarian_matching(&p).unwrap().total_cost(), 12);
    }

    #[test]
    fn reversal_key_n2_profile_has_two_cost_6_matchings() {
        let p = PreferenceProfile::from_key(&KeyFunction::reversal(2));
        let all = enumerate_stable_matchings(&p).unwrap();
        assert_eq!(all.len(), 2);
        assert!(all.iter().all(|m| m.total_cost() == 6));
    }

    #[test]
    fn soulmate_profile_egalitarian_cost_is_2n() {
        for n in 1..=4 {
            let p = PreferenceProfile::from_key(&KeyFunction::identity(n));
            assert_eq!(egalitarian_matching(&p).unwrap().total_cost(), 2 * n as u32);
        }
    }

    #[test]
    fn enumeration_guards_large_instances() {
        let rows: Vec<Vec<Rank>> = (0..9)
            .map(|i| {
                let mut row: Vec<Rank> = (1..=9).collect();
                row.rotate_left(i);
                row
            })
            .collect();
        let p = PreferenceProfile::new(rows.clone(), rows).unwrap();
        assert!(matches!(
            enumerate_stable_matchings(&p),
            Err(MatchingError::TooLarge { n: 9, .. })
        ));
    }

    #[test]
    fn uniform_matchings_follow_the_key() {
        let key = KeyFunction::new(vec![3, 1, 2]).unwrap();
        let p = PreferenceProfile::from_key(&key);
        // (1,3) and (2,1) are realized; (1,1) is not.
        assert!(uniform_matching(&p, (1, 3)).unwrap().is_some());
        assert!(uniform_matching(&p, (2, 1)).unwrap().is_some());
        assert!(uniform_matching(&p, (1, 1)).unwrap().is_none());
        let m = uniform_matching(&p, (2, 1)).unwrap().unwrap();
        assert_eq!(m.rank_pairs(&p), vec![(2, 1)]);
    }

    #[test]
    fn uniform_matching_requires_joint_profile() {
        let p = catalog::graeco_latin_profile();
        assert_eq!(
            uniform_matching(&p, (1, 1)).unwrap_err(),
            MatchingError::NotJoint
        );
    }

    #[test]
    fn uniform_stability_rule_matches_oracle() {
        for key in KeyFunction::all(4) {
            let p = PreferenceProfile::from_key(&key);
            for i in 1..=4 {
                let m = uniform_matching(&p, (i, key.apply(i))).unwrap().unwrap();
                assert_eq!(
                    uniform_stable_by_key(&key, i),
                    is_stable(&p, &m),
                    "key {key}, ranking ({i},{})",
                    key.apply(i)
                );
            }
        }
    }

    #[test]
    fn woman_and_man_optimal_uniform_matchings_take_one_round() {
        let key = KeyFunction::new(vec![2, 3, 1]).unwrap();
        let p = PreferenceProfile::from_key(&key);
        let women_first = gale_shapley(&p, Side::Women);
        assert_eq!(women_first.rounds().len(), 1);
        assert_eq!(
            women_first.matching().rank_pairs(&p),
            vec![(1, key.apply(1))]
        );
        let men_first = gale_shapley(&p, Side::Men);
        assert_eq!(men_first.rounds().len(), 1);
        assert_eq!(
            men_first.matching().rank_pairs(&p),
            vec![(key.inverse().apply(1), 1)]
        );
    }

    #[test]
    fn non_uniform_stable_matching_exists_at_n4() {
        let p = catalog::non_uniform_joint_profile();
        let bold = Matching::new(&p, vec![3, 2, 0, 1]).unwrap();
        assert!(is_stable(&p, &bold));
        assert_eq!(bold.rank_pairs(&p), vec![(1, 2), (2, 1)]);
        let all = enumerate_stable_matchings(&p).unwrap();
        assert!(all.contains(&bold));
    }
}
