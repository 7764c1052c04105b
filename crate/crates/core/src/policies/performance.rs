//! Performance ranking: the permutation maximizing the probability of a
//! purchase by the next consumer.
//!
//! With a single class the objective is a ratio of two linear functions of
//! the visibility assignment, solved exactly with Dinkelbach's parametric
//! method. With several classes the problem is NP-hard; exhaustive search
//! and a pairwise-swap local search are provided.

use serde::{Deserialize, Serialize};

use super::average_quality_ranking;
use crate::error::{MarketError, Result};
use crate::model::{purchase_probability_unchecked, Market, PopularitySignal, Ranking, Rankings};
use crate::scalar::Scalar;

/// Largest instance the permutation enumeration accepts (9! = 362 880).
pub const BRUTE_FORCE_MAX_ITEMS: usize = 9;

const DINKELBACH_TOLERANCE: f64 = 1e-12;
const DINKELBACH_MAX_ITERATIONS: usize = 200;
const SWAP_MIN_GAIN: f64 = 1e-12;
const ENUMERATION_TIE_SLACK: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerformanceSolver {
    /// Dinkelbach iteration, exact for single-class markets.
    Exact1Class,
    /// Enumeration of every permutation.
    BruteForce,
    /// Best-improvement pairwise swaps from the average-quality ranking.
    SwapHeuristic { max_passes: usize },
}

/// Ranking and objective returned by a performance solver.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceSolution<T> {
    pub ranking: Ranking,
    pub objective: T,
    pub exact: bool,
}

/// Anything that can stand in for a performance-ranking oracle.
pub trait PerformanceOracle<T: Scalar> {
    fn solve(&self, config: &Market<T>, signal: &PopularitySignal) -> Result<(Ranking, T)>;

    /// Whether returned rankings are guaranteed optimal.
    fn is_exact(&self) -> bool;
}

impl<T: Scalar> PerformanceOracle<T> for PerformanceSolver {
    fn solve(&self, config: &Market<T>, signal: &PopularitySignal) -> Result<(Ranking, T)> {
        match *self {
            PerformanceSolver::Exact1Class => {
                if config.num_classes() != 1 {
                    return Err(MarketError::UnsupportedSolver(format!(
                        "the exact single-class solver needs K = 1, market has K = {}",
                        config.num_classes()
                    )));
                }
                signal.check(config)?;
                let counts = signal
                    .observed(0)
                    .map(<[u64]>::to_vec)
                    .unwrap_or_else(|| vec![0; config.num_items()]);
                let sol = performance_ranking_k1(config, &counts)?;
                Ok((sol.ranking, sol.objective))
            }
            PerformanceSolver::BruteForce => performance_ranking_bruteforce(config, signal),
            PerformanceSolver::SwapHeuristic { max_passes } => {
                performance_ranking_swap_heuristic(config, signal, max_passes)
            }
        }
    }

    fn is_exact(&self) -> bool {
        !matches!(self, PerformanceSolver::SwapHeuristic { .. })
    }
}

impl PerformanceSolver {
    /// Solves and tags the result with the solver's exactness.
    pub fn run<T: Scalar>(
        &self,
        config: &Market<T>,
        signal: &PopularitySignal,
    ) -> Result<PerformanceSolution<T>> {
        let (ranking, objective) = self.solve(config, signal)?;
        Ok(PerformanceSolution {
            ranking,
            objective,
            exact: PerformanceOracle::<T>::is_exact(self),
        })
    }
}

/// Output of the Dinkelbach iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct DinkelbachSolution<T> {
    pub ranking: Ranking,
    pub objective: T,
    /// Parameter sequence, starting from the quality-sorted ranking's value.
    pub lambdas: Vec<T>,
    /// `max_σ Σ v_σ(i) (f_i − λ g_i) − λ z` at the final parameter.
    pub final_gap: T,
}

/// Exact performance ranking of a single-class market with observed counts.
///
/// Maximizes `Σ v_σ(i) f_i / (Σ v_σ(i) g_i + z)` with `g_i = a_i + d_i` and
/// `f_i = g_i q_i`. For a fixed parameter `λ` the linear subproblem is solved
/// by the rearrangement inequality: the largest visibility goes to the
/// largest `f_i − λ g_i`.
pub fn performance_ranking_k1<T: Scalar>(
    config: &Market<T>,
    counts: &[u64],
) -> Result<DinkelbachSolution<T>> {
    if config.num_classes() != 1 {
        return Err(MarketError::UnsupportedSolver(format!(
            "the exact single-class solver needs K = 1, market has K = {}",
            config.num_classes()
        )));
    }
    config.check_counts(counts)?;
    let n = config.num_items();
    let g: Vec<T> = (0..n)
        .map(|i| config.appeal(i, 0) + T::from_count(counts[i]))
        .collect();
    let f: Vec<T> = (0..n).map(|i| g[i] * config.quality(i, 0)).collect();

    let ratio = |ranking: &Ranking| -> Result<T> {
        let mut num = T::zero();
        let mut den = config.z();
        for i in 0..n {
            let v = config.visibility(ranking.position(i));
            num += v * f[i];
            den += v * g[i];
        }
        if den <= T::zero() {
            return Err(MarketError::DegenerateInstance(
                "trial denominator is zero".into(),
            ));
        }
        Ok(num / den)
    };

    let tol = T::lit(DINKELBACH_TOLERANCE);
    let mut ranking = Ranking::by_descending_key(&config.quality_column(0));
    let mut lambda = ratio(&ranking)?;
    let mut lambdas = vec![lambda];
    let mut final_gap;
    let mut iterations = 0;
    loop {
        let keys: Vec<T> = (0..n).map(|i| f[i] - lambda * g[i]).collect();
        let candidate = Ranking::by_descending_key(&keys);
        final_gap = (0..n)
            .map(|i| config.visibility(candidate.position(i)) * keys[i])
            .sum::<T>()
            - lambda * config.z();
        iterations += 1;
        if final_gap <= tol {
            // `ranking` attains `lambda`; keep the candidate only if it is no worse.
            let value = ratio(&candidate)?;
            if value >= lambda {
                ranking = candidate;
                lambda = value;
            }
            break;
        }
        let next = ratio(&candidate)?;
        ranking = candidate;
        if next <= lambda || iterations >= DINKELBACH_MAX_ITERATIONS {
            lambda = lambda.max(next);
            break;
        }
        lambda = next;
        lambdas.push(lambda);
    }

    Ok(DinkelbachSolution {
        ranking,
        objective: lambda,
        lambdas,
        final_gap,
    })
}

/// Exhaustive search over all rankings; the lexicographically smallest
/// position vector wins ties.
pub fn performance_ranking_bruteforce<T: Scalar>(
    config: &Market<T>,
    signal: &PopularitySignal,
) -> Result<(Ranking, T)> {
    let n = config.num_items();
    if n > BRUTE_FORCE_MAX_ITEMS {
        return Err(MarketError::SizeLimit {
            what: "performance brute force",
            size: n,
            limit: BRUTE_FORCE_MAX_ITEMS,
        });
    }
    signal.check(config)?;
    let slack = T::lit(ENUMERATION_TIE_SLACK);

    let mut current = Rankings::Shared(Ranking::identity(n));
    let mut best_value = purchase_probability_unchecked(config, &current, signal)?;
    let mut best = Ranking::identity(n);
    let mut positions: Vec<usize> = (0..n).collect();
    while next_permutation(&mut positions) {
        current = Rankings::Shared(Ranking::from_positions(positions.clone())?);
        let value = purchase_probability_unchecked(config, &current, signal)?;
        if value > best_value + slack {
            best_value = value;
            best = current.for_class(0).clone();
        }
    }
    Ok((best, best_value))
}

/// Pairwise-swap hill climbing from the average-quality ranking.
///
/// Each pass applies the single best improving swap; the search stops when
/// no swap gains more than `1e-12` or after `max_passes` swaps.
pub fn performance_ranking_swap_heuristic<T: Scalar>(
    config: &Market<T>,
    signal: &PopularitySignal,
    max_passes: usize,
) -> Result<(Ranking, T)> {
    signal.check(config)?;
    let n = config.num_items();
    let min_gain = T::lit(SWAP_MIN_GAIN);
    let mut rankings = Rankings::Shared(average_quality_ranking(config));
    let mut value = purchase_probability_unchecked(config, &rankings, signal)?;

    for _ in 0..max_passes {
        let mut best: Option<(usize, usize, T)> = None;
        for a in 0..n {
            for b in (a + 1)..n {
                swap(&mut rankings, a, b);
                let candidate = purchase_probability_unchecked(config, &rankings, signal)?;
                swap(&mut rankings, a, b);
                let gain = candidate - value;
                if gain > min_gain && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((a, b, gain));
                }
            }
        }
        match best {
            Some((a, b, _)) => {
                swap(&mut rankings, a, b);
                value = purchase_probability_unchecked(config, &rankings, signal)?;
            }
            None => break,
        }
    }

    match rankings {
        Rankings::Shared(r) => Ok((r, value)),
        Rankings::PerClass(_) => unreachable!("local search keeps a shared ranking"),
    }
}

fn swap(rankings: &mut Rankings, a: usize, b: usize) {
    if let Rankings::Shared(r) = rankings {
        r.swap_items(a, b);
    }
}

/// Advances to the next permutation in lexicographic order.
fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(a: &[f64], q: &[f64], v: &[f64], z: f64) -> Market<f64> {
        Market::new(
            vec![1.0],
            a.iter().map(|&x| vec![x]).collect(),
            q.iter().map(|&x| vec![x]).collect(),
            v.to_vec(),
            z,
        )
        .unwrap()
    }

    fn random_market(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Market<f64> {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        v.sort_by(|a, b| b.partial_cmp(a).unwrap());
        let raw: Vec<f64> = (0..k).map(|_| rng.random::<f64>() + 0.1).collect();
        let total: f64 = raw.iter().sum();
        Market::new(
            raw.iter().map(|x| x / total).collect(),
            (0..n)
                .map(|_| (0..k).map(|_| rng.random::<f64>() + 0.05).collect())
                .collect(),
            (0..n)
                .map(|_| (0..k).map(|_| rng.random::<f64>()).collect())
                .collect(),
            v,
            if rng.random::<bool>() { 1.0 } else { 0.0 },
        )
        .unwrap()
    }

    // Independent oracle: enumerate every permutation of the order vector
    // through `permutations` of itertools-free recursion.
    fn all_orders(n: usize) -> Vec<Vec<usize>> {
        fn rec(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
            if prefix.len() == used.len() {
                out.push(prefix.clone());
                return;
            }
            for i in 0..used.len() {
                if !used[i] {
                    used[i] = true;
                    prefix.push(i);
                    rec(prefix, used, out);
                    prefix.pop();
                    used[i] = false;
                }
            }
        }
        let mut out = Vec::new();
        rec(&mut Vec::new(), &mut vec![false; n], &mut out);
        out
    }

    fn direct_objective(m: &Market<f64>, order: &[usize], d: &[u64]) -> f64 {
        // Σ_k w_k Σ_i p_ik q_ik written out from scratch.
        let mut total = 0.0;
        for k in 0..m.num_classes() {
            let mut den = m.z();
            let mut num = 0.0;
            for (slot, &item) in order.iter().enumerate() {
                let w = m.visibility(slot) * (m.appeal(item, k) + d[item] as f64);
                den += w;
                num += w * m.quality(item, k);
            }
            total += m.weight(k) * num / den;
        }
        total
    }

    #[test]
    fn two_items_one_visible_slot_prefers_quality() {
        let m = single(&[5.0, 0.1], &[0.3, 0.8], &[1.0, 0.0], 0.0);
        let sol = performance_ranking_k1(&m, &[0, 0]).unwrap();
        assert_eq!(sol.ranking.order()[0], 1);
        assert_abs_diff_eq!(sol.objective, 0.8, epsilon = 1e-12);
    }

    #[test]
    fn equal_quality_gives_canonical_ranking() {
        let m = single(&[1.0, 3.0, 2.0], &[0.4; 3], &[1.0, 0.5, 0.2], 0.0);
        let sol = performance_ranking_k1(&m, &[0, 2, 1]).unwrap();
        assert_eq!(sol.ranking, Ranking::identity(3));
        assert_abs_diff_eq!(sol.objective, 0.4, epsilon = 1e-12);
    }

    #[test]
    fn dinkelbach_matches_enumeration_on_six_items() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let orders = all_orders(6);
        for _ in 0..20 {
            let m = random_market(&mut rng, 6, 1);
            let d: Vec<u64> = (0..6).map(|_| rng.random_range(0..5)).collect();
            let oracle = orders
                .iter()
                .map(|o| direct_objective(&m, o, &d))
                .fold(f64::MIN, f64::max);
            let sol = performance_ranking_k1(&m, &d).unwrap();
            assert_abs_diff_eq!(sol.objective, oracle, epsilon = 1e-10);
            assert!(sol.final_gap <= 1e-12);
            assert!(sol.lambdas.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn bruteforce_is_exhaustive() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let orders = all_orders(5);
        for _ in 0..10 {
            let m = random_market(&mut rng, 5, 2);
            let d = vec![0u64; 5];
            let (r, best) = performance_ranking_bruteforce(&m, &PopularitySignal::zeros(5)).unwrap();
            for o in &orders {
                assert!(direct_objective(&m, o, &d) <= best + 1e-12);
            }
            assert_abs_diff_eq!(direct_objective(&m, &r.order(), &d), best, epsilon = 1e-12);
        }
    }

    #[test]
    fn bruteforce_single_item() {
        let m = Market::new(
            vec![0.3, 0.7],
            vec![vec![2.0, 1.0]],
            vec![vec![0.5, 0.9]],
            vec![1.0],
            1.0,
        )
        .unwrap();
        let (r, value) = performance_ranking_bruteforce(&m, &PopularitySignal::zeros(1)).unwrap();
        assert_eq!(r, Ranking::identity(1));
        assert_abs_diff_eq!(value, 0.3 * 0.5 * 2.0 / 3.0 + 0.7 * 0.9 * 0.5, epsilon = 1e-12);
    }

    #[test]
    fn bruteforce_rejects_large_instances() {
        let m = single(&[1.0; 10], &[0.5; 10], &[1.0; 10], 0.0);
        assert!(matches!(
            performance_ranking_bruteforce(&m, &PopularitySignal::zeros(10)),
            Err(MarketError::SizeLimit { .. })
        ));
    }

    #[test]
    fn swap_heuristic_never_worse_than_start() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let m = random_market(&mut rng, 7, 3);
            let s = PopularitySignal::zeros(7);
            let start = purchase_probability_unchecked(
                &m,
                &Rankings::Shared(average_quality_ranking(&m)),
                &s,
            )
            .unwrap();
            let (_, v) = performance_ranking_swap_heuristic(&m, &s, 100).unwrap();
            let (_, exact) = performance_ranking_bruteforce(&m, &s).unwrap();
            assert!(v >= start);
            assert!(v <= exact + 1e-12);
        }
    }

    #[test]
    fn exact_solver_rejects_multiclass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_market(&mut rng, 3, 2);
        assert!(matches!(
            performance_ranking_k1(&m, &[0, 0, 0]),
            Err(MarketError::UnsupportedSolver(_))
        ));
    }

    #[test]
    fn next_permutation_is_lexicographic() {
        let mut p = vec![0, 1, 2];
        let mut seen = vec![p.clone()];
        while next_permutation(&mut p) {
            seen.push(p.clone());
        }
        assert_eq!(seen.len(), 6);
        assert!(seen.windows(2).all(|w| w[0] < w[1]));
    }
}
