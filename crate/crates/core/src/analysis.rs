//! Asymptotic quantities: limit purchase probabilities, monopoly prediction
//! and the convergence diagnostics behind it.
//!
//! For a static ranking σ and global purchase counts `d`, write
//! `D_k = Σ_j v_σ(j) (a_jk + d_j) + z`. The generalized appeal and quality are
//!
//! ```text
//! ã_i = Σ_k (w_k q_ik a_ik / D_k) / Σ_k (w_k q_ik / D_k)
//! q̃_i = (Σ_k w_k q_ik / D_k) · (Σ_j v_σ(j) (ã_j + d_j) + z)
//! ```
//!
//! so that the purchase probability of item `i` factors as a single-class
//! logit in `(ã, q̃)`. As the counts grow, `ã_i` and `q̃_i` tend to the limits
//! `ā_i = Σ w q a / Σ w q` and `q̄_i = Σ_k w_k q_ik`.

use serde::{Serialize, Serializer};

use crate::error::{MarketError, Result};
use crate::model::{Market, Ranking};
use crate::policies::{average_quality, average_quality_ranking, segmented_quality_rankings};
use crate::scalar::Scalar;

fn class_denominators<T: Scalar>(config: &Market<T>, ranking: &Ranking, counts: &[u64]) -> Result<Vec<T>> {
    config.check_ranking(ranking)?;
    config.check_counts(counts)?;
    (0..config.num_classes())
        .map(|k| {
            let mut den = config.z();
            for j in 0..config.num_items() {
                den += config.visibility(ranking.position(j)) * (config.appeal(j, k) + T::from_count(counts[j]));
            }
            if den > T::zero() {
                Ok(den)
            } else {
                Err(MarketError::DegenerateInstance(format!("class {k}: trial denominator is zero")))
            }
        })
        .collect()
}

fn weighted_appeal<T: Scalar>(config: &Market<T>, item: usize) -> T {
    (0..config.num_classes())
        .map(|k| config.weight(k) * config.appeal(item, k))
        .sum()
}

/// Generalized appeal of every item; `None` where `Σ_k w_k q_ik = 0`.
pub fn generalized_appeal<T: Scalar>(config: &Market<T>, ranking: &Ranking, counts: &[u64]) -> Result<Vec<Option<T>>> {
    let dens = class_denominators(config, ranking, counts)?;
    Ok(generalized_appeal_with(config, &dens))
}

fn generalized_appeal_with<T: Scalar>(config: &Market<T>, dens: &[T]) -> Vec<Option<T>> {
    (0..config.num_items())
        .map(|i| {
            let mut num = T::zero();
            let mut den = T::zero();
            for (k, &dk) in dens.iter().enumerate() {
                let wq = config.weight(k) * config.quality(i, k) / dk;
                num += wq * config.appeal(i, k);
                den += wq;
            }
            (den > T::zero()).then(|| num / den)
        })
        .collect()
}

/// Generalized quality of every item.
///
/// Items with undefined generalized appeal contribute their class-weighted
/// appeal to the shared denominator; their own `q̃` is zero either way.
pub fn generalized_quality<T: Scalar>(config: &Market<T>, ranking: &Ranking, counts: &[u64]) -> Result<Vec<T>> {
    let dens = class_denominators(config, ranking, counts)?;
    let appeal = generalized_appeal_with(config, &dens);
    Ok(generalized_quality_with(config, ranking, counts, &dens, &appeal))
}

fn generalized_denominator<T: Scalar>(config: &Market<T>, ranking: &Ranking, counts: &[u64], appeal: &[Option<T>]) -> T {
    let mut e = config.z();
    for j in 0..config.num_items() {
        let a = appeal[j].unwrap_or_else(|| weighted_appeal(config, j));
        e += config.visibility(ranking.position(j)) * (a + T::from_count(counts[j]));
    }
    e
}

fn generalized_quality_with<T: Scalar>(
    config: &Market<T>,
    ranking: &Ranking,
    counts: &[u64],
    dens: &[T],
    appeal: &[Option<T>],
) -> Vec<T> {
    let e = generalized_denominator(config, ranking, counts, appeal);
    (0..config.num_items())
        .map(|i| {
            let s: T = dens
                .iter()
                .enumerate()
                .map(|(k, &dk)| config.weight(k) * config.quality(i, k) / dk)
                .sum();
            s * e
        })
        .collect()
}

/// Limits of the generalized appeal and quality.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LimitQuantities<T> {
    /// `ā_i`, undefined for items no class ever buys.
    pub appeal: Vec<Option<T>>,
    /// `q̄_i`.
    pub quality: Vec<T>,
}

pub fn limit_quantities<T: Scalar>(config: &Market<T>) -> LimitQuantities<T> {
    let quality = average_quality(config);
    let appeal = (0..config.num_items())
        .map(|i| {
            let num: T = (0..config.num_classes())
                .map(|k| config.weight(k) * config.quality(i, k) * config.appeal(i, k))
                .sum();
            (quality[i] > T::zero()).then(|| num / quality[i])
        })
        .collect();
    LimitQuantities { appeal, quality }
}

/// `v_σ(i) q̄_i` for every item.
pub fn limit_products<T: Scalar>(config: &Market<T>, ranking: &Ranking) -> Vec<T> {
    average_quality(config)
        .into_iter()
        .enumerate()
        .map(|(i, q)| config.visibility(ranking.position(i)) * q)
        .collect()
}

/// Indices of the largest and second largest entries; `None` for the top
/// when the maximum is attained twice.
fn top_two<T: Scalar>(values: &[T]) -> (Option<usize>, Option<usize>) {
    let mut best: Option<usize> = None;
    let mut second: Option<usize> = None;
    for (i, &x) in values.iter().enumerate() {
        match best {
            None => best = Some(i),
            Some(b) if x > values[b] => {
                second = best;
                best = Some(i);
            }
            Some(_) => {
                if second.is_none_or(|s| x > values[s]) {
                    second = Some(i);
                }
            }
        }
    }
    match (best, second) {
        (Some(b), Some(s)) if values[b] == values[s] => (None, Some(s)),
        other => other,
    }
}

fn unique_argmax<T: Scalar>(values: &[T]) -> Option<usize> {
    top_two(values).0
}

/// Whether `σ` is tie-breaking: a unique item maximizes `v_σ(i) q̄_i`.
pub fn tie_breaking_check<T: Scalar>(config: &Market<T>, ranking: &Ranking) -> Result<bool> {
    config.check_ranking(ranking)?;
    Ok(unique_argmax(&limit_products(config, ranking)).is_some())
}

/// Per class, whether a unique item has the highest quality.
pub fn segmented_tie_breaking_check<T: Scalar>(config: &Market<T>) -> Vec<bool> {
    (0..config.num_classes())
        .map(|k| unique_argmax(&config.quality_column(k)).is_some())
        .collect()
}

/// The item that takes the whole market under the static ranking `σ`.
pub fn monopoly_predictor<T: Scalar>(config: &Market<T>, ranking: &Ranking) -> Result<usize> {
    config.check_ranking(ranking)?;
    unique_argmax(&limit_products(config, ranking)).ok_or_else(|| {
        MarketError::TieBreakingViolation("the largest v·q̄ is attained by more than one item".into())
    })
}

/// Total purchases beyond which the monopoly item has the largest
/// generalized product `v q̃` at every state.
pub fn dtot_threshold<T: Scalar>(config: &Market<T>, ranking: &Ranking) -> Result<T> {
    config.check_ranking(ranking)?;
    let v = config.visibilities();
    let v_min = v.iter().copied().fold(T::infinity(), T::min);
    let v_max = v.iter().copied().fold(T::zero(), T::max);
    if v_min <= T::zero() {
        return Err(MarketError::Undefined(
            "threshold requires every visibility to be positive".into(),
        ));
    }
    let products = limit_products(config, ranking);
    let (best, second) = top_two(&products);
    let Some(best) = best else {
        return Err(MarketError::TieBreakingViolation(
            "the largest v·q̄ is attained by more than one item".into(),
        ));
    };
    let Some(second) = second else {
        return Ok(T::zero());
    };
    let gap = products[best] - products[second];
    let appeal_mass: T = (0..config.num_items())
        .map(|j| {
            (0..config.num_classes())
                .map(|k| config.appeal(j, k))
                .fold(T::zero(), T::max)
        })
        .sum();
    Ok(v_max / v_min * (appeal_mass / gap) * (products[best] + products[second]))
}

/// `B = Σ_j v_σ(j) max_k a_jk / Σ_j v_σ(j) d_j`, the relative width of the
/// interval around `q̄` that must contain `q̃`. `None` before any purchase.
pub fn sandwich_width<T: Scalar>(config: &Market<T>, ranking: &Ranking, counts: &[u64]) -> Result<Option<T>> {
    config.check_ranking(ranking)?;
    config.check_counts(counts)?;
    let mut num = T::zero();
    let mut den = T::zero();
    for j in 0..config.num_items() {
        let v = config.visibility(ranking.position(j));
        num += v * (0..config.num_classes())
            .map(|k| config.appeal(j, k))
            .fold(T::zero(), T::max);
        den += v * T::from_count(counts[j]);
    }
    Ok((den > T::zero()).then(|| num / den))
}

fn serialize_item<S: Serializer>(item: &Option<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    item.map(|i| i + 1).serialize(s)
}

fn serialize_items<S: Serializer>(items: &Option<Vec<usize>>, s: S) -> std::result::Result<S::Ok, S::Error> {
    items
        .as_ref()
        .map(|v| v.iter().map(|i| i + 1).collect::<Vec<_>>())
        .serialize(s)
}

/// State of the convergence argument at one market state. Item indices are
/// 0-based in memory and 1-based when serialized.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceDiagnostics<T> {
    pub generalized_appeal: Vec<Option<T>>,
    pub generalized_quality: Vec<T>,
    /// `Q̃_i = v_σ(i) q̃_i`.
    pub generalized_product: Vec<T>,
    pub limit_appeal: Vec<Option<T>>,
    pub limit_quality: Vec<T>,
    /// `Q̄_i = v_σ(i) q̄_i`.
    pub limit_product: Vec<T>,
    #[serde(serialize_with = "serialize_item")]
    pub monopoly_item: Option<usize>,
    #[serde(serialize_with = "serialize_item")]
    pub runner_up: Option<usize>,
    /// `Q̄_{i*} − Q̄_{i**}`.
    pub gap: Option<T>,
    pub dtot_threshold: Option<T>,
    pub sandwich_width: Option<T>,
    pub total_purchases: u64,
}

pub fn convergence_diagnostics<T: Scalar>(
    config: &Market<T>,
    ranking: &Ranking,
    counts: &[u64],
) -> Result<ConvergenceDiagnostics<T>> {
    let dens = class_denominators(config, ranking, counts)?;
    let appeal = generalized_appeal_with(config, &dens);
    let quality = generalized_quality_with(config, ranking, counts, &dens, &appeal);
    let vis = |i: usize| config.visibility(ranking.position(i));
    let generalized_product = quality.iter().enumerate().map(|(i, &q)| vis(i) * q).collect();
    let limits = limit_quantities(config);
    let limit_product = limit_products(config, ranking);
    let (best, second) = top_two(&limit_product);
    let gap = best.zip(second).map(|(b, s)| limit_product[b] - limit_product[s]);
    Ok(ConvergenceDiagnostics {
        generalized_appeal: appeal,
        generalized_quality: quality,
        generalized_product,
        limit_appeal: limits.appeal,
        limit_quality: limits.quality,
        limit_product,
        monopoly_item: best,
        runner_up: second,
        gap,
        dtot_threshold: dtot_threshold(config, ranking).ok(),
        sandwich_width: sandwich_width(config, ranking, counts)?,
        total_purchases: counts.iter().sum(),
    })
}

/// Limit purchase probabilities of the four experiment policies.
///
/// The probabilities are closed forms and always reported; the tie-breaking
/// flags tell whether the convergence results behind the signal-based ones
/// apply, and the monopoly items are `null` when they do not.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport<T> {
    pub num_classes: usize,
    pub p_aqgsi: T,
    pub p_aqnsi: T,
    pub p_sqssi: T,
    /// Per-class analogue of the no-signal formula.
    pub p_sqnsi: T,
    pub ratio_sqssi_aqgsi: Option<T>,
    pub ratio_aqnsi_aqgsi: Option<T>,
    pub tie_breaking_aqgsi: bool,
    pub tie_breaking_sqssi: bool,
    #[serde(serialize_with = "serialize_item")]
    pub monopoly_aqgsi: Option<usize>,
    /// One monopoly item per class.
    #[serde(serialize_with = "serialize_items")]
    pub monopoly_sqssi: Option<Vec<usize>>,
}

/// Expected purchase probability with no popularity signal, class `k`
/// seeing `rankings(k)`. Classes whose trial denominator is zero buy nothing.
fn no_signal_probability<'a, T: Scalar>(config: &Market<T>, rankings: impl Fn(usize) -> &'a Ranking) -> T {
    (0..config.num_classes())
        .map(|k| {
            let ranking = rankings(k);
            let mut num = T::zero();
            let mut den = config.z();
            for i in 0..config.num_items() {
                let w = config.visibility(ranking.position(i)) * config.appeal(i, k);
                num += w * config.quality(i, k);
                den += w;
            }
            if den > T::zero() {
                config.weight(k) * num / den
            } else {
                T::zero()
            }
        })
        .sum()
}

pub fn asymptotic_report<T: Scalar>(config: &Market<T>) -> AsymptoticReport<T> {
    let q_bar = average_quality(config);
    let p_aqgsi = q_bar.iter().copied().fold(T::zero(), T::max);
    let aq = average_quality_ranking(config);
    let p_aqnsi = no_signal_probability(config, |_| &aq);
    let p_sqssi = (0..config.num_classes())
        .map(|k| {
            config.weight(k)
                * config
                    .quality_column(k)
                    .into_iter()
                    .fold(T::zero(), T::max)
        })
        .sum();
    let sq = segmented_quality_rankings(config);
    let p_sqnsi = no_signal_probability(config, |k| &sq[k]);

    let monopoly_aqgsi = unique_argmax(&limit_products(config, &aq));
    let monopoly_sqssi: Option<Vec<usize>> = (0..config.num_classes())
        .map(|k| unique_argmax(&config.quality_column(k)))
        .collect();
    let ratio = |p: T| (p_aqgsi > T::zero()).then(|| p / p_aqgsi);
    AsymptoticReport {
        num_classes: config.num_classes(),
        p_aqgsi,
        p_aqnsi,
        p_sqssi,
        p_sqnsi,
        ratio_sqssi_aqgsi: ratio(p_sqssi),
        ratio_aqnsi_aqgsi: ratio(p_aqnsi),
        tie_breaking_aqgsi: monopoly_aqgsi.is_some(),
        tie_breaking_sqssi: monopoly_sqssi.is_some(),
        monopoly_aqgsi,
        monopoly_sqssi,
    }
}

/// Parametric instances on which the policy-ratio bounds are tight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TightnessKind {
    /// No-signal over signal ratio approaching `K`.
    Theorem3Upper,
    /// No-signal over signal ratio approaching 0.
    Theorem3Lower,
    /// Segmented over global ratio approaching `K`.
    Theorem4,
}

/// `K` items and `K` equally weighted classes, uniform visibility, `z = 0`.
///
/// * `Theorem3Upper`: `q = diag(1, 1−ε, …)`, identity appeals.
/// * `Theorem3Lower`: same qualities, appeals 1 off the diagonal and `ε_A` on it.
/// * `Theorem4`: same qualities, all appeals 1.
pub fn tightness_instance<T: Scalar>(kind: TightnessKind, k: usize, eps: T, eps_a: T) -> Result<Market<T>> {
    if k == 0 {
        return Err(MarketError::InvalidArgument("K must be at least 1".into()));
    }
    if !(eps > T::zero() && eps < T::one()) {
        return Err(MarketError::InvalidArgument(format!("ε = {eps} outside (0, 1)")));
    }
    if kind == TightnessKind::Theorem3Lower && (eps_a.is_nan() || eps_a <= T::zero()) {
        return Err(MarketError::InvalidArgument(format!("ε_A = {eps_a} must be positive")));
    }
    let weights = vec![T::one() / T::from_count(k as u64); k];
    let qualities = (0..k)
        .map(|i| {
            (0..k)
                .map(|c| match (i == c, i) {
                    (true, 0) => T::one(),
                    (true, _) => T::one() - eps,
                    (false, _) => T::zero(),
                })
                .collect()
        })
        .collect();
    let appeals = (0..k)
        .map(|i| {
            (0..k)
                .map(|c| match kind {
                    TightnessKind::Theorem3Upper => {
                        if i == c {
                            T::one()
                        } else {
                            T::zero()
                        }
                    }
                    TightnessKind::Theorem3Lower => {
                        if i == c {
                            eps_a
                        } else {
                            T::one()
                        }
                    }
                    TightnessKind::Theorem4 => T::one(),
                })
                .collect()
        })
        .collect();
    Market::with_nonnegative_appeals(weights, appeals, qualities, vec![T::one(); k], T::zero())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{purchase_probability_next, PopularitySignal, Rankings};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_market(rng: &mut ChaCha8Rng, n: usize, k: usize, z: f64) -> Market<f64> {
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.1..1.0)).collect();
        let s: f64 = raw.iter().sum();
        let mut weights: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let head: f64 = weights[..k - 1].iter().sum();
        weights[k - 1] = 1.0 - head;
        let a = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.05..2.0)).collect()).collect();
        let q = (0..n).map(|_| (0..k).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
        let mut v: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
        v.sort_by(|x, y| y.partial_cmp(x).unwrap());
        Market::new(weights, a, q, v, z).unwrap()
    }

    fn shuffled(rng: &mut ChaCha8Rng, n: usize) -> Ranking {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            order.swap(i, rng.random_range(0..=i));
        }
        Ranking::from_order(&order).unwrap()
    }

    /// Item purchase probability straight from the mixed logit.
    fn direct_item_probability(m: &Market<f64>, r: &Ranking, d: &[u64], i: usize) -> f64 {
        (0..m.num_classes())
            .map(|k| {
                let den: f64 = (0..m.num_items())
                    .map(|j| m.visibility(r.position(j)) * (m.appeal(j, k) + d[j] as f64))
                    .sum::<f64>()
                    + m.z();
                m.weight(k) * m.visibility(r.position(i)) * (m.appeal(i, k) + d[i] as f64) / den * m.quality(i, k)
            })
            .sum()
    }

    #[test]
    fn single_class_collapses() {
        let m = Market::new(vec![1.0], vec![vec![0.3], vec![1.7]], vec![vec![0.6], vec![0.2]], vec![1.0, 0.5], 0.4)
            .unwrap();
        let r = Ranking::identity(2);
        for d in [[0, 0], [3, 9], [1000, 2]] {
            let a = generalized_appeal(&m, &r, &d).unwrap();
            assert_abs_diff_eq!(a[0].unwrap(), 0.3, epsilon = 1e-15);
            assert_abs_diff_eq!(a[1].unwrap(), 1.7, epsilon = 1e-15);
            let q = generalized_quality(&m, &r, &d).unwrap();
            assert_abs_diff_eq!(q[0], 0.6, epsilon = 1e-15);
            assert_abs_diff_eq!(q[1], 0.2, epsilon = 1e-15);
        }
        let lim = limit_quantities(&m);
        assert_eq!(lim.appeal, vec![Some(0.3), Some(1.7)]);
        assert_eq!(lim.quality, vec![0.6, 0.2]);
    }

    #[test]
    fn constant_appeal_rows_pass_through() {
        let m = Market::new(
            vec![0.3, 0.7],
            vec![vec![0.8, 0.8], vec![1.5, 1.5]],
            vec![vec![0.9, 0.1], vec![0.4, 0.6]],
            vec![1.0, 0.7],
            0.0,
        )
        .unwrap();
        let a = generalized_appeal(&m, &Ranking::identity(2), &[5, 1]).unwrap();
        assert_abs_diff_eq!(a[0].unwrap(), 0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(a[1].unwrap(), 1.5, epsilon = 1e-15);
    }

    #[test]
    fn limit_examples() {
        let m = Market::new(
            vec![0.5, 0.5],
            vec![vec![2.0, 4.0], vec![3.0, 7.0]],
            vec![vec![1.0, 1.0], vec![1.0, 0.0]],
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        let lim = limit_quantities(&m);
        assert_abs_diff_eq!(lim.appeal[0].unwrap(), 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lim.appeal[1].unwrap(), 3.0, epsilon = 1e-15);
        assert_eq!(lim.quality, vec![1.0, 0.5]);
    }

    #[test]
    fn zero_quality_item_has_no_limit_appeal() {
        let m = Market::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 1.0], vec![2.0, 3.0]],
            vec![vec![0.5, 0.5], vec![0.0, 0.0]],
            vec![1.0, 0.5],
            1.0,
        )
        .unwrap();
        let r = Ranking::identity(2);
        assert_eq!(limit_quantities(&m).appeal[1], None);
        assert_eq!(generalized_appeal(&m, &r, &[2, 2]).unwrap()[1], None);
        assert_eq!(generalized_quality(&m, &r, &[2, 2]).unwrap()[1], 0.0);
    }

    #[test]
    fn monopoly_examples() {
        let m = Market::new(
            vec![1.0],
            vec![vec![1.0], vec![1.0]],
            vec![vec![0.4], vec![0.9]],
            vec![1.0, 0.5],
            0.0,
        )
        .unwrap();
        assert_eq!(monopoly_predictor(&m, &Ranking::identity(2)).unwrap(), 1);
        assert_eq!(monopoly_predictor(&m, &average_quality_ranking(&m)).unwrap(), 1);

        let tie = Market::new(vec![1.0], vec![vec![1.0], vec![2.0]], vec![vec![0.5], vec![0.5]], vec![1.0, 1.0], 0.0)
            .unwrap();
        assert!(matches!(
            monopoly_predictor(&tie, &Ranking::identity(2)),
            Err(MarketError::TieBreakingViolation(_))
        ));
        assert!(!tie_breaking_check(&tie, &Ranking::identity(2)).unwrap());
        assert!(tie_breaking_check(&m, &Ranking::identity(2)).unwrap());
    }

    #[test]
    fn segmented_and_global_ties_differ() {
        // class 1 has a tied top quality, the averages do not tie
        let m = Market::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![vec![0.8, 0.9], vec![0.8, 0.2]],
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        assert_eq!(segmented_tie_breaking_check(&m), vec![false, true]);
        assert!(tie_breaking_check(&m, &Ranking::identity(2)).unwrap());
        let rep = asymptotic_report(&m);
        assert!(!rep.tie_breaking_sqssi);
        assert_eq!(rep.monopoly_sqssi, None);
        let json = serde_json::to_value(&rep).unwrap();
        assert!(json["monopoly_sqssi"].is_null());
        assert_eq!(json["monopoly_aqgsi"], 1);
    }

    #[test]
    fn dtot_examples() {
        let make = |q2: f64| {
            Market::new(vec![1.0], vec![vec![1.0], vec![1.0]], vec![vec![0.9], vec![q2]], vec![1.0, 1.0], 0.0).unwrap()
        };
        let r = Ranking::identity(2);
        // (1/1)·(2/0.8)·(1.0) = 2.5
        assert_abs_diff_eq!(dtot_threshold(&make(0.1), &r).unwrap(), 2.5, epsilon = 1e-12);
        let mut last = 0.0;
        for q2 in [0.5, 0.8, 0.89, 0.899, 0.8999] {
            let t = dtot_threshold(&make(q2), &r).unwrap();
            assert!(t > last);
            last = t;
        }
        assert!(last > 1e4);
        let zero_v = make(0.1).with_visibilities(vec![1.0, 0.0]).unwrap();
        assert!(matches!(dtot_threshold(&zero_v, &r), Err(MarketError::Undefined(_))));
    }

    #[test]
    fn decomposition_reproduces_purchase_probabilities() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.random_range(1..7);
            let k = rng.random_range(1..5);
            let z = if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.0..3.0) };
            let m = random_market(&mut rng, n, k, z);
            let r = shuffled(&mut rng, n);
            let d: Vec<u64> = (0..n).map(|_| rng.random_range(0..50)).collect();
            let a = generalized_appeal(&m, &r, &d).unwrap();
            let q = generalized_quality(&m, &r, &d).unwrap();
            let e: f64 = (0..n)
                .map(|j| m.visibility(r.position(j)) * (a[j].unwrap() + d[j] as f64))
                .sum::<f64>()
                + z;
            let mut total = 0.0;
            for i in 0..n {
                let p = m.visibility(r.position(i)) * (a[i].unwrap() + d[i] as f64) / e * q[i];
                assert_abs_diff_eq!(p, direct_item_probability(&m, &r, &d, i), epsilon = 1e-12);
                total += p;
                let lo = (0..k).map(|c| m.appeal(i, c)).fold(f64::INFINITY, f64::min);
                let hi = (0..k).map(|c| m.appeal(i, c)).fold(0.0, f64::max);
                assert!(a[i].unwrap() >= lo - 1e-12 && a[i].unwrap() <= hi + 1e-12);
            }
            let signal = PopularitySignal::Global(d.clone());
            let next = purchase_probability_next(&m, &Rankings::Shared(r.clone()), &signal).unwrap();
            assert_abs_diff_eq!(total, next, epsilon = 1e-12);
        }
    }

    #[test]
    fn sandwich_bounds_and_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let n = rng.random_range(2..6);
            let k = rng.random_range(1..4);
            let z = rng.random_range(0.0..2.0);
            let m = random_market(&mut rng, n, k, z);
            let r = shuffled(&mut rng, n);
            let base: Vec<u64> = (0..n).map(|_| rng.random_range(0..20)).collect();
            let lim = limit_quantities(&m);
            for scale in [1u64, 100, 1_000_000] {
                let d: Vec<u64> = base.iter().map(|x| x * scale).collect();
                let Some(b) = sandwich_width(&m, &r, &d).unwrap() else {
                    continue;
                };
                let q = generalized_quality(&m, &r, &d).unwrap();
                for i in 0..n {
                    let qb = lim.quality[i];
                    assert!(q[i] >= (1.0 - b) * qb - 1e-12, "{} < (1-{b})·{qb}", q[i]);
                    assert!(q[i] <= (1.0 + b) * qb + 1e-12, "{} > (1+{b})·{qb}", q[i]);
                }
            }
        }
    }

    #[test]
    fn report_examples() {
        let m = Market::new(
            vec![0.5, 0.5],
            vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            0.0,
        )
        .unwrap();
        let rep = asymptotic_report(&m);
        assert_eq!(rep.p_sqssi, 1.0);
        assert_eq!(rep.p_aqgsi, 0.5);
        assert_eq!(rep.ratio_sqssi_aqgsi, Some(2.0));
        assert!(!rep.tie_breaking_aqgsi);
        assert!(serde_json::to_value(&rep).unwrap()["monopoly_aqgsi"].is_null());

        let single = Market::new(vec![1.0], vec![vec![1.0], vec![2.0]], vec![vec![0.3], vec![0.7]], vec![1.0, 0.5], 0.0)
            .unwrap();
        let rep = asymptotic_report(&single);
        assert_eq!(rep.p_sqssi, 0.7);
        assert_eq!(rep.p_aqgsi, 0.7);
        assert_eq!(rep.ratio_sqssi_aqgsi, Some(1.0));
        // item 2 on top: 0.7·2·1 + 0.3·1·0.5 over 2·1 + 1·0.5
        assert_abs_diff_eq!(rep.p_aqnsi, (1.4 + 0.15) / 2.5, epsilon = 1e-15);
        assert_eq!(rep.p_aqnsi, rep.p_sqnsi);
    }

    #[test]
    fn tightness_closed_forms() {
        let m = tightness_instance(TightnessKind::Theorem3Upper, 3, 0.01, 0.0).unwrap();
        let rep = asymptotic_report(&m);
        assert_abs_diff_eq!(rep.ratio_aqnsi_aqgsi.unwrap(), 2.98, epsilon = 1e-12);

        let m = tightness_instance(TightnessKind::Theorem4, 2, 0.01, 0.0).unwrap();
        let rep = asymptotic_report(&m);
        assert_abs_diff_eq!(rep.ratio_sqssi_aqgsi.unwrap(), (2.0 * 0.5 - 0.01 * 0.5) / 0.5, epsilon = 1e-12);
        assert!(rep.tie_breaking_sqssi && rep.tie_breaking_aqgsi);

        let mut last = f64::INFINITY;
        for eps_a in [1e-1, 1e-2, 1e-4, 1e-8] {
            let m = tightness_instance(TightnessKind::Theorem3Lower, 4, 1e-3, eps_a).unwrap();
            let r = asymptotic_report(&m).ratio_aqnsi_aqgsi.unwrap();
            assert!(r < last);
            last = r;
        }
        assert!(last < 1e-6);
        assert!(tightness_instance(TightnessKind::Theorem3Lower, 2, 0.1, 0.0f64).is_err());
        assert!(tightness_instance(TightnessKind::Theorem4, 0, 0.1, 0.0f64).is_err());
    }

    #[test]
    fn policy_ratio_bounds_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..300 {
            let n = rng.random_range(1..8);
            let k = rng.random_range(1..6);
            let z = rng.random_range(0.0..2.0);
            let m = random_market(&mut rng, n, k, z);
            let rep = asymptotic_report(&m);
            let kf = k as f64;
            if let Some(r) = rep.ratio_sqssi_aqgsi {
                assert!((1.0 - 1e-12..=kf + 1e-12).contains(&r));
            }
            if let Some(r) = rep.ratio_aqnsi_aqgsi {
                assert!((0.0..=kf + 1e-12).contains(&r));
            }
            for p in [rep.p_aqgsi, rep.p_aqnsi, rep.p_sqssi, rep.p_sqnsi] {
                assert!((0.0..=1.0).contains(&p));
            }
        }
    }

    #[test]
    fn works_in_single_precision() {
        let m = tightness_instance(TightnessKind::Theorem4, 3, 1e-3f32, 0.0).unwrap();
        let rep = asymptotic_report(&m);
        assert!((rep.ratio_sqssi_aqgsi.unwrap() - 2.998).abs() < 1e-4);
    }
}
