//! The two-class logit assortment problem and its Turing reduction to the
//! performance ranking.
//!
//! Each of the `N` derived markets shares appeals `a_{·,k} = V^k`, qualities
//! equal to the (rescaled) revenues, class weights `(α, 1 − α)`, `z = 1` and
//! no purchases; market `i` shows exactly the first `i` positions. The best
//! visible set over all `i` is an optimal assortment.

use serde::{Deserialize, Serialize};

use super::performance::PerformanceOracle;
use crate::error::{MarketError, Result};
use crate::model::{Market, PopularitySignal};
use crate::scalar::Scalar;

/// Largest instance the subset enumeration accepts.
pub const ASSORTMENT_ENUMERATION_MAX_ITEMS: usize = 20;

const TIE_SLACK: f64 = 1e-13;

/// A two-class logit assortment instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TwoClassLogitFile<T>", into = "TwoClassLogitFile<T>")]
#[serde(bound(
    serialize = "T: Scalar + Serialize",
    deserialize = "T: Scalar + serde::de::DeserializeOwned"
))]
pub struct TwoClassLogit<T: Scalar> {
    utilities_1: Vec<T>,
    utilities_2: Vec<T>,
    revenues: Vec<u64>,
    alpha: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TwoClassLogitFile<T> {
    #[serde(rename = "V1")]
    v1: Vec<T>,
    #[serde(rename = "V2")]
    v2: Vec<T>,
    revenues: Vec<u64>,
    alpha: T,
}

impl<T: Scalar> TryFrom<TwoClassLogitFile<T>> for TwoClassLogit<T> {
    type Error = MarketError;

    fn try_from(f: TwoClassLogitFile<T>) -> Result<Self> {
        TwoClassLogit::new(f.v1, f.v2, f.revenues, f.alpha)
    }
}

impl<T: Scalar> From<TwoClassLogit<T>> for TwoClassLogitFile<T> {
    fn from(i: TwoClassLogit<T>) -> Self {
        TwoClassLogitFile {
            v1: i.utilities_1,
            v2: i.utilities_2,
            revenues: i.revenues,
            alpha: i.alpha,
        }
    }
}

/// An assortment (sorted 0-based item indices) and its expected revenue.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssortmentSolution<T> {
    pub assortment: Vec<usize>,
    pub value: T,
    /// `false` when the value came from a heuristic oracle.
    pub exact: bool,
}

impl<T: Scalar> TwoClassLogit<T> {
    pub fn new(utilities_1: Vec<T>, utilities_2: Vec<T>, revenues: Vec<u64>, alpha: T) -> Result<Self> {
        let n = utilities_1.len();
        if n == 0 {
            return Err(MarketError::InvalidInstance("no products".into()));
        }
        if utilities_2.len() != n || revenues.len() != n {
            return Err(MarketError::InvalidInstance(format!(
                "V1, V2 and revenues must have equal length, got {}, {}, {}",
                n,
                utilities_2.len(),
                revenues.len()
            )));
        }
        if utilities_1
            .iter()
            .chain(&utilities_2)
            .any(|v| !(v.is_finite() && *v >= T::zero()))
        {
            return Err(MarketError::InvalidInstance(
                "utilities must be finite and non-negative".into(),
            ));
        }
        if !(alpha >= T::zero() && alpha <= T::one()) {
            return Err(MarketError::InvalidInstance(format!("alpha = {alpha} outside [0, 1]")));
        }
        Ok(Self {
            utilities_1,
            utilities_2,
            revenues,
            alpha,
        })
    }

    pub fn num_products(&self) -> usize {
        self.revenues.len()
    }

    pub fn utilities_1(&self) -> &[T] {
        &self.utilities_1
    }

    pub fn utilities_2(&self) -> &[T] {
        &self.utilities_2
    }

    pub fn revenues(&self) -> &[u64] {
        &self.revenues
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    /// Expected revenue of offering `assortment`.
    pub fn expected_revenue(&self, assortment: &[usize]) -> T {
        let mix = |utilities: &[T]| {
            let mut num = T::zero();
            let mut den = T::one();
            for &i in assortment {
                num += T::from_count(self.revenues[i]) * utilities[i];
                den += utilities[i];
            }
            num / den
        };
        self.alpha * mix(&self.utilities_1) + (T::one() - self.alpha) * mix(&self.utilities_2)
    }

    /// The performance-ranking market in which exactly the first `visible`
    /// positions can be seen. Qualities are revenues divided by the largest
    /// revenue, so objectives scale back by [`Self::revenue_scale`].
    pub fn reduction_market(&self, visible: usize) -> Result<Market<T>> {
        let n = self.num_products();
        let scale = self.revenue_scale();
        let appeals = (0..n)
            .map(|i| vec![self.utilities_1[i], self.utilities_2[i]])
            .collect();
        let qualities = (0..n)
            .map(|i| {
                let q = T::from_count(self.revenues[i]) / scale;
                vec![q, q]
            })
            .collect();
        let visibilities = (0..n)
            .map(|j| if j < visible { T::one() } else { T::zero() })
            .collect();
        Market::with_nonnegative_appeals(
            vec![self.alpha, T::one() - self.alpha],
            appeals,
            qualities,
            visibilities,
            T::one(),
        )
    }

    /// Largest revenue (1 when every revenue is zero).
    pub fn revenue_scale(&self) -> T {
        let max = self.revenues.iter().copied().max().unwrap_or(0);
        if max == 0 {
            T::one()
        } else {
            T::from_count(max)
        }
    }
}

fn lexicographically_better(value: f64, best: f64, candidate: &[usize], incumbent: &[usize]) -> bool {
    value > best + TIE_SLACK || ((value - best).abs() <= TIE_SLACK && candidate < incumbent)
}

/// Solves the assortment problem with `N` calls to a performance-ranking
/// oracle.
pub fn solve_two_class_logit<T, O>(instance: &TwoClassLogit<T>, oracle: &O) -> Result<AssortmentSolution<T>>
where
    T: Scalar,
    O: PerformanceOracle<T> + ?Sized,
{
    let n = instance.num_products();
    let scale = instance.revenue_scale();
    let signal = PopularitySignal::zeros(n);

    // The empty assortment earns nothing.
    let mut best = AssortmentSolution {
        assortment: Vec::new(),
        value: T::zero(),
        exact: oracle.is_exact(),
    };
    for visible in 1..=n {
        let market = instance.reduction_market(visible)?;
        let (ranking, objective) = oracle.solve(&market, &signal)?;
        let value = objective * scale;
        let mut assortment: Vec<usize> = (0..n).filter(|&i| ranking.position(i) < visible).collect();
        assortment.sort_unstable();
        if lexicographically_better(
            value.to_f64_lossy(),
            best.value.to_f64_lossy(),
            &assortment,
            &best.assortment,
        ) {
            best.assortment = assortment;
            best.value = value;
        }
    }
    Ok(best)
}

/// Enumerates all `2^N` assortments; the lexicographically smallest optimal
/// set wins ties.
pub fn brute_force_two_class_logit<T: Scalar>(instance: &TwoClassLogit<T>) -> Result<AssortmentSolution<T>> {
    let n = instance.num_products();
    if n > ASSORTMENT_ENUMERATION_MAX_ITEMS {
        return Err(MarketError::SizeLimit {
            what: "assortment enumeration",
            size: n,
            limit: ASSORTMENT_ENUMERATION_MAX_ITEMS,
        });
    }
    let mut best_set: Vec<usize> = Vec::new();
    let mut best_value = T::zero();
    let mut set = Vec::with_capacity(n);
    for mask in 1u32..(1u32 << n) {
        set.clear();
        set.extend((0..n).filter(|i| mask & (1 << i) != 0));
        let value = instance.expected_revenue(&set);
        if lexicographically_better(value.to_f64_lossy(), best_value.to_f64_lossy(), &set, &best_set) {
            best_value = value;
            best_set.clone_from(&set);
        }
    }
    Ok(AssortmentSolution {
        assortment: best_set,
        value: best_value,
        exact: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policies::PerformanceSolver;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_product_closed_form() {
        let inst = TwoClassLogit::new(vec![2.0], vec![0.5], vec![3], 0.4).unwrap();
        let expected = 0.4 * 3.0 * 2.0 / 3.0 + 0.6 * 3.0 * 0.5 / 1.5;
        let sol = solve_two_class_logit(&inst, &PerformanceSolver::BruteForce).unwrap();
        assert_eq!(sol.assortment, vec![0]);
        assert_abs_diff_eq!(sol.value, expected, epsilon = 1e-12);
        assert!(sol.exact);
    }

    #[test]
    fn zero_revenues_pick_the_empty_set() {
        let inst = TwoClassLogit::new(vec![1.0, 2.0], vec![1.0, 0.0], vec![0, 0], 0.5).unwrap();
        let bf = brute_force_two_class_logit(&inst).unwrap();
        assert!(bf.assortment.is_empty());
        assert_eq!(bf.value, 0.0);
        let red = solve_two_class_logit(&inst, &PerformanceSolver::BruteForce).unwrap();
        assert!(red.assortment.is_empty());
        assert_eq!(red.value, 0.0);
    }

    #[test]
    fn three_product_enumeration() {
        // Hand-checked: {0,1} earns 0.5·(10·1 + 1·4)/6 + 0.5·(1·1)/2 = 1.41666...
        let inst = TwoClassLogit::new(vec![1.0, 4.0, 0.2], vec![0.0, 1.0, 3.0], vec![10, 1, 2], 0.5).unwrap();
        let mut best = (f64::MIN, vec![]);
        for mask in 0u32..8 {
            let s: Vec<usize> = (0..3).filter(|i| mask & (1 << i) != 0).collect();
            let v = inst.expected_revenue(&s);
            if v > best.0 + 1e-13 {
                best = (v, s);
            }
        }
        let bf = brute_force_two_class_logit(&inst).unwrap();
        assert_abs_diff_eq!(bf.value, best.0, epsilon = 1e-12);
        let red = solve_two_class_logit(&inst, &PerformanceSolver::BruteForce).unwrap();
        assert_abs_diff_eq!(red.value, best.0, epsilon = 1e-10);
        assert!(bf.value >= inst.expected_revenue(&[0, 1, 2]));
    }

    #[test]
    fn heuristic_oracle_is_flagged() {
        let inst = TwoClassLogit::new(vec![1.0, 2.0], vec![2.0, 1.0], vec![3, 4], 0.3).unwrap();
        let sol = solve_two_class_logit(&inst, &PerformanceSolver::SwapHeuristic { max_passes: 50 }).unwrap();
        assert!(!sol.exact);
    }

    #[test]
    fn invalid_instances() {
        assert!(TwoClassLogit::new(vec![1.0], vec![1.0, 2.0], vec![1], 0.5).is_err());
        assert!(TwoClassLogit::new(vec![1.0], vec![1.0], vec![1], 1.5).is_err());
        assert!(TwoClassLogit::new(vec![-1.0], vec![1.0], vec![1], 0.5).is_err());
        let json = r#"{"V1":[1.0,2.0],"V2":[0.5,0.5],"revenues":[3,1],"alpha":0.25}"#;
        let inst: TwoClassLogit<f64> = serde_json::from_str(json).unwrap();
        assert_eq!(inst.revenues(), &[3, 1]);
        assert!(serde_json::from_str::<TwoClassLogit<f64>>(r#"{"V1":[1.0],"V2":[],"revenues":[1],"alpha":0.2}"#).is_err());
    }

    #[test]
    fn enumeration_size_limit() {
        let n = 21;
        let inst = TwoClassLogit::new(vec![1.0; n], vec![1.0; n], vec![1; n], 0.5).unwrap();
        assert!(matches!(
            brute_force_two_class_logit(&inst),
            Err(MarketError::SizeLimit { .. })
        ));
    }
}
