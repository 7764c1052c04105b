//! Market instances, rankings, popularity signals and the mixed-logit
//! trial/purchase probabilities.
//!
//! Items and positions are 0-based everywhere in the library; the CLI and
//! the CSV writers translate to 1-based labels at the edge.

use std::borrow::Cow;
use std::cmp::Ordering;

use serde::de::{DeserializeOwned, Error as _};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{MarketError, Result};
use crate::scalar::Scalar;

/// Normalizes per-class arrival rates into class weights.
pub fn derive_class_weights<T: Scalar>(arrival_rates: &[T]) -> Result<Vec<T>> {
    if arrival_rates.is_empty() {
        return Err(MarketError::InvalidInstance(
            "at least one arrival rate is required".into(),
        ));
    }
    if let Some(bad) = arrival_rates.iter().find(|r| !(r.is_finite() && **r > T::zero())) {
        return Err(MarketError::InvalidInstance(format!(
            "arrival rates must be finite and positive, got {bad}"
        )));
    }
    let total: T = arrival_rates.iter().copied().sum();
    Ok(arrival_rates.iter().map(|&r| r / total).collect())
}

/// An immutable trial-offer market instance.
///
/// Appeals and qualities are stored row-major (`item * num_classes + class`).
#[derive(Debug, Clone, PartialEq)]
pub struct Market<T> {
    num_items: usize,
    num_classes: usize,
    arrival_rates: Option<Vec<T>>,
    class_weights: Vec<T>,
    appeals: Vec<T>,
    qualities: Vec<T>,
    visibilities: Vec<T>,
    z: T,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum AppealBound {
    Positive,
    NonNegative,
}

impl<T: Scalar> Market<T> {
    /// Builds and validates an instance. `appeals` and `qualities` are indexed
    /// `[item][class]`.
    pub fn new(
        class_weights: Vec<T>,
        appeals: Vec<Vec<T>>,
        qualities: Vec<Vec<T>>,
        visibilities: Vec<T>,
        z: T,
    ) -> Result<Self> {
        Self::build(
            None,
            class_weights,
            appeals,
            qualities,
            visibilities,
            z,
            AppealBound::Positive,
        )
    }

    /// Like [`Market::new`] but the class weights are derived from arrival rates.
    pub fn from_arrival_rates(
        arrival_rates: Vec<T>,
        appeals: Vec<Vec<T>>,
        qualities: Vec<Vec<T>>,
        visibilities: Vec<T>,
        z: T,
    ) -> Result<Self> {
        let weights = derive_class_weights(&arrival_rates)?;
        Self::build(
            Some(arrival_rates),
            weights,
            appeals,
            qualities,
            visibilities,
            z,
            AppealBound::Positive,
        )
    }

    /// Variant of [`Market::new`] that admits zero appeals.
    ///
    /// Used by the hardness reduction and the tightness constructions, whose
    /// instances contain zero utilities. Every trial denominator must still be
    /// positive, which is checked when probabilities are evaluated.
    pub fn with_nonnegative_appeals(
        class_weights: Vec<T>,
        appeals: Vec<Vec<T>>,
        qualities: Vec<Vec<T>>,
        visibilities: Vec<T>,
        z: T,
    ) -> Result<Self> {
        Self::build(
            None,
            class_weights,
            appeals,
            qualities,
            visibilities,
            z,
            AppealBound::NonNegative,
        )
    }

    fn build(
        arrival_rates: Option<Vec<T>>,
        class_weights: Vec<T>,
        appeals: Vec<Vec<T>>,
        qualities: Vec<Vec<T>>,
        visibilities: Vec<T>,
        z: T,
        bound: AppealBound,
    ) -> Result<Self> {
        let invalid = |msg: String| Err(MarketError::InvalidInstance(msg));
        let num_items = visibilities.len();
        let num_classes = class_weights.len();
        if num_items == 0 {
            return invalid("market needs at least one item".into());
        }
        if num_classes == 0 {
            return invalid("market needs at least one consumer class".into());
        }
        if appeals.len() != num_items || qualities.len() != num_items {
            return invalid(format!(
                "expected {num_items} appeal and quality rows, got {} and {}",
                appeals.len(),
                qualities.len()
            ));
        }
        if let Some(rates) = &arrival_rates {
            if rates.len() != num_classes {
                return invalid("arrival rates and class weights disagree in length".into());
            }
        }

        if class_weights.iter().any(|w| !w.is_finite() || *w < T::zero()) {
            return invalid("class weights must be finite and non-negative".into());
        }
        let weight_sum: T = class_weights.iter().copied().sum();
        if (weight_sum - T::one()).abs() > T::simplex_tolerance() {
            return invalid(format!("class weights sum to {weight_sum}, expected 1"));
        }

        let mut flat_appeals = Vec::with_capacity(num_items * num_classes);
        let mut flat_qualities = Vec::with_capacity(num_items * num_classes);
        for (item, (a_row, q_row)) in appeals.iter().zip(&qualities).enumerate() {
            if a_row.len() != num_classes || q_row.len() != num_classes {
                return invalid(format!(
                    "item {item}: expected {num_classes} columns in appeals and qualities"
                ));
            }
            for (&a, &q) in a_row.iter().zip(q_row) {
                let appeal_ok = match bound {
                    AppealBound::Positive => a.is_finite() && a > T::zero(),
                    AppealBound::NonNegative => a.is_finite() && a >= T::zero(),
                };
                if !appeal_ok {
                    return invalid(format!("item {item}: appeal {a} out of range"));
                }
                if !(q >= T::zero() && q <= T::one()) {
                    return invalid(format!("item {item}: quality {q} outside [0, 1]"));
                }
                flat_appeals.push(a);
                flat_qualities.push(q);
            }
        }

        if visibilities.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return invalid("visibilities must be finite and non-negative".into());
        }
        if visibilities.windows(2).any(|w| w[1] > w[0]) {
            return invalid("visibilities must be sorted in non-increasing order".into());
        }
        if visibilities.iter().all(|v| *v == T::zero()) {
            return invalid("at least one position must have positive visibility".into());
        }
        if !(z.is_finite() && z >= T::zero()) {
            return invalid(format!("no-trial mass z = {z} must be finite and non-negative"));
        }

        Ok(Self {
            num_items,
            num_classes,
            arrival_rates,
            class_weights,
            appeals: flat_appeals,
            qualities: flat_qualities,
            visibilities,
            z,
        })
    }

    pub fn num_items(&self) -> usize {
        self.num_items
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn class_weights(&self) -> &[T] {
        &self.class_weights
    }

    pub fn weight(&self, class: usize) -> T {
        self.class_weights[class]
    }

    pub fn arrival_rates(&self) -> Option<&[T]> {
        self.arrival_rates.as_deref()
    }

    #[inline]
    pub fn appeal(&self, item: usize, class: usize) -> T {
        self.appeals[item * self.num_classes + class]
    }

    #[inline]
    pub fn quality(&self, item: usize, class: usize) -> T {
        self.qualities[item * self.num_classes + class]
    }

    /// Visibility of display position `position`.
    #[inline]
    pub fn visibility(&self, position: usize) -> T {
        self.visibilities[position]
    }

    pub fn visibilities(&self) -> &[T] {
        &self.visibilities
    }

    pub fn z(&self) -> T {
        self.z
    }

    /// Appeals of one class, indexed by item.
    pub fn appeal_column(&self, class: usize) -> Vec<T> {
        (0..self.num_items).map(|i| self.appeal(i, class)).collect()
    }

    /// Qualities of one class, indexed by item.
    pub fn quality_column(&self, class: usize) -> Vec<T> {
        (0..self.num_items).map(|i| self.quality(i, class)).collect()
    }

    pub fn appeal_rows(&self) -> Vec<Vec<T>> {
        self.appeals
            .chunks(self.num_classes)
            .map(|r| r.to_vec())
            .collect()
    }

    pub fn quality_rows(&self) -> Vec<Vec<T>> {
        self.qualities
            .chunks(self.num_classes)
            .map(|r| r.to_vec())
            .collect()
    }

    /// The single-class market seen by consumers of `class`.
    pub fn class_slice(&self, class: usize) -> Market<T> {
        Market {
            num_items: self.num_items,
            num_classes: 1,
            arrival_rates: None,
            class_weights: vec![T::one()],
            appeals: self.appeal_column(class),
            qualities: self.quality_column(class),
            visibilities: self.visibilities.clone(),
            z: self.z,
        }
    }

    /// Same instance with a different visibility profile.
    pub fn with_visibilities(&self, visibilities: Vec<T>) -> Result<Self> {
        let bound = if self.appeals.iter().all(|a| *a > T::zero()) {
            AppealBound::Positive
        } else {
            AppealBound::NonNegative
        };
        Self::build(
            self.arrival_rates.clone(),
            self.class_weights.clone(),
            self.appeal_rows(),
            self.quality_rows(),
            visibilities,
            self.z,
            bound,
        )
    }

    pub fn with_z(&self, z: T) -> Result<Self> {
        if !(z.is_finite() && z >= T::zero()) {
            return Err(MarketError::InvalidInstance(format!(
                "no-trial mass z = {z} must be finite and non-negative"
            )));
        }
        Ok(Self { z, ..self.clone() })
    }

    pub(crate) fn check_class(&self, class: usize) -> Result<()> {
        if class >= self.num_classes {
            return Err(MarketError::InvalidArgument(format!(
                "class {class} out of range for {} classes",
                self.num_classes
            )));
        }
        Ok(())
    }

    pub(crate) fn check_ranking(&self, ranking: &Ranking) -> Result<()> {
        if ranking.len() != self.num_items {
            return Err(MarketError::InvalidArgument(format!(
                "ranking covers {} items, market has {}",
                ranking.len(),
                self.num_items
            )));
        }
        Ok(())
    }

    pub(crate) fn check_counts(&self, counts: &[u64]) -> Result<()> {
        if counts.len() != self.num_items {
            return Err(MarketError::InvalidArgument(format!(
                "count vector has {} entries, market has {} items",
                counts.len(),
                self.num_items
            )));
        }
        Ok(())
    }
}

/// On-disk JSON layout of a market. Matrices are `[item][class]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MarketFile<T> {
    pub num_items: usize,
    pub num_classes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_weights: Option<Vec<T>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arrival_rates: Option<Vec<T>>,
    pub appeals: Vec<Vec<T>>,
    pub qualities: Vec<Vec<T>>,
    pub visibilities: Vec<T>,
    #[serde(default)]
    pub z: Option<T>,
}

impl<T: Scalar> From<&Market<T>> for MarketFile<T> {
    fn from(m: &Market<T>) -> Self {
        MarketFile {
            num_items: m.num_items,
            num_classes: m.num_classes,
            class_weights: Some(m.class_weights.clone()),
            arrival_rates: m.arrival_rates.clone(),
            appeals: m.appeal_rows(),
            qualities: m.quality_rows(),
            visibilities: m.visibilities.clone(),
            z: Some(m.z),
        }
    }
}

impl<T: Scalar> TryFrom<MarketFile<T>> for Market<T> {
    type Error = MarketError;

    fn try_from(file: MarketFile<T>) -> Result<Self> {
        let z = file.z.unwrap_or_else(T::zero);
        let market = match (file.class_weights, file.arrival_rates) {
            (Some(weights), rates) => {
                if let Some(rates) = &rates {
                    let derived = derive_class_weights(rates)?;
                    if derived.len() != weights.len()
                        || derived
                            .iter()
                            .zip(&weights)
                            .any(|(d, w)| (*d - *w).abs() > T::simplex_tolerance())
                    {
                        return Err(MarketError::InvalidInstance(
                            "class_weights disagree with normalized arrival_rates".into(),
                        ));
                    }
                }
                let mut m = Market::new(weights, file.appeals, file.qualities, file.visibilities, z)?;
                m.arrival_rates = rates;
                m
            }
            (None, Some(rates)) => {
                Market::from_arrival_rates(rates, file.appeals, file.qualities, file.visibilities, z)?
            }
            (None, None) => {
                return Err(MarketError::InvalidInstance(
                    "either class_weights or arrival_rates is required".into(),
                ))
            }
        };
        if market.num_items != file.num_items || market.num_classes != file.num_classes {
            return Err(MarketError::InvalidInstance(format!(
                "declared {}x{} instance but matrices are {}x{}",
                file.num_items, file.num_classes, market.num_items, market.num_classes
            )));
        }
        Ok(market)
    }
}

impl<T: Scalar + Serialize> Serialize for Market<T> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        MarketFile::from(self).serialize(serializer)
    }
}

impl<'de, T: Scalar + DeserializeOwned> Deserialize<'de> for Market<T> {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let file = MarketFile::<T>::deserialize(deserializer)?;
        Market::try_from(file).map_err(D::Error::custom)
    }
}

/// A display permutation: `position(item)` is the 0-based slot of `item`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Ranking {
    position_of_item: Vec<usize>,
}

impl Ranking {
    pub fn identity(n: usize) -> Self {
        Self {
            position_of_item: (0..n).collect(),
        }
    }

    /// From `positions[item] = slot`.
    pub fn from_positions(positions: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        let mut seen = vec![false; n];
        for &p in &positions {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(MarketError::InvalidArgument(format!(
                    "{positions:?} is not a permutation of 0..{n}"
                )));
            }
        }
        Ok(Self {
            position_of_item: positions,
        })
    }

    /// From the display order: `order[slot] = item`.
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut positions = vec![usize::MAX; n];
        for (slot, &item) in order.iter().enumerate() {
            if item >= n || positions[item] != usize::MAX {
                return Err(MarketError::InvalidArgument(format!(
                    "{order:?} is not a permutation of 0..{n}"
                )));
            }
            positions[item] = slot;
        }
        Ok(Self {
            position_of_item: positions,
        })
    }

    /// Orders items by decreasing key, lower index first on ties.
    pub fn by_descending_key<T: PartialOrd>(keys: &[T]) -> Self {
        let mut order: Vec<usize> = (0..keys.len()).collect();
        order.sort_by(|&a, &b| {
            keys[b]
                .partial_cmp(&keys[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        Self::from_order(&order).expect("sorted indices form a permutation")
    }

    pub fn len(&self) -> usize {
        self.position_of_item.len()
    }

    pub fn is_empty(&self) -> bool {
        self.position_of_item.is_empty()
    }

    #[inline]
    pub fn position(&self, item: usize) -> usize {
        self.position_of_item[item]
    }

    pub fn positions(&self) -> &[usize] {
        &self.position_of_item
    }

    /// Items listed from the top position down.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.len()];
        for (item, &pos) in self.position_of_item.iter().enumerate() {
            order[pos] = item;
        }
        order
    }

    /// Exchanges the positions of two items.
    pub fn swap_items(&mut self, a: usize, b: usize) {
        self.position_of_item.swap(a, b);
    }
}

impl TryFrom<Vec<usize>> for Ranking {
    type Error = MarketError;

    fn try_from(positions: Vec<usize>) -> Result<Self> {
        Ranking::from_positions(positions)
    }
}

impl From<Ranking> for Vec<usize> {
    fn from(r: Ranking) -> Self {
        r.position_of_item
    }
}

/// One shared ranking, or one ranking per consumer class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rankings {
    Shared(Ranking),
    PerClass(Vec<Ranking>),
}

impl Rankings {
    #[inline]
    pub fn for_class(&self, class: usize) -> &Ranking {
        match self {
            Rankings::Shared(r) => r,
            Rankings::PerClass(rs) => &rs[class],
        }
    }

    pub(crate) fn check<T: Scalar>(&self, config: &Market<T>) -> Result<()> {
        match self {
            Rankings::Shared(r) => config.check_ranking(r),
            Rankings::PerClass(rs) => {
                if rs.len() != config.num_classes() {
                    return Err(MarketError::InvalidArgument(format!(
                        "{} per-class rankings for {} classes",
                        rs.len(),
                        config.num_classes()
                    )));
                }
                rs.iter().try_for_each(|r| config.check_ranking(r))
            }
        }
    }
}

/// Which purchase counts a consumer is shown.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalMode {
    Global,
    Segmented,
    None,
}

/// The purchase counts a consumer observes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "counts")]
pub enum PopularitySignal {
    /// Counts over all classes, indexed by item.
    Global(Vec<u64>),
    /// Counts per class, `counts[class][item]`.
    Segmented(Vec<Vec<u64>>),
    /// Suppressed signal; behaves exactly like all-zero counts.
    NoSignal,
}

impl PopularitySignal {
    pub fn zeros(num_items: usize) -> Self {
        PopularitySignal::Global(vec![0; num_items])
    }

    pub fn mode(&self) -> SignalMode {
        match self {
            PopularitySignal::Global(_) => SignalMode::Global,
            PopularitySignal::Segmented(_) => SignalMode::Segmented,
            PopularitySignal::NoSignal => SignalMode::None,
        }
    }

    /// Counts seen by a class-`class` consumer; `None` stands for all zeros.
    #[inline]
    pub fn observed(&self, class: usize) -> Option<&[u64]> {
        match self {
            PopularitySignal::Global(d) => Some(d),
            PopularitySignal::Segmented(dk) => Some(&dk[class]),
            PopularitySignal::NoSignal => None,
        }
    }

    /// Global counts; under a segmented signal the per-item sum over classes.
    pub fn global(&self, num_items: usize) -> Cow<'_, [u64]> {
        match self {
            PopularitySignal::Global(d) => Cow::Borrowed(d),
            PopularitySignal::Segmented(dk) => {
                let mut total = vec![0u64; num_items];
                for class_counts in dk {
                    for (t, c) in total.iter_mut().zip(class_counts) {
                        *t += c;
                    }
                }
                Cow::Owned(total)
            }
            PopularitySignal::NoSignal => Cow::Owned(vec![0; num_items]),
        }
    }

    pub(crate) fn check<T: Scalar>(&self, config: &Market<T>) -> Result<()> {
        match self {
            PopularitySignal::Global(d) => config.check_counts(d),
            PopularitySignal::Segmented(dk) => {
                if dk.len() != config.num_classes() {
                    return Err(MarketError::InvalidArgument(format!(
                        "segmented signal has {} classes, market has {}",
                        dk.len(),
                        config.num_classes()
                    )));
                }
                dk.iter().try_for_each(|d| config.check_counts(d))
            }
            PopularitySignal::NoSignal => Ok(()),
        }
    }
}

/// Purchase accounting of a running market.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarketState {
    pub step: u64,
    pub global_purchases: Vec<u64>,
    /// `class_purchases[class][item]`.
    pub class_purchases: Vec<Vec<u64>>,
    /// Step of the last purchase of each item, `-1` if never purchased.
    pub last_purchase_step: Vec<i64>,
}

impl MarketState {
    pub fn new(num_items: usize, num_classes: usize) -> Self {
        Self {
            step: 0,
            global_purchases: vec![0; num_items],
            class_purchases: vec![vec![0; num_items]; num_classes],
            last_purchase_step: vec![-1; num_items],
        }
    }

    pub fn for_market<T: Scalar>(config: &Market<T>) -> Self {
        Self::new(config.num_items(), config.num_classes())
    }

    pub fn record_purchase(&mut self, item: usize, class: usize) {
        self.global_purchases[item] += 1;
        self.class_purchases[class][item] += 1;
        self.last_purchase_step[item] = self.step as i64;
    }

    pub fn total_purchases(&self) -> u64 {
        self.global_purchases.iter().sum()
    }

    /// Counts shown to a class-`class` consumer under `mode`.
    #[inline]
    pub fn observed(&self, mode: SignalMode, class: usize) -> Option<&[u64]> {
        match mode {
            SignalMode::Global => Some(&self.global_purchases),
            SignalMode::Segmented => Some(&self.class_purchases[class]),
            SignalMode::None => None,
        }
    }

    pub fn signal(&self, mode: SignalMode) -> PopularitySignal {
        match mode {
            SignalMode::Global => PopularitySignal::Global(self.global_purchases.clone()),
            SignalMode::Segmented => PopularitySignal::Segmented(self.class_purchases.clone()),
            SignalMode::None => PopularitySignal::NoSignal,
        }
    }
}

/// Trial distribution of one consumer: per-item probabilities plus the
/// probability of trying nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDistribution<T> {
    pub items: Vec<T>,
    pub no_trial: T,
}

#[inline]
fn count_at(observed: Option<&[u64]>, item: usize) -> u64 {
    observed.map_or(0, |d| d[item])
}

/// Probability that a class-`class` consumer purchases something, for a
/// fixed ranking and observed counts.
pub(crate) fn class_purchase_probability<T: Scalar>(
    config: &Market<T>,
    ranking: &Ranking,
    observed: Option<&[u64]>,
    class: usize,
) -> Result<T> {
    let mut den = config.z();
    let mut num = T::zero();
    for item in 0..config.num_items() {
        let v = config.visibility(ranking.position(item));
        let w = v * (config.appeal(item, class) + T::from_count(count_at(observed, item)));
        den += w;
        num += w * config.quality(item, class);
    }
    if den <= T::zero() {
        return Err(MarketError::DegenerateInstance(format!(
            "class {class}: trial denominator is zero"
        )));
    }
    Ok(num / den)
}

/// Mixed-logit trial probabilities of a class-`class` consumer.
pub fn trial_probabilities<T: Scalar>(
    config: &Market<T>,
    ranking: &Ranking,
    observed: &[u64],
    class: usize,
) -> Result<TrialDistribution<T>> {
    config.check_ranking(ranking)?;
    config.check_counts(observed)?;
    config.check_class(class)?;
    trial_probabilities_unchecked(config, ranking, Some(observed), class)
}

pub(crate) fn trial_probabilities_unchecked<T: Scalar>(
    config: &Market<T>,
    ranking: &Ranking,
    observed: Option<&[u64]>,
    class: usize,
) -> Result<TrialDistribution<T>> {
    let numerators: Vec<T> = (0..config.num_items())
        .map(|item| {
            config.visibility(ranking.position(item))
                * (config.appeal(item, class) + T::from_count(count_at(observed, item)))
        })
        .collect();
    let den = numerators.iter().copied().sum::<T>() + config.z();
    if den <= T::zero() {
        return Err(MarketError::DegenerateInstance(format!(
            "class {class}: every displayed item has zero weight and z = 0"
        )));
    }
    Ok(TrialDistribution {
        items: numerators.into_iter().map(|n| n / den).collect(),
        no_trial: config.z() / den,
    })
}

/// Probability that the next consumer purchases an item, averaged over
/// classes with their weights.
pub fn purchase_probability_next<T: Scalar>(
    config: &Market<T>,
    rankings: &Rankings,
    signal: &PopularitySignal,
) -> Result<T> {
    rankings.check(config)?;
    signal.check(config)?;
    purchase_probability_unchecked(config, rankings, signal)
}

pub(crate) fn purchase_probability_unchecked<T: Scalar>(
    config: &Market<T>,
    rankings: &Rankings,
    signal: &PopularitySignal,
) -> Result<T> {
    let mut total = T::zero();
    for class in 0..config.num_classes() {
        let p = class_purchase_probability(
            config,
            rankings.for_class(class),
            signal.observed(class),
            class,
        )?;
        total += config.weight(class) * p;
    }
    Ok(total)
}

/// Market shares `d_i / sum_j d_j`.
pub fn market_shares<T: Scalar>(counts: &[u64]) -> Result<Vec<T>> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(MarketError::UndefinedShare);
    }
    let total = T::from_count(total);
    Ok(counts.iter().map(|&d| T::from_count(d) / total).collect())
}
