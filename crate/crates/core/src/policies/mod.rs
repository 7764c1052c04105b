//! Ranking policies: static quality rankings, dynamic popularity/activity
//! rankings, and the performance ranking with its solvers.

mod performance;
mod reduction;

pub use performance::{
    performance_ranking_bruteforce, performance_ranking_k1, performance_ranking_swap_heuristic,
    DinkelbachSolution, PerformanceOracle, PerformanceSolution, PerformanceSolver,
    BRUTE_FORCE_MAX_ITEMS,
};
pub use reduction::{
    brute_force_two_class_logit, solve_two_class_logit, AssortmentSolution, TwoClassLogit,
    ASSORTMENT_ENUMERATION_MAX_ITEMS,
};

use serde::{Deserialize, Serialize};

use crate::error::{MarketError, Result};
use crate::model::{Market, MarketState, PopularitySignal, Ranking, Rankings, SignalMode};
use crate::scalar::Scalar;

/// Most purchased item first; lower index wins ties.
pub fn popularity_ranking(counts: &[u64]) -> Ranking {
    Ranking::by_descending_key(counts)
}

/// Most recently purchased item first; never-purchased items (`-1`) last in
/// index order.
pub fn activity_ranking(last_purchase_step: &[i64]) -> Ranking {
    Ranking::by_descending_key(last_purchase_step)
}

/// Class-weighted average quality of every item.
pub fn average_quality<T: Scalar>(config: &Market<T>) -> Vec<T> {
    (0..config.num_items())
        .map(|i| {
            (0..config.num_classes())
                .map(|k| config.weight(k) * config.quality(i, k))
                .sum()
        })
        .collect()
}

/// Items by decreasing average quality.
pub fn average_quality_ranking<T: Scalar>(config: &Market<T>) -> Ranking {
    Ranking::by_descending_key(&average_quality(config))
}

/// One ranking per class, each sorting items by that class's quality.
pub fn segmented_quality_rankings<T: Scalar>(config: &Market<T>) -> Vec<Ranking> {
    (0..config.num_classes())
        .map(|k| Ranking::by_descending_key(&config.quality_column(k)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "policy")]
pub enum PolicyKind {
    Popularity,
    Activity,
    Performance { solver: PerformanceSolver },
    AverageQuality,
    SegmentedQuality,
}

/// A ranking policy together with the popularity signal it displays.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    pub signal: SignalMode,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, signal: SignalMode) -> Result<Self> {
        if kind == PolicyKind::SegmentedQuality && signal == SignalMode::Global {
            return Err(MarketError::InvalidArgument(
                "segmented quality ranking cannot display the global signal".into(),
            ));
        }
        Ok(Self { kind, signal })
    }

    /// Segmented quality ranking with per-class signal.
    pub const fn sqssi() -> Self {
        Self {
            kind: PolicyKind::SegmentedQuality,
            signal: SignalMode::Segmented,
        }
    }

    /// Segmented quality ranking without signal.
    pub const fn sqnsi() -> Self {
        Self {
            kind: PolicyKind::SegmentedQuality,
            signal: SignalMode::None,
        }
    }

    /// Average quality ranking with the global signal.
    pub const fn aqgsi() -> Self {
        Self {
            kind: PolicyKind::AverageQuality,
            signal: SignalMode::Global,
        }
    }

    /// Average quality ranking without signal.
    pub const fn aqnsi() -> Self {
        Self {
            kind: PolicyKind::AverageQuality,
            signal: SignalMode::None,
        }
    }

    /// The four policies compared in the segmentation experiments.
    pub fn experiment_set() -> [PolicySpec; 4] {
        [Self::sqssi(), Self::sqnsi(), Self::aqgsi(), Self::aqnsi()]
    }

    pub fn label(&self) -> String {
        let signal = match self.signal {
            SignalMode::Global => "GSI",
            SignalMode::Segmented => "SSI",
            SignalMode::None => "NSI",
        };
        match self.kind {
            PolicyKind::SegmentedQuality => format!("SQ{signal}"),
            PolicyKind::AverageQuality => format!("AQ{signal}"),
            PolicyKind::Popularity => format!("POP{signal}"),
            PolicyKind::Activity => format!("ACT{signal}"),
            PolicyKind::Performance { solver } => {
                let s = match solver {
                    PerformanceSolver::Exact1Class => "EX",
                    PerformanceSolver::BruteForce => "BF",
                    PerformanceSolver::SwapHeuristic { .. } => "LS",
                };
                format!("PR{s}{signal}")
            }
        }
    }

    /// Parses the four experiment labels (case-insensitive).
    pub fn from_label(label: &str) -> Result<Self> {
        match label.to_ascii_uppercase().as_str() {
            "SQSSI" => Ok(Self::sqssi()),
            "SQNSI" => Ok(Self::sqnsi()),
            "AQGSI" => Ok(Self::aqgsi()),
            "AQNSI" => Ok(Self::aqnsi()),
            other => Err(MarketError::InvalidArgument(format!("unknown policy `{other}`"))),
        }
    }

    /// Static policies ignore the popularity signal entirely.
    pub fn is_static(&self) -> bool {
        match self.kind {
            PolicyKind::AverageQuality | PolicyKind::SegmentedQuality => true,
            PolicyKind::Performance { .. } => self.signal == SignalMode::None,
            PolicyKind::Popularity | PolicyKind::Activity => false,
        }
    }

    /// Checks the policy against a concrete market.
    pub fn validate_for<T: Scalar>(&self, config: &Market<T>) -> Result<()> {
        if let PolicyKind::Performance {
            solver: PerformanceSolver::Exact1Class,
        } = self.kind
        {
            if config.num_classes() != 1 && self.signal != SignalMode::Segmented {
                return Err(MarketError::UnsupportedSolver(format!(
                    "the exact single-class solver needs K = 1, market has K = {}",
                    config.num_classes()
                )));
            }
        }
        Ok(())
    }

    /// Rankings the policy displays in `state`.
    ///
    /// Dynamic policies rank with the counts the firm tracks for the displayed
    /// segment (per class under a segmented signal, global otherwise); the
    /// signal mode only controls what consumers observe.
    pub fn rankings<T: Scalar>(&self, config: &Market<T>, state: &MarketState) -> Result<Rankings> {
        let per_class = self.signal == SignalMode::Segmented;
        let rankings = match self.kind {
            PolicyKind::AverageQuality => Rankings::Shared(average_quality_ranking(config)),
            PolicyKind::SegmentedQuality => {
                Rankings::PerClass(segmented_quality_rankings(config))
            }
            PolicyKind::Popularity if per_class => Rankings::PerClass(
                state.class_purchases.iter().map(|d| popularity_ranking(d)).collect(),
            ),
            PolicyKind::Popularity => Rankings::Shared(popularity_ranking(&state.global_purchases)),
            PolicyKind::Activity => Rankings::Shared(activity_ranking(&state.last_purchase_step)),
            PolicyKind::Performance { solver } if per_class => {
                let mut out = Vec::with_capacity(config.num_classes());
                for (k, counts) in state.class_purchases.iter().enumerate() {
                    let slice = config.class_slice(k);
                    let signal = PopularitySignal::Global(counts.clone());
                    out.push(solver.solve(&slice, &signal)?.0);
                }
                Rankings::PerClass(out)
            }
            PolicyKind::Performance { solver } => {
                self.validate_for(config)?;
                Rankings::Shared(solver.solve(config, &state.signal(self.signal))?.0)
            }
        };
        Ok(rankings)
    }
}
