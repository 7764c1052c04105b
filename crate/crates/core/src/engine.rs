//! Discrete-time agent-based simulation and the seeded Monte Carlo harness.
//!
//! Each step draws a consumer class with the class weights, samples the item
//! the consumer tries (or nothing, with mass `z`), and records a purchase with
//! the item's class quality. Replication `r` of policy `p` draws from its own
//! ChaCha8 stream keyed by `(base_seed, p, r)`, so results do not depend on
//! the thread count.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{MarketError, Result};
use crate::model::{MarketState, Rankings};
use crate::policies::{average_quality, average_quality_ranking, PolicySpec};
use crate::MarketConfig;

/// What happened in one simulated period.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub step: u64,
    pub class: usize,
    /// Item tried, `None` for the no-trial outcome.
    pub tried: Option<usize>,
    pub purchased: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub records: Vec<StepRecord>,
    pub final_state: MarketState,
}

impl SimulationTrace {
    /// Per-item purchase counts rebuilt from the step records.
    pub fn reconstructed_purchases(&self) -> Vec<u64> {
        let mut counts = vec![0; self.final_state.global_purchases.len()];
        for r in self.records.iter().filter(|r| r.purchased) {
            if let Some(i) = r.tried {
                counts[i] += 1;
            }
        }
        counts
    }

    /// Running purchase total after each step.
    pub fn cumulative_purchases(&self) -> Vec<u64> {
        self.records
            .iter()
            .scan(0u64, |acc, r| {
                *acc += u64::from(r.purchased);
                Some(*acc)
            })
            .collect()
    }
}

/// Steps one market forward under a fixed policy.
///
/// Static policies have their rankings computed once; dynamic ones are
/// re-ranked every step from the current state.
#[derive(Debug, Clone)]
pub struct Simulator<'a> {
    config: &'a MarketConfig,
    policy: PolicySpec,
    class_cdf: Vec<f64>,
    last_class: usize,
    appeals: Vec<Vec<f64>>,
    qualities: Vec<Vec<f64>>,
    /// `[class][item]` visibility of the item's slot, for static policies.
    static_visibility: Option<Vec<Vec<f64>>>,
    dynamic_visibility: Vec<f64>,
    prefix: Vec<f64>,
}

fn item_visibilities(config: &MarketConfig, rankings: &Rankings, class: usize, out: &mut Vec<f64>) {
    let ranking = rankings.for_class(class);
    out.clear();
    out.extend((0..config.num_items()).map(|i| config.visibility(ranking.position(i))));
}

impl<'a> Simulator<'a> {
    pub fn new(config: &'a MarketConfig, policy: PolicySpec) -> Result<Self> {
        policy.validate_for(config)?;
        let k = config.num_classes();
        let mut class_cdf = Vec::with_capacity(k);
        let mut acc = 0.0;
        for &w in config.class_weights() {
            acc += w;
            class_cdf.push(acc);
        }
        let last_class = config
            .class_weights()
            .iter()
            .rposition(|&w| w > 0.0)
            .unwrap_or(k - 1);

        let static_visibility = if policy.is_static() {
            let rankings = policy.rankings(config, &MarketState::for_market(config))?;
            Some(
                (0..k)
                    .map(|c| {
                        let mut v = Vec::new();
                        item_visibilities(config, &rankings, c, &mut v);
                        v
                    })
                    .collect(),
            )
        } else {
            None
        };

        Ok(Self {
            config,
            policy,
            class_cdf,
            last_class,
            appeals: (0..k).map(|c| config.appeal_column(c)).collect(),
            qualities: (0..k).map(|c| config.quality_column(c)).collect(),
            static_visibility,
            dynamic_visibility: Vec::with_capacity(config.num_items()),
            prefix: vec![0.0; config.num_items()],
        })
    }

    pub fn policy(&self) -> PolicySpec {
        self.policy
    }

    fn draw_class<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.class_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.last_class)
    }

    /// Advances `state` by one period.
    pub fn step<R: Rng + ?Sized>(&mut self, state: &mut MarketState, rng: &mut R) -> Result<StepRecord> {
        let class = self.draw_class(rng);
        if self.static_visibility.is_none() {
            let rankings = self.policy.rankings(self.config, state)?;
            item_visibilities(self.config, &rankings, class, &mut self.dynamic_visibility);
        }
        let visibility = match &self.static_visibility {
            Some(v) => &v[class],
            None => &self.dynamic_visibility,
        };
        let appeals = &self.appeals[class];
        let observed = state.observed(self.policy.signal, class);

        let mut acc = 0.0;
        let mut last_positive = None;
        for (i, slot) in self.prefix.iter_mut().enumerate() {
            let d = observed.map_or(0.0, |d| d[i] as f64);
            let w = visibility[i] * (appeals[i] + d);
            if w > 0.0 {
                last_positive = Some(i);
            }
            acc += w;
            *slot = acc;
        }
        let z = self.config.z();
        let total = acc + z;
        if total <= 0.0 {
            return Err(MarketError::DegenerateInstance(format!(
                "class {class}: trial distribution has zero mass"
            )));
        }

        let target = rng.random::<f64>() * total;
        let tried = match self.prefix.iter().position(|&c| target < c) {
            Some(i) => Some(i),
            // Rounding can push the target past the last prefix when z = 0.
            None if z == 0.0 => last_positive,
            None => None,
        };

        state.step += 1;
        let purchased = match tried {
            Some(i) => rng.random::<f64>() < self.qualities[class][i],
            None => false,
        };
        if let (Some(i), true) = (tried, purchased) {
            state.record_purchase(i, class);
        }
        Ok(StepRecord {
            step: state.step,
            class,
            tried,
            purchased,
        })
    }
}

/// One period of the market under `policy`.
pub fn simulate_step<R: Rng + ?Sized>(
    config: &MarketConfig,
    policy: PolicySpec,
    state: &mut MarketState,
    rng: &mut R,
) -> Result<StepRecord> {
    Simulator::new(config, policy)?.step(state, rng)
}

/// Runs `horizon` periods from an empty market and keeps every record.
pub fn run_simulation<R: Rng + ?Sized>(
    config: &MarketConfig,
    policy: PolicySpec,
    horizon: u64,
    rng: &mut R,
) -> Result<SimulationTrace> {
    if horizon == 0 {
        return Err(MarketError::InvalidArgument("horizon must be at least 1".into()));
    }
    let mut sim = Simulator::new(config, policy)?;
    let mut state = MarketState::for_market(config);
    let mut records = Vec::with_capacity(horizon as usize);
    for _ in 0..horizon {
        records.push(sim.step(&mut state, rng)?);
    }
    Ok(SimulationTrace {
        records,
        final_state: state,
    })
}

/// Result of one replication without per-step records.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationOutcome {
    /// Cumulative purchases at each requested checkpoint.
    pub cumulative: Vec<u64>,
    pub final_state: MarketState,
}

/// Runs one replication, sampling cumulative purchases at `checkpoints`
/// (sorted, each within `1..=horizon`).
pub fn run_replication<R: Rng + ?Sized>(
    config: &MarketConfig,
    policy: PolicySpec,
    horizon: u64,
    checkpoints: &[u64],
    rng: &mut R,
) -> Result<ReplicationOutcome> {
    validate_checkpoints(horizon, checkpoints)?;
    let mut sim = Simulator::new(config, policy)?;
    let mut state = MarketState::for_market(config);
    let mut cumulative = Vec::with_capacity(checkpoints.len());
    let mut purchases = 0u64;
    let mut next = checkpoints.iter().peekable();
    for t in 1..=horizon {
        purchases += u64::from(sim.step(&mut state, rng)?.purchased);
        while next.peek() == Some(&&t) {
            cumulative.push(purchases);
            next.next();
        }
    }
    Ok(ReplicationOutcome {
        cumulative,
        final_state: state,
    })
}

fn validate_checkpoints(horizon: u64, checkpoints: &[u64]) -> Result<()> {
    if horizon == 0 {
        return Err(MarketError::InvalidArgument("horizon must be at least 1".into()));
    }
    if checkpoints.iter().any(|&c| c == 0 || c > horizon) || checkpoints.windows(2).any(|w| w[0] >= w[1]) {
        return Err(MarketError::InvalidArgument(
            "checkpoints must be strictly increasing and within 1..=horizon".into(),
        ));
    }
    Ok(())
}

/// `count` evenly spaced steps ending at the horizon.
pub fn default_checkpoints(horizon: u64, count: u64) -> Vec<u64> {
    let count = count.max(1);
    let mut out: Vec<u64> = (1..=count)
        .map(|i| ((horizon as u128 * i as u128 + count as u128 / 2) / count as u128) as u64)
        .filter(|&s| s >= 1)
        .collect();
    out.push(horizon);
    out.sort_unstable();
    out.dedup();
    out
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Random stream of replication `replication` of the `policy_index`-th policy.
pub fn replication_rng(base_seed: u64, policy_index: usize, replication: usize) -> ChaCha8Rng {
    let key = splitmix64(base_seed ^ splitmix64(policy_index as u64 ^ 0x5EED_0FF0_11C1));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(replication as u64);
    rng
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloOptions {
    pub horizon: u64,
    pub replications: usize,
    pub base_seed: u64,
    pub checkpoints: Vec<u64>,
    /// Worker threads; `None` uses the global pool.
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl MonteCarloOptions {
    /// Default grid: 100 evenly spaced checkpoints plus the horizon.
    pub fn new(horizon: u64, replications: usize, base_seed: u64) -> Self {
        Self {
            horizon,
            replications,
            base_seed,
            checkpoints: default_checkpoints(horizon, 100),
            threads: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub step: u64,
    pub mean: f64,
    pub stderr: f64,
}

/// Mean cumulative purchases over replications at each checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EfficiencyCurve {
    pub policy: String,
    pub replications: usize,
    pub points: Vec<CurvePoint>,
}

impl EfficiencyCurve {
    pub fn at(&self, step: u64) -> Option<&CurvePoint> {
        self.points.iter().find(|p| p.step == step)
    }

    pub fn last(&self) -> &CurvePoint {
        self.points.last().expect("curves have at least one checkpoint")
    }
}

/// Mean purchases per item at the horizon, total and per class.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PurchaseProfile {
    pub policy: String,
    pub replications: usize,
    pub mean_total: Vec<f64>,
    /// `mean_by_class[class][item]`.
    pub mean_by_class: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonteCarloResult {
    pub curves: Vec<EfficiencyCurve>,
    pub profiles: Vec<PurchaseProfile>,
}

/// Order-fixed pairwise summation.
fn pairwise_sum(xs: &[f64]) -> f64 {
    match xs.len() {
        0 => 0.0,
        1 => xs[0],
        n if n <= 8 => xs.iter().sum(),
        n => {
            let (a, b) = xs.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = pairwise_sum(xs) / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let sq: Vec<f64> = xs.iter().map(|x| (x - mean) * (x - mean)).collect();
    let var = pairwise_sum(&sq) / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs `replications` independent markets per policy and aggregates them.
pub fn monte_carlo(
    config: &MarketConfig,
    policies: &[PolicySpec],
    opts: &MonteCarloOptions,
) -> Result<MonteCarloResult> {
    if opts.replications == 0 {
        return Err(MarketError::InvalidArgument("replications must be at least 1".into()));
    }
    validate_checkpoints(opts.horizon, &opts.checkpoints)?;
    for p in policies {
        p.validate_for(config)?;
    }

    let run = || -> Result<MonteCarloResult> {
        let mut curves = Vec::with_capacity(policies.len());
        let mut profiles = Vec::with_capacity(policies.len());
        for (pi, &policy) in policies.iter().enumerate() {
            let outcomes: Vec<ReplicationOutcome> = (0..opts.replications)
                .into_par_iter()
                .map(|r| {
                    let mut rng = replication_rng(opts.base_seed, pi, r);
                    run_replication(config, policy, opts.horizon, &opts.checkpoints, &mut rng)
                })
                .collect::<Result<_>>()?;
            let (curve, profile) = aggregate(config, policy, &opts.checkpoints, &outcomes);
            curves.push(curve);
            profiles.push(profile);
        }
        Ok(MonteCarloResult { curves, profiles })
    };

    match opts.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| MarketError::InvalidArgument(e.to_string()))?
            .install(run),
        None => run(),
    }
}

fn aggregate(
    config: &MarketConfig,
    policy: PolicySpec,
    checkpoints: &[u64],
    outcomes: &[ReplicationOutcome],
) -> (EfficiencyCurve, PurchaseProfile) {
    let label = policy.label();
    let mut column = Vec::with_capacity(outcomes.len());
    let points = checkpoints
        .iter()
        .enumerate()
        .map(|(c, &step)| {
            column.clear();
            column.extend(outcomes.iter().map(|o| o.cumulative[c] as f64));
            let (mean, stderr) = mean_and_stderr(&column);
            CurvePoint { step, mean, stderr }
        })
        .collect();

    let n = config.num_items();
    let reps = outcomes.len() as f64;
    let item_mean = |f: &dyn Fn(&MarketState) -> u64| {
        let xs: Vec<f64> = outcomes.iter().map(|o| f(&o.final_state) as f64).collect();
        pairwise_sum(&xs) / reps
    };
    let mean_total = (0..n).map(|i| item_mean(&|s| s.global_purchases[i])).collect();
    let mean_by_class = (0..config.num_classes())
        .map(|k| (0..n).map(|i| item_mean(&|s| s.class_purchases[k][i])).collect())
        .collect();

    (
        EfficiencyCurve {
            policy: label.clone(),
            replications: outcomes.len(),
            points,
        },
        PurchaseProfile {
            policy: label,
            replications: outcomes.len(),
            mean_total,
            mean_by_class,
        },
    )
}

/// Formats with 10 significant digits, `%g` style.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{x:.9e}");
    let (mantissa, exponent) = sci.split_once('e').expect("scientific format");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if (-5..10).contains(&exponent) {
        let decimals = (9 - exponent).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!("{}e{exponent}", trim_zeros(mantissa.to_string()))
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes `policy,step,mean_cum_purchases,stderr` rows.
pub fn write_efficiency_csv<W: Write>(out: W, curves: &[EfficiencyCurve]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["policy", "step", "mean_cum_purchases", "stderr"])?;
    for c in curves {
        for p in &c.points {
            w.write_record([
                c.policy.clone(),
                p.step.to_string(),
                format_sig(p.mean),
                format_sig(p.stderr),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes purchase profiles, one row per item and class plus a `total` row.
///
/// Items are 1-based; `avg_quality_rank` is the item's 1-based slot in the
/// average-quality ranking. Class rows carry that class's quality and appeal,
/// total rows the class-weighted averages.
pub fn write_profile_csv<W: Write>(out: W, config: &MarketConfig, profiles: &[PurchaseProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "policy",
        "item",
        "class_or_total",
        "mean_purchases",
        "quality",
        "appeal",
        "avg_quality_rank",
    ])?;
    let avg_q = average_quality(config);
    let aq_rank = average_quality_ranking(config);
    let avg_a: Vec<f64> = (0..config.num_items())
        .map(|i| {
            (0..config.num_classes())
                .map(|k| config.weight(k) * config.appeal(i, k))
                .sum()
        })
        .collect();
    for p in profiles {
        for i in 0..config.num_items() {
            let rank = (aq_rank.position(i) + 1).to_string();
            for (k, by_class) in p.mean_by_class.iter().enumerate() {
                w.write_record([
                    p.policy.clone(),
                    (i + 1).to_string(),
                    (k + 1).to_string(),
                    format_sig(by_class[i]),
                    format_sig(config.quality(i, k)),
                    format_sig(config.appeal(i, k)),
                    rank.clone(),
                ])?;
            }
            w.write_record([
                p.policy.clone(),
                (i + 1).to_string(),
                "total".to_string(),
                format_sig(p.mean_total[i]),
                format_sig(avg_q[i]),
                format_sig(avg_a[i]),
                rank,
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}
