//! Constrained architecture search.
//!
//! Explores the network-config space with seeded random sampling (or
//! exhaustively when the space fits in the budget), statically rejects
//! candidates over the parameter cap before any evaluation, and ranks the
//! survivors by a NetScore-style universal performance score subject to the
//! sensitivity/specificity/parameter indicator constraints.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{count_complexity, NetworkConfig, StageConfig, StemConfig};

/// Default NetScore-style coefficients: accuracy squared against the
/// geometric mean of parameter and MAC millions.
pub const NETSCORE_ALPHA: f64 = 2.0;
pub const NETSCORE_BETA: f64 = 0.5;
pub const NETSCORE_GAMMA: f64 = 0.5;

/// Feasibility thresholds: sensitivity >= 95%, specificity >= 95%,
/// parameters <= 5M. Inclusive on all three boundaries.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndicatorConstraints {
    pub min_sensitivity: f64,
    pub min_specificity: f64,
    pub max_params: u64,
}

impl Default for IndicatorConstraints {
    fn default() -> Self {
        IndicatorConstraints {
            min_sensitivity: 0.95,
            min_specificity: 0.95,
            max_params: 5_000_000,
        }
    }
}

/// Universal performance score:
/// `u = 20*log10(a^alpha / (p^beta * m^gamma))` with `a` in percent, `p` in
/// millions of parameters and `m` in millions of MACs.
///
/// `a = 0` scores negative infinity (an infeasible score by convention).
pub fn universal_performance(
    accuracy_pct: f64,
    params: u64,
    macs: u64,
    alpha: f64,
    beta: f64,
    gamma: f64,
) -> Result<f64> {
    if params == 0 {
        return Err(Error::NonPositiveComplexity { quantity: "params" });
    }
    if macs == 0 {
        return Err(Error::NonPositiveComplexity { quantity: "macs" });
    }
    if accuracy_pct < 0.0 || !accuracy_pct.is_finite() {
        return Err(Error::Search(format!(
            "accuracy must be a finite percentage >= 0, got {accuracy_pct}"
        )));
    }
    if accuracy_pct == 0.0 {
        return Ok(f64::NEG_INFINITY);
    }
    let p = params as f64 / 1e6;
    let m = macs as f64 / 1e6;
    Ok(20.0 * (alpha * accuracy_pct.log10() - beta * p.log10() - gamma * m.log10()))
}

/// Screening metrics returned by a candidate evaluator. Accuracy is a
/// fraction in [0, 1]; sensitivity/specificity may be undefined on
/// degenerate splits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMetrics {
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: f64,
}

/// The feasibility indicator: 1 iff sensitivity >= min, specificity >= min,
/// and params <= max. Undefined rates never satisfy a threshold.
pub fn indicator(metrics: &CandidateMetrics, params: u64, c: &IndicatorConstraints) -> bool {
    metrics.sensitivity.is_some_and(|s| s >= c.min_sensitivity)
        && metrics.specificity.is_some_and(|s| s >= c.min_specificity)
        && params <= c.max_params
}

/// Choice axes for one backbone stage (a stride-2 PEPE block, optionally
/// followed by an attention condenser).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageChoices {
    /// Expand-channel choices.
    pub widths: Vec<usize>,
    /// Projection width = expand width / ratio.
    pub bottleneck_ratios: Vec<usize>,
    /// Whether an attention condenser follows the stage. A condenser is
    /// placed only where the spatial size stays divisible by its factor.
    pub condenser: Vec<bool>,
    /// PEPE repeat counts.
    pub repeats: Vec<usize>,
}

/// The explorable configuration space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub input_size: (usize, usize),
    pub in_channels: usize,
    pub stem_channels: Vec<usize>,
    /// How many of the declared stages to use (stage-count range).
    pub active_stages: Vec<usize>,
    pub stages: Vec<StageChoices>,
    /// Build seeds handed to candidate evaluators that train networks.
    #[serde(default)]
    pub seeds: Vec<u64>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        if self.input_size.0 == 0 || self.input_size.1 == 0 || self.in_channels == 0 {
            return Err(Error::Search("input_size and in_channels must be positive".into()));
        }
        if self.stem_channels.is_empty() || self.stem_channels.iter().any(|&c| c < 2) {
            return Err(Error::Search("stem_channels choices must all be >= 2".into()));
        }
        if self.stages.is_empty() {
            return Err(Error::Search("at least one stage required".into()));
        }
        if self.active_stages.is_empty()
            || self
                .active_stages
                .iter()
                .any(|&a| a == 0 || a > self.stages.len())
        {
            return Err(Error::Search(format!(
                "active_stages must choose within 1..={}",
                self.stages.len()
            )));
        }
        for (i, st) in self.stages.iter().enumerate() {
            if st.widths.is_empty() || st.widths.iter().any(|&w| w < 2) {
                return Err(Error::Search(format!("stage {i}: widths must all be >= 2")));
            }
            if st.bottleneck_ratios.is_empty() || st.bottleneck_ratios.iter().any(|&r| r < 2) {
                return Err(Error::Search(format!(
                    "stage {i}: bottleneck_ratios must all be >= 2"
                )));
            }
            if st.condenser.is_empty() {
                return Err(Error::Search(format!("stage {i}: condenser choices empty")));
            }
            if st.repeats.is_empty() || st.repeats.iter().any(|&r| r == 0) {
                return Err(Error::Search(format!("stage {i}: repeats must all be >= 1")));
            }
        }
        Ok(())
    }

    /// Upper bound on the number of distinct configs (raw product of the
    /// choice axes; inactive-stage axes can make distinct index vectors
    /// collide on the same config).
    pub fn size(&self) -> u128 {
        let mut n: u128 = self.stem_channels.len() as u128 * self.active_stages.len() as u128;
        for st in &self.stages {
            n = n.saturating_mul(
                (st.widths.len() * st.bottleneck_ratios.len() * st.condenser.len() * st.repeats.len())
                    as u128,
            );
        }
        n
    }

    fn build_config(&self, stem: usize, active: usize, picks: &[(usize, usize, bool, usize)]) -> NetworkConfig {
        let mut stages = Vec::new();
        let (mut h, mut w) = self.input_size;
        h = (h + 2 - 3) / 2 + 1; // stem conv k3 s2 pad 1
        w = (w + 2 - 3) / 2 + 1;
        let mut channels = stem;
        for &(width, ratio, condenser, repeat) in picks.iter().take(active) {
            let proj1 = (width / ratio).clamp(1, channels.saturating_sub(1).max(1));
            let proj2 = (width / ratio).clamp(1, width - 1);
            stages.push(StageConfig::Pepe {
                out_channels: width,
                proj1,
                proj2,
                dw_kernel: 3,
                stride: 2,
                repeat,
            });
            h = (h + 2 - 3) / 2 + 1;
            w = (w + 2 - 3) / 2 + 1;
            channels = width;
            if condenser && h.is_multiple_of(2) && w.is_multiple_of(2) {
                let embed = (width / 2).max(1);
                let groups = [4usize, 2, 1]
                    .into_iter()
                    .find(|g| width.is_multiple_of(*g) && embed.is_multiple_of(*g))
                    .unwrap_or(1);
                stages.push(StageConfig::AttentionCondenser {
                    condense_factor: 2,
                    embed_channels: embed,
                    groups,
                    repeat: 1,
                });
            }
        }
        NetworkConfig {
            schema_version: crate::model::CONFIG_SCHEMA_VERSION,
            input_size: self.input_size,
            in_channels: self.in_channels,
            stem: StemConfig {
                out_channels: stem,
                kernel: 3,
                stride: 2,
            },
            stages,
        }
    }

    /// Samples one config uniformly over the choice axes.
    pub fn sample(&self, rng: &mut impl Rng) -> NetworkConfig {
        let stem = self.stem_channels[rng.gen_range(0..self.stem_channels.len())];
        let active = self.active_stages[rng.gen_range(0..self.active_stages.len())];
        let picks: Vec<(usize, usize, bool, usize)> = self
            .stages
            .iter()
            .map(|st| {
                (
                    st.widths[rng.gen_range(0..st.widths.len())],
                    st.bottleneck_ratios[rng.gen_range(0..st.bottleneck_ratios.len())],
                    st.condenser[rng.gen_range(0..st.condenser.len())],
                    st.repeats[rng.gen_range(0..st.repeats.len())],
                )
            })
            .collect();
        self.build_config(stem, active, &picks)
    }

    /// Every distinct config in the space (deduplicated).
    pub fn enumerate_all(&self) -> Vec<NetworkConfig> {
        let mut radices: Vec<usize> = vec![self.stem_channels.len(), self.active_stages.len()];
        for st in &self.stages {
            radices.push(st.widths.len());
            radices.push(st.bottleneck_ratios.len());
            radices.push(st.condenser.len());
            radices.push(st.repeats.len());
        }
        let total: u128 = radices.iter().map(|&r| r as u128).product();
        let mut seen = std::collections::HashSet::new();
        let mut out = Vec::new();
        let mut digits = vec![0usize; radices.len()];
        for _ in 0..total {
            let stem = self.stem_channels[digits[0]];
            let active = self.active_stages[digits[1]];
            let picks: Vec<(usize, usize, bool, usize)> = self
                .stages
                .iter()
                .enumerate()
                .map(|(i, st)| {
                    (
                        st.widths[digits[2 + 4 * i]],
                        st.bottleneck_ratios[digits[3 + 4 * i]],
                        st.condenser[digits[4 + 4 * i]],
                        st.repeats[digits[5 + 4 * i]],
                    )
                })
                .collect();
            let cfg = self.build_config(stem, active, &picks);
            let key = serde_json::to_string(&cfg).expect("config serializes");
            if seen.insert(key) {
                out.push(cfg);
            }
            // increment mixed-radix counter
            for (d, &r) in digits.iter_mut().zip(&radices) {
                *d += 1;
                if *d < r {
                    break;
                }
                *d = 0;
            }
        }
        out
    }

    /// Loads a space from JSON or TOML (by file extension).
    pub fn from_file(path: &std::path::Path) -> Result<SearchSpace> {
        let text = std::fs::read_to_string(path)?;
        let space: SearchSpace = if path.extension().and_then(|e| e.to_str()) == Some("toml") {
            toml::from_str(&text)?
        } else {
            serde_json::from_str(&text)?
        };
        space.validate()?;
        Ok(space)
    }
}

/// Stable short identifier of a config (prefix of the SHA-256 of its
/// canonical JSON).
pub fn config_hash(config: &NetworkConfig) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    let digest = Sha256::digest(json.as_bytes());
    let mut s = String::with_capacity(12);
    for b in &digest[..6] {
        s.push_str(&format!("{b:02x}"));
    }
    s
}

/// One explored candidate.
#[derive(Debug, Clone, Serialize)]
pub struct CandidateResult {
    pub config: NetworkConfig,
    pub config_hash: String,
    pub params: u64,
    pub macs: u64,
    pub sensitivity: Option<f64>,
    pub specificity: Option<f64>,
    pub accuracy: Option<f64>,
    /// NetScore-style objective; `None` when the candidate was never
    /// evaluated or scored negative infinity (zero accuracy).
    pub u_score: Option<f64>,
    pub feasible: bool,
    /// False when static screening rejected the candidate before any
    /// evaluation.
    pub evaluated: bool,
}

#[derive(Debug)]
pub struct SearchOutcome {
    /// Feasible candidates first (best u_score, ties to fewer params), then
    /// evaluated infeasible by u_score, then statically rejected by params.
    pub ranked: Vec<CandidateResult>,
    /// Set when no candidate satisfied the indicator constraints; the
    /// leading entry is then merely the best infeasible candidate.
    pub feasible_empty: bool,
}

/// Runs the search. Sampling is exhaustive when the whole space fits in
/// `budget`, otherwise `budget` seeded draws. Candidates over the parameter
/// cap are rejected statically; the evaluator is never called for them.
pub fn search(
    space: &SearchSpace,
    budget: usize,
    evaluator: &dyn Fn(&NetworkConfig) -> Result<CandidateMetrics>,
    constraints: &IndicatorConstraints,
    seed: u64,
) -> Result<SearchOutcome> {
    if budget == 0 {
        return Err(Error::Search("budget must be >= 1".into()));
    }
    space.validate()?;

    let configs: Vec<NetworkConfig> = if space.size() <= budget as u128 {
        space.enumerate_all()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut seen = std::collections::HashSet::new();
        let mut v = Vec::new();
        for _ in 0..budget {
            let cfg = space.sample(&mut rng);
            let key = serde_json::to_string(&cfg).expect("config serializes");
            if seen.insert(key) {
                v.push(cfg);
            }
        }
        v
    };

    let mut results = Vec::with_capacity(configs.len());
    for config in configs {
        let report = count_complexity(&config);
        let (params, macs) = (report.total_params, report.total_macs);
        let hash = config_hash(&config);
        if params > constraints.max_params {
            results.push(CandidateResult {
                config,
                config_hash: hash,
                params,
                macs,
                sensitivity: None,
                specificity: None,
                accuracy: None,
                u_score: None,
                feasible: false,
                evaluated: false,
            });
            continue;
        }
        let metrics = evaluator(&config)?;
        if !(0.0..=1.0).contains(&metrics.accuracy) {
            return Err(Error::Search(format!(
                "evaluator returned accuracy {} outside [0, 1]",
                metrics.accuracy
            )));
        }
        let u = universal_performance(
            metrics.accuracy * 100.0,
            params,
            macs,
            NETSCORE_ALPHA,
            NETSCORE_BETA,
            NETSCORE_GAMMA,
        )?;
        let feasible = indicator(&metrics, params, constraints);
        results.push(CandidateResult {
            config,
            config_hash: hash,
            params,
            macs,
            sensitivity: metrics.sensitivity,
            specificity: metrics.specificity,
            accuracy: Some(metrics.accuracy),
            u_score: u.is_finite().then_some(u),
            feasible,
            evaluated: true,
        });
    }

    results.sort_by(|a, b| {
        b.feasible
            .cmp(&a.feasible)
            .then(b.evaluated.cmp(&a.evaluated))
            .then_with(|| match (b.u_score, a.u_score) {
                (Some(x), Some(y)) => x.partial_cmp(&y).unwrap(),
                (Some(_), None) => std::cmp::Ordering::Greater,
                (None, Some(_)) => std::cmp::Ordering::Less,
                (None, None) => std::cmp::Ordering::Equal,
            })
            .then(a.params.cmp(&b.params))
            .then(a.config_hash.cmp(&b.config_hash))
    });
    let feasible_empty = !results.iter().any(|r| r.feasible);
    Ok(SearchOutcome {
        ranked: results,
        feasible_empty,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "n/a".into())
}

/// Writes the ranked leaderboard as CSV.
pub fn write_leaderboard(outcome: &SearchOutcome, mut w: impl Write) -> Result<()> {
    writeln!(
        w,
        "config_hash,params,macs,sensitivity,specificity,accuracy,u_score,feasible"
    )?;
    for r in &outcome.ranked {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.config_hash,
            r.params,
            r.macs,
            fmt_opt(r.sensitivity),
            fmt_opt(r.specificity),
            fmt_opt(r.accuracy),
            fmt_opt(r.u_score),
            r.feasible
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn u_score_closed_form() {
        // a=100, p=1M, m=1M -> 20*log10(100^2) = 80.
        let u = universal_performance(100.0, 1_000_000, 1_000_000, 2.0, 0.5, 0.5).unwrap();
        assert!((u - 80.0).abs() < 1e-9, "{u}");
    }

    #[test]
    fn doubling_params_costs_three_db() {
        let u1 = universal_performance(95.0, 1_000_000, 10_000_000, 2.0, 0.5, 0.5).unwrap();
        let u2 = universal_performance(95.0, 2_000_000, 10_000_000, 2.0, 0.5, 0.5).unwrap();
        let expect = 20.0 * 0.5 * 2f64.log10(); // ~3.0103
        assert!(((u1 - u2) - expect).abs() < 1e-9);
    }

    #[test]
    fn zero_accuracy_is_negative_infinity() {
        let u = universal_performance(0.0, 1_000_000, 1_000_000, 2.0, 0.5, 0.5).unwrap();
        assert!(u == f64::NEG_INFINITY);
    }

    #[test]
    fn zero_complexity_is_an_error() {
        assert!(universal_performance(90.0, 0, 1, 2.0, 0.5, 0.5).is_err());
        assert!(universal_performance(90.0, 1, 0, 2.0, 0.5, 0.5).is_err());
    }

    #[test]
    fn indicator_boundaries_inclusive() {
        let c = IndicatorConstraints::default();
        let m = |s, sp| CandidateMetrics {
            sensitivity: Some(s),
            specificity: Some(sp),
            accuracy: 0.95,
        };
        assert!(indicator(&m(0.96, 0.96), 4_900_000, &c));
        assert!(!indicator(&m(0.96, 0.96), 5_100_000, &c));
        assert!(indicator(&m(0.95, 0.95), 5_000_000, &c), "boundary is inclusive");
        assert!(!indicator(&m(0.9499, 0.95), 5_000_000, &c));
        // Undefined rates never pass.
        let und = CandidateMetrics {
            sensitivity: None,
            specificity: Some(1.0),
            accuracy: 0.99,
        };
        assert!(!indicator(&und, 1_000, &c));
    }

    pub(crate) fn toy_space() -> SearchSpace {
        SearchSpace {
            input_size: (64, 64),
            in_channels: 1,
            stem_channels: vec![4, 8],
            active_stages: vec![2],
            stages: vec![
                StageChoices {
                    widths: vec![8, 16],
                    bottleneck_ratios: vec![4],
                    condenser: vec![false, true],
                    repeats: vec![1],
                },
                StageChoices {
                    widths: vec![16, 32],
                    bottleneck_ratios: vec![4],
                    condenser: vec![false, true],
                    repeats: vec![1, 2],
                },
            ],
            seeds: vec![0],
        }
    }

    #[test]
    fn toy_space_enumerates_within_64() {
        let space = toy_space();
        assert!(space.size() <= 64, "size {}", space.size());
        let all = space.enumerate_all();
        assert!(!all.is_empty());
        for cfg in &all {
            cfg.validate().expect("every enumerated config is valid");
        }
    }

    #[test]
    fn sampled_configs_are_valid() {
        let space = toy_space();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let cfg = space.sample(&mut rng);
            cfg.validate().expect("sampled config valid");
        }
    }

    fn synthetic_metrics(cfg: &NetworkConfig) -> CandidateMetrics {
        // Deterministic pseudo-metrics keyed on the config hash.
        let h = config_hash(cfg);
        let byte = u8::from_str_radix(&h[..2], 16).unwrap() as f64;
        let acc = 0.90 + (byte / 255.0) * 0.10;
        CandidateMetrics {
            sensitivity: Some(acc),
            specificity: Some(acc),
            accuracy: acc,
        }
    }

    #[test]
    fn search_matches_exhaustive_enumeration() {
        let space = toy_space();
        let constraints = IndicatorConstraints::default();
        let outcome = search(&space, 64, &|c| Ok(synthetic_metrics(c)), &constraints, 3).unwrap();
        assert!(!outcome.feasible_empty);

        // Brute-force oracle: evaluate every config, apply the indicator,
        // take the best u_score (ties to fewer params).
        let mut best: Option<(f64, u64, String)> = None;
        for cfg in space.enumerate_all() {
            let rep = count_complexity(&cfg);
            let m = synthetic_metrics(&cfg);
            if !indicator(&m, rep.total_params, &constraints) {
                continue;
            }
            let u = universal_performance(
                m.accuracy * 100.0,
                rep.total_params,
                rep.total_macs,
                NETSCORE_ALPHA,
                NETSCORE_BETA,
                NETSCORE_GAMMA,
            )
            .unwrap();
            let key = (u, rep.total_params, config_hash(&cfg));
            let better = match &best {
                None => true,
                Some((bu, bp, bh)) => {
                    u > *bu || (u == *bu && (key.1 < *bp || (key.1 == *bp && key.2 < *bh)))
                }
            };
            if better {
                best = Some(key);
            }
        }
        let (bu, bp, bh) = best.expect("toy space has feasible configs");
        let top = &outcome.ranked[0];
        assert_eq!(top.config_hash, bh);
        assert_eq!(top.params, bp);
        assert!((top.u_score.unwrap() - bu).abs() < 1e-12);
    }

    #[test]
    fn static_screening_never_evaluates_over_cap() {
        let space = toy_space();
        // Cap below every candidate's params: all statically rejected.
        let constraints = IndicatorConstraints {
            max_params: 10,
            ..Default::default()
        };
        let calls = std::cell::Cell::new(0usize);
        let outcome = search(
            &space,
            64,
            &|c| {
                calls.set(calls.get() + 1);
                Ok(synthetic_metrics(c))
            },
            &constraints,
            5,
        )
        .unwrap();
        assert_eq!(calls.get(), 0, "evaluator must not run on rejected configs");
        assert!(outcome.feasible_empty, "warning flag must be set");
        assert!(outcome.ranked.iter().all(|r| !r.evaluated && !r.feasible));
        // Best infeasible = fewest params first.
        let params: Vec<u64> = outcome.ranked.iter().map(|r| r.params).collect();
        let mut sorted = params.clone();
        sorted.sort();
        assert_eq!(params, sorted);
    }

    #[test]
    fn search_is_reproducible() {
        // A space too large to enumerate exercises the sampling path.
        let mut space = toy_space();
        space.stem_channels = vec![4, 6, 8, 10, 12, 14, 16, 18];
        space.active_stages = vec![1, 2];
        let constraints = IndicatorConstraints::default();
        let a = search(&space, 10, &|c| Ok(synthetic_metrics(c)), &constraints, 9).unwrap();
        let b = search(&space, 10, &|c| Ok(synthetic_metrics(c)), &constraints, 9).unwrap();
        let ha: Vec<&str> = a.ranked.iter().map(|r| r.config_hash.as_str()).collect();
        let hb: Vec<&str> = b.ranked.iter().map(|r| r.config_hash.as_str()).collect();
        assert_eq!(ha, hb);
    }

    #[test]
    fn ranking_invariant_under_common_mac_scaling() {
        // Scaling every candidate's MACs by one constant shifts all scores
        // equally, so the ranking (not the values) is preserved.
        let pm = [(1_200_000u64, 50_000_000u64, 99.0), (900_000, 220_000_000, 98.0), (3_000_000, 80_000_000, 99.5)];
        let rank = |scale: u64| {
            let mut scored: Vec<(usize, f64)> = pm
                .iter()
                .enumerate()
                .map(|(i, &(p, m, a))| {
                    (
                        i,
                        universal_performance(a, p, m * scale, 2.0, 0.5, 0.5).unwrap(),
                    )
                })
                .collect();
            scored.sort_by(|x, y| y.1.partial_cmp(&x.1).unwrap());
            scored.into_iter().map(|(i, _)| i).collect::<Vec<_>>()
        };
        assert_eq!(rank(1), rank(7));
    }
}
