//! Experiment drivers: crossing probabilities, level-threshold bisection,
//! giant-component uniqueness statistics, global-equivalence rates under a
//! shift, and paired event-frequency comparison. Every ensemble run also
//! asserts the trifurcation/boundary inequality on each sample; a violation
//! is counted and surfaced so callers can fail hard.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::burton_keane::count_trifurcations;
use crate::connectivity::{
    excursion_mask, giant_components, label_components, percolation_equivalence, sublevel_mask,
    Adjacency, EquivalenceOutcome, ExcursionMask, GiantCriterion,
};
use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::kernels::KernelSpec;
use crate::rng::derive_seed;
use crate::shift::{build_shift, choose_floor_m, shift_sample, ShiftField, ShiftSpec};
use crate::stats::{loglog_slope, wilson_interval, Z_95};
use crate::synthesis::{CirculantEmbedding, FieldSample};

/// Which giant-component notion an experiment uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GiantRule {
    /// One-direction crossing of the box (threshold estimation).
    #[default]
    CrossesAxis0,
    /// Touches every face (uniqueness counts).
    TouchesAllFaces,
}

impl GiantRule {
    fn criterion(self) -> GiantCriterion {
        match self {
            GiantRule::CrossesAxis0 => GiantCriterion::CrossesAxis(0),
            GiantRule::TouchesAllFaces => GiantCriterion::TouchesAllFaces,
        }
    }
}

/// Shift construction parameters for the experiments that need one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    /// Ball radius the shift must dominate.
    pub radius: f64,
    /// Explicit floor; when absent it is chosen by Monte Carlo quantile.
    #[serde(default)]
    pub floor_m: Option<f64>,
    /// Target probability for the floor choice (used when floor_m is None).
    #[serde(default = "default_target_prob")]
    pub target_prob: f64,
    /// Samples for the floor choice.
    #[serde(default = "default_floor_samples")]
    pub floor_samples: usize,
}

fn default_target_prob() -> f64 {
    0.75
}

fn default_floor_samples() -> usize {
    100
}

/// Everything an experiment needs; with the seed it determines every random
/// draw, so identical configs give identical reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kernel: KernelSpec,
    pub spacing: f64,
    /// Levels probed (or the initial bisection bracket for thresholds).
    pub levels: Vec<f64>,
    /// Box scales, ascending; ensembles are synthesized at the largest and
    /// windowed down so scales are coupled.
    pub box_scales: Vec<f64>,
    pub n_samples: usize,
    pub seed: u64,
    #[serde(default)]
    pub giant_rule: GiantRule,
    #[serde(default)]
    pub shift: Option<ShiftParams>,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "spacing {} must be positive and finite",
                self.spacing
            )));
        }
        if self.levels.is_empty() || self.levels.iter().any(|l| !l.is_finite()) {
            return Err(Error::InvalidConfig(
                "levels must be nonempty and finite".into(),
            ));
        }
        if self.box_scales.is_empty() {
            return Err(Error::InvalidConfig("box_scales must be nonempty".into()));
        }
        if self
            .box_scales
            .windows(2)
            .any(|w| !(w[0] < w[1]))
        {
            return Err(Error::InvalidConfig(
                "box_scales must be strictly increasing".into(),
            ));
        }
        for &l in &self.box_scales {
            let half = l / self.spacing;
            if !(l > 0.0) || (half.round() - half).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!(
                    "box scale {l} must be a positive multiple of the spacing {}",
                    self.spacing
                )));
            }
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidConfig("n_samples must be positive".into()));
        }
        if let Some(sp) = &self.shift {
            if !(sp.radius > 0.0 && sp.radius.is_finite()) {
                return Err(Error::InvalidConfig(format!(
                    "shift radius {} must be positive and finite",
                    sp.radius
                )));
            }
            if !(sp.target_prob > 0.0 && sp.target_prob < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "shift target probability {} must lie in (0, 1)",
                    sp.target_prob
                )));
            }
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    /// The synthesis grid: centered, covering the largest box scale.
    pub fn grid(&self) -> Result<GridSpec> {
        let largest = *self.box_scales.last().expect("validated nonempty");
        let half = (largest / self.spacing).round() as usize;
        GridSpec::centered(self.kernel.dimension(), half, self.spacing)
    }
}

/// One aggregate row of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportCell {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub box_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub level: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    /// Point estimate (a probability unless stated otherwise by the label).
    pub estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    /// Auxiliary counts (e.g. giant-count histogram, failure taxonomy).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub counts: BTreeMap<String, u64>,
}

impl ReportCell {
    fn proportion(label: String, successes: usize, n: usize) -> Self {
        let (lo, hi) = wilson_interval(successes, n, Z_95);
        ReportCell {
            label,
            box_scale: None,
            level: None,
            radius: None,
            estimate: successes as f64 / n as f64,
            ci_low: lo,
            ci_high: hi,
            n,
            counts: BTreeMap::new(),
        }
    }
}

/// Fitted log-log exponent over the report's cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub slope: f64,
    pub intercept: f64,
    pub what: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub cells: Vec<ReportCell>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSummary>,
    /// Trifurcation-inequality spot checks performed / failed. A nonzero
    /// failure count is a fatal determinism bug.
    pub bk_checks: usize,
    pub bk_violations: usize,
    pub wall_seconds: f64,
    pub version: String,
}

impl ExperimentReport {
    fn new(experiment: &str, config: &ExperimentConfig) -> Self {
        ExperimentReport {
            experiment: experiment.into(),
            config_hash: config.hash(),
            config: config.clone(),
            cells: Vec::new(),
            fit: None,
            bk_checks: 0,
            bk_violations: 0,
            wall_seconds: 0.0,
            version: env!("CARGO_PKG_VERSION").into(),
        }
    }

    pub fn deterministic_invariants_hold(&self) -> bool {
        self.bk_violations == 0
    }
}

/// Trifurcation-inequality spot check on one mask at scale `l`, with the
/// ball radius tied to the scale. Returns `(checks, violations)`.
fn bk_spot_check(mask: &ExcursionMask, l: f64) -> Result<(usize, usize)> {
    let report = count_trifurcations(mask, l / 4.0, l)?;
    Ok((1, usize::from(!report.inequality_ok)))
}

/// Count giants in the window of `mask` at scale `l`.
fn giants_in_window(mask: &ExcursionMask, l: f64, rule: GiantRule) -> Result<usize> {
    let w = mask.window(l)?;
    let labeling = label_components(&w, Adjacency::Faces);
    Ok(giant_components(&labeling, rule.criterion()).len())
}

struct CellOutcome {
    giants: usize,
    bk_checks: usize,
    bk_violations: usize,
}

/// Shared ensemble walk: samples at the largest scale, windows down to each
/// requested scale, counts giants, and spot-checks the trifurcation
/// inequality. Samples are synthesized one at a time (sample `i` from
/// `derive_seed(seed_stream, i)`, matching ensemble order) so memory stays
/// bounded at acceptance-test scales. Outcomes are indexed
/// `[level][box_scale][sample]`.
fn run_giant_census(
    cfg: &ExperimentConfig,
    seed_stream: u64,
) -> Result<Vec<Vec<Vec<CellOutcome>>>> {
    let grid = cfg.grid()?;
    let plan = CirculantEmbedding::plan(&cfg.kernel, &grid)?;

    // per_sample[i][level][scale]
    let per_sample: Vec<Vec<Vec<CellOutcome>>> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(seed_stream, i));
            cfg.levels
                .iter()
                .map(|&level| {
                    let mask = excursion_mask(&s, level);
                    cfg.box_scales
                        .iter()
                        .map(|&l| {
                            let giants = giants_in_window(&mask, l, cfg.giant_rule)?;
                            let (checks, violations) = bk_spot_check(&mask, l)?;
                            Ok(CellOutcome {
                                giants,
                                bk_checks: checks,
                                bk_violations: violations,
                            })
                        })
                        .collect::<Result<Vec<_>>>()
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut census: Vec<Vec<Vec<CellOutcome>>> = cfg
        .levels
        .iter()
        .map(|_| {
            cfg.box_scales
                .iter()
                .map(|_| Vec::with_capacity(cfg.n_samples))
                .collect()
        })
        .collect();
    for sample_rows in per_sample {
        for (li, level_rows) in sample_rows.into_iter().enumerate() {
            for (bi, outcome) in level_rows.into_iter().enumerate() {
                census[li][bi].push(outcome);
            }
        }
    }
    Ok(census)
}

/// Fraction of samples whose excursion window contains a giant component,
/// per (level, box scale) cell.
pub fn estimate_crossing_probability(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let mut report = ExperimentReport::new("crossing_probability", cfg);
    let census = run_giant_census(cfg, cfg.seed)?;

    for (li, &level) in cfg.levels.iter().enumerate() {
        for (bi, &l) in cfg.box_scales.iter().enumerate() {
            let outcomes = &census[li][bi];
            let successes = outcomes.iter().filter(|o| o.giants >= 1).count();
            let mut cell = ReportCell::proportion(
                format!("P[giant] level={level} L={l}"),
                successes,
                outcomes.len(),
            );
            cell.level = Some(level);
            cell.box_scale = Some(l);
            report.cells.push(cell);
            report.bk_checks += outcomes.iter().map(|o| o.bk_checks).sum::<usize>();
            report.bk_violations += outcomes.iter().map(|o| o.bk_violations).sum::<usize>();
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// One bisection probe of the threshold search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdProbe {
    pub level: f64,
    pub crossing_probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub estimate: f64,
    /// Levels confidently below / above the threshold bracket it.
    pub band: (f64, f64),
    pub probes: Vec<ThresholdProbe>,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub bk_checks: usize,
    pub bk_violations: usize,
    pub wall_seconds: f64,
    pub version: String,
}

/// Crossing probability at one level, at the largest configured scale.
fn probe_crossing(
    cfg: &ExperimentConfig,
    level: f64,
    probe_seed: u64,
    bk: &mut (usize, usize),
) -> Result<ThresholdProbe> {
    let mut probe_cfg = cfg.clone();
    probe_cfg.levels = vec![level];
    let largest = *cfg.box_scales.last().expect("validated nonempty");
    probe_cfg.box_scales = vec![largest];
    let census = run_giant_census(&probe_cfg, probe_seed)?;
    let outcomes = &census[0][0];
    let successes = outcomes.iter().filter(|o| o.giants >= 1).count();
    bk.0 += outcomes.iter().map(|o| o.bk_checks).sum::<usize>();
    bk.1 += outcomes.iter().map(|o| o.bk_violations).sum::<usize>();
    let (lo, hi) = wilson_interval(successes, outcomes.len(), Z_95);
    Ok(ThresholdProbe {
        level,
        crossing_probability: successes as f64 / outcomes.len() as f64,
        ci_low: lo,
        ci_high: hi,
        n: outcomes.len(),
    })
}

/// Bisection on the level targeting crossing probability 1/2 at the largest
/// configured scale. `cfg.levels` supplies the initial bracket `[lo, hi]`
/// with crossing confidently above 1/2 at `lo` and below at `hi`. Stops
/// when the bracket is narrower than 0.02 or the midpoint's interval
/// contains 1/2 — beyond that, further bisection is Monte Carlo noise.
pub fn estimate_level_threshold(cfg: &ExperimentConfig) -> Result<ThresholdReport> {
    cfg.validate()?;
    if cfg.levels.len() != 2 || !(cfg.levels[0] < cfg.levels[1]) {
        return Err(Error::InvalidConfig(
            "threshold estimation takes levels = [bracket_low, bracket_high]".into(),
        ));
    }
    let start = Instant::now();
    let mut bk = (0usize, 0usize);
    let mut probes = Vec::new();

    let (mut lo, mut hi) = (cfg.levels[0], cfg.levels[1]);
    let p_lo = probe_crossing(cfg, lo, derive_seed(cfg.seed, 1), &mut bk)?;
    let p_hi = probe_crossing(cfg, hi, derive_seed(cfg.seed, 2), &mut bk)?;
    if !(p_lo.ci_low > 0.5 && p_hi.ci_high < 0.5) {
        return Err(Error::NonBracketing {
            lo,
            hi,
            p_lo: p_lo.crossing_probability,
            p_hi: p_hi.crossing_probability,
        });
    }
    // The band tracks levels confidently on each side of the crossing.
    let mut band = (lo, hi);
    probes.push(p_lo);
    probes.push(p_hi);

    let mut counter = 3u64;
    let mut estimate = 0.5 * (lo + hi);
    while hi - lo >= 0.02 {
        let mid = 0.5 * (lo + hi);
        let probe = probe_crossing(cfg, mid, derive_seed(cfg.seed, counter), &mut bk)?;
        counter += 1;
        let contains_half = probe.ci_low <= 0.5 && 0.5 <= probe.ci_high;
        if probe.ci_low > 0.5 {
            lo = mid;
            band.0 = band.0.max(mid);
        } else if probe.ci_high < 0.5 {
            hi = mid;
            band.1 = band.1.min(mid);
        } else {
            // Not statistically distinguishable from 1/2: move the bracket
            // edge by point estimate but keep the band untouched.
            if probe.crossing_probability >= 0.5 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        probes.push(probe);
        estimate = 0.5 * (lo + hi);
        if contains_half {
            // The level statistically indistinguishable from crossing 1/2
            // is the best point estimate we will get.
            estimate = mid;
            break;
        }
    }

    Ok(ThresholdReport {
        estimate,
        band,
        probes,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        bk_checks: bk.0,
        bk_violations: bk.1,
        wall_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

/// Distribution of the giant-component count per box scale, reporting
/// P[>= 2 giants] with its interval and the full histogram. Uses the
/// touches-all-faces notion unless the config overrides it.
pub fn uniqueness_statistics(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    if cfg.levels.len() != 1 {
        return Err(Error::InvalidConfig(
            "uniqueness statistics runs at a single level".into(),
        ));
    }
    let start = Instant::now();
    let mut report = ExperimentReport::new("uniqueness", cfg);
    let census = run_giant_census(cfg, cfg.seed)?;
    let level = cfg.levels[0];

    let mut ls = Vec::new();
    let mut means = Vec::new();
    for (bi, &l) in cfg.box_scales.iter().enumerate() {
        let outcomes = &census[0][bi];
        let multi = outcomes.iter().filter(|o| o.giants >= 2).count();
        let mut cell = ReportCell::proportion(
            format!("P[>=2 giants] level={level} L={l}"),
            multi,
            outcomes.len(),
        );
        cell.level = Some(level);
        cell.box_scale = Some(l);
        for o in outcomes {
            *cell.counts.entry(format!("giants={}", o.giants)).or_insert(0) += 1;
        }
        report.bk_checks += outcomes.iter().map(|o| o.bk_checks).sum::<usize>();
        report.bk_violations += outcomes.iter().map(|o| o.bk_violations).sum::<usize>();
        ls.push(l);
        means.push(outcomes.iter().map(|o| o.giants as f64).sum::<f64>() / outcomes.len() as f64);
        report.cells.push(cell);
    }

    if means.iter().all(|&m| m > 0.0) {
        if let Ok((slope, intercept)) = loglog_slope(&ls, &means) {
            report.fit = Some(FitSummary {
                slope,
                intercept,
                what: "mean giant count vs box scale".into(),
            });
        }
    }
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Build the configured shift against the experiment grid, choosing the
/// floor by quantile when not pinned. Returns the spec and its evaluated,
/// bound-verified field.
pub fn prepare_shift(cfg: &ExperimentConfig) -> Result<(ShiftSpec, ShiftField)> {
    cfg.validate()?;
    let params = cfg
        .shift
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("experiment needs shift parameters".into()))?;
    let level = cfg.levels[0];
    let grid = cfg.grid()?;
    let floor_m = match params.floor_m {
        Some(m) => m,
        None => {
            choose_floor_m(
                &cfg.kernel,
                &grid,
                params.radius,
                params.target_prob,
                params.floor_samples,
                derive_seed(cfg.seed, 0xF100),
            )?
            .m
        }
    };
    let spec = build_shift(&cfg.kernel, level, params.radius, floor_m)?;
    let field = spec.field(&grid)?;
    Ok((spec, field))
}

/// Fraction of samples where the masks of `f` and `f + h` are percolation
/// equivalent outside the ball of each radius in `radii` (defaults to
/// {R_h, 2 R_h, 4 R_h}), with the failure taxonomy per radius.
pub fn global_equivalence_rate(
    cfg: &ExperimentConfig,
    radii: Option<&[f64]>,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    let start = Instant::now();
    let (spec, field) = prepare_shift(cfg)?;
    let r_h = spec.radius();
    let default_radii = [r_h, 2.0 * r_h, 4.0 * r_h];
    let radii = radii.unwrap_or(&default_radii);
    let level = cfg.levels[0];
    let largest = *cfg.box_scales.last().expect("validated nonempty");

    let mut report = ExperimentReport::new("global_equivalence", cfg);
    let grid = cfg.grid()?;
    let plan = CirculantEmbedding::plan(&cfg.kernel, &grid)?;

    struct GeOutcome {
        outcomes: Vec<EquivalenceOutcome>,
        bk_checks: usize,
        bk_violations: usize,
    }

    let results: Vec<GeOutcome> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(cfg.seed, i));
            let shifted = shift_sample(&s, &field)?;
            let a = excursion_mask(&s, level);
            let b = excursion_mask(&shifted, level);
            let mut outcomes = Vec::with_capacity(radii.len());
            for &r in radii {
                outcomes.push(percolation_equivalence(&a, &b, r)?.outcome);
            }
            let (c1, v1) = bk_spot_check(&a, largest)?;
            let (c2, v2) = bk_spot_check(&b, largest)?;
            Ok(GeOutcome {
                outcomes,
                bk_checks: c1 + c2,
                bk_violations: v1 + v2,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    for (ri, &r) in radii.iter().enumerate() {
        let equivalent = results
            .iter()
            .filter(|g| g.outcomes[ri] == EquivalenceOutcome::Equivalent)
            .count();
        let mut cell = ReportCell::proportion(
            format!("P[equivalent] R={r} level={level}"),
            equivalent,
            results.len(),
        );
        cell.level = Some(level);
        cell.radius = Some(r);
        for g in &results {
            let key = match g.outcomes[ri] {
                EquivalenceOutcome::Equivalent => "equivalent",
                EquivalenceOutcome::Merging => "merging",
                EquivalenceOutcome::Emergence => "emergence",
                EquivalenceOutcome::Explosion => "explosion",
            };
            *cell.counts.entry(key.into()).or_insert(0) += 1;
        }
        report.cells.push(cell);
    }
    report.bk_checks = results.iter().map(|g| g.bk_checks).sum();
    report.bk_violations = results.iter().map(|g| g.bk_violations).sum();
    report.wall_seconds = start.elapsed().as_secs_f64();
    Ok(report)
}

/// Events whose frequency is compared between the plain and shifted
/// ensembles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "event")]
pub enum ShiftEvent {
    /// At least `k` giant components intersect the ball of radius `radius`.
    GiantsIntersectBall { k: usize, radius: f64 },
    /// The field exceeds the level somewhere in the ball of radius
    /// `radius`.
    ExceedsLevelInBall { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedFrequencies {
    pub event: ShiftEvent,
    pub plain: ReportCell,
    pub shifted: ReportCell,
    /// Qualitative contract: either both frequencies are zero, or both are
    /// positive within statistical resolution.
    pub consistent: bool,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub bk_checks: usize,
    pub bk_violations: usize,
    pub wall_seconds: f64,
    pub version: String,
}

fn event_happens(
    sample: &FieldSample,
    level: f64,
    largest: f64,
    rule: GiantRule,
    event: ShiftEvent,
) -> Result<bool> {
    match event {
        ShiftEvent::GiantsIntersectBall { k, radius } => {
            if k == 0 {
                return Ok(true);
            }
            let mask = excursion_mask(sample, level).window(largest)?;
            let labeling = label_components(&mask, Adjacency::Faces);
            let giants = giant_components(&labeling, rule.criterion());
            let ball = mask
                .grid()
                .ball_vertices(&vec![0.0; mask.grid().dim()], radius);
            let hit = giants
                .iter()
                .filter(|&&g| ball.iter().any(|&lin| labeling.label_at(lin) == g))
                .count();
            Ok(hit >= k)
        }
        ShiftEvent::ExceedsLevelInBall { radius } => {
            let grid = sample.grid();
            let ball = grid.ball_vertices(&vec![0.0; grid.dim()], radius);
            let flat = sample.values_flat();
            Ok(ball.iter().any(|&lin| flat[lin] >= level))
        }
    }
}

/// Frequency of the event under paired plain/shifted samples (same seeds).
/// Mutual absolute continuity predicts the two frequencies are both zero or
/// both positive; the report records whether the data are consistent with
/// that at the Wilson 95% level.
pub fn shift_event_frequency_compare(
    cfg: &ExperimentConfig,
    event: ShiftEvent,
) -> Result<PairedFrequencies> {
    cfg.validate()?;
    let start = Instant::now();
    let (_, field) = prepare_shift(cfg)?;
    let level = cfg.levels[0];
    let largest = *cfg.box_scales.last().expect("validated nonempty");

    let grid = cfg.grid()?;
    let plan = CirculantEmbedding::plan(&cfg.kernel, &grid)?;

    let rows: Vec<(bool, bool, usize, usize)> = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(cfg.seed, i));
            let shifted = shift_sample(&s, &field)?;
            let plain = event_happens(&s, level, largest, cfg.giant_rule, event)?;
            let with_shift = event_happens(&shifted, level, largest, cfg.giant_rule, event)?;
            let (c, v) = bk_spot_check(&excursion_mask(&s, level), largest)?;
            Ok((plain, with_shift, c, v))
        })
        .collect::<Result<Vec<_>>>()?;

    let n = rows.len();
    let plain_hits = rows.iter().filter(|r| r.0).count();
    let shifted_hits = rows.iter().filter(|r| r.1).count();
    let plain = ReportCell::proportion(format!("plain {event:?}"), plain_hits, n);
    let shifted = ReportCell::proportion(format!("shifted {event:?}"), shifted_hits, n);

    // Inconsistent only when one frequency is exactly zero while the other
    // is significantly positive.
    let conflicting = (plain_hits == 0 && shifted.ci_low > 0.0 && shifted_hits > 0)
        || (shifted_hits == 0 && plain.ci_low > 0.0 && plain_hits > 0);

    Ok(PairedFrequencies {
        event,
        consistent: !conflicting,
        plain,
        shifted,
        config_hash: cfg.hash(),
        config: cfg.clone(),
        bk_checks: rows.iter().map(|r| r.2).sum(),
        bk_violations: rows.iter().map(|r| r.3).sum(),
        wall_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").into(),
    })
}

/// Mirror-symmetry helper for the threshold tests: the crossing probability
/// of `{f <= level}` equals, in law, that of `{f >= -level}`.
pub fn sublevel_crossing_probability(
    cfg: &ExperimentConfig,
    level: f64,
    seed_stream: u64,
) -> Result<ReportCell> {
    cfg.validate()?;
    let grid = cfg.grid()?;
    let plan = CirculantEmbedding::plan(&cfg.kernel, &grid)?;
    let largest = *cfg.box_scales.last().expect("validated nonempty");
    let hits = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(seed_stream, i));
            let mask = sublevel_mask(&s, level).window(largest)?;
            let labeling = label_components(&mask, Adjacency::Faces);
            Ok(usize::from(
                !giant_components(&labeling, cfg.giant_rule.criterion()).is_empty(),
            ))
        })
        .collect::<Result<Vec<usize>>>()?
        .iter()
        .sum::<usize>();
    let mut cell = ReportCell::proportion(
        format!("P[sublevel giant] level={level} L={largest}"),
        hits,
        cfg.n_samples,
    );
    cell.level = Some(level);
    cell.box_scale = Some(largest);
    Ok(cell)
}
