//! Acceptance gate: ten pinned criteria, one test each. Every tolerance and
//! configuration is written out literally here so a change to any of them is
//! visible in review. Tests print one `ACCEPTANCE <n> PASS` line on success
//! (visible with `--nocapture`); the harness itself reports one pass/fail
//! line per criterion either way.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use gaussperc::burton_keane::count_trifurcations;
use gaussperc::connectivity::{
    component_inclusion_map, excursion_mask, flood_fill_oracle, label_components, Adjacency,
    ExcursionMask,
};
use gaussperc::counting::{
    count_boundary_components, count_discrete_critical_points, kac_rice_density_mc,
};
use gaussperc::experiments::{
    estimate_level_threshold, global_equivalence_rate, prepare_shift, uniqueness_statistics,
    ExperimentConfig, GiantRule, ShiftParams,
};
use gaussperc::grid::GridSpec;
use gaussperc::kernels::KernelSpec;
use gaussperc::rng::derive_seed;
use gaussperc::shift::build_shift;
use gaussperc::stats::loglog_slope;
use gaussperc::synthesis::{empirical_covariance, CirculantEmbedding};

// Analytic references, frozen to full f64 precision.
const EXP_MINUS_EIGHTH: f64 = 0.882_496_902_584_595_5; // e^{-1/8}
const EXP_MINUS_HALF: f64 = 0.606_530_659_712_633_4; // e^{-1/2}
const RICE_1D: f64 = 0.551_328_895_421_792_1; // (1/pi) * sqrt(3)

/// Criterion 1 — synthesis fidelity. 128^2 grid at spacing 0.5, 400 seeds:
/// covariance at physical lags {0, 0.5, 1.0} within 3 standard errors of
/// {1, e^{-1/8}, e^{-1/2}}; total runtime under 60 s.
#[test]
fn criterion_01_synthesis_fidelity() {
    let start = Instant::now();
    let kernel = KernelSpec::bargmann_fock(1.0, 2).unwrap();
    let grid = GridSpec::new(vec![128, 128], vec![0.5, 0.5]).unwrap();
    let plan = CirculantEmbedding::plan(&kernel, &grid).unwrap();
    let samples = plan.ensemble(0xAC01, 400);

    let lags = vec![vec![0isize, 0], vec![1, 0], vec![2, 0]];
    let estimates = empirical_covariance(&samples, &lags).unwrap();
    let targets = [1.0, EXP_MINUS_EIGHTH, EXP_MINUS_HALF];

    for (est, &target) in estimates.iter().zip(&targets) {
        assert!(!est.degenerate, "ACCEPTANCE 1 FAIL: degenerate ensemble");
        let dev = (est.estimate - target).abs();
        assert!(
            dev <= 3.0 * est.standard_error,
            "ACCEPTANCE 1 FAIL: lag {:?} covariance {} vs {} ({} standard errors)",
            est.lag,
            est.estimate,
            target,
            dev / est.standard_error
        );
    }
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        elapsed < 60.0,
        "ACCEPTANCE 1 FAIL: runtime {elapsed:.1}s exceeds 60s"
    );
    println!(
        "ACCEPTANCE 1 PASS: covariance at lags (0, 0.5, 1.0) = ({:.4}, {:.4}, {:.4}) within 3 SE of (1, {EXP_MINUS_EIGHTH:.4}, {EXP_MINUS_HALF:.4}); {elapsed:.1}s",
        estimates[0].estimate, estimates[1].estimate, estimates[2].estimate
    );
}

/// Criterion 2 — differential labeling oracle. Union-find partitions match
/// breadth-first flood fill exactly on 1000 random 32^2 masks and 200
/// random 16^3 masks.
#[test]
fn criterion_02_union_find_equals_flood_fill() {
    let mut rng = ChaCha12Rng::seed_from_u64(0xAC02);
    let mut check = |grid: GridSpec, case: usize| {
        let density = 0.2 + 0.6 * ((case % 13) as f64 / 12.0);
        let bits: Vec<bool> = (0..grid.n_vertices())
            .map(|_| rng.random_bool(density))
            .collect();
        let mask = ExcursionMask::from_bits(grid, bits, 0.0, "oracle").unwrap();
        let adjacency = if case % 4 == 0 {
            Adjacency::FacesAndDiagonals
        } else {
            Adjacency::Faces
        };
        let fast = label_components(&mask, adjacency);
        let oracle = flood_fill_oracle(&mask, adjacency);
        assert_eq!(
            fast.labels(),
            oracle.labels(),
            "ACCEPTANCE 2 FAIL: label arrays diverge on case {case}"
        );
        assert_eq!(
            fast.components(),
            oracle.components(),
            "ACCEPTANCE 2 FAIL: component tables diverge on case {case}"
        );
    };

    for case in 0..1000 {
        check(GridSpec::new(vec![32, 32], vec![1.0, 1.0]).unwrap(), case);
    }
    for case in 0..200 {
        check(
            GridSpec::new(vec![16, 16, 16], vec![1.0, 1.0, 1.0]).unwrap(),
            case,
        );
    }
    println!("ACCEPTANCE 2 PASS: 1000 random 32^2 + 200 random 16^3 masks, partitions identical");
}

/// Criterion 3 — trifurcation/boundary inequality. T_L <= max(0, N - 2)
/// on every sample across >= 10^4 sample-scale checks, zero tolerance.
#[test]
fn criterion_03_trifurcation_inequality_everywhere() {
    let kernel = KernelSpec::bargmann_fock(1.0, 2).unwrap();
    let grid = GridSpec::centered(2, 16, 0.5).unwrap(); // covers [-8, 8]^2
    let plan = CirculantEmbedding::plan(&kernel, &grid).unwrap();
    let levels = [-1.0, 0.0, 1.0];
    let n_per_level = 3500usize;
    let (l, r) = (8.0, 2.0);

    let violations: usize = levels
        .iter()
        .enumerate()
        .map(|(li, &level)| {
            (0..n_per_level as u64)
                .into_par_iter()
                .map(|i| {
                    let s = plan.sample(derive_seed(0xAC03 + li as u64, i));
                    let mask = excursion_mask(&s, level);
                    let report = count_trifurcations(&mask, r, l).unwrap();
                    usize::from(!report.inequality_ok)
                })
                .sum::<usize>()
        })
        .sum();

    let checks = levels.len() * n_per_level;
    assert!(checks >= 10_000, "ACCEPTANCE 3 FAIL: only {checks} checks");
    assert_eq!(
        violations, 0,
        "ACCEPTANCE 3 FAIL: {violations} of {checks} checks violated the inequality"
    );
    println!("ACCEPTANCE 3 PASS: inequality held on all {checks} sample-scale checks");
}

/// Criterion 4 — boundary-count exponent. Ensemble-mean boundary-component
/// count at level 0 over box scales {8, 16, 32, 64} (n = 200) fits a
/// log-log slope of 1.0 +/- 0.3 in under 10 minutes.
#[test]
fn criterion_04_boundary_count_exponent() {
    let start = Instant::now();
    let kernel = KernelSpec::bargmann_fock(1.0, 2).unwrap();
    let grid = GridSpec::centered(2, 128, 0.5).unwrap(); // covers [-64, 64]^2
    let plan = CirculantEmbedding::plan(&kernel, &grid).unwrap();
    let scales = [8.0, 16.0, 32.0, 64.0];
    let n = 200usize;

    let totals: Vec<usize> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(0xAC04, i));
            let mask = excursion_mask(&s, 0.0);
            scales
                .iter()
                .map(|&l| count_boundary_components(&mask, l).unwrap())
                .collect::<Vec<usize>>()
        })
        .reduce(
            || vec![0usize; scales.len()],
            |mut acc, row| {
                for (a, b) in acc.iter_mut().zip(row) {
                    *a += b;
                }
                acc
            },
        );

    let means: Vec<f64> = totals.iter().map(|&t| t as f64 / n as f64).collect();
    let (slope, _) = loglog_slope(&scales, &means).unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    assert!(
        (slope - 1.0).abs() <= 0.3,
        "ACCEPTANCE 4 FAIL: log-log slope {slope:.3} outside 1.0 +/- 0.3 (means {means:?})"
    );
    assert!(
        elapsed < 600.0,
        "ACCEPTANCE 4 FAIL: runtime {elapsed:.0}s exceeds 10 minutes"
    );
    println!(
        "ACCEPTANCE 4 PASS: mean boundary counts {means:?} over L = {scales:?}, slope {slope:.3}; {elapsed:.0}s"
    );
}

/// Criterion 5 — one-dimensional rate. Discrete critical-point density
/// within 5% of (1/pi)sqrt(3) at spacing 0.1 over total length >= 10^4, and
/// the conditional Monte Carlo density agrees within 3 standard errors.
#[test]
fn criterion_05_rice_rate_cross_check() {
    let kernel = KernelSpec::bargmann_fock(1.0, 1).unwrap();
    let spacing = 0.1;
    let cells = 65_537usize;
    let grid = GridSpec::new(vec![cells], vec![spacing]).unwrap();
    let plan = CirculantEmbedding::plan(&kernel, &grid).unwrap();
    let n = 10usize;
    let length_per_sample = (cells - 3) as f64 * spacing;

    let densities: Vec<f64> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(0xAC05, i));
            count_discrete_critical_points(&s).unwrap() as f64 / length_per_sample
        })
        .collect();
    let total_length = length_per_sample * n as f64;
    assert!(
        total_length >= 1.0e4,
        "ACCEPTANCE 5 FAIL: total length {total_length} below 10^4"
    );

    let mean = densities.iter().sum::<f64>() / n as f64;
    let var = densities.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let se = (var / n as f64).sqrt();
    let rel = (mean - RICE_1D).abs() / RICE_1D;
    assert!(
        rel <= 0.05,
        "ACCEPTANCE 5 FAIL: discrete density {mean:.5} vs {RICE_1D:.5} ({:.2}% off)",
        100.0 * rel
    );

    let mc = kac_rice_density_mc(&kernel, 300_000, 0xAC55).unwrap();
    let combined_se = (mc.standard_error.powi(2) + se.powi(2)).sqrt();
    let dev = (mc.density - mean).abs();
    assert!(
        dev <= 3.0 * combined_se,
        "ACCEPTANCE 5 FAIL: conditional MC density {:.5} vs discrete {mean:.5} ({:.1} combined SE)",
        mc.density,
        dev / combined_se
    );
    println!(
        "ACCEPTANCE 5 PASS: discrete density {mean:.5} ({:.2}% from {RICE_1D:.5}) over length {total_length:.0}; conditional MC {:.5} within {:.1} SE",
        100.0 * rel, mc.density, dev / combined_se
    );
}

/// Criterion 6 — level threshold. d=2: bisection estimate in [-0.05, 0.05]
/// at box scale 64 with 400 samples per probe. d=3: the confident lower
/// band of the threshold is strictly positive at box scale 32.
#[test]
fn criterion_06_threshold_location() {
    let cfg2 = ExperimentConfig {
        kernel: KernelSpec::bargmann_fock(1.0, 2).unwrap(),
        spacing: 0.25,
        levels: vec![-0.6, 0.6],
        box_scales: vec![64.0],
        n_samples: 400,
        seed: 0xAC06,
        giant_rule: GiantRule::CrossesAxis0,
        shift: None,
    };
    let report2 = estimate_level_threshold(&cfg2).unwrap();
    assert_eq!(report2.bk_violations, 0, "ACCEPTANCE 6 FAIL: invariant");
    assert!(
        report2.estimate.abs() <= 0.05,
        "ACCEPTANCE 6 FAIL: d=2 threshold estimate {} outside [-0.05, 0.05] (band {:?})",
        report2.estimate,
        report2.band
    );

    let cfg3 = ExperimentConfig {
        kernel: KernelSpec::bargmann_fock(1.0, 3).unwrap(),
        spacing: 1.0,
        levels: vec![0.3, 2.0],
        box_scales: vec![32.0],
        n_samples: 200,
        seed: 0xAC63,
        giant_rule: GiantRule::CrossesAxis0,
        shift: None,
    };
    let report3 = estimate_level_threshold(&cfg3).unwrap();
    assert_eq!(report3.bk_violations, 0, "ACCEPTANCE 6 FAIL: invariant");
    assert!(
        report3.band.0 > 0.0,
        "ACCEPTANCE 6 FAIL: d=3 lower band {} not positive (estimate {})",
        report3.band.0,
        report3.estimate
    );
    println!(
        "ACCEPTANCE 6 PASS: d=2 estimate {:.4} in [-0.05, 0.05] ({} probes); d=3 lower band {:.3} > 0 (estimate {:.3})",
        report2.estimate,
        report2.probes.len(),
        report3.band.0,
        report3.estimate
    );
}

/// Criterion 7 — uniqueness trend. P[>= 2 giant components] nonincreasing
/// over box scales {16, 32, 64} and at most 5% at the largest scale, for
/// d=2 at level -1 and d=3 at level 0 (400 samples).
#[test]
fn criterion_07_multiple_giants_die_out() {
    let run = |dim: usize, spacing: f64, level: f64, seed: u64| {
        let cfg = ExperimentConfig {
            kernel: KernelSpec::bargmann_fock(1.0, dim).unwrap(),
            spacing,
            levels: vec![level],
            box_scales: vec![16.0, 32.0, 64.0],
            n_samples: 400,
            seed,
            giant_rule: GiantRule::TouchesAllFaces,
            shift: None,
        };
        let report = uniqueness_statistics(&cfg).unwrap();
        assert_eq!(report.bk_violations, 0, "ACCEPTANCE 7 FAIL: invariant");
        let ps: Vec<f64> = report.cells.iter().map(|c| c.estimate).collect();
        assert!(
            ps[0] >= ps[1] && ps[1] >= ps[2],
            "ACCEPTANCE 7 FAIL: d={dim} P[>=2 giants] {ps:?} not nonincreasing over L = (16, 32, 64)"
        );
        assert!(
            ps[2] <= 0.05,
            "ACCEPTANCE 7 FAIL: d={dim} P[>=2 giants] = {} above 5% at L = 64",
            ps[2]
        );
        ps
    };
    let p2 = run(2, 0.5, -1.0, 0xAC07);
    let p3 = run(3, 2.0, 0.0, 0xAC73);
    println!(
        "ACCEPTANCE 7 PASS: P[>=2 giants] d=2 {p2:?}, d=3 {p3:?} over L = (16, 32, 64), both nonincreasing, <= 5% at 64"
    );
}

/// Criterion 8 — shift bounds, exact. For a battery of kernels and
/// parameters the built shift satisfies h >= 0 at every grid vertex and
/// h >= M + level at every vertex of the ball, as f64 comparisons with no
/// tolerance.
#[test]
fn criterion_08_shift_bounds_exact() {
    let kernels = [
        KernelSpec::bargmann_fock(1.0, 1).unwrap(),
        KernelSpec::bargmann_fock(1.0, 2).unwrap(),
        KernelSpec::bargmann_fock(1.4, 2).unwrap(),
        KernelSpec::cauchy(4.0, 2).unwrap(),
        KernelSpec::bargmann_fock(1.0, 3).unwrap(),
    ];
    let radii = [1.5, 3.0];
    let floors_levels = [(0.5, -0.5), (0.5, 0.5), (2.0, 0.0)];
    let spacing = 0.5;

    let mut configs = 0usize;
    let mut vertices = 0usize;
    for kernel in &kernels {
        let d = kernel.dimension();
        for &radius in &radii {
            for &(floor, level) in &floors_levels {
                let spec = build_shift(kernel, level, radius, floor).unwrap();
                let half = ((radius + 2.0) / spacing).ceil() as usize;
                let grid = GridSpec::centered(d, half, spacing).unwrap();
                let field = spec.field(&grid).unwrap();

                let h = field.values_flat();
                for (lin, &v) in h.iter().enumerate() {
                    assert!(
                        v >= 0.0,
                        "ACCEPTANCE 8 FAIL: h < 0 at vertex {lin} ({} R={radius} M={floor} l={level})",
                        kernel.id()
                    );
                }
                let needed = spec.guaranteed_floor();
                for lin in grid.ball_vertices(&vec![0.0; d], radius) {
                    assert!(
                        h[lin] >= needed,
                        "ACCEPTANCE 8 FAIL: h = {} < M + level = {needed} on the ball ({} R={radius} M={floor} l={level})",
                        h[lin],
                        kernel.id()
                    );
                }
                configs += 1;
                vertices += h.len();
            }
        }
    }
    println!(
        "ACCEPTANCE 8 PASS: h >= 0 and ball bound exact on {configs} shift configs ({vertices} vertices)"
    );
}

/// Criterion 9 — equivalence becomes global. Equivalent-verdict rate
/// nondecreasing in the excluded-ball radius across {R, 2R, 4R} (up to
/// 2-standard-error noise) and at least 90% at the largest radius
/// (d=2, level 0, 200 samples).
#[test]
fn criterion_09_global_equivalence_trend() {
    let cfg = ExperimentConfig {
        kernel: KernelSpec::bargmann_fock(1.0, 2).unwrap(),
        spacing: 0.25,
        levels: vec![0.0],
        box_scales: vec![24.0],
        n_samples: 200,
        seed: 0xAC09,
        giant_rule: GiantRule::TouchesAllFaces,
        shift: Some(ShiftParams {
            radius: 5.0,
            floor_m: None,
            target_prob: 0.75,
            floor_samples: 100,
        }),
    };
    let report = global_equivalence_rate(&cfg, None).unwrap();
    assert_eq!(report.bk_violations, 0, "ACCEPTANCE 9 FAIL: invariant");
    assert_eq!(report.cells.len(), 3);

    let rates: Vec<f64> = report.cells.iter().map(|c| c.estimate).collect();
    let ses: Vec<f64> = report
        .cells
        .iter()
        .map(|c| (c.estimate * (1.0 - c.estimate) / c.n as f64).sqrt())
        .collect();
    for i in 0..2 {
        let slack = 2.0 * (ses[i].powi(2) + ses[i + 1].powi(2)).sqrt();
        assert!(
            rates[i + 1] >= rates[i] - slack,
            "ACCEPTANCE 9 FAIL: rate dropped from {} to {} (slack {slack:.4}) between radii {:?} and {:?}",
            rates[i],
            rates[i + 1],
            report.cells[i].radius,
            report.cells[i + 1].radius
        );
    }
    assert!(
        rates[2] >= 0.90,
        "ACCEPTANCE 9 FAIL: equivalence rate {} below 90% at the largest radius",
        rates[2]
    );
    println!(
        "ACCEPTANCE 9 PASS: equivalent rates {rates:?} over radii (5, 10, 20), nondecreasing within noise, {:.1}% at largest",
        100.0 * rates[2]
    );
}

/// Criterion 10 — monotone coupling. For every sampled pair (f, f + h) the
/// component-inclusion map is well defined: each component of {f >= level}
/// lies inside exactly one component of {f + h >= level}. Exact.
#[test]
fn criterion_10_inclusion_map_well_defined() {
    let cfg = ExperimentConfig {
        kernel: KernelSpec::bargmann_fock(1.0, 2).unwrap(),
        spacing: 0.25,
        levels: vec![0.0],
        box_scales: vec![24.0],
        n_samples: 200,
        seed: 0xAC10,
        giant_rule: GiantRule::TouchesAllFaces,
        shift: Some(ShiftParams {
            radius: 5.0,
            floor_m: None,
            target_prob: 0.75,
            floor_samples: 100,
        }),
    };
    let (_, field) = prepare_shift(&cfg).unwrap();
    let grid = cfg.grid().unwrap();
    let plan = CirculantEmbedding::plan(&cfg.kernel, &grid).unwrap();

    let mapped_components: usize = (0..cfg.n_samples as u64)
        .into_par_iter()
        .map(|i| {
            let s = plan.sample(derive_seed(cfg.seed, i));
            let shifted = gaussperc::shift::shift_sample(&s, &field).unwrap();
            let a = excursion_mask(&s, 0.0);
            let b = excursion_mask(&shifted, 0.0);
            match component_inclusion_map(&a, &b, Adjacency::Faces) {
                Ok(map) => map.len().saturating_sub(1), // entry 0 is unused
                Err(e) => panic!("ACCEPTANCE 10 FAIL: inclusion map undefined on pair {i}: {e}"),
            }
        })
        .sum();

    println!(
        "ACCEPTANCE 10 PASS: inclusion map well defined on all {} pairs ({mapped_components} components mapped)",
        cfg.n_samples
    );
}
