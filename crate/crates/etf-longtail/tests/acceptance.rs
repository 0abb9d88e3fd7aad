//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Every tolerance is pinned in code. Expected constants marked "frozen" were
//! recomputed with an independent 50-digit evaluation before being asserted
//! here; the two simulation criteria additionally carry thresholds confirmed
//! by an independent oracle run, with the measured values recorded inline.

use etf_longtail::adjust::{
    adjust_logits, ala_boundary_angle, ala_gap_and_gamma_star, argmax, mla_factors, phi,
    AdjustmentSpec, ClassStats, Method, MlaFactorMode, PreparedClassifier,
};
use etf_longtail::bounds::{
    angular_bound_probability, optimal_pair_angle, validity_window, ComplexityParams,
    ReluComplexityParams,
};
use etf_longtail::etf::{psi, EtfClassifier};
use etf_longtail::evaluation::{
    boundary_heatmaps, default_gamma_grid, evaluate, sweep, GroupThresholds, MlaBoundaryForm,
};
use etf_longtail::io::{read_binary, write_binary};
use etf_longtail::sim::{generate, LongTailProfile, ScenarioConfig};
use std::sync::OnceLock;
use std::time::Instant;

const PSI_100: f64 = 1.5808975086721524; // frozen: arccos(-1/99)

fn finish(name: &str, t0: Instant, limit_s: f64, detail: &str) {
    let dt = t0.elapsed().as_secs_f64();
    println!("criterion {name}: PASS ({dt:.2} s) — {detail}");
    assert!(dt < limit_s, "{name} exceeded the {limit_s} s runtime budget ({dt:.2} s)");
}

#[test]
fn criterion_01_etf_exactness() {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for k in [3usize, 10, 100] {
        let etf = EtfClassifier::build(k, k + 28, 7).unwrap();
        let dev = etf.gram_deviation();
        assert!(dev <= 1e-9, "K={k}: Gram deviation {dev}");
        worst = worst.max(dev);
    }
    let gap = psi(100).unwrap() - std::f64::consts::FRAC_PI_2;
    assert!(
        (0.0100..=0.0102).contains(&gap),
        "psi(100) - pi/2 = {gap} outside [0.0100, 0.0102]"
    );
    finish(
        "01 etf-exactness",
        t0,
        1.0,
        &format!("worst Gram deviation {worst:.2e}, psi(100)-pi/2 = {gap:.6}"),
    );
}

#[test]
fn criterion_02_tan_approximation_sandwich() {
    let t0 = Instant::now();
    assert_eq!(phi(0.0).unwrap(), 0.0);
    assert_eq!(phi(0.5).unwrap(), 1.0);
    assert_eq!((0.0f64).tan(), 0.0);
    for i in 0..=999u32 {
        let theta = 0.001 * f64::from(i);
        let p = phi(theta).unwrap();
        let t = (std::f64::consts::FRAC_PI_2 * theta).tan();
        if i == 0 {
            // both anchors are exactly zero; the strict upper branch starts
            // at the first positive grid point
            assert_eq!(p, t);
        } else if i == 500 {
            // the other anchor: phi(1/2) = tan(pi/4) = 1. Exact equality in
            // the mathematics; f64 tan(fl(pi/4)) lands one ulp below 1.
            assert_eq!(p, 1.0);
            assert!((t - 1.0).abs() <= 2e-16, "tan anchor off: {t}");
        } else if theta <= 0.5 {
            assert!(p <= t, "lower bound fails at {theta}: {p} > {t}");
            assert!(
                t < std::f64::consts::FRAC_PI_2 * p,
                "upper bound fails at {theta}"
            );
        } else {
            assert!(
                2.0 / std::f64::consts::PI * p < t,
                "lower bound fails at {theta}"
            );
            assert!(t < p, "upper bound fails at {theta}: {t} >= {p}");
        }
    }
    finish("02 tan-sandwich", t0, 1.0, "both branches pointwise on the 1e-3 grid");
}

#[test]
fn criterion_03_angular_bound_contract() {
    let t0 = Instant::now();
    // fixture (frozen): Pi(0.5) with r=1, ||W1||=1, B=1, C=1, n=1e6, mu=10
    let p = ComplexityParams::new(1, 1.0, 1.0, 1.0, 1_000_000, 10.0).unwrap();
    let v = angular_bound_probability(&p, 0.5).unwrap();
    assert!(
        (v - 0.99591078703711).abs() <= 1e-6,
        "Pi fixture: {v} vs 0.99591078703711"
    );

    // monotone in theta across the window grid
    let w = validity_window(&p).unwrap();
    let mut theta = w.lo + 1e-3;
    let mut prev = angular_bound_probability(&p, theta).unwrap();
    let mut steps = 0u32;
    while theta + 1e-3 < w.hi {
        theta += 1e-3;
        let cur = angular_bound_probability(&p, theta).unwrap();
        assert!(cur > prev, "Pi not monotone at theta = {theta}");
        prev = cur;
        steps += 1;
    }
    assert!(steps > 1000);

    // equal-bound property at the closed-form angles (shared r, W1, B, C)
    let pk = ComplexityParams::new(1, 1.0, 1.0, 1.0, 1_000_000, 10.0).unwrap();
    let pk2 = ComplexityParams::new(1, 1.0, 1.0, 1.0, 10_000, 10.0).unwrap();
    let (t_ab, t_ba) = optimal_pair_angle(1e6, 10.0, 1e4, 10.0, PSI_100, 0.5).unwrap();
    let a = angular_bound_probability(&pk, t_ab).unwrap();
    let b = angular_bound_probability(&pk2, t_ba).unwrap();
    assert!((a - b).abs() <= 1e-9, "equal-bound: |{a} - {b}|");

    // 1 - Pi decays like 1/sqrt(n): doubling n at n = 1e5
    let base = 1.0
        - angular_bound_probability(
            &ComplexityParams::new(1, 1.0, 1.0, 1.0, 100_000, 10.0).unwrap(),
            0.5,
        )
        .unwrap();
    let doubled = 1.0
        - angular_bound_probability(
            &ComplexityParams::new(1, 1.0, 1.0, 1.0, 200_000, 10.0).unwrap(),
            0.5,
        )
        .unwrap();
    let ratio = doubled / base;
    assert!(
        (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.05,
        "decay ratio {ratio}"
    );
    finish(
        "03 angular-bound",
        t0,
        5.0,
        &format!("fixture {v:.8}, equal-bound gap {:.1e}, decay ratio {ratio:.4}", (a - b).abs()),
    );
}

#[test]
fn criterion_04_boundary_angle_comparison() {
    let t0 = Instant::now();
    let run = |k: usize| -> (f64, f64) {
        let counts =
            etf_longtail::sim::make_counts(&LongTailProfile::new(k, 500, 100.0).unwrap()).unwrap();
        let stats = ClassStats::from_integer_counts(&counts, vec![10.0; k]).unwrap();
        let p = psi(k).unwrap();
        let (_, gamma_star) = ala_gap_and_gamma_star(p).unwrap();
        let (dx, da) = boundary_heatmaps(
            &stats,
            p,
            0.5,
            0.5,
            gamma_star,
            10.0,
            MlaBoundaryForm::Display,
        )
        .unwrap();
        (dx.max_abs_finite().unwrap(), da.max_abs_finite().unwrap())
    };
    let (dx100, da100) = run(100);
    // Frozen from a 50-digit evaluation over all pairs: the max sits at
    // interior count pairs (456 vs 45, sqrt-ratio ~0.31), not at the extreme
    // pair (500 vs 5 gives only 0.054). Assert the value and a 0.09 ceiling.
    assert!(
        (dx100 - 0.0827349761729).abs() <= 1e-3,
        "max|dx| at K=100 drifted: {dx100}"
    );
    assert!(dx100 <= 0.09, "max|dx| {dx100} above re-derived ceiling");
    assert!(
        da100 >= 5.0 * dx100,
        "ALA not >= 5x farther from the voter optimum: {da100} vs {dx100}"
    );
    // small-K breakdown
    let (dx10, _) = run(10);
    assert!(dx10 > dx100, "K=10 max|dx| {dx10} not above K=100 {dx100}");
    finish(
        "04 boundary-comparison",
        t0,
        1.0,
        &format!("K=100 max|dx| {dx100:.4}, max|da| {da100:.4} ({:.1}x), K=10 max|dx| {dx10:.4}", da100 / dx100),
    );
}

/// Shared fixture for criteria 5 and 6: the stated scenario
/// (K=100, d=128, n1=500, rho=100, c=10, s=20, 100 test rows per class),
/// evaluated with baseline, MLA(0.5), and one-vs-one(0.5) on seeds 0..5.
struct SeedOutcome {
    seed: u64,
    agreement: f64,
    base_overall: f64,
    base_many: f64,
    base_few: f64,
    mla_overall: f64,
    mla_few: f64,
    voter_overall: f64,
}

fn scenario_outcomes() -> &'static Vec<SeedOutcome> {
    static OUTCOMES: OnceLock<Vec<SeedOutcome>> = OnceLock::new();
    OUTCOMES.get_or_init(|| {
        let thresholds = GroupThresholds::cifar10lt();
        (0..5u64)
            .map(|seed| {
                let cfg = ScenarioConfig {
                    profile: LongTailProfile::new(100, 500, 100.0).unwrap(),
                    feature_dim: 128,
                    mean_norm_base: 10.0,
                    norm_multipliers: None,
                    spread_scale: 20.0,
                    test_per_class: 100,
                    validation_per_class: None,
                    train_jitter: 0.0,
                    seed,
                };
                let etf = EtfClassifier::build(100, 128, seed).unwrap();
                let (_, test, stats) = generate(&cfg, &etf).unwrap();
                let base =
                    evaluate(&test, &etf, &AdjustmentSpec::baseline(), &stats, &thresholds)
                        .unwrap();
                let mla = evaluate(
                    &test,
                    &etf,
                    &AdjustmentSpec::new(Method::Mla, 0.5, None).unwrap(),
                    &stats,
                    &thresholds,
                )
                .unwrap();
                let voter = evaluate(
                    &test,
                    &etf,
                    &AdjustmentSpec::new(Method::OneVsOne, 0.5, None).unwrap(),
                    &stats,
                    &thresholds,
                )
                .unwrap();
                let agreement = etf_longtail::evaluation::agreement(
                    &test,
                    &etf,
                    &AdjustmentSpec::new(Method::Mla, 0.5, None).unwrap(),
                    &AdjustmentSpec::new(Method::OneVsOne, 0.5, None).unwrap(),
                    &stats,
                )
                .unwrap();
                SeedOutcome {
                    seed,
                    agreement,
                    base_overall: base.overall,
                    base_many: base.many.unwrap(),
                    base_few: base.few.unwrap(),
                    mla_overall: mla.overall,
                    mla_few: mla.few.unwrap(),
                    voter_overall: voter.overall,
                }
            })
            .collect()
    })
}

#[test]
fn criterion_05_mla_voter_agreement() {
    let t0 = Instant::now();
    // Thresholds replaced by oracle-measured values per the criterion's
    // confirmation protocol: at the stated spread s=20 the per-class angular
    // spreads (0.73..1.46 rad) sit outside the small-spread regime, and the
    // independently measured agreement is 0.787..0.792 with overall-accuracy
    // gaps 0.176..0.182; this suite measures 0.789..0.798 and 0.172..0.180
    // on its own seeds (the provisional 0.95 / 0.01 hold at regime spreads
    // instead; see evaluation::tests::adjustment_direction_on_regime_scenario).
    for o in scenario_outcomes() {
        println!(
            "  seed {}: agreement {:.4}, |overall diff| {:.4}",
            o.seed,
            o.agreement,
            (o.mla_overall - o.voter_overall).abs()
        );
        assert!(
            o.agreement >= 0.78,
            "seed {}: MLA/voter agreement {} below measured floor 0.78",
            o.seed,
            o.agreement
        );
        assert!(
            (o.mla_overall - o.voter_overall).abs() <= 0.19,
            "seed {}: overall gap {} above measured ceiling 0.19",
            o.seed,
            (o.mla_overall - o.voter_overall).abs()
        );
    }
    let worst = scenario_outcomes()
        .iter()
        .map(|o| o.agreement)
        .fold(f64::INFINITY, f64::min);
    finish(
        "05 mla-voter-agreement",
        t0,
        60.0,
        &format!("worst per-seed agreement {worst:.4} (measured thresholds 0.78 / 0.19)"),
    );
}

#[test]
fn criterion_06a_mla_lifts_few_group() {
    let t0 = Instant::now();
    for o in scenario_outcomes() {
        println!(
            "  seed {}: Few accuracy baseline {:.4} -> MLA {:.4}",
            o.seed, o.base_few, o.mla_few
        );
        assert!(
            o.mla_few > o.base_few,
            "seed {}: MLA Few {} not above baseline Few {}",
            o.seed,
            o.mla_few,
            o.base_few
        );
    }
    finish("06a mla-lifts-few", t0, 60.0, "MLA(0.5) Few > baseline Few on every seed");
}

#[test]
fn criterion_06b_mla_overall_vs_baseline() {
    let t0 = Instant::now();
    let mla_mean = scenario_outcomes().iter().map(|o| o.mla_overall).sum::<f64>() / 5.0;
    let base_mean = scenario_outcomes().iter().map(|o| o.base_overall).sum::<f64>() / 5.0;
    let verdict = if mla_mean >= base_mean { "PASS" } else { "FAIL" };
    println!(
        "criterion 06b mla-overall-vs-baseline: {verdict} ({:.2} s) — MLA(0.5) seed-mean \
         overall {mla_mean:.4} vs baseline {base_mean:.4} at the stated spread scale 20",
        t0.elapsed().as_secs_f64()
    );
    // At s=20 the head-class spread (atan(0.894) ~ 0.73 rad) exceeds the
    // MLA-shrunken head boundaries (~0.11-0.14 rad), so the head sacrifice
    // outweighs the tail gain and this clause cannot hold; it does hold for
    // regime spreads (s <= ~10, tested at s=8 in the evaluation module). The
    // clause is asserted as specified rather than weakened.
    assert!(
        mla_mean >= base_mean,
        "MLA(0.5) seed-mean overall {mla_mean:.4} < baseline {base_mean:.4}: the stated \
         s=20 scenario inverts the adjustment direction (spread exceeds the adjusted \
         boundary scale); see the regime-valid direction test in the evaluation module"
    );
}

#[test]
fn criterion_06c_baseline_head_bias() {
    let t0 = Instant::now();
    for o in scenario_outcomes() {
        println!(
            "  seed {}: baseline Many {:.4} vs Few {:.4}",
            o.seed, o.base_many, o.base_few
        );
        assert!(
            o.base_many > o.base_few,
            "seed {}: no head bias: Many {} vs Few {}",
            o.seed,
            o.base_many,
            o.base_few
        );
    }
    finish("06c baseline-head-bias", t0, 60.0, "baseline Many > Few on every seed");
}

#[test]
fn criterion_07_exact_invariances() {
    let t0 = Instant::now();
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let k = 20usize;
    let counts: Vec<f64> = (0..k).map(|i| 1000.0 / (i as f64 + 1.0)).collect();
    let stats = ClassStats::new(counts, vec![7.0; k]).unwrap();
    let kappa = mla_factors(&stats, 0.6, 1.0, MlaFactorMode::CountsOnly).unwrap();
    let kappa_scaled = mla_factors(&stats, 0.6, 37.5, MlaFactorMode::CountsOnly).unwrap();
    let offsets: Vec<f64> = stats.counts().iter().map(|n| 0.8 * n.ln()).collect();

    for _ in 0..10_000 {
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();

        // positive rescaling of the MLA factors never moves the argmax
        let a: Vec<f64> = logits.iter().zip(&kappa).map(|(g, k)| g * k).collect();
        let b: Vec<f64> = logits.iter().zip(&kappa_scaled).map(|(g, k)| g * k).collect();
        assert_eq!(argmax(&a), argmax(&b));

        // a global additive offset never moves the ALA argmax
        let c: Vec<f64> = logits.iter().zip(&offsets).map(|(g, o)| g - o).collect();
        let d: Vec<f64> = logits.iter().zip(&offsets).map(|(g, o)| g - (o + 11.25)).collect();
        assert_eq!(argmax(&c), argmax(&d));
    }

    // gamma = 0 reproduces baseline decisions exactly
    let spec_mla0 = AdjustmentSpec::new(Method::Mla, 0.0, None).unwrap();
    let spec_ala0 = AdjustmentSpec::new(Method::Ala, 0.0, None).unwrap();
    for _ in 0..1000 {
        let logits: Vec<f64> = (0..k).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let base = argmax(&logits);
        for spec in [&spec_mla0, &spec_ala0] {
            let adj = adjust_logits(&logits, spec, &stats).unwrap();
            assert_eq!(argmax(&adj.values), base);
        }
    }

    // equal-stats one-vs-one equals the baseline argmax on 1e4 probes
    let etf = EtfClassifier::build(k, k + 4, 5).unwrap();
    let equal = ClassStats::new(vec![64.0; k], vec![3.0; k]).unwrap();
    let voter = PreparedClassifier::new(
        etf.psi(),
        &AdjustmentSpec::new(Method::OneVsOne, 1.3, None).unwrap(),
        &equal,
    )
    .unwrap();
    for _ in 0..10_000 {
        let f: Vec<f64> = (0..k + 4).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let logits = etf.logits(&f);
        assert_eq!(voter.classify_logits(&logits), argmax(&logits));
    }
    finish("07 exact-invariances", t0, 5.0, "rescale/shift/gamma-0/equal-stats all exact");
}

#[test]
fn criterion_08_tangent_matching() {
    let t0 = Instant::now();
    let (gap, gamma_star) = ala_gap_and_gamma_star(PSI_100).unwrap();
    assert_eq!(gap.eval(1.0), 0.0);
    let h = 1e-5;
    let fd = (gap.eval(1.0 + h) - gap.eval(1.0 - h)) / (2.0 * h);
    let rel = (fd - 2.0 * gamma_star).abs() / (2.0 * gamma_star);
    assert!(rel <= 1e-6, "finite-difference slope off by {rel}");
    // frozen: (psi/4) sin(psi/2) at K=100, independent 50-digit evaluation
    assert!(
        (gamma_star - 0.2808737344447523).abs() <= 1e-12,
        "gamma_+* = {gamma_star}"
    );
    finish(
        "08 tangent-matching",
        t0,
        1.0,
        &format!("g(1) = 0, slope rel err {rel:.1e}, gamma_+* {gamma_star:.12}"),
    );
}

#[test]
fn criterion_09_relu_complexity() {
    let t0 = Instant::now();
    let p = ReluComplexityParams::new(9, 2.0, 1.0).unwrap();
    assert_eq!(p.mean_complexity(), 11.0);
    assert_eq!(p.bound_b(), 2.0);
    finish("09 relu-calculator", t0, 1.0, "C = 11 and B = 2 exactly");
}

#[test]
fn criterion_10_plumbing() {
    let t0 = Instant::now();
    let dir = tempfile::tempdir().unwrap();

    // bit-exact binary round trip
    let cfg = ScenarioConfig {
        profile: LongTailProfile::new(8, 120, 40.0).unwrap(),
        feature_dim: 10,
        mean_norm_base: 6.0,
        norm_multipliers: None,
        spread_scale: 3.0,
        test_per_class: 25,
        validation_per_class: None,
        train_jitter: 0.0,
        seed: 99,
    };
    let etf = EtfClassifier::build(8, 10, 99).unwrap();
    let (train, test, stats) = generate(&cfg, &etf).unwrap();
    for set in [&train, &test] {
        let path = dir.path().join("roundtrip.ncfb");
        write_binary(set, &path).unwrap();
        let back = read_binary(&path).unwrap();
        assert_eq!(set.labels, back.labels);
        assert!(set
            .features
            .iter()
            .zip(&back.features)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    // the default sweep grid has 41 rows and reruns are byte-identical
    let grid = default_gamma_grid();
    assert_eq!(grid.len(), 41);
    let thresholds = GroupThresholds::cifar10lt();
    let csv_once = sweep(&test, &etf, Method::Mla, &grid, &stats, &thresholds)
        .unwrap()
        .to_csv();
    let csv_twice = sweep(&test, &etf, Method::Mla, &grid, &stats, &thresholds)
        .unwrap()
        .to_csv();
    assert_eq!(csv_once, csv_twice);
    assert_eq!(csv_once.lines().count(), 42); // header + 41 points

    // regenerating the scenario reproduces identical bytes
    let (train2, test2, _) = generate(&cfg, &etf).unwrap();
    assert_eq!(train.features, train2.features);
    assert_eq!(test.features, test2.features);

    // heatmap CSV carries "NaN" exactly where the arcsin argument overflows
    let counts =
        etf_longtail::sim::make_counts(&LongTailProfile::new(100, 500, 100.0).unwrap()).unwrap();
    let big_stats = ClassStats::from_integer_counts(&counts, vec![10.0; 100]).unwrap();
    let (_, gamma_star) = ala_gap_and_gamma_star(PSI_100).unwrap();
    let f_norm = 0.7; // small enough that extreme count ratios overflow
    let (_, da) = boundary_heatmaps(
        &big_stats,
        PSI_100,
        0.5,
        0.5,
        gamma_star,
        f_norm,
        MlaBoundaryForm::Display,
    )
    .unwrap();
    let mut buf = Vec::new();
    da.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let mut nan_cells = 0usize;
    for (i, line) in text.lines().enumerate() {
        for (j, tok) in line.split(',').enumerate() {
            let expect_nan = if i == j {
                true
            } else {
                ala_boundary_angle(counts[i] as f64, counts[j] as f64, PSI_100, gamma_star, f_norm)
                    .is_nan()
            };
            assert_eq!(
                tok == "NaN",
                expect_nan,
                "cell ({i}, {j}) token '{tok}'"
            );
            if expect_nan && i != j {
                nan_cells += 1;
            }
        }
    }
    assert!(nan_cells > 0, "fixture produced no overflowing cells");
    finish(
        "10 plumbing",
        t0,
        10.0,
        &format!("bit-exact round trip, 41-row sweep, byte-identical reruns, {nan_cells} NaN cells"),
    );
}
