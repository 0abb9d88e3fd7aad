//! Command implementations: thin orchestration over the library.

use crate::config::{self, require, FileFormat};
use etf_longtail::adjust::{ala_gap_and_gamma_star, AdjustmentSpec, ClassStats, Method};
use etf_longtail::bounds::{angular_bound_probability, optimal_angle_matrix, validity_window};
use etf_longtail::etf::{psi, EtfClassifier};
use etf_longtail::evaluation::{
    boundary_heatmaps, default_gamma_grid, evaluate as eval_report, sweep as run_sweep,
    MlaBoundaryForm, SweepResult,
};
use etf_longtail::sim::{generate_full, LongTailProfile, ScenarioConfig, SetKind};
use etf_longtail::{Error, Result};
use std::path::{Path, PathBuf};

fn scenario_from(cfg: &config::SimulateConfig, seed_flag: Option<u64>) -> Result<ScenarioConfig> {
    let seed = seed_flag.or(cfg.seed);
    let scenario = ScenarioConfig {
        profile: LongTailProfile::new(
            require(cfg.num_classes, "num_classes")?,
            require(cfg.head_count, "head_count")?,
            require(cfg.imbalance, "imbalance")?,
        )?,
        feature_dim: require(cfg.feature_dim, "feature_dim")?,
        mean_norm_base: cfg.mean_norm_base.unwrap_or(10.0),
        norm_multipliers: cfg.norm_multipliers.clone(),
        spread_scale: cfg.spread_scale.unwrap_or(1.0),
        test_per_class: cfg.test_per_class.unwrap_or(100),
        validation_per_class: cfg.validation_per_class,
        train_jitter: cfg.train_jitter.unwrap_or(0.0),
        seed: require(seed, "seed")?,
    };
    scenario.validate()?;
    Ok(scenario)
}

pub fn simulate(config: &Option<PathBuf>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg: config::SimulateConfig = config::load(config.as_deref())?;
    let format = cfg.file_format.unwrap_or(FileFormat::Binary);
    let scenario = scenario_from(&cfg, seed)?;
    let etf = EtfClassifier::build(
        scenario.profile.num_classes,
        scenario.feature_dim,
        scenario.seed,
    )?;
    let generated = generate_full(&scenario, &etf)?;
    std::fs::create_dir_all(out)?;
    let ext = match format {
        FileFormat::Binary => "ncfb",
        FileFormat::Csv => "csv",
    };
    let write = |set: &etf_longtail::sim::FeatureSet, name: &str| -> Result<()> {
        let path = out.join(format!("{name}.{ext}"));
        match format {
            FileFormat::Binary => etf_longtail::io::write_binary(set, &path),
            FileFormat::Csv => etf_longtail::io::write_csv(set, &path),
        }
    };
    write(&generated.train, "train")?;
    write(&generated.test, "test")?;
    if let Some(val) = &generated.validation {
        write(val, "validation")?;
    }
    etf_longtail::io::write_stats(&generated.stats, &out.join("stats.json"))?;
    println!(
        "wrote train ({} rows), test ({} rows){} and stats.json to {}",
        generated.train.len(),
        generated.test.len(),
        generated
            .validation
            .as_ref()
            .map(|v| format!(", validation ({} rows)", v.len()))
            .unwrap_or_default(),
        out.display()
    );
    Ok(())
}

/// Reads a feature file that must be a test split (binary kind tag checked;
/// CSV splits are test by convention).
fn read_test_split(path: &Path, num_classes: usize) -> Result<etf_longtail::sim::FeatureSet> {
    let set = etf_longtail::io::read_feature_file_expecting(path, num_classes)?;
    if set.kind != SetKind::Test {
        return Err(Error::Config(format!(
            "{} is a train split; point test_path at the test file",
            path.display()
        )));
    }
    Ok(set)
}

fn load_stats(
    stats_path: &Option<PathBuf>,
    train_path: &Option<PathBuf>,
) -> Result<ClassStats> {
    match (stats_path, train_path) {
        (Some(p), _) => etf_longtail::io::read_stats(p),
        (None, Some(p)) => {
            let (set, stats) = etf_longtail::sim::ingest(p)?;
            if set.kind != SetKind::Train {
                return Err(Error::Config(format!(
                    "{} is not a train split; statistics must come from training data",
                    p.display()
                )));
            }
            Ok(stats)
        }
        (None, None) => Err(Error::Config(
            "missing required key: stats_path (or train_path)".into(),
        )),
    }
}

/// Report wrapper echoing the run parameters next to the scores.
#[derive(serde::Serialize)]
struct ReportEnvelope {
    overall: f64,
    groups: GroupAccuracies,
    per_class: Vec<f64>,
    method: String,
    gamma: f64,
    seed: Option<u64>,
    config: ConfigEcho,
}

#[derive(serde::Serialize)]
struct GroupAccuracies {
    many: Option<f64>,
    medium: Option<f64>,
    few: Option<f64>,
}

#[derive(serde::Serialize)]
struct ConfigEcho {
    test_path: String,
    stats_source: String,
    many_min: u64,
    medium_min: u64,
}

pub fn evaluate(
    config: &Option<PathBuf>,
    seed: Option<u64>,
    out: &Path,
    format: &str,
) -> Result<()> {
    let cfg: config::EvaluateConfig = config::load(config.as_deref())?;
    let test_path = require(cfg.test_path.clone(), "test_path")?;
    let method: Method = require(cfg.method.clone(), "method")?.parse()?;
    let gamma = cfg.gamma.unwrap_or(0.0);
    let thresholds = cfg.thresholds.resolve()?;
    let stats = load_stats(&cfg.stats_path, &cfg.train_path)?;
    let k = stats.num_classes();
    let test = read_test_split(&test_path, k)?;
    // The classifier frame is a pure function of (K, d, seed); evaluating
    // simulated features needs the seed they were generated with.
    let frame_seed = require(seed.or(cfg.seed), "seed")?;
    let etf = EtfClassifier::build(k, test.feature_dim, frame_seed)?;
    let spec = AdjustmentSpec::new(method, gamma, cfg.ala_feature_norm)?;
    let report = eval_report(&test, &etf, &spec, &stats, &thresholds)?;
    let envelope = ReportEnvelope {
        overall: report.overall,
        groups: GroupAccuracies { many: report.many, medium: report.medium, few: report.few },
        per_class: report.per_class.clone(),
        method: report.method.clone(),
        gamma: report.gamma,
        seed: Some(frame_seed),
        config: ConfigEcho {
            test_path: test_path.display().to_string(),
            stats_source: cfg
                .stats_path
                .as_ref()
                .or(cfg.train_path.as_ref())
                .map(|p| p.display().to_string())
                .unwrap_or_default(),
            many_min: thresholds.many_min,
            medium_min: thresholds.medium_min,
        },
    };
    let text = match format {
        "csv" => {
            use etf_longtail::evaluation::csv_cell as cell;
            format!(
                "method,gamma,overall,many,medium,few\n{},{},{},{},{},{}\n",
                report.method,
                report.gamma,
                cell(Some(report.overall)),
                cell(report.many),
                cell(report.medium),
                cell(report.few),
            )
        }
        _ => serde_json::to_string_pretty(&envelope)
            .map_err(|e| Error::Config(e.to_string()))?
            + "\n",
    };
    std::fs::create_dir_all(out)?;
    let out_path = out.join(if format == "csv" { "report.csv" } else { "report.json" });
    std::fs::write(&out_path, &text)?;
    print!("{text}");
    Ok(())
}

pub fn heatmap(config: &Option<PathBuf>, out: &Path) -> Result<()> {
    let cfg: config::HeatmapConfig = config::load(config.as_deref())?;
    let stats = match (&cfg.preset, &cfg.stats_path, &cfg.counts) {
        (Some(p), None, None) => {
            let k = match p.as_str() {
                "k100" => 100,
                "k10" => 10,
                other => {
                    return Err(Error::Config(format!(
                        "unknown heatmap preset '{other}' (k100, k10)"
                    )))
                }
            };
            let counts =
                etf_longtail::sim::make_counts(&LongTailProfile::new(k, 500, 100.0)?)?;
            ClassStats::from_integer_counts(&counts, vec![10.0; k])?
        }
        (None, Some(path), None) => etf_longtail::io::read_stats(path)?,
        (None, None, Some(counts)) => {
            let norms = require(cfg.mean_norms.clone(), "mean_norms")?;
            ClassStats::from_integer_counts(counts, norms)?
        }
        _ => {
            return Err(Error::Config(
                "heatmap needs exactly one of preset, stats_path, or counts+mean_norms".into(),
            ))
        }
    };
    let k = stats.num_classes();
    let psi_k = psi(k)?;
    let gamma_1v1 = cfg.gamma_1v1.unwrap_or(0.5);
    let gamma_mla = cfg.gamma_mla.unwrap_or(0.5);
    let gamma_ala = match cfg.gamma_ala {
        Some(g) => g,
        None => ala_gap_and_gamma_star(psi_k)?.1,
    };
    let f_norm = cfg.feature_norm.unwrap_or_else(|| {
        stats.mean_norms().iter().sum::<f64>() / stats.num_classes() as f64
    });
    let form = cfg.mla_form.unwrap_or(MlaBoundaryForm::Display);
    let (dx, da) = boundary_heatmaps(&stats, psi_k, gamma_1v1, gamma_mla, gamma_ala, f_norm, form)?;
    std::fs::create_dir_all(out)?;
    for (m, name) in [(&dx, "delta_mla.csv"), (&da, "delta_ala.csv")] {
        let mut buf = Vec::new();
        m.write_csv(&mut buf)?;
        std::fs::write(out.join(name), buf)?;
    }
    let summary = serde_json::json!({
        "num_classes": k,
        "gamma_1v1": gamma_1v1,
        "gamma_mla": gamma_mla,
        "gamma_ala": gamma_ala,
        "feature_norm": f_norm,
        "max_abs_delta_mla": dx.max_abs_finite(),
        "max_abs_delta_ala": da.max_abs_finite(),
        "nan_cells_ala": da.count_nan_off_diagonal(),
        "units": "radians",
    });
    println!("{summary}");
    Ok(())
}

pub fn sweep(config: &Option<PathBuf>, seed: Option<u64>, out: &Path) -> Result<()> {
    let cfg: config::SweepConfig = config::load(config.as_deref())?;
    let method: Method = require(cfg.method.clone(), "method")?.parse()?;
    let grid = match &cfg.grid {
        Some(g) => g.points()?,
        None => default_gamma_grid(),
    };
    let thresholds = cfg.thresholds.resolve()?;
    std::fs::create_dir_all(out)?;

    let results: Vec<SweepResult> = match (&cfg.scenario, &cfg.test_path) {
        (Some(sc), None) => {
            let seeds = match (&cfg.seeds, seed) {
                (_, Some(s)) => vec![s],
                (Some(list), None) if !list.is_empty() => list.clone(),
                _ => vec![require(sc.seed, "seed")?],
            };
            let mut all = Vec::with_capacity(seeds.len());
            for s in &seeds {
                let scenario = scenario_from(sc, Some(*s))?;
                let etf = EtfClassifier::build(
                    scenario.profile.num_classes,
                    scenario.feature_dim,
                    *s,
                )?;
                let g = generate_full(&scenario, &etf)?;
                all.push(run_sweep(&g.test, &etf, method, &grid, &g.stats, &thresholds)?);
            }
            all
        }
        (None, Some(test_path)) => {
            let stats = load_stats(&cfg.stats_path, &cfg.train_path)?;
            let k = stats.num_classes();
            let test = read_test_split(test_path, k)?;
            let frame_seed = require(
                seed.or_else(|| cfg.seeds.as_ref().and_then(|s| s.first().copied())),
                "seed",
            )?;
            let etf = EtfClassifier::build(k, test.feature_dim, frame_seed)?;
            vec![run_sweep(&test, &etf, method, &grid, &stats, &thresholds)?]
        }
        _ => {
            return Err(Error::Config(
                "sweep needs exactly one of scenario or test_path".into(),
            ))
        }
    };

    let csv = if results.len() == 1 {
        results[0].to_csv()
    } else {
        aggregate_csv(&results)
    };
    std::fs::write(out.join("sweep.csv"), &csv)?;

    // gamma* from the (mean) overall curve, ties to the smallest gamma
    let n = results.len() as f64;
    let mean_overall: Vec<f64> = (0..grid.len())
        .map(|i| results.iter().map(|r| r.points[i].overall).sum::<f64>() / n)
        .collect();
    let mut best = 0usize;
    for i in 1..mean_overall.len() {
        if mean_overall[i] > mean_overall[best] {
            best = i;
        }
    }
    let summary = serde_json::json!({
        "method": method.name(),
        "grid_points": grid.len(),
        "runs": results.len(),
        "best_gamma": grid[best],
        "best_overall_mean": mean_overall[best],
    });
    std::fs::write(out.join("sweep_summary.json"), format!("{summary}\n"))?;
    println!("{summary}");
    Ok(())
}

/// Per-gamma mean and standard deviation across seeds.
fn aggregate_csv(results: &[SweepResult]) -> String {
    let n = results.len() as f64;
    let mut out =
        String::from("gamma,overall_mean,overall_std,many_mean,medium_mean,few_mean,agreement_mean\n");
    for i in 0..results[0].points.len() {
        let gamma = results[0].points[i].gamma;
        let overall: Vec<f64> = results.iter().map(|r| r.points[i].overall).collect();
        let mean = overall.iter().sum::<f64>() / n;
        let var = overall.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let group_mean = |f: fn(&etf_longtail::evaluation::SweepPoint) -> Option<f64>| {
            let vals: Vec<f64> = results.iter().filter_map(|r| f(&r.points[i])).collect();
            if vals.is_empty() {
                "NaN".to_string()
            } else {
                format!("{}", vals.iter().sum::<f64>() / vals.len() as f64)
            }
        };
        let agree =
            results.iter().map(|r| r.points[i].agreement_mla_1v1).sum::<f64>() / n;
        out.push_str(&format!(
            "{gamma:.2},{mean},{},{},{},{},{agree}\n",
            var.sqrt(),
            group_mean(|p| p.many),
            group_mean(|p| p.medium),
            group_mean(|p| p.few),
        ));
    }
    out
}

pub fn bounds(config: &Option<PathBuf>, out: &Path, _format: &str) -> Result<()> {
    let cfg: config::BoundsConfig = config::load(config.as_deref())?;
    if cfg.complexity.is_none() && cfg.relu.is_none() && cfg.star.is_none() {
        return Err(Error::Config(
            "bounds needs at least one of complexity, relu, or star".into(),
        ));
    }
    let mut doc = serde_json::Map::new();

    if let Some(c) = &cfg.complexity {
        let params = c.build()?;
        let window = validity_window(&params)?;
        doc.insert(
            "window".into(),
            serde_json::json!({
                "lo": window.lo,
                "hi": window.hi,
                "empty": window.is_empty(),
            }),
        );
        if let Some(thetas) = &cfg.theta {
            let mut rows = Vec::new();
            for &theta in thetas {
                let value = if window.contains(theta) && !window.is_empty() {
                    Some(angular_bound_probability(&params, theta)?)
                } else {
                    None
                };
                rows.push(serde_json::json!({ "theta": theta, "pi": value }));
            }
            doc.insert("pi".into(), serde_json::Value::Array(rows));
        }
    } else if cfg.theta.is_some() {
        return Err(Error::Config("theta requires a complexity block".into()));
    }

    if let Some(r) = &cfg.relu {
        let params = etf_longtail::bounds::ReluComplexityParams::new(
            r.depth_q,
            r.frobenius_product_m,
            r.input_sup_norm,
        )?;
        doc.insert(
            "relu".into(),
            serde_json::json!({
                "mean_complexity": params.mean_complexity(),
                "bound_b": params.bound_b(),
            }),
        );
    }

    if let Some(s) = &cfg.star {
        let stats = match (&s.stats_path, &s.counts) {
            (Some(p), None) => etf_longtail::io::read_stats(p)?,
            (None, Some(counts)) => {
                let norms = require(s.mean_norms.clone(), "star.mean_norms")?;
                ClassStats::from_integer_counts(counts, norms)?
            }
            _ => {
                return Err(Error::Config(
                    "star needs exactly one of stats_path or counts+mean_norms".into(),
                ))
            }
        };
        let k = stats.num_classes();
        let angles = optimal_angle_matrix(&stats, psi(k)?, s.gamma)?;
        let matrix: Vec<Vec<Option<f64>>> = (0..k)
            .map(|a| {
                (0..k)
                    .map(|b| {
                        let v = angles.angles.get(a, b);
                        v.is_finite().then_some(v)
                    })
                    .collect()
            })
            .collect();
        doc.insert(
            "theta_star".into(),
            serde_json::json!({ "gamma": s.gamma, "angles": matrix }),
        );
    }

    let text = serde_json::to_string_pretty(&serde_json::Value::Object(doc))
        .map_err(|e| Error::Config(e.to_string()))?
        + "\n";
    std::fs::create_dir_all(out)?;
    std::fs::write(out.join("bounds.json"), &text)?;
    print!("{text}");
    Ok(())
}
