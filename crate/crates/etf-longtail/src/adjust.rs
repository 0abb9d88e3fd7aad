//! Post-hoc decision-boundary adjustment methods on ETF geometry.
//!
//! Three methods share one interface: multiplicative logit adjustment (MLA,
//! scale class-k logits by n_k^-gamma), additive logit adjustment (ALA,
//! subtract gamma * ln n_k), and the one-vs-one boundary voter, which places
//! every pairwise boundary at the closed-form optimal angle and classifies by
//! pairwise votes. The analytic apparatus connecting them lives here too:
//! kappa factors, the closed-form boundary angles each method induces, the
//! tan approximation phi, and the tangent-matched ALA constant.

use crate::bounds::optimal_angle_matrix;
use crate::error::{Error, Result};
use crate::etf::{normal_coefficients, EtfClassifier};

/// Per-class training statistics driving every adjustment: sample counts
/// (nonincreasing by class index) and mean-feature norms.
///
/// Counts are stored as reals; file ingestion only ever produces integral
/// values, but the adjustment formulas are defined for any positive count.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    counts: Vec<f64>,
    mean_norms: Vec<f64>,
}

impl ClassStats {
    pub fn new(counts: Vec<f64>, mean_norms: Vec<f64>) -> Result<Self> {
        if counts.is_empty() || counts.len() != mean_norms.len() {
            return Err(Error::Contract(format!(
                "class stats need matching nonempty counts/norms, got {} and {}",
                counts.len(),
                mean_norms.len()
            )));
        }
        for (k, &c) in counts.iter().enumerate() {
            if !c.is_finite() || c <= 0.0 {
                return Err(Error::Contract(format!("count of class {k} must be positive, got {c}")));
            }
            if k + 1 < counts.len() && counts[k + 1] > c {
                return Err(Error::Contract(format!(
                    "class counts must be nonincreasing (relabel classes by descending \
                     frequency): n_{k} = {c} < n_{} = {}",
                    k + 1,
                    counts[k + 1]
                )));
            }
        }
        for (k, &m) in mean_norms.iter().enumerate() {
            if !m.is_finite() || m <= 0.0 {
                return Err(Error::Contract(format!(
                    "mean-feature norm of class {k} must be positive, got {m}"
                )));
            }
        }
        Ok(ClassStats { counts, mean_norms })
    }

    pub fn from_integer_counts(counts: &[u64], mean_norms: Vec<f64>) -> Result<Self> {
        Self::new(counts.iter().map(|&c| c as f64).collect(), mean_norms)
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn mean_norms(&self) -> &[f64] {
        &self.mean_norms
    }

    /// Head-to-tail count ratio n_1 / n_K.
    pub fn imbalance_factor(&self) -> f64 {
        self.counts[0] / self.counts[self.counts.len() - 1]
    }
}

/// The adjustment method to apply post hoc.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Baseline,
    Mla,
    Ala,
    OneVsOne,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Baseline => "baseline",
            Method::Mla => "mla",
            Method::Ala => "ala",
            Method::OneVsOne => "one_vs_one",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "baseline" => Ok(Method::Baseline),
            "mla" => Ok(Method::Mla),
            "ala" => Ok(Method::Ala),
            "one_vs_one" | "1v1" => Ok(Method::OneVsOne),
            other => Err(Error::Config(format!(
                "unknown method '{other}' (expected baseline, mla, ala, or one_vs_one)"
            ))),
        }
    }
}

/// A method plus its strength hyperparameter. `gamma` is read as gamma_x,
/// gamma_+, or gamma_1v1 depending on the method and ignored for baseline.
/// `ala_feature_norm` only feeds the ALA boundary-angle closed form, never
/// ALA classification.
#[derive(Debug, Clone, Copy)]
pub struct AdjustmentSpec {
    pub method: Method,
    pub gamma: f64,
    pub ala_feature_norm: Option<f64>,
}

impl AdjustmentSpec {
    pub fn new(method: Method, gamma: f64, ala_feature_norm: Option<f64>) -> Result<Self> {
        if !gamma.is_finite() || gamma < 0.0 {
            return Err(Error::Config(format!("gamma must be a finite value >= 0, got {gamma}")));
        }
        if let Some(f) = ala_feature_norm {
            if !f.is_finite() || f <= 0.0 {
                return Err(Error::Config(format!("feature norm must be positive, got {f}")));
            }
        }
        Ok(AdjustmentSpec { method, gamma, ala_feature_norm })
    }

    pub fn baseline() -> Self {
        AdjustmentSpec { method: Method::Baseline, gamma: 0.0, ala_feature_norm: None }
    }
}

/// Logits after adjustment; entries are finite by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedLogits {
    pub values: Vec<f64>,
}

/// How MLA factors incorporate class statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MlaFactorMode {
    /// kappa_k = alpha * n_k^-gamma. The default: this is the evaluated form
    /// of MLA (norms are equalized by feature regularization upstream).
    CountsOnly,
    /// kappa_k = alpha / (||mu(S_k)|| * n_k^gamma), the norm-aware ideal.
    NormAware,
}

/// Per-class multiplicative factors kappa.
pub fn mla_factors(
    stats: &ClassStats,
    gamma: f64,
    alpha: f64,
    mode: MlaFactorMode,
) -> Result<Vec<f64>> {
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Contract(format!("gamma must be >= 0, got {gamma}")));
    }
    if !alpha.is_finite() || alpha <= 0.0 {
        return Err(Error::Contract(format!("alpha must be positive, got {alpha}")));
    }
    Ok(stats
        .counts()
        .iter()
        .zip(stats.mean_norms())
        .map(|(&n, &mu)| match mode {
            MlaFactorMode::CountsOnly => alpha * n.powf(-gamma),
            MlaFactorMode::NormAware => alpha / (mu * n.powf(gamma)),
        })
        .collect())
}

/// Rewrites one logit vector under the chosen method. One-vs-one is
/// vote-based and has no logit rewriting; asking for it here is a contract
/// error.
pub fn adjust_logits(
    logits: &[f64],
    spec: &AdjustmentSpec,
    stats: &ClassStats,
) -> Result<AdjustedLogits> {
    if logits.len() != stats.num_classes() {
        return Err(Error::Contract(format!(
            "logit count {} does not match class count {}",
            logits.len(),
            stats.num_classes()
        )));
    }
    if logits.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("logits must be finite".into()));
    }
    let values: Vec<f64> = match spec.method {
        Method::Baseline => logits.to_vec(),
        Method::Mla => {
            let kappa = mla_factors(stats, spec.gamma, 1.0, MlaFactorMode::CountsOnly)?;
            logits.iter().zip(&kappa).map(|(g, k)| g * k).collect()
        }
        Method::Ala => logits
            .iter()
            .zip(stats.counts())
            .map(|(g, &n)| g - spec.gamma * n.ln())
            .collect(),
        Method::OneVsOne => {
            return Err(Error::Contract(
                "one_vs_one classifies by pairwise votes, not logit rewriting; use classify"
                    .into(),
            ))
        }
    };
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Contract("adjusted logits overflowed".into()));
    }
    Ok(AdjustedLogits { values })
}

/// Index of the largest entry, ties to the lowest class index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// One-vs-one boundary voter with precomputed pair coefficients.
///
/// For the ordered pair (k, k') the boundary normal is
/// m = alpha w_k + beta w_k', so the side test m . f reduces to
/// alpha g_k + beta g_k' on the raw logits; class k collects a vote whenever
/// that is positive, and the class with the most votes wins (ties to the
/// lowest index).
#[derive(Debug, Clone)]
pub struct OneVsOneVoter {
    num_classes: usize,
    /// Row-major K x K; entry (k, k') holds the pair's (alpha, beta).
    coeff: Vec<(f64, f64)>,
}

impl OneVsOneVoter {
    pub fn new(psi: f64, stats: &ClassStats, gamma: f64) -> Result<Self> {
        let k = stats.num_classes();
        let angles = optimal_angle_matrix(stats, psi, gamma)?.angles;
        let mut coeff = vec![(0.0, 0.0); k * k];
        for a in 0..k {
            for b in 0..k {
                if a != b {
                    coeff[a * k + b] =
                        normal_coefficients(angles.get(a, b), angles.get(b, a), psi);
                }
            }
        }
        Ok(OneVsOneVoter { num_classes: k, coeff })
    }

    /// Runs all K(K-1) duels on one logit vector.
    pub fn classify_logits(&self, logits: &[f64]) -> usize {
        let k = self.num_classes;
        debug_assert_eq!(logits.len(), k);
        let mut counter = vec![0u32; k];
        for a in 0..k {
            let ga = logits[a];
            let row = &self.coeff[a * k..(a + 1) * k];
            for (b, (&gb, &(alpha, beta))) in logits.iter().zip(row).enumerate() {
                if a != b && alpha * ga + beta * gb > 0.0 {
                    counter[a] += 1;
                }
            }
        }
        let mut best = 0;
        for (i, &c) in counter.iter().enumerate().skip(1) {
            if c > counter[best] {
                best = i;
            }
        }
        best
    }
}

/// A prepared per-row decision rule for batch evaluation: dispatching and
/// factor computation happen once, each row is then a pure function call.
#[derive(Debug, Clone)]
pub enum PreparedClassifier {
    Argmax,
    Scaled(Vec<f64>),
    Shifted(Vec<f64>),
    Voter(OneVsOneVoter),
}

impl PreparedClassifier {
    pub fn new(psi: f64, spec: &AdjustmentSpec, stats: &ClassStats) -> Result<Self> {
        Ok(match spec.method {
            Method::Baseline => PreparedClassifier::Argmax,
            Method::Mla => PreparedClassifier::Scaled(mla_factors(
                stats,
                spec.gamma,
                1.0,
                MlaFactorMode::CountsOnly,
            )?),
            Method::Ala => PreparedClassifier::Shifted(
                stats.counts().iter().map(|&n| spec.gamma * n.ln()).collect(),
            ),
            Method::OneVsOne => {
                PreparedClassifier::Voter(OneVsOneVoter::new(psi, stats, spec.gamma)?)
            }
        })
    }

    /// Decision for one raw-logit vector.
    pub fn classify_logits(&self, logits: &[f64]) -> usize {
        match self {
            PreparedClassifier::Argmax => argmax(logits),
            PreparedClassifier::Scaled(kappa) => {
                let mut best = 0;
                let mut best_v = logits[0] * kappa[0];
                for i in 1..logits.len() {
                    let v = logits[i] * kappa[i];
                    if v > best_v {
                        best = i;
                        best_v = v;
                    }
                }
                best
            }
            PreparedClassifier::Shifted(offsets) => {
                let mut best = 0;
                let mut best_v = logits[0] - offsets[0];
                for i in 1..logits.len() {
                    let v = logits[i] - offsets[i];
                    if v > best_v {
                        best = i;
                        best_v = v;
                    }
                }
                best
            }
            PreparedClassifier::Voter(voter) => voter.classify_logits(logits),
        }
    }
}

/// Classifies one feature vector under the given adjustment.
pub fn classify(
    feature: &[f64],
    etf: &EtfClassifier,
    spec: &AdjustmentSpec,
    stats: &ClassStats,
) -> Result<usize> {
    if feature.len() != etf.feature_dim() {
        return Err(Error::Contract(format!(
            "feature dimension {} does not match classifier dimension {}",
            feature.len(),
            etf.feature_dim()
        )));
    }
    if feature.iter().any(|v| !v.is_finite()) || feature.iter().all(|&v| v == 0.0) {
        return Err(Error::Contract("feature must be nonzero and finite".into()));
    }
    if stats.num_classes() != etf.num_classes() {
        return Err(Error::Contract(format!(
            "stats cover {} classes but classifier has {}",
            stats.num_classes(),
            etf.num_classes()
        )));
    }
    let prepared = PreparedClassifier::new(etf.psi(), spec, stats)?;
    Ok(prepared.classify_logits(&etf.logits(feature)))
}

/// MLA-induced boundary angle, the small-angle display form:
///   theta_x = arctan((n_k'^g / n_k^g + sin(pi/2 - psi)) / cos(pi/2 - psi)).
/// This is the heatmap default. It drops an O(1/K) term relative to the
/// exact balance solution below; both are exposed, neither is corrected.
pub fn mla_boundary_angle(n_k: f64, n_k2: f64, psi: f64, gamma: f64) -> f64 {
    debug_assert!(n_k > 0.0 && n_k2 > 0.0 && psi > std::f64::consts::FRAC_PI_2);
    let eps = std::f64::consts::FRAC_PI_2 - psi;
    let ratio = (n_k2 / n_k).powf(gamma);
    ((ratio + eps.sin()) / eps.cos()).atan()
}

/// Exact solution of kappa_k cos(theta) = kappa_k' cos(psi - theta):
///   theta = arctan((kappa_k / kappa_k' - cos psi) / sin psi).
/// At equal factors this returns psi/2 exactly (up to arctan rounding).
pub fn boundary_angle_from_factors(kappa_k: f64, kappa_k2: f64, psi: f64) -> f64 {
    debug_assert!(kappa_k > 0.0 && kappa_k2 > 0.0);
    ((kappa_k / kappa_k2 - psi.cos()) / psi.sin()).atan()
}

/// ALA-induced boundary angle under the constant-feature-norm assumption:
///   theta_+ = psi/2 - arcsin(gamma_+ ln(n_k / n_k') / (2 ||f|| sin(psi/2))).
/// Returns NaN when the arcsin argument leaves [-1, 1]; that is the gray-cell
/// contract for heatmaps, not an error.
pub fn ala_boundary_angle(n_k: f64, n_k2: f64, psi: f64, gamma_plus: f64, f_norm: f64) -> f64 {
    debug_assert!(n_k > 0.0 && n_k2 > 0.0 && f_norm > 0.0);
    let arg = gamma_plus * (n_k / n_k2).ln() / (2.0 * f_norm * (psi / 2.0).sin());
    if arg.abs() > 1.0 {
        f64::NAN
    } else {
        psi / 2.0 - arg.asin()
    }
}

/// Rational approximation of tan((pi/2) theta) on [0, 1):
/// phi(theta) = theta / (1 - theta).
pub fn phi(theta: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::Contract(format!("phi is defined on [0, 1), got {theta}")));
    }
    Ok(theta / (1.0 - theta))
}

/// The gap between adjacent-class cosine margins as a function of the
/// norm-weighted count ratio tau, together with the tangent-matched additive
/// constant: g(tau) = 2 sin(psi/2) sin((psi/2)(1 - 2/(tau+1))) and
/// gamma_+* = (psi/4) sin(psi/2), chosen so 2 gamma_+* ln(tau) matches g at
/// tau = 1 in value and slope.
#[derive(Debug, Clone, Copy)]
pub struct AlaGap {
    psi: f64,
}

impl AlaGap {
    pub fn new(psi: f64) -> Result<Self> {
        if !(psi > std::f64::consts::FRAC_PI_2 && psi < std::f64::consts::PI) {
            return Err(Error::Contract(format!(
                "gap function needs psi in (pi/2, pi), got {psi}"
            )));
        }
        Ok(AlaGap { psi })
    }

    pub fn eval(&self, tau: f64) -> f64 {
        let h = self.psi / 2.0;
        2.0 * h.sin() * (h * (1.0 - 2.0 / (tau + 1.0))).sin()
    }

    /// The tangent-matched additive strength (psi/4) sin(psi/2).
    pub fn gamma_star(&self) -> f64 {
        (self.psi / 4.0) * (self.psi / 2.0).sin()
    }
}

/// Convenience spelling returning the evaluator together with gamma_+*.
pub fn ala_gap_and_gamma_star(psi: f64) -> Result<(AlaGap, f64)> {
    let gap = AlaGap::new(psi)?;
    let gs = gap.gamma_star();
    Ok((gap, gs))
}
