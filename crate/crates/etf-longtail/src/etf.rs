//! Simplex-ETF classifier geometry: weight vectors, the inter-weight angle
//! psi, and pairwise decision-boundary normal vectors.
//!
//! A simplex ETF is the maximally separated symmetric configuration of K unit
//! vectors: every pair has inner product -1/(K-1). The classifier keeps these
//! weights fixed; all adjustment methods only move the pairwise decision
//! boundaries between them.

use crate::error::{Error, Result};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Tolerance on the ETF Gram-matrix invariants.
pub const GRAM_TOL: f64 = 1e-9;

/// A fixed linear classifier whose K weight vectors form a simplex ETF in
/// d dimensions. Immutable after construction; safe to share across threads.
#[derive(Debug, Clone)]
pub struct EtfClassifier {
    num_classes: usize,
    feature_dim: usize,
    /// Row-major K x d.
    weights: Vec<f64>,
}

/// The inter-weight angle psi = arccos(-1/(K-1)), in (pi/2, pi] for K >= 2.
pub fn psi(num_classes: usize) -> Result<f64> {
    if num_classes < 2 {
        return Err(Error::Contract(format!(
            "psi requires at least 2 classes, got {num_classes}"
        )));
    }
    Ok((-1.0 / (num_classes as f64 - 1.0)).acos())
}

/// Angle between two nonzero vectors, in [0, pi]. Cosines are clamped to
/// [-1, 1] before arccos to absorb floating-point drift near the poles.
pub fn angle_between(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::Contract(format!(
            "angle_between: dimension mismatch {} vs {}",
            u.len(),
            v.len()
        )));
    }
    let nu = norm(u);
    let nv = norm(v);
    if nu == 0.0 || nv == 0.0 || !nu.is_finite() || !nv.is_finite() {
        return Err(Error::Contract(
            "angle_between: zero or non-finite vector".into(),
        ));
    }
    Ok((dot(u, v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

pub(crate) fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

pub(crate) fn norm(u: &[f64]) -> f64 {
    dot(u, u).sqrt()
}

impl EtfClassifier {
    /// Builds a K-class simplex-ETF classifier in d dimensions.
    ///
    /// The seed fixes the orthonormal frame, so construction is fully
    /// deterministic. Weights are W = sqrt(K/(K-1)) * E * Q^T, where E is the
    /// Householder basis of the all-ones complement in R^K and Q holds K-1
    /// seeded orthonormal columns of length d; this realizes the ETF Gram
    /// pattern exactly for every d >= K-1.
    pub fn build(num_classes: usize, feature_dim: usize, seed: u64) -> Result<Self> {
        if num_classes < 3 {
            return Err(Error::Contract(format!(
                "degenerate ETF: need at least 3 classes (psi = pi at K = 2 \
                 makes every boundary normal vanish), got {num_classes}"
            )));
        }
        if feature_dim < num_classes - 1 {
            return Err(Error::Contract(format!(
                "no simplex ETF with {num_classes} classes fits in dimension \
                 {feature_dim} (need d >= K-1)"
            )));
        }
        let k = num_classes;
        let d = feature_dim;
        let m = k - 1;

        // Householder basis E (K x m) of the complement of ones/sqrt(K):
        // columns 2..K of H = I - 2 v v^T / (v^T v) with v = e_1 - ones/sqrt(K).
        let rk = 1.0 / (k as f64).sqrt();
        let mut v = vec![-rk; k];
        v[0] = 1.0 - rk;
        let vv: f64 = v.iter().map(|x| x * x).sum();
        let mut basis = vec![0.0; k * m]; // K x m, row-major
        for i in 0..k {
            for j in 0..m {
                let h = f64::from(i == j + 1) - 2.0 * v[i] * v[j + 1] / vv;
                basis[i * m + j] = h;
            }
        }

        // Q (d x m): orthonormal columns from a seeded standard-normal matrix,
        // via modified Gram-Schmidt with one re-orthogonalization pass.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut q = vec![0.0; d * m]; // column-major: q[c * d + i]
        for c in 0..m {
            for i in 0..d {
                q[c * d + i] = StandardNormal.sample(&mut rng);
            }
        }
        for c in 0..m {
            for _ in 0..2 {
                for p in 0..c {
                    let proj = dot(&q[p * d..(p + 1) * d], &q[c * d..(c + 1) * d]);
                    for i in 0..d {
                        q[c * d + i] -= proj * q[p * d + i];
                    }
                }
            }
            let n = norm(&q[c * d..(c + 1) * d]);
            if n < 1e-12 {
                return Err(Error::Contract(
                    "ETF frame construction produced a degenerate column".into(),
                ));
            }
            for i in 0..d {
                q[c * d + i] /= n;
            }
        }

        // W = s * E * Q^T, rows are the weight vectors.
        let scale = (k as f64 / (k as f64 - 1.0)).sqrt();
        let mut weights = vec![0.0; k * d];
        for r in 0..k {
            for i in 0..d {
                let mut acc = 0.0;
                for c in 0..m {
                    acc += basis[r * m + c] * q[c * d + i];
                }
                weights[r * d + i] = scale * acc;
            }
        }

        let etf = EtfClassifier { num_classes: k, feature_dim: d, weights };
        debug_assert!(etf.gram_deviation() <= GRAM_TOL);
        Ok(etf)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    /// Weight vector of class `k` (length d).
    pub fn weight(&self, k: usize) -> &[f64] {
        &self.weights[k * self.feature_dim..(k + 1) * self.feature_dim]
    }

    /// The inter-weight angle arccos(-1/(K-1)); derived, never stored.
    pub fn psi(&self) -> f64 {
        psi(self.num_classes).expect("K >= 3 by construction")
    }

    /// Raw logits W f for one feature vector.
    pub fn logits(&self, feature: &[f64]) -> Vec<f64> {
        (0..self.num_classes)
            .map(|k| dot(self.weight(k), feature))
            .collect()
    }

    /// Max entrywise deviation of W W^T from the ETF Gram pattern.
    pub fn gram_deviation(&self) -> f64 {
        let k = self.num_classes;
        let off = -1.0 / (k as f64 - 1.0);
        let mut worst = 0.0f64;
        for a in 0..k {
            for b in a..k {
                let g = dot(self.weight(a), self.weight(b));
                let target = if a == b { 1.0 } else { off };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }
}

/// Unnormalized normal vector of the decision boundary between two classes,
/// lying in span{w_k, w_k'}. A positive inner product with a feature means
/// the feature falls on class `class_a`'s side.
#[derive(Debug, Clone)]
pub struct BoundaryNormal {
    pub class_a: usize,
    pub class_b: usize,
    pub vector: Vec<f64>,
}

/// Builds the boundary normal for the ordered pair (k, k') with the boundary
/// at angle `theta_kk` from w_k and `theta_kk2` from w_k' (the two must sum
/// to psi). The vector is the (1 - cos^2 psi)-scaled solution
/// alpha w_k + beta w_k' with
///   alpha =  sin(theta_kk) + sin(theta_kk2) cos(psi)
///   beta  = -(sin(theta_kk2) + sin(theta_kk) cos(psi)),
/// so m . w_k > 0 > m . w_k'.
pub fn boundary_normal(
    etf: &EtfClassifier,
    k: usize,
    k2: usize,
    theta_kk: f64,
    theta_kk2: f64,
) -> Result<BoundaryNormal> {
    if k == k2 || k >= etf.num_classes() || k2 >= etf.num_classes() {
        return Err(Error::Contract(format!(
            "boundary_normal: bad class pair ({k}, {k2}) for K = {}",
            etf.num_classes()
        )));
    }
    let psi = etf.psi();
    if (theta_kk + theta_kk2 - psi).abs() > 1e-9 {
        return Err(Error::Contract(format!(
            "boundary angles must sum to psi: {theta_kk} + {theta_kk2} != {psi}"
        )));
    }
    if theta_kk <= 0.0 || theta_kk >= psi || theta_kk2 <= 0.0 || theta_kk2 >= psi {
        return Err(Error::Contract(
            "boundary angles must lie strictly inside (0, psi)".into(),
        ));
    }
    let (alpha, beta) = normal_coefficients(theta_kk, theta_kk2, psi);
    let wa = etf.weight(k);
    let wb = etf.weight(k2);
    let vector = wa
        .iter()
        .zip(wb)
        .map(|(a, b)| alpha * a + beta * b)
        .collect();
    Ok(BoundaryNormal { class_a: k, class_b: k2, vector })
}

/// Coefficients (alpha, beta) of the boundary normal in the {w_k, w_k'}
/// basis. Shared with the vote-based classifier, which evaluates
/// m . f = alpha g_k + beta g_k' directly on logits.
pub(crate) fn normal_coefficients(theta_kk: f64, theta_kk2: f64, psi: f64) -> (f64, f64) {
    let cp = psi.cos();
    let alpha = theta_kk.sin() + theta_kk2.sin() * cp;
    let beta = -(theta_kk2.sin() + theta_kk.sin() * cp);
    (alpha, beta)
}
