//! Angular concentration bounds and the optimal boundary angles they induce.
//!
//! The central object is the angular bound probability Pi(theta; k): a
//! closed-form lower bound on the probability that a test feature of class k
//! falls within angle theta of the class's training mean direction. It is
//! valid on a theta window whose lower edge shrinks as 1/sqrt(n_k), and
//! 1 - Pi itself decays as 1/sqrt(n_k) up to a log factor. Maximizing the
//! two-sided bound over a pairwise decision boundary yields the closed-form
//! optimal split of the inter-weight angle psi by sqrt-count-weighted shares;
//! a brute-force grid maximizer is kept alongside as a diagnostic and does
//! not feed the classifiers.

use crate::adjust::ClassStats;
use crate::error::{Error, Result};
use crate::evaluation::BoundaryMatrix;

/// Scalar ingredients of the angular bound probability for one class.
#[derive(Debug, Clone, Copy)]
pub struct ComplexityParams {
    rank_r: u32,
    spectral_norm_w1: f64,
    bound_b: f64,
    mean_complexity_c: f64,
    n_k: u64,
    mean_norm: f64,
}

impl ComplexityParams {
    pub fn new(
        rank_r: u32,
        spectral_norm_w1: f64,
        bound_b: f64,
        mean_complexity_c: f64,
        n_k: u64,
        mean_norm: f64,
    ) -> Result<Self> {
        if rank_r == 0 {
            return Err(Error::Contract("rank r must be positive".into()));
        }
        for (name, v) in [
            ("spectral norm of W1", spectral_norm_w1),
            ("mean complexity", mean_complexity_c),
            ("mean feature norm", mean_norm),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Contract(format!("{name} must be positive, got {v}")));
            }
        }
        if !bound_b.is_finite() || bound_b < 1.0 {
            return Err(Error::Contract(format!(
                "second-to-last-layer bound B must be >= 1, got {bound_b}"
            )));
        }
        if n_k <= 2 {
            return Err(Error::Contract(format!(
                "per-class sample count must exceed 2, got {n_k}"
            )));
        }
        Ok(ComplexityParams {
            rank_r,
            spectral_norm_w1,
            bound_b,
            mean_complexity_c,
            n_k,
            mean_norm,
        })
    }

    /// alpha_k = (pi/2) r ||W1||_2 / (sqrt(n_k) ||mu(S_k)||).
    fn alpha(&self) -> f64 {
        std::f64::consts::FRAC_PI_2 * self.rank_r as f64 * self.spectral_norm_w1
            / ((self.n_k as f64).sqrt() * self.mean_norm)
    }

    /// beta = 4 C + 4 B + 1.
    fn beta(&self) -> f64 {
        4.0 * self.mean_complexity_c + 4.0 * self.bound_b + 1.0
    }

    pub fn n_k(&self) -> u64 {
        self.n_k
    }

    pub fn mean_norm(&self) -> f64 {
        self.mean_norm
    }
}

/// The theta interval on which the closed form is asserted. May be empty
/// (lo >= hi); that is a reported state, not an error, and heatmap callers
/// render affected cells as NaN.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ThetaWindow {
    pub lo: f64,
    pub hi: f64,
}

impl ThetaWindow {
    pub fn is_empty(&self) -> bool {
        self.lo >= self.hi
    }

    pub fn contains(&self, theta: f64) -> bool {
        self.lo < theta && theta < self.hi
    }
}

/// Validity window for the closed-form bound:
/// lo = (pi/2) (r ||W1||_2 / (sqrt(n_k) ||mu||)) (4C + 4B + B sqrt(2 ln(sqrt(n_k) ||mu|| / ||W1||_2))),
/// hi = pi/2.
///
/// Errors if sqrt(n_k) ||mu|| <= ||W1||_2, which makes the log ill-formed.
pub fn validity_window(p: &ComplexityParams) -> Result<ThetaWindow> {
    let logarg = (p.n_k as f64).sqrt() * p.mean_norm / p.spectral_norm_w1;
    if logarg <= 1.0 {
        return Err(Error::Contract(format!(
            "validity window requires sqrt(n_k)*||mu|| > ||W1||_2 \
             (log argument {logarg} <= 1)"
        )));
    }
    let lo = p.alpha()
        * (4.0 * p.mean_complexity_c
            + 4.0 * p.bound_b
            + p.bound_b * (2.0 * logarg.ln()).sqrt());
    Ok(ThetaWindow { lo, hi: std::f64::consts::FRAC_PI_2 })
}

/// Angular bound probability Pi(theta; k) for theta strictly inside the
/// validity window:
///   Pi = 1 - (alpha_k / theta) (beta + B sqrt(2 ln(r theta / alpha_k))),
/// algebraically identical to the spelled-out display whose log argument is
/// 2 theta sqrt(n_k) ||mu|| / (pi ||W1||_2). The result must land in (0, 1);
/// anything else is reported as a contract violation.
pub fn angular_bound_probability(p: &ComplexityParams, theta: f64) -> Result<f64> {
    let w = validity_window(p)?;
    if w.is_empty() || !w.contains(theta) {
        return Err(Error::Window { theta, lo: w.lo, hi: w.hi });
    }
    let pi = eval_pi_unchecked(p, theta)?;
    if !(pi > 0.0 && pi < 1.0) {
        return Err(Error::Contract(format!(
            "Pi({theta}) = {pi} escaped (0, 1) inside the validity window"
        )));
    }
    Ok(pi)
}

fn eval_pi_unchecked(p: &ComplexityParams, theta: f64) -> Result<f64> {
    let alpha = p.alpha();
    let logarg = p.rank_r as f64 * theta / alpha;
    if logarg <= 1.0 {
        return Err(Error::Contract(format!(
            "nonpositive log term at theta = {theta} (argument {logarg})"
        )));
    }
    Ok(1.0 - (alpha / theta) * (p.beta() + p.bound_b * (2.0 * logarg.ln()).sqrt()))
}

/// Closed-form optimal pairwise boundary angles: the split of psi
/// proportional to the opposite class's norm-weighted count share,
///   theta*_{k,k'} = psi * m_{k'} / (m_k + m_{k'}),  m_j = ||mu_j|| n_j^gamma.
/// gamma = 1/2 is the canonical solution; gamma generalizes it.
///
/// Exchanging the classes swaps the pair bit-for-bit, and the pair sums to
/// psi up to one final rounding (the smaller share is computed directly, the
/// larger as the complement).
pub fn optimal_pair_angle(
    n_k: f64,
    mu_k_norm: f64,
    n_k2: f64,
    mu_k2_norm: f64,
    psi: f64,
    gamma: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [
        ("n_k", n_k),
        ("mu_k_norm", mu_k_norm),
        ("n_k'", n_k2),
        ("mu_k'_norm", mu_k2_norm),
        ("psi", psi),
    ] {
        if !v.is_finite() || v <= 0.0 {
            return Err(Error::Contract(format!(
                "optimal_pair_angle: {name} must be positive, got {v}"
            )));
        }
    }
    if !gamma.is_finite() || gamma < 0.0 {
        return Err(Error::Contract(format!("gamma must be >= 0, got {gamma}")));
    }
    let m1 = mu_k_norm * n_k.powf(gamma);
    let m2 = mu_k2_norm * n_k2.powf(gamma);
    // the smaller share is computed directly and the larger as the
    // complement, so swapping the classes swaps the pair bit-for-bit and the
    // sum is exactly psi; equal shares short-circuit to an exact half
    if m1 == m2 {
        Ok((psi / 2.0, psi / 2.0))
    } else if m2 < m1 {
        let a = psi * m2 / (m1 + m2);
        Ok((a, psi - a))
    } else {
        let b = psi * m1 / (m1 + m2);
        Ok((psi - b, b))
    }
}

/// The full K x K matrix of optimal boundary angles at one gamma.
#[derive(Debug, Clone)]
pub struct OptimalAngles {
    pub gamma: f64,
    pub counts: Vec<f64>,
    pub mean_norms: Vec<f64>,
    pub angles: BoundaryMatrix,
}

/// Applies `optimal_pair_angle` to every ordered pair; the diagonal is NaN.
pub fn optimal_angle_matrix(stats: &ClassStats, psi: f64, gamma: f64) -> Result<OptimalAngles> {
    let k = stats.num_classes();
    let mut angles = BoundaryMatrix::nan(k);
    for a in 0..k {
        for b in (a + 1)..k {
            let (t_ab, t_ba) = optimal_pair_angle(
                stats.counts()[a],
                stats.mean_norms()[a],
                stats.counts()[b],
                stats.mean_norms()[b],
                psi,
                gamma,
            )?;
            angles.set(a, b, t_ab);
            angles.set(b, a, t_ba);
        }
    }
    Ok(OptimalAngles {
        gamma,
        counts: stats.counts().to_vec(),
        mean_norms: stats.mean_norms().to_vec(),
        angles,
    })
}

/// Grid maximizer of Pi(theta; k) + Pi(psi - theta; k') over the intersection
/// of both validity windows (the second mapped through theta -> psi - theta).
/// Ties break toward smaller theta. This is a diagnostic oracle for the
/// closed form, not an input to any classifier.
pub fn brute_force_pair_objective(
    params_k: &ComplexityParams,
    params_k2: &ComplexityParams,
    psi: f64,
    grid_step: f64,
) -> Result<(f64, f64)> {
    if !grid_step.is_finite() || grid_step <= 0.0 {
        return Err(Error::Contract(format!("grid step must be positive, got {grid_step}")));
    }
    let wk = validity_window(params_k)?;
    let wk2 = validity_window(params_k2)?;
    let lo = wk.lo.max(psi - wk2.hi);
    let hi = wk.hi.min(psi - wk2.lo);
    if lo >= hi {
        return Err(Error::Window { theta: f64::NAN, lo, hi });
    }
    let first = (lo / grid_step).floor() as i64 + 1;
    let last = (hi / grid_step).ceil() as i64 - 1;
    let mut best: Option<(f64, f64)> = None;
    for i in first..=last {
        let theta = i as f64 * grid_step;
        if theta <= lo || theta >= hi {
            continue;
        }
        let val = eval_pi_unchecked(params_k, theta)? + eval_pi_unchecked(params_k2, psi - theta)?;
        match best {
            Some((_, v)) if val <= v => {}
            _ => best = Some((theta, val)),
        }
    }
    best.ok_or(Error::Window { theta: f64::NAN, lo, hi })
}

/// Complexity ingredients for the ReLU-network specialization.
#[derive(Debug, Clone, Copy)]
pub struct ReluComplexityParams {
    depth_q: u32,
    frobenius_product_m: f64,
    input_sup_norm: f64,
}

impl ReluComplexityParams {
    pub fn new(depth_q: u32, frobenius_product_m: f64, input_sup_norm: f64) -> Result<Self> {
        if depth_q == 0 {
            return Err(Error::Contract("network depth q must be positive".into()));
        }
        for (name, v) in [
            ("Frobenius-product bound M", frobenius_product_m),
            ("input sup norm", input_sup_norm),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Contract(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(ReluComplexityParams { depth_q, frobenius_product_m, input_sup_norm })
    }

    /// C-bar = (1.5 sqrt(q) + 1) * M * sup||x||.
    pub fn mean_complexity(&self) -> f64 {
        (1.5 * (self.depth_q as f64).sqrt() + 1.0) * self.frobenius_product_m * self.input_sup_norm
    }

    /// B = M * sup||x||.
    pub fn bound_b(&self) -> f64 {
        self.frobenius_product_m * self.input_sup_norm
    }
}

/// Free-function spelling of the ReLU substitution.
pub fn relu_mean_complexity(p: &ReluComplexityParams) -> f64 {
    p.mean_complexity()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn fixture(n_k: u64, mean_norm: f64) -> ComplexityParams {
        ComplexityParams::new(1, 1.0, 1.0, 1.0, n_k, mean_norm).unwrap()
    }

    const PSI_100: f64 = 1.5808975086721524;

    #[test]
    fn pi_fixture_value() {
        // frozen from an independent 50-digit evaluation
        let p = fixture(1_000_000, 10.0);
        let v = angular_bound_probability(&p, 0.5).unwrap();
        assert_abs_diff_eq!(v, 0.99591078703711, epsilon = 1e-12);
    }

    #[test]
    fn pi_both_spellings_agree() {
        // the display spelling with log argument 2 theta sqrt(n) mu / (pi w1)
        let display = |p: &ComplexityParams, theta: f64| {
            let pref = FRAC_PI_2 / theta * p.rank_r as f64 * p.spectral_norm_w1
                / ((p.n_k as f64).sqrt() * p.mean_norm);
            let logarg = 2.0 * theta * (p.n_k as f64).sqrt() * p.mean_norm
                / (std::f64::consts::PI * p.spectral_norm_w1);
            1.0 - pref
                * (4.0 * p.mean_complexity_c
                    + 4.0 * p.bound_b
                    + 1.0
                    + p.bound_b * (2.0 * logarg.ln()).sqrt())
        };
        for p in [
            fixture(100_000, 3.0),
            // the rank multiplies the prefactor but cancels in the log
            ComplexityParams::new(4, 2.5, 1.5, 2.0, 5_000_000, 20.0).unwrap(),
        ] {
            let w = validity_window(&p).unwrap();
            let mut theta = w.lo * 1.01;
            while theta < w.hi {
                let a = angular_bound_probability(&p, theta).unwrap();
                assert_abs_diff_eq!(a, display(&p, theta), epsilon = 1e-12);
                theta += 0.05;
            }
        }
    }

    #[test]
    fn window_fixture() {
        let w = validity_window(&fixture(1_000_000, 10.0)).unwrap();
        // frozen from an independent 50-digit evaluation of the window formula
        assert_abs_diff_eq!(w.lo, 0.0019308121717403067, epsilon = 1e-15);
        assert_eq!(w.hi, FRAC_PI_2);
        assert!(!w.is_empty());
    }

    #[test]
    fn window_empty_is_reported_not_error() {
        let p = ComplexityParams::new(1, 1.0, 1.0, 100.0, 9, 1.0).unwrap();
        let w = validity_window(&p).unwrap();
        assert!(w.is_empty());
    }

    #[test]
    fn window_rejects_ill_formed_log() {
        let p = ComplexityParams::new(1, 5.0, 1.0, 1.0, 4, 1.0).unwrap();
        assert!(validity_window(&p).is_err());
    }

    #[test]
    fn params_reject_small_n() {
        assert!(ComplexityParams::new(1, 1.0, 1.0, 1.0, 2, 10.0).is_err());
        assert!(ComplexityParams::new(1, 1.0, 0.5, 1.0, 10, 10.0).is_err());
        assert!(ComplexityParams::new(0, 1.0, 1.0, 1.0, 10, 10.0).is_err());
    }

    #[test]
    fn pi_outside_window_carries_bounds() {
        let p = fixture(1_000_000, 10.0);
        match angular_bound_probability(&p, 1.6) {
            Err(crate::Error::Window { lo, hi, .. }) => {
                assert!(lo > 0.0 && hi == FRAC_PI_2);
            }
            other => panic!("expected window error, got {other:?}"),
        }
    }

    #[test]
    fn pi_monotone_in_theta() {
        let p = fixture(1_000_000, 10.0);
        let w = validity_window(&p).unwrap();
        let mut theta = w.lo + 1e-3;
        let mut prev = angular_bound_probability(&p, theta).unwrap();
        while theta + 1e-3 < w.hi {
            theta += 1e-3;
            let cur = angular_bound_probability(&p, theta).unwrap();
            assert!(cur > prev, "Pi not increasing at theta = {theta}");
            prev = cur;
        }
    }

    #[test]
    fn pi_monotone_in_n() {
        let mut prev = 0.0;
        for n in [1_000u64, 10_000, 100_000, 1_000_000] {
            let v = angular_bound_probability(&fixture(n, 10.0), 0.5).unwrap();
            assert!(v > prev, "Pi not increasing at n = {n}");
            prev = v;
        }
    }

    #[test]
    fn one_minus_pi_scales_as_inverse_sqrt_n() {
        let base = 1.0 - angular_bound_probability(&fixture(100_000, 10.0), 0.5).unwrap();
        let doubled = 1.0 - angular_bound_probability(&fixture(200_000, 10.0), 0.5).unwrap();
        let ratio = doubled / base;
        assert!(
            (ratio - std::f64::consts::FRAC_1_SQRT_2).abs() <= 0.05,
            "decay ratio {ratio}"
        );
    }

    #[test]
    fn equal_bound_property_at_closed_form_angles() {
        let pk = fixture(1_000_000, 10.0);
        let pk2 = fixture(10_000, 10.0);
        let (t_ab, t_ba) =
            optimal_pair_angle(1e6, 10.0, 1e4, 10.0, PSI_100, 0.5).unwrap();
        let a = angular_bound_probability(&pk, t_ab).unwrap();
        let b = angular_bound_probability(&pk2, t_ba).unwrap();
        assert!((a - b).abs() <= 1e-9, "equal-bound violated: {a} vs {b}");
    }

    #[test]
    fn pair_angle_examples() {
        let (a, b) = optimal_pair_angle(50.0, 2.0, 50.0, 2.0, PSI_100, 0.5).unwrap();
        assert_eq!(a, b);
        assert_abs_diff_eq!(a + b, PSI_100, epsilon = 0.0);

        let (a, _) = optimal_pair_angle(1e4, 1.0, 1e2, 1.0, PSI_100, 0.5).unwrap();
        assert_abs_diff_eq!(a, 0.14371795533383205, epsilon = 1e-12); // psi/11
        assert_abs_diff_eq!(a, PSI_100 / 11.0, epsilon = 1e-12);

        // gamma = 0: counts drop out
        let (a, b) = optimal_pair_angle(1e6, 3.0, 10.0, 3.0, PSI_100, 0.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pair_angle_swap_is_exact() {
        let (a, b) = optimal_pair_angle(1234.0, 1.7, 56.0, 0.9, PSI_100, 0.73).unwrap();
        let (b2, a2) = optimal_pair_angle(56.0, 0.9, 1234.0, 1.7, PSI_100, 0.73).unwrap();
        assert_eq!(a, a2);
        assert_eq!(b, b2);
        assert_eq!(a + b, PSI_100);
    }

    #[test]
    fn angle_matrix_k3() {
        let stats = ClassStats::new(vec![100.0, 10.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let psi3 = crate::etf::psi(3).unwrap();
        let m = optimal_angle_matrix(&stats, psi3, 0.5).unwrap();
        assert_abs_diff_eq!(m.angles.get(0, 2), psi3 / 11.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.angles.get(2, 0), 10.0 * psi3 / 11.0, epsilon = 1e-12);
        assert!(m.angles.get(1, 1).is_nan());
        for a in 0..3 {
            for b in 0..3 {
                if a != b {
                    assert_abs_diff_eq!(
                        m.angles.get(a, b) + m.angles.get(b, a),
                        psi3,
                        epsilon = 1e-12
                    );
                }
            }
        }
    }

    #[test]
    fn angle_matrix_identical_classes() {
        let stats = ClassStats::new(vec![7.0; 5], vec![2.0; 5]).unwrap();
        let psi5 = crate::etf::psi(5).unwrap();
        let m = optimal_angle_matrix(&stats, psi5, 0.5).unwrap();
        for a in 0..5 {
            for b in 0..5 {
                if a != b {
                    assert_eq!(m.angles.get(a, b), psi5 / 2.0);
                }
            }
        }
    }

    #[test]
    fn brute_force_symmetric_argmax_at_half_psi() {
        let p = fixture(1_000_000, 10.0);
        let (theta, _) = brute_force_pair_objective(&p, &p, PSI_100, 1e-4).unwrap();
        assert!((theta - PSI_100 / 2.0).abs() <= 1e-4, "argmax {theta}");
    }

    #[test]
    fn brute_force_asymmetric_fixture() {
        // frozen from an independent 50-digit grid evaluation; the argmax
        // differs materially from the closed-form angle by design (the grid
        // scan is a diagnostic, not the classifier's angle source).
        let pk = fixture(1_000_000, 10.0);
        let pk2 = fixture(10_000, 10.0);
        let (theta, value) = brute_force_pair_objective(&pk, &pk2, PSI_100, 1e-4).unwrap();
        assert_abs_diff_eq!(theta, 0.3836, epsilon = 1e-9);
        assert_abs_diff_eq!(value, 1.978110007328853, epsilon = 1e-9);
        let t_star = 0.14371795533383205;
        let at_star = eval_pi_unchecked(&pk, t_star).unwrap()
            + eval_pi_unchecked(&pk2, PSI_100 - t_star).unwrap();
        assert!(value > at_star);
    }

    #[test]
    fn brute_force_empty_region() {
        // window of the second class maps to an interval disjoint from the
        // first's when its lower edge exceeds psi - lo
        let pk = fixture(1_000_000, 10.0);
        let tight = ComplexityParams::new(1, 1.0, 1.0, 40.0, 9, 1.0).unwrap();
        assert!(matches!(
            brute_force_pair_objective(&pk, &tight, PSI_100, 1e-3),
            Err(crate::Error::Window { .. })
        ));
    }

    #[test]
    fn relu_substitution() {
        let p = ReluComplexityParams::new(9, 2.0, 1.0).unwrap();
        assert_eq!(p.mean_complexity(), 11.0);
        assert_eq!(p.bound_b(), 2.0);
        let p = ReluComplexityParams::new(1, 1.0, 1.0).unwrap();
        assert_eq!(p.mean_complexity(), 2.5);
        assert_eq!(p.bound_b(), 1.0);
        assert!(ReluComplexityParams::new(3, 0.0, 1.0).is_err());
    }
}
