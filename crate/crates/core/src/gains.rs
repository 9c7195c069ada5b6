//! Design-time quantities for the event-triggered observers.
//!
//! Everything in this module is computed once, before any simulation runs:
//! the companion gain matrix G, its Hurwitz test, the Lyapunov solution Q of
//! QG + GᵀQ = -I, the gain floor r* = max{1, λ²_max(Q)/ζ} of the linear
//! design, the admissible (ν, μ) intervals of the nonlinear design, the
//! homogeneity weights w_l = (l-1)ν - (l-2), and the dwell time / trigger
//! threshold pairs
//!
//! ```text
//! linear:     τ  = ε  · r^-(n + 1/2),            threshold  = θ  · r^-(n + 1/2)
//! nonlinear:  τ* = ε* · r^-(n + 1/(nν-(n-1))),   threshold* = θ* · r^-(n + 1/(nν-(n-1)))
//! ```
//!
//! All values are immutable after construction and safe to share across
//! threads.

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::observer::signed_power;

/// Eigenvalue real parts must lie below `-HURWITZ_TOL` to count as Hurwitz.
pub const HURWITZ_TOL: f64 = 1e-9;
/// Maximum accepted infinity norm of QG + GᵀQ + I.
pub const LYAPUNOV_RESIDUAL_TOL: f64 = 1e-10;

/// Builds the companion-form gain matrix from observer coefficients
/// a₁..a_{m}: row i carries -a_i in column 1 and a 1 in column i+1, the last
/// row is (-a_m, 0, ..., 0).
pub fn build_companion(a: &[f64]) -> Result<DMatrix<f64>> {
    if a.is_empty() {
        return Err(Error::InvalidArgument(
            "companion matrix needs at least one coefficient".into(),
        ));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "companion coefficients must be finite".into(),
        ));
    }
    let m = a.len();
    let mut g = DMatrix::zeros(m, m);
    for i in 0..m {
        g[(i, 0)] = -a[i];
        if i + 1 < m {
            g[(i, i + 1)] = 1.0;
        }
    }
    Ok(g)
}

/// True iff every eigenvalue of the square matrix has real part below
/// `-HURWITZ_TOL`.
pub fn is_hurwitz(g: &DMatrix<f64>) -> Result<bool> {
    if g.nrows() != g.ncols() || g.nrows() == 0 {
        return Err(Error::InvalidArgument(format!(
            "Hurwitz test needs a non-empty square matrix, got {}x{}",
            g.nrows(),
            g.ncols()
        )));
    }
    if g.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument(
            "Hurwitz test needs finite entries".into(),
        ));
    }
    let eigs = g.complex_eigenvalues();
    Ok(eigs.iter().all(|e| e.re < -HURWITZ_TOL))
}

/// Solves QG + GᵀQ = -I for the unique symmetric positive definite Q.
///
/// The linear system is vectorized in Kronecker form,
/// (Gᵀ ⊗ I + I ⊗ Gᵀ) vec(Q) = vec(-I), and solved densely; the dimensions
/// here never exceed a handful. The result is symmetrized and its residual
/// checked against [`LYAPUNOV_RESIDUAL_TOL`].
pub fn solve_lyapunov(g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !is_hurwitz(g)? {
        return Err(Error::InfeasibleDesign(
            "Lyapunov equation QG + G'Q = -I has a positive definite solution only for Hurwitz G"
                .into(),
        ));
    }
    let m = g.nrows();
    let id = DMatrix::<f64>::identity(m, m);
    let gt = g.transpose();
    let system = gt.kronecker(&id) + id.kronecker(&gt);
    let rhs = DMatrix::from_fn(m * m, 1, |k, _| if k % m == k / m { -1.0 } else { 0.0 });
    let sol = system
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InfeasibleDesign("Lyapunov system is singular".into()))?;
    let q_raw = DMatrix::from_fn(m, m, |i, j| sol[(j * m + i, 0)]);
    let q = (&q_raw + q_raw.transpose()) * 0.5;

    let residual = &q * g + gt * &q + DMatrix::<f64>::identity(m, m);
    let res_norm = inf_norm(&residual);
    if res_norm > LYAPUNOV_RESIDUAL_TOL {
        return Err(Error::InfeasibleDesign(format!(
            "Lyapunov residual {res_norm:.3e} exceeds {LYAPUNOV_RESIDUAL_TOL:.1e}"
        )));
    }
    if symmetric_eigenvalues(&q).0 <= 0.0 {
        return Err(Error::InfeasibleDesign(
            "Lyapunov solution is not positive definite".into(),
        ));
    }
    Ok(q)
}

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// (λ_min, λ_max) of a symmetric matrix.
fn symmetric_eigenvalues(q: &DMatrix<f64>) -> (f64, f64) {
    let eigs = q.clone().symmetric_eigen().eigenvalues;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in eigs.iter() {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    (lo, hi)
}

/// Gain floor of the linear design: max{1, λ²_max(Q)/ζ} for ζ ∈ (0, 1).
pub fn linear_r_star(q: &DMatrix<f64>, zeta: f64) -> Result<f64> {
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "zeta must lie in (0, 1), got {zeta}"
        )));
    }
    if q.nrows() != q.ncols() || q.nrows() == 0 {
        return Err(Error::InvalidArgument("Q must be square".into()));
    }
    let asym = inf_norm(&(q - q.transpose()));
    if asym > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "Q must be symmetric (asymmetry {asym:.3e})"
        )));
    }
    let (lo, hi) = symmetric_eigenvalues(q);
    if lo <= 0.0 {
        return Err(Error::InvalidArgument("Q must be positive definite".into()));
    }
    Ok(1f64.max(hi * hi / zeta))
}

/// Admissible open interval for the homogeneity power ν given the plant
/// order n and the moment order p > 2:
/// (max{1 - (p-2)/((p-2)n + p + 1), 1 - 1/(2n-1)}, 1).
pub fn nu_interval(n: usize, p: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("plant order n must be >= 1".into()));
    }
    if !(p > 2.0) {
        return Err(Error::InvalidArgument(format!(
            "moment order p must exceed 2, got {p}"
        )));
    }
    let nf = n as f64;
    let first = 1.0 - (p - 2.0) / ((p - 2.0) * nf + p + 1.0);
    let second = 1.0 - 1.0 / (2.0 * nf - 1.0);
    Ok((first.max(second), 1.0))
}

/// Admissible open interval for the analysis exponent μ:
/// (max{1, 2(nν - (n-1))}, (2n-1)ν - 2n + 3). Empty intervals are rejected.
pub fn mu_interval(n: usize, nu: f64) -> Result<(f64, f64)> {
    if n == 0 {
        return Err(Error::InvalidArgument("plant order n must be >= 1".into()));
    }
    let nf = n as f64;
    let lo = 1f64.max(2.0 * (nf * nu - (nf - 1.0)));
    let hi = (2.0 * nf - 1.0) * nu - 2.0 * nf + 3.0;
    if !(lo < hi) {
        return Err(Error::InfeasibleDesign(format!(
            "mu interval (max{{1, 2(n nu-(n-1))}}, (2n-1)nu-2n+3) = ({lo}, {hi}) is empty for n={n}, nu={nu}"
        )));
    }
    Ok((lo, hi))
}

/// Homogeneity weights w_l = (l-1)ν - (l-2) for l = 1..=n+1.
pub fn homogeneity_weights(n: usize, nu: f64) -> Vec<f64> {
    (1..=n + 1)
        .map(|l| (l as f64 - 1.0) * nu - (l as f64 - 2.0))
        .collect()
}

/// Observer gain coefficients a₁..a_{n+1} whose companion matrix is Hurwitz.
#[derive(Debug, Clone, PartialEq)]
pub struct CompanionGains {
    n: usize,
    a: Vec<f64>,
    g: DMatrix<f64>,
}

impl CompanionGains {
    /// Validates that `a` has at least two coefficients (plant order n =
    /// len - 1 >= 1) and that the companion matrix is Hurwitz.
    pub fn new(a: Vec<f64>) -> Result<Self> {
        if a.len() < 2 {
            return Err(Error::InvalidArgument(
                "observer needs at least two coefficients (plant order n >= 1)".into(),
            ));
        }
        let g = build_companion(&a)?;
        if !is_hurwitz(&g)? {
            return Err(Error::InfeasibleDesign(format!(
                "companion matrix of a={a:?} is not Hurwitz"
            )));
        }
        Ok(Self {
            n: a.len() - 1,
            a,
            g,
        })
    }

    /// Plant order n.
    pub fn order(&self) -> usize {
        self.n
    }

    /// The coefficients a₁..a_{n+1}.
    pub fn coefficients(&self) -> &[f64] {
        &self.a
    }

    /// The (n+1)×(n+1) companion matrix G.
    pub fn companion(&self) -> &DMatrix<f64> {
        &self.g
    }
}

/// Whether a linear design accepts a tuning gain below its theoretical
/// floor r*.
///
/// The convergence bounds assume r >= r*, but r* is conservative; reference
/// configurations from the literature run below it. `AllowBelowRStar` keeps
/// r* computed and reported while accepting any r >= 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GainPolicy {
    #[default]
    Strict,
    AllowBelowRStar,
}

/// Fully resolved linear observer design.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDesign {
    gains: CompanionGains,
    r: f64,
    zeta: f64,
    theta: f64,
    epsilon: f64,
    q: DMatrix<f64>,
    lambda_min_q: f64,
    lambda_max_q: f64,
    r_star: f64,
    tau: f64,
    threshold: f64,
}

/// Default ζ; any value in (0, 1) is admissible, smaller values only
/// inflate r*.
pub const DEFAULT_ZETA: f64 = 0.9;

impl LinearDesign {
    /// Strict construction: requires r >= r* = max{1, λ²_max(Q)/ζ}.
    pub fn new(gains: CompanionGains, r: f64, zeta: f64, theta: f64, epsilon: f64) -> Result<Self> {
        Self::with_policy(gains, r, zeta, theta, epsilon, GainPolicy::Strict)
    }

    pub fn with_policy(
        gains: CompanionGains,
        r: f64,
        zeta: f64,
        theta: f64,
        epsilon: f64,
        policy: GainPolicy,
    ) -> Result<Self> {
        if !(theta > 0.0 && theta.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "threshold tuner theta must be positive, got {theta}"
            )));
        }
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dwell tuner epsilon must be positive, got {epsilon}"
            )));
        }
        let q = solve_lyapunov(gains.companion())?;
        let (lambda_min_q, lambda_max_q) = symmetric_eigenvalues(&q);
        let r_star = linear_r_star(&q, zeta)?;
        match policy {
            GainPolicy::Strict => {
                if r < r_star {
                    return Err(Error::InfeasibleDesign(format!(
                        "tuning gain r={r} is below r*={r_star} (= max{{1, lambda_max(Q)^2/zeta}} with lambda_max(Q)={lambda_max_q}, zeta={zeta})"
                    )));
                }
            }
            GainPolicy::AllowBelowRStar => {
                if !(r >= 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "tuning gain r must be >= 1, got {r}"
                    )));
                }
            }
        }
        let n = gains.order() as f64;
        let scale = r.powf(-(n + 0.5));
        Ok(Self {
            gains,
            r,
            zeta,
            theta,
            epsilon,
            q,
            lambda_min_q,
            lambda_max_q,
            r_star,
            tau: epsilon * scale,
            threshold: theta * scale,
        })
    }

    pub fn gains(&self) -> &CompanionGains {
        &self.gains
    }
    pub fn order(&self) -> usize {
        self.gains.order()
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn zeta(&self) -> f64 {
        self.zeta
    }
    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
    pub fn lyapunov_q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn lambda_min_q(&self) -> f64 {
        self.lambda_min_q
    }
    pub fn lambda_max_q(&self) -> f64 {
        self.lambda_max_q
    }
    pub fn r_star(&self) -> f64 {
        self.r_star
    }
    /// Minimum inter-event time τ = ε·r^-(n+1/2).
    pub fn dwell(&self) -> f64 {
        self.tau
    }
    /// Trigger threshold θ·r^-(n+1/2).
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    /// True when the design runs below its theoretical gain floor.
    pub fn below_r_star(&self) -> bool {
        self.r < self.r_star
    }

    /// Predicted decay exponent of E|x_i - x̂_i|² in r: 2n+3-2i, i = 1..=n+1.
    pub fn predicted_mse_exponent(&self, i: usize) -> f64 {
        2.0 * self.gains.order() as f64 + 3.0 - 2.0 * i as f64
    }

    /// Predicted decay exponent of the almost-sure error bound: n+3/2-i.
    pub fn predicted_as_exponent(&self, i: usize) -> f64 {
        self.gains.order() as f64 + 1.5 - i as f64
    }
}

/// Fully resolved nonlinear (homogeneous) observer design.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearDesign {
    gains: CompanionGains,
    r: f64,
    nu: f64,
    p: f64,
    mu: f64,
    theta_star: f64,
    epsilon_star: f64,
    weights: Vec<f64>,
    tau_star: f64,
    threshold_star: f64,
}

impl NonlinearDesign {
    /// Validates ν strictly inside `nu_interval(n, p)` and μ strictly inside
    /// `mu_interval(n, ν)`; `mu = None` selects the interval midpoint. μ only
    /// enters the reported convergence-rate predictions, never the observer
    /// dynamics.
    pub fn new(
        gains: CompanionGains,
        r: f64,
        p: f64,
        nu: f64,
        mu: Option<f64>,
        theta_star: f64,
        epsilon_star: f64,
    ) -> Result<Self> {
        if !(r >= 1.0 && r.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "tuning gain r must be >= 1, got {r}"
            )));
        }
        if !(theta_star > 0.0 && theta_star.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "threshold tuner theta* must be positive, got {theta_star}"
            )));
        }
        if !(epsilon_star > 0.0 && epsilon_star.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dwell tuner epsilon* must be positive, got {epsilon_star}"
            )));
        }
        let n = gains.order();
        let (nu_lo, nu_hi) = nu_interval(n, p)?;
        if !(nu > nu_lo && nu < nu_hi) {
            return Err(Error::InfeasibleDesign(format!(
                "nu={nu} outside the admissible interval ({nu_lo}, {nu_hi}) for n={n}, p={p}"
            )));
        }
        let (mu_lo, mu_hi) = mu_interval(n, nu)?;
        let mu = mu.unwrap_or(0.5 * (mu_lo + mu_hi));
        if !(mu > mu_lo && mu < mu_hi) {
            return Err(Error::InfeasibleDesign(format!(
                "mu={mu} outside the admissible interval ({mu_lo}, {mu_hi}) for n={n}, nu={nu}"
            )));
        }
        let weights = homogeneity_weights(n, nu);
        if weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::InfeasibleDesign(format!(
                "homogeneity weights {weights:?} must all be positive"
            )));
        }
        let nf = n as f64;
        let exponent = nf + 1.0 / (nf * nu - (nf - 1.0));
        let scale = r.powf(-exponent);
        Ok(Self {
            gains,
            r,
            nu,
            p,
            mu,
            theta_star,
            epsilon_star,
            weights,
            tau_star: epsilon_star * scale,
            threshold_star: theta_star * scale,
        })
    }

    pub fn gains(&self) -> &CompanionGains {
        &self.gains
    }
    pub fn order(&self) -> usize {
        self.gains.order()
    }
    pub fn r(&self) -> f64 {
        self.r
    }
    pub fn nu(&self) -> f64 {
        self.nu
    }
    pub fn p(&self) -> f64 {
        self.p
    }
    pub fn mu(&self) -> f64 {
        self.mu
    }
    pub fn theta_star(&self) -> f64 {
        self.theta_star
    }
    pub fn epsilon_star(&self) -> f64 {
        self.epsilon_star
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    /// Minimum inter-event time τ* = ε*·r^-(n + 1/(nν-(n-1))).
    pub fn dwell(&self) -> f64 {
        self.tau_star
    }
    /// Trigger threshold θ*·r^-(n + 1/(nν-(n-1))).
    pub fn threshold(&self) -> f64 {
        self.threshold_star
    }

    /// Predicted decay exponent of the almost-sure error bound in r:
    /// n + 1 + w_i/(μ-1+ν) - i, i = 1..=n+1.
    pub fn predicted_as_exponent(&self, i: usize) -> f64 {
        let n = self.gains.order() as f64;
        n + 1.0 + self.weights[i - 1] / (self.mu - 1.0 + self.nu) - i as f64
    }
}

/// Either observer design; carries everything a simulation needs.
#[derive(Debug, Clone, PartialEq)]
pub enum Design {
    Linear(LinearDesign),
    Nonlinear(NonlinearDesign),
}

impl Design {
    pub fn order(&self) -> usize {
        match self {
            Design::Linear(d) => d.order(),
            Design::Nonlinear(d) => d.order(),
        }
    }

    pub fn r(&self) -> f64 {
        match self {
            Design::Linear(d) => d.r(),
            Design::Nonlinear(d) => d.r(),
        }
    }

    pub fn gains(&self) -> &CompanionGains {
        match self {
            Design::Linear(d) => d.gains(),
            Design::Nonlinear(d) => d.gains(),
        }
    }

    pub fn dwell(&self) -> f64 {
        match self {
            Design::Linear(d) => d.dwell(),
            Design::Nonlinear(d) => d.dwell(),
        }
    }

    pub fn threshold(&self) -> f64 {
        match self {
            Design::Linear(d) => d.threshold(),
            Design::Nonlinear(d) => d.threshold(),
        }
    }

    /// The (dwell time, trigger threshold) pair of the design's ETM.
    pub fn dwell_and_threshold(&self) -> (f64, f64) {
        (self.dwell(), self.threshold())
    }
}

/// Design parameters without a tuning gain; `build(r)` instantiates the
/// design at a given r. This is what gain sweeps iterate over.
#[derive(Debug, Clone, PartialEq)]
pub enum DesignSpec {
    Linear {
        a: Vec<f64>,
        zeta: f64,
        theta: f64,
        epsilon: f64,
        policy: GainPolicy,
    },
    Nonlinear {
        a: Vec<f64>,
        p: f64,
        nu: f64,
        mu: Option<f64>,
        theta_star: f64,
        epsilon_star: f64,
    },
}

impl DesignSpec {
    pub fn build(&self, r: f64) -> Result<Design> {
        match self {
            DesignSpec::Linear {
                a,
                zeta,
                theta,
                epsilon,
                policy,
            } => Ok(Design::Linear(LinearDesign::with_policy(
                CompanionGains::new(a.clone())?,
                r,
                *zeta,
                *theta,
                *epsilon,
                *policy,
            )?)),
            DesignSpec::Nonlinear {
                a,
                p,
                nu,
                mu,
                theta_star,
                epsilon_star,
            } => Ok(Design::Nonlinear(NonlinearDesign::new(
                CompanionGains::new(a.clone())?,
                r,
                *p,
                *nu,
                *mu,
                *theta_star,
                *epsilon_star,
            )?)),
        }
    }
}

/// The homogeneous correction field used by the nonlinear observer error
/// dynamics: component l is ϑ_{l+1} - a_l·⟨ϑ₁⟩^(lν-(l-1)) for l <= n and
/// -a_{n+1}·⟨ϑ₁⟩^((n+1)ν-n) for l = n+1.
pub fn homogeneous_field(gains: &CompanionGains, nu: f64, theta: &[f64]) -> Result<Vec<f64>> {
    let n = gains.order();
    if theta.len() != n + 1 {
        return Err(Error::InvalidArgument(format!(
            "field argument needs {} components, got {}",
            n + 1,
            theta.len()
        )));
    }
    let a = gains.coefficients();
    let mut out = Vec::with_capacity(n + 1);
    for l in 1..=n {
        let power = l as f64 * nu - (l as f64 - 1.0);
        out.push(theta[l] - a[l - 1] * signed_power(theta[0], power)?);
    }
    let power = (n as f64 + 1.0) * nu - n as f64;
    out.push(-a[n] * signed_power(theta[0], power)?);
    Ok(out)
}

/// Maximum relative deviation, over random points and scalings, between
/// Φ_l(λ^{w₁}ϑ₁, ..., λ^{w_{n+1}}ϑ_{n+1}) and λ^{(ν-1)+w_l}·Φ_l(ϑ).
///
/// Zero (up to floating-point noise) certifies that the correction field is
/// homogeneous of degree ν-1 with respect to the weights w_l.
pub fn homogeneity_residual(
    gains: &CompanionGains,
    nu: f64,
    samples: usize,
    lambda_range: (f64, f64),
    rng_seed: u64,
) -> Result<f64> {
    let n = gains.order();
    let nf = n as f64;
    if !(nu > 1.0 - 1.0 / nf && nu < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "nu={nu} outside (1 - 1/n, 1) = ({}, 1) for n={n}",
            1.0 - 1.0 / nf
        )));
    }
    let (lam_lo, lam_hi) = lambda_range;
    if !(lam_lo > 0.0 && lam_hi >= lam_lo) {
        return Err(Error::InvalidArgument(format!(
            "lambda range must satisfy 0 < lo <= hi, got ({lam_lo}, {lam_hi})"
        )));
    }
    if samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let weights = homogeneity_weights(n, nu);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut worst = 0.0f64;
    let mut point = vec![0.0; n + 1];
    let mut scaled = vec![0.0; n + 1];
    for _ in 0..samples {
        for v in point.iter_mut() {
            *v = rng.random_range(-2.0..2.0);
        }
        let lambda = rng.random_range(lam_lo..=lam_hi);
        for (l, v) in scaled.iter_mut().enumerate() {
            *v = lambda.powf(weights[l]) * point[l];
        }
        let lhs = homogeneous_field(gains, nu, &scaled)?;
        let base = homogeneous_field(gains, nu, &point)?;
        for l in 0..=n {
            let rhs = lambda.powf(nu - 1.0 + weights[l]) * base[l];
            let rel = (lhs[l] - rhs).abs() / (rhs.abs() + 1e-300);
            worst = worst.max(rel);
        }
    }
    Ok(worst)
}
