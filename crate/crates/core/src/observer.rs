//! The two event-triggered extended state observers and their trigger rule.
//!
//! Between execution times the observers integrate against the held output
//! sample y(t_k) (zero-order hold). The linear form uses gain powers of r,
//!
//! ```text
//! x̂̇_i     = x̂_{i+1} + a_i r^i (y(t_k) - x̂₁)      i = 1..n-1
//! x̂̇_n     = x̂_{n+1} + a_n r^n (y(t_k) - x̂₁) + u
//! x̂̇_{n+1} = a_{n+1} r^{n+1} (y(t_k) - x̂₁)
//! ```
//!
//! and the nonlinear form replaces the innovation by signed fractional powers
//! of E = r^n (y(t_k) - x̂₁):
//!
//! ```text
//! x̂̇_i     = x̂_{i+1} + a_i r^{i-n} ⟨E⟩^{iν-(i-1)}   i = 1..n-1
//! x̂̇_n     = x̂_{n+1} + a_n ⟨E⟩^{nν-(n-1)} + u
//! x̂̇_{n+1} = a_{n+1} r ⟨E⟩^{(n+1)ν-n}
//! ```
//!
//! At ν = 1 the nonlinear form reduces algebraically to the linear one.
//!
//! The trigger rule fires at the first poll instant t with
//! t >= t_k + dwell and |y(t) - y(t_k)| >= threshold; the dwell time makes
//! the inter-event times bounded below by construction, so Zeno behavior is
//! impossible.

use crate::error::{Error, Result};
use crate::gains::Design;

/// Signed power ⟨x⟩^s = sign(x)·|x|^s for s > 0, with ⟨0⟩^s = 0.
pub fn signed_power(x: f64, s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "signed power exponent must be positive, got {s}"
        )));
    }
    // The zero early-out keeps exp(s·ln|x|) away from ln 0.
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(x.signum() * x.abs().powf(s))
}

/// Linear observer right-hand side, written into `out` (length n+1).
pub fn linear_eso_derivative_into(
    a: &[f64],
    r: f64,
    xhat: &[f64],
    held_output: f64,
    u: f64,
    out: &mut [f64],
) {
    let m = a.len();
    let n = m - 1;
    debug_assert_eq!(xhat.len(), m);
    debug_assert_eq!(out.len(), m);
    let e = held_output - xhat[0];
    let mut r_pow = 1.0;
    for i in 1..=n {
        r_pow *= r;
        out[i - 1] = xhat[i] + a[i - 1] * r_pow * e;
    }
    out[n - 1] += u;
    r_pow *= r;
    out[n] = a[n] * r_pow * e;
}

/// Nonlinear (homogeneous) observer right-hand side, written into `out`.
pub fn nonlinear_eso_derivative_into(
    a: &[f64],
    r: f64,
    nu: f64,
    xhat: &[f64],
    held_output: f64,
    u: f64,
    out: &mut [f64],
) -> Result<()> {
    let m = a.len();
    let n = m - 1;
    debug_assert_eq!(xhat.len(), m);
    debug_assert_eq!(out.len(), m);
    let e = held_output - xhat[0];
    let scaled = r.powi(n as i32) * e;
    for i in 1..=n {
        let power = i as f64 * nu - (i as f64 - 1.0);
        let gain = a[i - 1] / r.powi((n - i) as i32);
        out[i - 1] = xhat[i] + gain * signed_power(scaled, power)?;
    }
    out[n - 1] += u;
    let power = (n as f64 + 1.0) * nu - n as f64;
    out[n] = a[n] * r * signed_power(scaled, power)?;
    Ok(())
}

/// Observer state: the estimates x̂₁..x̂_{n+1} plus the design that defines
/// the dynamics.
#[derive(Debug, Clone)]
pub struct EsoState {
    pub xhat: Vec<f64>,
    design: Design,
}

impl EsoState {
    /// Starts from x̂(0) = 0, the conventional choice.
    pub fn new(design: Design) -> Self {
        let m = design.order() + 1;
        Self {
            xhat: vec![0.0; m],
            design,
        }
    }

    pub fn with_initial(design: Design, xhat: Vec<f64>) -> Result<Self> {
        if xhat.len() != design.order() + 1 {
            return Err(Error::InvalidArgument(format!(
                "observer state needs {} components, got {}",
                design.order() + 1,
                xhat.len()
            )));
        }
        if xhat.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "observer initial state must be finite".into(),
            ));
        }
        Ok(Self { xhat, design })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    /// Derivative of the estimates under the held output sample and known
    /// input. `t` only labels the overflow error when the innovation has
    /// left the representable range.
    pub fn derivative_into(&self, t: f64, held_output: f64, u: f64, out: &mut [f64]) -> Result<()> {
        let e = held_output - self.xhat[0];
        if !e.is_finite() {
            return Err(Error::NumericOverflow {
                time: t,
                path: None,
                what: format!("observer innovation y(t_k) - xhat1 = {e}"),
            });
        }
        match &self.design {
            Design::Linear(d) => {
                linear_eso_derivative_into(
                    d.gains().coefficients(),
                    d.r(),
                    &self.xhat,
                    held_output,
                    u,
                    out,
                );
                Ok(())
            }
            Design::Nonlinear(d) => nonlinear_eso_derivative_into(
                d.gains().coefficients(),
                d.r(),
                d.nu(),
                &self.xhat,
                held_output,
                u,
                out,
            ),
        }
    }

    pub fn derivative(&self, t: f64, held_output: f64, u: f64) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.xhat.len()];
        self.derivative_into(t, held_output, u, &mut out)?;
        Ok(out)
    }
}

/// One logged execution of the trigger rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriggerEvent {
    /// 1-based execution index k.
    pub k: usize,
    /// Execution time t_k.
    pub time: f64,
    /// Output sample y(t_k) held until the next execution.
    pub held: f64,
}

/// Live state of one event-triggering rule.
///
/// The first execution t₁ = 0 is logged at construction; afterwards
/// [`EtmState::poll`] decides. Consecutive logged times always differ by at
/// least the dwell time.
#[derive(Debug, Clone)]
pub struct EtmState {
    last_trigger_time: f64,
    held_output: f64,
    dwell: f64,
    threshold: f64,
    trigger_count: usize,
    trigger_log: Vec<TriggerEvent>,
    last_poll_time: f64,
}

impl EtmState {
    pub fn new(dwell: f64, threshold: f64, y0: f64) -> Result<Self> {
        if !(dwell > 0.0 && dwell.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "dwell time must be positive, got {dwell}"
            )));
        }
        if !(threshold > 0.0 && threshold.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "trigger threshold must be positive, got {threshold}"
            )));
        }
        if !y0.is_finite() {
            return Err(Error::InvalidArgument(
                "initial output sample must be finite".into(),
            ));
        }
        Ok(Self {
            last_trigger_time: 0.0,
            held_output: y0,
            dwell,
            threshold,
            trigger_count: 1,
            trigger_log: vec![TriggerEvent {
                k: 1,
                time: 0.0,
                held: y0,
            }],
            last_poll_time: 0.0,
        })
    }

    /// Checks the trigger condition at time t with measurement y. Returns
    /// true and refreshes the held sample iff the dwell time has elapsed and
    /// |y - y(t_k)| >= threshold (boundary included).
    pub fn poll(&mut self, t: f64, y: f64) -> Result<bool> {
        if t < self.last_poll_time || t < self.last_trigger_time {
            return Err(Error::InvalidArgument(format!(
                "poll time went backwards: t={t}, last poll {}, last trigger {}",
                self.last_poll_time, self.last_trigger_time
            )));
        }
        self.last_poll_time = t;
        // Gate on the same difference the log reports, so logged inter-event
        // times are >= dwell exactly, with no rounding escape hatch.
        if t - self.last_trigger_time < self.dwell {
            return Ok(false);
        }
        if (y - self.held_output).abs() >= self.threshold {
            self.last_trigger_time = t;
            self.held_output = y;
            self.trigger_count += 1;
            self.trigger_log.push(TriggerEvent {
                k: self.trigger_count,
                time: t,
                held: y,
            });
            return Ok(true);
        }
        Ok(false)
    }

    pub fn held_output(&self) -> f64 {
        self.held_output
    }
    pub fn last_trigger_time(&self) -> f64 {
        self.last_trigger_time
    }
    pub fn dwell(&self) -> f64 {
        self.dwell
    }
    pub fn threshold(&self) -> f64 {
        self.threshold
    }
    pub fn trigger_count(&self) -> usize {
        self.trigger_count
    }
    pub fn log(&self) -> &[TriggerEvent] {
        &self.trigger_log
    }
    pub fn into_log(self) -> Vec<TriggerEvent> {
        self.trigger_log
    }

    /// Differences of consecutive logged execution times.
    pub fn inter_event_times(&self) -> Vec<f64> {
        self.trigger_log
            .windows(2)
            .map(|w| w[1].time - w[0].time)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gains::{CompanionGains, GainPolicy, LinearDesign, NonlinearDesign};
    use crate::noise::{BoxMullerRng, GaussianSource};

    fn approx(a: f64, b: f64, tol: f64) {
        assert!((a - b).abs() <= tol, "{a} != {b} (tol {tol})");
    }

    #[test]
    fn signed_power_examples() {
        approx(signed_power(-8.0, 1.0 / 3.0).unwrap(), -2.0, 1e-12);
        approx(signed_power(0.25, 0.5).unwrap(), 0.5, 1e-15);
        // Derived via exp((5/7) ln 2).
        let expected = -((5.0 / 7.0) * 2f64.ln()).exp();
        approx(signed_power(-2.0, 5.0 / 7.0).unwrap(), expected, 1e-15);
        assert_eq!(signed_power(0.0, 0.7).unwrap(), 0.0);
        assert_eq!(signed_power(-0.0, 0.7).unwrap(), 0.0);
        assert!(signed_power(1.0, 0.0).is_err());
        assert!(signed_power(1.0, -1.0).is_err());
    }

    #[test]
    fn signed_power_is_odd_and_monotone() {
        let mut src = BoxMullerRng::from_seed(3);
        for _ in 0..500 {
            let x = 3.0 * src.next_gaussian();
            let s = 0.1 + src.next_gaussian().abs();
            let plus = signed_power(x, s).unwrap();
            let minus = signed_power(-x, s).unwrap();
            assert_eq!(plus.to_bits(), (-minus).to_bits());
        }
        for s in [0.3, 0.7, 1.0, 1.9] {
            let mut prev = f64::NEG_INFINITY;
            for k in -40..=40 {
                let v = signed_power(k as f64 / 7.0, s).unwrap();
                assert!(v >= prev);
                prev = v;
            }
        }
    }

    fn bench_designs() -> (LinearDesign, NonlinearDesign) {
        let gains = CompanionGains::new(vec![3.0, 3.0, 1.0]).unwrap();
        let lin = LinearDesign::with_policy(
            gains.clone(),
            15.0,
            0.9,
            1.0,
            1.0,
            GainPolicy::AllowBelowRStar,
        )
        .unwrap();
        let non = NonlinearDesign::new(gains, 15.0, 3.0, 6.0 / 7.0, None, 1.0, 1.0).unwrap();
        (lin, non)
    }

    #[test]
    fn zero_state_is_fixed_point() {
        let (lin, non) = bench_designs();
        let eso_l = EsoState::new(Design::Linear(lin));
        assert_eq!(eso_l.derivative(0.0, 0.0, 0.0).unwrap(), vec![0.0; 3]);
        let eso_n = EsoState::new(Design::Nonlinear(non));
        assert_eq!(eso_n.derivative(0.0, 0.0, 0.0).unwrap(), vec![0.0; 3]);
    }

    #[test]
    fn linear_derivative_hand_evaluated() {
        let (lin, _) = bench_designs();
        let eso = EsoState::with_initial(Design::Linear(lin), vec![0.0, 1.0, 2.0]).unwrap();
        let d = eso.derivative(0.0, 1.0, 0.0).unwrap();
        assert_eq!(d, vec![46.0, 677.0, 3375.0]);
    }

    #[test]
    fn linear_derivative_is_affine_in_innovation() {
        let (lin, _) = bench_designs();
        let a = lin.gains().coefficients().to_vec();
        let r = lin.r();
        let xhat = [0.0, 0.4, -0.2];
        let mut d0 = [0.0; 3];
        let mut d1 = [0.0; 3];
        let mut d2 = [0.0; 3];
        let mut d12 = [0.0; 3];
        // Innovation e = held - xhat1; xhat1 = 0 makes held the innovation.
        linear_eso_derivative_into(&a, r, &xhat, 0.0, 0.0, &mut d0);
        linear_eso_derivative_into(&a, r, &xhat, 0.3, 0.0, &mut d1);
        linear_eso_derivative_into(&a, r, &xhat, -0.9, 0.0, &mut d2);
        linear_eso_derivative_into(&a, r, &xhat, 0.3 - 0.9, 0.0, &mut d12);
        for i in 0..3 {
            approx(d1[i] + d2[i] - d0[i], d12[i], 1e-9 * d12[i].abs().max(1.0));
        }
    }

    #[test]
    fn nonlinear_with_unit_power_reduces_to_linear() {
        let a = [3.0, 3.0, 1.0];
        let mut src = BoxMullerRng::from_seed(17);
        for _ in 0..2000 {
            let r = 1.0 + 30.0 * src.next_gaussian().abs();
            let xhat = [
                src.next_gaussian(),
                src.next_gaussian(),
                src.next_gaussian(),
            ];
            let held = src.next_gaussian();
            let u = src.next_gaussian();
            let mut lin = [0.0; 3];
            let mut non = [0.0; 3];
            linear_eso_derivative_into(&a, r, &xhat, held, u, &mut lin);
            nonlinear_eso_derivative_into(&a, r, 1.0, &xhat, held, u, &mut non).unwrap();
            for i in 0..3 {
                let rel = (lin[i] - non[i]).abs() / (lin[i].abs() + 1e-300);
                assert!(rel <= 1e-12, "component {i}: {} vs {}", lin[i], non[i]);
            }
        }
    }

    #[test]
    fn non_finite_innovation_is_reported() {
        let (lin, _) = bench_designs();
        let eso = EsoState::new(Design::Linear(lin));
        let err = eso.derivative(2.5, f64::NAN, 0.0);
        match err {
            Err(Error::NumericOverflow { time, .. }) => assert_eq!(time, 2.5),
            other => panic!("expected overflow error, got {other:?}"),
        }
    }

    #[test]
    fn etm_dwell_gates_even_large_deviations() {
        let mut etm = EtmState::new(1e-3, 0.1, 0.0).unwrap();
        assert!(!etm.poll(5e-4, 1.0).unwrap());
        assert_eq!(etm.trigger_count(), 1);
        assert_eq!(etm.held_output(), 0.0);
    }

    #[test]
    fn etm_below_threshold_does_not_fire() {
        let mut etm = EtmState::new(1e-3, 0.1, 0.0).unwrap();
        assert!(!etm.poll(2e-3, 0.0).unwrap());
        assert_eq!(etm.trigger_count(), 1);
    }

    #[test]
    fn etm_fires_on_boundary() {
        let mut etm = EtmState::new(1e-3, 0.1, 0.0).unwrap();
        assert!(etm.poll(2e-3, 0.1).unwrap());
        assert_eq!(etm.trigger_count(), 2);
        assert_eq!(etm.held_output(), 0.1);
        assert_eq!(etm.last_trigger_time(), 2e-3);
        assert_eq!(etm.log().len(), 2);
        assert_eq!(etm.log()[0].time, 0.0);
    }

    #[test]
    fn etm_rejects_decreasing_time() {
        let mut etm = EtmState::new(1e-3, 0.1, 0.0).unwrap();
        etm.poll(5e-3, 0.0).unwrap();
        assert!(etm.poll(4e-3, 0.0).is_err());
    }

    #[test]
    fn inter_event_times_respect_dwell() {
        let dwell = 0.05;
        let mut etm = EtmState::new(dwell, 0.01, 0.0).unwrap();
        let mut src = BoxMullerRng::from_seed(8);
        let h = 0.01;
        for j in 1..=10_000 {
            let t = j as f64 * h;
            let y = src.next_gaussian();
            etm.poll(t, y).unwrap();
        }
        assert!(etm.trigger_count() > 10, "test should actually trigger");
        for gap in etm.inter_event_times() {
            assert!(gap >= dwell);
        }
    }

    #[test]
    fn held_output_constant_between_triggers() {
        let mut etm = EtmState::new(0.5, 10.0, 1.25).unwrap();
        for j in 1..100 {
            etm.poll(j as f64 * 0.01, (j as f64).sin()).unwrap();
            assert_eq!(etm.held_output(), 1.25);
        }
    }
}
