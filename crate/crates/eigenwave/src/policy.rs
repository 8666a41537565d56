//! Per-stream policy constants and the two instantaneous power-allocation
//! rules.
//!
//! A stream is specified by its index among the ordered subchannels, a
//! modulation pair (xi, beta), a target average BER, and one of three outage
//! inputs (an explicit eigenvalue threshold, a target individual outage
//! probability, or a SISO outage exponent). From these the derived constants
//! are:
//!
//! - `lambda_out`: the eigenvalue threshold below which the stream mutes;
//! - `lambda_mea`: transmit probability divided by the tail inverse moment,
//!   always >= lambda_out by the integral mean value theorem;
//! - `delta = lambda_out / lambda_mea` in (0, 1];
//! - `snr_hat`: the SNR target inverting BER = (xi/2) exp(-beta SNR / 2);
//! - `snr_tilde`, `c_param`: the exact-Q SNR target and the tightest
//!   constant making BER = (xi/c) exp(-beta SNR / 2) hold at that anchor.

use crate::eigen_dist::{inverse_moment_tail, outage_cdf, ChannelDims};
use crate::error::{Error, Result};
use crate::special::inverse_q;

/// Modulation constants of the short-term BER law xi * Q(sqrt(beta * SNR)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Modulation {
    xi: f64,
    beta: f64,
}

impl Modulation {
    pub fn new(xi: f64, beta: f64) -> Result<Self> {
        if xi <= 0.0 || beta <= 0.0 {
            return Err(Error::Domain(format!(
                "modulation constants must be positive, got xi = {xi}, beta = {beta}"
            )));
        }
        Ok(Modulation { xi, beta })
    }

    /// BPSK: xi = 1, beta = 2.
    pub fn bpsk() -> Self {
        Modulation { xi: 1.0, beta: 2.0 }
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// The one-of-three ways a stream's outage threshold may be specified.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutageInput {
    /// Explicit eigenvalue threshold lambda_out > 0.
    ExplicitLambda(f64),
    /// Target individual outage probability in (0, 1); inverted through the
    /// stream's outage CDF.
    TargetOp(f64),
    /// SISO outage exponent upsilon > 0: the threshold of a Rayleigh SISO
    /// reference with outage probability 10^-upsilon, shared across streams.
    SisoExponent(f64),
}

/// Constraints for one data stream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamSpec {
    pub stream_index: u32,
    pub modulation: Modulation,
    pub target_ber: f64,
    pub outage_input: OutageInput,
}

impl StreamSpec {
    pub fn new(
        stream_index: u32,
        modulation: Modulation,
        target_ber: f64,
        outage_input: OutageInput,
    ) -> Result<Self> {
        if stream_index < 1 {
            return Err(Error::Domain("stream indices start at 1".to_string()));
        }
        if !(target_ber > 0.0 && target_ber < 0.5 * modulation.xi()) {
            return Err(Error::Domain(format!(
                "target BER must lie in (0, xi/2) = (0, {:e}), got {target_ber:e}",
                0.5 * modulation.xi()
            )));
        }
        match outage_input {
            OutageInput::ExplicitLambda(l) if l <= 0.0 => {
                return Err(Error::Domain(format!("lambda_out must be > 0, got {l:e}")))
            }
            OutageInput::TargetOp(p) if !(p > 0.0 && p < 1.0) => {
                return Err(Error::Domain(format!(
                    "target outage probability must lie in (0, 1), got {p:e}"
                )))
            }
            OutageInput::SisoExponent(u) if u <= 0.0 => {
                return Err(Error::Domain(format!(
                    "SISO outage exponent must be > 0, got {u:e}"
                )))
            }
            _ => {}
        }
        Ok(StreamSpec {
            stream_index,
            modulation,
            target_ber,
            outage_input,
        })
    }
}

/// Derived per-stream policy constants. Immutable value; see module docs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolicyParams {
    pub lambda_out: f64,
    /// Transmit probability 1 - P_out.
    pub p_transmit: f64,
    pub lambda_mea: f64,
    pub delta: f64,
    pub snr_hat: f64,
    pub snr_tilde: f64,
    pub c_param: f64,
}

/// Outcome of the feasibility condition target_ber <= (xi/2) lambda_out / lambda_mea.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Feasibility {
    pub feasible: bool,
    /// The constrained-BER ceiling (xi/2) * lambda_out / lambda_mea.
    pub ber_ceiling: f64,
}

/// Invert the outage CDF: the threshold lambda with
/// P(lambda_i < lambda) = target_op, by bisection on the monotone CDF
/// bracketed in [1e-12, 1e3].
pub fn solve_lambda_out(dims: ChannelDims, i: u32, target_op: f64) -> Result<f64> {
    if !(target_op > 0.0 && target_op < 1.0) {
        return Err(Error::Domain(format!(
            "target outage probability must lie in (0, 1), got {target_op:e}"
        )));
    }
    let mut lo = 1e-12_f64;
    let mut hi = 1e3_f64;
    let f_lo = outage_cdf(dims, i, lo)?;
    let f_hi = outage_cdf(dims, i, hi)?;
    if !(f_lo <= target_op && target_op <= f_hi) {
        return Err(Error::NoBracket {
            lo,
            hi,
            f_lo,
            f_hi,
        });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= 1e-12 * mid {
            return Ok(mid);
        }
        if outage_cdf(dims, i, mid)? < target_op {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Convergence("lambda_out bisection"))
}

/// Threshold of a SISO Rayleigh reference with outage probability
/// 10^-upsilon: -ln(1 - 10^-upsilon). Decreases to 0 as upsilon grows.
pub fn lambda_out_from_siso_oe(upsilon: f64) -> Result<f64> {
    if upsilon <= 0.0 {
        return Err(Error::Domain(format!(
            "SISO outage exponent must be > 0, got {upsilon:e}"
        )));
    }
    let p = 10f64.powf(-upsilon);
    Ok(-(-p).ln_1p())
}

/// lambda_mea = P_transmit / tail inverse moment; always >= lambda_out.
pub fn compute_lambda_mea(dims: ChannelDims, i: u32, lambda_out: f64) -> Result<f64> {
    if lambda_out <= 0.0 {
        return Err(Error::Domain(format!(
            "lambda_out must be > 0, got {lambda_out:e}"
        )));
    }
    let p_transmit = 1.0 - outage_cdf(dims, i, lambda_out)?;
    if p_transmit < 1e-12 {
        return Err(Error::Degenerate(format!(
            "stream {i} transmits with probability {p_transmit:e} at threshold {lambda_out:e}"
        )));
    }
    Ok(p_transmit / inverse_moment_tail(dims, i, lambda_out)?)
}

/// Feasibility of the target BER against the ceiling
/// (xi/2) * lambda_out / lambda_mea. The boundary is admitted.
pub fn feasibility_check(spec: &StreamSpec, lambda_out: f64, lambda_mea: f64) -> Feasibility {
    let ber_ceiling = 0.5 * spec.modulation.xi() * lambda_out / lambda_mea;
    Feasibility {
        feasible: spec.target_ber <= ber_ceiling,
        ber_ceiling,
    }
}

/// SNR target inverting target_ber = (xi/2) exp(-beta SNR / 2).
pub fn snr_hat_from_ber(target_ber: f64, modulation: Modulation) -> Result<f64> {
    if !(target_ber > 0.0 && target_ber < 0.5 * modulation.xi()) {
        return Err(Error::Domain(format!(
            "target BER must lie in (0, xi/2), got {target_ber:e}"
        )));
    }
    Ok(2.0 / modulation.beta() * (modulation.xi() / (2.0 * target_ber)).ln())
}

/// Exact-Q SNR target and the tightest dynamic-bound constant:
/// snr_tilde solves target_ber = xi * Q(sqrt(beta * SNR)), and
/// c = xi * exp(-beta snr_tilde / 2) / target_ber makes the exponential
/// bound an equality at that anchor. Guarantees snr_tilde <= snr_hat and
/// c >= 2 (the Chernoff bound is never tighter than the dynamic one at its
/// anchor).
pub fn snr_tilde_and_c(target_ber: f64, modulation: Modulation) -> Result<(f64, f64)> {
    if !(target_ber > 0.0 && target_ber <= 0.5 * modulation.xi()) {
        return Err(Error::Domain(format!(
            "target BER must lie in (0, xi/2], got {target_ber:e}"
        )));
    }
    let x = inverse_q(target_ber / modulation.xi())?;
    let snr_tilde = x * x / modulation.beta();
    let c = modulation.xi() * (-0.5 * modulation.beta() * snr_tilde).exp() / target_ber;
    Ok((snr_tilde, c.max(2.0)))
}

/// Resolve the stream's outage threshold from whichever input was given.
pub fn resolve_lambda_out(dims: ChannelDims, spec: &StreamSpec) -> Result<f64> {
    match spec.outage_input {
        OutageInput::ExplicitLambda(l) => Ok(l),
        OutageInput::TargetOp(p) => solve_lambda_out(dims, spec.stream_index, p),
        OutageInput::SisoExponent(u) => lambda_out_from_siso_oe(u),
    }
}

/// Derive the full set of policy constants for one stream.
pub fn derive_params(dims: ChannelDims, spec: &StreamSpec) -> Result<PolicyParams> {
    let m = dims.m();
    if spec.stream_index < 1 || spec.stream_index > m {
        return Err(Error::Domain(format!(
            "stream index {} outside [1, {m}]",
            spec.stream_index
        )));
    }
    let lambda_out = resolve_lambda_out(dims, spec)?;
    let p_transmit = 1.0 - outage_cdf(dims, spec.stream_index, lambda_out)?;
    let lambda_mea = compute_lambda_mea(dims, spec.stream_index, lambda_out)?;
    let snr_hat = snr_hat_from_ber(spec.target_ber, spec.modulation)?;
    let (snr_tilde, c_param) = snr_tilde_and_c(spec.target_ber, spec.modulation)?;
    Ok(PolicyParams {
        lambda_out,
        p_transmit,
        lambda_mea,
        delta: lambda_out / lambda_mea,
        snr_hat,
        snr_tilde,
        c_param,
    })
}

/// Chernoff-bound power rule: 0 in outage, otherwise
/// snr_hat / lambda + (2 / (beta lambda)) ln(lambda delta / lambda_out).
/// Nonnegative whenever the feasibility condition holds.
pub fn power_traditional(lambda: f64, params: &PolicyParams, modulation: Modulation) -> f64 {
    if lambda <= params.lambda_out {
        return 0.0;
    }
    params.snr_hat / lambda
        + 2.0 / (modulation.beta() * lambda) * (lambda * params.delta / params.lambda_out).ln()
}

/// Dynamic-bound power rule: identical to [`power_traditional`] on
/// (lambda_out, lambda_mea], and above lambda_mea the cheaper target
/// snr_tilde replaces snr_hat. Pointwise never above the traditional rule.
pub fn power_dynamic(lambda: f64, params: &PolicyParams, modulation: Modulation) -> f64 {
    if lambda <= params.lambda_out {
        return 0.0;
    }
    let snr = if lambda > params.lambda_mea {
        params.snr_tilde
    } else {
        params.snr_hat
    };
    snr / lambda
        + 2.0 / (modulation.beta() * lambda) * (lambda * params.delta / params.lambda_out).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dims(n_t: u32, n_r: u32) -> ChannelDims {
        ChannelDims::new(n_t, n_r).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    #[test]
    fn siso_lambda_out_closed_form() {
        // Rayleigh SISO: P(lambda < l) = 1 - exp(-l), so the threshold for
        // outage probability 0.1 is -ln(0.9).
        let l = solve_lambda_out(dims(1, 1), 1, 0.1).unwrap();
        assert!(rel(l, 0.105_360_515_657_826_3) < 1e-10, "got {l}");
        let l = solve_lambda_out(dims(1, 1), 1, 10f64.powf(-0.4)).unwrap();
        assert!(rel(l, 0.507_675_873_696_742_2) < 1e-10, "got {l}");
    }

    #[test]
    fn lambda_out_roundtrip() {
        let d = dims(3, 6);
        for &(i, p) in &[(1u32, 1e-4), (2, 1e-3), (3, 0.05), (3, 0.6)] {
            let l = solve_lambda_out(d, i, p).unwrap();
            let back = outage_cdf(d, i, l).unwrap();
            assert!(rel(back, p) < 1e-10, "i = {i}, p = {p}: back = {back}");
        }
    }

    #[test]
    fn lambda_out_bad_inputs() {
        assert!(matches!(
            solve_lambda_out(dims(1, 1), 1, 0.0),
            Err(Error::Domain(_))
        ));
        assert!(matches!(
            solve_lambda_out(dims(1, 1), 1, 1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn siso_oe_thresholds() {
        let l = lambda_out_from_siso_oe(1.0).unwrap();
        assert!(rel(l, 0.105_360_515_657_826_3) < 1e-12);
        let l = lambda_out_from_siso_oe(1.8).unwrap();
        assert!((l - 0.015_976).abs() < 5e-7, "got {l}");
        // Monotone decrease to zero.
        let mut prev = f64::INFINITY;
        for j in 1..=30 {
            let u = 0.25 * j as f64;
            let l = lambda_out_from_siso_oe(u).unwrap();
            assert!(l < prev && l > 0.0);
            prev = l;
        }
        assert!(lambda_out_from_siso_oe(0.0).is_err());
    }

    #[test]
    fn lambda_mea_siso_value() {
        // exp(-1) / E1(1), both factors independently cross-checked by
        // quadrature in the oracle suite.
        let v = compute_lambda_mea(dims(1, 1), 1, 1.0).unwrap();
        assert!(rel(v, 1.676_875_028_178_7) < 1e-10, "got {v}");
    }

    #[test]
    fn lambda_mea_dominates_threshold() {
        for (d, i) in [(dims(1, 1), 1u32), (dims(3, 6), 1), (dims(3, 6), 3), (dims(2, 4), 2)] {
            for &l in &[0.05, 0.3, 1.0, 3.0] {
                let v = compute_lambda_mea(d, i, l).unwrap();
                assert!(v >= l, "({:?}, {i}, {l}): {v}", d);
            }
        }
    }

    #[test]
    fn lambda_mea_degenerate_stream() {
        // Threshold far above the support mass: transmit probability ~ 0.
        let err = compute_lambda_mea(dims(1, 1), 1, 40.0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn feasibility_boundary_admitted() {
        let spec = StreamSpec::new(1, Modulation::bpsk(), 0.05, OutageInput::SisoExponent(1.0))
            .unwrap();
        // ceiling = 0.5 * lambda_out/lambda_mea = 0.05 when delta = 0.1
        let f = feasibility_check(&spec, 0.1, 1.0);
        assert!((f.ber_ceiling - 0.05).abs() < 1e-15);
        assert!(f.feasible, "boundary must be admitted");
        let f = feasibility_check(&spec, 0.1, 1.01);
        assert!(!f.feasible);
    }

    #[test]
    fn feasibility_direct_comparison() {
        // target 0.9 * xi/2 with delta < 0.9 is infeasible.
        let spec = StreamSpec::new(1, Modulation::bpsk(), 0.45, OutageInput::SisoExponent(1.0))
            .unwrap();
        let f = feasibility_check(&spec, 0.8, 1.0);
        assert!(!f.feasible);
    }

    #[test]
    fn snr_hat_examples() {
        let m = Modulation::bpsk();
        // Self-inverting point: ber = (xi/2) e^{-beta/2} maps to SNR 1.
        let ber = 0.5 * (-1.0f64).exp();
        assert!(rel(snr_hat_from_ber(ber, m).unwrap(), 1.0) < 1e-14);
        assert!(rel(snr_hat_from_ber(1e-6, m).unwrap(), 13.122_363_377_404_3) < 1e-12);
        // Monotone: tighter BER, larger target.
        assert!(snr_hat_from_ber(1e-8, m).unwrap() > snr_hat_from_ber(1e-4, m).unwrap());
        assert!(snr_hat_from_ber(0.5, m).is_err());
    }

    #[test]
    fn snr_tilde_and_c_table_anchors() {
        let m = Modulation::bpsk();
        let (s, c) = snr_tilde_and_c(1e-3, m).unwrap();
        assert!((10.0 * s.log10() - 6.8).abs() < 0.1, "snr {s}");
        assert!((c - 8.4).abs() < 0.3, "c {c}");
        let (s, c) = snr_tilde_and_c(1e-6, m).unwrap();
        assert!((10.0 * s.log10() - 10.5).abs() < 0.1, "snr {s}");
        assert!((c - 12.4).abs() < 0.3, "c {c}");
        // Boundary: ber = xi/2.
        let (s, c) = snr_tilde_and_c(0.5, m).unwrap();
        assert_eq!(s, 0.0);
        assert_eq!(c, 2.0);
        assert!(snr_tilde_and_c(0.6, m).is_err());
    }

    #[test]
    fn snr_tilde_below_snr_hat_and_c_at_least_two() {
        let m = Modulation::bpsk();
        for j in 1..=16 {
            let ber = 10f64.powf(-0.5 * j as f64);
            let hat = snr_hat_from_ber(ber, m).unwrap();
            let (tilde, c) = snr_tilde_and_c(ber, m).unwrap();
            assert!(tilde <= hat, "ber {ber:e}");
            assert!(c >= 2.0, "ber {ber:e}");
        }
    }

    #[test]
    fn power_traditional_branches() {
        let m = Modulation::bpsk();
        let params = PolicyParams {
            lambda_out: 0.105_36,
            p_transmit: 0.9,
            lambda_mea: 0.3512,
            delta: 0.3,
            snr_hat: 13.122_363_377_404_3,
            snr_tilde: 11.297_521_325_022_46,
            c_param: 12.4,
        };
        assert_eq!(power_traditional(0.05, &params, m), 0.0);
        assert_eq!(power_traditional(params.lambda_out, &params, m), 0.0);
        // At lambda_mea the log term vanishes.
        let p = power_traditional(params.lambda_mea, &params, m);
        assert!(rel(p, params.snr_hat / params.lambda_mea) < 1e-12);
        // Worked value at lambda = 1.
        let p = power_traditional(1.0, &params, m);
        assert!((p - 14.168).abs() < 1e-3, "got {p}");
        // Back-substitution: (xi/2) e^{-beta p lambda / 2} = ber * lambda_out / (lambda delta).
        let ber = 1e-6;
        for &lam in &[0.2, 0.5, 1.0, 4.0] {
            let p = power_traditional(lam, &params, m);
            let lhs = 0.5 * m.xi() * (-0.5 * m.beta() * p * lam).exp();
            let rhs = ber * params.lambda_out / (lam * params.delta);
            assert!(rel(lhs, rhs) < 1e-10, "lambda = {lam}");
        }
    }

    #[test]
    fn power_dynamic_branches() {
        let m = Modulation::bpsk();
        let params = PolicyParams {
            lambda_out: 0.105_36,
            p_transmit: 0.9,
            lambda_mea: 0.3512,
            delta: 0.3,
            snr_hat: 13.122_363_377_404_3,
            snr_tilde: 11.297_521_325_022_46,
            c_param: 12.4,
        };
        assert_eq!(power_dynamic(0.05, &params, m), 0.0);
        // Shared middle branch.
        let lam = 0.2;
        assert_eq!(
            power_dynamic(lam, &params, m),
            power_traditional(lam, &params, m)
        );
        // Above lambda_mea the saving is exactly (snr_hat - snr_tilde)/lambda.
        let lam = 2.0 * params.lambda_mea;
        let gap = power_traditional(lam, &params, m) - power_dynamic(lam, &params, m);
        assert!(rel(gap, (params.snr_hat - params.snr_tilde) / lam) < 1e-10);
        // Never above the traditional rule.
        for j in 0..=100 {
            let lam = 0.05 * j as f64 + 0.01;
            assert!(
                power_dynamic(lam, &params, m) <= power_traditional(lam, &params, m) + 1e-15
            );
        }
    }

    #[test]
    fn derive_params_full_pipeline() {
        let d = dims(3, 6);
        let spec = StreamSpec::new(3, Modulation::bpsk(), 1e-6, OutageInput::SisoExponent(1.0))
            .unwrap();
        let p = derive_params(d, &spec).unwrap();
        assert!(rel(p.lambda_out, 0.105_360_515_657_826_3) < 1e-12);
        assert!(p.lambda_mea >= p.lambda_out);
        assert!(p.delta > 0.0 && p.delta <= 1.0);
        assert!((p.delta - p.lambda_out / p.lambda_mea).abs() < 1e-15);
        assert!(p.snr_tilde <= p.snr_hat);
        assert!(p.c_param >= 2.0);
        let f = feasibility_check(&spec, p.lambda_out, p.lambda_mea);
        assert!(f.feasible, "OE 1 with BER 1e-6 is comfortably feasible");
    }

    #[test]
    fn stream_spec_validation() {
        let m = Modulation::bpsk();
        assert!(StreamSpec::new(0, m, 1e-3, OutageInput::SisoExponent(1.0)).is_err());
        assert!(StreamSpec::new(1, m, 0.5, OutageInput::SisoExponent(1.0)).is_err());
        assert!(StreamSpec::new(1, m, 1e-3, OutageInput::ExplicitLambda(0.0)).is_err());
        assert!(StreamSpec::new(1, m, 1e-3, OutageInput::TargetOp(1.0)).is_err());
        assert!(Modulation::new(0.0, 2.0).is_err());
    }
}
