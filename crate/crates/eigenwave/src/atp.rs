//! Closed-form average transmit power, individual and global outage.
//!
//! The per-stream ATP splits into an SNR-proportional part rho_s and an
//! SNR-independent logarithmic part rho_delta. The Chernoff-bound policy
//! costs rho_s(snr_hat, lambda_out) + rho_delta; the dynamic-bound policy
//! saves exactly rho_s(snr_hat - snr_tilde, lambda_mea) on top of it.

use crate::eigen_dist::{
    inverse_moment_tail, log_tail_integral, ordered_eigen_pdf, outage_cdf, ChannelDims,
};
use crate::error::{Error, Result};
use crate::policy::{feasibility_check, PolicyParams, StreamSpec};
use crate::quad;

/// Component breakdown of a stream's average transmit power.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtpBreakdown {
    /// rho_s(snr_hat, lambda_out): SNR-target part.
    pub rho_s_hat: f64,
    /// rho_delta(lambda_out): log-term part (sign not fixed).
    pub rho_delta: f64,
    /// rho_s(snr_hat - snr_tilde, lambda_mea); zero for the Chernoff policy.
    pub rho_saving: f64,
    /// rho_s_hat + rho_delta - rho_saving.
    pub total: f64,
}

/// rho_s(snr, lambda_lo) = snr * int_{lambda_lo}^inf x^-1 f_i(x) dx;
/// exactly linear in the SNR target.
pub fn rho_s(dims: ChannelDims, i: u32, snr: f64, lambda_lo: f64) -> Result<f64> {
    if snr < 0.0 {
        return Err(Error::Domain(format!("rho_s requires snr >= 0, got {snr:e}")));
    }
    Ok(snr * inverse_moment_tail(dims, i, lambda_lo)?)
}

/// rho_delta(lambda_out) = (2/beta) int_{lambda_out}^inf x^-1
/// ln(x delta / lambda_out) f_i(x) dx, independent of any SNR target.
///
/// Square arrays (theta = 0) put exponent-zero terms in the expansion where
/// the analytic kernel is undefined; those fall back to adaptive quadrature
/// of the defining integral at 1e-9 relative accuracy.
pub fn rho_delta(dims: ChannelDims, i: u32, lambda_out: f64, delta: f64, beta: f64) -> Result<f64> {
    if beta <= 0.0 {
        return Err(Error::Domain(format!("beta must be > 0, got {beta:e}")));
    }
    match log_tail_integral(dims, i, lambda_out, delta) {
        Ok(v) => Ok(2.0 / beta * v),
        Err(Error::AnalyticFormUnavailable) => {
            let f = |x: f64| {
                let pdf = ordered_eigen_pdf(dims, i, x).unwrap_or(0.0);
                if pdf == 0.0 {
                    0.0
                } else {
                    2.0 / (beta * x) * (x * delta / lambda_out).ln() * pdf
                }
            };
            quad::integrate_to_inf(f, lambda_out, 1e-9, 0.0)
        }
        Err(e) => Err(e),
    }
}

/// Average transmit power of the Chernoff-bound policy:
/// rho_s(snr_hat, lambda_out) + rho_delta(lambda_out). Requires the
/// feasibility condition; infeasible specs are rejected with the ceiling in
/// the error.
pub fn atp_traditional(
    dims: ChannelDims,
    spec: &StreamSpec,
    params: &PolicyParams,
) -> Result<AtpBreakdown> {
    let feas = feasibility_check(spec, params.lambda_out, params.lambda_mea);
    if !feas.feasible {
        return Err(Error::Infeasible {
            target_ber: spec.target_ber,
            ceiling: feas.ber_ceiling,
        });
    }
    let i = spec.stream_index;
    let rho_s_hat = rho_s(dims, i, params.snr_hat, params.lambda_out)?;
    let rho_d = rho_delta(
        dims,
        i,
        params.lambda_out,
        params.delta,
        spec.modulation.beta(),
    )?;
    Ok(AtpBreakdown {
        rho_s_hat,
        rho_delta: rho_d,
        rho_saving: 0.0,
        total: rho_s_hat + rho_d,
    })
}

/// Average transmit power of the dynamic-bound policy: the traditional
/// total minus rho_s(snr_hat - snr_tilde, lambda_mea).
pub fn atp_dynamic(
    dims: ChannelDims,
    spec: &StreamSpec,
    params: &PolicyParams,
) -> Result<AtpBreakdown> {
    let base = atp_traditional(dims, spec, params)?;
    let saving = rho_s(
        dims,
        spec.stream_index,
        params.snr_hat - params.snr_tilde,
        params.lambda_mea,
    )?;
    Ok(AtpBreakdown {
        rho_s_hat: base.rho_s_hat,
        rho_delta: base.rho_delta,
        rho_saving: saving,
        total: base.total - saving,
    })
}

/// Individual outage probability of stream i at its threshold; alias of the
/// eigenvalue CDF, exposed here for report symmetry.
pub fn individual_op(dims: ChannelDims, i: u32, lambda_out: f64) -> Result<f64> {
    outage_cdf(dims, i, lambda_out)
}

/// Global (whole-system) outage: all streams simultaneously below their
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlobalOutage {
    /// Upper bound P(lambda_1 < max threshold); all eigenvalues below their
    /// thresholds forces the largest below the largest threshold.
    pub bound: f64,
    /// Exact value when all thresholds are equal: ordering makes
    /// {lambda_1 < lambda} identical to {all below lambda}.
    pub exact_if_equal: Option<f64>,
}

/// Global outage probability for per-stream thresholds (length m, all > 0).
pub fn global_op(dims: ChannelDims, lambda_out_per_stream: &[f64]) -> Result<GlobalOutage> {
    let m = dims.m() as usize;
    if lambda_out_per_stream.len() != m {
        return Err(Error::Domain(format!(
            "expected {m} thresholds, got {}",
            lambda_out_per_stream.len()
        )));
    }
    if lambda_out_per_stream.iter().any(|&l| l <= 0.0) {
        return Err(Error::Domain("thresholds must be > 0".to_string()));
    }
    let max_thr = lambda_out_per_stream
        .iter()
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let bound = outage_cdf(dims, 1, max_thr)?;
    let all_equal = lambda_out_per_stream
        .iter()
        .all(|&l| l == lambda_out_per_stream[0]);
    let exact_if_equal = if all_equal { Some(bound) } else { None };
    Ok(GlobalOutage {
        bound,
        exact_if_equal,
    })
}
