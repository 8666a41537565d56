//! Independent stochastic oracle: samples i.i.d. Rayleigh MIMO channels,
//! extracts ordered Gram-matrix eigenvalues, applies the power policies per
//! realization, and estimates outage, ATP, and constrained average BER with
//! standard errors.
//!
//! Reproducibility contract: draws come from ChaCha8 keyed by the
//! configuration seed with one dedicated stream per sample (the stream id is
//! chunk_index * chunk_size + index-within-chunk), so estimates are
//! bit-identical for a fixed [`SimConfig`] regardless of how chunks are
//! scheduled across threads. Chunk partials are reduced sequentially in
//! chunk order. The generator choice is part of the output contract and is
//! fixed per release.

use crate::eigen_dist::ChannelDims;
use crate::error::{Error, Result};
use crate::policy::{
    derive_params, feasibility_check, power_dynamic, power_traditional, PolicyParams, StreamSpec,
};
use crate::special::gaussian_q;
use nalgebra::{Complex, DMatrix};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

/// Which power-allocation rule the simulator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PolicyKind {
    /// Chernoff-bound rule.
    Traditional,
    /// Dynamic-bound rule (cheaper SNR target above lambda_mea).
    Dynamic,
}

/// Full simulation configuration. `chunk_size` fixes the work partition and
/// is part of the determinism contract.
#[derive(Debug, Clone)]
pub struct SimConfig {
    pub dims: ChannelDims,
    pub specs: Vec<StreamSpec>,
    pub policy: PolicyKind,
    pub samples: u64,
    pub seed: u64,
    pub chunk_size: u64,
}

impl SimConfig {
    pub fn new(
        dims: ChannelDims,
        specs: Vec<StreamSpec>,
        policy: PolicyKind,
        samples: u64,
        seed: u64,
        chunk_size: u64,
    ) -> Result<Self> {
        if samples < 1 {
            return Err(Error::Domain("samples must be >= 1".to_string()));
        }
        if chunk_size < 1 || chunk_size > samples {
            return Err(Error::Domain(format!(
                "chunk_size must lie in [1, samples], got {chunk_size}"
            )));
        }
        if specs.is_empty() {
            return Err(Error::Domain("at least one stream spec required".to_string()));
        }
        for s in &specs {
            if s.stream_index < 1 || s.stream_index > dims.m() {
                return Err(Error::Domain(format!(
                    "stream index {} outside [1, {}]",
                    s.stream_index,
                    dims.m()
                )));
            }
        }
        Ok(SimConfig {
            dims,
            specs,
            policy,
            samples,
            seed,
            chunk_size,
        })
    }
}

/// Monte Carlo estimate with its standard error (sample std / sqrt(count)).
/// `count` is the number of realizations that contributed to the mean; a
/// single contribution has standard error 0 by convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub count: u64,
}

/// One sampled channel: the gain matrix and the descending eigenvalues of
/// its Gram matrix (squared singular values; the policies consume these
/// only).
#[derive(Debug, Clone)]
pub struct ChannelRealization {
    /// n_r x n_t complex gains with unit mean-square magnitude per entry.
    pub matrix: DMatrix<Complex<f64>>,
    /// Eigenvalues of the m x m Gram matrix, sorted descending.
    pub eigenvalues: Vec<f64>,
}

/// Per-stream estimates from a policy run.
#[derive(Debug, Clone, Copy)]
pub struct StreamMetrics {
    /// Mean allocated power over all realizations (outage zeros included).
    pub atp: McEstimate,
    /// Conditional average of xi Q(sqrt(beta p lambda)) over transmitting
    /// realizations.
    pub cond_ber: McEstimate,
    /// Same conditional average with the policy's own exponential bound in
    /// place of Q; its expectation equals the target BER exactly.
    pub bound_ber: McEstimate,
    /// Fraction of realizations with lambda_i above the threshold.
    pub transmit_freq: McEstimate,
}

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

/// RNG for one sample: ChaCha8 keyed by the run seed, one stream per sample.
fn sample_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

/// Draw one channel: entries have independent real and imaginary parts
/// Normal(0, 1/2) so E|h|^2 = 1; eigenvalues come from the m x m Gram
/// matrix via a self-adjoint eigen-solver (retried once with a diagonal
/// jitter on non-convergence), sorted descending.
pub fn sample_realization<R: Rng + ?Sized>(
    dims: ChannelDims,
    rng: &mut R,
) -> Result<ChannelRealization> {
    let comp_std = 0.5f64.sqrt();
    let n_r = dims.n_r() as usize;
    let n_t = dims.n_t() as usize;
    let matrix = DMatrix::from_fn(n_r, n_t, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        Complex::new(re * comp_std, im * comp_std)
    });
    let omega = if n_t <= n_r {
        matrix.adjoint() * &matrix
    } else {
        &matrix * matrix.adjoint()
    };

    let eigenvalues = match hermitian_eigenvalues(&omega) {
        Some(ev) => ev,
        None => {
            // Retry once with a tiny diagonal jitter.
            let m = omega.nrows();
            let jitter = DMatrix::from_diagonal_element(m, m, Complex::new(1e-12, 0.0));
            hermitian_eigenvalues(&(omega + jitter))
                .ok_or(Error::Convergence("hermitian eigen-solver"))?
        }
    };

    let mut eigenvalues: Vec<f64> = eigenvalues.into_iter().map(|v| v.max(0.0)).collect();
    eigenvalues.sort_by(|a, b| b.total_cmp(a));
    Ok(ChannelRealization {
        matrix,
        eigenvalues,
    })
}

fn hermitian_eigenvalues(omega: &DMatrix<Complex<f64>>) -> Option<Vec<f64>> {
    omega
        .clone()
        .try_symmetric_eigen(f64::EPSILON, 1000)
        .map(|e| e.eigenvalues.iter().cloned().collect())
}

// ---------------------------------------------------------------------------
// Accumulation
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Default)]
struct Accum {
    count: u64,
    sum: f64,
    sumsq: f64,
}

impl Accum {
    fn add(&mut self, x: f64) {
        self.count += 1;
        self.sum += x;
        self.sumsq += x * x;
    }

    fn merge(&mut self, other: &Accum) {
        self.count += other.count;
        self.sum += other.sum;
        self.sumsq += other.sumsq;
    }

    fn estimate(&self) -> McEstimate {
        if self.count == 0 {
            return McEstimate {
                mean: 0.0,
                std_error: 0.0,
                count: 0,
            };
        }
        let n = self.count as f64;
        let mean = self.sum / n;
        let std_error = if self.count > 1 {
            let var = ((self.sumsq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        McEstimate {
            mean,
            std_error,
            count: self.count,
        }
    }
}

/// Run the fixed chunk partition in parallel and fold the per-chunk states
/// in chunk-index order.
fn run_chunks<A, F>(cfg: &SimConfig, chunk_body: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(std::ops::Range<u64>) -> Result<A> + Sync,
{
    let n_chunks = cfg.samples.div_ceil(cfg.chunk_size);
    (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * cfg.chunk_size;
            let end = (start + cfg.chunk_size).min(cfg.samples);
            chunk_body(start..end)
        })
        .collect()
}

/// Per-stream outage frequency: the fraction of realizations with
/// lambda_i below the stream's resolved threshold.
pub fn estimate_outage(cfg: &SimConfig) -> Result<Vec<McEstimate>> {
    let thresholds: Vec<(u32, f64)> = cfg
        .specs
        .iter()
        .map(|s| Ok((s.stream_index, crate::policy::resolve_lambda_out(cfg.dims, s)?)))
        .collect::<Result<_>>()?;

    let partials = run_chunks(cfg, |range| {
        let mut accums = vec![Accum::default(); thresholds.len()];
        for idx in range {
            let mut rng = sample_rng(cfg.seed, idx);
            let real = sample_realization(cfg.dims, &mut rng)?;
            for (acc, &(i, lam)) in accums.iter_mut().zip(&thresholds) {
                let ev = real.eigenvalues[(i - 1) as usize];
                acc.add(if ev < lam { 1.0 } else { 0.0 });
            }
        }
        Ok(accums)
    })?;

    let mut totals = vec![Accum::default(); thresholds.len()];
    for chunk in &partials {
        for (t, c) in totals.iter_mut().zip(chunk) {
            t.merge(c);
        }
    }
    Ok(totals.iter().map(Accum::estimate).collect())
}

struct StreamAccum {
    atp: Accum,
    cond_ber: Accum,
    bound_ber: Accum,
    transmit: Accum,
}

impl StreamAccum {
    fn new() -> Self {
        StreamAccum {
            atp: Accum::default(),
            cond_ber: Accum::default(),
            bound_ber: Accum::default(),
            transmit: Accum::default(),
        }
    }
}

/// Apply the configured policy per realization and estimate, per stream:
/// mean power (zeros included), the conditional average BER via the exact
/// conditional law xi Q(sqrt(beta p lambda)) (semi-analytic estimator), the
/// same with the policy's exponential bound, and the transmit frequency.
pub fn estimate_stream_metrics(cfg: &SimConfig) -> Result<Vec<StreamMetrics>> {
    let resolved: Vec<(StreamSpec, PolicyParams)> = cfg
        .specs
        .iter()
        .map(|s| {
            let params = derive_params(cfg.dims, s)?;
            let feas = feasibility_check(s, params.lambda_out, params.lambda_mea);
            if !feas.feasible {
                return Err(Error::Infeasible {
                    target_ber: s.target_ber,
                    ceiling: feas.ber_ceiling,
                });
            }
            Ok((*s, params))
        })
        .collect::<Result<_>>()?;

    let partials = run_chunks(cfg, |range| {
        let mut accums: Vec<StreamAccum> = resolved.iter().map(|_| StreamAccum::new()).collect();
        for idx in range {
            let mut rng = sample_rng(cfg.seed, idx);
            let real = sample_realization(cfg.dims, &mut rng)?;
            for (acc, (spec, params)) in accums.iter_mut().zip(&resolved) {
                let lam = real.eigenvalues[(spec.stream_index - 1) as usize];
                let p = match cfg.policy {
                    PolicyKind::Traditional => power_traditional(lam, params, spec.modulation),
                    PolicyKind::Dynamic => power_dynamic(lam, params, spec.modulation),
                };
                acc.atp.add(p);
                let transmitting = lam > params.lambda_out;
                acc.transmit.add(if transmitting { 1.0 } else { 0.0 });
                if transmitting {
                    let xi = spec.modulation.xi();
                    let beta = spec.modulation.beta();
                    acc.cond_ber.add(xi * gaussian_q((beta * p * lam).sqrt()));
                    let bound_scale = match cfg.policy {
                        PolicyKind::Dynamic if lam > params.lambda_mea => xi / params.c_param,
                        _ => xi / 2.0,
                    };
                    acc.bound_ber.add(bound_scale * (-0.5 * beta * p * lam).exp());
                }
            }
        }
        Ok(accums)
    })?;

    let mut totals: Vec<StreamAccum> = resolved.iter().map(|_| StreamAccum::new()).collect();
    for chunk in &partials {
        for (t, c) in totals.iter_mut().zip(chunk) {
            t.atp.merge(&c.atp);
            t.cond_ber.merge(&c.cond_ber);
            t.bound_ber.merge(&c.bound_ber);
            t.transmit.merge(&c.transmit);
        }
    }
    Ok(totals
        .iter()
        .map(|t| StreamMetrics {
            atp: t.atp.estimate(),
            cond_ber: t.cond_ber.estimate(),
            bound_ber: t.bound_ber.estimate(),
            transmit_freq: t.transmit.estimate(),
        })
        .collect())
}
