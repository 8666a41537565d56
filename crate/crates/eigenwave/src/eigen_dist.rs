//! Ordered-eigenvalue statistics of complex central Wishart matrices.
//!
//! The Gram matrix of an i.i.d. Rayleigh channel is Wishart distributed, and
//! the density of the smallest eigenvalue in a k-subset of its m eigenvalues
//! expands into a finite sum of monomials coeff * x^N * exp(-k x). That
//! expansion is materialized once per (dims, k) into a [`TermList`]; the
//! marginal pdf, the outage CDF, and the two tail integrals needed by the
//! power closed forms are then one-line kernel transforms of the same list.

use crate::error::{Error, Result};
use crate::special::{
    factorial, jmath_shifted, lower_inc_gamma_int, upper_inc_gamma_int, KahanSum,
};
use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

/// Largest minimum antenna count accepted by the expansion. The enumeration
/// is (m!)^2 times a product of per-index ranges and becomes unreasonable
/// beyond this.
pub const MAX_MIN_ANTENNAS: u32 = 6;

/// Largest factorial available as an f64.
const MAX_FACTORIAL_ARG: u32 = 170;

/// Antenna configuration. `m = min(n_t, n_r)` and `n = max(n_t, n_r)` are
/// derived, never set independently; `theta = n - m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ChannelDims {
    n_t: u32,
    n_r: u32,
}

impl ChannelDims {
    pub fn new(n_t: u32, n_r: u32) -> Result<Self> {
        if n_t < 1 || n_r < 1 {
            return Err(Error::Domain(format!(
                "antenna counts must be >= 1, got n_t = {n_t}, n_r = {n_r}"
            )));
        }
        Ok(ChannelDims { n_t, n_r })
    }

    pub fn n_t(&self) -> u32 {
        self.n_t
    }

    pub fn n_r(&self) -> u32 {
        self.n_r
    }

    /// min(n_t, n_r): the number of eigenvalues / spatial streams.
    pub fn m(&self) -> u32 {
        self.n_t.min(self.n_r)
    }

    /// max(n_t, n_r).
    pub fn n(&self) -> u32 {
        self.n_t.max(self.n_r)
    }

    /// n - m.
    pub fn theta(&self) -> u32 {
        self.n() - self.m()
    }
}

/// One monomial coeff * x^exponent * exp(-rate * x) of a subset-minimum
/// density, with the full scalar prefactor folded into `coeff`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionTerm {
    pub coeff: f64,
    pub exponent: u32,
    pub rate: u32,
}

impl ExpansionTerm {
    /// coeff * x^N * exp(-rate x), evaluated through a single exponential so
    /// huge x never produces inf * 0.
    fn eval(&self, x: f64) -> f64 {
        if x == 0.0 {
            return if self.exponent == 0 { self.coeff } else { 0.0 };
        }
        let ln_mag = self.exponent as f64 * x.ln() - self.rate as f64 * x;
        if ln_mag < -745.0 {
            0.0
        } else {
            self.coeff * ln_mag.exp()
        }
    }
}

/// Canonical expansion of the density of the smallest eigenvalue in a
/// k-subset: f_min:k(x) = sum of coeff * x^N * exp(-k x), terms merged by
/// exponent. Immutable after construction and shared through a global cache.
#[derive(Debug, Clone)]
pub struct TermList {
    dims: ChannelDims,
    k: u32,
    terms: Vec<ExpansionTerm>,
    condition: f64,
}

impl TermList {
    pub fn dims(&self) -> ChannelDims {
        self.dims
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn terms(&self) -> &[ExpansionTerm] {
        &self.terms
    }

    /// sum |coeff| N! / k^(N+1): magnitude of the alternating mass before
    /// cancellation. The expansion is exactly normalized, so this is also
    /// the amplification factor of per-term roundoff; values above ~1e6
    /// deserve suspicion.
    pub fn condition_number(&self) -> f64 {
        self.condition
    }

    /// Evaluate the density at x >= 0.
    pub fn density(&self, x: f64) -> f64 {
        let mut acc = KahanSum::new();
        for t in &self.terms {
            acc.add(t.eval(x));
        }
        acc.value()
    }
}

fn binom(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut v = 1.0f64;
    for j in 0..k {
        v = v * (n - j) as f64 / (j + 1) as f64;
    }
    v.round()
}

/// All permutations of 1..=m with their signs (parity by inversion count).
fn signed_permutations(m: u32) -> Vec<(Vec<u32>, f64)> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(m as usize);
    let mut used = vec![false; m as usize + 1];
    permute_rec(m, &mut current, &mut used, &mut out);
    out
}

fn permute_rec(m: u32, current: &mut Vec<u32>, used: &mut [bool], out: &mut Vec<(Vec<u32>, f64)>) {
    if current.len() == m as usize {
        let inversions = current
            .iter()
            .enumerate()
            .flat_map(|(i, &a)| current[i + 1..].iter().map(move |&b| (a > b) as u32))
            .sum::<u32>();
        let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
        out.push((current.clone(), sign));
        return;
    }
    for v in 1..=m {
        if !used[v as usize] {
            used[v as usize] = true;
            current.push(v);
            permute_rec(m, current, used, out);
            current.pop();
            used[v as usize] = false;
        }
    }
}

static CACHE: LazyLock<Mutex<HashMap<(ChannelDims, u32), Arc<TermList>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Build (or fetch from the populate-once cache) the expansion of f_min:k
/// for the given dims, 1 <= k <= m.
///
/// Enumerates all permutation pairs (alpha, mu) of 1..=m with their signs;
/// the inner multi-index sum over tau collapses into a polynomial
/// convolution over the accumulated exponent. Like terms are merged with
/// compensated accumulation, and the result is checked against the exact
/// normalization sum coeff * N! / k^(N+1) = 1.
pub fn build_min_subset_density(dims: ChannelDims, k: u32) -> Result<Arc<TermList>> {
    let m = dims.m();
    if m > MAX_MIN_ANTENNAS {
        return Err(Error::ConfigTooLarge(format!(
            "expansion refused for m = {m} > {MAX_MIN_ANTENNAS}"
        )));
    }
    if k < 1 || k > m {
        return Err(Error::Domain(format!(
            "subset size k = {k} outside [1, {m}]"
        )));
    }
    // Largest exponent is theta + 2m - 2 + sum of full tau ranges; the CDF
    // kernel needs (N+1)!.
    let theta = dims.theta();
    let max_exponent = m * theta + m * (m - 1);
    if max_exponent + 1 > MAX_FACTORIAL_ARG || dims.n() - 1 > MAX_FACTORIAL_ARG {
        return Err(Error::ConfigTooLarge(format!(
            "expansion for n_t = {}, n_r = {} needs factorials beyond {MAX_FACTORIAL_ARG}!",
            dims.n_t, dims.n_r
        )));
    }

    let key = (dims, k);
    let mut cache = CACHE.lock().expect("term list cache poisoned");
    if let Some(tl) = cache.get(&key) {
        return Ok(Arc::clone(tl));
    }

    // C = 1 / (prod (m-j)! * prod (n-j)!), j = 1..m
    let mut c_const = 1.0f64;
    for j in 1..=m {
        c_const /= factorial(m - j) * factorial(dims.n() - j);
    }
    let prefactor = k as f64 * c_const / factorial(m);

    let perms = signed_permutations(m);
    let ku = k as usize;
    // exponent -> compensated coefficient
    let mut coeffs: Vec<KahanSum> = vec![KahanSum::new(); (max_exponent + 1) as usize];

    let mut poly: Vec<f64> = Vec::new();
    let mut next: Vec<f64> = Vec::new();
    for (alpha, s_alpha) in &perms {
        for (mu, s_mu) in &perms {
            // d[i] = theta + alpha[i] + mu[i] - 2 (0-based index i)
            let d: Vec<u32> = alpha
                .iter()
                .zip(mu.iter())
                .map(|(&a, &b)| theta + a + b - 2)
                .collect();
            let a_k: f64 = d[ku..].iter().map(|&di| factorial(di)).product();
            let scale = prefactor * s_alpha * s_mu * a_k;

            // Generating polynomial of the tau sum: product over i < k-1 of
            // sum_{t=0..d_i} (d_i!/t!) x^t, coefficients indexed by sum tau.
            poly.clear();
            poly.push(1.0);
            for &di in &d[..ku - 1] {
                let dif = factorial(di);
                next.clear();
                next.resize(poly.len() + di as usize, 0.0);
                for (e, &pc) in poly.iter().enumerate() {
                    if pc == 0.0 {
                        continue;
                    }
                    for t in 0..=di {
                        next[e + t as usize] += pc * dif / factorial(t);
                    }
                }
                std::mem::swap(&mut poly, &mut next);
            }

            let base = d[ku - 1];
            for (e, &pc) in poly.iter().enumerate() {
                if pc != 0.0 {
                    coeffs[base as usize + e].add(scale * pc);
                }
            }
        }
    }

    let mut terms = Vec::new();
    let mut norm = KahanSum::new();
    let mut condition = 0.0f64;
    let kf = k as f64;
    for (n, acc) in coeffs.iter().enumerate() {
        let coeff = acc.value();
        if coeff == 0.0 {
            continue;
        }
        let n = n as u32;
        terms.push(ExpansionTerm {
            coeff,
            exponent: n,
            rate: k,
        });
        let mass = coeff * factorial(n) / kf.powi(n as i32 + 1);
        norm.add(mass);
        condition += mass.abs();
    }

    if (norm.value() - 1.0).abs() > 1e-9 {
        return Err(Error::NumericConsistency(format!(
            "f_min:{k} expansion for ({}, {}) normalizes to {:.12e} (condition number {:.3e})",
            dims.n_t,
            dims.n_r,
            norm.value(),
            condition
        )));
    }

    let tl = Arc::new(TermList {
        dims,
        k,
        terms,
        condition,
    });
    cache.insert(key, Arc::clone(&tl));
    Ok(tl)
}

/// Alternating binomial mixture over subset sizes k = i..m that turns
/// subset-minimum quantities into the i-th largest eigenvalue's marginal.
fn marginal_sum<F>(dims: ChannelDims, i: u32, mut kernel: F) -> Result<f64>
where
    F: FnMut(&TermList) -> Result<f64>,
{
    let m = dims.m();
    if i < 1 || i > m {
        return Err(Error::Domain(format!(
            "stream index i = {i} outside [1, {m}]"
        )));
    }
    let mut acc = KahanSum::new();
    for k in i..=m {
        let tl = build_min_subset_density(dims, k)?;
        let sign = if (k - i) % 2 == 0 { 1.0 } else { -1.0 };
        let weight = sign * binom(k - 1, i - 1) * binom(m, k);
        acc.add(weight * kernel(&tl)?);
    }
    Ok(acc.value())
}

/// Tolerance on negative density/CDF excursions attributable to roundoff.
const ROUNDOFF_CLAMP: f64 = 1e-9;

fn clamp_nonnegative(v: f64, what: &str) -> Result<f64> {
    if v < -ROUNDOFF_CLAMP {
        return Err(Error::NumericConsistency(format!(
            "{what} evaluated to {v:e}, beyond roundoff tolerance"
        )));
    }
    Ok(v.max(0.0))
}

/// Marginal pdf of the i-th largest eigenvalue (i = 1 is the largest).
pub fn ordered_eigen_pdf(dims: ChannelDims, i: u32, x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::Domain(format!("density argument x = {x:e} < 0")));
    }
    let v = marginal_sum(dims, i, |tl| Ok(tl.density(x)))?;
    clamp_nonnegative(v, "ordered eigenvalue pdf")
}

/// P(lambda_i < lambda_thr): the individual outage probability of stream i.
pub fn outage_cdf(dims: ChannelDims, i: u32, lambda_thr: f64) -> Result<f64> {
    if lambda_thr < 0.0 {
        return Err(Error::Domain(format!(
            "threshold {lambda_thr:e} < 0"
        )));
    }
    if lambda_thr == 0.0 {
        // Bypass the alternating sum; the eigenvalues are a.s. positive.
        let m = dims.m();
        if i < 1 || i > m {
            return Err(Error::Domain(format!(
                "stream index i = {i} outside [1, {m}]"
            )));
        }
        return Ok(0.0);
    }
    let v = marginal_sum(dims, i, |tl| {
        let kf = tl.k() as f64;
        let mut acc = KahanSum::new();
        for t in tl.terms() {
            let g = lower_inc_gamma_int(t.exponent + 1, kf * lambda_thr)?;
            acc.add(t.coeff * g / kf.powi(t.exponent as i32 + 1));
        }
        Ok(acc.value())
    })?;
    let v = clamp_nonnegative(v, "outage CDF")?;
    if v > 1.0 + ROUNDOFF_CLAMP {
        return Err(Error::NumericConsistency(format!(
            "outage CDF evaluated to {v:e} > 1"
        )));
    }
    Ok(v.min(1.0))
}

/// Tail inverse moment int_{lambda_lo}^inf x^-1 f_i(x) dx. Exponent-zero
/// terms reduce to the exponential integral, hence lambda_lo > 0.
pub fn inverse_moment_tail(dims: ChannelDims, i: u32, lambda_lo: f64) -> Result<f64> {
    if lambda_lo <= 0.0 {
        return Err(Error::Domain(format!(
            "inverse moment tail requires lambda_lo > 0, got {lambda_lo:e} (diverges at 0)"
        )));
    }
    let v = marginal_sum(dims, i, |tl| {
        let kf = tl.k() as f64;
        let mut acc = KahanSum::new();
        for t in tl.terms() {
            let g = upper_inc_gamma_int(t.exponent, kf * lambda_lo)?;
            acc.add(t.coeff * g / kf.powi(t.exponent as i32));
        }
        Ok(acc.value())
    })?;
    clamp_nonnegative(v, "inverse moment tail")
}

/// Logarithmic tail integral
/// int_{lambda_lo}^inf x^-1 ln(x delta / lambda_lo) f_i(x) dx.
///
/// Signals [`Error::AnalyticFormUnavailable`] when the expansion contains an
/// exponent-zero term (square arrays), for which the analytic kernel is
/// undefined; callers fall back to quadrature. The 2/beta modulation factor
/// is applied by the caller.
pub fn log_tail_integral(dims: ChannelDims, i: u32, lambda_lo: f64, delta: f64) -> Result<f64> {
    if lambda_lo <= 0.0 {
        return Err(Error::Domain(format!(
            "log tail integral requires lambda_lo > 0, got {lambda_lo:e}"
        )));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::Domain(format!(
            "log tail integral requires 0 < delta <= 1, got {delta:e}"
        )));
    }
    marginal_sum(dims, i, |tl| {
        let kf = tl.k() as f64;
        let mut acc = KahanSum::new();
        for t in tl.terms() {
            if t.exponent == 0 {
                return Err(Error::AnalyticFormUnavailable);
            }
            let j = jmath_shifted(t.exponent, kf * lambda_lo, delta)?;
            acc.add(t.coeff * j / kf.powi(t.exponent as i32));
        }
        Ok(acc.value())
    })
}
