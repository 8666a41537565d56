//! Monte Carlo cross-checks: the sampled channel statistics against the
//! analytic expansion, and the policy estimates against the closed forms.

use eigenwave::atp::{atp_dynamic, atp_traditional};
use eigenwave::eigen_dist::{build_min_subset_density, outage_cdf, ChannelDims};
use eigenwave::montecarlo::{
    estimate_outage, estimate_stream_metrics, sample_realization, PolicyKind, SimConfig,
};
use eigenwave::policy::{derive_params, Modulation, OutageInput, StreamSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn dims(n_t: u32, n_r: u32) -> ChannelDims {
    ChannelDims::new(n_t, n_r).unwrap()
}

fn stream_rng(seed: u64, idx: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(idx);
    rng
}

/// Smallest-of-three eigenvalue histogram vs the k = 3 subset-minimum
/// expansion, binned with exact bin probabilities from the term sum.
#[test]
fn min_subset_density_matches_histogram() {
    let d = dims(3, 6);
    let tl = build_min_subset_density(d, 3).unwrap();
    let n = 1_000_000u64;
    let bins = 50usize;
    let hi = 2.5f64;
    let width = hi / bins as f64;

    let mut counts = vec![0u64; bins + 1];
    for idx in 0..n {
        let mut rng = stream_rng(2024, idx);
        let r = sample_realization(d, &mut rng).unwrap();
        let min_ev = r.eigenvalues[2];
        let b = ((min_ev / width) as usize).min(bins);
        counts[b] += 1;
    }

    // Bin masses two ways: quadrature of the evaluated density, and the
    // gamma-kernel CDF (for k = m the stream-3 CDF reduces to this very
    // list). Both must agree, and the counts must sit inside the binomial
    // band around them.
    let mut max_z: f64 = 0.0;
    for b in 0..bins {
        let a = b as f64 * width;
        let bndry = a + width;
        let p_cdf = outage_cdf(d, 3, bndry).unwrap() - outage_cdf(d, 3, a).unwrap();
        let p_quad = eigenwave::quad::integrate(|x| tl.density(x), a, bndry, 1e-12, 1e-14).unwrap();
        assert!(
            (p_cdf - p_quad).abs() < 1e-10,
            "bin {b}: mass mismatch {p_cdf:e} vs {p_quad:e}"
        );
        let se = (p_cdf * (1.0 - p_cdf) / n as f64).sqrt();
        let z = ((counts[b] as f64 / n as f64) - p_cdf) / se;
        max_z = max_z.max(z.abs());
    }
    assert!(max_z < 5.0, "worst bin z = {max_z}");
}

/// Empirical CDF of each ordered eigenvalue within the
/// Dvoretzky-Kiefer-Wolfowitz band around the closed-form CDF.
#[test]
fn ordered_marginals_within_dkw_band() {
    let d = dims(3, 6);
    let n = 400_000u64;
    let grid: Vec<f64> = (1..=20).map(|j| 0.4 * j as f64).collect();

    let mut below = vec![[0u64; 20]; 3];
    for idx in 0..n {
        let mut rng = stream_rng(77, idx);
        let r = sample_realization(d, &mut rng).unwrap();
        for (i, row) in below.iter_mut().enumerate() {
            for (g, &x) in grid.iter().enumerate() {
                if r.eigenvalues[i] < x {
                    row[g] += 1;
                }
            }
        }
    }

    // DKW: P(sup |F_hat - F| > eps) <= 2 exp(-2 n eps^2); alpha = 1e-3.
    let eps = ((2.0f64 / 1e-3).ln() / (2.0 * n as f64)).sqrt();
    for i in 0..3usize {
        for (g, &x) in grid.iter().enumerate() {
            let emp = below[i][g] as f64 / n as f64;
            let cdf = outage_cdf(d, (i + 1) as u32, x).unwrap();
            assert!(
                (emp - cdf).abs() <= eps,
                "stream {} at x = {x}: |{emp} - {cdf}| > {eps}",
                i + 1
            );
        }
    }
}

#[test]
fn outage_estimates_match_closed_form() {
    let d = dims(3, 6);
    let lam = 0.105_360_515_657_826_3;
    let specs: Vec<StreamSpec> = (1..=3)
        .map(|i| {
            StreamSpec::new(i, Modulation::bpsk(), 1e-4, OutageInput::ExplicitLambda(lam)).unwrap()
        })
        .collect();
    let cfg = SimConfig::new(d, specs, PolicyKind::Traditional, 2_000_000, 5150, 65_536).unwrap();
    let est = estimate_outage(&cfg).unwrap();
    for (i, e) in est.iter().enumerate() {
        let p = outage_cdf(d, (i + 1) as u32, lam).unwrap();
        let se = (p * (1.0 - p) / cfg.samples as f64).sqrt();
        assert!(
            (e.mean - p).abs() <= 3.0 * se.max(f64::MIN_POSITIVE),
            "stream {}: {:e} vs {:e} (se {se:e})",
            i + 1,
            e.mean,
            p
        );
    }
}

fn closure_for(policy: PolicyKind, seed: u64) {
    let d = dims(3, 6);
    let ber = 1e-4;
    let specs: Vec<StreamSpec> = (1..=3)
        .map(|i| {
            StreamSpec::new(i, Modulation::bpsk(), ber, OutageInput::SisoExponent(1.0)).unwrap()
        })
        .collect();
    let cfg = SimConfig::new(d, specs.clone(), policy, 400_000, seed, 16_384).unwrap();
    let metrics = estimate_stream_metrics(&cfg).unwrap();

    for (spec, m) in specs.iter().zip(&metrics) {
        let params = derive_params(d, spec).unwrap();
        let closed = match policy {
            PolicyKind::Traditional => atp_traditional(d, spec, &params).unwrap(),
            PolicyKind::Dynamic => atp_dynamic(d, spec, &params).unwrap(),
        };
        // ATP within 3 standard errors of the closed form.
        let z = (m.atp.mean - closed.total) / m.atp.std_error;
        assert!(
            z.abs() <= 3.0,
            "stream {} atp: mc {:e} vs closed {:e}, z = {z}",
            spec.stream_index,
            m.atp.mean,
            closed.total
        );
        // Transmit frequency within 3 binomial standard errors of p_transmit.
        let se = (params.p_transmit * (1.0 - params.p_transmit) / cfg.samples as f64)
            .sqrt()
            .max(f64::MIN_POSITIVE);
        assert!(
            (m.transmit_freq.mean - params.p_transmit).abs() <= 3.0 * se,
            "stream {} transmit freq",
            spec.stream_index
        );
        // The policy's own bound averages to the target BER exactly.
        let zb = (m.bound_ber.mean - ber) / m.bound_ber.std_error;
        assert!(
            zb.abs() <= 3.0,
            "stream {} bound ber: {:e} vs {ber:e}, z = {zb}",
            spec.stream_index,
            m.bound_ber.mean
        );
        // The exact conditional BER meets the constraint (with bound slack).
        assert!(
            m.cond_ber.mean <= ber + 3.0 * m.cond_ber.std_error,
            "stream {} cond ber {:e} above target {ber:e}",
            spec.stream_index,
            m.cond_ber.mean
        );
        assert!(m.cond_ber.mean <= m.bound_ber.mean, "bound must dominate");
    }
}

#[test]
fn stream_metrics_close_traditional() {
    closure_for(PolicyKind::Traditional, 4242);
}

#[test]
fn stream_metrics_close_dynamic() {
    closure_for(PolicyKind::Dynamic, 4243);
}

/// Square arrays route rho_delta through the quadrature fallback; the
/// simulator closes the loop on that path too.
#[test]
fn square_array_fallback_agrees_with_simulation() {
    let d = dims(2, 2);
    let spec =
        StreamSpec::new(2, Modulation::bpsk(), 1e-4, OutageInput::SisoExponent(1.0)).unwrap();
    let params = derive_params(d, &spec).unwrap();
    let closed = atp_traditional(d, &spec, &params).unwrap();
    let cfg = SimConfig::new(d, vec![spec], PolicyKind::Traditional, 400_000, 99, 16_384).unwrap();
    let m = &estimate_stream_metrics(&cfg).unwrap()[0];
    let z = (m.atp.mean - closed.total) / m.atp.std_error;
    assert!(
        z.abs() <= 3.0,
        "mc {:e} vs closed {:e}, z = {z}",
        m.atp.mean,
        closed.total
    );
}
