use dfgnoise::photon::{self, MeasurementChain};

const N_SEEDS: u64 = 10_000;

struct Moments {
    mean: f64,
    variance: f64,
    mean_reported_var: f64,
}

fn normalized_moments(rate: f64, chain: &MeasurementChain, base_seed: u64) -> Moments {
    let (mut s, mut s2, mut r2) = (0.0, 0.0, 0.0);
    for i in 0..N_SEEDS {
        let rec = photon::simulate_counts(rate, chain, photon::derive_seed(base_seed, i)).unwrap();
        let n = photon::normalize_to_waveguide(&rec, chain).unwrap();
        s += n.rate;
        s2 += n.rate * n.rate;
        r2 += n.uncertainty * n.uncertainty;
    }
    let k = N_SEEDS as f64;
    let mean = s / k;
    Moments {
        mean,
        variance: (s2 / k - mean * mean) * k / (k - 1.0),
        mean_reported_var: r2 / k,
    }
}

#[test]
fn normalization_is_unbiased_across_rates() {
    for chain in [MeasurementChain::telecom_default(), MeasurementChain::visible_default()] {
        for (j, rate) in [1e2, 1e3, 1e4, 1e5, 1e6].into_iter().enumerate() {
            let m = normalized_moments(rate, &chain, 77 + j as u64);
            let se = (m.variance / N_SEEDS as f64).sqrt();
            assert!((m.mean - rate).abs() < 3.0 * se, "rate {rate}: mean {} se {se}", m.mean);
        }
    }
}

#[test]
fn reported_uncertainty_matches_scatter() {
    let chain = MeasurementChain::telecom_default();
    for (j, rate) in [1e2, 1e4, 1e6].into_iter().enumerate() {
        let m = normalized_moments(rate, &chain, 991 + j as u64);
        // sample variance has relative sd sqrt(2 / N) ~ 1.4%
        let rel = m.mean_reported_var / m.variance - 1.0;
        assert!(rel.abs() < 0.06, "rate {rate}: reported/observed variance - 1 = {rel}");
    }
}

#[test]
fn counts_are_poisson() {
    let chain = MeasurementChain::telecom_default().with_integration_time(1.0).unwrap();
    let mean = photon::mean_counts(1e4, &chain);
    let (mut s, mut s2) = (0.0, 0.0);
    for i in 0..N_SEEDS {
        let c = photon::simulate_counts(1e4, &chain, photon::derive_seed(5, i)).unwrap().counts as f64;
        s += c;
        s2 += c * c;
    }
    let k = N_SEEDS as f64;
    let m = s / k;
    let var = s2 / k - m * m;
    assert!((m - mean).abs() < 3.0 * (mean / k).sqrt());
    // Fano factor 1
    assert!((var / m - 1.0).abs() < 0.06, "fano {}", var / m);
}
