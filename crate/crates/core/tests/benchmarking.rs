use std::collections::HashMap;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use paracz::benchmarking::*;
use paracz::dynamics::{CMatrix, Superoperator};
use paracz::noise::{DriftSegment, NoiseProfile, T1Drift};
use paracz::Result;

fn group() -> &'static CliffordGroup {
    CliffordGroup::get()
}

#[test]
fn group_has_11520_elements_in_720_symplectic_classes() {
    let g = group();
    assert_eq!(g.order(), 11_520);
    let mut symplectic: HashMap<u32, usize> = HashMap::new();
    for c in g.elements() {
        let t = c.tableau();
        assert!(t.is_valid());
        assert_eq!(g.find(&t), Some(c));
        *symplectic.entry(t.key() >> 4).or_default() += 1;
        // Index layout: 16 sign patterns per symplectic part.
        assert_eq!(c.index() % 16, (t.key() & 15) as usize);
    }
    assert_eq!(symplectic.len(), 720);
    assert!(symplectic.values().all(|&n| n == 16));
}

#[test]
fn unitaries_are_cliffords_matching_their_tableaus() {
    let g = group();
    for c in g.elements() {
        let u = c.unitary();
        let err = (u.adjoint() * u - CMatrix::identity(4, 4)).norm();
        assert!(err < 1e-10, "{c:?}: {err}");
        let t = c.tableau();
        // Oracle: conjugate every Pauli directly.
        for x in 0..4u8 {
            for z in 0..4u8 {
                let p = Pauli::new(x, z, 0);
                let direct = u * p.matrix() * u.adjoint();
                assert!((direct - t.conjugate(p).matrix()).norm() < 1e-10);
            }
        }
    }
}

#[test]
fn inverse_and_identity() {
    let g = group();
    let id = g.identity();
    assert_eq!(id.tableau(), Tableau::identity());
    for c in g.elements() {
        assert_eq!(clifford_compose(c, clifford_invert(c)), id);
        assert_eq!(clifford_compose(clifford_invert(c), c), id);
    }
}

#[test]
fn composition_matches_unitary_products() {
    let g = group();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..2000 {
        let (a, b) = (clifford_sample(&mut rng), clifford_sample(&mut rng));
        let ab = g.compose(a, b);
        assert!(equal_up_to_phase(&(b.unitary() * a.unitary()), ab.unitary(), 1e-10));
    }
}

#[test]
fn group_axioms_on_random_triples() {
    let g = group();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10_000 {
        let (a, b, c) = (g.sample(&mut rng), g.sample(&mut rng), g.sample(&mut rng));
        let left = a.tableau().then(&b.tableau()).then(&c.tableau());
        let right = a.tableau().then(&b.tableau().then(&c.tableau()));
        assert_eq!(left, right);
        assert!(left.is_valid());
        assert!(g.find(&left).is_some());
        assert_eq!(g.compose(g.compose(a, b), c), g.compose(a, g.compose(b, c)));
    }
}

#[test]
fn every_compilation_recomposes() {
    let g = group();
    let mut counts = [0usize; 4];
    for c in g.elements() {
        let seq = compile_to_native(c);
        assert!(equal_up_to_phase(&seq.unitary(), c.unitary(), 1e-9), "{c:?}");
        counts[seq.cz_count()] += 1;
        let inter = compile_interleaved(c);
        assert!(equal_up_to_phase(&inter.unitary(), g.compose(c, g.cz()).unitary(), 1e-9));
    }
    assert_eq!(counts, [576, 5184, 5184, 576]);
}

#[test]
fn trivial_compilations() {
    let g = group();
    let id = compile_to_native(g.identity());
    assert_eq!(id.cz_count(), 0);
    assert_eq!(id.0.len(), 1);
    assert!(equal_up_to_phase(&id.unitary(), &CMatrix::identity(4, 4), 1e-12));
    assert_eq!(compile_to_native(g.cz()).cz_count(), 1);
}

fn element_of(u: &CMatrix) -> CliffordElement {
    group().find(&Tableau::from_unitary(u).expect("Clifford unitary")).expect("group element")
}

/// Generators H and S on each qubit plus CZ, as group elements.
fn generators() -> Vec<CliffordElement> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let h = CMatrix::from_row_slice(2, 2, &[c(r, 0.0), c(r, 0.0), c(r, 0.0), c(-r, 0.0)]);
    let s = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 1.0)]);
    let id = CMatrix::identity(2, 2);
    let mut gens: Vec<CliffordElement> = [&h, &s]
        .iter()
        .flat_map(|g| [g.kronecker(&id), id.kronecker(g)])
        .map(|u| element_of(&u))
        .collect();
    gens.push(element_of(&paracz::dynamics::cz_unitary()));
    gens
}

/// Conjugacy class label of every element: orbits of x ↦ h⁻¹ x h over the
/// generators, which reach every conjugate.
fn conjugacy_classes() -> Vec<usize> {
    let g = group();
    let gens = generators();
    let mut class = vec![usize::MAX; g.order()];
    let mut next = 0;
    for start in g.elements() {
        if class[start.index()] != usize::MAX {
            continue;
        }
        let mut stack = vec![start];
        class[start.index()] = next;
        while let Some(x) = stack.pop() {
            for &h in &gens {
                let y = g.compose(g.compose(g.invert(h), x), h);
                if class[y.index()] == usize::MAX {
                    class[y.index()] = next;
                    stack.push(y);
                }
            }
        }
        next += 1;
    }
    class
}

#[test]
fn generators_generate_the_group() {
    let g = group();
    let gens = generators();
    let mut seen = vec![false; g.order()];
    let mut stack = vec![g.identity()];
    seen[g.identity().index()] = true;
    while let Some(x) = stack.pop() {
        for &h in &gens {
            let y = g.compose(x, h);
            if !seen[y.index()] {
                seen[y.index()] = true;
                stack.push(y);
            }
        }
    }
    assert!(seen.iter().all(|&b| b));
}

#[test]
fn sampling_is_uniform_over_conjugacy_classes() {
    let g = group();
    let class = conjugacy_classes();
    let n_classes = class.iter().max().unwrap() + 1;
    let mut size = vec![0usize; n_classes];
    for &k in &class {
        size[k] += 1;
    }
    assert_eq!(size.iter().sum::<usize>(), 11_520);
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 10_000;
    let mut observed = vec![0usize; n_classes];
    for _ in 0..n {
        observed[class[g.sample(&mut rng).index()]] += 1;
    }
    // Pool small classes so every expected count is at least 5.
    let (mut chi2, mut bins, mut pool_obs, mut pool_exp) = (0.0, 0usize, 0.0, 0.0);
    for k in 0..n_classes {
        let expected = n as f64 * size[k] as f64 / 11_520.0;
        pool_obs += observed[k] as f64;
        pool_exp += expected;
        if pool_exp >= 5.0 {
            chi2 += (pool_obs - pool_exp).powi(2) / pool_exp;
            bins += 1;
            pool_obs = 0.0;
            pool_exp = 0.0;
        }
    }
    let p = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(chi2);
    assert!(p > 0.01, "chi2 = {chi2} over {bins} bins, p = {p}");
}

fn ideal_schedule() -> ChannelSchedule {
    ChannelSchedule::constant(&NativeChannels::ideal()).unwrap()
}

#[test]
fn ideal_channels_always_survive() {
    let config = RbConfig { sequences_per_length: 8, ..Default::default() };
    for gate in [None, Some(InterleavedGate::Cz)] {
        let data = run_rb(&RbConfig { interleaved_gate: gate, ..config.clone() }, &ideal_schedule(), 3).unwrap();
        assert_eq!(data.records.len(), 48);
        assert!(data.records.iter().all(|r| r.successes == r.shots));
        let fit = fit_decay(&data).unwrap();
        assert!((fit.p - 1.0).abs() < 1e-12);
    }
}

#[test]
fn acquisition_order_is_a_permutation() {
    let config = RbConfig { sequences_per_length: 4, ..Default::default() };
    let data = run_rb(&config, &ideal_schedule(), 9).unwrap();
    let mut slots: Vec<usize> = data.records.iter().map(|r| r.slot).collect();
    let in_order = slots.windows(2).all(|w| w[1] == w[0] + 1);
    assert!(!in_order, "acquisition order should be scrambled");
    slots.sort_unstable();
    assert_eq!(slots, (0..24).collect::<Vec<_>>());
}

fn depolarizing_channels(lambda: f64) -> NativeChannels {
    NativeChannels::new(Superoperator::from_unitary(&paracz::dynamics::cz_unitary()), Superoperator::depolarizing(4, lambda))
        .unwrap()
}

/// Decay per Clifford when every single-qubit layer is followed by global
/// depolarizing λ: the average of λ^(layers) over the group.
fn depolarizing_clifford_p(lambda: f64) -> f64 {
    let g = group();
    g.elements().map(|c| lambda.powi(compile_to_native(c).0.iter().filter(|op| **op != NativeOp::Cz).count() as i32)).sum::<f64>()
        / g.order() as f64
}

#[test]
fn depolarizing_rb_matches_analytic_curve() {
    let lambda = 0.99;
    let p = depolarizing_clifford_p(lambda);
    let schedule = ChannelSchedule::constant(&depolarizing_channels(lambda)).unwrap();
    let config = RbConfig { shots_per_sequence: 100_000, ..Default::default() };
    let data = run_rb(&config, &schedule, 17).unwrap();
    let fit = fit_decay(&data).unwrap();
    assert!((fit.p - p).abs() < 3.0 * fit.p_std_err() + 1e-4, "{} vs {p}", fit.p);
    // Global depolarizing leaves B = 1/d; the inversion element adds one
    // more factor of p to A.
    for (l, m) in fit.lengths.iter().zip(&fit.means) {
        let analytic = 0.75 * p.powi(*l as i32 + 1) + 0.25;
        assert!((m - analytic).abs() < 0.01, "L = {l}: {m} vs {analytic}");
    }
    assert!((fit.b - 0.25).abs() < 0.02);
}

#[test]
fn depolarizing_rb_fit_covers_truth() {
    let lambda = 0.985;
    let p = depolarizing_clifford_p(lambda);
    let schedule = ChannelSchedule::constant(&depolarizing_channels(lambda)).unwrap();
    let config = RbConfig::default();
    let trials = 100;
    let covered = (0..trials)
        .filter(|&s| {
            let fit = fit_decay(&run_rb(&config, &schedule, 1000 + s).unwrap()).unwrap();
            fit.p_ci[0] <= p && p <= fit.p_ci[1]
        })
        .count();
    assert!(covered as f64 >= 0.85 * trials as f64, "{covered}/{trials}");
}

#[test]
fn fit_recovers_generator_parameters() {
    let config = RbConfig::default();
    let trials = 200;
    let covered = (0..trials)
        .filter(|&s| {
            let fit = fit_decay(&synthetic_decay(&config, 0.75, 0.95, 0.25, s).unwrap()).unwrap();
            assert!(fit.weighted);
            fit.p_ci[0] <= 0.95 && 0.95 <= fit.p_ci[1]
        })
        .count();
    assert!(covered >= 170, "{covered}/{trials}");
}

#[test]
fn noiseless_decay_fits_p_one() {
    let data = synthetic_decay(&RbConfig::default(), 0.75, 1.0, 0.25, 1).unwrap();
    let fit = fit_decay(&data).unwrap();
    assert!((fit.p - 1.0).abs() < 1e-9);
    assert!(!fit.weighted);
}

#[test]
fn zero_spread_falls_back_to_equal_weights() {
    let mut records = Vec::new();
    for (k, &l) in [2usize, 4, 8, 16, 32].iter().enumerate() {
        for s in 0..4 {
            let survival = 0.75 * 0.9f64.powi(l as i32) + 0.25;
            records.push(SequenceRecord {
                decay: 0,
                kind: DecayKind::Reference,
                length: l,
                sequence: s,
                successes: (survival * 1000.0).round() as u64,
                shots: 1000,
                slot: k * 4 + s,
            });
        }
    }
    let fit = fit_decay(&RbDataset { records }).unwrap();
    assert!(!fit.weighted);
    assert!((fit.p - 0.9).abs() < 2e-3, "{}", fit.p);
}

#[test]
fn decay_fit_needs_three_lengths() {
    assert!(RbConfig { lengths: vec![2, 4], ..Default::default() }.validate().is_err());
    let config = RbConfig { lengths: vec![2, 4, 8], ..Default::default() };
    let mut data = synthetic_decay(&config, 0.75, 0.95, 0.25, 1).unwrap();
    data.records.retain(|r| r.length != 8);
    assert!(fit_decay(&data).is_err());
}

#[test]
fn irb_fixture_values() {
    let r = irb_from_decay_parameters(0.960, 0.950).unwrap();
    assert!((r.fidelity - 0.992).abs() < 5e-4, "{}", r.fidelity);
    assert_eq!(irb_from_decay_parameters(0.97, 0.97).unwrap().infidelity, 0.0);
    let r = irb_from_decay_parameters(1.0, 0.9).unwrap();
    assert!((r.infidelity - 0.075).abs() < 1e-15);
    assert!(irb_from_decay_parameters(0.0, 0.9).is_err());
    assert!(irb_from_decay_parameters(0.9, 0.95).unwrap().negative);
}

proptest! {
    #[test]
    fn irb_is_monotone_in_p_int(p_ref in 0.5f64..1.0, a in 0.3f64..1.0, b in 0.3f64..1.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let r_lo = irb_from_decay_parameters(p_ref, lo).unwrap().infidelity;
        let r_hi = irb_from_decay_parameters(p_ref, hi).unwrap().infidelity;
        prop_assert!(r_hi <= r_lo);
        let same = irb_from_decay_parameters(p_ref, p_ref).unwrap();
        prop_assert_eq!(same.infidelity, 0.0);
        prop_assert!((same.fidelity + same.infidelity - 1.0).abs() < 1e-15);
    }
}

#[test]
fn zero_variance_bootstrap_has_zero_width() {
    let data = synthetic_decay(&RbConfig::default(), 0.75, 1.0, 0.25, 1).unwrap();
    let ci = bootstrap_ci(&data, |d| Ok(fit_decay(d)?.p), 200, 4).unwrap();
    assert_eq!(ci.low, ci.high);
    assert_eq!(ci.failures, 0);
}

#[test]
fn bootstrap_reports_unstable_statistics() {
    let data = synthetic_decay(&RbConfig::default(), 0.75, 0.95, 0.25, 1).unwrap();
    let original = data.records[0].successes;
    let flaky = |d: &RbDataset| -> Result<f64> {
        if d.records[0].successes < original {
            Err(paracz::Error::Fit { reason: "synthetic".into(), residual_norm: 0.0 })
        } else {
            Ok(fit_decay(d)?.p)
        }
    };
    let ci = bootstrap_ci(&data, flaky, 300, 2).unwrap();
    assert!(ci.failures > 15);
    assert!(ci.unstable);
}

#[test]
fn paper_scale_irb_interval_is_tight() {
    let config = RbConfig::default();
    let reference = synthetic_decay(&config, 0.75, 0.960, 0.25, 1).unwrap();
    let mut interleaved = synthetic_decay(&config, 0.75, 0.950, 0.25, 2).unwrap();
    for r in &mut interleaved.records {
        r.decay = 1;
        r.kind = DecayKind::Interleaved;
    }
    let mut data = reference;
    data.records.extend(interleaved.records);
    let stat = |d: &RbDataset| Ok(irb_estimate(&fit_decay(&d.decay(0))?, &fit_decay(&d.decay(1))?)?.infidelity);
    let ci = bootstrap_ci(&data, stat, 2000, 8).unwrap();
    assert!(ci.high - ci.low <= 0.008, "[{}, {}]", ci.low, ci.high);
    assert!(ci.contains(0.0078125));
}

#[test]
fn identical_decays_are_stable() {
    let data = synthetic_decay(&RbConfig::default(), 0.75, 0.95, 0.25, 3).unwrap();
    let t = stability_test(&data, &data, 0.1, 500, 1).unwrap();
    assert_eq!(t.difference, 0.0);
    assert!(t.pass);
    assert!((t.p_value - 1.0).abs() < 1e-12);
}

#[test]
fn separated_decays_are_distinguished() {
    let config = RbConfig::default();
    let trials = 40;
    let rejected = (0..trials)
        .filter(|&s| {
            let a = synthetic_decay(&config, 0.75, 0.95, 0.25, 2 * s).unwrap();
            let b = synthetic_decay(&config, 0.75, 0.85, 0.25, 2 * s + 1).unwrap();
            !stability_test(&a, &b, 0.1, 200, s).unwrap().pass
        })
        .count();
    assert!(rejected as f64 > 0.95 * trials as f64, "{rejected}/{trials}");
}

#[test]
fn ecdf_of_constant_samples_is_a_single_step() {
    let e = ecdf_with_band(&[0.01; 5]).unwrap();
    assert_eq!(e.eval(0.0099), 0.0);
    assert_eq!(e.eval(0.01), 1.0);
    assert!(ecdf_with_band(&[0.1]).is_err());
}

#[test]
fn ecdf_band_half_width_is_dkw() {
    for n in [2usize, 10, 89] {
        let samples: Vec<f64> = (0..n).map(|k| k as f64).collect();
        let e = ecdf_with_band(&samples).unwrap();
        assert_eq!(e.half_width, ((2.0f64 / 0.1).ln() / (2.0 * n as f64)).sqrt());
    }
}

#[test]
fn ecdf_band_covers_uniform_cdf() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let trials = 500;
    let n = 40;
    let covered = (0..trials)
        .filter(|_| {
            let samples: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let e = ecdf_with_band(&samples).unwrap();
            // The sup distance is attained at the jumps, on either side.
            e.values.iter().enumerate().all(|(i, &x)| {
                let before = i as f64 / n as f64;
                let after = e.cumulative[i];
                (x - before).abs() <= e.half_width + 1e-12 && (x - after).abs() <= e.half_width + 1e-12
            })
        })
        .count();
    assert!(covered as f64 >= 0.9 * trials as f64, "{covered}/{trials}");
}

/// CZ channel whose depolarizing error scales inversely with the T1
/// multiplier; single-qubit layers carry a small fixed error.
struct DriftingDepolarizer;

impl ChannelSource for DriftingDepolarizer {
    fn channels(&self, t1_multiplier: f64) -> Result<NativeChannels> {
        let cz = Superoperator::from_unitary(&paracz::dynamics::cz_unitary())
            .then(&Superoperator::depolarizing(4, 1.0 - 0.02 / t1_multiplier));
        NativeChannels::new(cz, Superoperator::depolarizing(4, 0.995))
    }
}

fn discard_fraction(drift: &NoiseProfile, experiments: usize, seed: u64) -> f64 {
    let config = RepeatedIrbConfig { experiments, replicants: 300, ..Default::default() };
    run_repeated_irb(&config, &DriftingDepolarizer, drift, seed).unwrap().discard_fraction
}

fn fast_drift() -> NoiseProfile {
    // T1 alternates between nominal and a third of nominal every 64 slots.
    let segments = (0..4000).map(|k| DriftSegment { start: 64 * k, multiplier: if k % 2 == 0 { 1.0 } else { 0.33 } });
    NoiseProfile { t1_drift: Some(T1Drift { segments: segments.collect() }), ..NoiseProfile::default() }
}

#[test]
fn discard_fraction_without_drift_matches_two_tests() {
    let n = 60;
    let f = discard_fraction(&NoiseProfile::default(), n, 7);
    let expected = 1.0 - 0.9f64 * 0.9;
    let sigma = (expected * (1.0 - expected) / n as f64).sqrt();
    assert!((f - expected).abs() < 3.0 * sigma, "discarded {f}");
}

#[test]
fn strong_t1_drift_raises_discards() {
    // One-sided Wilcoxon rank-sum over seeds: all drifted runs above all
    // quiet runs has probability 1/C(10, 5) = 1/252 under no effect.
    let quiet: Vec<f64> = (0..5).map(|s| discard_fraction(&NoiseProfile::default(), 12, 100 + s)).collect();
    let drifted: Vec<f64> = (0..5).map(|s| discard_fraction(&fast_drift(), 12, 100 + s)).collect();
    let mut u = 0.0;
    for d in &drifted {
        for q in &quiet {
            u += if d > q { 1.0 } else if d == q { 0.5 } else { 0.0 };
        }
    }
    // U ≥ 23 of 25 has p < 0.02 under H₀.
    assert!(u >= 23.0, "U = {u}: quiet {quiet:?}, drifted {drifted:?}");
}

#[test]
fn repeated_irb_is_deterministic_and_bounded() {
    let config = RepeatedIrbConfig { experiments: 4, replicants: 100, ..Default::default() };
    let a = run_repeated_irb(&config, &DriftingDepolarizer, &NoiseProfile::default(), 3).unwrap();
    let b = run_repeated_irb(&config, &DriftingDepolarizer, &NoiseProfile::default(), 3).unwrap();
    assert_eq!(a, b);
    // Depolarizing strength 1 − λ on the CZ: r = (d − 1)(1 − λ)/d = 0.015.
    for e in &a.experiments {
        assert!((e.irb.infidelity - 0.015).abs() < 0.006, "{}", e.irb.infidelity);
        assert!(e.bootstrap.low <= e.irb.infidelity && e.irb.infidelity <= e.bootstrap.high);
    }
}

#[test]
fn channel_validation() {
    let bad = Superoperator::identity(2);
    assert!(NativeChannels::new(bad, Superoperator::identity(4)).is_err());
    let mut lossy = Superoperator::identity(4);
    lossy.matrix *= Complex64::new(0.5, 0.0);
    assert!(matches!(
        NativeChannels::new(lossy, Superoperator::identity(4)),
        Err(paracz::Error::ChannelValidation(_))
    ));
}

#[test]
fn config_rejects_bad_lengths() {
    let config = RbConfig { lengths: vec![4, 2], ..Default::default() };
    assert!(config.validate().is_err());
    let json = r#"{"lengths": [1, 2, 3], "sequences_per_length": 2}"#;
    let parsed: RbConfig = serde_json::from_str(json).unwrap();
    assert_eq!(parsed.shots_per_sequence, 500);
    assert!(serde_json::from_str::<RbConfig>(r#"{"lenghts": [1]}"#).is_err());
}
