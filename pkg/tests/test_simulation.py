import numpy as np
import pytest

from psiepi import NoiseModel, ProbabilityTable, born_table, estimate_s, make_state, perturb_table, simulate_counts
from psiepi.errors import EmptySetting, InvalidScenario, KeyMismatch
from psiepi.inequality import pair_keys, s_value
from psiepi.simulation import CountRecord, deviation_histogram, estimated_table, perturb_state, poisson
from psiepi import seeding


def _quiet(counts=2e4, **kw):
    return NoiseModel.off(counts).with_updates(**kw)


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(counts_per_setting=0)
    with pytest.raises(ValueError):
        NoiseModel(prep_fidelity_mean=1.2)
    with pytest.raises(ValueError):
        NoiseModel(drift_sd=-1)
    with pytest.raises(ValueError):
        NoiseModel(detection_efficiency=0)
    assert NoiseModel().counts_per_setting == 2e4


def test_zero_noise_leaves_table_exact(opt_d3n5):
    sc = opt_d3n5.scenario
    t = perturb_table(sc, NoiseModel.off(), seed=3)
    np.testing.assert_array_equal(t.as_array(), np.clip(born_table(sc).as_array(), 0, 1))


def test_perturb_table_requires_scenario():
    with pytest.raises(InvalidScenario):
        perturb_table("not a scenario", NoiseModel(), 0)


def test_perturb_table_deterministic(opt_d3n5):
    a = perturb_table(opt_d3n5.scenario, NoiseModel(), 11)
    b = perturb_table(opt_d3n5.scenario, NoiseModel(), 11)
    np.testing.assert_array_equal(a.as_array(), b.as_array())
    assert np.all((a.as_array() >= 0) & (a.as_array() <= 1))


def test_perturbed_state_fidelity_distribution():
    rng = seeding.rng(0, seeding.NOISE)
    psi = make_state([0.3, -0.5, 0.8])
    noise = NoiseModel()
    fids = np.clip(rng.normal(noise.prep_fidelity_mean, noise.prep_fidelity_sd, 10_000), 0, 1)
    measured = np.array([abs(np.vdot(psi.coeffs, perturb_state(psi, f, rng))) ** 2 for f in fids])
    np.testing.assert_allclose(measured, fids, atol=1e-12)
    assert abs(measured.mean() - 0.998) <= 1e-3


def test_perturbed_state_complex_is_normalised():
    rng = np.random.default_rng(0)
    psi = make_state([1, 1j, 0.5])
    out = perturb_state(psi, 0.9, rng)
    assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-12)
    assert abs(np.vdot(psi.coeffs, out)) ** 2 == pytest.approx(0.9, abs=1e-12)


def _table(p):
    return ProbabilityTable({(1, 2): (p, p, p)})


def test_counts_for_p_zero_and_one():
    for seed in range(20):
        zero = simulate_counts(_table(0.0), _quiet(), seed)
        assert np.all(zero.clicks == 0)
        one = simulate_counts(_table(1.0), _quiet(), seed)
        np.testing.assert_array_equal(one.clicks, one.heralds)


def test_binomial_click_fraction():
    fractions = []
    for seed in range(1000):
        rec = simulate_counts(_table(0.5), _quiet(), seed)
        fractions.append(rec.clicks[0, 0] / rec.heralds[0, 0])
    # each fraction has sd sqrt(0.25 / 2e4) = 0.0035; 3 sd is 0.011
    fr = np.array(fractions)
    assert np.all(np.abs(fr - 0.5) <= 0.011 * 1.5)
    assert abs(fr.mean() - 0.5) <= 0.011
    assert np.mean(np.abs(fr - 0.5) <= 0.011) >= 0.99


def test_detection_efficiency_scales_clicks():
    rec = simulate_counts(_table(0.8), _quiet(1e7, detection_efficiency=0.5), 0)
    assert rec.clicks[0, 0] / rec.heralds[0, 0] == pytest.approx(0.4, abs=1e-3)


def test_drift_changes_rates():
    rec = simulate_counts(_table(0.5), _quiet(1e6, drift_sd=0.1), 0)
    assert np.std(rec.heralds / 1e6) > 0.01


def test_count_record_invariants():
    with pytest.raises(ValueError):
        CountRecord(((1, 2),), [[5, 0, 0]], [[4, 0, 0]], 0)
    rec = simulate_counts(_table(0.3), _quiet(), 1)
    assert set(rec.entries) == {(1, 2, 0), (1, 2, 1), (1, 2, 2)}
    assert all(c <= h for c, h in rec.entries.values())


def test_poisson_normal_branch():
    rng = np.random.default_rng(0)
    x = poisson(rng, np.full(20_000, 1e9))
    assert abs(x.mean() - 1e9) < 5 * np.sqrt(1e9 / 20_000)
    assert x.std() == pytest.approx(np.sqrt(1e9), rel=0.03)
    small = poisson(rng, np.full(20_000, 3.0))
    assert small.dtype == np.int64 and small.min() >= 0


def test_estimate_asymptote(opt_d3n5):
    sc = opt_d3n5.scenario
    theory = born_table(sc)
    rec = simulate_counts(theory, NoiseModel.off(1e9), 4)
    est = estimate_s(rec, sc, 50, 4)
    assert abs(est.s_hat - opt_d3n5.s) < 1e-4
    assert est.s_hat == s_value(sc, est.table_hat).s
    assert np.isfinite(est.sigma) and est.sigma >= 0


def test_consistency_at_1e8_counts(opt_d3n5):
    sc = opt_d3n5.scenario
    theory = born_table(sc)
    hits = 0
    for seed in range(200):
        est = estimate_s(simulate_counts(theory, NoiseModel.off(1e8), seed), sc, 2, seed)
        hits += abs(est.s_hat - opt_d3n5.s) < 1e-3
    assert hits >= 198


def test_sigma_scales_with_inverse_sqrt_counts(opt_d3n5):
    sc = opt_d3n5.scenario
    theory = born_table(sc)

    def mean_sigma(counts):
        return np.mean([estimate_s(simulate_counts(theory, NoiseModel.off(counts), s), sc, 200, s).sigma
                        for s in range(100)])

    ratio = mean_sigma(2e4) / mean_sigma(4e4)
    assert abs(ratio - np.sqrt(2)) <= 0.15 * np.sqrt(2)


def test_bootstrap_self_consistency_counting_noise(opt_d3n5):
    """With systematics off the bootstrap sigma matches the run-to-run spread."""
    sc = opt_d3n5.scenario
    theory = born_table(sc)
    s_hat, sig = [], []
    for seed in range(200):
        est = estimate_s(simulate_counts(theory, NoiseModel.off(), seed), sc, 200, seed)
        s_hat.append(est.s_hat)
        sig.append(est.sigma)
    assert abs(np.std(s_hat, ddof=1) / np.mean(sig) - 1) < 0.3


def test_default_noise_mean_shift(opt_d3n5):
    sc = opt_d3n5.scenario
    noise = NoiseModel()
    s_hat = []
    for seed in range(100):
        rec = simulate_counts(perturb_table(sc, noise, seed), noise, seed)
        s_hat.append(estimate_s(rec, sc, 20, seed).s_hat)
    # upper edge: S moved by a uniform deviation of 3 x 0.001 per probability
    shift = 3 * 0.001 * 3 * len(sc.pairs) / sc.overlap_sum
    assert opt_d3n5.s <= np.mean(s_hat) <= opt_d3n5.s + shift


def test_empty_setting_and_key_mismatch(opt_d3n3, opt_d3n5):
    sc = opt_d3n5.scenario
    pairs = tuple(pair_keys(5))
    heralds = np.full((len(pairs), 3), 10)
    heralds[2, 1] = 0
    rec = CountRecord(pairs, np.zeros_like(heralds), heralds, 0)
    with pytest.raises(EmptySetting):
        estimated_table(rec)
    good = simulate_counts(born_table(opt_d3n3.scenario), NoiseModel.off(), 0)
    with pytest.raises(KeyMismatch):
        estimate_s(good, sc, 10, 0)
    with pytest.raises(KeyMismatch):
        deviation_histogram(good, sc)


def test_deviation_histogram(opt_d3n5):
    sc = opt_d3n5.scenario
    rec = simulate_counts(born_table(sc), NoiseModel.off(1e9), 0)
    dev = deviation_histogram(rec, sc)
    assert len(dev) == 3 * 10
    assert np.max(np.abs(dev)) < 1e-3
    noisy = NoiseModel()
    rec = simulate_counts(perturb_table(sc, noisy, 1), noisy, 1)
    dev = np.array(deviation_histogram(rec, sc))
    assert 1e-4 < np.mean(np.abs(dev)) < 1e-2


def test_exact_counts_give_zero_deviation(opt_d3n3):
    sc = opt_d3n3.scenario
    theory = born_table(sc).as_array()
    heralds = np.full(theory.shape, 1 << 20)
    # only exactly representable probabilities give zero deviation; use a dyadic table
    dyadic = np.round(theory * (1 << 20)) / (1 << 20)
    rec = CountRecord(tuple(sc.pairs), (dyadic * heralds).astype(np.int64), heralds, 0)
    np.testing.assert_allclose(deviation_histogram(rec, sc), (dyadic - theory).ravel(), atol=1e-15)


def test_simulation_deterministic(opt_d3n5):
    sc = opt_d3n5.scenario
    a = estimate_s(simulate_counts(perturb_table(sc, NoiseModel(), 5), NoiseModel(), 5), sc, 30, 5)
    b = estimate_s(simulate_counts(perturb_table(sc, NoiseModel(), 5), NoiseModel(), 5), sc, 30, 5)
    assert a.s_hat == b.s_hat and a.sigma == b.sigma
    np.testing.assert_array_equal(a.bootstrap_values, b.bootstrap_values)
