import io
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from relay_sg import analytic as an
from relay_sg.model import TapProfile, build_tap_profile, effective_densities, table_one_params
from relay_sg.simulate import (
    BLOCK,
    McConfig,
    NetworkSample,
    auto_radius,
    dump_snr,
    estimate,
    estimate_density_ladder,
    sample_network,
    snr_coherent,
    snr_incoherent,
    snr_random,
    truncation_radius,
)
from relay_sg.simulate import _job

PARAMS = table_one_params()
FLAT = TapProfile.flat()
TAPS4 = build_tap_profile(10e6, 0.17e-6)


def rng(seed=0):
    return np.random.Generator(np.random.SFC64(seed))


def one_trial(amplitude_sq, gains, code=None):
    """Hand-built single-trial sample with unit shadowing; received power set via radius."""
    p = PARAMS
    g = np.asarray(amplitude_sq, dtype=float)
    # l0 p / r^4 = g  =>  r^2 = sqrt(l0 p / g)
    r2 = np.sqrt(p.pathloss_const * p.tx_snr / g)
    gains = np.asarray(gains, dtype=complex).reshape(g.size, -1)
    code = np.zeros(g.size, dtype=np.int64) if code is None else np.asarray(code)
    return NetworkSample(1, np.zeros(g.size, dtype=np.int64), r2, np.ones(g.size), gains, code)


def test_truncation_radius_formula():
    c = PARAMS.node_density * PARAMS.cone_angle * PARAMS.tx_snr * PARAMS.pathloss_const
    r = truncation_radius(PARAMS, eps=1e-3, s_min=2.0)
    # expected excluded power c r^(2-alpha) / (alpha - 2) equals eps * s_min
    assert c * r**-2 / 2 == pytest.approx(2e-3, rel=1e-12)
    with pytest.raises(ValueError):
        truncation_radius(PARAMS, eps=0.5)


def test_sample_counts_and_radii():
    smp = sample_network(PARAMS, FLAT, 300.0, rng(), trials=4000)
    mean = PARAMS.node_density * PARAMS.cone_angle * 300.0**2 / 2
    counts = smp.node_count
    assert counts.mean() == pytest.approx(mean, rel=5 * math.sqrt(mean / 4000) / mean)
    assert counts.var() == pytest.approx(mean, rel=0.1)
    assert np.all(smp.radius <= 300.0) and np.all(smp.radius > 0)
    # r^2 uniform on [0, r_max^2]
    assert np.mean(smp.radius_sq) == pytest.approx(300.0**2 / 2, rel=0.01)
    # unit-mean shadowing with 8 dB spread
    assert np.mean(smp.shadow) == pytest.approx(1.0, rel=0.03)
    assert np.std(np.log(smp.shadow)) == pytest.approx(PARAMS.shadow_sigma, rel=0.01)
    assert np.mean(smp.fading_power) == pytest.approx(1.0, rel=0.01)


def test_annulus_sampling():
    smp = sample_network(PARAMS, FLAT, 300.0, rng(), trials=50, r_min=200.0)
    assert np.all((smp.radius > 200.0) & (smp.radius <= 300.0))


def test_single_node_schemes_agree():
    smp = one_trial([2.5], [[0.6 + 0.8j]])
    assert snr_coherent(smp, PARAMS, FLAT)[0] == pytest.approx(2.5, rel=1e-12)
    assert snr_incoherent(smp, PARAMS, FLAT)[0] == pytest.approx(2.5, rel=1e-12)
    assert snr_random(smp, PARAMS, 1)[0] == pytest.approx(2.5, rel=1e-12)


def test_destructive_phases_cancel():
    smp = one_trial([1.0, 1.0], [[1.0], [-1.0]])
    assert snr_incoherent(smp, PARAMS, FLAT)[0] == pytest.approx(0.0, abs=1e-12)
    assert snr_coherent(smp, PARAMS, FLAT)[0] == pytest.approx(2.0, rel=1e-12)
    # on separate codes there is nothing to cancel
    smp = one_trial([1.0, 1.0], [[1.0], [-1.0]], code=[0, 1])
    assert snr_random(smp, PARAMS, 2)[0] == pytest.approx(2.0, rel=1e-12)


def test_multitap_evaluators():
    taps = TapProfile.from_powers([0.75, 0.25])
    smp = one_trial([1.0, 4.0], [[1.0, 1j], [1.0, -1j]])
    # coherent: 0.75*(1+4) + 0.25*(1+4); incoherent: 0.75*|1+2|^2 + 0.25*|1j-2j|^2
    assert snr_coherent(smp, PARAMS, taps)[0] == pytest.approx(5.0, rel=1e-12)
    assert snr_incoherent(smp, PARAMS, taps)[0] == pytest.approx(0.75 * 9 + 0.25 * 1, rel=1e-12)


@given(st.integers(0, 2**32))
def test_degeneracy_chain_per_sample(seed):
    smp = sample_network(PARAMS, FLAT, 200.0, rng(seed), trials=20)
    assert np.array_equal(snr_random(smp, PARAMS, 1), snr_incoherent(smp, PARAMS, FLAT))


def test_many_codes_isolate_every_node():
    # with each node on its own code, random reception adds powers like coherent
    smp = sample_network(PARAMS, FLAT, 100.0, rng(), trials=30)
    smp.code = np.arange(smp.trial.size)
    np.testing.assert_allclose(snr_random(smp, PARAMS, smp.trial.size), snr_coherent(smp, PARAMS, FLAT),
                               rtol=1e-12)


def test_evaluator_errors():
    smp = sample_network(PARAMS, FLAT, 100.0, rng(), trials=3, power_only=True)
    with pytest.raises(ValueError):
        snr_incoherent(smp, PARAMS, FLAT)
    smp = sample_network(PARAMS, TAPS4, 100.0, rng(), trials=3)
    with pytest.raises(ValueError):
        snr_random(smp, PARAMS, 2)


def test_config_validation():
    with pytest.raises(ValueError):
        McConfig(0, [1.0])
    with pytest.raises(ValueError):
        McConfig(10, [2.0, 1.0])
    with pytest.raises(ValueError):
        McConfig(10, [1.0], schemes=("magic",))
    with pytest.raises(ValueError):
        estimate(McConfig(10, [1.0], schemes=("random",)), PARAMS, TAPS4)


def test_single_trial_outage_is_zero_or_one():
    e = estimate(McConfig(1, [0.5, 5.0, 50.0], seed=3, schemes=("incoherent",)), PARAMS, FLAT)
    assert set(np.unique(e.outage["incoherent"])) <= {0.0, 1.0}


def test_determinism_across_workers_and_reruns():
    cfg = McConfig(2100, [5.0, 20.0, 80.0], seed=11, schemes=("coherent", "incoherent"))
    a = estimate(cfg.replace(workers=1), PARAMS, TAPS4)
    b = estimate(cfg.replace(workers=3), PARAMS, TAPS4)
    c = estimate(cfg.replace(workers=1), PARAMS, TAPS4)
    for k in cfg.schemes:
        assert np.array_equal(a.counts[k], b.counts[k]) and np.array_equal(a.counts[k], c.counts[k])
        assert a.capacity[k] == b.capacity[k] == c.capacity[k]


def test_dense_fields_use_smaller_blocks():
    # about 5e4 nodes per trial: 128-trial blocks keep a block under the node budget
    r = math.sqrt(2 * 5e4 / (PARAMS.node_density * PARAMS.cone_angle))
    cfg = McConfig(300, [1.0, 10.0], seed=2, schemes=("incoherent",), r_max=r)
    assert _job(cfg, PARAMS, FLAT, r).block == 128
    assert _job(cfg.replace(r_max=100.0), PARAMS, FLAT, 100.0).block == BLOCK
    a = estimate(cfg.replace(workers=1), PARAMS, FLAT)
    b = estimate(cfg.replace(workers=2), PARAMS, FLAT)
    assert np.array_equal(a.counts["incoherent"], b.counts["incoherent"])
    assert a.trials == 300


def test_worker_cap_env(monkeypatch):
    cfg = McConfig(2048, [10.0], seed=5, schemes=("incoherent",), workers=4)
    a = estimate(cfg, PARAMS, FLAT)
    monkeypatch.setenv("RELAY_SG_THREADS", "1")
    b = estimate(cfg, PARAMS, FLAT)
    assert np.array_equal(a.counts["incoherent"], b.counts["incoherent"])


def test_incoherent_matches_closed_form():
    lam_hat = effective_densities(PARAMS, FLAT).lambda_hat
    s = lam_hat**2 * np.array([0.05, 0.3, 1.0, 4.0])
    n = 20000
    e = estimate(McConfig(n, s, seed=1, schemes=("incoherent",)), PARAMS, FLAT)
    p = an.outage_inc_a4(s, lam_hat, FLAT)
    assert np.all(np.abs(e.outage["incoherent"] - p) <= 4 * np.sqrt(p * (1 - p) / n))


def test_random_matches_transform():
    from relay_sg.transform import LaplaceHandle, invert_to_cdf

    lam_hat = effective_densities(PARAMS, FLAT).lambda_hat
    s = lam_hat**2 * np.array([0.1, 0.5, 2.0])
    n = 20000
    e = estimate(McConfig(n, s, seed=2, schemes=("random",), channels=3), PARAMS, FLAT)
    p = invert_to_cdf(LaplaceHandle.for_scheme("random", lam_hat, 4.0, channels=3), s)
    assert np.all(np.abs(e.outage["random"] - p) <= 4 * np.sqrt(p * (1 - p) / n))


def test_truncation_doubling_is_inside_ci():
    cfg = McConfig(4096, [3.0, 17.0, 60.0], seed=4, schemes=("incoherent",))
    base = estimate(cfg, PARAMS, FLAT)
    wide = estimate(cfg, PARAMS, FLAT, extend_to=2 * base.r_max)
    assert wide.r_max == 2 * base.r_max
    diff = np.abs(wide.outage["incoherent"] - base.outage["incoherent"])
    assert np.all(diff <= base.half_width["incoherent"])


def test_auto_radius_reference():
    cfg = McConfig(10, [0.5, 1.0], schemes=("coherent", "incoherent"))
    assert auto_radius(cfg, PARAMS, FLAT) == pytest.approx(truncation_radius(PARAMS, FLAT, 1e-3, 0.5))
    lam_hat = effective_densities(PARAMS, FLAT).lambda_hat
    cfg = cfg.replace(schemes=("incoherent",))
    assert auto_radius(cfg, PARAMS, FLAT) == pytest.approx(truncation_radius(PARAMS, FLAT, 1e-3, lam_hat**2))
    assert auto_radius(cfg.replace(r_max=123.0), PARAMS, FLAT) == 123.0


def test_density_ladder_is_monotone_with_common_numbers():
    dens = PARAMS.node_density * np.array([0.5, 0.7, 1.0, 1.4, 2.0])
    lam_bar = effective_densities(PARAMS, TAPS4).lambda_bar
    cfg = McConfig(3000, lam_bar**2 * np.array([0.5, 1.0, 4.0]), seed=8,
                   schemes=("coherent", "incoherent"))
    ladder = estimate_density_ladder(cfg, PARAMS, TAPS4, dens)
    assert len(ladder) == 5
    for k in cfg.schemes:
        # thinning one field: outage at a fixed threshold can only fall as density rises
        counts = np.array([e.counts[k] for e in ladder])
        assert np.all(np.diff(counts, axis=0) <= 0)


def test_capacity_stable_under_trial_doubling():
    cfg = McConfig(4096, [1.0], seed=9, schemes=("incoherent",))
    a = estimate(cfg, PARAMS, FLAT)
    b = estimate(cfg.replace(trials=8192), PARAMS, FLAT)
    assert math.isfinite(a.capacity["incoherent"])
    se = math.hypot(a.capacity_se["incoherent"], b.capacity_se["incoherent"])
    assert abs(a.capacity["incoherent"] - b.capacity["incoherent"]) < 4 * se


def test_dump_snr_stream():
    cfg = McConfig(1500, [1.0], seed=6, schemes=("incoherent",))
    buf = io.StringIO()
    n = dump_snr(cfg, PARAMS, FLAT, "incoherent", buf)
    lines = buf.getvalue().splitlines()
    assert n == len(lines) == 1500
    idx, snr = zip(*(line.split("\t") for line in lines))
    assert list(map(int, idx)) == list(range(1500))
    x = np.array(snr, dtype=float)
    e = estimate(cfg, PARAMS, FLAT)
    assert np.mean(x < 1.0) == e.outage["incoherent"][0]
