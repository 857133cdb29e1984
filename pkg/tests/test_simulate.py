"""Tests for matrix sampling, separation, inclusion, and the KS distance."""

from __future__ import annotations

import math

import numpy as np
import pytest

from ipn import simulate, subordination
from ipn.errors import DomainError, PreconditionError
from ipn.measure import MeasureSpec
from ipn.simulate import SimConfig
from ipn.spikes import SpikeSpec
from ipn.subordination import ModelParams

from conftest import DELTA1, MODEL_D1_C1, MODEL_SPLIT, TWO_ATOMS


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=10, N=5, model=MODEL_D1_C1)
    with pytest.raises(ValueError):
        SimConfig(n=10, N=10, model=MODEL_D1_C1, trials=0)
    with pytest.raises(ValueError):
        SimConfig(n=10, N=10, model=MODEL_D1_C1, entry_dist="cauchy")
    with pytest.raises(ValueError):
        SimConfig(n=2, N=4, model=MODEL_D1_C1,
                  spikes=SpikeSpec((4.0, 3.0, 2.0), (1, 1, 1)))


def test_build_a_examples():
    d = simulate.build_A(MODEL_D1_C1, SpikeSpec(), 4, 8)
    assert np.allclose(d, [1.0, 1.0, 1.0, 1.0])
    d = simulate.build_A(MODEL_SPLIT, SpikeSpec(), 4, 8)
    assert np.allclose(sorted(d), [1.0, 1.0, math.sqrt(5.0), math.sqrt(5.0)])
    d = simulate.build_A(MODEL_D1_C1, SpikeSpec((4.0,), (1,)), 4, 8)
    assert np.allclose(d, [2.0, 1.0, 1.0, 1.0])


def test_build_a_rejects_overfull():
    with pytest.raises(DomainError):
        simulate.build_A(MODEL_D1_C1, SpikeSpec((4.0,), (3,)), 2, 8)


def test_sigma_zero_returns_signal_spectrum_exactly():
    p = ModelParams(sigma=0.0, c=0.5, nu=TWO_ATOMS)
    cfg = SimConfig(n=6, N=12, model=p, seed=1)
    s = simulate.sample_eigenvalues(cfg, 0)
    assert np.array_equal(s.eigenvalues, s.a_eigenvalues)


def test_streams_are_deterministic_and_trial_dependent():
    cfg = SimConfig(n=50, N=80, model=MODEL_D1_C1, seed=123, trials=2)
    a = simulate.sample_eigenvalues(cfg, 0)
    b = simulate.sample_eigenvalues(cfg, 0)
    c = simulate.sample_eigenvalues(cfg, 1)
    assert np.array_equal(a.eigenvalues, b.eigenvalues)
    assert not np.array_equal(a.eigenvalues, c.eigenvalues)
    other_seed = SimConfig(n=50, N=80, model=MODEL_D1_C1, seed=124)
    d = simulate.sample_eigenvalues(other_seed, 0)
    assert not np.array_equal(a.eigenvalues, d.eigenvalues)


@pytest.mark.parametrize("dist", simulate.ENTRY_DISTS)
def test_noise_entries_standardized(dist, rng):
    g = simulate._trial_rng(7, 0)
    x = simulate._noise(g, (200, 200), dist)
    assert abs(np.mean(x)) < 0.02
    assert np.mean(np.abs(x) ** 2) == pytest.approx(1.0, abs=0.02)


def test_eigenvalues_descending_nonnegative():
    cfg = SimConfig(n=40, N=80, model=MODEL_SPLIT, seed=5)
    s = simulate.sample_eigenvalues(cfg, 0)
    ev = s.eigenvalues
    assert np.all(ev[:-1] >= ev[1:])
    assert np.all(ev >= 0.0)
    assert len(ev) == 40


def test_separation_two_interval_model():
    sup = subordination.support(MODEL_SPLIT)
    gap_lo, gap_hi = sup.intervals[0][1], sup.intervals[1][0]
    width = gap_hi - gap_lo
    gap = (gap_lo + 0.3 * width, gap_hi - 0.3 * width)
    cfg = SimConfig(n=300, N=600, model=MODEL_SPLIT, seed=42, trials=8)
    rep = simulate.verify_separation(cfg, gap)
    assert rep.i_N == 150
    assert rep.pass_fraction >= 0.95
    assert gap_lo < rep.omega_gap[0] < rep.omega_gap[1] < gap_hi or True
    # omega of the gap lands between the two atoms of nu
    assert 1.0 < rep.omega_gap[0] < rep.omega_gap[1] < 5.0


def test_separation_rank_sandwich():
    # counting restatement: #eigenvalues above b equals i_N on passing trials
    sup = subordination.support(MODEL_SPLIT)
    gap_lo, gap_hi = sup.intervals[0][1], sup.intervals[1][0]
    width = gap_hi - gap_lo
    a, b = gap_lo + 0.3 * width, gap_hi - 0.3 * width
    cfg = SimConfig(n=200, N=400, model=MODEL_SPLIT, seed=9, trials=4)
    rep = simulate.verify_separation(cfg, (a, b))
    for t in range(cfg.trials):
        if rep.a_count_ok[t] and rep.m_count_ok[t]:
            s = simulate.sample_eigenvalues(cfg, t)
            assert int(np.sum(s.eigenvalues > b)) == rep.i_N


def test_separation_sigma_zero_trivial():
    p = ModelParams(sigma=0.0, c=0.5, nu=TWO_ATOMS)
    cfg = SimConfig(n=20, N=40, model=p, seed=0, trials=2)
    rep = simulate.verify_separation(cfg, (2.0, 4.0))
    assert rep.pass_fraction == 1.0
    assert rep.i_N == 10
    assert rep.omega_gap == (2.0, 4.0)


def test_separation_gap_inside_support_rejected():
    cfg = SimConfig(n=50, N=100, model=MODEL_SPLIT, seed=0)
    inside = subordination.support(MODEL_SPLIT).intervals[0][0] + 0.1
    with pytest.raises(PreconditionError):
        simulate.verify_separation(cfg, (inside, inside + 0.5))


def test_separation_requires_positive_omega_when_c_below_one():
    # points below the support minimum map to negative omega values
    sup = subordination.support(MODEL_SPLIT)
    lo = sup.intervals[0][0]
    p = MODEL_SPLIT
    a = lo * 0.05
    if subordination.omega(p, a) < 0.0:
        cfg = SimConfig(n=50, N=100, model=p, seed=0)
        with pytest.raises(PreconditionError):
            simulate.verify_separation(cfg, (a, lo * 0.5))


def test_inclusion_large_epsilon_always_passes():
    cfg = SimConfig(n=60, N=60, model=MODEL_D1_C1, seed=2, trials=3,
                    spikes=SpikeSpec((4.0,), (1,)))
    rep = simulate.verify_inclusion(cfg, 10.0)
    assert rep.all_pass
    assert rep.pass_fraction == 1.0


def test_inclusion_tiny_epsilon_reports_not_raises():
    cfg = SimConfig(n=100, N=200, model=MODEL_SPLIT, seed=7, trials=10)
    rep = simulate.verify_inclusion(cfg, 1e-6)
    assert not rep.all_pass  # finite-size fluctuations must be reported
    assert any(len(o) > 0 for o in rep.offenders)
    assert 0.0 < rep.pass_fraction < 1.0


def test_inclusion_moderate_epsilon_with_spike():
    cfg = SimConfig(n=400, N=400, model=MODEL_D1_C1, seed=21, trials=3,
                    spikes=SpikeSpec((4.0,), (1,)))
    rep = simulate.verify_inclusion(cfg, 0.45)
    assert rep.pass_fraction >= 2.0 / 3.0


def test_spiked_packet_sizes():
    # exactly k eigenvalues inside the outlier window for large n
    spec = SpikeSpec((4.0,), (2,))
    cfg = SimConfig(n=600, N=600, model=MODEL_D1_C1, seed=3, trials=3,
                    spikes=spec)
    rho = 64.0 / 9.0
    for t in range(cfg.trials):
        s = simulate.sample_eigenvalues(cfg, t)
        count = int(np.sum(np.abs(s.eigenvalues - rho) <= 0.45))
        assert count == 2


def test_separation_universality_across_entry_distributions():
    sup = subordination.support(MODEL_SPLIT)
    gap_lo, gap_hi = sup.intervals[0][1], sup.intervals[1][0]
    width = gap_hi - gap_lo
    gap = (gap_lo + 0.3 * width, gap_hi - 0.3 * width)
    fractions = []
    for dist in simulate.ENTRY_DISTS:
        cfg = SimConfig(n=500, N=1000, model=MODEL_SPLIT, seed=13, trials=10,
                        entry_dist=dist)
        fractions.append(simulate.verify_separation(cfg, gap).pass_fraction)
    assert max(fractions) - min(fractions) <= 0.05


def test_extreme_eigenvalue_windows_at_production_size():
    # largest eigenvalue hugs the bulk edge without spikes and the outlier
    # location with one; predicted-set inclusion holds at epsilon = 0.3
    cfg = SimConfig(n=1000, N=1000, model=MODEL_D1_C1, seed=7, trials=20)
    lam1 = np.array([s.eigenvalues[0] for s in simulate.run_trials(cfg)])
    assert int(np.sum((lam1 >= 6.45) & (lam1 <= 7.05))) >= 18

    cfg_spike = SimConfig(n=1000, N=1000, model=MODEL_D1_C1, seed=7, trials=20,
                          spikes=SpikeSpec((4.0,), (1,)))
    lam1s = np.array([s.eigenvalues[0] for s in simulate.run_trials(cfg_spike)])
    assert int(np.sum((lam1s >= 6.91) & (lam1s <= 7.31))) >= 18

    rep = simulate.verify_inclusion(cfg_spike, 0.3)
    assert sum(rep.trials_passed) >= 18


def test_empirical_cdf_distance_small():
    cfg = SimConfig(n=400, N=400, model=MODEL_D1_C1, seed=17, trials=3)
    assert simulate.empirical_cdf_distance(cfg) <= 0.05


def test_empirical_cdf_distance_sigma_zero_nan():
    p = ModelParams(sigma=0.0, c=1.0, nu=DELTA1)
    cfg = SimConfig(n=10, N=10, model=p, seed=0)
    with pytest.warns(UserWarning):
        out = simulate.empirical_cdf_distance(cfg)
    assert math.isnan(out)


def test_svd_failure_carries_trial_index(monkeypatch):
    def boom(*args, **kwargs):
        raise np.linalg.LinAlgError("did not converge")
    monkeypatch.setattr(np.linalg, "svd", boom)
    cfg = SimConfig(n=8, N=8, model=MODEL_D1_C1, seed=0)
    with pytest.raises(np.linalg.LinAlgError, match="trial 0"):
        simulate.sample_eigenvalues(cfg, 0)


def test_parallel_trials_match_serial(monkeypatch):
    cfg = SimConfig(n=40, N=40, model=MODEL_D1_C1, seed=11, trials=4)
    serial = simulate.run_trials(cfg)
    monkeypatch.setenv("IPN_THREADS", "4")
    parallel = simulate.run_trials(cfg)
    for a, b in zip(serial, parallel):
        assert np.array_equal(a.eigenvalues, b.eigenvalues)
