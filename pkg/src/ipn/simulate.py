"""Finite-size sampling of information-plus-noise matrices and verification.

The signal matrix is rectangular diagonal: spiked directions carry
sqrt(theta_j), the rest carry square roots of deterministic quantiles of nu
(so the empirical signal spectrum converges to nu with no sampling noise and
stays uniformly close to supp(nu)).  Eigenvalues of the sample are squared
singular values of sigma*X/sqrt(N) + A; the noise stream is counter-based
per (seed, trial), so trials are reproducible and embarrassingly parallel.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import measure, spikes as spikes_mod, stieltjes, subordination
from .errors import DomainError, PreconditionError
from .spikes import SpikeSpec
from .subordination import ModelParams

ENTRY_DISTS = ("complex-gaussian", "real-gaussian", "rademacher-complex")

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SimConfig:
    """One reproducible Monte Carlo experiment."""

    n: int
    N: int
    model: ModelParams
    entry_dist: str = "complex-gaussian"
    spikes: SpikeSpec = field(default_factory=SpikeSpec)
    seed: int = 0
    trials: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "seed", int(self.seed))
        object.__setattr__(self, "trials", int(self.trials))
        if not 1 <= self.n <= self.N:
            raise ValueError(f"need 1 <= n <= N, got n={self.n}, N={self.N}")
        if self.entry_dist not in ENTRY_DISTS:
            raise ValueError(f"entry_dist must be one of {ENTRY_DISTS}")
        if self.trials < 1:
            raise ValueError("trials must be a positive integer")
        if self.spikes.r > self.n:
            raise ValueError("spike multiplicities exceed the matrix size")


@dataclass(frozen=True, eq=False)
class EigenSample:
    """Descending eigenvalues of one sampled matrix and of its signal part."""

    eigenvalues: np.ndarray
    a_eigenvalues: np.ndarray
    trial_index: int
    seed_used: int


@dataclass(frozen=True)
class SeparationReport:
    """Per-trial outcome of the exact-separation check for one gap."""

    gap: tuple[float, float]
    omega_gap: tuple[float, float]
    i_N: int
    a_count_ok: tuple[bool, ...]
    m_count_ok: tuple[bool, ...]
    pass_fraction: float

    def to_dict(self) -> dict:
        return {
            "gap": list(self.gap),
            "omega_gap": list(self.omega_gap),
            "i_N": self.i_N,
            "a_count_ok": list(self.a_count_ok),
            "m_count_ok": list(self.m_count_ok),
            "pass_fraction": self.pass_fraction,
        }


@dataclass(frozen=True)
class InclusionReport:
    """Eigenvalues straying farther than epsilon from the predicted set."""

    epsilon: float
    offenders: tuple[tuple[float, ...], ...]
    trials_passed: tuple[bool, ...]
    pass_fraction: float

    @property
    def all_pass(self) -> bool:
        return all(self.trials_passed)

    def to_dict(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "offenders": [list(o) for o in self.offenders],
            "trials_passed": list(self.trials_passed),
            "pass_fraction": self.pass_fraction,
        }


def build_A(model: ModelParams, spikes: SpikeSpec, n: int, N: int) -> np.ndarray:
    """Diagonal entries of the n x N signal matrix.

    The first r entries are sqrt(theta_j) repeated with multiplicity; the
    remaining n - r are square roots of nu-quantiles at mid-levels
    (i - 1/2)/(n - r), which keep the empirical signal law converging to nu
    with vanishing distance to its support.
    """
    if spikes.r > n:
        raise DomainError("spike multiplicities exceed the matrix size")
    if n > N:
        raise DomainError(f"need n <= N, got n={n}, N={N}")
    d = []
    for theta, k in zip(spikes.thetas, spikes.multiplicities):
        d.extend([math.sqrt(theta)] * k)
    bulk = n - spikes.r
    for i in range(1, bulk + 1):
        d.append(math.sqrt(measure.quantile(model.nu, (i - 0.5) / bulk)))
    return np.asarray(d, dtype=float)


def _noise(rng: np.random.Generator, shape: tuple[int, int],
           entry_dist: str) -> np.ndarray:
    if entry_dist == "complex-gaussian":
        return ((rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
                / math.sqrt(2.0))
    if entry_dist == "real-gaussian":
        return rng.standard_normal(shape)
    # rademacher-complex: uniform on the fourth roots of unity, |X| = 1
    table = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])
    return table[rng.integers(0, 4, size=shape)]


def _trial_rng(seed: int, trial: int) -> np.random.Generator:
    key = np.array([seed & _MASK64, trial & _MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_eigenvalues(cfg: SimConfig, trial: int) -> EigenSample:
    """Eigenvalues of one sampled matrix, descending, deterministic in (seed, trial).

    Computed as squared singular values of sigma*X/sqrt(N) + A; the matrix
    of squares is never formed.  With sigma = 0 the signal eigenvalues are
    returned exactly.
    """
    d = build_A(cfg.model, cfg.spikes, cfg.n, cfg.N)
    a_eigs = np.sort(d * d)[::-1].copy()
    if cfg.model.sigma == 0.0:
        return EigenSample(eigenvalues=a_eigs.copy(), a_eigenvalues=a_eigs,
                           trial_index=trial, seed_used=cfg.seed)
    rng = _trial_rng(cfg.seed, trial)
    Y = _noise(rng, (cfg.n, cfg.N), cfg.entry_dist) * (cfg.model.sigma
                                                       / math.sqrt(cfg.N))
    idx = np.arange(cfg.n)
    Y[idx, idx] = Y[idx, idx] + d
    try:
        svals = np.linalg.svd(Y, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            f"singular value decomposition failed on trial {trial}: {exc}"
        ) from exc
    return EigenSample(eigenvalues=svals * svals, a_eigenvalues=a_eigs,
                       trial_index=trial, seed_used=cfg.seed)


def run_trials(cfg: SimConfig) -> list[EigenSample]:
    """All trials of the experiment; IPN_THREADS > 1 samples them in parallel."""
    workers = int(os.environ.get("IPN_THREADS", "1") or "1")
    if workers > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(lambda t: sample_eigenvalues(cfg, t),
                                 range(cfg.trials)))
    return [sample_eigenvalues(cfg, t) for t in range(cfg.trials)]


def _check_gap_clear(intervals, a: float, b: float) -> bool:
    """True when [a, b] avoids every interval and no interval sits inside."""
    for lo, hi in intervals:
        if max(lo - b, a - hi, 0.0) == 0.0:
            return False
    return True


def verify_separation(cfg: SimConfig, gap: tuple[float, float]) -> SeparationReport:
    """Check the exact-separation correspondence over a spectral gap [a, b].

    The index i_N counts signal eigenvalues above omega(b); separation holds
    for a trial when the signal spectrum avoids [omega(a), omega(b)] and the
    sample spectrum splits at i_N around [a, b].
    """
    a, b = float(gap[0]), float(gap[1])
    if not a < b:
        raise PreconditionError(f"gap must satisfy a < b, got {gap!r}")
    model = cfg.model
    if model.sigma == 0.0:
        comps = measure.support_of(model.nu)
        if not _check_gap_clear(comps.intervals, a, b):
            raise PreconditionError("gap overlaps supp(nu) in the noiseless case")
        omega_a, omega_b = a, b
    else:
        sup = subordination.support(model)
        if not _check_gap_clear(sup.intervals, a, b):
            raise PreconditionError("gap overlaps the computed support")
        omega_a = subordination.omega(model, a)
        omega_b = subordination.omega(model, b)
        if model.c < 1.0 and omega_a <= 0.0:
            raise PreconditionError(
                "separation requires omega(a) > 0 when c < 1")

    samples = run_trials(cfg)
    a_eigs = samples[0].a_eigenvalues
    i_N = int(np.sum(a_eigs > omega_b))
    a_ok_list = []
    m_ok_list = []
    for sample in samples:
        ae = sample.a_eigenvalues
        a_ok = i_N == cfg.n or ae[i_N] < omega_a
        ev = sample.eigenvalues
        m_ok = ((i_N == cfg.n or ev[i_N] < a)
                and (i_N == 0 or ev[i_N - 1] > b))
        a_ok_list.append(bool(a_ok))
        m_ok_list.append(bool(m_ok))
    passed = [x and y for x, y in zip(a_ok_list, m_ok_list)]
    return SeparationReport(gap=(a, b), omega_gap=(omega_a, omega_b), i_N=i_N,
                            a_count_ok=tuple(a_ok_list),
                            m_count_ok=tuple(m_ok_list),
                            pass_fraction=sum(passed) / len(passed))


def verify_inclusion(cfg: SimConfig, epsilon: float) -> InclusionReport:
    """Flag eigenvalues farther than epsilon from the predicted spectral set.

    The set is the computed support plus the predicted outlier locations
    (plus zero when c = 1 puts mass there).
    """
    model = cfg.model
    if model.sigma == 0.0:
        intervals = list(measure.support_of(model.nu).intervals)
        points = list(cfg.spikes.thetas)
    else:
        sup = subordination.support(model)
        intervals = list(sup.intervals)
        outcomes = spikes_mod.classify(model, cfg.spikes)
        points = [o.limit for o in outcomes if o.case_tag == spikes_mod.OUTLIER]
        if model.c == 1.0 and sup.zero_in_support:
            points.append(0.0)

    def dist(x: float) -> float:
        d = min(max(lo - x, x - hi, 0.0) for lo, hi in intervals)
        for pt in points:
            d = min(d, abs(x - pt))
        return d

    offenders = []
    passed = []
    for sample in run_trials(cfg):
        bad = tuple(float(x) for x in sample.eigenvalues if dist(float(x)) > epsilon)
        offenders.append(bad)
        passed.append(not bad)
    return InclusionReport(epsilon=float(epsilon), offenders=tuple(offenders),
                           trials_passed=tuple(passed),
                           pass_fraction=sum(passed) / len(passed))


def empirical_cdf_distance(cfg: SimConfig) -> float:
    """Kolmogorov-Smirnov distance between pooled eigenvalues and the model CDF.

    Returns NaN (with a diagnostic warning) at sigma = 0, where the density
    inversion does not apply.
    """
    if cfg.model.sigma == 0.0:
        warnings.warn("empirical_cdf_distance is undefined at sigma = 0; "
                      "returning NaN", stacklevel=2)
        return math.nan
    pooled = np.sort(np.concatenate([s.eigenvalues for s in run_trials(cfg)]))
    m = len(pooled)
    model_cdf = np.array([stieltjes.cdf_mu(cfg.model, float(x)) for x in pooled])
    upper = np.max(np.arange(1, m + 1) / m - model_cdf)
    lower = np.max(model_cdf - np.arange(0, m) / m)
    return float(max(upper, lower))
