"""Classification of spiked perturbation eigenvalues and their limits.

A spike theta outside supp(nu) produces, in the large-matrix limit, an
eigenvalue packet that either detaches from the bulk (theta inside the
admissible set, limit phi(theta)), sticks to a support edge, collapses to
zero, or converges to an interior quantile when theta sits between two
components of supp(nu) covered by the same complement interval.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import measure, stieltjes, subordination
from .errors import AmbiguousSpike, DomainError
from .subordination import ModelParams

OUTLIER = "OUTLIER"
RIGHT_EDGE = "RIGHT_EDGE"
LEFT_EDGE = "LEFT_EDGE"
ZERO = "ZERO"
QUANTILE = "QUANTILE"

#: Spikes closer than this to an admissible-set boundary are reported as
#: ambiguous rather than classified (the prediction flips discontinuously).
BOUNDARY_GUARD = 1e-9


@dataclass(frozen=True)
class SpikeSpec:
    """Strictly descending positive spikes with their multiplicities."""

    thetas: tuple[float, ...] = ()
    multiplicities: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        thetas = tuple(float(t) for t in self.thetas)
        mults = tuple(int(k) for k in self.multiplicities)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "multiplicities", mults)
        if len(thetas) != len(mults):
            raise DomainError("thetas and multiplicities must have equal length")
        if any(t <= 0.0 for t in thetas):
            raise DomainError("spikes must be positive")
        if any(a <= b for a, b in zip(thetas, thetas[1:])):
            raise DomainError("spikes must be strictly descending")
        if any(k < 1 for k in mults):
            raise DomainError("multiplicities must be positive integers")

    @property
    def r(self) -> int:
        return sum(self.multiplicities)

    def to_dict(self) -> dict:
        return {"thetas": list(self.thetas),
                "multiplicities": list(self.multiplicities)}

    @classmethod
    def from_dict(cls, data: dict) -> "SpikeSpec":
        return cls(thetas=tuple(data.get("thetas", ())),
                   multiplicities=tuple(data.get("multiplicities", ())))


@dataclass(frozen=True)
class SpikeOutcome:
    """Predicted limit for one spike packet.

    ``rank_start`` is resolved against a concrete matrix size by
    ``predicted_spectrum_summary`` and is None straight out of ``classify``.
    ``alpha`` is set for QUANTILE outcomes only.
    """

    theta: float
    case_tag: str
    limit: float
    rank_start: int | None = None
    alpha: float | None = None

    def to_dict(self) -> dict:
        out = {"theta": self.theta, "case": self.case_tag, "limit": self.limit}
        if self.rank_start is not None:
            out["rank_start"] = self.rank_start
        if self.alpha is not None:
            out["alpha"] = self.alpha
        return out


def classify(p: ModelParams, s: SpikeSpec) -> list[SpikeOutcome]:
    """Classify every spike against the admissible set and the support.

    Case map: theta in the admissible set gives OUTLIER with limit
    phi(theta); otherwise theta lies in some complement interval [u_l, v_l]
    and the outcome depends on its position relative to the components of
    supp(nu) inside that interval.  Right of all of them: RIGHT_EDGE
    sticking to the upper edge of support interval l (the right edge is the
    limit produced by the separation argument, which is what the simulations
    confirm).  Left of all of them: ZERO when l = 1 and zero sits in the
    support, else LEFT_EDGE.  Between two of them: QUANTILE at level
    alpha = nu((-inf, theta]).
    """
    sup = subordination.support(p)
    adm = sup.admissible
    comps = measure.support_of(p.nu)
    out: list[SpikeOutcome] = []
    for theta in s.thetas:
        if comps.distance(theta) <= measure.ATOL:
            raise DomainError(f"spike {theta!r} lies on supp(nu)")
        if adm.distance_to_boundary(theta) < BOUNDARY_GUARD:
            raise AmbiguousSpike(
                f"spike {theta!r} is within {BOUNDARY_GUARD} of an "
                "admissible-set boundary")
        if adm.contains(theta):
            out.append(SpikeOutcome(theta=theta, case_tag=OUTLIER,
                                    limit=subordination.phi(p, theta)))
            continue
        l = adm.locate_complement(theta)
        if l is None:
            raise DomainError(f"spike {theta!r} could not be located")
        inside = [iv for iv in comps.intervals
                  if adm.u[l] <= iv[0] and iv[1] <= adm.v[l]]
        if theta > max(hi for _, hi in inside):
            out.append(SpikeOutcome(theta=theta, case_tag=RIGHT_EDGE,
                                    limit=sup.intervals[l][1]))
        elif theta < min(lo for lo, _ in inside):
            if l == 0 and sup.zero_in_support:
                out.append(SpikeOutcome(theta=theta, case_tag=ZERO, limit=0.0))
            else:
                out.append(SpikeOutcome(theta=theta, case_tag=LEFT_EDGE,
                                        limit=sup.intervals[l][0]))
        else:
            alpha = measure.cdf(p.nu, theta)
            out.append(SpikeOutcome(theta=theta, case_tag=QUANTILE,
                                    limit=stieltjes.quantile_mu(p, alpha),
                                    alpha=alpha))
    return out


def _count_above(p: ModelParams, s: SpikeSpec, n: int, theta: float) -> int:
    """Eigenvalues of the deterministic perturbation exceeding theta."""
    above = sum(k for t, k in zip(s.thetas, s.multiplicities) if t > theta)
    bulk = n - s.r
    for i in range(1, bulk + 1):
        if measure.quantile(p.nu, (i - 0.5) / bulk) > theta:
            above += 1
    return above


def predicted_spectrum_summary(p: ModelParams, s: SpikeSpec,
                               n: int) -> list[tuple[tuple[int, int | None], float]]:
    """Rank ranges with predicted limits for a matrix of size n.

    Emits one entry per spike packet (descending rank range, predicted
    limit), then an open-ended entry at the first non-outlier rank for the
    bulk right edge and an open-ended entry at rank n for the bulk left
    limit.  Rank ranges are 1-based; None marks an open end.
    """
    if n < s.r:
        raise DomainError(f"matrix size {n} cannot hold {s.r} spiked directions")
    sup = subordination.support(p)
    outcomes = classify(p, s)
    entries: list[tuple[tuple[int, int | None], float]] = []
    top_outliers = 0
    for outcome, k in zip(outcomes, s.multiplicities):
        start = 1 + _count_above(p, s, n, outcome.theta)
        entries.append(((start, start + k - 1), outcome.limit))
        if outcome.case_tag == OUTLIER and outcome.theta > sup.admissible.v[-1]:
            top_outliers += k
    entries.append(((top_outliers + 1, None), sup.intervals[-1][1]))
    entries.append(((n, None), sup.intervals[0][0]))
    entries.sort(key=lambda e: (e[0][0], e[0][1] is None))
    return entries
