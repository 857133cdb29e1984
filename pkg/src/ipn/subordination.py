"""Forward/inverse spectral maps for the information-plus-noise limit law.

Everything here is driven by two scalar functions of the base measure nu and
the parameters (sigma, c):

* ``phi``    maps base-measure coordinates to limit-spectrum coordinates,
* ``omega``  is its inverse on the admissible set.

The admissible set is the open subset of the complement of supp(nu) where
``phi`` is increasing and the Stieltjes transform of nu stays above the
threshold -1/(sigma^2 c).  Its canonical form is a finite union of open
intervals whose complement [u_1,v_1], ..., [u_p,v_p] covers supp(nu); the
support of the limit law is the image of those complement intervals under
the one-sided limits of ``phi``.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from . import measure
from .errors import ConvergenceError, DomainError
from .measure import MeasureSpec

#: Sign of phi' below this magnitude is treated as a boundary value (the
#: admissible set is open, so such points are excluded).
PHI_PRIME_FLOOR = 1e-12

#: Absolute precision of isolated admissible-set boundaries.
BOUNDARY_XTOL = 1e-11

_SCAN_POINTS = 4096
_SCAN_POINTS_MAX = 1 << 16


@dataclass(frozen=True)
class ModelParams:
    """One information-plus-noise limit law: noise scale, ratio, base measure.

    ``sigma`` may be zero only as the degenerate noiseless limit used by
    tests and by the simulator; the spectral-map operations require
    ``sigma > 0``.
    """

    sigma: float
    c: float
    nu: MeasureSpec

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "c", float(self.c))
        if self.sigma < 0.0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma!r}")
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"c must be in (0, 1], got {self.c!r}")
        if not isinstance(self.nu, MeasureSpec):
            raise ValueError("nu must be a MeasureSpec")

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "c": self.c, "nu": self.nu.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "ModelParams":
        return cls(sigma=data["sigma"], c=data["c"],
                   nu=MeasureSpec.from_dict(data["nu"]))


@dataclass(frozen=True)
class AdmissibleSet:
    """Boundaries u_1 < v_1 < ... < u_p < v_p of the admissible set.

    The set itself is (-inf,u_1) U (v_1,u_2) U ... U (v_p,+inf); the closed
    intervals [u_l,v_l] of the complement each meet supp(nu) and together
    cover it.
    """

    boundaries: tuple[float, ...]

    def __post_init__(self) -> None:
        b = tuple(float(x) for x in self.boundaries)
        object.__setattr__(self, "boundaries", b)
        if len(b) < 2 or len(b) % 2:
            raise ValueError("boundaries must be u_1,v_1,...,u_p,v_p")
        if any(x >= y for x, y in zip(b, b[1:])):
            raise ValueError("boundaries must be strictly increasing")

    @property
    def p(self) -> int:
        return len(self.boundaries) // 2

    @property
    def u(self) -> tuple[float, ...]:
        return self.boundaries[0::2]

    @property
    def v(self) -> tuple[float, ...]:
        return self.boundaries[1::2]

    def components(self) -> list[tuple[float, float]]:
        """Open intervals of the admissible set, outermost ones unbounded."""
        out = [(-math.inf, self.u[0])]
        for l in range(self.p - 1):
            out.append((self.v[l], self.u[l + 1]))
        out.append((self.v[-1], math.inf))
        return out

    def contains(self, x: float) -> bool:
        return any(lo < x < hi for lo, hi in self.components())

    def locate_complement(self, x: float) -> int | None:
        """Index l (0-based) with u_l <= x <= v_l, or None."""
        for l in range(self.p):
            if self.u[l] <= x <= self.v[l]:
                return l
        return None

    def distance_to_boundary(self, x: float) -> float:
        return min(abs(x - b) for b in self.boundaries)


@dataclass(frozen=True)
class SupportResult:
    """Support intervals of the limit law plus the zero-membership flag."""

    intervals: tuple[tuple[float, float], ...]
    zero_in_support: bool
    admissible: AdmissibleSet

    def distance(self, x: float) -> float:
        return min(max(lo - x, x - hi, 0.0) for lo, hi in self.intervals)

    def to_dict(self) -> dict:
        return {
            "intervals": [[lo, hi] for lo, hi in self.intervals],
            "zero_in_support": self.zero_in_support,
            "boundaries": {"u": list(self.admissible.u),
                           "v": list(self.admissible.v)},
        }


def phi(p: ModelParams, x: float) -> float:
    """Forward spectral map x*(1 + c*s^2*g(x))^2 + s^2*(1-c)*(1 + c*s^2*g(x)).

    Defined for real x away from supp(nu).  At sigma = 0 this reduces to the
    identity, which is the degenerate limit exposed for testing.
    """
    g = measure.g_nu(p.nu, float(x))
    a = 1.0 + p.c * p.sigma ** 2 * g
    return x * a * a + p.sigma ** 2 * (1.0 - p.c) * a


def phi_prime(p: ModelParams, x: float) -> float:
    """Derivative of ``phi`` at real x away from supp(nu)."""
    s2c = p.c * p.sigma ** 2
    g = measure.g_nu(p.nu, float(x))
    gp = measure.g_nu_prime(p.nu, float(x))
    a = 1.0 + s2c * g
    return a * a + 2.0 * x * a * s2c * gp + p.sigma ** 2 * (1.0 - p.c) * s2c * gp


def _phi_prime_values(p: ModelParams, xs: np.ndarray) -> np.ndarray:
    s2c = p.c * p.sigma ** 2
    g = measure._g_values(p.nu, xs)
    gp = measure._g_prime_values(p.nu, xs)
    a = 1.0 + s2c * g
    return a * a + 2.0 * xs * a * s2c * gp + p.sigma ** 2 * (1.0 - p.c) * s2c * gp


def _require_positive_sigma(p: ModelParams) -> None:
    if p.sigma <= 0.0:
        raise DomainError("operation requires sigma > 0")


# ---------------------------------------------------------------------------
# Admissible-set isolation
# ---------------------------------------------------------------------------

def _condition_holds(p: ModelParams, x: float, thr: float) -> bool:
    return (measure.g_nu(p.nu, x) > thr
            and phi_prime(p, x) > PHI_PRIME_FLOOR)


def _window(p: ModelParams, gap_lo: float, gap_hi: float,
            thr: float) -> tuple[float, float]:
    """Finite scan window for a gap, extended until unbounded tails are good.

    The admissible set contains a neighborhood of -inf and +inf, so doubling
    the window until both the edge and a geometric tail of probe points
    satisfy the defining conditions is guaranteed to terminate.
    """
    s = p.sigma
    pad = 1.0 + 4.0 * s * s * (1.0 + math.sqrt(p.c)) ** 2
    if math.isinf(gap_lo):
        lo = gap_hi - pad
        for _ in range(200):
            probes = [lo - k * max(1.0, abs(lo)) for k in (0.0, 1.0, 3.0, 7.0)]
            if all(_condition_holds(p, q, thr) for q in probes):
                break
            lo = gap_hi - 2.0 * (gap_hi - lo)
        else:
            raise ConvergenceError("could not bound the admissible set on the left")
    else:
        lo = gap_lo
    if math.isinf(gap_hi):
        base = max(gap_lo, 0.0)
        hi = (math.sqrt(base) + s * (1.0 + math.sqrt(p.c))) ** 2 + pad
        hi = max(hi, gap_lo + 1.0)
        for _ in range(200):
            probes = [hi + k * max(1.0, abs(hi)) for k in (0.0, 1.0, 3.0, 7.0)]
            if all(_condition_holds(p, q, thr) for q in probes):
                break
            hi = gap_lo + 2.0 * (hi - gap_lo)
        else:
            raise ConvergenceError("could not bound the admissible set on the right")
    else:
        hi = gap_hi
    return lo, hi


def _endpoint_guard(x: float) -> float:
    """Closest admissible approach to a finite endpoint of supp(nu)."""
    return 4.0 * measure.ATOL * max(1.0, abs(x))


def _sample_points(lo: float, hi: float, cluster_lo: bool, cluster_hi: bool,
                   npts: int) -> np.ndarray:
    """Uniform grid plus geometric clusters toward finite gap endpoints.

    The clusters catch the sign dives of phi' next to supp(nu), which a
    uniform grid misses when sigma is small.  Points are kept outside the
    support-membership guard zone so every sample is safely evaluable.
    """
    width = hi - lo
    pts = [np.linspace(lo, hi, npts)]
    ks = 0.5 ** np.arange(1, 54)
    if cluster_lo:
        pts.append(lo + width * ks)
    if cluster_hi:
        pts.append(hi - width * ks)
    xs = np.unique(np.concatenate(pts))
    guard_lo = _endpoint_guard(lo) if cluster_lo else 0.0
    guard_hi = _endpoint_guard(hi) if cluster_hi else 0.0
    return xs[(xs > lo + guard_lo) & (xs < hi - guard_hi)]


def _phi_prime_marks(p: ModelParams, xs: np.ndarray) -> list[float] | None:
    """Zeros of phi' bracketed by sign changes over the sample points.

    Returns None when a bracketed root cannot be refined (caller refines the
    grid and retries).
    """
    vals = _phi_prime_values(p, xs)
    signs = np.zeros(len(xs), dtype=int)
    signs[vals > PHI_PRIME_FLOOR] = 1
    signs[vals < -PHI_PRIME_FLOOR] = -1
    marks: list[float] = []
    f = lambda u: phi_prime(p, u)
    prev_idx = None
    for i, s in enumerate(signs):
        if s == 0:
            marks.append(float(xs[i]))
            continue
        if prev_idx is not None and signs[prev_idx] == -s:
            try:
                root = brentq(f, xs[prev_idx], xs[i],
                              xtol=BOUNDARY_XTOL * 0.1, rtol=1e-15)
            except ValueError:
                return None
            marks.append(float(root))
        prev_idx = i
    return sorted(marks)


def _positive_pieces(p: ModelParams, lo: float, hi: float,
                     marks: list[float],
                     open_lo: bool, open_hi: bool) -> list[tuple[float, float]]:
    """Subintervals of (lo, hi) where phi' > 0, split at the given marks."""
    edges = [lo] + [m for m in marks if lo < m < hi] + [hi]
    pieces = []
    for a, b in zip(edges, edges[1:]):
        mid = 0.5 * (a + b)
        if phi_prime(p, mid) > PHI_PRIME_FLOOR:
            a_out = -math.inf if (open_lo and a == lo) else a
            b_out = math.inf if (open_hi and b == hi) else b
            pieces.append((a_out, b_out))
    merged: list[list[float]] = []
    for a, b in pieces:
        if merged and a == merged[-1][1]:
            # adjacent pieces separated only by a grid-point mark
            merged[-1][1] = b
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def g_threshold_crossing(p: ModelParams, gap: tuple[float, float]) -> float | None:
    """Unique solution of g_nu(u) = -1/(sigma^2 c) inside a gap of supp(nu).

    ``gap`` may have infinite endpoints.  Returns None when the condition
    g_nu > -1/(sigma^2 c) holds on the whole gap (always the case on the
    unbounded right gap).  When the crossing hugs the gap's right endpoint
    closer than the support-membership guard (possible next to a segment,
    where g diverges only logarithmically), the guard point itself is
    returned: the condition is non-binding on the resolvable part of the
    gap.
    """
    _require_positive_sigma(p)
    gap_lo, gap_hi = gap
    thr = -1.0 / (p.sigma ** 2 * p.c)
    if math.isinf(gap_hi):
        return None
    win_lo, win_hi = _window(p, gap_lo, gap_hi, thr)
    width = win_hi - win_lo
    guard_hi = _endpoint_guard(gap_hi)
    f = lambda u: measure.g_nu(p.nu, u) - thr

    right = None
    d = 0.5 * width
    while d > guard_hi:
        x = gap_hi - d
        if x > win_lo and f(x) < 0.0:
            right = x
            break
        d *= 0.5
    if right is None:
        return gap_hi - guard_hi
    left = None
    if math.isinf(gap_lo):
        if f(win_lo) > 0.0:
            left = win_lo
    else:
        guard_lo = _endpoint_guard(gap_lo)
        d = 0.5 * width
        while d > guard_lo:
            x = gap_lo + d
            if x < right and f(x) > 0.0:
                left = x
                break
            d *= 0.5
    if left is None:
        raise ConvergenceError("could not bracket the g-threshold from the left")
    return float(brentq(f, left, right, xtol=BOUNDARY_XTOL * 0.1, rtol=1e-15))


def _intersect(pieces: list[tuple[float, float]],
               lo: float, hi: float) -> list[tuple[float, float]]:
    out = []
    for a, b in pieces:
        a2, b2 = max(a, lo), min(b, hi)
        if a2 < b2:
            out.append((a2, b2))
    return out


def _drop_slivers(pieces: list[tuple[float, float]]) -> list[tuple[float, float]]:
    """Discard intervals narrower than the boundary-isolation resolution.

    Near an atom of nu at small sigma, the sign flip of phi' and the
    g-threshold crossing coincide to within machine precision; the exact
    set difference is empty but rounding can leave one-ulp slivers.
    Anything narrower than ~10x the isolation tolerance is such an artifact.
    """
    out = []
    for a, b in pieces:
        if math.isinf(a) or math.isinf(b):
            out.append((a, b))
            continue
        scale = max(abs(a), abs(b), 1.0)
        if b - a > max(10.0 * BOUNDARY_XTOL, 64.0 * np.finfo(float).eps * scale):
            out.append((a, b))
    return out


def _scan_gap(p: ModelParams, gap_lo: float, gap_hi: float,
              thr: float) -> list[tuple[float, float]]:
    """Admissible subintervals of one gap of supp(nu)."""
    win_lo, win_hi = _window(p, gap_lo, gap_hi, thr)
    crossing = g_threshold_crossing(p, (gap_lo, gap_hi))
    g_hi = math.inf if crossing is None else crossing
    npts = _SCAN_POINTS
    while npts <= _SCAN_POINTS_MAX:
        xs = _sample_points(win_lo, win_hi,
                            cluster_lo=not math.isinf(gap_lo),
                            cluster_hi=not math.isinf(gap_hi),
                            npts=npts)
        marks = _phi_prime_marks(p, xs)
        if marks is not None:
            pieces = _positive_pieces(p, win_lo, win_hi, marks,
                                      open_lo=math.isinf(gap_lo),
                                      open_hi=math.isinf(gap_hi))
            good = _drop_slivers(_intersect(pieces, -math.inf, g_hi))
            if _gap_structure_ok(good, gap_lo, gap_hi):
                return good
        npts *= 2
    raise ConvergenceError(
        f"sign pattern in gap ({gap_lo}, {gap_hi}) unresolved at "
        f"{_SCAN_POINTS_MAX} points")


def _gap_structure_ok(good: list[tuple[float, float]],
                      gap_lo: float, gap_hi: float) -> bool:
    # canonical structure: at most one admissible interval per bounded gap,
    # exactly one unbounded interval per unbounded gap
    if math.isinf(gap_lo) or math.isinf(gap_hi):
        if len(good) != 1:
            return False
        a, b = good[0]
        if math.isinf(gap_lo) and not math.isinf(a):
            return False
        if math.isinf(gap_hi) and not math.isinf(b):
            return False
        return True
    return len(good) <= 1


def _admissible_set(p: ModelParams) -> AdmissibleSet:
    _require_positive_sigma(p)
    thr = -1.0 / (p.sigma ** 2 * p.c)
    comps = measure.support_of(p.nu)
    good: list[tuple[float, float]] = []
    for gap_lo, gap_hi in comps.gaps():
        good.extend(_scan_gap(p, gap_lo, gap_hi, thr))
    good.sort()
    if len(good) < 2 or not math.isinf(good[0][0]) or not math.isinf(good[-1][1]):
        raise ConvergenceError("admissible set does not have the canonical form")
    boundaries: list[float] = []
    for (_, u_l), (v_l, _) in zip(good, good[1:]):
        boundaries.extend((u_l, v_l))
    adm = AdmissibleSet(boundaries=tuple(boundaries))
    for lo, hi in comps.intervals:
        if adm.locate_complement(0.5 * (lo + hi)) is None:
            raise ConvergenceError(
                "a component of supp(nu) escaped the admissible-set complement")
    for l in range(adm.p):
        mids = [0.5 * (lo + hi) for lo, hi in comps.intervals
                if adm.u[l] <= lo and hi <= adm.v[l]]
        if not mids:
            raise ConvergenceError(
                "an admissible-set complement interval misses supp(nu)")
    return adm


admissible_set = functools.lru_cache(maxsize=None)(_admissible_set)
admissible_set.__doc__ = """Admissible set of the model, computed once per ModelParams.

Each gap of supp(nu) is scanned on a uniform-plus-endpoint-clustered grid
(4096 points, doubled adaptively on unresolved sign patterns), sign changes
of phi' and the single crossing of g_nu with -1/(sigma^2 c) are bracketed,
and boundaries are refined by bracketing root isolation to absolute 1e-11.
Raises ConvergenceError if a gap stays unresolved at 2^16 points.
"""


def _phi_one_sided(p: ModelParams, x0: float, side: int) -> float:
    """Limit of phi at x0 from the left (side=-1) or right (side=+1).

    Computed from a geometric h-sequence with Richardson extrapolation so
    that boundaries arbitrarily close to supp(nu) are handled uniformly.
    """
    comps = measure.support_of(p.nu)
    if side < 0:
        below = [hi for _, hi in comps.intervals if hi < x0]
        room = x0 - max(below) if below else math.inf
    else:
        above = [lo for lo, _ in comps.intervals if lo > x0]
        room = min(above) - x0 if above else math.inf
    h0 = min(1e-6, room / 8.0)
    if h0 <= 0.0:
        raise ConvergenceError(f"no room to take a one-sided limit at {x0!r}")
    tol = 1e-9
    table: list[list[float]] = []
    prev = None
    for i in range(12):
        h = h0 * 0.5 ** i
        row = [phi(p, x0 + side * h)]
        for j in range(1, i + 1):
            fac = 2.0 ** j
            row.append((fac * row[j - 1] - table[i - 1][j - 1]) / (fac - 1.0))
        table.append(row)
        if i >= 2:
            est = row[-1]
            if prev is not None and abs(est - prev) <= tol * max(1.0, abs(est)):
                return est
            prev = est
        elif i == 1:
            prev = row[-1]
    raise ConvergenceError(f"one-sided limit of phi at {x0!r} did not converge")


def zero_in_support(p: ModelParams) -> bool:
    """Whether zero belongs to the support of the limit law.

    For c < 1 it never does.  For c = 1 it does exactly when zero lies in
    supp(nu) or g_nu(0) <= -1/sigma^2.
    """
    _require_positive_sigma(p)
    if p.c < 1.0:
        return False
    comps = measure.support_of(p.nu)
    if comps.distance(0.0) <= measure.ATOL:
        return True
    return measure.g_nu(p.nu, 0.0) <= -1.0 / p.sigma ** 2


def _support(p: ModelParams) -> SupportResult:
    adm = admissible_set(p)
    intervals: list[tuple[float, float]] = []
    for l in range(adm.p):
        lo = _phi_one_sided(p, adm.u[l], side=-1)
        hi = _phi_one_sided(p, adm.v[l], side=+1)
        if abs(lo) <= 1e-9:
            lo = 0.0
        intervals.append((lo, hi))
    for lo, hi in intervals:
        if not lo < hi:
            raise ConvergenceError("degenerate support interval computed")
    for (_, hi_a), (lo_b, _) in zip(intervals, intervals[1:]):
        if not hi_a < lo_b:
            raise ConvergenceError("support intervals are not separated")
    zero = zero_in_support(p)
    if p.c < 1.0 and intervals[0][0] <= 0.0:
        raise ConvergenceError("support minimum must be positive for c < 1")
    return SupportResult(intervals=tuple(intervals), zero_in_support=zero,
                         admissible=adm)


support = functools.lru_cache(maxsize=None)(_support)
support.__doc__ = """Support of the limit law, computed once per ModelParams.

Intervals are the one-sided limits of phi at the admissible-set boundaries;
the zero flag follows the zero-membership classification (False for c < 1).
"""


def omega(p: ModelParams, x: float) -> float:
    """Inverse of ``phi``: the admissible point u with phi(u) = x.

    ``x`` must lie strictly outside the support of the limit law; the
    matching admissible-set component is bisected using the proven strict
    monotonicity of ``phi``.  The residual |phi(omega(x)) - x| is at most
    1e-10 * max(1, |x|).
    """
    _require_positive_sigma(p)
    sup = support(p)
    if sup.distance(x) <= 0.0:
        raise DomainError(f"x={x!r} lies in the support of the limit law")
    adm = sup.admissible
    k = sum(1 for _, hi in sup.intervals if hi < x)
    f = lambda u: phi(p, u) - x
    if k == 0:
        hi_b = adm.u[0]
        step = max(1.0, abs(hi_b), p.sigma ** 2)
        lo_b = hi_b - step
        for _ in range(200):
            if f(lo_b) < 0.0:
                break
            step *= 2.0
            lo_b = hi_b - step
        else:
            raise ConvergenceError("could not bracket omega on the left")
    elif k == adm.p:
        lo_b = adm.v[-1]
        step = max(1.0, abs(lo_b), p.sigma ** 2)
        hi_b = lo_b + step
        for _ in range(200):
            if f(hi_b) > 0.0:
                break
            step *= 2.0
            hi_b = lo_b + step
        else:
            raise ConvergenceError("could not bracket omega on the right")
    else:
        lo_b, hi_b = adm.v[k - 1], adm.u[k]
    if f(lo_b) >= 0.0:
        u = lo_b
    elif f(hi_b) <= 0.0:
        u = hi_b
    else:
        u = float(brentq(f, lo_b, hi_b, xtol=1e-13, rtol=1e-15, maxiter=200))
    if abs(phi(p, u) - x) > 1e-10 * max(1.0, abs(x)):
        raise ConvergenceError(f"omega residual too large at x={x!r}")
    return u


def k_transform(p: ModelParams, x: float, tol: float = 1e-12) -> float:
    """Map x -> x + sigma^2(1-c)/(1 - sigma^2 c g(x)) through the c=1 companion model.

    ``g`` is the Stieltjes transform of the limit law with parameters
    (sigma*sqrt(c), nu, 1), evaluated by the fixed-point solver just above
    the real axis.  Satisfies K(phi_aux(u)) = phi(u) on the companion
    admissible set, which is the cross-check exercised by the tests.
    Requires c < 1 and x outside the companion support.
    """
    _require_positive_sigma(p)
    if not p.c < 1.0:
        raise DomainError("the K transform is defined for c < 1 only")
    aux = ModelParams(sigma=p.sigma * math.sqrt(p.c), c=1.0, nu=p.nu)
    sup = support(aux)
    if sup.distance(x) <= 0.0:
        raise DomainError(f"x={x!r} lies in the companion support")
    from . import stieltjes

    g = stieltjes.solve_g(aux, complex(x, 1e-9), tol=tol).g
    return x + p.sigma ** 2 * (1.0 - p.c) / (1.0 - p.sigma ** 2 * p.c * g.real)
