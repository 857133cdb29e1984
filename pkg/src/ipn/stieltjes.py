"""Fixed-point solver for the limit-law Stieltjes transform and its inversion.

The transform g of the limit law satisfies g = F(g) where

    F(g) = (1 - s^2 c g) * g_nu( z (1 - s^2 c g)^2 - s^2 (1-c)(1 - s^2 c g) )

(the integral form of the defining self-consistent equation collapsed onto
the closed-form transform of nu).  The solver damps the iteration and, when
needed, continues from high up in the upper half plane where the map is
strongly contractive.  Densities come from the boundary values of Im g,
CDF/quantiles from adaptive quadrature of the density with per-interval
masses cross-set by the mass-correspondence identity, and ``h_residual``
checks the rectangular-convolution subordination identity.
"""

from __future__ import annotations

import functools
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from . import measure, subordination
from .errors import ConvergenceError, DomainError
from .subordination import ModelParams

#: Imaginary offsets used for boundary-value extrapolation of Im g.
EPS_LADDER = (1e-3, 5e-4, 2.5e-4)

#: Negative densities above this magnitude indicate solver failure rather
#: than rounding noise.
NEGATIVE_DENSITY_FLOOR = -1e-6

_DEFAULT_TOL = 1e-12
_STAGE_BUDGET = 20_000
_FINAL_BUDGET = 100_000


@dataclass(frozen=True)
class GSolution:
    """Solved transform value at one query point."""

    z: complex
    g: complex
    iterations: int
    residual: float


@dataclass(frozen=True)
class DensityGrid:
    """Density values on an ordered grid; NaN marks points that failed to solve."""

    xs: tuple[float, ...]
    fs: tuple[float, ...]
    eps_used: float

    def trapezoid_mass(self) -> float:
        xs = np.asarray(self.xs)
        fs = np.asarray(self.fs)
        ok = ~np.isnan(fs)
        return float(np.trapezoid(fs[ok], xs[ok]))


def _fp_map(p: ModelParams, z: complex, g: complex) -> complex:
    w = 1.0 - p.sigma ** 2 * p.c * g
    zeta = z * w * w - p.sigma ** 2 * (1.0 - p.c) * w
    if zeta.imag == 0.0:
        zeta = complex(zeta.real, 1e-300)
    return w * measure.g_nu(p.nu, zeta)


def _iterate(p: ModelParams, z: complex, g0: complex, tol: float,
             budget: int) -> tuple[complex, int, float] | None:
    g = g0
    for k in range(budget):
        try:
            fg = _fp_map(p, z, g)
        except ZeroDivisionError:
            return None
        if not (math.isfinite(fg.real) and math.isfinite(fg.imag)):
            return None
        r = abs(fg - g)
        if r <= tol:
            return g, k + 1, r
        g = 0.5 * (g + fg)
    return None


def solve_g(p: ModelParams, z: complex, tol: float = _DEFAULT_TOL) -> GSolution:
    """Solve the self-consistent equation for g at z in the upper half plane.

    Damped fixed-point iteration (damping 1/2) started from 1/z.  If the
    direct iteration does not settle, the solver walks down a geometric
    ladder z + i*2^m, warm-starting each stage from the previous solution;
    the final stage at z gets a budget of 10^5 iterations before
    ConvergenceError.  The returned g satisfies |g - F(g)| <= tol together
    with the half-plane sign constraints Im g < 0 and Im(z g) <= 0.
    """
    z = complex(z)
    if z.imag <= 0.0:
        raise DomainError(f"solve_g requires Im z > 0, got {z!r}")
    if p.sigma == 0.0:
        g = measure.g_nu(p.nu, z)
        return GSolution(z=z, g=g, iterations=0, residual=0.0)

    total = 0
    result = _iterate(p, z, 1.0 / z, tol, _STAGE_BUDGET)
    if result is not None:
        g, it, r = result
        total = it
    else:
        total = _STAGE_BUDGET
        span = measure.support_of(p.nu).max + p.sigma ** 2
        m_hi = max(3, int(math.ceil(math.log2(max(1.0, abs(z), span)))) + 3)
        z_top = z + 1j * 2.0 ** m_hi
        g = 1.0 / z_top
        for m in range(m_hi, -1, -1):
            zz = z + 1j * 2.0 ** m
            result = _iterate(p, zz, g, tol, _STAGE_BUDGET)
            if result is None:
                raise ConvergenceError(f"continuation stalled at offset 2^{m}")
            g, it, _ = result
            total += it
        result = _iterate(p, z, g, tol, _FINAL_BUDGET)
        if result is None:
            raise ConvergenceError(
                f"fixed point did not converge at z={z!r} after {_FINAL_BUDGET} "
                "iterations at the final continuation stage")
        g, it, r = result
        total += it

    if not g.imag < 0.0:
        raise ConvergenceError(f"solution at z={z!r} violates Im g < 0")
    if (z * g).imag > 1e-12 * max(1.0, abs(z * g)):
        raise ConvergenceError(f"solution at z={z!r} violates Im(z g) <= 0")
    return GSolution(z=z, g=g, iterations=total, residual=r)


def _warm_solve(p: ModelParams, z: complex, g0: complex | None,
                tol: float) -> complex:
    if g0 is not None:
        result = _iterate(p, z, g0, tol, 5_000)
        if result is not None and result[0].imag < 0.0:
            return result[0]
    return solve_g(p, z, tol=tol).g


def _neville_at_zero(eps: tuple[float, ...], ys: list[float]) -> float:
    tab = list(ys)
    n = len(tab)
    for j in range(1, n):
        for i in range(n - 1, j - 1, -1):
            tab[i] = ((eps[i - j] * tab[i] - eps[i] * tab[i - 1])
                      / (eps[i - j] - eps[i]))
    return tab[-1]


class _WarmState:
    """Per-epsilon warm starts for sweeping density evaluations."""

    def __init__(self) -> None:
        self.g: dict[float, complex] = {}

    def density(self, p: ModelParams, x: float, tol: float = 1e-10) -> float:
        ys = []
        for eps in EPS_LADDER:
            g = _warm_solve(p, complex(x, eps), self.g.get(eps), tol)
            self.g[eps] = g
            ys.append(g.imag)
        return -_neville_at_zero(EPS_LADDER, ys) / math.pi


def density(p: ModelParams, xs) -> DensityGrid:
    """Density of the limit law on an ordered grid by boundary extrapolation.

    Im g is evaluated on the epsilon ladder and extrapolated to the real
    axis.  Values in [-1e-6, 0) clamp to zero; anything below that marks the
    point invalid (NaN) instead of failing the whole grid.  The grid must
    stay within a bounding box around the computed support and, when c = 1,
    away from the 1e-6 neighborhood of zero.
    """
    sup = subordination.support(p)
    xs = [float(x) for x in xs]
    if any(b < a for a, b in zip(xs, xs[1:])):
        raise DomainError("density grid must be ascending")
    lo = min(0.0, sup.intervals[0][0])
    hi = sup.intervals[-1][1]
    pad = 0.5 * (hi - lo) + 1.0
    for x in xs:
        if not lo - pad <= x <= hi + pad:
            raise DomainError(f"grid point {x!r} outside the support bounding box")
        if p.c == 1.0 and abs(x) < 1e-6:
            raise DomainError("grid may not enter the 1e-6 neighborhood of zero "
                              "when c = 1")
    warm = _WarmState()
    fs = []
    for x in xs:
        try:
            f = warm.density(p, x)
        except ConvergenceError:
            fs.append(math.nan)
            continue
        if f < NEGATIVE_DENSITY_FLOOR:
            fs.append(math.nan)
        else:
            fs.append(max(f, 0.0))
    return DensityGrid(xs=tuple(xs), fs=tuple(fs), eps_used=EPS_LADDER[-1])


# ---------------------------------------------------------------------------
# CDF by adaptive quadrature per support interval
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Panel:
    t0: float
    t1: float
    f0: float
    fm: float
    f1: float
    mass: float


@dataclass(frozen=True)
class _IntervalCdf:
    lo: float
    hi: float
    panels: tuple[_Panel, ...]
    cum: tuple[float, ...]  # raw mass up to each panel start
    raw_mass: float
    nu_mass: float


def _adaptive_panels(f, a: float, b: float, tol: float) -> list[_Panel]:
    fa, fm, fb = f(a), f(0.5 * (a + b)), f(b)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    out: list[_Panel] = []
    _refine(f, a, b, fa, fm, fb, whole, tol, 0, out)
    return out


def _refine(f, a, b, fa, fm, fb, whole, tol, depth, out) -> None:
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = f(lm), f(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    if abs(left + right - whole) <= 15.0 * tol or depth >= 22:
        out.append(_Panel(a, m, fa, flm, fm, left))
        out.append(_Panel(m, b, fm, frm, fb, right))
        return
    _refine(f, a, m, fa, flm, fm, left, 0.5 * tol, depth + 1, out)
    _refine(f, m, b, fm, frm, fb, right, 0.5 * tol, depth + 1, out)


def _interval_cdf(p: ModelParams, lo: float, hi: float,
                  nu_mass: float) -> _IntervalCdf:
    half = 0.5 * (hi - lo)
    warm = _WarmState()

    def integrand(t: float) -> float:
        s = math.sin(t)
        if s == 0.0:
            return 0.0
        x = lo + half * (1.0 - math.cos(t))
        f = warm.density(p, x)
        if f < NEGATIVE_DENSITY_FLOOR:
            raise ConvergenceError(f"density solve failed inside [{lo}, {hi}]")
        return max(f, 0.0) * half * s

    panels = _adaptive_panels(integrand, 0.0, math.pi, tol=1e-6)
    cum = []
    acc = 0.0
    for panel in panels:
        cum.append(acc)
        acc += panel.mass
    return _IntervalCdf(lo=lo, hi=hi, panels=tuple(panels), cum=tuple(cum),
                        raw_mass=acc, nu_mass=nu_mass)


@functools.lru_cache(maxsize=None)
def _cdf_data(p: ModelParams) -> tuple[_IntervalCdf, ...]:
    sup = subordination.support(p)
    adm = sup.admissible
    out = []
    for l, (lo, hi) in enumerate(sup.intervals):
        nu_mass = measure.mass_between(p.nu, adm.u[l], adm.v[l])
        out.append(_interval_cdf(p, lo, hi, nu_mass))
    return tuple(out)


def interval_masses(p: ModelParams) -> tuple[float, ...]:
    """Raw quadrature mass of the density over each support interval.

    These are not normalized; comparing them against the nu-mass of the
    matching [u_l, v_l] interval is the mass-correspondence verification.
    """
    return tuple(ic.raw_mass for ic in _cdf_data(p))


def _quad_partial(panel: _Panel, t: float) -> float:
    h = panel.t1 - panel.t0
    if h <= 0.0:
        return 0.0
    s = min(max((t - panel.t0) / h, 0.0), 1.0)
    i0 = (2.0 / 3.0) * s ** 3 - 1.5 * s ** 2 + s
    im = -(4.0 / 3.0) * s ** 3 + 2.0 * s ** 2
    i1 = (2.0 / 3.0) * s ** 3 - 0.5 * s ** 2
    val = h * (panel.f0 * i0 + panel.fm * im + panel.f1 * i1)
    return min(max(val, 0.0), max(panel.mass, 0.0))


def _raw_partial(ic: _IntervalCdf, x: float) -> float:
    if x <= ic.lo:
        return 0.0
    if x >= ic.hi:
        return ic.raw_mass
    half = 0.5 * (ic.hi - ic.lo)
    arg = min(max(1.0 - (x - ic.lo) / half, -1.0), 1.0)
    t = math.acos(arg)
    idx = bisect_right([pnl.t0 for pnl in ic.panels], t) - 1
    idx = min(max(idx, 0), len(ic.panels) - 1)
    return ic.cum[idx] + _quad_partial(ic.panels[idx], t)


def cdf_mu(p: ModelParams, x: float) -> float:
    """CDF of the limit law; each support interval carries its nu-mass.

    The per-interval quadrature is rescaled so interval l carries exactly
    the mass nu([u_l, v_l]) (the mass-correspondence identity), which pins
    gap plateaus and the total mass to their exact values.
    """
    data = _cdf_data(p)
    total = 0.0
    for ic in data:
        if x >= ic.hi:
            total += ic.nu_mass
        elif x > ic.lo:
            if ic.raw_mass > 0.0:
                total += ic.nu_mass * _raw_partial(ic, x) / ic.raw_mass
            break
        else:
            break
    return min(total, 1.0)


def quantile_mu(p: ModelParams, alpha: float) -> float:
    """Generalized inverse of ``cdf_mu`` for alpha strictly inside (0, 1)."""
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"quantile level must be in (0, 1), got {alpha!r}")
    data = _cdf_data(p)
    cum = 0.0
    for ic in data:
        if alpha <= cum + ic.nu_mass + 1e-15:
            lo, hi = ic.lo, ic.hi
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if cdf_mu(p, mid) >= alpha:
                    hi = mid
                else:
                    lo = mid
            return 0.5 * (lo + hi)
        cum += ic.nu_mass
    return data[-1].hi


def h_residual(p: ModelParams, x: float) -> float:
    """Residual of the rectangular-convolution subordination identity at x.

    Compares c*u*g_nu(u)^2 + (1-c)*g_nu(u) at u = omega(x) with
    c*x*g(x)^2 + (1-c)*g(x), the transform g being evaluated just above the
    real axis.  Vanishes identically on the model; the returned modulus is
    pure numerical error.
    """
    u = subordination.omega(p, x)
    if measure.support_of(p.nu).distance(u) <= measure.ATOL:
        raise DomainError(f"omega({x!r}) landed on supp(nu)")
    gn = measure.g_nu(p.nu, u)
    gm = solve_g(p, complex(x, 1e-9)).g
    lhs = p.c * u * gn * gn + (1.0 - p.c) * gn
    rhs = p.c * x * gm * gm + (1.0 - p.c) * gm
    return abs(lhs - rhs)
