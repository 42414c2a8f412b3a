"""Orbit series and operator power series.

poincare_series sums x^n gamma_{f^n(a)}(z) / (f^n)'(a) with tail control
fitted to the observed geometric decay. resolvent_by_neumann sums the
damped operator powers x^n f*^n gamma_a directly; resolvent_by_system
solves the equivalent finite linear system over distinct critical values

    S(x, d_j, z) = A(x, d_j, z) + x sum_k b_k A(x, d_j, c_k) S(x, d_class(k), z)

and reconstructs S(x, a, z). The two routes cross-validate each other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._summation import csum
from .errors import ConditioningError, DegeneracyError
from .gamma import GammaCombination, gamma_eval
from .maps import UNBOUNDED, CriticalData, EntireMap, OrbitData, orbit
from .transfer import apply, apply_with_drop

RATE_WINDOW = 10
RATE_MARGIN = 1.0 - 1e-9
POLE_PROX_TOL = 1e-10
EXACT_HIT_TOL = 1e-12
CONDITION_LIMIT = 1e8


@dataclass(frozen=True)
class SeriesEval:
    """Partial-sum value with diagnostics; converged implies tail <= tolerance."""

    value: complex
    n_used: int
    tail_estimate: float
    converged: bool
    diagnostics: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {
            "value": [self.value.real, self.value.imag],
            "n_used": self.n_used,
            "tail_estimate": self.tail_estimate,
            "converged": self.converged,
            "diagnostics": {k: v for k, v in self.diagnostics.items()},
        }


def _fit_rate(mags):
    """Geometric mean ratio over the last RATE_WINDOW magnitudes (median-robust)."""
    logs = []
    for p, q in zip(mags[-RATE_WINDOW - 1:-1], mags[-RATE_WINDOW:]):
        if p > 0 and q > 0:
            logs.append(math.log(q / p))
    if not logs:
        return None
    return math.exp(float(np.median(logs)))


def _summed(terms, n_used, tail, converged, **diag):
    return SeriesEval(csum(terms), n_used, tail, converged, dict(diag))


def _orbit_for(m, a, n_max, escape_radius, guards):
    orb = orbit(m, a, n_max, escape_radius, guard_points=guards)
    if orb.degenerate:
        raise DegeneracyError(
            f"orbit of {a} passes within 1e-8 of 0, 1 or a critical point at step {orb.degenerate_index}"
        )
    return orb


def _escape_tail(orb: OrbitData, x, z, n_used):
    """Bound on the terms cut off when the orbit escaped past double range.

    Past the last stored point the derivative product has grown by at least
    the escape factor, so every remaining term is below
    |x|^(N+1) * 2 / (|D_N| |z(z-1)|); the geometric factor 2 absorbs the
    bounded |f/f'| ratio of the overflow regime.
    """
    if orb.boundedness != UNBOUNDED or n_used < len(orb.points):
        return 0.0
    d_last = orb.derivs[-1]
    if d_last == 0 or not math.isfinite(abs(d_last)):
        return 0.0
    z = complex(z)
    denom = max(abs(z) * abs(z - 1), 1e-12)
    return 2.0 * abs(x) ** len(orb.points) / (abs(d_last) * denom)


def poincare_series(m: EntireMap, x, a, z, n_max: int = 300, tol: float = 1e-10,
                    escape_radius: float = 1e6, guards=(), orbit_data: OrbitData | None = None) -> SeriesEval:
    """sum_n x^n gamma_{f^n(a)}(z) / (f^n)'(a), truncated with fitted tail."""
    x, a, z = complex(x), complex(a), complex(z)
    if x == 0:
        return SeriesEval(gamma_eval(a, z), 1, 0.0, True)
    orb = orbit_data if orbit_data is not None else _orbit_for(m, a, n_max, escape_radius, guards)
    terms = []
    mags = []
    xn = 1 + 0j
    tail = math.inf
    hits = 0
    for n, (pt, dv) in enumerate(zip(orb.points, orb.derivs)):
        if abs(z - pt) < POLE_PROX_TOL:
            raise DegeneracyError(f"z = {z} is a pole of the n = {n} term (orbit point {pt})")
        if not (math.isfinite(dv.real) and math.isfinite(dv.imag)) or dv == 0:
            break  # derivative product left double range; remaining terms vanish
        term = xn * gamma_eval(pt, z) / dv
        terms.append(term)
        mags.append(abs(term))
        xn *= x
        if n >= RATE_WINDOW:
            rate = _fit_rate(mags)
            if rate is not None and rate < RATE_MARGIN:
                tail = mags[-1] * rate / (1 - rate)
                hits = hits + 1 if tail < tol else 0
                if hits >= 3:
                    return _summed(terms, n + 1, tail, True, rate=rate)
            else:
                hits = 0
    rate = _fit_rate(mags)
    if rate is not None and rate < RATE_MARGIN:
        tail = mags[-1] * rate / (1 - rate)
    esc = _escape_tail(orb, x, z, len(terms))
    if esc and not math.isfinite(tail):
        tail = esc
    elif esc:
        tail = max(tail, esc)
    return _summed(terms, len(terms), tail, bool(tail < tol), rate=rate, truncated_orbit=len(orb) - 1)


def poincare_series_at(m: EntireMap, x, a, target, n_max: int = 300, tol: float = 1e-10,
                       escape_radius: float = 1e6, guards=(), orbit_data: OrbitData | None = None) -> SeriesEval:
    """Scalar series at a fixed target point, safe when the orbit nears it.

    Near-target terms are controlled through the next derivative factor:
    |gamma_{f^n(a)}(target)| stays within a constant of 1/|f'(f^n(a))|, so
    the tail is additionally fitted on |x|^n / |(f^{n+1})'(a)|.
    """
    x, a, target = complex(x), complex(a), complex(target)
    if x == 0:
        return SeriesEval(gamma_eval(a, target), 1, 0.0, True)
    orb = orbit_data if orbit_data is not None else _orbit_for(m, a, n_max, escape_radius, guards)
    terms = []
    mags = []
    ctrl = []  # |x|^n / |(f^{n+1})'(a)| proxies
    xn = 1 + 0j
    k1 = 0.0
    tail = math.inf
    hits = 0
    npts = len(orb.points)
    for n, (pt, dv) in enumerate(zip(orb.points, orb.derivs)):
        if abs(pt - target) < EXACT_HIT_TOL:
            raise DegeneracyError(f"orbit point {n} hits the target {target} exactly")
        if not (math.isfinite(dv.real) and math.isfinite(dv.imag)) or dv == 0:
            break
        g = gamma_eval(pt, target)
        term = xn * g / dv
        terms.append(term)
        mags.append(abs(term))
        if n + 1 < npts:
            dnext = orb.derivs[n + 1]
            if dnext != 0 and math.isfinite(abs(dnext)):
                ctrl.append(abs(xn) * abs(x) / abs(dnext))
                k1 = max(k1, abs(g) * abs(dnext) / abs(dv))
        xn *= x
        if n >= RATE_WINDOW:
            rate = _fit_rate(mags)
            rate_c = _fit_rate(ctrl) if len(ctrl) > RATE_WINDOW else None
            cands = []
            if rate is not None and rate < RATE_MARGIN:
                cands.append(mags[-1] * rate / (1 - rate))
            if rate_c is not None and rate_c < RATE_MARGIN and ctrl:
                cands.append(k1 * ctrl[-1] * rate_c / (1 - rate_c))
            if cands:
                tail = max(cands)
                hits = hits + 1 if tail < tol else 0
                if hits >= 3:
                    return _summed(terms, n + 1, tail, True, rate=rate, k1=k1)
            else:
                hits = 0
    rate = _fit_rate(mags)
    if rate is not None and rate < RATE_MARGIN:
        tail = mags[-1] * rate / (1 - rate)
    esc = _escape_tail(orb, x, target, len(terms))
    if esc and not math.isfinite(tail):
        tail = esc
    elif esc:
        tail = max(tail, esc)
    return _summed(terms, len(terms), tail, bool(tail < tol), rate=rate, k1=k1,
                   truncated_orbit=len(orb) - 1)


@dataclass(frozen=True)
class ValueSystem:
    """Assembled q x q system over distinct critical values at fixed (x, z)."""

    matrix: np.ndarray  # M[j][i] = x * sum_{class i} b_k A(x, d_j, c_k)
    rhs: np.ndarray  # A(x, d_j, z)
    condition: float
    solution: np.ndarray


def build_value_system(cd: CriticalData, x, z, n_max: int = 300, tol: float = 1e-10,
                       escape_radius: float = 1e6) -> ValueSystem:
    m = cd.map
    q = len(cd.value_classes)
    reps = [rep for rep, _ in cd.value_classes]
    orbits = {j: _orbit_for(m, reps[j], n_max, escape_radius, cd.points()) for j in range(q)}
    M = np.zeros((q, q), dtype=complex)
    rhs = np.zeros(q, dtype=complex)
    for j in range(q):
        rhs[j] = poincare_series(m, x, reps[j], z, n_max, tol, orbit_data=orbits[j]).value
        for i, (_, idx) in enumerate(cd.value_classes):
            M[j, i] = complex(x) * csum(
                cd.entries[k].b
                * poincare_series_at(m, x, reps[j], cd.entries[k].c, n_max, tol, orbit_data=orbits[j]).value
                for k in idx
            )
    A = np.eye(q, dtype=complex) - M
    if not np.all(np.isfinite(A)) or not np.all(np.isfinite(rhs)):
        raise ConditioningError("value system has non-finite entries")
    cond = float(np.linalg.cond(A))
    if cond > CONDITION_LIMIT:
        raise ConditioningError(f"value system condition {cond:.3g} exceeds {CONDITION_LIMIT:.0e}", condition=cond)
    sol = np.linalg.solve(A, rhs)
    return ValueSystem(M, rhs, cond, sol)


def resolvent_by_system(cd: CriticalData, x, a, z, n_max: int = 300, tol: float = 1e-10,
                        escape_radius: float = 1e6) -> SeriesEval:
    """S(x, a, z) via the finite functional-equation system over value classes."""
    x, a, z = complex(x), complex(a), complex(z)
    if abs(x) >= 1:
        raise ValueError("system route requires |x| < 1")
    if x == 0:
        return SeriesEval(gamma_eval(a, z), 1, 0.0, True)
    m = cd.map
    sys = build_value_system(cd, x, z, n_max, tol, escape_radius)
    class_of = {}
    for i, (_, idx) in enumerate(cd.value_classes):
        for k in idx:
            class_of[k] = i
    orb = _orbit_for(m, a, n_max, escape_radius, cd.points())
    base = poincare_series(m, x, a, z, n_max, tol, orbit_data=orb)
    coupling = x * csum(
        e.b * poincare_series_at(m, x, a, e.c, n_max, tol, orbit_data=orb).value * sys.solution[class_of[k]]
        for k, e in enumerate(cd.entries)
    )
    value = base.value + coupling
    return SeriesEval(value, base.n_used, base.tail_estimate, base.converged,
                      {"condition": sys.condition, "q": len(cd.value_classes)})


def resolvent_by_neumann(cd: CriticalData, x, a, z, n_max: int = 60, tol: float = 1e-10) -> SeriesEval:
    """S(x, a, z) as the damped sum of iterated closed-form operator images.

    Escaped image bases (forward evaluation overflows) lose their leading
    piece; the booked dropped mass enters the tail estimate scaled by
    1/|z(z-1)| and the geometric damping left in the series.
    """
    x, a, z = complex(x), complex(a), complex(z)
    if abs(x) >= 1:
        raise ValueError("Neumann route requires |x| < 1")
    phi = GammaCombination.single(a)
    terms = []
    mags = []
    xn = 1 + 0j
    tail = math.inf
    hits = 0
    dropped_mass = 0.0
    denom = max(abs(z) * abs(z - 1), 1e-12)
    n_done = 0
    for n in range(n_max + 1):
        term = xn * phi.eval(z)
        terms.append(term)
        mags.append(abs(term))
        n_done = n + 1
        if x == 0:
            return SeriesEval(csum(terms), 1, 0.0, True)
        dropped_tail = dropped_mass * abs(xn) / (denom * (1 - abs(x)))
        if n >= 5:
            rate = _fit_rate(mags)
            if rate is not None and rate < RATE_MARGIN:
                tail = mags[-1] * rate / (1 - rate) + dropped_tail
                hits = hits + 1 if tail < tol else 0
                if hits >= 3:
                    return _summed(terms, n + 1, tail, True, rate=rate,
                                   basis_size=len(phi.terms), dropped_mass=dropped_mass)
            else:
                hits = 0
        phi, dropped = apply_with_drop(cd, phi)
        dropped_mass += dropped
        xn *= x
    rate = _fit_rate(mags)
    if rate is not None and rate < RATE_MARGIN:
        tail = mags[-1] * rate / (1 - rate) + dropped_mass * abs(xn) / (denom * (1 - abs(x)))
    return _summed(terms, n_done, tail, bool(tail < tol), rate=rate, basis_size=len(phi.terms),
                   dropped_mass=dropped_mass)


@dataclass(frozen=True)
class LimitTrend:
    value_at_1: complex
    schedule: tuple
    deviations: tuple  # |A(x) - A(1)| along the schedule
    decreasing: bool


def limit_x_to_1(evaluator, schedule) -> LimitTrend:
    """Evaluate at each scheduled x and at x = 1; report the deviation trend.

    The evaluator must accept a single damping argument x; the schedule
    increases toward 1. Summability of the base point is the caller's
    responsibility (the x = 1 call is a plain absolutely convergent sum).
    """
    xs = tuple(float(x) for x in schedule)
    if any(not (0 < x < 1) for x in xs) or list(xs) != sorted(xs):
        raise ValueError("schedule must increase inside (0, 1)")
    v1 = complex(evaluator(1.0))
    devs = tuple(abs(complex(evaluator(x)) - v1) for x in xs)
    decreasing = all(b < a * (1 + 1e-12) for a, b in zip(devs, devs[1:]))
    return LimitTrend(v1, xs, devs, decreasing)
