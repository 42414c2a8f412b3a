"""Transfer operator action on gamma combinations.

Two independent routes are provided. `apply` uses the closed form

    f* gamma_a = gamma_{f(a)} / f'(a) + sum_i b_i gamma_a(c_i) gamma_{f(c_i)}

with the critical sum truncated at the CriticalData radius. `apply_direct`
sums over explicitly enumerated inverse branches and serves as the oracle
the closed form is checked against.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as npoly

from ._summation import csum
from .errors import (
    DegeneracyError,
    EvaluationOverflowError,
    PoleCollisionError,
    UnsupportedBranchStructureError,
)
from .gamma import GammaCombination, gamma_eval
from .maps import CriticalData, EntireMap

NEAR_CRITICAL_TOL = 1e-8
POLE_COLLISION_TOL = 1e-9
NORMALIZED_TOL = 1e-6


@dataclass(frozen=True)
class BranchWindow:
    """Inverse-branch truncation: |k| <= k_range, optionally both arcsin sheets."""

    k_range: int = 200
    both_sheets: bool = True

    def __post_init__(self):
        if self.k_range < 1:
            raise ValueError("k_range must be >= 1")


@dataclass(frozen=True)
class BranchSum:
    value: complex
    tail_estimate: float
    branches_used: int
    skipped: int


def _require_normalized(m: EntireMap):
    if not m.is_normalized(tol=NORMALIZED_TOL):
        raise ValueError("closed-form operator action requires a map fixing 0 and 1; normalize first")


def apply(cd: CriticalData, phi: GammaCombination) -> GammaCombination:
    """Closed-form operator image of a gamma combination.

    Each term (a, w) contributes (f(a), w/f'(a)) plus one term per critical
    entry, (d_i, w * b_i * gamma_a(c_i)); duplicate bases merge. Critical
    contributions attach to their class representative value so entries of
    one class merge exactly.
    """
    combo, _ = apply_with_drop(cd, phi, drop_overflowing=False)
    return combo


def apply_with_drop(cd: CriticalData, phi: GammaCombination, drop_overflowing: bool = True):
    """Operator image tolerating bases whose forward image overflows.

    Such bases come from escaped orbits; their leading image piece has
    weight w/f'(a) with |f'(a)| beyond double range, and its value anywhere
    is below |w| * |f(a)/f'(a)| / |z(z-1)| with |f/f'| <= ~1 in the
    overflow regime. The piece is dropped and sum 2|w| is returned as the
    dropped-mass bound (to be divided by |z(z-1)| at evaluation points);
    the critical pieces of the term are kept exactly.
    """
    m = cd.map
    _require_normalized(m)
    crit_pts = cd.points()
    class_rep = [None] * len(cd.entries)
    for rep, idx in cd.value_classes:
        for k in idx:
            class_rep[k] = rep

    out = []
    dropped = 0.0
    for a, w in phi.terms:
        if len(crit_pts) and abs(a) < 1e9 and np.min(np.abs(crit_pts - a)) < NEAR_CRITICAL_TOL:
            raise DegeneracyError(f"base {a} within {NEAR_CRITICAL_TOL} of a critical point")
        try:
            fa = m.evaluate(a, 0)
            fpa = m.evaluate(a, 1)
        except EvaluationOverflowError:
            if not drop_overflowing:
                raise
            dropped += 2.0 * abs(w)
            fa = None
        if fa is not None:
            if abs(fa) < POLE_COLLISION_TOL or abs(fa - 1) < POLE_COLLISION_TOL:
                raise PoleCollisionError(f"image base f({a}) = {fa} collides with a kernel pole")
            out.append((fa, w / fpa))
        if len(crit_pts):
            gvals = gamma_eval(a, crit_pts)
            for k, e in enumerate(cd.entries):
                out.append((class_rep[k], w * e.b * gvals[k]))
    return GammaCombination.build(out), dropped


def iterate(cd: CriticalData, a, n: int) -> GammaCombination:
    """n-fold closed-form application starting from gamma_a."""
    if n < 0:
        raise ValueError("n must be >= 0")
    phi = GammaCombination.single(a)
    for _ in range(n):
        phi = apply(cd, phi)
    return phi


def _branch_targets(m: EntireMap, z, window: BranchWindow):
    """Solve P1 + P2(sin(P3(y))) = z for the P3(y) values, sheet by sheet."""
    p1, p2 = m.p1_coeffs, m.p2_coeffs
    if len(p1) > 1:
        raise UnsupportedBranchStructureError("inverse branches need constant P1")
    if len(p2) != 2:
        raise UnsupportedBranchStructureError("inverse branches need linear P2")
    u = (complex(z) - p1[0] - p2[0]) / p2[1]
    base = cmath.asin(u)
    ks = np.arange(-window.k_range, window.k_range + 1)
    sheets = [base + 2 * math.pi * ks]
    if window.both_sheets:
        sheets.append(math.pi - base + 2 * math.pi * ks)
    return ks, sheets


def preimages(m: EntireMap, z, window: BranchWindow) -> np.ndarray:
    """All enumerated solutions of f(y) = z within the branch window."""
    ks, sheets = _branch_targets(m, z, window)
    p3 = np.asarray(m.p3_coeffs, dtype=complex)
    ys = []
    if len(p3) == 2:
        for targets in sheets:
            ys.append((targets - p3[0]) / p3[1])
        return np.concatenate(ys)
    for targets in sheets:
        for t in targets:
            shifted = p3.copy()
            shifted[0] -= t
            ys.extend(npoly.polyroots(shifted))
    return np.asarray(ys, dtype=complex)


def apply_direct(m: EntireMap, phi, z, window: BranchWindow = BranchWindow(),
                 exponents=(2, 0)) -> BranchSum:
    """Operator value at z by direct inverse-branch summation.

    exponents (n, m) selects the pushforward weight 1/(f'(y)^n conj(f'(y))^m):
    (2, 0) is the transfer operator, (1, 1) its modulus. Branches with
    |f'(y)| < 1e-10 are skipped and counted. The tail estimate extrapolates
    the observed cubic decay of the branch terms past the window.
    """
    n_exp, m_exp = exponents
    dvals = [m.p1_coeffs[0] + m.p2_coeffs[0] + s * m.p2_coeffs[1] for s in (1, -1)] if len(m.p2_coeffs) == 2 and len(m.p1_coeffs) == 1 else []
    for d in dvals:
        if abs(complex(z) - d) < NEAR_CRITICAL_TOL:
            raise DegeneracyError(f"z = {z} within {NEAR_CRITICAL_TOL} of critical value {d}")

    ks, sheets = _branch_targets(m, z, window)
    p3 = np.asarray(m.p3_coeffs, dtype=complex)
    eval_phi = phi.eval if hasattr(phi, "eval") else phi

    terms = []  # (|k|, term)
    skipped = 0
    for targets in sheets:
        if len(p3) == 2:
            ys = (targets - p3[0]) / p3[1]
        else:
            ys = []
            for t in targets:
                shifted = p3.copy()
                shifted[0] -= t
                ys.extend(npoly.polyroots(shifted))
            ys = np.asarray(ys, dtype=complex)
        fpy = m.evaluate(ys, 1)
        small = np.abs(fpy) < 1e-10
        skipped += int(np.sum(small))
        keep = ~small
        yk, fk = ys[keep], fpy[keep]
        if len(p3) == 2:
            kk = np.abs(ks)[keep]
        else:
            kk = np.zeros(len(yk))
        vals = np.asarray([complex(eval_phi(complex(y))) for y in yk], dtype=complex)
        with np.errstate(all="ignore"):
            w = vals / (fk**n_exp * np.conj(fk) ** m_exp)
        for kabs, t in zip(kk, w):
            terms.append((float(kabs), complex(t)))

    value = csum(t for _, t in terms)
    K = window.k_range
    outer = [abs(t) * max(1.0, kabs) ** 3 for kabs, t in terms if kabs >= K - 2]
    c_est = max(outer) if outer else 0.0
    tail = 2.0 * c_est / max(K - 1, 1) ** 2
    return BranchSum(value, tail, len(terms), skipped)
