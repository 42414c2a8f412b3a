"""Instability relation over critical-value classes.

With a summable critical value d1 as base, each distinct critical value
class i carries a coefficient

    Psi_i = sum_{c_k : f(c_k) = d_i} b_k A(1, d1, c_k)

where A is the undamped orbit series based at d1. The relation is trivial
exactly when the d1 class has coefficient 1 and all others vanish;
established non-triviality is evidence of structural instability. The
module also evaluates two operator identities that exercise the whole
stack: the fixed-point defect of the truncated orbit series under the
operator (via the inverse-branch oracle) and a Moebius change of variables
that transports the series through g(z) = yz/(z + y - 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._summation import csum
from .errors import DegeneracyError, SummabilityPreconditionError
from .gamma import GammaCombination, gamma_eval
from .maps import CriticalData, EntireMap, OrbitData, orbit
from .series import poincare_series, poincare_series_at
from .summability import SUMMABLE, classify_value
from .transfer import BranchWindow, apply_direct

TRIVIALITY_TOL = 1e-6
MARGIN_FACTOR = 3.0


@dataclass(frozen=True)
class RelationCoefficient:
    class_index: int  # index into CriticalData.value_classes
    value_rep: complex  # the class's critical value
    value: complex  # the coefficient itself
    tail: float  # truncation + series tail bound


@dataclass(frozen=True)
class RelationReport:
    d1: complex
    d1_class_index: int
    coefficients: tuple  # RelationCoefficient per class
    trivial: bool
    instability_evidence: bool
    tolerance: float

    def coefficient_for_class(self, i: int) -> RelationCoefficient:
        for rc in self.coefficients:
            if rc.class_index == i:
                return rc
        raise KeyError(i)

    def deviations(self):
        """(coefficient, |deviation from trivial value|) per class."""
        out = []
        for rc in self.coefficients:
            target = 1.0 if rc.class_index == self.d1_class_index else 0.0
            out.append((rc, abs(rc.value - target)))
        return out

    def to_json_obj(self):
        return {
            "d1": [self.d1.real, self.d1.imag],
            "d1_class_index": self.d1_class_index,
            "coefficients": [
                {
                    "class_index": rc.class_index,
                    "critical_value": [rc.value_rep.real, rc.value_rep.imag],
                    "value": [rc.value.real, rc.value.imag],
                    "tail": rc.tail,
                }
                for rc in self.coefficients
            ],
            "trivial": self.trivial,
            "instability_evidence": self.instability_evidence,
            "tolerance": self.tolerance,
        }

    def csv_row(self):
        row = [self.d1.real, self.d1.imag, self.trivial, self.instability_evidence]
        for rc in self.coefficients:
            row.extend([rc.class_index, rc.value.real, rc.value.imag, rc.tail])
        return row


def _require_summable(m: EntireMap, d1, n_max, escape_radius):
    rep = classify_value(m, d1, n_max=n_max, escape_radius=escape_radius)
    if rep.verdict != SUMMABLE:
        raise SummabilityPreconditionError(
            f"base value {d1} classified {rep.verdict}; the undamped series is not justified"
        )
    return rep


def relation_coefficients(cd: CriticalData, d1, tol: float = TRIVIALITY_TOL,
                          series_tol: float = 1e-11, n_max: int = 300,
                          escape_radius: float = 1e6, check_summability: bool = True) -> RelationReport:
    """Coefficients of the relation over value classes, based at summable d1.

    Tails combine each orbit-series tail with the critical-radius truncation
    mass: outside the enumeration disc, |A(1, d1, c)| <= 8 * S_w / |c|^3 with
    S_w = sum |t_n(t_n - 1)| / |(f^n)'(d1)|, so the missing class mass is at
    most 8 * S_w * tail_bound.
    """
    m = cd.map
    d1 = complex(d1)
    d1_class = cd.class_of_value(d1)
    if check_summability:
        _require_summable(m, d1, n_max, escape_radius)
    orb = orbit(m, d1, n_max, escape_radius, guard_points=cd.points())
    if orb.degenerate:
        raise DegeneracyError(f"orbit of {d1} is degenerate at step {orb.degenerate_index}")

    s_w = math.fsum(
        abs(pt * (pt - 1)) / abs(dv)
        for pt, dv in zip(orb.points, orb.derivs)
        if dv != 0 and math.isfinite(abs(dv))
    )
    radius_tail = 8.0 * s_w * cd.tail_bound

    coeffs = []
    for i, (rep, idx) in enumerate(cd.value_classes):
        pieces = []
        tail = radius_tail
        for k in idx:
            e = cd.entries[k]
            ev = poincare_series_at(m, 1.0, d1, e.c, n_max, series_tol, orbit_data=orb)
            pieces.append(e.b * ev.value)
            tail += abs(e.b) * ev.tail_estimate
        coeffs.append(RelationCoefficient(i, rep, csum(pieces), tail))

    trivial = all(
        (abs(rc.value - 1.0) <= tol if rc.class_index == d1_class else abs(rc.value) <= tol)
        for rc in coeffs
    )
    return RelationReport(d1, d1_class, tuple(coeffs), trivial, not trivial, tol)


def truncated_orbit_combination(m: EntireMap, d1, n_terms: int, n_max: int = 300,
                                escape_radius: float = 1e6, orbit_data=None) -> GammaCombination:
    """The order-N partial sum of the undamped orbit series as a combination."""
    orb = orbit_data if orbit_data is not None else orbit(m, complex(d1), n_max, escape_radius)
    pairs = []
    for n, (pt, dv) in enumerate(zip(orb.points, orb.derivs)):
        if n > n_terms:
            break
        if dv == 0 or not math.isfinite(abs(dv)):
            break
        pairs.append((pt, 1.0 / dv))
    return GammaCombination.build(pairs)


@dataclass(frozen=True)
class DefectResult:
    max_residual: float
    residuals: tuple
    samples_used: tuple
    samples_rejected: tuple
    tail_budget: float


def fixed_point_defect(cd: CriticalData, d1, z_samples, n_terms: int = 24,
                       series_tol: float = 1e-11, window: BranchWindow = BranchWindow(200),
                       n_max: int = 300, escape_radius: float = 1e6,
                       check_summability: bool = True) -> DefectResult:
    """Residual of the operator identity satisfied by the orbit series.

    At each sample z the truncated series Phi_N is pushed through the
    operator by direct inverse-branch summation (independent of the stored
    residues) and compared against

        A(1, d1, z) - gamma_{d1}(z) + sum_i Psi_i gamma_{d_i}(z).

    A small residual jointly validates branch enumeration, critical data,
    orbit series and the relation coefficients; a corrupted residue breaks
    the balance and is detected.
    """
    m = cd.map
    d1 = complex(d1)
    if check_summability:
        _require_summable(m, d1, n_max, escape_radius)
    orb = orbit(m, d1, n_max, escape_radius, guard_points=cd.points())
    phi_n = truncated_orbit_combination(m, d1, n_terms, orbit_data=orb)
    report = relation_coefficients(cd, d1, series_tol=series_tol, n_max=n_max,
                                   escape_radius=escape_radius, check_summability=False)

    polezoo = [0j, 1 + 0j, d1] + [rc.value_rep for rc in report.coefficients] + list(orb.points[: n_terms + 2])
    crit_values = [rc.value_rep for rc in report.coefficients]

    residuals = []
    used = []
    rejected = []
    tail_budget = 0.0
    for z in z_samples:
        z = complex(z)
        if any(abs(z - p) < 1e-6 for p in polezoo):
            rejected.append(z)
            continue
        if any(abs(z - d) < 1e-7 for d in crit_values):
            rejected.append(z)
            continue
        pushed = apply_direct(m, phi_n, z, window)
        ref = poincare_series(m, 1.0, d1, z, n_max, series_tol, orbit_data=orb)
        correction = csum(rc.value * gamma_eval(rc.value_rep, z) for rc in report.coefficients)
        r = pushed.value - ref.value + gamma_eval(d1, z) - correction
        residuals.append(abs(r))
        used.append(z)
        tail_budget = max(tail_budget, pushed.tail_estimate + ref.tail_estimate
                          + math.fsum(rc.tail * abs(gamma_eval(rc.value_rep, z)) for rc in report.coefficients))
    if not residuals:
        raise ValueError("all samples were rejected as pole collisions")
    return DefectResult(max(residuals), tuple(residuals), tuple(used), tuple(rejected), tail_budget)


@dataclass(frozen=True)
class TransportResult:
    max_residual: float
    residuals: tuple
    samples_used: tuple
    samples_rejected: tuple
    y: complex
    n_terms: int


def mobius_transport(orbit_data: OrbitData, y, z_samples, n_terms: int | None = None,
                     admissibility_tol: float = 1e-6) -> TransportResult:
    """Transport identity through g(z) = yz/(z + y - 1), truncation-exact.

    With the same truncation on the two orbit sums C1, C2 and on the kernel
    sums, G(g(z)) g'(z) reproduces the orbit series at z term by term, so
    the residual is a pure floating-point consistency check. Requires 1 - y
    to stay clear of the orbit (else g maps orbit points to infinity).
    """
    y = complex(y)
    pts = list(orbit_data.points)
    dvs = list(orbit_data.derivs)
    if n_terms is not None:
        pts, dvs = pts[: n_terms + 1], dvs[: n_terms + 1]
    keep = [(t, d) for t, d in zip(pts, dvs) if d != 0 and math.isfinite(abs(d))]
    pts = [t for t, _ in keep]
    weights = [1.0 / d for _, d in keep]
    if min(abs(t + y - 1) for t in pts) < admissibility_tol:
        raise ValueError(f"1 - y = {1 - y} is within {admissibility_tol} of the orbit; choose another y")

    c1 = csum(w * (t - 1) for t, w in zip(pts, weights))
    c2 = csum(w * t for t, w in zip(pts, weights))

    def g(z):
        return y * z / (z + y - 1)

    def gprime(z):
        return y * (y - 1) / (z + y - 1) ** 2

    g_orbit = [g(t) for t in pts]
    residuals = []
    used = []
    rejected = []
    for z in z_samples:
        z = complex(z)
        if abs(z + y - 1) < 1e-6 or any(abs(z - t) < 1e-9 for t in pts) or min(abs(z), abs(z - 1)) < 1e-9:
            rejected.append(z)
            continue
        gz = g(z)
        lhs = (c1 / gz - c2 / (gz - 1) + csum(w / (gz - gt) for w, gt in zip(weights, g_orbit))) * gprime(z)
        rhs = csum(w * gamma_eval(t, z) for t, w in zip(pts, weights))
        residuals.append(abs(lhs - rhs))
        used.append(z)
    if not residuals:
        raise ValueError("all samples rejected")
    return TransportResult(max(residuals), tuple(residuals), tuple(used), tuple(rejected), y, len(pts) - 1)


def instability_verdict(report: RelationReport, margin: float = MARGIN_FACTOR) -> dict:
    """Three-valued verdict from the relation coefficients and their tails.

    "instability evidence: yes" needs at least one coefficient deviating
    from its trivial value by more than margin * tail (and more than the
    triviality tolerance). Consistency with the trivial relation within
    tolerance, tails included, gives "no evidence" (never a stability
    claim); anything in between is inconclusive.
    """
    tol = report.tolerance
    established = []
    all_trivial_consistent = True
    for rc, dev in report.deviations():
        if dev > margin * rc.tail and dev > tol:
            established.append(rc.class_index)
        if dev > tol or rc.tail > tol:
            all_trivial_consistent = False
    if established:
        verdict = "instability evidence: yes"
    elif all_trivial_consistent:
        verdict = "no evidence (trivial within tolerance; not a stability proof)"
    else:
        verdict = "inconclusive (tails swamp the coefficients)"
    return {
        "verdict": verdict,
        "established_classes": established,
        "margin_factor": margin,
        "tolerance": tol,
        "trivial_flag": report.trivial,
    }


@dataclass(frozen=True)
class LineFieldSystem:
    values: tuple  # base critical values, one row each
    system: np.ndarray  # I - Psi-matrix; full rank obstructs invariant line fields
    coupling: np.ndarray  # class-row coefficient data matrix (zero row <=> dead class)
    singular_values: tuple
    rank: int
    full_rank: bool

    def to_json_obj(self):
        return {
            "values": [[v.real, v.imag] for v in self.values],
            "system": [[[x.real, x.imag] for x in row] for row in self.system],
            "singular_values": list(self.singular_values),
            "rank": self.rank,
            "full_rank": self.full_rank,
        }


def line_field_system(cd: CriticalData, values=None, series_tol: float = 1e-11,
                      n_max: int = 300, escape_radius: float = 1e6,
                      check_summability: bool = True) -> LineFieldSystem:
    """Rank diagnostics of the relation system over summable critical values.

    Row i uses critical value d_i as base: diagonal 1 - Psi^(i)_i, off
    diagonal -Psi^(i)_j. Full numerical rank is the mechanism excluding
    invariant line fields; only the rank is reported, never the conclusion.
    The coupling matrix C[i][j] = sum_{class i} b_k A(1, d_j, c_k) is
    reported alongside; zeroed residues of a class empty its row.
    """
    if values is None:
        values = []
        for rep, _ in cd.value_classes:
            if classify_value(cd.map, rep, n_max=n_max, escape_radius=escape_radius).verdict == SUMMABLE:
                values.append(rep)
        if not values:
            raise SummabilityPreconditionError("no summable critical values found")
    values = [complex(v) for v in values]
    q = len(values)
    class_indices = [cd.class_of_value(v) for v in values]
    psi = np.zeros((q, q), dtype=complex)
    for i, v in enumerate(values):
        rep = relation_coefficients(cd, v, series_tol=series_tol, n_max=n_max,
                                    escape_radius=escape_radius,
                                    check_summability=check_summability)
        for j, cj in enumerate(class_indices):
            psi[i, j] = rep.coefficient_for_class(cj).value
    system = np.eye(q, dtype=complex) - psi
    coupling = psi.T.copy()  # row i: class-i residues against every base
    svals = np.linalg.svd(system, compute_uv=False)
    cutoff = max(svals) * max(q, 1) * 1e-10 if len(svals) else 0.0
    rank = int(np.sum(svals > cutoff))
    return LineFieldSystem(tuple(values), system, coupling, tuple(float(s) for s in svals),
                           rank, rank == q)
