"""Summability classification of points from their critical-orbit derivatives.

A point a is summable when sum_i 1/|(f^i)'(f(a))| converges (bounded orbit
case); unbounded orbits additionally need the weighted series
sum_i |f^i(f(a))| |ln|f^i(f(a))|| / |(f^i)'(f(a))|. Convergence of an
infinite series is not finitely decidable, so the classifier is an explicit
three-valued heuristic: it fits the late-term ratio in log space and only
declares a verdict when the fitted rate clears a 5% margin and the implied
tail is below tolerance. Every verdict ships its ratio trace.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .maps import BOUNDED, UNBOUNDED, UNDECIDED, EntireMap, orbit
from .transfer import BranchWindow, preimages
from .errors import UnsupportedBranchStructureError

SUMMABLE = "summable"
NOT_SUMMABLE = "not_summable"

RATE_DELTA = 0.05
DEFAULT_ESCAPE = 1e6


@dataclass(frozen=True)
class SummabilityReport:
    point: complex
    boundedness: str
    series1_partial: float
    series2_partial: float | None
    verdict: str
    ratio_trace: tuple
    n_terms: int
    tolerance: float
    diagnostics: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {
            "point": [self.point.real, self.point.imag],
            "boundedness": self.boundedness,
            "series1_partial": self.series1_partial,
            "series2_partial": self.series2_partial,
            "verdict": self.verdict,
            "ratio_trace": list(self.ratio_trace),
            "n_terms": self.n_terms,
            "tolerance": self.tolerance,
            "diagnostics": dict(self.diagnostics),
        }

    def csv_row(self):
        return [
            self.point.real,
            self.point.imag,
            self.verdict,
            self.series1_partial,
            self.boundedness,
        ]


def _rate_verdict(log_terms, tol):
    """(verdict, rate, log_tail) from log-magnitudes of series terms."""
    n = len(log_terms)
    window = min(10, max(3, n // 3))
    if n < window + 2:
        return UNDECIDED, None, None
    diffs = [b - a for a, b in zip(log_terms[-window - 1:-1], log_terms[-window:])
             if math.isfinite(a) and math.isfinite(b)]
    if len(diffs) < 3:
        return UNDECIDED, None, None
    rate = math.exp(float(np.mean(diffs)))
    if rate < 1.0 - RATE_DELTA:
        log_tail = log_terms[-1] + math.log(rate / (1.0 - rate))
        if log_tail < math.log(tol):
            return SUMMABLE, rate, log_tail
        return UNDECIDED, rate, log_tail
    if rate > 1.0 + RATE_DELTA and log_terms[-1] > -2.0:
        # terms grow and are not tiny: they cannot tend to 0
        return NOT_SUMMABLE, rate, None
    return UNDECIDED, rate, None


def classify_value(m: EntireMap, value, n_max: int = 200, tol: float = 1e-9,
                   escape_radius: float = DEFAULT_ESCAPE) -> SummabilityReport:
    """Classify the series sum_i 1/|(f^i)'(w)| over the orbit of w = value.

    This is the convergence that makes x = 1 orbit series based at `value`
    absolutely convergent; classify() wraps it with the critical-orbit
    indexing (orbit of f(a)).
    """
    w = complex(value)
    orb = orbit(m, w, n_max, escape_radius)
    log_terms1 = [-L for L in orb.log_deriv_abs]  # log 1/|(f^i)'(w)|
    terms1 = [math.exp(min(t, 700.0)) for t in log_terms1]
    series1 = math.fsum(terms1)

    verdict1, rate1, _ = _rate_verdict(log_terms1, tol)
    ratio_trace = tuple(
        math.exp(b - a) if math.isfinite(a) and math.isfinite(b) else math.inf
        for a, b in zip(log_terms1[:-1], log_terms1[1:])
    )

    series2 = None
    verdict = verdict1
    diag = {"rate1": rate1, "orbit_length": len(orb) - 1}
    # unbounded orbits need the weighted series as well; undecided
    # boundedness is treated the same way (strictly more conservative)
    if orb.boundedness != BOUNDED:
        log_terms2 = []
        for pt, lt in zip(orb.points, log_terms1):
            mod = abs(pt)
            if mod <= 0:
                log_terms2.append(-math.inf)
                continue
            lnmod = math.log(mod)
            log_terms2.append(lnmod + math.log(abs(lnmod)) + lt if lnmod != 0 else lt)
        series2 = math.fsum(math.exp(min(t, 700.0)) for t in log_terms2)
        verdict2, rate2, _ = _rate_verdict(log_terms2, tol)
        diag["rate2"] = rate2
        if verdict1 == SUMMABLE and verdict2 == SUMMABLE:
            verdict = SUMMABLE
        elif NOT_SUMMABLE in (verdict1, verdict2):
            verdict = NOT_SUMMABLE
        else:
            verdict = UNDECIDED
    return SummabilityReport(w, orb.boundedness, series1, series2, verdict,
                             ratio_trace, len(orb) - 1, tol, diag)


def classify(m: EntireMap, a, n_max: int = 200, tol: float = 1e-9,
             escape_radius: float = DEFAULT_ESCAPE) -> SummabilityReport:
    """Summability of the point a: the series run over the orbit of f(a)."""
    report = classify_value(m, m.evaluate(complex(a), 0), n_max, tol, escape_radius)
    return SummabilityReport(complex(a), report.boundedness, report.series1_partial,
                             report.series2_partial, report.verdict, report.ratio_trace,
                             report.n_terms, report.tolerance, report.diagnostics)


def separation_diagnostics(m: EntireMap, a, cd=None, n_max: int = 200,
                           window: BranchWindow = BranchWindow(k_range=40)) -> dict:
    """Informational surrogates for the plane-topology conditions on the orbit closure.

    Reports the minimum distance from enumerated preimages of f(a) to the
    orbit closure, the closure's bounding box and point count, and whether
    the orbit is finite (eventually periodic). Nothing here is a verdict:
    plane separation and measure conditions are not finitely decidable.
    """
    a = complex(a)
    fa = m.evaluate(a, 0)
    orb = orbit(m, fa, n_max, DEFAULT_ESCAPE, guard_points=() if cd is None else cd.points())
    pts = np.asarray(orb.points, dtype=complex)
    out = {
        "point": a,
        "boundedness": orb.boundedness,
        "orbit_points": len(pts),
        "bounding_box": {
            "re": (float(pts.real.min()), float(pts.real.max())),
            "im": (float(pts.imag.min()), float(pts.imag.max())),
        },
    }
    zN = pts[-1]
    finite_closure = None
    for i in range(len(pts) - 1):
        if abs(zN - pts[i]) < 1e-9 * (1 + abs(zN)):
            finite_closure = len(set(np.round(pts[i:], 9).tolist()))
            break
    if finite_closure is not None:
        out["finite_orbit_closure"] = f"finite orbit closure, {finite_closure} points"
    try:
        pres = preimages(m, fa, window)
        dists = np.abs(pres[:, None] - pts[None, :]).min(axis=1)
        out["preimage_min_distance"] = float(dists.min())
        out["preimage_count"] = int(len(pres))
    except UnsupportedBranchStructureError:
        out["preimage_min_distance"] = None
        out["preimage_note"] = "branch enumeration unsupported for this shape"
    return out
