"""Plane-integration verification checks, packaged as reusable routines.

Each check produces a CheckResult whose pass condition is
lhs <= rhs + error_budget; budgets aggregate quadrature error bounds and
truncation tails and are reported, never silently consumed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._summation import csum
from .errors import UnsupportedBranchStructureError
from .gamma import GammaCombination, QuadratureConfig, l1_norm
from .maps import CriticalData
from .transfer import BranchWindow, apply, apply_with_drop, iterate, preimages


@dataclass(frozen=True)
class CheckResult:
    name: str
    lhs: float
    rhs: float
    error_budget: float
    passed: bool
    details: dict = field(default_factory=dict)

    def to_json_obj(self):
        return {
            "name": self.name,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "error_budget": self.error_budget,
            "passed": self.passed,
            "details": {k: v for k, v in self.details.items()},
        }


def _result(name, lhs, rhs, budget, **details):
    return CheckResult(name, float(lhs), float(rhs), float(budget),
                       bool(lhs <= rhs + budget), details)


def contraction_check(cd: CriticalData, phi: GammaCombination,
                      cfg: QuadratureConfig | None = None) -> CheckResult:
    """L1 norm must not grow under the operator (up to budget)."""
    if not phi.terms:
        return _result("contraction", 0.0, 0.0, 0.0)
    image = apply(cd, phi)
    lhs, lhs_err = l1_norm(image, cfg)
    rhs, rhs_err = l1_norm(phi, cfg)
    # truncated critical terms carry L1 mass <= |w| |gamma_a(c)| * ||gamma_d||;
    # bound the per-term factor by the rim estimate of the kernel sums
    trunc = math.fsum(abs(w) for _, w in phi.terms) * cd.tail_bound * 8.0 * max(
        1.0, max(abs(a * (a - 1)) for a, _ in phi.terms)
    ) * max(1.0, rhs)
    budget = lhs_err + rhs_err + trunc
    return _result("contraction", lhs, rhs, budget,
                   lhs_error=lhs_err, rhs_error=rhs_err, truncation=trunc)


def neumann_bound_check(cd: CriticalData, x, a, n_terms: int = 8,
                        cfg: QuadratureConfig | None = None) -> CheckResult:
    """Partial sums of the damped operator series obey the geometric L1 bound."""
    x = complex(x)
    if abs(x) >= 1:
        raise ValueError("requires |x| < 1")
    base = GammaCombination.single(a)
    partial = base
    phi = base
    xn = 1 + 0j
    dropped_mass = 0.0
    for _ in range(n_terms):
        phi, dropped = apply_with_drop(cd, phi)
        dropped_mass += dropped
        xn *= x
        partial = partial + phi.scaled(xn)
    lhs, lhs_err = l1_norm(partial, cfg)
    base_norm, base_err = l1_norm(base, cfg)
    rhs = base_norm / (1 - abs(x))
    # dropped leading pieces carry L1 mass <= |w| * 2 pi |ln f| <= ~9e3 |w|
    budget = (lhs_err + base_err / (1 - abs(x))
              + n_terms * cd.tail_bound * 8.0 * max(1.0, base_norm)
              + 9e3 * dropped_mass)
    return _result("neumann_bound", lhs, rhs, budget,
                   x=abs(x), n_terms=n_terms, margin=rhs - lhs, dropped_mass=dropped_mass)


@dataclass(frozen=True)
class BumpField:
    """C^1 polynomial bump (1 - r^2/rho^2)^2 supported on |z - center| < rho."""

    center: complex
    radius: float
    height: float = 1.0

    def __call__(self, z):
        r2 = np.abs(np.asarray(z, dtype=complex) - self.center) ** 2
        t = 1.0 - r2 / self.radius**2
        out = self.height * np.where(t > 0, t * t, 0.0)
        return out if np.ndim(z) else float(out)


def _bump_pairing_rhs(cd, mu: BumpField, phi, n_r=96, n_th=128):
    """inte mu * (f* phi) over the bump support, polar midpoint rule."""
    image = apply(cd, phi)
    for p in image.poles:
        if abs(p - mu.center) < 1.5 * mu.radius:
            raise ValueError(f"bump at {mu.center} too close to image pole {p}")

    def eval_at(n_r_, n_th_):
        r = (np.arange(n_r_) + 0.5) * (mu.radius / n_r_)
        th = (np.arange(n_th_) + 0.5) * (2 * math.pi / n_th_)
        R, TH = np.meshgrid(r, th)
        pts = mu.center + R * np.exp(1j * TH)
        vals = mu(pts) * image.eval(pts)
        area = (mu.radius / n_r_) * (2 * math.pi / n_th_)
        return complex(np.sum(vals * R) * area)

    fine = eval_at(n_r, n_th)
    coarse = eval_at(n_r // 2, n_th // 2)
    return fine, abs(fine - coarse)


def _bump_pairing_lhs(m, mu: BumpField, phi, outer_radius=30.0, coarse_step=0.15, refine=6):
    """inte B_f(mu) * phi over the plane: masked refinement on bump preimages."""

    def integrate(step, ref):
        n = int(2 * outer_radius / step)
        xs = -outer_radius + (np.arange(n) + 0.5) * step
        X, Y = np.meshgrid(xs, xs)
        pts = (X + 1j * Y).ravel()
        fz = m.evaluate(pts, 0)
        # cells whose image can touch the bump support
        fp = m.evaluate(pts, 1)
        reach = mu.radius + step * (1.0 + np.abs(fp))
        mask = np.abs(fz - mu.center) <= reach
        pts = pts[mask]
        if len(pts) == 0:
            return 0j
        sub = (np.arange(ref) + 0.5) / ref - 0.5
        offs = (sub[None, :] + 1j * sub[:, None]).ravel() * step
        fine = (pts[:, None] + offs[None, :]).ravel()
        fzf = m.evaluate(fine, 0)
        fpf = m.evaluate(fine, 1)
        muv = mu(fzf)
        live = (muv > 0) & (np.abs(fpf) > 1e-12)
        if not np.any(live):
            return 0j
        fine, fzf, fpf, muv = fine[live], fzf[live], fpf[live], muv[live]
        integrand = muv * (np.conj(fpf) / fpf) * phi.eval(fine)
        return complex(np.sum(integrand)) * (step / ref) ** 2

    fine = integrate(coarse_step, refine)
    coarse = integrate(coarse_step * 1.6, max(refine - 2, 3))
    far_tail = _preimage_far_tail(m, mu, phi, outer_radius)
    return fine, abs(fine - coarse), far_tail


def _preimage_far_tail(m, mu: BumpField, phi, outer_radius):
    """Mass of bump preimage components outside the integration disc.

    Change of variables per branch bounds each component's contribution by
    pi rho^2 * max|phi| / |f'(y)|^2 at the branch point; branches are
    enumerated far past the disc and the remainder extrapolated from the
    cubic decay of the last enumerated ring.
    """
    try:
        ys = preimages(m, mu.center, BranchWindow(k_range=600))
    except UnsupportedBranchStructureError:
        return mu.height * 2 * math.pi * phi.abs_decay_coefficient() / outer_radius
    ys = ys[np.abs(ys) > outer_radius]
    if len(ys) == 0:
        return 0.0
    fpy = np.abs(m.evaluate(ys, 1))
    fpy = np.maximum(fpy, 1e-6)
    phimax = 8.0 * phi.abs_decay_coefficient() / np.maximum(np.abs(ys) - mu.radius, 1.0) ** 3
    per_branch = math.pi * mu.radius**2 * mu.height * phimax / fpy**2
    # remainder past the enumerated window decays cubically: bound by the
    # outermost ring's contribution times the ring count equivalent
    outer = float(np.sort(per_branch)[-4:].sum())
    return float(per_branch.sum()) * 1.5 + outer


def duality_check(cd: CriticalData, mu: BumpField, phi: GammaCombination,
                  outer_radius: float = 30.0, coarse_step: float | None = None,
                  refine: int = 6, n_r: int = 96, n_th: int = 128) -> CheckResult:
    """Beltrami pullback pairs with the operator: inte B_f(mu) phi = inte mu f* phi.

    lhs is |pairing difference| against rhs = 0; the budget combines the
    refinement deltas of both quadratures, the far preimage tail and the
    critical truncation mass on the bump.
    """
    m = cd.map
    if coarse_step is None:
        coarse_step = min(0.15, mu.radius / 3.3)  # islands must be resolved
    lhs_val, lhs_delta, far_tail = _bump_pairing_lhs(m, mu, phi, outer_radius, coarse_step, refine)
    rhs_val, rhs_delta = _bump_pairing_rhs(cd, mu, phi, n_r, n_th)
    max_gamma = max(abs(a * (a - 1)) for a, _ in phi.terms) if phi.terms else 0.0
    trunc = (
        mu.height
        * math.pi
        * mu.radius**2
        * 8.0
        * max_gamma
        * cd.tail_bound
        * math.fsum(abs(w) for _, w in phi.terms)
    )
    diff = abs(lhs_val - rhs_val)
    budget = 2.0 * (lhs_delta + rhs_delta) + far_tail + trunc
    return _result("duality", diff, 0.0, budget,
                   pairing_pullback=[lhs_val.real, lhs_val.imag],
                   pairing_operator=[rhs_val.real, rhs_val.imag],
                   lhs_delta=lhs_delta, rhs_delta=rhs_delta, far_tail=far_tail)
