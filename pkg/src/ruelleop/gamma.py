"""Rational kernels gamma_a(z) = a(a-1)/(z(z-1)(z-a)) and their L1 calculus.

gamma_a has simple poles at 0, 1 and a and decays like |z|^-3, which makes
finite weighted combinations integrable over the plane. l1_norm integrates
such a combination by subtracting a smoothly windowed copy of each pole's
singular part (integrated in closed form) and applying a midpoint rule to
the bounded remainder, plus an exact asymptotic tail beyond a cutoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._summation import ArrayAccumulator, csum
from .errors import DegeneracyError, PoleEvaluationError, QuadratureConfigError

POLE_TOL = 1e-12
BASE_EXCLUSION = 1e-9
MERGE_TOL = 1e-9


def gamma_eval(a, z):
    """gamma_a(z) = a(a-1)/(z(z-1)(z-a)); z may be a scalar or ndarray.

    Bases beyond 1e100 (escaped orbit points) are evaluated in the
    regrouped form (1/(z/a - 1)) * (a-1)/(z(z-1)) so a(a-1) never overflows.
    """
    a = complex(a)
    if abs(a) < BASE_EXCLUSION or abs(a - 1) < BASE_EXCLUSION:
        raise ValueError(f"base {a} too close to 0 or 1; kernel undefined there")
    arr = np.asarray(z, dtype=complex)
    huge = abs(a) > 1e100
    if arr.ndim == 0:
        zc = complex(arr)
        for pole, name in ((0j, "0"), (1 + 0j, "1"), (a, "a")):
            if abs(zc - pole) < POLE_TOL:
                raise PoleEvaluationError(f"evaluation at pole {name} = {pole}", pole=pole)
        if huge:
            return (1.0 / (zc / a - 1.0)) * (a - 1) / (zc * (zc - 1))
        return a * (a - 1) / (zc * (zc - 1) * (zc - a))
    with np.errstate(divide="ignore", invalid="ignore"):
        if huge:
            return (1.0 / (arr / a - 1.0)) * (a - 1) / (arr * (arr - 1))
        return a * (a - 1) / (arr * (arr - 1) * (arr - a))


@dataclass(frozen=True)
class GammaCombination:
    """Finite combination sum_j w_j * gamma_{a_j} with pairwise distinct bases."""

    terms: tuple  # ((base, weight), ...)

    @classmethod
    def build(cls, pairs) -> "GammaCombination":
        """Merge bases within 1e-9 (weights add), reject bases near 0 or 1."""
        kept = []
        for a, w in pairs:
            a, w = complex(a), complex(w)
            if abs(a) < BASE_EXCLUSION or abs(a - 1) < BASE_EXCLUSION:
                raise ValueError(f"base {a} within {BASE_EXCLUSION} of a fixed pole")
            for i, (b, wb) in enumerate(kept):
                if abs(a - b) <= MERGE_TOL:
                    kept[i] = (b, wb + w)
                    break
            else:
                kept.append((a, w))
        return cls(tuple((a, w) for a, w in kept if w != 0))

    @classmethod
    def single(cls, a, w=1.0) -> "GammaCombination":
        return cls.build([(a, w)])

    @property
    def bases(self):
        return tuple(a for a, _ in self.terms)

    @property
    def poles(self):
        return (0j, 1 + 0j) + self.bases

    def residue_at(self, p) -> complex:
        p = complex(p)
        if abs(p) <= MERGE_TOL:
            return csum(w * (a - 1) for a, w in self.terms)
        if abs(p - 1) <= MERGE_TOL:
            return csum(-w * a for a, w in self.terms)
        for a, w in self.terms:
            if abs(p - a) <= MERGE_TOL:
                return w
        return 0j

    def decay_coefficient(self) -> complex:
        """Leading coefficient of the |z|^-3 asymptotic: sum_j w_j a_j(a_j-1)."""
        return csum(w * a * (a - 1) for a, w in self.terms)

    def abs_decay_coefficient(self) -> float:
        return math.fsum(abs(w * a * (a - 1)) for a, w in self.terms)

    def scaled(self, factor) -> "GammaCombination":
        return GammaCombination(tuple((a, w * complex(factor)) for a, w in self.terms))

    def __add__(self, other: "GammaCombination") -> "GammaCombination":
        return GammaCombination.build(list(self.terms) + list(other.terms))

    def eval(self, z):
        """Compensated evaluation in stored term order."""
        arr = np.asarray(z, dtype=complex)
        if arr.ndim == 0:
            return csum(w * gamma_eval(a, complex(arr)) for a, w in self.terms)
        acc = ArrayAccumulator(arr.shape)
        for a, w in self.terms:
            acc.add(w * gamma_eval(a, arr))
        return acc.total

    def __call__(self, z):
        return self.eval(z)

    def to_json_obj(self):
        return [{"a": [a.real, a.imag], "w": [w.real, w.imag]} for a, w in self.terms]

    @classmethod
    def from_json_obj(cls, obj) -> "GammaCombination":
        return cls.build([(complex(*t["a"]), complex(*t["w"])) for t in obj])


def combo_eval(phi: GammaCombination, z):
    return phi.eval(z)


@dataclass(frozen=True)
class QuadratureConfig:
    """Plane-quadrature knobs for l1_norm.

    pole_radius caps the singularity window around each pole (windows shrink
    automatically below half the nearest-neighbour distance unless
    adaptive_patches is off, in which case an overlap raises). far_radius is
    the analytic-tail cutoff; mid_grid the midpoint resolution per side;
    cells_per_patch controls micro-refinement of cells near pole windows.
    """

    pole_radius: float = 0.35
    far_radius: float | None = None
    cells_per_patch: int = 64
    mid_grid: int = 480
    adaptive_patches: bool = True

    def resolved_far(self, poles) -> float:
        maxmod = max([1.0] + [abs(p) for p in poles])
        auto = 2.2 * (1.0 + maxmod)
        far = self.far_radius if self.far_radius is not None else max(6.0, auto)
        if far < 2.0 * maxmod + 1.0:
            raise QuadratureConfigError(f"far_radius {far} must exceed 2*max|pole|+1 = {2*maxmod+1}")
        return float(far)

    def patch_radii(self, poles) -> list:
        poles = list(poles)
        radii = []
        for i, p in enumerate(poles):
            dmin = min((abs(p - q) for j, q in enumerate(poles) if j != i), default=math.inf)
            if not self.adaptive_patches and self.pole_radius >= dmin / 2:
                raise QuadratureConfigError(
                    f"pole windows of radius {self.pole_radius} overlap (min distance {dmin:.3g})"
                )
            radii.append(min(self.pole_radius, dmin / 2.5))
        return radii


def _window(t):
    """C^1 cutoff: 1 on [0, 1/2], smoothstep down to 0 at 1."""
    t = np.asarray(t, dtype=float)
    u = np.clip(2.0 * t - 1.0, 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)

# integral of _window over [0,1]: 1/2 + (1 - 1/2)/2 = 3/4
_WINDOW_INTEGRAL = 0.75


def _windowed_singular_part(phi, pts, poles, radii, residues):
    s = np.zeros(pts.shape, dtype=float)
    for p, rp, res in zip(poles, radii, residues):
        if res == 0:
            continue
        r = np.abs(pts - p)
        inside = r < rp
        if np.any(inside):
            with np.errstate(divide="ignore"):
                s[inside] += abs(res) * _window(r[inside] / rp) / r[inside]
    return s


def _midfield_integral(phi, poles, radii, residues, far, n_side, micro):
    h = 2.0 * far / n_side
    xs = -far + (np.arange(n_side) + 0.5) * h
    X, Y = np.meshgrid(xs, xs)
    pts = (X + 1j * Y).ravel()
    mods = np.abs(pts)
    inner = pts[mods <= far - h]
    boundary = pts[(mods > far - h) & (mods <= far + h)]

    near = np.zeros(inner.shape, dtype=bool)
    for p, rp in zip(poles, radii):
        near |= np.abs(inner - p) < 3.0 * rp

    def integrand(zs):
        vals = np.abs(phi.eval(zs)) - _windowed_singular_part(phi, zs, poles, radii, residues)
        return np.where(np.isfinite(vals), vals, 0.0)

    total = float(np.sum(integrand(inner[~near]))) * h * h

    mu = max(2, micro)
    sub = (np.arange(mu) + 0.5) / mu - 0.5
    offs = (sub[None, :] + 1j * sub[:, None]).ravel() * h
    if np.any(near):
        fine = (inner[near][:, None] + offs[None, :]).ravel()
        total += float(np.sum(integrand(fine))) * (h / mu) ** 2
    if len(boundary):
        # disc rim: count micro-centers inside the disc only
        fine = (boundary[:, None] + offs[None, :]).ravel()
        fine = fine[np.abs(fine) <= far]
        if len(fine):
            total += float(np.sum(integrand(fine))) * (h / mu) ** 2
    return total


def _annulus_integral(phi, r_in, r_out, n_r, n_th):
    """Polar midpoint integral of |phi| over r_in < |z| < r_out (pole free)."""
    edges = np.geomspace(r_in, r_out, n_r + 1)
    mids = np.sqrt(edges[:-1] * edges[1:])
    widths = np.diff(edges)
    th = (np.arange(n_th) + 0.5) * (2 * math.pi / n_th)
    R, TH = np.meshgrid(mids, th)
    pts = (R * np.exp(1j * TH)).ravel()
    vals = np.abs(phi.eval(pts)) * R.ravel()
    Wgt = np.tile(widths, (n_th, 1)).ravel()
    return float(np.sum(vals * Wgt)) * (2 * math.pi / n_th)


TAIL_EXTENT = 6.0  # annulus outer radius as a multiple of far_radius


def l1_norm(phi: GammaCombination, cfg: QuadratureConfig | None = None):
    """Estimate of the plane integral of |phi| with a conservative error bound.

    Returns (value, error_bound). Windowed singular parts integrate in
    closed form, the bounded remainder by midpoint rule over the disc
    (micro-refined near poles and at the rim), a pole-free annulus out to
    6x far_radius by polar midpoint, and the rest by the exact cubic-decay
    asymptote. The bound combines both refinement deltas with an
    empirically calibrated asymptote error; downstream inequality checks
    must consume it.
    """
    if cfg is None:
        cfg = QuadratureConfig()
    if not phi.terms:
        return 0.0, 0.0
    poles = list(phi.poles)
    far = cfg.resolved_far(poles)
    radii = cfg.patch_radii(poles)
    residues = [phi.residue_at(p) for p in poles]

    # singular windows integrate in closed form: inte |res| W(r/rp)/r dm = 1.5*pi*|res|*rp
    window_part = math.fsum(1.5 * math.pi * abs(res) * rp for res, rp in zip(residues, radii))

    micro = max(2, int(round(math.sqrt(cfg.cells_per_patch))))
    fine = _midfield_integral(phi, poles, radii, residues, far, cfg.mid_grid, micro)
    coarse = _midfield_integral(phi, poles, radii, residues, far, max(cfg.mid_grid // 2, 16), micro)
    delta_mid = abs(fine - coarse)

    far2 = TAIL_EXTENT * far
    ann_fine = _annulus_integral(phi, far, far2, 64, 256)
    ann_coarse = _annulus_integral(phi, far, far2, 32, 128)
    delta_ann = abs(ann_fine - ann_coarse)

    # beyond far2 use the exact integral of the cubic-decay asymptote; its
    # accuracy is calibrated on the annulus where both are available
    lead = abs(phi.decay_coefficient())
    tail_value = 2.0 * math.pi * lead / far2
    ann_asym = 2.0 * math.pi * lead * (1.0 / far - 1.0 / far2)
    if ann_asym > 0:
        scale = tail_value / ann_asym  # = far / (far2 - far)
        tail_err = 2.0 * abs(ann_fine - ann_asym) * scale
    else:
        tail_err = tail_value  # no leading decay (cancellation): all of it is uncertain

    value = fine + window_part + ann_fine + tail_value
    error = delta_mid + 2.0 * delta_ann + tail_err + 1e-14 * (1 + abs(value))
    return value, error


def beltrami_pullback(mu, m, z) -> complex:
    """mu(f(z)) * conj(f'(z)) / f'(z); |result| = |mu(f(z))|."""
    fp = m.evaluate(z, 1)
    if abs(fp) < 1e-12:
        raise DegeneracyError(f"f'({z}) = {fp}: pullback undefined at a critical point")
    return complex(mu(m.evaluate(z, 0))) * np.conj(fp) / fp
