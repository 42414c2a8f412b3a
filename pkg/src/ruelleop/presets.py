"""Engineered parameter sets with closed-form behaviour, used as test oracles.

landing_preset builds f = a + b sin z whose first critical value lands on a
chosen repelling fixed point in one step. With d1 = a + b = p + 2 pi k the
landing f(d1) = p is exact algebra:

    b = 2 pi k / (1 - sin p),   a = p - b sin p.

All downstream series based at d1 then have geometric closed forms with
ratio 1/multiplier, which the test suite freezes as expected values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .maps import EntireMap, fixed_points, normalize


@dataclass(frozen=True)
class LandingPreset:
    raw_map: EntireMap
    map: EntireMap  # normalized: fixes 0 and 1
    p_raw: complex  # the repelling fixed point of the raw map
    p: complex  # its image under the normalization
    d1_raw: complex
    d1: complex  # summable critical value of the normalized map, g(d1) = p
    d2: complex  # the other critical value
    multiplier: complex  # g'(p) = f'(p_raw)
    fixed_pair: tuple  # fixed points sent to (0, 1)

    @property
    def scale(self):
        return self.map.normalization[0]

    @property
    def shift(self):
        return self.map.normalization[1]

    def pull_back(self, z):
        """Coordinates of a raw-plane point in the normalized plane."""
        alpha, beta = self.map.normalization
        return (complex(z) - beta) / alpha


def landing_preset(p: float = 0.3, k: int = 1, exclusion: float = 0.35,
                   search_radius: float = 14.0) -> LandingPreset:
    """Build and normalize the landing-orbit family member.

    The normalization pair is chosen among fixed points away from the
    landing point p and away from the critical orbit, so p and d1 survive
    as ordinary points of the normalized plane.
    """
    p = float(p)
    b = 2 * math.pi * k / (1 - math.sin(p))
    a = p - b * math.sin(p)
    raw = EntireMap((a,), (0, b), (0, 1))
    lam = raw.evaluate(p, 1)
    if abs(lam) <= 1:
        raise ValueError(f"landing point p={p} is not repelling (|f'(p)|={abs(lam):.3f})")
    d1_raw = a + b
    d2_raw = a - b

    fps = fixed_points(raw, radius=search_radius)
    avoid = [p, d1_raw, d2_raw]
    usable = [q for q in fps if all(abs(q - w) > exclusion for w in avoid)]
    if len(usable) < 2:
        raise ValueError("not enough fixed points clear of the landing data")
    q0, q1 = usable[0], usable[1]
    g = normalize(raw, fixed_pair=(q0, q1))
    alpha, beta = g.normalization
    pull = lambda z: (z - beta) / alpha
    preset = LandingPreset(raw, g, complex(p), pull(p), complex(d1_raw), pull(d1_raw),
                           pull(d2_raw), lam, (q0, q1))
    # sanity: the landing must survive normalization to near machine precision
    if abs(g.evaluate(preset.d1) - preset.p) > 1e-9:
        raise ValueError("landing relation lost under normalization")
    return preset
