"""Deterministic compensated summation helpers.

Scalar reductions go through math.fsum (exactly rounded, order independent);
array reductions keep a Neumaier carry per grid node and always run in the
stored term order, so repeated runs reproduce results bit for bit.
"""

from __future__ import annotations

import math

import numpy as np


def csum(values) -> complex:
    """Exactly rounded sum of an iterable of complex numbers."""
    re = []
    im = []
    for v in values:
        v = complex(v)
        re.append(v.real)
        im.append(v.imag)
    return complex(math.fsum(re), math.fsum(im))


class ArrayAccumulator:
    """Neumaier-compensated accumulator over numpy arrays of fixed shape."""

    def __init__(self, shape, dtype=complex):
        self._s = np.zeros(shape, dtype=dtype)
        self._c = np.zeros(shape, dtype=dtype)

    def add(self, v):
        t = self._s + v
        big = np.abs(self._s) >= np.abs(v)
        self._c += np.where(big, (self._s - t) + v, (v - t) + self._s)
        self._s = t

    @property
    def total(self):
        return self._s + self._c
