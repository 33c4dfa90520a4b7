"""Exact propagator doubles for verifying the loss machinery.

These implement the same `apply(v, t)` protocol as the learned propagator
but with closed-form semigroups, so loss identities can be checked exactly:
an exact semigroup must zero the identity and composition-law terms and make
the chained-interval term coincide with the final-state term.
"""

from __future__ import annotations

import numpy as np


class IdentityPropagator:
    """The do-nothing semigroup: apply(v, t) = v for every t."""

    def __init__(self, horizon: float = 1.0):
        self.horizon = horizon

    def apply(self, v, t):
        return np.asarray(v, dtype=np.float64)


class DecayPropagator:
    """Uniform exponential decay: apply(v, t) = base ** (-t) * v.

    With base 2 and integer times the scale factors are exact powers of two,
    so composed applications match single applications bit for bit, which is
    what the exact-semigroup checks need.  Any base > 1 gives a semigroup up
    to float rounding (~1e-16 relative).
    """

    def __init__(self, horizon: float = 1.0, base: float = 2.0):
        self.horizon = horizon
        self.base = base

    def factor(self, t):
        t = np.asarray(t, dtype=np.float64)
        if self.base == 2.0:
            return np.exp2(-t)
        return np.power(self.base, -t)

    def apply(self, v, t):
        v = np.asarray(v, dtype=np.float64)
        f = self.factor(t)
        if f.ndim == 1:
            f = f.reshape((-1,) + (1,) * (v.ndim - 1))
        return f * v
