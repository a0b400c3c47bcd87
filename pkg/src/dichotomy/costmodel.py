"""Communication cost estimates for the dichotomy and cyclic reduction schemes."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass


@dataclass(frozen=True)
class CostParams:
    """``alpha`` latency per message, ``beta`` time per transferred real,
    ``gamma`` time per addition, ``l`` series width, ``p`` rank count."""

    alpha: float
    beta: float
    gamma: float
    l: float
    p: int

    def __post_init__(self):
        for name in ("alpha", "beta", "gamma", "l"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.p < 2:
            raise ValueError("p must be >= 2")


def _log2p(p):
    lg = math.log2(p)
    if lg != int(lg):
        warnings.warn(f"p={p} is not a power of two; using ceil(log2 p)", stacklevel=3)
        return float(math.ceil(lg))
    return lg


def cost_model(params):
    """Return ``(t_dichotomy, t_cyclic)``.

    ``t_dichotomy = alpha (log2 p + 1) log2 p + l (log2 p - (p-1)/p)(gamma + 2 beta)``
    ``t_cyclic = 2 log2 p (alpha + l beta + l gamma)``
    """
    a, b, g, l, p = params.alpha, params.beta, params.gamma, params.l, params.p
    lg = _log2p(p)
    t_dich = a * (lg + 1.0) * lg + l * (lg - (p - 1) / p) * (g + 2.0 * b)
    t_cyc = 2.0 * lg * (a + l * b + l * g)
    return t_dich, t_cyc


def dichotomy_approximation(params):
    """Latency-free shorthand ``2 log2 p (l beta + l gamma / 2)``."""
    lg = _log2p(params.p)
    return 2.0 * lg * (params.l * params.beta + params.l * params.gamma / 2.0)


def cost_table(p_max, alpha=0.0, beta=1.0, gamma=1.0, l=1.0):
    """Rows ``(p, t_dichotomy, t_cyclic, approximation)`` for p = 2, 4, ..., p_max."""
    rows = []
    p = 2
    while p <= p_max:
        cp = CostParams(alpha, beta, gamma, l, p)
        t_dich, t_cyc = cost_model(cp)
        rows.append((p, t_dich, t_cyc, dichotomy_approximation(cp)))
        p *= 2
    return rows
