"""Text formats for vectors and Toeplitz coefficients."""
from __future__ import annotations

import numpy as np

from .tridiag import ToeplitzTridiagonal


def read_vector(path):
    """First line ``N``, then one value per line."""
    with open(path) as fh:
        first = fh.readline().strip()
        try:
            n = int(first)
        except ValueError:
            raise ValueError(f"{path}: first line must be the length, got {first!r}") from None
        values = np.loadtxt(fh, ndmin=1)
    if values.shape != (n,):
        raise ValueError(f"{path}: header says {n} values, found {values.size}")
    return values


def write_vector(path, v):
    v = np.asarray(v, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{v.shape[0]}\n")
        for x in v:
            fh.write(f"{float(x)!r}\n")


def parse_toeplitz(text, n):
    """``"t_minus,t_zero,t_plus"`` -> :class:`ToeplitzTridiagonal` of order n."""
    parts = [s for s in text.replace(" ", "").split(",") if s]
    if len(parts) != 3:
        raise ValueError(f"expected 't_minus,t_zero,t_plus', got {text!r}")
    t_minus, t_zero, t_plus = (float(s) for s in parts)
    return ToeplitzTridiagonal(n, t_minus, t_zero, t_plus)


def make_rhs(kind, n, rng=None):
    """Named right-hand sides: ``ones``, ``random``, ``unit:<i>``, or a file path."""
    if kind == "ones":
        return np.ones(n)
    if kind == "random":
        return (rng or np.random.default_rng()).standard_normal(n)
    if kind.startswith("unit:"):
        v = np.zeros(n)
        v[int(kind[5:])] = 1.0
        return v
    v = read_vector(kind)
    if v.shape != (n,):
        raise ValueError(f"right-hand side file has {v.size} values, expected {n}")
    return v
