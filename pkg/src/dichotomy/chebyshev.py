"""Chebyshev polynomials of the second kind, U_n(x), evaluated without overflow.

Outside [-1, 1] the closed form is written with ``a = arccosh|x|`` as
``U_n(x) = sign * sinh((n+1) a) / sinh(a)``, which avoids the cancellation of
``eta**(n+1) - eta**-(n+1)`` near ``|x| = 1``.
"""
from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass

from .errors import DomainError, Overflow

LOG_MAX = math.log(sys.float_info.max)


class Regime(enum.Enum):
    INSIDE = "inside"
    OUTSIDE = "outside"


@dataclass(frozen=True)
class ChebArgument:
    x: float
    eta: float | None
    regime: Regime

    @classmethod
    def of(cls, x):
        x = float(x)
        if abs(x) > 1.0:
            return cls(x, eta(x), Regime.OUTSIDE)
        return cls(x, None, Regime.INSIDE)


def eta(x):
    """Growth base with ``|eta| >= 1``: ``sign(x) * (|x| + sqrt(x^2 - 1))``."""
    if abs(x) < 1.0:
        raise DomainError(f"eta undefined for |x| < 1 (x={x})")
    return math.copysign(math.exp(math.acosh(abs(x))), x)


def _parity(n, x):
    return -1.0 if (x < 0 and n % 2) else 1.0


def u_recurrence(n, x):
    """Three-term recurrence U_{k+1} = 2x U_k - U_{k-1}."""
    if n < -1:
        raise DomainError("degree must be >= -1")
    if n == -1:
        return 0.0
    x = float(x)
    prev, cur = 0.0, 1.0
    for k in range(n):
        # xu + (xu - prev) == 2x u - prev, without overflowing before the result does
        xu = x * cur
        prev, cur = cur, xu + (xu - prev)
        if math.isinf(cur):
            raise Overflow(f"U_{k + 1}({x}) overflows")
    return cur


def u_closed(n, x):
    """Closed form for ``|x| >= 1``; exact limit ``(n+1) (+-1)^n`` at ``x = +-1``."""
    if abs(x) < 1.0:
        raise DomainError(f"closed form needs |x| >= 1 (x={x})")
    if n == -1:
        return 0.0
    if abs(x) == 1.0:
        return (n + 1) * _parity(n, x)
    a = math.acosh(abs(x))
    try:
        if (n + 1) * a < 20.0:
            val = math.sinh((n + 1) * a) / math.sinh(a)
        else:
            # sinh((n+1)a) alone may overflow while the quotient does not
            val = math.exp(_log_sinh((n + 1) * a) - _log_sinh(a))
    except OverflowError as exc:
        raise Overflow(f"U_{n}({x}) overflows") from exc
    if math.isinf(val):
        raise Overflow(f"U_{n}({x}) overflows")
    return _parity(n, x) * val


def _log_sinh(y):
    # log(sinh(y)) for y > 0 without forming sinh(y)
    return y - math.log(2.0) + math.log1p(-math.exp(-2.0 * y))


def u_log_magnitude(n, x, dominant_only=False):
    """Return ``(log|U_n(x)|, sign)`` for ``|x| > 1``.

    With ``dominant_only`` the subdominant power is dropped, i.e. the value is
    that of ``eta**(n+1) / (2 sqrt(x^2 - 1))``; its relative error against the
    exact value is ``eta**(-2(n+1))``.
    """
    if abs(x) <= 1.0:
        raise DomainError(f"log magnitude needs |x| > 1 (x={x})")
    if n == -1:
        return -math.inf, 0.0
    a = math.acosh(abs(x))
    if dominant_only:
        log_abs = (n + 1) * a - _log_sinh(a) - math.log(2.0)
    else:
        log_abs = _log_sinh((n + 1) * a) - _log_sinh(a)
    return log_abs, _parity(n, x)


def u_inside(n, x):
    """U_n(x) for ``|x| <= 1`` via ``sin((n+1) theta) / sin(theta)``.

    ``theta`` comes from ``2 asin(sqrt((1 -+ x)/2))`` so ``x`` close to +-1
    keeps full relative accuracy.
    """
    if abs(x) > 1.0:
        raise DomainError(f"trigonometric form needs |x| <= 1 (x={x})")
    if n == -1:
        return 0.0
    if abs(x) == 1.0:
        return (n + 1) * _parity(n, x)
    if x >= 0.0:
        theta = 2.0 * math.asin(math.sqrt((1.0 - x) / 2.0))
        return math.sin((n + 1) * theta) / math.sin(theta)
    phi = 2.0 * math.asin(math.sqrt((1.0 + x) / 2.0))
    return _parity(n, -1.0) * math.sin((n + 1) * phi) / math.sin(phi)


def u_eval(n, x):
    """U_n(x) on the whole real line (trigonometric inside, closed form outside)."""
    if abs(x) <= 1.0:
        return u_inside(n, x)
    return u_closed(n, x)


def n_overflow_threshold(x):
    """Largest degree N_0 for which U_{N_0}(x) is a finite double (``|x| > 1``)."""
    if abs(x) <= 1.0:
        raise DomainError(f"threshold defined only for |x| > 1 (x={x})")
    a = math.acosh(abs(x))
    # leading-order guess, then settle on the exact boundary of the log magnitude
    n = max(int(math.floor((LOG_MAX + _log_sinh(a) + math.log(2.0)) / a)) - 1, 0)
    while u_log_magnitude(n, x)[0] > LOG_MAX and n > 0:
        n -= 1
    while u_log_magnitude(n + 1, x)[0] <= LOG_MAX:
        n += 1
    # guard the last ulp: the closed form must actually evaluate
    while n > 0:
        try:
            u_closed(n, x)
            break
        except Overflow:
            n -= 1
    return n
