"""Hermite polynomials and coefficients, Bessel J_m, Rayleigh moments, activations."""
import decimal
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from numpy.polynomial.hermite_e import hermegauss

from .errors import QuadratureNonConvergence

SQRT_2PI = math.sqrt(2 * math.pi)


def hermite_poly(k, x):
    """Probabilists' Hermite polynomial h_k(x) by the three-term recurrence."""
    if k < 0:
        raise ValueError("order must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if k == 0:
        return prev
    cur = x.copy()
    for j in range(1, k):
        prev, cur = cur, x * cur - j * prev
    return cur


def hermite_poly_deriv(k, x):
    # h_k' = k h_{k-1}
    if k == 0:
        return np.zeros_like(np.asarray(x, dtype=float))
    return k * hermite_poly(k - 1, x)


@dataclass(frozen=True)
class Activation:
    """An even activation with its derivative.

    ``kind`` is "hermite4", "logcosh" or "user"; the compiled kernels only know
    the first two and fall back to Python for user activations.
    """

    kind: str
    fn: Callable
    deriv: Callable

    def __call__(self, s):
        return self.fn(s)

    def check_parity(self, grid=None, tol=1e-10):
        """True when fn is even and deriv is odd on a symmetric grid."""
        s = np.linspace(0.0, 6.0, 241) if grid is None else np.abs(np.asarray(grid, dtype=float))
        even = np.max(np.abs(self.fn(s) - self.fn(-s)))
        odd = np.max(np.abs(self.deriv(s) + self.deriv(-s)))
        scale = max(1.0, float(np.max(np.abs(self.fn(s)))))
        return bool(even <= tol * scale and odd <= tol * scale)


def _h4(s):
    s2 = np.square(s)
    return s2 * s2 - 6.0 * s2 + 3.0


def _h4_deriv(s):
    return 4.0 * s ** 3 - 12.0 * s


def _logcosh(s):
    a = np.abs(s)
    # log cosh s = |s| + log(1 + e^{-2|s|}) - log 2, stable for large |s|
    return a + np.log1p(np.exp(-2.0 * a)) - math.log(2.0)


def hermite4():
    return Activation("hermite4", _h4, _h4_deriv)


def logcosh():
    return Activation("logcosh", _logcosh, np.tanh)


def user_activation(fn, deriv, check=True):
    act = Activation("user", fn, deriv)
    if check and not act.check_parity(tol=1e-8):
        raise ValueError("activation must be even with an odd derivative")
    return act


def activation_by_name(name):
    table = {"hermite4": hermite4, "h4": hermite4, "logcosh": logcosh}
    try:
        return table[name]()
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose hermite4 or logcosh") from None


@lru_cache(maxsize=16)
def _gauss_nodes(order):
    x, w = hermegauss(order)
    return x, w / SQRT_2PI


def _quad(f, k, order):
    x, w = _gauss_nodes(order)
    return float(np.sum(w * f(x) * hermite_poly(k, x)))


def hermite_coeff(act, k, order=80, tol=1e-8):
    """c_k = E[f(Z) h_k(Z)] for a standard normal Z.

    Gauss-Hermite quadrature (probabilists' weight) at ``order`` nodes, checked
    against twice as many nodes.
    """
    f = act.fn if isinstance(act, Activation) else act
    if order < 80:
        raise ValueError("quadrature order must be at least 80")
    coarse = _quad(f, k, order)
    fine = _quad(f, k, 2 * order)
    if abs(fine - coarse) > tol * max(1.0, abs(fine)):
        raise QuadratureNonConvergence(
            f"c_{k}: order {order} gives {coarse!r}, order {2 * order} gives {fine!r}"
        )
    return fine


def hermite_coeffs(act, max_order=6, order=80):
    return np.array([hermite_coeff(act, k, order) for k in range(max_order + 1)])


def bessel_j(m, z):
    """Bessel J_m(z) of integer order m >= 0 by its ascending series.

    Summation stops once the terms have passed their peak and dropped below
    1e-16. The terms grow to about e^|z| before they cancel, so the sum is
    carried in 50-digit decimal arithmetic; that covers |z| < 50.
    """
    if m < 0 or int(m) != m:
        raise ValueError("order must be a non-negative integer")
    m = int(m)
    if abs(z) >= 50:
        raise ValueError("series evaluation is limited to |z| < 50")
    with decimal.localcontext() as ctx:
        ctx.prec = 50
        half = decimal.Decimal(float(z)) / 2
        term = (half ** m if m else decimal.Decimal(1)) / math.factorial(m)
        total = term
        q = -half * half
        tiny = decimal.Decimal("1e-16")
        s = 0
        while True:
            s += 1
            term = term * q / (s * (m + s))
            total += term
            if abs(term) < tiny and s > abs(half):
                break
        return float(total)


def rayleigh_moment(sigma, k):
    """E[Y^k] for a Rayleigh variable with scale parameter sigma."""
    if sigma <= 0 or k < 1:
        raise ValueError("need sigma > 0 and k >= 1")
    return sigma ** k * 2 ** (k / 2) * math.gamma(1 + k / 2)
