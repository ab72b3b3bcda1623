"""Special functions used by the outage and capacity closed forms."""

from __future__ import annotations

import math

import numpy as np
from scipy import special as sp

_GAMMA_MAX = 171.6243769563027


def gauss_q(x):
    """Gaussian tail probability Q(x) = P(N(0,1) > x)."""
    return 0.5 * sp.erfc(np.asarray(x, dtype=float) / math.sqrt(2.0))


def erfi(x):
    """Imaginary error function, -i erf(ix), via the Dawson integral.

    erfi(x) = 2/sqrt(pi) * exp(x^2) * F(x), with F the Dawson function.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 26.6):
        raise OverflowError("erfi overflows double precision for |x| > 26.6")
    return 2.0 / math.sqrt(math.pi) * np.exp(x * x) * sp.dawsn(x)


def hyp2f2_1_1__32_2(x: float) -> float:
    """2F2((1, 1); (3/2, 2); x) for x >= 0.

    Power series sum_k x^k / ((3/2)_k (k+1)) with Neumaier compensated
    summation; stops once a term drops below 1e-17 of the running sum.
    """
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"argument must be finite, got {x}")
    if x < 0:
        raise ValueError(f"argument must be >= 0, got {x}")
    if x > 700.0:
        # grows like exp(x) / x^(3/2)
        raise OverflowError(f"2F2 overflows double precision at x = {x}")
    total, comp = 1.0, 0.0
    term = 1.0
    k = 0
    while True:
        term *= x * (k + 1) / ((k + 1.5) * (k + 2))
        k += 1
        t = total + term
        if abs(total) >= abs(term):
            comp += (total - t) + term
        else:
            comp += (term - t) + total
        total = t
        if term < 1e-17 * abs(total + comp) or k > 10000:
            break
    return total + comp


def gamma(x):
    """Euler Gamma function for real arguments.

    Raises OverflowError above ~171.62 instead of returning inf.
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr > _GAMMA_MAX):
        raise OverflowError("Gamma overflows double precision above 171.62")
    if np.any((arr <= 0) & (arr == np.floor(arr))):
        raise ValueError("Gamma has poles at non-positive integers")
    out = sp.gamma(arr)
    return float(out) if out.ndim == 0 else out
