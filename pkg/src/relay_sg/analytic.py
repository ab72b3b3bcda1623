"""Closed-form SNR densities, outage probabilities and ergodic capacities.

Conventions
-----------
* ``s`` is the SNR threshold (linear).
* ``lambda_bar`` parameterises the coherent scheme, ``lambda_hat`` the
  incoherent and random-channel schemes (see :mod:`relay_sg.model`).
* Capacities are in nats; divide by ``ln 2`` for bits/s/Hz.

The alpha = 4 incoherent formulas are sums over taps weighted by the
partial-fraction coefficients A_d. For long, closely spaced profiles these
sums cancel catastrophically, so the same quantities are also available in
product form, integrated over an angle::

    P_out(s) = 2/pi * int_0^{pi/2} prod_d [1 + lambda_hat^2 a_d / (4 s cos^2 t)]^-1 dt

and the dispatch picks that route whenever the profile is ill-conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy import special as sp

from .model import EffectiveDensity, TapProfile
from .special import erfi, gamma, gauss_q, hyp2f2_1_1__32_2  # noqa: F401  (re-exported)

SCHEMES = ("coherent", "incoherent", "random")

# Validity of the small-s expansions: s <= SADDLE_LIMIT * density^(alpha/2).
SADDLE_LIMIT = 0.1

# Above this lambda_bar the Erfi and 2F2 terms of the coherent capacity are
# both ~exp(lambda_bar^2/4) and their difference loses too many digits.
_COH_CAPACITY_SERIES_MAX = 6.0


def _as_float_array(s):
    arr = np.asarray(s, dtype=float)
    return arr, arr.ndim == 0


def _ret(out, scalar):
    return float(out) if scalar else out


def _is_alpha4(alpha: float) -> bool:
    return abs(alpha - 4.0) < 1e-12


# ---------------------------------------------------------------------------
# asymptotic constants

def g_const(alpha: float, lambda_bar: float) -> float:
    """Prefactor of the coherent saddle-point density (includes lambda_bar)."""
    return ((2.0 / alpha) ** (1.0 / (alpha - 2.0)) / math.sqrt(math.pi * (alpha - 2.0))
            * lambda_bar ** (alpha / (2.0 * (alpha - 2.0))))


def log_b_const(alpha: float, taps: TapProfile) -> float:
    """Natural log of :func:`b_const`; finite where B itself overflows (many taps)."""
    D = taps.tap_count
    return (sp.gammaln(((alpha - 2.0) * D + 1.0) / 2.0)
            + (D + 1.0) * math.log(alpha / 2.0)
            + ((alpha - 2.0) * D - 1.0) / 2.0 * math.log(alpha / (alpha - 2.0))
            - sp.gammaln(D)
            - 0.5 * math.log(math.pi * (alpha - 2.0))
            - float(np.sum(np.log(taps.powers))))


def b_const(alpha: float, taps: TapProfile) -> float:
    """Small-s constant of the incoherent density for a D-tap profile."""
    return math.exp(log_b_const(alpha, taps))


def log_c_const(alpha: float, channels: int) -> float:
    """Natural log of :func:`c_const`."""
    Q = int(channels)
    if Q < 1:
        raise ValueError("channel count must be >= 1")
    return (sp.gammaln(((alpha - 2.0) * Q + 1.0) / 2.0)
            + Q * sp.gammaln(alpha / 2.0)
            + 2.0 * Q * math.log(alpha / 2.0)
            + (1.0 - (alpha - 2.0) * Q) / 2.0 * math.log((alpha - 2.0) / alpha)
            - 0.5 * math.log(math.pi * (alpha - 2.0))
            - sp.gammaln(alpha * Q / 2.0)
            + alpha * Q / 2.0 * math.log(Q))


def c_const(alpha: float, channels: int) -> float:
    """Small-s constant of the random orthogonal-channel density with Q channels."""
    return math.exp(log_c_const(alpha, channels))


def saddle_valid(s, density: float, alpha: float):
    """True where ``s`` is inside the small-s regime of the saddle formulas."""
    return np.asarray(s) <= SADDLE_LIMIT * density ** (alpha / 2.0)


# ---------------------------------------------------------------------------
# coherent reception

def log_pdf_coh(s, lambda_bar: float, alpha: float):
    """Natural log of :func:`pdf_coh`, finite where the density underflows."""
    s, scalar = _as_float_array(s)
    if np.any(s <= 0):
        raise ValueError("pdf_coh requires s > 0")
    if not alpha > 2:
        raise ValueError("alpha must be > 2")
    x = 2.0 * lambda_bar ** (alpha / 2.0) / (alpha * s)
    log_pdf = (math.log(g_const(alpha, lambda_bar))
               - (alpha - 1.0) / (alpha - 2.0) * np.log(s)
               - (alpha - 2.0) / alpha * x ** (2.0 / (alpha - 2.0)))
    return _ret(log_pdf, scalar)


def pdf_coh(s, lambda_bar: float, alpha: float):
    """Density of the coherent SNR.

    Exact (one-sided Levy) for alpha = 4; for other alpha this is the
    small-s saddle-point form and is not normalised.
    """
    return np.exp(log_pdf_coh(s, lambda_bar, alpha))


def outage_coh_a4(s, lambda_bar: float):
    """P(SNR_coh < s) at alpha = 4: 2 Q(lambda_bar / sqrt(2 s)) = erfc(lambda_bar / (2 sqrt(s)))."""
    s, scalar = _as_float_array(s)
    if np.any(s <= 0):
        raise ValueError("outage_coh_a4 requires s > 0")
    return _ret(sp.erfc(lambda_bar / (2.0 * np.sqrt(s))), scalar)


# ---------------------------------------------------------------------------
# incoherent reception, alpha = 4

def _angular_outage(s: float, lambda_hat: float, a: np.ndarray) -> float:
    c2 = lambda_hat**2 * a / (4.0 * s)

    def f(t):
        return math.exp(-np.sum(np.log1p(c2 / math.cos(t) ** 2)))

    val, _ = integrate.quad(f, 0.0, math.pi / 2, epsabs=1e-15, epsrel=1e-12, limit=200)
    return 2.0 / math.pi * val


def _angular_pdf(s: float, lambda_hat: float, a: np.ndarray) -> float:
    D = a.size
    if s == 0.0:
        return 2.0 / (lambda_hat**2 * a[0]) if D == 1 else 0.0

    def f(t):
        k = lambda_hat**2 * a / (4.0 * math.cos(t) ** 2)
        prod = math.exp(-np.sum(np.log1p(k / s)))
        return prod * float(np.sum(k / (s + k))) / s

    val, _ = integrate.quad(f, 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-12, limit=200)
    return 2.0 / math.pi * val


def pdf_inc_a4(s, lambda_hat: float, taps: TapProfile):
    """Density of the incoherent SNR at alpha = 4.

    sum_d 2 A_d lambda_hat sqrt(a_d) / (4 s + a_d lambda_hat^2)^(3/2); finite
    at s = 0 for a single tap (2 / lambda_hat^2).
    """
    s, scalar = _as_float_array(s)
    if np.any(s < 0):
        raise ValueError("pdf_inc_a4 requires s >= 0")
    a = taps.powers
    if taps.tap_count == 1 or taps.well_conditioned:
        A = taps.coeffs
        terms = 2.0 * A * lambda_hat * np.sqrt(a) / (4.0 * s[..., None] + a * lambda_hat**2) ** 1.5
        out = terms.sum(axis=-1)
        lossy = np.abs(out) < 1e-6 * np.abs(terms).sum(axis=-1)
        if taps.tap_count > 1 and np.any(lossy):
            out = np.array(out)
            out[lossy] = [_angular_pdf(float(x), lambda_hat, a) for x in s[lossy]]
    else:
        out = np.array([_angular_pdf(float(x), lambda_hat, a) for x in s.ravel()]).reshape(s.shape)
    return _ret(out, scalar)


def outage_inc_a4(s, lambda_hat: float, taps: TapProfile):
    """P(SNR_inc < s) at alpha = 4: 1 - sum_d A_d sqrt(a_d) lambda_hat / sqrt(4 s + a_d lambda_hat^2)."""
    s, scalar = _as_float_array(s)
    if np.any(s < 0):
        raise ValueError("outage_inc_a4 requires s >= 0")
    a = taps.powers
    if taps.tap_count == 1:
        # 1 - 1/sqrt(1 + x) without cancellation at small x
        x = 4.0 * s / (a[0] * lambda_hat**2)
        out = -np.expm1(-0.5 * np.log1p(x))
    elif taps.well_conditioned:
        A = taps.coeffs
        ratio = np.sqrt(a) * lambda_hat / np.sqrt(4.0 * s[..., None] + a * lambda_hat**2)
        out = 1.0 - np.sum(A * ratio, axis=-1)
        small = out < 1e-6 * np.sum(np.abs(A))
        if np.any(small):
            # the tap sum cancels to ~eps * sum|A| here; use the product form
            out = np.array(out)
            out[small] = [_angular_outage(float(x), lambda_hat, a) if x > 0 else 0.0
                          for x in s[small]]
    else:
        out = np.array([_angular_outage(float(x), lambda_hat, a) if x > 0 else 0.0
                        for x in s.ravel()]).reshape(s.shape)
    return _ret(np.clip(out, 0.0, 1.0), scalar)


# ---------------------------------------------------------------------------
# small-s approximations (any alpha > 2)

def _power_law(log_const: float, s: np.ndarray, n: int, lambda_hat: float, alpha: float,
               density: bool) -> np.ndarray:
    # const * s^(n-1) / lh^(alpha n/2) (density) or const/n * (s / lh^(alpha/2))^n, in log space
    # so that large n neither overflows the constant nor underflows the power early
    log_x = np.log(np.where(s > 0, s, 1.0)) - 0.5 * alpha * math.log(lambda_hat)
    if density:
        log_out = log_const + (n - 1) * log_x - 0.5 * alpha * math.log(lambda_hat)
        zero = (s <= 0) & (n > 1)
    else:
        log_out = log_const - math.log(n) + n * log_x
        zero = s <= 0
    with np.errstate(over="ignore"):
        return np.where(zero, 0.0, np.exp(log_out))


def pdf_inc_smalls(s, lambda_hat: float, taps: TapProfile, alpha: float):
    """B_{D,alpha} s^(D-1) / lambda_hat^(alpha D / 2)."""
    s, scalar = _as_float_array(s)
    D = taps.tap_count
    return _ret(_power_law(log_b_const(alpha, taps), s, D, lambda_hat, alpha, True), scalar)


def outage_inc_smalls(s, lambda_hat: float, taps: TapProfile, alpha: float):
    """(B_{D,alpha} / D) (s / lambda_hat^(alpha/2))^D; valid for s << lambda_hat^(alpha/2)."""
    s, scalar = _as_float_array(s)
    D = taps.tap_count
    return _ret(_power_law(log_b_const(alpha, taps), s, D, lambda_hat, alpha, False), scalar)


def pdf_rand_smalls(s, lambda_hat: float, channels: int, alpha: float):
    s, scalar = _as_float_array(s)
    Q = int(channels)
    return _ret(_power_law(log_c_const(alpha, Q), s, Q, lambda_hat, alpha, True), scalar)


def outage_rand_smalls(s, lambda_hat: float, channels: int, alpha: float):
    """(C_{Q,alpha} / Q) (s / lambda_hat^(alpha/2))^Q."""
    s, scalar = _as_float_array(s)
    Q = int(channels)
    return _ret(_power_law(log_c_const(alpha, Q), s, Q, lambda_hat, alpha, False), scalar)


# ---------------------------------------------------------------------------
# ergodic capacity, alpha = 4

def _tail_integral(c: float) -> float:
    """J(c) = int_c^inf dt / (t^2 + 4 - c^2)."""
    kappa = 4.0 - c * c
    if abs(kappa) < 1e-3 * c * c:
        # removable singularity at c = 2: expand in kappa
        r = -kappa / (c * c)
        return sum(r**n / (2 * n + 1) for n in range(12)) / c
    if kappa > 0:
        root = math.sqrt(kappa)
        return math.atan2(root, c) / root          # arccot(c / root) / root
    root = math.sqrt(-kappa)
    return math.log((c + root) / 2.0) / root


def _capacity_inc_angular(lambda_hat: float, a: np.ndarray) -> float:
    # E ln(1+X) = int_0^inf (1 - F(s)) / (1 + s) ds with F in product form;
    # the inner integral runs over y = ln s.
    def inner(t):
        k = lambda_hat**2 * a / (4.0 * math.cos(t) ** 2)

        def g(y):
            s = math.exp(y)
            tail = -math.expm1(-np.sum(np.log1p(k / s)))
            return tail * s / (1.0 + s)

        lo = math.log(k.min()) - 40.0
        val, _ = integrate.quad(g, lo, 40.0, epsabs=0.0, epsrel=1e-10, limit=200,
                                points=[math.log(k.min()), math.log(k.max()), 0.0])
        return val

    val, _ = integrate.quad(inner, 0.0, math.pi / 2, epsabs=0.0, epsrel=1e-9, limit=100)
    return 2.0 / math.pi * val


def capacity_inc_a4(lambda_hat: float, taps: TapProfile) -> float:
    """Ergodic capacity E[ln(1 + SNR_inc)] in nats at alpha = 4.

    Per tap, with c = sqrt(a_d) lambda_hat, the term is
    2 A_d c / sqrt(4 - c^2) * arccot(c / sqrt(4 - c^2))   for c^2 < 4,
    2 A_d c / sqrt(c^2 - 4) * ln((c + sqrt(c^2 - 4)) / 2)  for c^2 > 4,
    joined continuously at c = 2 (value 2 A_d).
    """
    if not lambda_hat >= 0:
        raise ValueError("lambda_hat must be >= 0")
    if lambda_hat == 0:
        return 0.0
    a = taps.powers
    if taps.tap_count == 1 or taps.well_conditioned:
        A = taps.coeffs
        c = np.sqrt(a) * lambda_hat
        return float(sum(2.0 * Ad * cd * _tail_integral(cd) for Ad, cd in zip(A, c)))
    return _capacity_inc_angular(lambda_hat, a)


def _capacity_coh_integral(lambda_bar: float) -> float:
    # int_0^inf (1 - exp(-lambda_bar sqrt(u))) exp(-u) / u du over y = ln u
    def f(y):
        u = math.exp(y)
        return -math.expm1(-lambda_bar * math.sqrt(u)) * math.exp(-u)

    val, _ = integrate.quad(f, -80.0, math.log(60.0), epsabs=0.0, epsrel=1e-12, limit=400,
                            points=[-2.0 * math.log(lambda_bar), 0.0])
    return val


def capacity_coh_a4(lambda_bar: float) -> float:
    """Ergodic capacity E[ln(1 + SNR_coh)] in nats at alpha = 4.

    pi Erfi(lambda_bar/2) - lambda_bar^2/2 * 2F2((1,1); (3/2,2); lambda_bar^2/4).
    Large lambda_bar falls back to the cancellation-free integral
    int (1 - exp(-lambda_bar sqrt(u))) exp(-u) / u du.
    """
    if not lambda_bar >= 0:
        raise ValueError("lambda_bar must be >= 0")
    if lambda_bar == 0:
        return 0.0
    if lambda_bar > _COH_CAPACITY_SERIES_MAX:
        return _capacity_coh_integral(lambda_bar)
    x = lambda_bar / 2.0
    return float(math.pi * erfi(x) - lambda_bar**2 / 2.0 * hyp2f2_1_1__32_2(x * x))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SnrDistribution:
    """Scheme-tagged view of the SNR law of one scenario.

    ``method_for`` reports which route a quantity takes: ``"exact_alpha4"``
    for the closed forms, ``"numeric"`` for contour inversion or transform
    quadrature, ``"saddle_smalls"`` for the small-s expansions.
    """

    scheme: str
    density: EffectiveDensity
    taps: TapProfile | None = None
    channels: int = 1
    alpha: float = field(init=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        object.__setattr__(self, "alpha", self.density.alpha)
        if self.taps is None:
            object.__setattr__(self, "taps", TapProfile.flat())
        if self.scheme == "random" and self.taps.tap_count != 1:
            raise ValueError("the random-channel scheme is defined for flat fading only")

    @property
    def scale(self) -> float:
        """The density constant governing this scheme."""
        return self.density.lambda_bar if self.scheme == "coherent" else self.density.lambda_hat

    def method_for(self, quantity: str) -> str:
        a4 = _is_alpha4(self.alpha)
        if quantity not in ("pdf", "outage", "capacity"):
            raise ValueError(quantity)
        if self.scheme == "coherent":
            if a4:
                return "exact_alpha4"
            return "saddle_smalls" if quantity == "pdf" else "numeric"
        if self.scheme == "incoherent":
            if a4:
                return "exact_alpha4"
            if self.taps.tap_count == 1 or quantity == "capacity":
                return "numeric"
            return "saddle_smalls"
        return "numeric"

    def laplace_handle(self):
        from .transform import LaplaceHandle

        return LaplaceHandle.for_scheme(self.scheme, self.scale, self.alpha,
                                        taps=self.taps, channels=self.channels)

    def valid(self, s):
        """Regime flag for the small-s formulas: True inside s <= 0.1 * scale^(alpha/2)."""
        return saddle_valid(s, self.scale, self.alpha)

    def pdf(self, s, method: str | None = None):
        method = method or self.method_for("pdf")
        if self.scheme == "coherent" and method in ("exact_alpha4", "saddle_smalls"):
            return pdf_coh(s, self.scale, self.alpha)
        if method == "exact_alpha4":
            if self.scheme != "incoherent" or not _is_alpha4(self.alpha):
                raise ValueError("no alpha = 4 closed form for this scheme")
            return pdf_inc_a4(s, self.scale, self.taps)
        if method == "saddle_smalls":
            if self.scheme == "incoherent":
                return pdf_inc_smalls(s, self.scale, self.taps, self.alpha)
            return pdf_rand_smalls(s, self.scale, self.channels, self.alpha)
        from .transform import invert_to_pdf

        s_arr, scalar = _as_float_array(s)
        return _ret(invert_to_pdf(self.laplace_handle(), s_arr.ravel()).reshape(s_arr.shape), scalar)

    def outage(self, s, method: str | None = None):
        method = method or self.method_for("outage")
        if method == "exact_alpha4":
            if not _is_alpha4(self.alpha) or self.scheme == "random":
                raise ValueError("no alpha = 4 closed form for this scheme")
            if self.scheme == "coherent":
                return outage_coh_a4(s, self.scale)
            return outage_inc_a4(s, self.scale, self.taps)
        if method == "saddle_smalls":
            if self.scheme == "incoherent":
                return outage_inc_smalls(s, self.scale, self.taps, self.alpha)
            if self.scheme == "random":
                return outage_rand_smalls(s, self.scale, self.channels, self.alpha)
            raise ValueError("no small-s outage expansion for the coherent scheme")
        from .transform import invert_to_cdf

        s_arr, scalar = _as_float_array(s)
        return _ret(invert_to_cdf(self.laplace_handle(), s_arr.ravel()).reshape(s_arr.shape), scalar)

    def capacity(self, method: str | None = None) -> float:
        """Ergodic capacity in nats."""
        method = method or self.method_for("capacity")
        if method == "exact_alpha4":
            if self.scheme == "coherent":
                return capacity_coh_a4(self.scale)
            return capacity_inc_a4(self.scale, self.taps)
        from .transform import capacity_from_laplace

        return capacity_from_laplace(self.laplace_handle())
