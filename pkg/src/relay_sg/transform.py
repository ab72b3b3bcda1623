"""Laplace transforms of the three scheme SNRs and their numerical inversion.

Transforms are evaluated in log form and accept complex arguments, so the
same handle serves the inversion contour and the real-axis capacity identity

    E[ln(1 + X)] = int_0^inf (1 - L(u)) exp(-u) / u du.

Inversion uses the cotangent-contour rule of Trefethen, Weideman and
Schmelzer (a tuned Talbot contour, 64 nodes). The contour crosses the real
axis at the saddle point of t*u + log L(u) whenever that lies to the right of
the default crossing, which keeps the summands comparable in size to the
result and preserves relative accuracy deep in the small-s tail.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import integrate, optimize, special

from .model import TapProfile

__all__ = [
    "AccuracyShortfallError",
    "CalibrationError",
    "LaplaceHandle",
    "UnsupportedMethodError",
    "calibrate",
    "capacity_from_laplace",
    "invert_to_cdf",
    "invert_to_pdf",
    "laplace_coh",
    "laplace_inc",
    "laplace_rand",
]

METHODS = ("closed_form", "quadrature_1d", "mc_average")
CONTOUR_NODES = 64

# cotangent contour z(t) = mu (A t cot(B t) - C + i D t), t in (-pi, pi)
_CA, _CB, _CC, _CD = 0.5017, 0.6407, 0.6122, 0.2645
_CROSS = _CA / _CB - _CC          # real-axis crossing per unit mu

_Q_RAY = 0.4                      # rotation of the quadrature ray, fraction of arg(u)
_U_MAX = 40.0                     # capacity identity truncation; tail <= E1(40)


class AccuracyShortfallError(RuntimeError):
    """The requested tolerance was not reached; ``achieved`` holds what was."""

    def __init__(self, message: str, achieved: float):
        super().__init__(message)
        self.achieved = achieved


class UnsupportedMethodError(ValueError):
    pass


class CalibrationError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# exp-sinh quadrature on (0, inf), vectorised over the transform argument

@lru_cache(maxsize=16)
def _es_rule(h: float):
    t = np.arange(-6.5, 4.0 + h / 2, h)
    x = np.exp(0.5 * np.pi * np.sinh(t))
    w = x * 0.5 * np.pi * np.cosh(t) * h
    keep = (x > 1e-300) & (x < 1e30)
    return x[keep], w[keep]


def _exp_sinh(integrand, rtol: float, h0: float = 1.0 / 8, h_min: float = 1.0 / 256):
    """Integrate ``integrand(x)`` over (0, inf); ``x`` is broadcast on the last axis.

    Halves the step until two successive estimates agree to ``rtol`` relative
    to the integral of |integrand|. For positive integrands this is plain
    relative accuracy; for oscillatory ones it is the attainable precision.
    """
    h = h0
    x, w = _es_rule(h)
    prev = np.sum(w * integrand(x), axis=-1)
    while True:
        h /= 2
        x, w = _es_rule(h)
        vals = w * integrand(x)
        cur = np.sum(vals, axis=-1)
        norm = np.sum(np.abs(vals), axis=-1)
        err = np.max(np.abs(cur - prev) / np.maximum(norm, 1e-300))
        if err <= rtol:
            return cur
        if h <= h_min:
            raise AccuracyShortfallError(
                f"exp-sinh quadrature reached relative error {err:.2e} > {rtol:.1e}", err)
        prev = cur


def _log_single_channel(v, beta: float, rtol: float):
    """log int_0^inf exp(-q - v q^beta) dq for complex v with |arg v| < pi beta."""
    v = np.asarray(v, dtype=complex)
    out = np.zeros(v.shape, dtype=complex)
    nz = v != 0
    if not np.any(nz):
        return out
    vv = v[nz][..., None]
    # natural scale of q where v q^beta ~ 1, and a ray that damps both factors
    q0 = 1.0 / (1.0 + np.abs(vv) ** (1.0 / beta))
    rot = np.exp(-1j * _Q_RAY * np.angle(vv) / beta)  # -0.4 arg(u)
    scale = q0 * rot

    def f(x):
        q = scale * x
        return scale * np.exp(-q - vv * q**beta)

    out[nz] = np.log(_exp_sinh(f, rtol))
    return out


def _one_minus_single_channel(v, beta: float, rtol: float):
    """1 - int exp(-q - v q^beta) dq for real v >= 0, without cancellation."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape)
    nz = v > 0
    if not np.any(nz):
        return out
    vv = v[nz][..., None]
    q0 = 1.0 / (1.0 + vv ** (1.0 / beta))

    def f(x):
        q = q0 * x
        return q0 * np.exp(-q) * -np.expm1(-vv * q**beta)

    out[nz] = _exp_sinh(f, rtol)
    return out


def _levy_mixture(u, lambda_hat: float, a: np.ndarray, rtol: float, one_minus: bool = False):
    # alpha = 4: SNR_inc = S z with S = lambda_hat^2 / (4 G), G ~ Gamma(1/2);
    # L(u) = E_G prod_d (1 + u lambda_hat^2 a_d / (4 G))^-1.
    u = np.asarray(u, dtype=complex)
    uu = u[..., None, None]
    k = uu * lambda_hat**2 * a / 4.0
    # poles sit at g = -k_d, on the far side of the real axis from u; they only
    # approach the integration ray when |arg u| > pi/2, so rotate by half the excess
    arg = np.angle(uu[..., 0])
    scale = np.exp(0.5j * np.sign(arg) * np.maximum(np.abs(arg) - 0.5 * np.pi, 0.0))

    def f(x):
        g = scale * x
        log_prod = -np.sum(np.log1p(k / g[..., None]), axis=-1)
        body = -np.expm1(log_prod) if one_minus else np.exp(log_prod)
        return scale * np.exp(-g) / np.sqrt(g) * body / math.sqrt(math.pi)

    return _exp_sinh(f, rtol)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LaplaceHandle:
    """Laplace transform L(u) = E[exp(-u SNR)] of one scheme.

    ``density`` is lambda_bar for the coherent scheme and lambda_hat otherwise.
    """

    scheme: str
    density: float
    alpha: float
    taps: TapProfile = field(default_factory=TapProfile.flat)
    channels: int = 1
    method: str = "closed_form"
    rtol: float = 1e-10
    mc_samples: int = 1 << 20
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if not self.alpha > 2:
            raise ValueError("alpha must be > 2")
        if not self.density > 0:
            raise ValueError("density must be > 0")
        if self.scheme == "random" and self.taps.tap_count != 1:
            raise ValueError("the random-channel scheme is defined for flat fading only")

    @classmethod
    def for_scheme(cls, scheme: str, density: float, alpha: float, taps: TapProfile | None = None,
                   channels: int = 1, rtol: float | None = None) -> "LaplaceHandle":
        taps = taps or TapProfile.flat()
        if scheme == "coherent":
            method = "closed_form"
        elif scheme == "random" or taps.tap_count == 1 or abs(alpha - 4.0) < 1e-12:
            method = "quadrature_1d"
        else:
            method = "mc_average"
        if rtol is None:
            rtol = 1e-3 if method == "mc_average" else 1e-10
        return cls(scheme=scheme, density=density, alpha=alpha, taps=taps,
                   channels=int(channels), method=method, rtol=rtol)

    @property
    def beta(self) -> float:
        return 2.0 / self.alpha

    # -- evaluation -----------------------------------------------------------

    def log_laplace(self, u):
        """log L(u) for real u >= 0 or complex u off the negative real axis."""
        u = np.asarray(u, dtype=complex)
        if self.method == "closed_form":
            return -self.density * u**self.beta
        if self.method == "mc_average":
            return np.log(self._mc(u)[0])
        if self.scheme == "random":
            Q = self.channels
            return Q * _log_single_channel(self.density / Q * u**self.beta, self.beta, self.rtol)
        a = self.taps.powers
        if a.size == 1:
            c = self.density * a[0] ** self.beta
            return _log_single_channel(c * u**self.beta, self.beta, self.rtol)
        return np.log(_levy_mixture(u, self.density, a, self.rtol))

    def __call__(self, u):
        u_arr = np.asarray(u)
        val = np.exp(self.log_laplace(u_arr))
        if not np.iscomplexobj(u_arr):
            val = val.real
        return val.item() if val.ndim == 0 else val

    def one_minus(self, u):
        """1 - L(u) for real u >= 0, accurate as u -> 0."""
        u = np.asarray(u, dtype=float)
        if self.method == "closed_form":
            return -np.expm1(-self.density * u**self.beta)
        if self.method == "mc_average":
            return 1.0 - self._mc(u)[0].real
        if self.scheme == "random":
            Q = self.channels
            log_l = Q * np.log1p(-_one_minus_single_channel(self.density / Q * u**self.beta,
                                                           self.beta, self.rtol))
            return -np.expm1(log_l)
        a = self.taps.powers
        if a.size == 1:
            c = self.density * a[0] ** self.beta
            return _one_minus_single_channel(c * u**self.beta, self.beta, self.rtol)
        return _levy_mixture(u, self.density, a, self.rtol, one_minus=True).real

    def _mc(self, u):
        """Antithetic Monte Carlo average of exp(-lambda_hat (u z)^beta) and its SE."""
        rng = np.random.default_rng(self.seed)
        n = self.mc_samples // 2
        U = rng.random((n, self.taps.tap_count))
        a = self.taps.powers
        z = np.concatenate([-np.log1p(-U) @ a, -np.log(U) @ a])  # antithetic pair
        u = np.asarray(u, dtype=complex)
        flat = u.ravel()
        means = np.empty(flat.shape, dtype=complex)
        ses = np.empty(flat.shape)
        for i, ui in enumerate(flat):
            vals = np.exp(-self.density * (ui * z) ** self.beta)
            pair = 0.5 * (vals[:n] + vals[n:])
            means[i] = pair.mean()
            ses[i] = pair.std(ddof=1) / math.sqrt(n)
        rel = np.max(ses / np.maximum(np.abs(means), 1e-300)) if flat.size else 0.0
        if rel > self.rtol:
            raise AccuracyShortfallError(
                f"Monte Carlo transform reached relative SE {rel:.2e} > {self.rtol:.1e} "
                f"with {self.mc_samples} samples", rel)
        return means.reshape(u.shape), ses.reshape(u.shape)

    def saddle(self, t: float, extra_log: float = 0.0) -> float:
        """Minimiser over real x > 0 of x t + log L(x) - extra_log * log x."""
        if self.method == "closed_form" and extra_log == 0.0:
            b = self.beta
            return (self.density * b / t) ** (1.0 / (1.0 - b))

        def phi(y):
            x = math.exp(y)
            return x * t + float(self.log_laplace(x).real) - extra_log * y

        lo, hi = math.log(1e-3 / t), math.log(1e14 / t)
        res = optimize.minimize_scalar(phi, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-3})
        return math.exp(res.x)


# -- standalone transforms ---------------------------------------------------

def laplace_coh(u, lambda_bar: float, alpha: float):
    """E[exp(-u SNR_coh)] = exp(-lambda_bar u^(2/alpha))."""
    return LaplaceHandle("coherent", lambda_bar, alpha)(u)


def laplace_inc(u, lambda_hat: float, alpha: float, taps: TapProfile, rtol: float | None = None):
    """E[exp(-u SNR_inc)] averaged over the per-tap exponential variables."""
    return LaplaceHandle.for_scheme("incoherent", lambda_hat, alpha, taps=taps, rtol=rtol)(u)


def laplace_rand(u, lambda_hat: float, alpha: float, channels: int, rtol: float | None = None):
    """E[exp(-u SNR_rand)]: Q-th power of one channel at density lambda_hat / Q."""
    if int(channels) < 1:
        raise ValueError("channel count must be >= 1")
    return LaplaceHandle.for_scheme("random", lambda_hat, alpha, channels=channels, rtol=rtol)(u)


# ---------------------------------------------------------------------------
# inversion

def _contour(N: int):
    k = np.arange(N)
    th = -np.pi + (k + 0.5) * 2 * np.pi / N
    z = _CA * th / np.tan(_CB * th) - _CC + 1j * _CD * th
    dz = _CA / np.tan(_CB * th) - _CA * _CB * th / np.sin(_CB * th) ** 2 + 1j * _CD
    return z, dz


def _curvature_width(handle: LaplaceHandle, x: float, t: float, extra_log: float) -> float:
    """Standard deviation 1/sqrt(phi'') of the saddle Gaussian at real x."""
    def phi(y):
        return math.exp(y) * t + float(handle.log_laplace(math.exp(y)).real) - extra_log * y
    y, d = math.log(x), 0.05
    d2y = (phi(y + d) - 2.0 * phi(y) + phi(y - d)) / d**2   # x^2 phi'' at a stationary point
    return x / math.sqrt(d2y) if d2y > 0 else math.inf


def _bromwich_line(handle: LaplaceHandle, t: float, x: float, w: float, extra_log: float,
                   log: bool):
    # (1/pi) Re int_0^inf exp(z t) F(z) dy along z = x + i y, trapezoid with step w/2;
    # the integrand is a narrow Gaussian around y = 0, so a few hundred nodes suffice
    h = 0.5 * w
    y = h * np.arange(0, 400)
    z = x + 1j * y
    expo = z * t + handle.log_laplace(z) - extra_log * np.log(z)
    shift = expo[0].real
    g = np.exp(expo - shift)
    if np.abs(g[-1]) > 1e-17:
        raise AccuracyShortfallError("Bromwich integrand has not decayed", float(np.abs(g[-1])))
    g[0] *= 0.5
    val = h * float(np.sum(g).real) / math.pi
    if log:
        return math.log(val) + shift if val > 0 else -math.inf
    return val * math.exp(shift) if val > 0 else 0.0


def _invert(handle: LaplaceHandle, s_grid, extra_log: float, N: int, full_output: bool,
            log: bool = False):
    if handle.method == "mc_average":
        raise UnsupportedMethodError(
            "Monte Carlo transforms are too noisy to invert; use relay_sg.simulate instead")
    s_arr = np.asarray(s_grid, dtype=float)
    s = s_arr.ravel()
    if np.any(s <= 0):
        raise ValueError("inversion grid must be positive")
    z0, dz0 = _contour(N)
    spacing = _CD * 2.0 * np.pi / N          # imaginary node spacing near the crossing, per mu
    x_sad = np.array([handle.saddle(v, extra_log) for v in s])
    mu = np.maximum(x_sad, _CROSS * N / s) / _CROSS

    # saddle narrower than the node spacing: integrate on the vertical line instead
    line = np.zeros(s.shape, dtype=bool)
    widths = np.full(s.shape, np.inf)
    for i in np.nonzero(x_sad > _CROSS * N / s)[0]:
        widths[i] = _curvature_width(handle, x_sad[i], s[i], extra_log)
        line[i] = spacing * mu[i] > 0.25 * widths[i]

    vals = np.empty(s.shape)
    neg = np.zeros(s.shape, dtype=bool)
    rest = ~line
    if np.any(rest):
        z = mu[rest, None] * z0
        dz = mu[rest, None] * dz0
        expo = z * s[rest, None] + handle.log_laplace(z) - extra_log * np.log(z)
        shift = np.max(expo.real, axis=1)
        scaled = np.sum(np.exp(expo - shift[:, None]) * dz, axis=1).imag / N
        n_bad = int(np.sum(scaled * np.exp(shift) < -1e-9))
        if n_bad:
            warnings.warn(f"inversion produced {n_bad} values below -1e-9", RuntimeWarning,
                          stacklevel=3)
        bad = scaled <= 0
        neg[rest] = bad
        with np.errstate(divide="ignore", over="ignore"):
            if log:
                vals[rest] = np.where(bad, -np.inf, np.log(np.where(bad, 1.0, scaled)) + shift)
            else:
                vals[rest] = np.where(bad, 0.0, scaled * np.exp(shift))
    for i in np.nonzero(line)[0]:
        vals[i] = _bromwich_line(handle, s[i], x_sad[i], widths[i], extra_log, log)

    vals = vals.reshape(s_arr.shape)
    if full_output:
        return vals, {"clamped": int(np.sum(neg)), "nodes": N, "bromwich_line": int(np.sum(line))}
    return vals


def invert_to_pdf(handle: LaplaceHandle, s_grid, *, nodes: int = CONTOUR_NODES,
                  log: bool = False, full_output: bool = False):
    """Density of the SNR at ``s_grid`` by contour inversion of ``handle``.

    Negative outputs (round-off in the far tail) are clamped to zero; with
    ``full_output=True`` the count is returned in an info dict. ``log=True``
    returns the log density, which stays finite where the density underflows.
    """
    _ensure_calibrated()
    return _invert(handle, s_grid, 0.0, nodes, full_output, log)


def invert_to_cdf(handle: LaplaceHandle, s_grid, *, nodes: int = CONTOUR_NODES,
                  log: bool = False, full_output: bool = False):
    """P(SNR < s) by inverting L(u)/u."""
    _ensure_calibrated()
    out = _invert(handle, s_grid, 1.0, nodes, True, log)
    vals = np.minimum(out[0], 0.0 if log else 1.0)
    return (vals, out[1]) if full_output else vals


_CALIBRATED = False


def calibrate(tol: float = 1e-6) -> float:
    """Self-test against the alpha = 4 coherent density; returns the max relative error."""
    h = LaplaceHandle("coherent", 1.0, 4.0)
    s = np.logspace(math.log10(0.05), math.log10(20.0), 25)
    exact = 1.0 / (2.0 * math.sqrt(math.pi)) * s**-1.5 * np.exp(-1.0 / (4.0 * s))
    err = float(np.max(np.abs(_invert(h, s, 0.0, CONTOUR_NODES, False) / exact - 1.0)))
    if not err <= tol:
        raise CalibrationError(f"contour inversion self-test error {err:.2e} exceeds {tol:.0e}")
    return err


def _ensure_calibrated():
    global _CALIBRATED
    if not _CALIBRATED:
        calibrate()
        _CALIBRATED = True


# ---------------------------------------------------------------------------

def capacity_from_laplace(handle: LaplaceHandle, rtol: float = 1e-7) -> float:
    """E[ln(1 + SNR)] in nats from int_0^inf (1 - L(u)) exp(-u) / u du.

    Integrated over y = ln u on [u_lo, 40]. Below u_lo, 1 - L(u) = c u^beta to
    leading order, so that piece is added as (1 - L(u_lo)) / beta; u_lo is
    chosen with density * u_lo^beta = 1e-5, making the neglected second-order
    term ~1e-10 relative. The tail beyond 40 is bounded by E1(40) ~ 1e-19.
    """
    b = handle.beta
    tail = float(special.exp1(_U_MAX))

    def f(y):
        u = math.exp(y)
        return float(handle.one_minus(u)) * math.exp(-u)

    y_lo = math.log(1e-5 / handle.density) / b
    head = float(handle.one_minus(math.exp(y_lo))) / b
    val, err = integrate.quad(f, y_lo, math.log(_U_MAX), epsabs=0.0, epsrel=rtol / 10, limit=400,
                              points=[-math.log(handle.density) / b, 0.0])
    val += head
    if val > 0 and tail > rtol * val:
        raise AccuracyShortfallError(f"capacity tail bound {tail:.1e} exceeds tolerance", tail / val)
    return val
