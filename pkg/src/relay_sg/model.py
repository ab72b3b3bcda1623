"""Scenario parameters, multipath tap profiles and effective densities.

Every closed-form result in this package depends on the scenario only through
two scalars: ``lambda_hat`` (unfaded received power law, used by the
incoherent and random-channel schemes) and ``lambda_bar`` (coherent scheme,
which additionally averages the per-node multipath gain).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import integrate, special

LN10_OVER_10 = math.log(10.0) / 10.0

# Sum of |A_d| above which the partial-fraction forms lose more than ~1e-10
# relative accuracy; callers switch to product-form integrals beyond it.
PARTIAL_FRACTION_LIMIT = 1e6


class DegenerateProfileError(ValueError):
    """Two tap powers coincide, so the partial-fraction expansion is singular."""


def db_to_linear(x_db):
    """Power ratio in dB to linear."""
    if np.ndim(x_db):
        return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)
    return 10.0 ** (float(x_db) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_to_watt(x_dbm):
    return db_to_linear(x_dbm) * 1e-3


def watt_to_dbm(x_w):
    return linear_to_db(x_w / 1e-3)


@dataclass(frozen=True)
class NetworkParams:
    """Physical scenario of a relay field.

    Attributes
    ----------
    node_density : float
        Transmitters per m^2.
    cone_angle : float
        Angular width of the sector holding the transmitters, radians.
    pathloss_exponent : float
        alpha > 2.
    shadow_sigma_db : float
        Standard deviation of the lognormal shadowing in dB.
    pathloss_const : float
        Linear constant l0 in g(r) = l0 / r**alpha (r in metres).
    tx_power : float
        Transmit power in watts.
    bandwidth : float
        Hz.
    noise_psd : float
        Noise power spectral density in W/Hz.
    """

    node_density: float
    cone_angle: float
    pathloss_exponent: float
    shadow_sigma_db: float
    pathloss_const: float
    tx_power: float
    bandwidth: float
    noise_psd: float

    def __post_init__(self):
        if not self.node_density > 0:
            raise ValueError(f"node_density must be > 0, got {self.node_density}")
        if not 0 < self.cone_angle <= 2 * math.pi:
            raise ValueError(f"cone_angle must lie in (0, 2*pi], got {self.cone_angle}")
        if not self.pathloss_exponent > 2:
            raise ValueError(f"pathloss_exponent must be > 2, got {self.pathloss_exponent}")
        if not self.shadow_sigma_db >= 0:
            raise ValueError(f"shadow_sigma_db must be >= 0, got {self.shadow_sigma_db}")
        for name in ("pathloss_const", "tx_power", "bandwidth", "noise_psd"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)}")
        if not math.isfinite(self.tx_snr) or self.tx_snr <= 0:
            raise ValueError("transmit SNR P/(BW*N0) must be finite and positive")

    @property
    def tx_snr(self) -> float:
        """Transmit power normalised by the receiver noise power, p = P/(BW*N0)."""
        return self.tx_power / (self.bandwidth * self.noise_psd)

    @property
    def shadow_sigma(self) -> float:
        """Standard deviation of ln f."""
        return self.shadow_sigma_db * LN10_OVER_10

    @property
    def alpha(self) -> float:
        return self.pathloss_exponent

    def replace(self, **changes) -> "NetworkParams":
        return replace(self, **changes)

    def with_tx_snr(self, p: float) -> "NetworkParams":
        """Same scenario with the transmit power chosen so that P/(BW*N0) = p."""
        return replace(self, tx_power=p * self.bandwidth * self.noise_psd)


def pathloss_const_from_reference(loss_db: float, ref_distance: float, alpha: float) -> float:
    """l0 such that l0 / ref_distance**alpha equals ``loss_db`` (negative dB gain)."""
    return db_to_linear(loss_db) * ref_distance**alpha


def table_one_params(**overrides) -> NetworkParams:
    """Default scenario: 8 dB shadowing, 10 MHz, -97.8 dBm noise in 10 MHz,
    -93 dB pathloss at 25 m, alpha = 4, 1 node / 1000 m^2, 10 dBm transmitters
    and a 120 degree sector."""
    alpha = overrides.pop("pathloss_exponent", 4.0)
    kw = dict(
        node_density=1e-3,
        cone_angle=2 * math.pi / 3,
        pathloss_exponent=alpha,
        shadow_sigma_db=8.0,
        pathloss_const=pathloss_const_from_reference(-93.0, 25.0, alpha),
        tx_power=dbm_to_watt(10.0),
        bandwidth=10e6,
        noise_psd=dbm_to_watt(-97.8 - 70.0),
    )
    kw.update(overrides)
    return NetworkParams(**kw)


@dataclass(frozen=True, eq=False)
class TapProfile:
    """Exponential power-delay profile sampled at the symbol rate.

    ``powers`` sums to one and is strictly decreasing, so all taps are distinct.
    """

    delay_spread: float
    powers: np.ndarray
    capture_fraction: float = 0.9
    _coeffs: np.ndarray | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.powers, dtype=float).ravel()
        if a.size == 0 or np.any(a <= 0):
            raise ValueError("tap powers must be positive")
        a.setflags(write=False)
        object.__setattr__(self, "powers", a)

    @property
    def tap_count(self) -> int:
        return int(self.powers.size)

    @property
    def coeffs(self) -> np.ndarray:
        """Partial-fraction coefficients A_d (cached)."""
        if self._coeffs is None:
            A = partial_fraction_coeffs(self.powers)
            A.setflags(write=False)
            object.__setattr__(self, "_coeffs", A)
        return self._coeffs

    @property
    def well_conditioned(self) -> bool:
        """True when sums weighted by A_d can be trusted in double precision."""
        try:
            return float(np.sum(np.abs(self.coeffs))) <= PARTIAL_FRACTION_LIMIT
        except DegenerateProfileError:
            return False

    @classmethod
    def flat(cls) -> "TapProfile":
        return cls(delay_spread=0.0, powers=np.array([1.0]))

    @classmethod
    def from_powers(cls, powers, delay_spread: float = float("nan")) -> "TapProfile":
        a = np.asarray(powers, dtype=float)
        return cls(delay_spread=delay_spread, powers=a / a.sum(), capture_fraction=1.0)

    def __eq__(self, other):
        if not isinstance(other, TapProfile):
            return NotImplemented
        return (np.array_equal(self.powers, other.powers)
                and self.capture_fraction == other.capture_fraction
                and (self.delay_spread == other.delay_spread
                     or (math.isnan(self.delay_spread) and math.isnan(other.delay_spread))))

    def __hash__(self):
        return hash((self.powers.tobytes(), self.capture_fraction))


def build_tap_profile(bw: float, xi: float, capture: float = 0.9) -> TapProfile:
    """Tap powers a_d proportional to exp(-(d-1)/(bw*xi)) - exp(-d/(bw*xi)).

    The tap count D is the smallest integer for which the first D taps of the
    untruncated profile hold at least ``capture`` of the power. ``xi = 0``
    gives the flat-fading profile D = 1.
    """
    if not bw > 0:
        raise ValueError(f"bandwidth must be > 0, got {bw}")
    if not xi >= 0:
        raise ValueError(f"delay spread must be >= 0, got {xi}")
    if not 0 < capture < 1:
        raise ValueError(f"capture fraction must lie in (0, 1), got {capture}")
    if xi == 0:
        return TapProfile(delay_spread=0.0, powers=np.array([1.0]), capture_fraction=capture)

    x = bw * xi
    D = max(1, math.ceil(-x * math.log1p(-capture)))
    # guard the ceil against rounding on either side
    while D > 1 and -math.expm1(-(D - 1) / x) >= capture:
        D -= 1
    while -math.expm1(-D / x) < capture:
        D += 1

    d = np.arange(D)
    a = np.exp(-d / x) * -math.expm1(-1.0 / x)
    a /= a.sum()
    return TapProfile(delay_spread=xi, powers=a, capture_fraction=capture)


def partial_fraction_coeffs(a, dtype=float) -> np.ndarray:
    """A_d = prod_{k != d} (1 - a_k/a_d)^-1 for distinct positive a.

    These are the weights of the expansion
    prod_d 1/(1 + t a_d) = sum_d A_d / (1 + t a_d).
    The products are formed in extended precision; pass
    ``dtype=np.longdouble`` to keep it (sum(A) == 1 to ~1e-18 * sum(|A|)).
    """
    a = np.asarray(a, dtype=float).ravel()
    if np.any(a <= 0):
        raise ValueError("tap powers must be positive")
    D = a.size
    if D == 1:
        return np.ones(1, dtype=dtype)
    diff = a[:, None] - a[None, :]
    scale = np.maximum(a[:, None], a[None, :])
    off = ~np.eye(D, dtype=bool)
    if np.any(np.abs(diff[off]) <= 1e-9 * scale[off]):
        raise DegenerateProfileError("tap powers must be pairwise distinct")
    al = a.astype(np.longdouble)
    ratio = np.where(off, 1 - al[None, :] / al[:, None], np.longdouble(1))
    return (1 / np.prod(ratio, axis=1)).astype(dtype)


def lognormal_moment(sigma_db: float, alpha: float) -> float:
    """E[f^(2/alpha)] for unit-mean lognormal shadowing with ``sigma_db`` spread."""
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2, got {alpha}")
    sigma = sigma_db * LN10_OVER_10
    return math.exp(sigma**2 / alpha * (2.0 / alpha - 1.0))


def _fractional_moment_integral(powers: np.ndarray, beta: float) -> float:
    # z^b = b/Gamma(1-b) * int_0^inf (1 - exp(-t z)) t^(-1-b) dt, averaged
    # through E[exp(-t z)] = prod 1/(1 + t a_d); integrated over y = log t.
    a = np.asarray(powers, dtype=float)

    def f(y):
        t = math.exp(y)
        log_mgf = -np.sum(np.log1p(t * a))
        return -math.expm1(log_mgf) * t ** (-beta)

    lo, hi = -60.0 / beta, 60.0 / (1.0 - beta) + 10.0
    val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=0.0, epsrel=1e-12,
                            points=[-math.log(a.max()), -math.log(a.min())])
    return beta / math.gamma(1.0 - beta) * val


def multipath_moment(taps: TapProfile, alpha: float) -> float:
    """E[z^(2/alpha)] for z = sum_d a_d |h_d|^2 with unit Rayleigh taps."""
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2, got {alpha}")
    beta = 2.0 / alpha
    a = taps.powers
    if taps.tap_count == 1:
        return math.gamma(1.0 + beta) * a[0] ** beta
    if taps.well_conditioned:
        return math.gamma(1.0 + beta) * float(np.sum(taps.coeffs * a**beta))
    return _fractional_moment_integral(a, beta)


def reflection_prefactor(alpha: float) -> float:
    """2*pi/(alpha*sin(2*pi/alpha)), equal to Gamma(1-2/alpha)*Gamma(1+2/alpha)."""
    return 2 * math.pi / (alpha * math.sin(2 * math.pi / alpha))


@dataclass(frozen=True)
class EffectiveDensity:
    lambda_bar: float
    lambda_hat: float
    alpha: float
    multipath_moment: float
    lognormal_moment: float
    coeffs: tuple

    def __post_init__(self):
        if not (self.lambda_bar > 0 and self.lambda_hat > 0):
            raise ValueError("effective densities must be positive")


def effective_densities(params: NetworkParams, taps: TapProfile) -> EffectiveDensity:
    """Collapse a scenario to (lambda_bar, lambda_hat).

    With nodes at ``node_density`` per m^2 in a sector of width phi0, the
    received unfaded power S has log E[exp(-u S)] = -lambda_hat * u^(2/alpha),
    where lambda_hat = (lambda*phi0/2) Gamma(1-2/alpha) (p*l0)^(2/alpha) E[f^(2/alpha)].
    The factor 1/2 is the polar area element (sector area phi0 r^2 / 2).
    """
    alpha = params.pathloss_exponent
    if not alpha > 2:
        raise ValueError(f"alpha must be > 2, got {alpha}")
    beta = 2.0 / alpha
    shadow = lognormal_moment(params.shadow_sigma_db, alpha)
    base = 0.5 * params.node_density * params.cone_angle
    power = (params.tx_snr * params.pathloss_const) ** beta
    lam_hat = base * math.gamma(1.0 - beta) * power * shadow
    mp = multipath_moment(taps, alpha)
    lam_bar = lam_hat * mp

    # same constant written with the reflection identity
    alt = base * reflection_prefactor(alpha) * power * shadow * (mp / math.gamma(1.0 + beta))
    if not math.isclose(alt, lam_bar, rel_tol=1e-10):
        raise ArithmeticError(f"reflection-identity check failed: {alt} vs {lam_bar}")

    coeffs = tuple(taps.coeffs) if taps.well_conditioned else ()
    return EffectiveDensity(lambda_bar=lam_bar, lambda_hat=lam_hat, alpha=alpha,
                            multipath_moment=mp, lognormal_moment=shadow, coeffs=coeffs)


def density_for_lambda_hat(params: NetworkParams, target: float) -> NetworkParams:
    """Return ``params`` with node_density rescaled so lambda_hat equals ``target``."""
    flat = TapProfile.flat()
    current = effective_densities(params, flat).lambda_hat
    return replace(params, node_density=params.node_density * target / current)


def density_for_lambda_bar(params: NetworkParams, taps: TapProfile, target: float) -> NetworkParams:
    current = effective_densities(params, taps).lambda_bar
    return replace(params, node_density=params.node_density * target / current)
