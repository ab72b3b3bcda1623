"""Acceptance checks: every closed form against the simulator and the transform layer.

Each check returns :class:`CheckResult` rows with a status of ``pass``,
``fail`` or ``inconclusive``. Statistical checks are inconclusive rather than
failed when the trial count is too small for the normal approximation behind
their confidence bands (fewer than ``MIN_EVENTS`` expected events).
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy import integrate, optimize, special

from . import analytic as an
from .model import (
    TapProfile,
    build_tap_profile,
    density_for_lambda_bar,
    density_for_lambda_hat,
    effective_densities,
    partial_fraction_coeffs,
    reflection_prefactor,
    table_one_params,
)
from .simulate import (
    McConfig,
    estimate,
    estimate_density_ladder,
    sample_network,
    snr_coherent,
    snr_incoherent,
    snr_random,
)
from .transform import LaplaceHandle, capacity_from_laplace, invert_to_cdf, invert_to_pdf

MIN_EVENTS = 10
MIN_TRIALS_CLT = 1000     # below this, mean- and ordering-based MC checks are inconclusive
SE_BAND = 3.0

# tolerances
RUNTIME_TARGET = 30.0
PDF_NORM_TOL = 1e-8
SLOPE_TOL = 0.15
PINNING_TOL = 1e-6
INVERSION_TOL = 1e-6
RATIO_VARIATION_TOL = 0.02
CAPACITY_TOL = 1e-6
LITERAL_CAPACITY = math.pi / (3.0 * math.sqrt(3.0))

# default trial counts
TRIALS_EXACTNESS = 100_000
TRIALS_SLOPE = 1_000_000
TRIALS_CAPACITY = 50_000
TRIALS_ORDERING = 50_000

COHERENT_P_RANGE = (0.1, 0.95)
XI_SHORT, XI_LONG = 0.17e-6, 0.65e-6
DEFAULT_SEED = 20240601


@dataclass(frozen=True)
class CheckResult:
    criterion: str
    name: str
    status: str
    measured: str
    tolerance: str
    timing: bool = False      # wall-clock rows vary between runs

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def line(self) -> str:
        return (f"[{self.status.upper()}] criterion {self.criterion} {self.name}: "
                f"{self.measured} (tolerance: {self.tolerance})")


def _status(ok: bool, conclusive: bool = True) -> str:
    if ok:
        return "pass"
    return "fail" if conclusive else "inconclusive"


def _se_check(criterion, name, p_hat, p_exact, n) -> CheckResult:
    """|p_hat - p| <= 3 SE with SE = sqrt(p (1-p) / n) at the exact p."""
    p = np.asarray(p_exact, dtype=float)
    se = np.sqrt(p * (1.0 - p) / n)
    z = np.abs(np.asarray(p_hat) - p) / se
    bad = z > SE_BAND
    conclusive = bool(np.all(n * np.minimum(p[bad], 1.0 - p[bad]) >= MIN_EVENTS))
    return CheckResult(criterion, name, _status(not bad.any(), conclusive),
                       f"max |P_mc - P|/SE = {z.max():.2f} over {p.size} thresholds, n = {n}",
                       f"<= {SE_BAND} SE")


# ---------------------------------------------------------------------------
# 1-2: exactness of the alpha = 4 outage formulas

def exactness_thresholds(scale: float, scheme: str, taps: TapProfile | None = None,
                         count: int = 12, p_range=(0.05, 0.95)) -> np.ndarray:
    """Log-spaced thresholds whose exact outage spans ``p_range``."""
    if scheme == "coherent":
        f = lambda s: float(an.outage_coh_a4(s, scale))
    else:
        f = lambda s: float(an.outage_inc_a4(s, scale, taps))
    lo = optimize.brentq(lambda y: f(math.exp(y)) - p_range[0], -40, 40)
    hi = optimize.brentq(lambda y: f(math.exp(y)) - p_range[1], -40, 40)
    return np.exp(np.linspace(lo, hi, count))


def check_coherent_exactness(trials=TRIALS_EXACTNESS, seed=DEFAULT_SEED) -> list[CheckResult]:
    params = table_one_params()
    taps = build_tap_profile(params.bandwidth, XI_SHORT)
    lam_bar = effective_densities(params, taps).lambda_bar
    # the truncation radius, hence the cost, scales as 1/s_min: start at P = 0.1
    s = exactness_thresholds(lam_bar, "coherent", p_range=COHERENT_P_RANGE)
    t0 = time.perf_counter()
    est = estimate(McConfig(trials, s, seed, ("coherent",)), params, taps)
    elapsed = time.perf_counter() - t0
    res = [_se_check("1", "coherent outage vs MC", est.outage["coherent"],
                     an.outage_coh_a4(s, lam_bar), trials)]
    res.append(CheckResult("1", "coherent MC runtime", _status(elapsed < RUNTIME_TARGET),
                           f"{elapsed:.1f} s for {trials} trials (r_max = {est.r_max:.0f} m)",
                           f"< {RUNTIME_TARGET:.0f} s", timing=True))
    return res


def check_incoherent_exactness(trials=TRIALS_EXACTNESS, seed=DEFAULT_SEED) -> list[CheckResult]:
    params = table_one_params()
    res = []
    for xi in (0.0, XI_SHORT):
        taps = build_tap_profile(params.bandwidth, xi)
        lam_hat = effective_densities(params, taps).lambda_hat
        s = exactness_thresholds(lam_hat, "incoherent", taps)
        est = estimate(McConfig(trials, s, seed, ("incoherent",)), params, taps)
        res.append(_se_check("2", f"incoherent outage vs MC, D={taps.tap_count}",
                             est.outage["incoherent"], an.outage_inc_a4(s, lam_hat, taps), trials))
        total = _pdf_mass(lam_hat, taps)
        res.append(CheckResult("2", f"incoherent pdf normalisation, D={taps.tap_count}",
                               _status(abs(total - 1.0) <= PDF_NORM_TOL),
                               f"|int pdf - 1| = {abs(total - 1.0):.1e}", f"<= {PDF_NORM_TOL:.0e}"))
    return res


def _pdf_mass(lam_hat: float, taps: TapProfile) -> float:
    # over y = ln s; the tail beyond s = e^40 * scale is below 1e-8 only after
    # adding its closed-form mass 1 - outage(s_hi)
    f = lambda y: float(an.pdf_inc_a4(math.exp(y), lam_hat, taps)) * math.exp(y)
    y0 = 2.0 * math.log(lam_hat)
    body, _ = integrate.quad(f, y0 - 60.0, y0 + 40.0, epsabs=1e-13, epsrel=1e-12, limit=500,
                             points=[y0 - 5, y0, y0 + 5])
    tail = 1.0 - float(an.outage_inc_a4(math.exp(y0 + 40.0), lam_hat, taps))
    return body + tail


# ---------------------------------------------------------------------------
# 3: small-s slopes

def _slope_window(cdf) -> np.ndarray:
    lo = optimize.brentq(lambda y: math.log(cdf(math.exp(y)) / 1e-3), -40, 20)
    hi = optimize.brentq(lambda y: math.log(cdf(math.exp(y)) / 1e-2), -40, 20)
    return np.exp(np.linspace(lo, hi, 9))


def _fit_slope(s, p):
    p = np.asarray(p, dtype=float)
    if np.any(p <= 0):
        return math.nan
    return float(np.polyfit(np.log(s), np.log(p), 1)[0])


def two_tap_profile(bandwidth: float = 4e6, xi: float = XI_SHORT) -> TapProfile:
    taps = build_tap_profile(bandwidth, xi)
    if taps.tap_count != 2:
        raise ValueError("bandwidth and delay spread do not give a two-tap profile")
    return taps


def check_small_s_slopes(trials=TRIALS_SLOPE, seed=DEFAULT_SEED) -> list[CheckResult]:
    params = table_one_params()
    flat = TapProfile.flat()
    lam_hat = effective_densities(params, flat).lambda_hat
    two = two_tap_profile()
    lam_hat2 = effective_densities(params.replace(bandwidth=4e6), two).lambda_hat
    cases = []   # (label, target, thresholds, exact slope, runner key)
    cdf_d1 = lambda s: float(an.outage_inc_a4(s, lam_hat, flat))
    cdf_d2 = lambda s: float(an.outage_inc_a4(s, lam_hat2, two))
    handles = {Q: LaplaceHandle.for_scheme("random", lam_hat, 4.0, channels=Q) for Q in (2, 4)}
    cdf_q = {Q: (lambda s, h=h: float(invert_to_cdf(h, [s])[0])) for Q, h in handles.items()}

    s1, s2 = _slope_window(cdf_d1), _slope_window(cdf_d2)
    sq = {Q: _slope_window(cdf_q[Q]) for Q in (2, 4)}

    # D=1 and Q=2 share one run (common random numbers); Q=4 and D=2 run separately
    grid = np.unique(np.concatenate([s1, sq[2]]))
    e12 = estimate(McConfig(trials, grid, seed, ("incoherent", "random"), channels=2), params, flat)
    e4 = estimate(McConfig(trials, sq[4], seed + 1, ("random",), channels=4), params, flat)
    ed2 = estimate(McConfig(trials, s2, seed + 2, ("incoherent",)), params.replace(bandwidth=4e6), two)

    pick = lambda est, scheme, s: est.outage[scheme][np.searchsorted(est.s_grid, s)]
    cases = [
        ("incoherent D=1", 1, s1, pick(e12, "incoherent", s1), cdf_d1),
        ("incoherent D=2", 2, s2, ed2.outage["incoherent"], cdf_d2),
        ("random Q=2", 2, sq[2], pick(e12, "random", sq[2]), cdf_q[2]),
        ("random Q=4", 4, sq[4], e4.outage["random"], cdf_q[4]),
    ]
    res = []
    for label, target, s, p_mc, cdf in cases:
        slope = _fit_slope(s, p_mc)
        exact = _fit_slope(s, [cdf(v) for v in s])
        conclusive = math.isfinite(slope) and trials * 1e-3 >= MIN_EVENTS
        ok = conclusive and abs(slope - target) <= SLOPE_TOL
        res.append(CheckResult("3", f"small-s outage slope, {label}", _status(ok, conclusive),
                               f"MC slope {slope:.3f} (exact-curve slope {exact:.3f}) vs {target}",
                               f"+-{SLOPE_TOL}"))
    return res


# ---------------------------------------------------------------------------
# 4: Taylor pinning of the small-s constant

def taylor_coefficient(powers, lambda_hat_sq, k: int):
    """Coefficient of s^k in the alpha = 4 incoherent outage 1 - sum_d A_d (1 + 4 s / (a_d lambda_hat^2))^(-1/2).

    Exact rational arithmetic when ``powers`` and ``lambda_hat_sq`` are ``Fraction``.
    """
    a = list(powers)
    A = _pf_exact(a) if isinstance(a[0], Fraction) else list(partial_fraction_coeffs(a))
    binom = Fraction(1)
    for j in range(k):                      # binom(-1/2, k)
        binom *= Fraction(-1, 2) - j
        binom /= j + 1
    total = sum(Ad / ad**k for Ad, ad in zip(A, a))
    scale = (4 / lambda_hat_sq) ** k
    lead = 1 if k == 0 else 0
    if isinstance(total, Fraction):
        return lead - binom * total * scale
    return lead - float(binom) * total * scale


def _extrapolate_to_zero(x, y) -> float:
    """Value at x = 0 of the polynomial through (x_i, y_i) (Neville's scheme)."""
    p = list(y)
    for m in range(1, len(x)):
        for i in range(len(x) - m):
            p[i] = (x[i + m] * p[i] - x[i] * p[i + 1]) / (x[i + m] - x[i])
    return p[0]


def _pf_exact(a):
    out = []
    for i, ai in enumerate(a):
        c = Fraction(1)
        for j, aj in enumerate(a):
            if j != i:
                c *= ai / (ai - aj)
        out.append(c)
    return out


def check_constant_pinning() -> list[CheckResult]:
    res = []
    lam_hat = 1.3
    exp_profiles = {1: [Fraction(1)], 2: [Fraction(2, 3), Fraction(1, 3)],
                    3: [Fraction(4, 7), Fraction(2, 7), Fraction(1, 7)]}
    for D, a in exp_profiles.items():
        # exact rational expansion: lower orders vanish, order D gives B/D
        coeffs = [taylor_coefficient(a, Fraction(169, 100), k) for k in range(D + 1)]
        lower_zero = all(c == 0 for c in coeffs[:D])
        taps = TapProfile.from_powers([float(x) for x in a])
        expected = an.b_const(4.0, taps) / D / lam_hat ** (2 * D)
        rel = abs(float(coeffs[D]) / expected - 1.0)
        # and the implemented outage itself: Neville extrapolation of outage / s^D to s = 0
        s = 1e-2 * min(a) * lam_hat**2 * 0.5 ** np.arange(6)
        r = [float(an.outage_inc_a4(v, lam_hat, taps)) / v**D for v in s]
        rich = _extrapolate_to_zero(s, r)
        rel_num = abs(rich / expected - 1.0)
        res.append(CheckResult(
            "4", f"Taylor pinning D={D}",
            _status(lower_zero and rel < PINNING_TOL and rel_num < PINNING_TOL),
            f"orders < D vanish: {lower_zero}; rel. error of s^D coefficient {rel:.1e} "
            f"(exact expansion), {rel_num:.1e} (implemented outage)", f"< {PINNING_TOL:.0e}"))
    b14 = an.b_const(4.0, TapProfile.flat())
    res.append(CheckResult("4", "B_{1,4} = 2", _status(abs(b14 - 2.0) < 1e-12),
                           f"B_(1,4) = {b14:.15g}", "2 to 1e-12"))
    return res


# ---------------------------------------------------------------------------
# 5: inversion calibration

def check_inversion() -> list[CheckResult]:
    h = LaplaceHandle("coherent", 1.0, 4.0)
    s = np.logspace(math.log10(0.05), math.log10(20.0), 60)
    exact = an.pdf_coh(s, 1.0, 4.0)
    err = float(np.max(np.abs(invert_to_pdf(h, s) / exact - 1.0)))
    res = [CheckResult("5", "alpha=4 coherent inversion", _status(err < INVERSION_TOL),
                       f"max rel. error {err:.1e} on [0.05, 20]", f"< {INVERSION_TOL:.0e}")]
    h3 = LaplaceHandle("coherent", 1.0, 3.0)
    s3 = np.logspace(-4, -3, 11)
    ratio = np.exp(invert_to_pdf(h3, s3, log=True) - an.log_pdf_coh(s3, 1.0, 3.0))
    var = float(ratio.max() / ratio.min() - 1.0)
    res.append(CheckResult("5", "alpha=3 small-s ratio to saddle form",
                           _status(var < RATIO_VARIATION_TOL),
                           f"ratio in [{ratio.min():.6f}, {ratio.max():.6f}] over s in [1e-4, 1e-3]",
                           f"variation < {RATIO_VARIATION_TOL:.0%}"))
    return res


# ---------------------------------------------------------------------------
# 6: capacity

def check_capacity(trials=TRIALS_CAPACITY, seed=DEFAULT_SEED) -> list[CheckResult]:
    params = table_one_params()
    flat = TapProfile.flat()
    res = []
    for i, lam in enumerate((0.3, 1.0, 3.0)):
        c_coh = an.capacity_coh_a4(lam)
        c_inc = an.capacity_inc_a4(lam, flat)
        t_coh = capacity_from_laplace(LaplaceHandle("coherent", lam, 4.0))
        t_inc = capacity_from_laplace(LaplaceHandle.for_scheme("incoherent", lam, 4.0))
        for label, c, t in (("coherent", c_coh, t_coh), ("incoherent D=1", c_inc, t_inc)):
            rel = abs(c / t - 1.0)
            res.append(CheckResult("6", f"capacity closed form vs transform, {label}, density {lam}",
                                   _status(rel < CAPACITY_TOL), f"{c:.10f} vs {t:.10f} nats",
                                   f"rel. < {CAPACITY_TOL:.0e}"))
        # Monte Carlo: scenario rescaled to the target effective density
        p_coh = density_for_lambda_bar(params, flat, lam)
        p_inc = density_for_lambda_hat(params, lam)
        s_ref = np.array([0.1 * lam**2])
        # distinct seeds: rescaled scenarios on one seed would reuse the same draws
        e_coh = estimate(McConfig(trials, s_ref, seed + i, ("coherent",)), p_coh, flat)
        e_inc = estimate(McConfig(trials, s_ref, seed + i, ("incoherent",)), p_inc, flat)
        for label, c, e, scheme in (("coherent", c_coh, e_coh, "coherent"),
                                    ("incoherent D=1", c_inc, e_inc, "incoherent")):
            z = abs(e.capacity[scheme] - c) / e.capacity_se[scheme]
            res.append(CheckResult("6", f"capacity closed form vs MC, {label}, density {lam}",
                                   _status(z <= SE_BAND, trials >= MIN_TRIALS_CLT),
                                   f"MC {e.capacity[scheme]:.4f} +- {e.capacity_se[scheme]:.4f} vs "
                                   f"{c:.4f} nats ({z:.2f} SE)", f"<= {SE_BAND} SE"))
    one = an.capacity_inc_a4(1.0, flat)
    res.append(CheckResult("6", "incoherent D=1 capacity at density 1 equals pi/(3 sqrt 3)",
                           _status(abs(one - LITERAL_CAPACITY) < CAPACITY_TOL),
                           f"{one:.10f} nats (2 pi/(3 sqrt 3) = {2 * LITERAL_CAPACITY:.10f})",
                           f"|C - {LITERAL_CAPACITY:.10f}| < {CAPACITY_TOL:.0e}"))
    return res


# ---------------------------------------------------------------------------
# 7: qualitative figure claims

def outage_vs_bandwidth(params, xi, bandwidths, s=1.0):
    """Exact alpha = 4 incoherent and coherent outage along a bandwidth sweep."""
    inc, coh, D = [], [], []
    for bw in bandwidths:
        p = params.replace(bandwidth=float(bw))
        taps = build_tap_profile(float(bw), xi)
        ed = effective_densities(p, taps)
        inc.append(float(an.outage_inc_a4(s, ed.lambda_hat, taps)))
        coh.append(float(an.outage_coh_a4(s, ed.lambda_bar)))
        D.append(taps.tap_count)
    return np.array(inc), np.array(coh), np.array(D)


def _ordered(lo_est, lo_hw, hi_est, hi_hw):
    """lo <= hi up to the combined 95% half-width."""
    return bool(np.all(lo_est <= hi_est + np.hypot(lo_hw, hi_hw)))


def check_qualitative(trials=TRIALS_ORDERING, seed=DEFAULT_SEED) -> list[CheckResult]:
    # Monte Carlo thresholds scale with lambda_bar^2 of the scenario: this keeps
    # the outage informative and the truncation radius (node count) bounded
    params = table_one_params()
    res = []
    big = trials >= MIN_TRIALS_CLT

    # (a) interior minimum of incoherent outage vs bandwidth, at the 0 dB threshold
    bws = np.logspace(6, 8, 41)
    for xi in (XI_SHORT, XI_LONG):
        inc, _, _ = outage_vs_bandwidth(params, xi, bws)
        i = int(np.argmin(inc))
        interior = 0 < i < bws.size - 1
        mc = []
        for j in (0, i, bws.size - 1):
            p = params.replace(bandwidth=float(bws[j]))
            taps = build_tap_profile(float(bws[j]), xi)
            # the wideband end has up to 150 taps and an outage 30x the minimum;
            # a few thousand trials resolve it
            n = trials if j < bws.size - 1 else min(trials, 2048)
            e = estimate(McConfig(n, [1.0], seed, ("incoherent",)), p, taps)
            mc.append((e.outage["incoherent"][0], e.half_width["incoherent"][0]))
        mc_ok = (_ordered(mc[1][0], mc[1][1], mc[0][0], mc[0][1])
                 and _ordered(mc[1][0], mc[1][1], mc[2][0], mc[2][1]))
        res.append(CheckResult(
            "7a", f"interior outage minimum vs bandwidth, xi={xi * 1e6:.2f} us",
            _status(interior and mc_ok, not interior or big),
            f"exact minimum {inc[i]:.4g} at {bws[i] / 1e6:.2f} MHz (ends {inc[0]:.4g}, {inc[-1]:.4g}); "
            f"MC {mc[1][0]:.4g} vs ends {mc[0][0]:.4g}, {mc[2][0]:.4g}",
            "minimum not at an endpoint of [1, 100] MHz; MC within combined 95% half-width"))

    # (b) coherent <= incoherent on a density ladder, and the lambda p^(2/alpha) collapse
    taps = build_tap_profile(params.bandwidth, XI_SHORT)
    lam_bar = effective_densities(params, taps).lambda_bar
    dens = params.node_density * np.logspace(-0.3, 0.3, 5)
    s = lam_bar**2 * np.array([1.0, 4.0])
    ok_exact = True
    for d in dens:
        ed = effective_densities(params.replace(node_density=d), taps)
        ok_exact &= bool(np.all(an.outage_coh_a4(s, ed.lambda_bar) <= an.outage_inc_a4(s, ed.lambda_hat, taps)))
    ladder = estimate_density_ladder(McConfig(trials, s, seed, ("coherent", "incoherent")),
                                     params, taps, dens)
    ok_mc = all(_ordered(e.outage["coherent"], e.half_width["coherent"],
                         e.outage["incoherent"], e.half_width["incoherent"]) for e in ladder)
    mono = all(np.all(b.counts[k] <= a.counts[k])
               for a, b in zip(ladder, ladder[1:]) for k in ("coherent", "incoherent"))
    res.append(CheckResult("7b", "coherent <= incoherent outage over density ladder",
                           _status(ok_exact and ok_mc and mono, not ok_exact or big),
                           f"exact ordering {ok_exact}, MC ordering {ok_mc}, "
                           f"MC nonincreasing in density {mono}",
                           "pointwise, MC within combined 95% half-width"))

    p4 = params.replace(node_density=4 * params.node_density)
    pp = params.with_tx_snr(params.tx_snr * 4 ** (params.alpha / 2.0))
    e_a, e_b = effective_densities(p4, taps), effective_densities(pp, taps)
    grid = e_a.lambda_bar**2 * np.logspace(-0.5, 1.0, 6)
    dev = max(float(np.max(np.abs(an.outage_coh_a4(grid, e_a.lambda_bar)
                                  - an.outage_coh_a4(grid, e_b.lambda_bar)))),
              float(np.max(np.abs(an.outage_inc_a4(grid, e_a.lambda_hat, taps)
                                  - an.outage_inc_a4(grid, e_b.lambda_hat, taps)))))
    ea = estimate(McConfig(trials, grid, seed, ("coherent", "incoherent")), p4, taps)
    eb = estimate(McConfig(trials, grid, seed + 1, ("coherent", "incoherent")), pp, taps)
    z = 0.0
    for k in ("coherent", "incoherent"):
        se = np.hypot(ea.binomial_se(k, np.clip(ea.outage[k], 1 / trials, 1 - 1 / trials)),
                      eb.binomial_se(k, np.clip(eb.outage[k], 1 / trials, 1 - 1 / trials)))
        z = max(z, float(np.max(np.abs(ea.outage[k] - eb.outage[k]) / se)))
    res.append(CheckResult("7b", "density x4 equals power x4^(alpha/2)",
                           _status(dev < 1e-12 and z <= SE_BAND, dev >= 1e-12 or big),
                           f"exact max deviation {dev:.1e}; MC max difference {z:.2f} SE",
                           f"exact < 1e-12, MC <= {SE_BAND} SE"))

    # (c) random-Q between coherent and incoherent (flat fading)
    flat = TapProfile.flat()
    s_flat = effective_densities(params, flat).lambda_bar ** 2 * np.array([1.0, 4.0])
    ok_exact, ok_mc = True, True
    for Q in (2, 4, 8):
        for d in dens:
            ed = effective_densities(params.replace(node_density=d), flat)
            h = LaplaceHandle.for_scheme("random", ed.lambda_hat, 4.0, channels=Q)
            pr = invert_to_cdf(h, s_flat)
            ok_exact &= bool(np.all((an.outage_coh_a4(s_flat, ed.lambda_bar) <= pr)
                                    & (pr <= an.outage_inc_a4(s_flat, ed.lambda_hat, flat))))
        lad = estimate_density_ladder(
            McConfig(trials, s_flat, seed, ("coherent", "incoherent", "random"), channels=Q),
            params, flat, dens)
        for e in lad:
            ok_mc &= _ordered(e.outage["coherent"], e.half_width["coherent"],
                              e.outage["random"], e.half_width["random"])
            ok_mc &= _ordered(e.outage["random"], e.half_width["random"],
                              e.outage["incoherent"], e.half_width["incoherent"])
    res.append(CheckResult("7c", "random-Q outage between coherent and incoherent, Q in {2,4,8}",
                           _status(ok_exact and ok_mc, not ok_exact or big),
                           f"exact {ok_exact}, MC {ok_mc}",
                           "pointwise, MC within combined 95% half-width"))

    # (d) capacity grows with delay spread and falls with bandwidth
    settings = ((10e6, XI_SHORT), (10e6, XI_LONG), (20e6, XI_SHORT))
    rows_ok = True
    for d in params.node_density * np.logspace(-1, 1, 5):
        caps = {}
        for bw, xi in settings:
            tp = build_tap_profile(bw, xi)
            ed = effective_densities(params.replace(node_density=d, bandwidth=bw), tp)
            caps[(bw, xi)] = (an.capacity_coh_a4(ed.lambda_bar), an.capacity_inc_a4(ed.lambda_hat, tp))
        for k in (0, 1):
            rows_ok &= caps[settings[1]][k] > caps[settings[0]][k] > caps[settings[2]][k]
    mc = {}
    for bw, xi in settings:
        p = params.replace(bandwidth=bw)
        tp = build_tap_profile(bw, xi)
        s_cap = [effective_densities(p, tp).lambda_bar ** 2]
        mc[(bw, xi)] = estimate(McConfig(trials, s_cap, seed, ("coherent", "incoherent")), p, tp)
    mc_ok = True
    for lo, hi in ((settings[0], settings[1]), (settings[2], settings[0])):
        for k in ("coherent", "incoherent"):
            a, b = mc[lo], mc[hi]
            mc_ok &= a.capacity[k] <= b.capacity[k] + SE_BAND * math.hypot(a.capacity_se[k],
                                                                          b.capacity_se[k])
    res.append(CheckResult("7d", "capacity increases with delay spread, decreases with bandwidth",
                           _status(rows_ok and mc_ok, not rows_ok or big),
                           f"closed forms over 5 densities {rows_ok}, MC at default density {mc_ok}",
                           f"pointwise; MC within {SE_BAND} combined SE"))
    return res


# ---------------------------------------------------------------------------
# 8: identities

def check_identities(seed=DEFAULT_SEED) -> list[CheckResult]:
    res = []
    params = table_one_params()
    worst = 0.0
    for bw in (1e6, 4e6, 10e6, 30e6):
        for xi in (XI_SHORT, XI_LONG):
            taps = build_tap_profile(bw, xi)
            if taps.well_conditioned:
                worst = max(worst, abs(float(np.sum(taps.coeffs)) - 1.0))
    res.append(CheckResult("8", "sum of partial-fraction weights", _status(worst < 1e-10),
                           f"max |sum A_d - 1| = {worst:.1e}", "< 1e-10"))

    alphas = np.linspace(2.1, 8.0, 60)
    dev = max(abs(reflection_prefactor(a) / (special.gamma(1 - 2 / a) * special.gamma(1 + 2 / a)) - 1)
              for a in alphas)
    res.append(CheckResult("8", "Gamma reflection prefactor identity", _status(dev < 1e-12),
                           f"max rel. deviation {dev:.1e} over alpha in [2.1, 8]", "< 1e-12"))

    u = np.logspace(-3, 3, 31)
    ok = True
    flat = TapProfile.flat()
    handles = [LaplaceHandle("coherent", 1.0, 4.0), LaplaceHandle("coherent", 1.0, 3.0),
               LaplaceHandle.for_scheme("incoherent", 1.0, 4.0),
               LaplaceHandle.for_scheme("incoherent", 1.0, 4.0, taps=build_tap_profile(10e6, XI_SHORT)),
               LaplaceHandle.for_scheme("incoherent", 1.0, 3.0),
               LaplaceHandle.for_scheme("random", 1.0, 4.0, channels=4)]
    for h in handles:
        ll = np.log(np.asarray(h(u)))
        ok &= h(0.0) == 1.0
        ok &= bool(np.all(np.diff(ll) <= 0))
        # log-convexity in u on the log-spaced grid: divided-difference slopes nondecreasing
        slopes = np.diff(ll) / np.diff(u)
        ok &= bool(np.all(np.diff(slopes) >= -1e-9 * np.abs(slopes[1:])))
    res.append(CheckResult("8", "L(0) = 1, L nonincreasing and log-convex", _status(ok),
                           f"{len(handles)} transforms on u in [1e-3, 1e3]", "exact"))

    rng = np.random.Generator(np.random.SFC64(np.random.SeedSequence(seed)))
    smp = sample_network(params, flat, 500.0, rng, trials=2000)
    d = np.max(np.abs(snr_random(smp, params, 1) - snr_incoherent(smp, params, flat)))
    # a small disc leaves many trials with exactly one node
    smp = sample_network(params, flat, 30.0, rng, trials=2000)
    single = smp.node_count == 1
    coh = snr_coherent(smp, params, flat)[single]
    d1 = float(np.max(np.abs(snr_incoherent(smp, params, flat)[single] - coh) / coh))
    res.append(CheckResult("8", "Q=1 degeneracy per sample", _status(d == 0.0 and d1 < 1e-12),
                           f"max |random(Q=1) - incoherent| = {d:.1e}; incoherent vs coherent on "
                           f"{int(single.sum())} single-node trials, max rel. {d1:.1e}",
                           "identical draws"))

    taps = build_tap_profile(params.bandwidth, XI_SHORT)
    lam_bar = effective_densities(params, taps).lambda_bar
    cfg = McConfig(4096, exactness_thresholds(lam_bar, "coherent", count=3), seed,
                   ("coherent", "incoherent"))
    e1 = estimate(cfg.replace(workers=1), params, taps)
    e4 = estimate(cfg.replace(workers=4), params, taps)
    same = all(np.array_equal(e1.counts[k], e4.counts[k]) and e1.capacity[k] == e4.capacity[k]
               for k in cfg.schemes)
    res.append(CheckResult("8", "determinism across worker counts", _status(same),
                           "1 vs 4 workers, 4096 trials", "bitwise identical"))
    return res


# ---------------------------------------------------------------------------

CHECKS = {
    "1": check_coherent_exactness,
    "2": check_incoherent_exactness,
    "3": check_small_s_slopes,
    "4": check_constant_pinning,
    "5": check_inversion,
    "6": check_capacity,
    "7": check_qualitative,
    "8": check_identities,
}
_STATISTICAL = {"1", "2", "3", "6", "7"}


def run_checks(only=None, trials: int | None = None, seed: int = DEFAULT_SEED):
    """Run the acceptance checks; ``trials`` overrides every Monte Carlo trial count."""
    out = []
    for key, fn in CHECKS.items():
        if only and key not in only:
            continue
        kwargs = {}
        if key in _STATISTICAL:
            kwargs["seed"] = seed
            if trials is not None:
                kwargs["trials"] = trials
        elif key == "8":
            kwargs["seed"] = seed
        out.extend(fn(**kwargs))
    return out
