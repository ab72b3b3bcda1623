"""Monte Carlo simulation of the relay field.

Each trial draws a Poisson number of transmitters in a sector of radius
r_max, with lognormal shadowing and complex Gaussian tap gains, and evaluates
the coherent, incoherent and random-orthogonal SNRs directly from their
definitions. Trials are grouped in blocks of ``BLOCK`` (fewer when a block
would exceed ``NODE_BUDGET`` expected nodes) whose random streams derive
from (seed, block index) only, so results do not depend on how many
worker processes run the blocks. Outage counts are integers and capacity sums
are exactly rounded (``math.fsum``), so accumulation order is irrelevant too.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .model import NetworkParams, TapProfile, effective_densities

__all__ = [
    "BLOCK",
    "NODE_BUDGET",
    "McConfig",
    "McEstimate",
    "NetworkSample",
    "dump_snr",
    "estimate",
    "estimate_density_ladder",
    "sample_network",
    "snr_coherent",
    "snr_incoherent",
    "snr_random",
    "truncation_radius",
]

BLOCK = 1024
NODE_BUDGET = 2**23     # expected nodes per block; denser fields use smaller blocks
SCHEMES = ("coherent", "incoherent", "random")
Z95 = 1.959963984540054

# substream tags under (seed, block)
_MAIN, _ANNULUS, _MARKS = 0, 1, 2


def truncation_radius(params: NetworkParams, taps: TapProfile | None = None, eps: float = 1e-3,
                      s_min: float = 1.0) -> float:
    """Radius beyond which the expected excluded SNR is at most ``eps * s_min``.

    Nodes outside r contribute lambda*phi0*p*l0 * r^(2-alpha) / (alpha-2) on
    average (unit-mean shadowing, unit total tap power).
    """
    alpha = params.pathloss_exponent
    if not alpha > 2:
        raise ValueError("alpha must be > 2: the excluded power diverges")
    if not 0 < eps <= 0.1:
        raise ValueError(f"eps must lie in (0, 0.1], got {eps}")
    if not s_min > 0:
        raise ValueError("s_min must be > 0")
    c = params.node_density * params.cone_angle * params.tx_snr * params.pathloss_const
    return (c / ((alpha - 2.0) * eps * s_min)) ** (1.0 / (alpha - 2.0))


@dataclass(frozen=True)
class McConfig:
    trials: int
    s_grid: np.ndarray
    seed: int = 0
    schemes: tuple = ("coherent", "incoherent")
    channels: int = 1
    r_max: float | None = None
    truncation_tol: float = 1e-3
    workers: int | None = None

    def __post_init__(self):
        s = np.array(self.s_grid, dtype=float).ravel()
        s.setflags(write=False)
        object.__setattr__(self, "s_grid", s)
        object.__setattr__(self, "schemes", tuple(self.schemes))
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if s.size == 0 or np.any(s <= 0) or np.any(np.diff(s) <= 0):
            raise ValueError("s_grid must be positive and strictly increasing")
        if not 0 < self.truncation_tol <= 0.1:
            raise ValueError("truncation_tol must lie in (0, 0.1]")
        bad = set(self.schemes) - set(SCHEMES)
        if bad or not self.schemes:
            raise ValueError(f"unknown schemes {sorted(bad)}")
        if int(self.channels) < 1:
            raise ValueError("channels must be >= 1")
        if self.r_max is not None and not self.r_max > 0:
            raise ValueError("r_max must be > 0")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def replace(self, **changes) -> "McConfig":
        kw = {k: getattr(self, k) for k in self.__dataclass_fields__}
        kw.update(changes)
        return McConfig(**kw)


@dataclass
class NetworkSample:
    """Nodes of a batch of trials; ``trial[k]`` says which trial node k belongs to.

    ``gains`` holds the complex tap gains h_kd. Samples drawn for power-only
    use (coherent reception) leave it as None and carry |h_kd|^2 directly in
    ``fading_power``, which has the same Exp(1) law and is cheaper to draw.
    """

    trials: int
    trial: np.ndarray
    radius_sq: np.ndarray      # r_k^2, metres^2
    shadow: np.ndarray
    gains: np.ndarray | None   # (K, D) complex, unit mean power
    code: np.ndarray           # code index in [0, Q)
    power: np.ndarray | None = None

    @property
    def node_count(self) -> np.ndarray:
        return np.bincount(self.trial, minlength=self.trials)

    @property
    def radius(self) -> np.ndarray:
        return np.sqrt(self.radius_sq)

    @property
    def fading_power(self) -> np.ndarray:
        if self.power is not None:
            return self.power
        return self.gains.real ** 2 + self.gains.imag ** 2

    def _fields(self):
        return (self.trial, self.radius_sq, self.shadow, self.gains, self.code, self.power)

    def subset(self, mask) -> "NetworkSample":
        return NetworkSample(self.trials, *(None if a is None else a[mask] for a in self._fields()))

    def concat(self, other: "NetworkSample") -> "NetworkSample":
        if other.trials != self.trials:
            raise ValueError("samples cover different trial counts")
        if (self.gains is None) != (other.gains is None):
            raise ValueError("cannot mix power-only and complex-gain samples")
        return NetworkSample(self.trials, *(None if a is None else np.concatenate([a, b])
                                            for a, b in zip(self._fields(), other._fields())))


def sample_network(params: NetworkParams, taps: TapProfile, r_max: float, rng: np.random.Generator,
                   trials: int = 1, channels: int = 1, r_min: float = 0.0,
                   power_only: bool = False) -> NetworkSample:
    """Draw ``trials`` independent relay fields in the annulus sector r_min < r <= r_max.

    Node counts are Poisson with mean lambda*phi0*(r_max^2 - r_min^2)/2; radii
    have density proportional to r; shadowing is exp(sigma Z - sigma^2/2);
    tap gains are circular complex Gaussian with variance 1/2 per component
    (or, with ``power_only``, their Exp(1) powers).
    """
    area = 0.5 * params.cone_angle * (r_max**2 - r_min**2)
    K = rng.poisson(params.node_density * area, size=trials)
    n = int(K.sum())
    trial = np.repeat(np.arange(trials), K)
    r2 = rng.random(n)
    r2 *= r_max**2 - r_min**2
    r2 += r_min**2
    sig = params.shadow_sigma
    # single-precision normals (here and for the gains): ~30% faster, and their
    # 1e-7 granularity is far below Monte Carlo resolution
    z = rng.standard_normal(n, dtype=np.float32).astype(float)
    z *= sig
    z -= 0.5 * sig * sig
    shadow = np.exp(z, out=z)
    D = taps.tap_count
    if power_only:
        gains, power = None, rng.standard_exponential((n, D), dtype=np.float32)
    else:
        g = rng.standard_normal((n, D, 2), dtype=np.float32)
        gains = np.empty((n, D), dtype=complex)
        gains.real = g[..., 0]
        gains.imag = g[..., 1]
        gains *= math.sqrt(0.5)
        power = None
    code = rng.integers(0, channels, size=n) if channels > 1 else np.zeros(n, dtype=np.int64)
    return NetworkSample(trials, trial, r2, shadow, gains, code, power)


def _received_power(sample: NetworkSample, params: NetworkParams) -> np.ndarray:
    # g_k f_k p with g_k = l0 / r_k^alpha
    alpha = params.pathloss_exponent
    r2 = sample.radius_sq
    if alpha == 4.0:
        pl = r2 * r2
        np.reciprocal(pl, out=pl)
    else:
        pl = r2 ** (-0.5 * alpha)
    pl *= params.tx_snr * params.pathloss_const
    pl *= sample.shadow
    return pl


def _amplitude(sample: NetworkSample, params: NetworkParams) -> np.ndarray:
    return np.sqrt(_received_power(sample, params))


def snr_coherent(sample: NetworkSample, params: NetworkParams, taps: TapProfile) -> np.ndarray:
    """sum_k g_k f_k p sum_d a_d |h_kd|^2, per trial."""
    fp = sample.fading_power
    w = fp[:, 0] if fp.shape[1] == 1 else fp @ taps.powers.astype(fp.dtype)
    power = _received_power(sample, params)
    power *= w
    return np.bincount(sample.trial, weights=power, minlength=sample.trials)


def _trial_sums(sample: NetworkSample, values: np.ndarray) -> np.ndarray:
    """Per-trial sums over the node axis of ``values`` (shape (K,) or (K, m))."""
    trial, n = sample.trial, sample.trials
    out = np.zeros((n,) + values.shape[1:], dtype=values.dtype)
    if trial.size == 0:
        return out
    if np.all(trial[1:] >= trial[:-1]):
        # nodes grouped by trial: one segmented reduction over all columns
        counts = np.bincount(trial, minlength=n)
        nz = counts > 0
        starts = (np.cumsum(counts) - counts)[nz]
        out[nz] = np.add.reduceat(values, starts, axis=0)
        return out
    cols = values.reshape(values.shape[0], -1)
    flat = out.reshape(n, -1)
    for j in range(cols.shape[1]):
        c = cols[:, j]
        if np.iscomplexobj(c):
            flat[:, j] = (np.bincount(trial, weights=c.real, minlength=n)
                          + 1j * np.bincount(trial, weights=c.imag, minlength=n))
        else:
            flat[:, j] = np.bincount(trial, weights=c, minlength=n)
    return out


def snr_incoherent(sample: NetworkSample, params: NetworkParams, taps: TapProfile) -> np.ndarray:
    """sum_d a_d |sum_k sqrt(g_k f_k p) h_kd|^2, per trial."""
    if sample.gains is None:
        raise ValueError("incoherent reception needs complex tap gains")
    y = _trial_sums(sample, _amplitude(sample, params)[:, None] * sample.gains)
    return (y.real ** 2 + y.imag ** 2) @ taps.powers


def snr_random(sample: NetworkSample, params: NetworkParams, channels: int) -> np.ndarray:
    """sum_q |sum_{k on code q} sqrt(g_k f_k p) h_k|^2 over flat-fading gains, per trial."""
    if sample.gains is None:
        raise ValueError("random-channel reception needs complex tap gains")
    if sample.gains.shape[1] != 1:
        raise ValueError("the random-channel scheme is defined for flat fading only")
    Q = int(channels)
    if np.any(sample.code >= Q):
        raise ValueError("sample carries code indices outside [0, channels)")
    field_ = _amplitude(sample, params)[:, None] * sample.gains
    if Q == 1:
        y = _trial_sums(sample, field_)
        return (y.real ** 2 + y.imag ** 2) @ np.ones(1)
    f = field_[:, 0]
    idx = sample.trial * Q + sample.code
    re = np.bincount(idx, weights=f.real, minlength=sample.trials * Q)
    im = np.bincount(idx, weights=f.imag, minlength=sample.trials * Q)
    return (re * re + im * im).reshape(sample.trials, Q).sum(axis=1)


_EVALUATORS = {
    "coherent": lambda smp, p, t, q: snr_coherent(smp, p, t),
    "incoherent": lambda smp, p, t, q: snr_incoherent(smp, p, t),
    "random": lambda smp, p, t, q: snr_random(smp, p, q),
}


# ---------------------------------------------------------------------------
# block engine

def _stream(seed: int, block: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.SFC64(np.random.SeedSequence(int(seed),
                                                                      spawn_key=(block, tag))))


@dataclass(frozen=True)
class _Job:
    params: NetworkParams
    taps: TapProfile
    schemes: tuple
    channels: int
    r_max: float
    seed: int
    trials: int
    s_grid: np.ndarray
    r_ext: float | None = None
    keep: tuple = (1.0,)          # density-ladder fractions of params.node_density
    block: int = BLOCK            # trials per block, a function of the job only


def _block_snrs(job: _Job, block: int) -> list[dict[str, np.ndarray]]:
    n = min(job.block, job.trials - block * job.block)
    params = job.params
    power_only = job.schemes == ("coherent",)
    smp = sample_network(params, job.taps, job.r_max, _stream(job.seed, block, _MAIN), n,
                         job.channels, power_only=power_only)
    if job.r_ext is not None:
        extra = sample_network(params, job.taps, job.r_ext, _stream(job.seed, block, _ANNULUS),
                               n, job.channels, r_min=job.r_max, power_only=power_only)
        smp = smp.concat(extra)
    out = []
    if job.keep == (1.0,):
        levels = [smp]
    else:
        # ladder members: keep a node at fraction k of the drawn density when its mark < k;
        # dropped nodes get zero shadowing, which adds exact zeros to every sum
        marks = _stream(job.seed, block, _MARKS).random(smp.trial.size)
        levels = [replace(smp, shadow=smp.shadow * (marks < k)) for k in job.keep]
    for level in levels:
        out.append({s: _EVALUATORS[s](level, job.params, job.taps, job.channels)
                    for s in job.schemes})
    return out


def _block_stats(job: _Job, block: int):
    res = []
    for snrs in _block_snrs(job, block):
        stats = {}
        for scheme, x in snrs.items():
            counts = np.searchsorted(np.sort(x), job.s_grid, side="left")  # #{x < s}
            ln = np.log1p(x)
            stats[scheme] = (counts, math.fsum(ln), math.fsum(ln * ln))
        res.append(stats)
    return res


def _worker_count(requested: int | None, blocks: int) -> int:
    cap = os.environ.get("RELAY_SG_THREADS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, min(n, blocks))


def _run(job: _Job, workers: int | None):
    blocks = -(-job.trials // job.block)
    nw = _worker_count(workers, blocks)
    if nw == 1:
        return [_block_stats(job, b) for b in range(blocks)]
    with ProcessPoolExecutor(max_workers=nw) as pool:
        return list(pool.map(_block_stats, [job] * blocks, range(blocks)))


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class McEstimate:
    """Empirical outage and capacity for each simulated scheme.

    ``outage[scheme][i]`` is the fraction of trials with SNR < s_grid[i];
    ``half_width`` is the 95% Agresti-Coull half-width. Capacities are
    sample means of ln(1 + SNR) in nats with their standard errors.
    """

    s_grid: np.ndarray
    outage: dict
    half_width: dict
    counts: dict
    capacity: dict
    capacity_se: dict
    trials: int
    seed: int
    r_max: float
    extra: dict = field(default_factory=dict)

    def binomial_se(self, scheme: str, p=None) -> np.ndarray:
        """sqrt(p (1-p) / n) at ``p`` (default: the estimate itself)."""
        p = self.outage[scheme] if p is None else np.asarray(p, dtype=float)
        return np.sqrt(p * (1.0 - p) / self.trials)


def _agresti_coull(k: np.ndarray, n: int) -> np.ndarray:
    n_t = n + Z95**2
    p_t = (k + 0.5 * Z95**2) / n_t
    return Z95 * np.sqrt(p_t * (1.0 - p_t) / n_t)


def _collect(per_block, level: int, job: _Job, r_used: float) -> McEstimate:
    n = job.trials
    out, hw, cnt, cap, cse = {}, {}, {}, {}, {}
    for scheme in job.schemes:
        k = np.sum([b[level][scheme][0] for b in per_block], axis=0)
        s1 = math.fsum(b[level][scheme][1] for b in per_block)
        s2 = math.fsum(b[level][scheme][2] for b in per_block)
        mean = s1 / n
        var = max(s2 / n - mean * mean, 0.0) * n / (n - 1) if n > 1 else 0.0
        cnt[scheme] = k
        out[scheme] = k / n
        hw[scheme] = _agresti_coull(k, n)
        cap[scheme] = mean
        cse[scheme] = math.sqrt(var / n)
    return McEstimate(job.s_grid, out, hw, cnt, cap, cse, n, job.seed, r_used)


def auto_radius(config: McConfig, params: NetworkParams, taps: TapProfile) -> float:
    """Truncation radius used when ``config.r_max`` is None.

    The reference SNR is the smallest threshold for the coherent scheme. For
    the incoherent and random schemes the far field acts as a small additive
    random phasor, which shifts the outage in proportion to its power
    relative to the typical SNR scale lambda_hat^(alpha/2) rather than to
    the threshold; that scale (or the smallest threshold, if larger) is used.
    """
    if config.r_max is not None:
        return float(config.r_max)
    s_min = float(config.s_grid[0])
    if "coherent" in config.schemes:
        ref = s_min
    else:
        lam_hat = effective_densities(params, taps).lambda_hat
        ref = max(s_min, lam_hat ** (params.pathloss_exponent / 2.0))
    return truncation_radius(params, taps, config.truncation_tol, ref)


def _job(config: McConfig, params: NetworkParams, taps: TapProfile, r_max: float,
         **kw) -> _Job:
    if "random" in config.schemes and taps.tap_count != 1:
        raise ValueError("the random-channel scheme is defined for flat fading only")
    r_out = kw.get("r_ext") or r_max
    mean_nodes = 0.5 * params.node_density * params.cone_angle * r_out**2
    block = BLOCK
    while block > 1 and block * mean_nodes > NODE_BUDGET:
        block //= 2
    return _Job(params, taps, config.schemes, int(config.channels), r_max, int(config.seed),
                int(config.trials), config.s_grid, block=block, **kw)


def estimate(config: McConfig, params: NetworkParams, taps: TapProfile | None = None,
             extend_to: float | None = None) -> McEstimate:
    """Monte Carlo outage and capacity estimates.

    ``extend_to`` adds the nodes of the annulus r_max < r <= extend_to from a
    separate substream, so the inner field is identical to the run without
    it; this isolates the effect of the truncation.
    """
    taps = taps or TapProfile.flat()
    r_max = auto_radius(config, params, taps)
    if extend_to is not None and not extend_to > r_max:
        raise ValueError("extend_to must exceed r_max")
    job = _job(config, params, taps, r_max, r_ext=extend_to)
    return _collect(_run(job, config.workers), 0, job, extend_to or r_max)


def estimate_density_ladder(config: McConfig, params: NetworkParams, taps: TapProfile | None,
                            densities) -> list[McEstimate]:
    """Estimates at several node densities from one thinned field (common random numbers).

    The field is drawn at the largest density; each node carries a uniform
    mark and is kept at density lambda_i when mark < lambda_i / lambda_max.
    All ladder members share the truncation radius of the densest one.
    """
    taps = taps or TapProfile.flat()
    dens = np.asarray(densities, dtype=float)
    if dens.size == 0 or np.any(dens <= 0):
        raise ValueError("densities must be positive")
    top = float(dens.max())
    base = params.replace(node_density=top)
    # the excluded-power bound grows with density; the densest member sets r_max
    r_max = auto_radius(config, base, taps)
    keep = tuple(float(d) / top for d in dens)
    job = _job(config, base, taps, r_max, keep=keep)
    per_block = _run(job, config.workers)
    return [_collect(per_block, i, job, r_max) for i in range(len(keep))]


def dump_snr(config: McConfig, params: NetworkParams, taps: TapProfile | None, scheme: str,
             stream) -> int:
    """Write ``trial<TAB>snr`` lines for every trial of one scheme; returns the line count."""
    taps = taps or TapProfile.flat()
    if scheme not in config.schemes:
        config = config.replace(schemes=(scheme,))
    job = _job(config, params, taps, auto_radius(config, params, taps))
    blocks = -(-job.trials // job.block)
    for b in range(blocks):
        x = _block_snrs(job, b)[0][scheme]
        idx = np.arange(b * job.block, b * job.block + x.size)
        stream.write("".join(f"{i}\t{v:.17g}\n" for i, v in zip(idx, x)))
    return job.trials
