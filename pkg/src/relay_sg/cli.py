"""Command-line experiment runner.

Every command writes a CSV table to ``--out`` (default stdout) preceded by
``#`` lines echoing the effective scenario, seed, trial count and the
evaluation route of each column. Approximate columns carry a ``_valid``
regime flag. Monte Carlo columns appear only when ``--trials`` is positive.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .analytic import SnrDistribution
from .model import (
    TapProfile,
    build_tap_profile,
    dbm_to_watt,
    effective_densities,
    pathloss_const_from_reference,
    table_one_params,
)
from .simulate import McConfig, dump_snr, estimate, estimate_density_ladder
from .transform import AccuracyShortfallError, UnsupportedMethodError

# scenario keys accepted by --config / --set, with defaults
DEFAULTS = {
    "node_density": 1e-3,             # nodes per m^2
    "cone_angle": 2 * math.pi / 3,    # radians
    "pathloss_exponent": 4.0,
    "shadow_sigma_db": 8.0,
    "pathloss_db": -93.0,             # gain at ref_distance
    "ref_distance": 25.0,             # m
    "tx_power_dbm": 10.0,
    "tx_snr_db": None,                # overrides tx_power_dbm when set
    "bandwidth": 10e6,                # Hz
    "noise_psd_dbm_hz": -167.8,
    "delay_spread": 0.17e-6,          # s
    "capture": 0.9,
    "threshold_db": 0.0,
    "schemes": "coherent,incoherent",
    "channels": "2,4,8",
}

# command -> (swept key, default from, default to, points, spacing)
SWEEPS = {
    "outage-vs-density": ("node_density", 1e-4, 1e-2, 21, "log"),
    "outage-vs-bandwidth": ("bandwidth", 1e6, 1e8, 21, "log"),
    "outage-vs-threshold": ("threshold_db", -20.0, 20.0, 21, "lin"),
    "outage-vs-txsnr": ("tx_snr_db", 80.0, 130.0, 26, "lin"),
    "outage-vs-scheme": ("node_density", 1e-4, 1e-2, 21, "log"),
    "capacity-vs-density": ("node_density", 1e-4, 1e-2, 21, "log"),
}

SCHEME_TAGS = {"coherent": "coh", "incoherent": "inc", "random": "rand"}


class UsageError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scenario parsing

def _parse_value(key: str, text: str):
    if key not in DEFAULTS:
        raise UsageError(f"unknown key {key!r}")
    if key in ("schemes", "channels"):
        return text.strip()
    if key == "tx_snr_db" and text.strip().lower() in ("", "none"):
        return None
    try:
        return float(text)
    except ValueError:
        raise UsageError(f"{key}: not a number: {text!r}") from None


def read_config(path: str) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments ignored."""
    out = {}
    with open(path) as fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = (x.strip() for x in line.split("=", 1))
            out[k] = _parse_value(k, v)
    return out


def _parse_sets(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        k, v = (x.strip() for x in item.split("=", 1))
        out[k] = _parse_value(k, v)
    return out


@dataclass(frozen=True)
class Scenario:
    values: dict

    def get(self, key):
        return self.values[key]

    def with_value(self, key, value) -> "Scenario":
        return Scenario({**self.values, key: value})

    def params(self):
        v = self.values
        alpha = v["pathloss_exponent"]
        p = table_one_params(
            node_density=v["node_density"], cone_angle=v["cone_angle"], pathloss_exponent=alpha,
            shadow_sigma_db=v["shadow_sigma_db"],
            pathloss_const=pathloss_const_from_reference(v["pathloss_db"], v["ref_distance"], alpha),
            tx_power=dbm_to_watt(v["tx_power_dbm"]), bandwidth=v["bandwidth"],
            noise_psd=dbm_to_watt(v["noise_psd_dbm_hz"]))
        if v["tx_snr_db"] is not None:
            p = p.with_tx_snr(10.0 ** (v["tx_snr_db"] / 10.0))
        return p

    def taps(self) -> TapProfile:
        if self.values["delay_spread"] == 0:
            return TapProfile.flat()
        return build_tap_profile(self.values["bandwidth"], self.values["delay_spread"],
                                 self.values["capture"])

    @property
    def threshold(self) -> float:
        return 10.0 ** (self.values["threshold_db"] / 10.0)

    def schemes(self) -> tuple:
        out = tuple(x.strip() for x in self.values["schemes"].split(",") if x.strip())
        for s in out:
            if s not in SCHEME_TAGS:
                raise UsageError(f"schemes: unknown scheme {s!r}")
        return out

    def channel_list(self) -> list:
        try:
            q = [int(x) for x in self.values["channels"].split(",") if x.strip()]
        except ValueError:
            raise UsageError(f"channels: expected integers, got {self.values['channels']!r}") from None
        if not q or min(q) < 1:
            raise UsageError("channels: need at least one value >= 1")
        return q


def build_scenario(args, swept: str | None) -> Scenario:
    values = dict(DEFAULTS)
    given = {}
    if args.config:
        given.update(read_config(args.config))
    given.update(_parse_sets(args.set))
    if swept is not None and swept in given:
        raise UsageError(f"{swept}: swept variable cannot also be fixed")
    values.update(given)
    return Scenario(values)


def sweep_grid(args, command: str) -> np.ndarray:
    _, lo, hi, n, spacing = SWEEPS[command]
    lo = lo if args.sweep_from is None else args.sweep_from
    hi = hi if args.sweep_to is None else args.sweep_to
    n = n if args.points is None else args.points
    spacing = args.spacing or spacing
    if n < 1:
        raise UsageError("points: must be >= 1")
    if n == 1:
        return np.array([lo])
    if not lo < hi:
        raise UsageError("from: must be smaller than to")
    if spacing == "log":
        if lo <= 0:
            raise UsageError("from: log spacing needs a positive range")
        return np.logspace(math.log10(lo), math.log10(hi), n)
    return np.linspace(lo, hi, n)


# ---------------------------------------------------------------------------
# evaluation helpers

def _safe(fn):
    try:
        return float(fn())
    except (UnsupportedMethodError, AccuracyShortfallError, ValueError):
        return math.nan


def _distribution(scenario: Scenario, scheme: str, channels: int = 1) -> SnrDistribution:
    taps = TapProfile.flat() if scheme == "random" else scenario.taps()
    return SnrDistribution(scheme, effective_densities(scenario.params(), taps), taps, channels)


def _outage_columns(scenario: Scenario, name: str, scheme: str, channels: int, methods: dict) -> dict:
    dist = _distribution(scenario, scheme, channels)
    s = scenario.threshold
    row = {}
    main = dist.method_for("outage")
    if main == "saddle_smalls":
        # no exact or numeric route (alpha != 4 with several taps)
        row[name] = math.nan
        methods.setdefault(name, "unavailable")
    else:
        row[name] = _safe(lambda: dist.outage(s))
        methods.setdefault(name, main)
    if scheme != "coherent":
        row[f"{name}_smalls"] = _safe(lambda: dist.outage(s, "saddle_smalls"))
        row[f"{name}_smalls_valid"] = int(bool(dist.valid(s)))
        methods.setdefault(f"{name}_smalls", "saddle_smalls")
    return row


def _scheme_names(scenario: Scenario, command: str):
    """(column name, scheme, channel count) per reported curve."""
    if command == "outage-vs-scheme":
        out = [("coherent", "coherent", 1), ("incoherent", "incoherent", 1)]
        out += [(f"random_q{q}", "random", q) for q in scenario.channel_list()]
        return out
    out = []
    for sch in scenario.schemes():
        if sch == "random":
            out += [(f"random_q{q}", "random", q) for q in scenario.channel_list()]
        else:
            out.append((sch, sch, 1))
    return out


def _mc_columns(scenario: Scenario, curves, args, capacity: bool) -> dict:
    row = {}
    params = scenario.params()
    s = np.array([scenario.threshold])
    base = [sch for _, sch, _ in curves if sch != "random"]
    if base:
        e = estimate(McConfig(args.trials, s, args.seed, tuple(dict.fromkeys(base))), params,
                     scenario.taps())
        for name, sch, _ in curves:
            if sch != "random":
                _put_mc(row, name, e, sch, capacity)
    for name, sch, q in curves:
        if sch == "random":
            e = estimate(McConfig(args.trials, s, args.seed, ("random",), channels=q), params,
                         TapProfile.flat())
            _put_mc(row, name, e, "random", capacity)
    return row


def _put_mc(row, name, e, scheme, capacity):
    if capacity:
        row[f"{name}_mc"] = e.capacity[scheme] / math.log(2)
        row[f"{name}_mc_se"] = e.capacity_se[scheme] / math.log(2)
    else:
        row[f"{name}_mc"] = float(e.outage[scheme][0])
        row[f"{name}_mc_hw"] = float(e.half_width[scheme][0])


# ---------------------------------------------------------------------------
# output

def _header(command: str, scenario: Scenario, args, swept: str | None, methods: dict) -> list:
    lines = [f"relay-sg {__version__} {command}"]
    for k, v in scenario.values.items():
        if k != swept:
            lines.append(f"{k} = {v}")
    if swept:
        lines.append(f"swept = {swept}")
    p = scenario.params()
    lines.append(f"tx_snr_linear = {p.tx_snr:.17g}")
    lines.append(f"threshold_linear = {scenario.threshold:.17g}")
    lines.append(f"seed = {args.seed}")
    lines.append(f"trials = {args.trials}")
    for k, v in methods.items():
        lines.append(f"method.{k} = {v}")
    lines.append("capacity unit = bits/s/Hz" if "capacity" in command else "outage = P(SNR < threshold)")
    return ["# " + x for x in lines]


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.10g}"


def write_table(out, header: list, rows: list):
    for line in header:
        out.write(line + "\n")
    if not rows:
        return
    cols = list(rows[0])
    w = csv.writer(out, lineterminator="\n")
    w.writerow(cols)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in cols])


# ---------------------------------------------------------------------------
# commands

def cmd_sweep(args, command: str) -> int:
    swept = SWEEPS[command][0]
    scenario = build_scenario(args, swept)
    grid = sweep_grid(args, command)
    capacity = command == "capacity-vs-density"
    if command == "outage-vs-scheme":
        scenario = scenario.with_value("delay_spread", 0.0)
    curves = _scheme_names(scenario.with_value(swept, float(grid[0])), command)
    if any(sch == "random" for _, sch, _ in curves) and scenario.values["delay_spread"] != 0:
        raise UsageError("schemes: the random scheme needs delay_spread = 0 (flat fading)")
    methods, rows = {}, []

    ladder = None
    if args.trials > 0 and swept == "node_density" and not any(sch == "random" for _, sch, _ in curves):
        # one thinned field for the whole density axis (common random numbers)
        s = np.array([scenario.with_value(swept, float(grid[0])).threshold])
        sc0 = scenario.with_value(swept, float(grid[-1]))
        cfg = McConfig(args.trials, s, args.seed, tuple(sch for _, sch, _ in curves))
        ladder = estimate_density_ladder(cfg, sc0.params(), sc0.taps(), grid)

    for i, x in enumerate(grid):
        sc = scenario.with_value(swept, float(x))
        row = {swept: float(x)}
        if command == "outage-vs-bandwidth":
            row["D"] = sc.taps().tap_count
        for name, sch, q in curves:
            if capacity:
                dist = _distribution(sc, sch, q)
                row[name] = _safe(dist.capacity) / math.log(2)
                methods.setdefault(name, dist.method_for("capacity"))
            else:
                row.update(_outage_columns(sc, name, sch, q, methods))
        if args.trials > 0:
            if ladder is not None:
                for name, sch, _ in curves:
                    _put_mc(row, name, ladder[i], sch, capacity)
            else:
                row.update(_mc_columns(sc, curves, args, capacity))
        rows.append(row)
    with _open_out(args) as out:
        write_table(out, _header(command, scenario, args, swept, methods), rows)
    return 0


def cmd_validate(args) -> int:
    from .validation import run_checks

    only = set(args.only.split(",")) if args.only else None
    results = run_checks(only=only, trials=args.trials if args.trials else None, seed=args.seed)
    with _open_out(args) as out:
        for r in results:
            line = r.line()
            if r.timing:
                sys.stderr.write(line + "\n")
            else:
                out.write(line + "\n")
        n_fail = sum(r.status == "fail" for r in results)
        n_inc = sum(r.status == "inconclusive" for r in results)
        out.write(f"# {len(results)} checks: {len(results) - n_fail - n_inc} pass, "
                  f"{n_fail} fail, {n_inc} inconclusive\n")
    return 1 if n_fail else 0


def cmd_dump(args) -> int:
    scenario = build_scenario(args, None)
    scheme = args.scheme
    q = scenario.channel_list()[0] if scheme == "random" else 1
    taps = TapProfile.flat() if scheme == "random" else scenario.taps()
    cfg = McConfig(args.trials or 1000, [scenario.threshold], args.seed, (scheme,), channels=q)
    with _open_out(args) as out:
        for line in _header("dump-snr", scenario, args, None, {"snr": scheme}):
            out.write(line + "\n")
        dump_snr(cfg, scenario.params(), taps, scheme, out)
    return 0


class _open_out:
    def __init__(self, args):
        self.path = args.out

    def __enter__(self):
        self.fh = sys.stdout if self.path in (None, "-") else open(self.path, "w")
        return self.fh

    def __exit__(self, *exc):
        if self.fh is not sys.stdout:
            self.fh.close()
        return False


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value scenario file")
    common.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="override one scenario key (repeatable)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--trials", type=int, default=0,
                        help="Monte Carlo trials per point; 0 disables the MC columns")
    common.add_argument("--out", help="output path (default stdout)")

    sweep = argparse.ArgumentParser(add_help=False)
    sweep.add_argument("--from", dest="sweep_from", type=float)
    sweep.add_argument("--to", dest="sweep_to", type=float)
    sweep.add_argument("--points", type=int)
    sweep.add_argument("--spacing", choices=("lin", "log"))

    p = argparse.ArgumentParser(prog="relay-sg", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name, (key, *_rest) in SWEEPS.items():
        sub.add_parser(name, parents=[common, sweep], help=f"sweep {key}")
    v = sub.add_parser("validate", parents=[common], help="run the acceptance checks")
    v.add_argument("--only", help="comma-separated criterion numbers")
    d = sub.add_parser("dump-snr", parents=[common], help="per-trial SNR samples of one scheme")
    d.add_argument("--scheme", choices=tuple(SCHEME_TAGS), default="incoherent")
    p.epilog = "scenario keys: " + ", ".join(DEFAULTS)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.trials < 0:
        parser.error("--trials must be >= 0")
    try:
        if args.command in SWEEPS:
            return cmd_sweep(args, args.command)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_dump(args)
    except UsageError as exc:
        parser.error(str(exc))


if __name__ == "__main__":
    sys.exit(main())
