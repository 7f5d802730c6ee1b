"""Command-line interface.

Every command reads an optional JSON config (``--config``) whose keys match
the long flag names with ``-`` replaced by ``_``; flags override the file and
unknown keys are rejected. Results go to ``--out`` (written atomically) or to
standard output. Failures exit with status 2 and a JSON error object on
standard error.

The environment variable ``TFWATER_THREADS`` caps the BLAS/LAPACK thread count.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from typing import Any

import numpy as np

from . import __version__
from . import heat
from .coding import heat_coding_config, simulate, build_codebooks, encode, channel, train_time
from .errors import TFWaterError
from .waterfilling import reverse_waterfill_discrete, tf_capacity, tf_rate, waterfill_discrete
from .weyl import (Grid2D, gaussian_symbol, ln_plus, spectrum, symbol_moments, symbol_to_kernel,
                   szego_gap, trace_identity_check)
from .source import wvs, wvs_principal

SCHEMA_VERSION = 1
THREADS_ENV = "TFWATER_THREADS"

COMMANDS = ("capacity", "rate", "szego", "eoc", "simulate", "wvs")

# defaults per command; only these keys are accepted in a config file
DEFAULTS: dict[str, dict[str, Any]] = {
    "capacity": {"gamma": 1.0, "r": [1.0, 2.0, 4.0, 8.0], "snr": [100.0], "theta2": 0.01},
    "rate": {"gamma": 1.0, "r": [1.0, 2.0, 4.0, 8.0], "sdr": [10.0], "sigma2": 1.0},
    "szego": {"gamma": 1.0, "r": [1.0, 2.0, 4.0, 8.0], "b": 10.0, "a": 1.0, "grid_n": None},
    "eoc": {"gamma": [0.1], "r": [2.0]},
    "simulate": {"gamma": 0.1, "r": 2.0, "snr": 100.0, "theta2": 0.01, "L": 4,
                 "rate_fraction": 0.7, "trials": 1000, "codebooks": 1, "seed": 0,
                 "pulse_train_out": None},
    "wvs": {"gamma": 1.0, "r": 2.0, "sigma2": 1.0, "grid_n": None},
}
COMMON = {"out": None, "format": None}
LIST_KEYS = {"r", "snr", "sdr", "gamma"}
DEFAULT_FORMAT = {"capacity": "csv", "rate": "csv", "szego": "json", "eoc": "json",
                  "simulate": "json", "wvs": "csv"}


class UsageError(TFWaterError, ValueError):
    """Bad command-line or config input."""


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


class _Parser(argparse.ArgumentParser):
    # report bad arguments through the JSON error path instead of exiting
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="tfwater",
        description="Capacity and rate-distortion of LTV Gaussian channels and sources.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", metavar="PATH", help="JSON file with parameters")
    parser.add_argument("--gamma", type=_float_list, help="dilation parameter(s)")
    parser.add_argument("--r", type=_float_list, help="spreading factor(s), comma-separated")
    parser.add_argument("--snr", type=_float_list, help="signal-to-noise ratio(s)")
    parser.add_argument("--sdr", type=_float_list, help="signal-to-distortion ratio(s)")
    parser.add_argument("--theta2", type=float, help="noise PSD")
    parser.add_argument("--sigma2", type=float, help="source PSD")
    parser.add_argument("--grid-n", type=int, help="time samples of the operator grid (power of two)")
    parser.add_argument("--seed", type=int, help="RNG seed")
    parser.add_argument("--b", type=float, help="argument scale of g in the Szego check")
    parser.add_argument("--L", type=int, help="pulses per codeword")
    parser.add_argument("--trials", type=int, help="Monte Carlo trials")
    parser.add_argument("--codebooks", type=int, help="independent codebook draws")
    parser.add_argument("--rate-fraction", type=float, help="R_k / C_k")
    parser.add_argument("--pulse-train-out", metavar="PATH", help="CSV of one pulse train (simulate)")
    parser.add_argument("--out", metavar="PATH", help="output file (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"))
    return parser


def resolve_config(args: argparse.Namespace) -> dict[str, Any]:
    """Merge defaults, config file and flags for ``args.command``."""
    cmd = args.command
    allowed = {**DEFAULTS[cmd], **COMMON}
    cfg = dict(allowed)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(allowed))
        if unknown:
            raise UsageError(f"unknown config keys for '{cmd}': {', '.join(unknown)}")
        cfg.update(data)
    for key in allowed:
        val = getattr(args, key, None)
        if val is not None:
            cfg[key] = val
    for key, val in vars(args).items():
        if key in ("command", "config") or val is None or key in allowed:
            continue
        raise UsageError(f"option --{key.replace('_', '-')} does not apply to '{cmd}'")
    for key in LIST_KEYS & set(cfg):
        val = cfg[key]
        as_list = isinstance(DEFAULTS[cmd][key], list)
        if as_list and not isinstance(val, list):
            cfg[key] = [val]
        elif not as_list and isinstance(val, list):
            if len(val) != 1:
                raise UsageError(f"'{key}' takes a single value for '{cmd}'")
            cfg[key] = val[0]
    cfg["format"] = cfg["format"] or DEFAULT_FORMAT[cmd]
    if cfg["format"] not in ("csv", "json"):
        raise UsageError(f"format must be csv or json, got {cfg['format']!r}")
    return cfg


def _grid(p, r, grid_n):
    return Grid2D.for_symbol(p, r, n=grid_n) if grid_n else Grid2D.for_symbol(p, r)


def cmd_capacity(cfg):
    rows = []
    p = gaussian_symbol(cfg["gamma"])
    for snr in cfg["snr"]:
        for r in cfg["r"]:
            m = heat.model(cfg["gamma"], r)
            S = 2.0 * math.pi * r * r * cfg["theta2"] * snr
            exact = waterfill_discrete(cfg["theta2"] / m.eigenvalues(1e-14), S).capacity_nats
            tf = tf_capacity(p, r, S, cfg["theta2"]).value_nats
            rows.append([r, exact, tf, heat.closed_form_capacity(snr, r), snr])
    return ["r", "C_exact_nats", "C_tf_nats", "C_closed_form_nats", "snr"], rows


def cmd_rate(cfg):
    rows = []
    p = gaussian_symbol(cfg["gamma"])
    sigma2 = cfg["sigma2"]
    for sdr in cfg["sdr"]:
        for r in cfg["r"]:
            m = heat.model(cfg["gamma"], r)
            D = m.total_energy * sigma2 / sdr
            exact = reverse_waterfill_discrete(sigma2 * m.eigenvalues(1e-14), D).rate_nats
            tf = tf_rate(p, r, D, sigma2).value_nats
            rows.append([r, exact, tf, heat.closed_form_rate(sdr, r), sdr])
    return ["r", "R_exact_nats", "R_tf_nats", "R_closed_form_nats", "sdr"], rows


_SZEGO_FUNCS = {
    "half_ln_plus": lambda x: 0.5 * ln_plus(x),
    "min1": lambda x: np.minimum(1.0, x),
}


def cmd_szego(cfg):
    rows = []
    p = gaussian_symbol(cfg["gamma"])
    for r in cfg["r"]:
        spec = spectrum(symbol_to_kernel(p, r, _grid(p, r, cfg["grid_n"])), vectors=False)
        total, integral, gap = trace_identity_check(spec, p, r)
        rows.append([r, "identity", total, integral, abs(total - integral) / r ** 2])
        for name, g in _SZEGO_FUNCS.items():
            lhs, rhs, gap = szego_gap(spec, p, r, g, cfg["a"], cfg["b"], kinks=(1.0,))
            rows.append([r, name, lhs, rhs, gap])
    return ["r", "g", "eigen_sum", "phase_space_integral", "gap_per_r2"], rows


def cmd_eoc(cfg):
    rows = []
    for gamma in cfg["gamma"]:
        bound = symbol_moments(gaussian_symbol(gamma), 1.0).r_lower_bound
        for r in cfg["r"]:
            e = heat.eoc(gamma, r)
            rows.append([gamma, r, e.a_approx, e.b_approx, e.a_exact, e.b_exact, e.area_exact, bound])
    return ["gamma", "r", "a", "b", "a_x", "b_x", "area_exact", "r_lower_bound"], rows


def cmd_wvs(cfg):
    m = heat.model(cfg["gamma"], cfg["r"])
    p, r = m.symbol, m.r
    op = symbol_to_kernel(p, r, _grid(p, r, cfg["grid_n"]))
    phi = wvs(op @ op.adjoint(), cfg["sigma2"])
    principal = wvs_principal(p, r, cfg["sigma2"], op.grid)
    tt, ww = np.meshgrid(phi.t, phi.omega, indexing="ij")
    rows = np.column_stack([tt.ravel(), ww.ravel(), np.real(phi.values).ravel(), principal.values.ravel()])
    return ["t", "omega", "phi", "principal"], rows.tolist()


def cmd_simulate(cfg):
    if cfg["format"] != "json":
        raise UsageError("simulate writes a JSON report; use --format json")
    coding = heat_coding_config(cfg["gamma"], cfg["r"], cfg["snr"], cfg["theta2"], cfg["L"],
                                rate_fraction=cfg["rate_fraction"], seed=cfg["seed"])
    report = simulate(coding, cfg["trials"], codebooks=cfg["codebooks"])
    if cfg["pulse_train_out"]:
        books = build_codebooks(coding)
        msgs = np.zeros(coding.K, dtype=int)
        u = encode(coding, books, msgs)
        y = channel(coding, u)
        rows = np.column_stack([train_time(coding), u, y]).tolist()
        _write_atomic(cfg["pulse_train_out"], _csv_text(["t", "u", "P_r_u"], rows))
    return report.to_dict()


HANDLERS = {"capacity": cmd_capacity, "rate": cmd_rate, "szego": cmd_szego, "eoc": cmd_eoc,
            "simulate": cmd_simulate, "wvs": cmd_wvs}


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def _csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def _write_atomic(path: str, text: str) -> None:
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(target), prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def render(cmd: str, cfg: dict, result) -> str:
    echo = {k: v for k, v in cfg.items() if k != "out"}
    if isinstance(result, dict):
        doc = {"schema_version": SCHEMA_VERSION, "command": cmd, "config": echo, "report": result}
        return json.dumps(_jsonable(doc), indent=2) + "\n"
    columns, rows = result
    if cfg["format"] == "csv":
        return _csv_text(columns, rows)
    doc = {"schema_version": SCHEMA_VERSION, "command": cmd, "config": echo,
           "columns": columns, "rows": rows}
    return json.dumps(_jsonable(doc), indent=2) + "\n"


def _limit_threads():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be an integer, got {value!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be >= 1, got {n}")
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=n)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    command = None
    limiter = None
    try:
        args = parser.parse_args(argv)
        command = args.command
        limiter = _limit_threads()
        cfg = resolve_config(args)
        text = render(command, cfg, HANDLERS[command](cfg))
        if cfg["out"]:
            _write_atomic(cfg["out"], text)
        else:
            sys.stdout.write(text)
        return 0
    except (TFWaterError, ValueError, OSError) as exc:
        err = {"schema_version": SCHEMA_VERSION, "command": command,
               "error": {"type": type(exc).__name__, "message": str(exc)}}
        sys.stderr.write(json.dumps(err) + "\n")
        return 2
    finally:
        if limiter is not None:
            limiter.restore_original_limits()


if __name__ == "__main__":
    sys.exit(main())
