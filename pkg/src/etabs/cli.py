"""Batch front door: parse a run configuration, orchestrate, emit artifacts.

Six subcommands: verify, spectrum, kernel, price, susy, dump. Options come
from flags or from a flat key = value config file (flags win); unknown config
keys are rejected. Exit status 0 on success, 1 on runtime failure, 2 on usage
errors. Structured results are JSON, vectors are CSV, and every numeric
artifact embeds the resolved config plus residual certificates so a result
can be audited without rerunning it. A recurrence-metric pseudo-Hermiticity
residual above 1e-10 marks the output "degraded" (warning on stderr, exit
still 0). Output is byte-deterministic for a fixed config once --no-timestamp
is passed; ETABS_NO_COLOR disables the ANSI coloring in the verify table.
"""

from __future__ import annotations

import argparse
import datetime
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass

import numpy as np

from .hamiltonian import (
    MarketParams,
    PotentialSpec,
    TridiagonalOperator,
    build_H_BS,
    build_H_eff,
    build_H_generalized,
    build_h_BS,
    operator_to_dict,
)
from .lattice import Lattice, centered_window, make_lattice
from .metric import (
    continuum_metric_BS,
    continuum_metric_generalized,
    detailed_balance_metric,
    pseudo_hermiticity_residual,
)
from .pricing import PayoffSpec, _restricted_lattice, price
from .spectral import decompose, pricing_kernel
from .susy import Superpotential, factorized_system, verify_susy

__all__ = ["RunConfig", "UsageError", "parse_config", "run", "main"]

DEGRADED_THRESHOLD = 1.0e-10

_GREEN = "\x1b[32m"
_YELLOW = "\x1b[33m"
_RESET = "\x1b[0m"


class UsageError(Exception):
    """Configuration problem that should exit with status 2."""


@dataclass(frozen=True)
class RunConfig:
    """One validated run: the command plus its fully resolved options."""

    command: str
    options: dict


# option tables: name -> (type tag, default); None default means "required or
# genuinely optional", decided by the per-command validators below
_MARKET = {
    "sigma": ("float", 0.2),
    "rate": ("float", 0.05),
}
_BOUNDS = {
    "x_min": ("float", -2.0),
    "x_max": ("float", 2.0),
}
_OPTIONS: dict[str, dict[str, tuple[str, object]]] = {
    "verify": {
        **_MARKET,
        **_BOUNDS,
        "n": ("int", 2000),
        "potential": ("str", None),
    },
    "spectrum": {
        **_MARKET,
        **_BOUNDS,
        "n": ("int", 500),
        "potential": ("str", None),
        "output": ("str", None),
        "no_timestamp": ("bool", False),
    },
    "kernel": {
        **_MARKET,
        **_BOUNDS,
        "n": ("int", 500),
        "tau": ("float", 0.5),
        "x": ("float", 0.0),
        "output": ("str", None),
        "no_timestamp": ("bool", False),
    },
    "price": {
        **_MARKET,
        "strike": ("float", None),
        "spot": ("float", None),
        "tau": ("float", None),
        "window_sigmas": ("float", 6.0),
        "n": ("int", 2000),
        "payoff": ("str", "call"),
        "barrier_low": ("float", None),
        "barrier_high": ("float", None),
        "output": ("str", None),
        "surface": ("str", None),
        "no_timestamp": ("bool", False),
    },
    "susy": {
        **_MARKET,
        "W": ("str", "zero"),
        "n": ("int", 500),
        "window": ("float", 12.0),
        "output": ("str", None),
        "spectra": ("str", None),
        "no_timestamp": ("bool", False),
    },
    "dump": {
        **_MARKET,
        **_BOUNDS,
        "n": ("int", 500),
        "operator": ("str", "bs"),
        "potential": ("str", None),
        "with_eta": ("bool", False),
        "output": ("str", None),
    },
}

_HELP = {
    "sigma": "volatility, must be positive",
    "rate": "risk-free rate, must be nonnegative",
    "x_min": "lower log-price window edge",
    "x_max": "upper log-price window edge",
    "n": "number of interior lattice points",
    "potential": "potential spec: zero, constant:C, tanh:A,B or table:FILE",
    "output": "write the result here instead of stdout",
    "no_timestamp": "omit the timestamp field for byte-reproducible output",
    "tau": "time to expiry in years",
    "x": "log-price at which the kernel row is evaluated",
    "strike": "option strike",
    "spot": "spot price to report",
    "window_sigmas": "half window width in units of sigma*sqrt(tau)",
    "payoff": "payoff kind: call, put or digital",
    "barrier_low": "knock-out barrier below spot (down-and-out)",
    "barrier_high": "upper knock-out barrier (double knock-out with barrier-low)",
    "surface": "also write the full price surface as CSV here",
    "W": "superpotential spec: zero, linear:a, tanh:a or table:FILE",
    "window": "half width of the symmetric lattice window",
    "operator": "which operator to dump: bs, h-bs, generalized or effective",
    "with_eta": "include the detailed-balance metric in the dump",
    "spectra": "write the paired spectra CSV here",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="etabs",
        description="pseudo-Hermitian lattice toolkit for Black-Scholes pricing",
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    for command, table in _OPTIONS.items():
        p = sub.add_parser(command, help=f"{command} subcommand")
        p.add_argument("--config", default=None, help="flat key = value config file")
        for name, (kind, _default) in table.items():
            flag = "--" + name.replace("_", "-")
            if kind == "bool":
                p.add_argument(flag, dest=name, action="store_true", default=None,
                               help=_HELP[name])
            else:
                typ = {"float": float, "int": int, "str": str}[kind]
                p.add_argument(flag, dest=name, type=typ, default=None,
                               help=_HELP[name])
    return parser


def _parse_bool(raw: str, key: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("true", "yes", "on", "1"):
        return True
    if lowered in ("false", "no", "off", "0"):
        return False
    raise UsageError(f"config key '{key}': expected a boolean, got {raw!r}")


def _read_config_file(path: str, table: dict) -> dict:
    """Parse a flat key = value file against one command's option table."""
    if not os.path.exists(path):
        raise UsageError(f"config file not found: {path}")
    values: dict[str, object] = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise UsageError(
                    f"{path}:{lineno}: expected key = value, got {stripped!r}"
                )
            key, _, raw = stripped.partition("=")
            key = key.strip()
            raw = raw.strip()
            if key not in table:
                raise UsageError(f"{path}:{lineno}: unknown config key '{key}'")
            kind = table[key][0]
            try:
                if kind == "float":
                    values[key] = float(raw)
                elif kind == "int":
                    values[key] = int(raw)
                elif kind == "bool":
                    values[key] = _parse_bool(raw, key)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise UsageError(f"{path}:{lineno}: key '{key}': {exc}") from None
    return values


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise UsageError(message)


def _check_potential_syntax(spec: str) -> None:
    """Validate the potential mini-language without a lattice in hand."""
    if spec == "zero":
        return
    head, sep, rest = spec.partition(":")
    if head == "constant" and sep:
        try:
            float(rest)
        except ValueError:
            raise UsageError(f"--potential constant: bad number {rest!r}") from None
        return
    if head == "tanh" and sep:
        parts = rest.split(",")
        if len(parts) != 2:
            raise UsageError("--potential tanh: expected tanh:A,B")
        try:
            [float(p) for p in parts]
        except ValueError:
            raise UsageError(f"--potential tanh: bad numbers {rest!r}") from None
        return
    if head == "table" and sep:
        if not os.path.exists(rest):
            raise UsageError(f"--potential table: file not found: {rest}")
        return
    raise UsageError(
        f"--potential: unknown spec {spec!r} "
        "(expected zero, constant:C, tanh:A,B or table:FILE)"
    )


def _check_W_syntax(spec: str) -> None:
    if spec == "zero":
        return
    head, sep, rest = spec.partition(":")
    if head in ("linear", "tanh") and sep:
        try:
            float(rest)
        except ValueError:
            raise UsageError(f"--W {head}: bad number {rest!r}") from None
        return
    if head == "table" and sep:
        if not os.path.exists(rest):
            raise UsageError(f"--W table: file not found: {rest}")
        return
    raise UsageError(
        f"--W: unknown spec {spec!r} (expected zero, linear:a, tanh:a or table:FILE)"
    )


def _validate(command: str, opts: dict) -> None:
    """Range and cross-field checks; every failure names the offending flag."""
    _require(opts["sigma"] > 0 and math.isfinite(opts["sigma"]),
             "--sigma must be positive and finite")
    _require(opts["rate"] >= 0 and math.isfinite(opts["rate"]),
             "--rate must be nonnegative and finite")
    _require(opts["n"] >= 3, "--n must be at least 3")
    if "x_min" in opts:
        _require(opts["x_min"] < opts["x_max"], "--x-min must be below --x-max")
    if "tau" in opts and opts["tau"] is not None:
        _require(opts["tau"] > 0, "--tau must be positive")
    if opts.get("potential") is not None:
        _check_potential_syntax(opts["potential"])

    if command == "price":
        for name in ("strike", "spot", "tau"):
            _require(opts[name] is not None, f"missing required flag {_flag(name)}")
        _require(opts["strike"] > 0, "--strike must be positive")
        _require(opts["spot"] > 0, "--spot must be positive")
        _require(opts["window_sigmas"] > 0, "--window-sigmas must be positive")
        _require(opts["payoff"] in ("call", "put", "digital"),
                 "--payoff must be one of call, put, digital")
        low, high = opts["barrier_low"], opts["barrier_high"]
        if high is not None and low is None:
            raise UsageError(
                "--barrier-high requires --barrier-low (no up-and-out pricer)"
            )
        if low is not None:
            _require(opts["payoff"] == "call",
                     "--barrier-low is only supported with --payoff call")
            _require(low > 0, "--barrier-low must be positive")
        if high is not None:
            _require(high > 0, "--barrier-high must be positive")
            _require(low < high, "--barrier-low must be below --barrier-high")
    elif command == "susy":
        _require(opts["window"] > 0, "--window must be positive")
        _check_W_syntax(opts["W"])
    elif command == "dump":
        _require(opts["operator"] in ("bs", "h-bs", "generalized", "effective"),
                 "--operator must be one of bs, h-bs, generalized, effective")
        if opts["operator"] in ("generalized", "effective"):
            _require(opts["potential"] is not None,
                     f"--operator {opts['operator']} requires --potential")


def parse_config(argv: list[str] | None = None) -> RunConfig:
    """Resolve argv plus optional config file into a validated RunConfig.

    Precedence: hard defaults, then config file values, then explicit flags.
    """
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        raise UsageError("missing command")
    table = _OPTIONS[args.command]
    opts = {name: default for name, (_kind, default) in table.items()}
    if args.config is not None:
        opts.update(_read_config_file(args.config, table))
    for name in table:
        value = getattr(args, name)
        if value is not None:
            opts[name] = value
    _validate(args.command, opts)
    return RunConfig(command=args.command, options=opts)


# ---------------------------------------------------------------------------
# artifact helpers


def _timestamp() -> str:
    return datetime.datetime.now(datetime.timezone.utc).strftime(
        "%Y-%m-%dT%H:%M:%SZ"
    )


def _materialize_potential(spec: str, lat: Lattice) -> PotentialSpec:
    head, _, rest = spec.partition(":")
    if spec == "zero":
        return PotentialSpec.zero()
    if head == "constant":
        return PotentialSpec.constant(float(rest))
    if head == "tanh":
        a, b = (float(p) for p in rest.split(","))
        return PotentialSpec.tabulated(a + b * np.tanh(lat.points))
    values = np.loadtxt(rest, ndmin=1)
    if values.shape != (lat.n,):
        raise ValueError(
            f"potential table {rest}: expected {lat.n} values, got {values.shape}"
        )
    return PotentialSpec.tabulated(values)


def _materialize_W(spec: str, lat: Lattice) -> Superpotential:
    head, _, rest = spec.partition(":")
    if spec == "zero":
        zero = np.zeros(lat.n)
        return Superpotential.from_samples(zero, lat, W_prime=zero)
    if head == "linear":
        a = float(rest)
        return Superpotential.from_samples(
            a * lat.points, lat, W_prime=np.full(lat.n, a)
        )
    if head == "tanh":
        a = float(rest)
        t = np.tanh(a * lat.points)
        return Superpotential.from_samples(t, lat, W_prime=a * (1.0 - t * t))
    data = np.loadtxt(rest, ndmin=2)
    if data.shape == (lat.n, 1):
        return Superpotential.from_samples(data[:, 0], lat)
    if data.shape == (lat.n, 2):
        return Superpotential.from_samples(data[:, 0], lat, W_prime=data[:, 1])
    raise ValueError(
        f"superpotential table {rest}: expected {lat.n} rows with 1 or 2 "
        f"columns, got shape {data.shape}"
    )


def _resolved_config(config: RunConfig) -> dict:
    doc = {"command": config.command}
    doc.update(config.options)
    return doc


def _emit(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)


def _warn_degraded(residual: float) -> None:
    print(
        f"warning: recurrence-metric pseudo-Hermiticity residual {residual:.3e} "
        f"exceeds {DEGRADED_THRESHOLD:g}; output marked degraded",
        file=sys.stderr,
    )


def _json_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def _csv_header(config: RunConfig, residuals: dict, extra: dict | None = None) -> list[str]:
    """Self-audit comment block shared by all CSV artifacts."""
    lines = [f"# etabs {config.command}"]
    if not config.options.get("no_timestamp", False):
        lines.append(f"# timestamp: {_timestamp()}")
    lines.append(f"# config: {json.dumps(_resolved_config(config), sort_keys=True)}")
    lines.append(f"# residuals: {json.dumps(residuals, sort_keys=True)}")
    if extra:
        for key in sorted(extra):
            lines.append(f"# {key}: {json.dumps(extra[key])}")
    return lines


# ---------------------------------------------------------------------------
# command runners


def _use_color() -> bool:
    if os.environ.get("ETABS_NO_COLOR"):
        return False
    return sys.stdout.isatty()


def _status(word: str) -> str:
    if not _use_color():
        return word
    color = _GREEN if word == "ok" else _YELLOW
    return f"{color}{word}{_RESET}"


def _run_verify(config: RunConfig) -> int:
    opts = config.options
    params = MarketParams(sigma=opts["sigma"], r=opts["rate"])
    lat = make_lattice(opts["x_min"], opts["x_max"], opts["n"])

    rows: list[tuple[str, str, float, str]] = []
    degraded = False

    def add(op_name: str, H: TridiagonalOperator, metric, kind: str) -> None:
        nonlocal degraded
        residual = pseudo_hermiticity_residual(H, metric)
        if kind == "recurrence":
            status = "ok" if residual <= DEGRADED_THRESHOLD else "degraded"
            degraded = degraded or status == "degraded"
        else:
            status = "-"
        rows.append((op_name, kind, residual, status))

    H_bs = build_H_BS(params, lat)
    add("H_BS", H_bs, continuum_metric_BS(params, lat), "continuum")
    add("H_BS", H_bs, detailed_balance_metric(H_bs), "recurrence")

    h_bs = build_h_BS(params, lat)
    sym_dev = float(np.abs(h_bs.upper - h_bs.lower).max())
    rows.append(("h_BS", "symmetry", sym_dev, "ok" if sym_dev == 0.0 else "degraded"))

    if opts["potential"] is not None:
        V = _materialize_potential(opts["potential"], lat)
        H_gen = build_H_generalized(params.sigma, V, lat)
        add("H_gen", H_gen, continuum_metric_generalized(params.sigma, V, lat),
            "continuum")
        add("H_gen", H_gen, detailed_balance_metric(H_gen), "recurrence")
        H_eff = build_H_eff(params, V, lat)
        add("H_eff", H_eff, continuum_metric_BS(params, lat), "continuum")
        add("H_eff", H_eff, detailed_balance_metric(H_eff), "recurrence")

    print(f"{'operator':<10}{'metric':<12}{'residual':<14}status")
    for op_name, kind, residual, status in rows:
        shown = _status(status) if status in ("ok", "degraded") else status
        print(f"{op_name:<10}{kind:<12}{residual:<14.3e}{shown}")
    if degraded:
        _warn_degraded(max(r for _o, k, r, _s in rows if k == "recurrence"))
    return 0


def _spectrum_operator(config: RunConfig) -> TridiagonalOperator:
    opts = config.options
    params = MarketParams(sigma=opts["sigma"], r=opts["rate"])
    lat = make_lattice(opts["x_min"], opts["x_max"], opts["n"])
    if opts.get("potential") is None:
        return build_H_BS(params, lat)
    V = _materialize_potential(opts["potential"], lat)
    return build_H_generalized(params.sigma, V, lat)


def _run_spectrum(config: RunConfig) -> int:
    H = _spectrum_operator(config)
    metric = detailed_balance_metric(H)
    residual = pseudo_hermiticity_residual(H, metric)
    decomp = decompose(H, metric)
    weighted = decomp.eigenfunctions * (metric.eta * decomp.weights)[None, :]
    norm_residual = np.abs(
        np.einsum("ki,ki->k", decomp.eigenfunctions, weighted) - 1.0
    )
    residuals = {
        "pseudo_hermiticity": residual,
        "eta_gram": decomp.gram_deviation(),
        "degraded": residual > DEGRADED_THRESHOLD,
    }
    lines = _csv_header(config, residuals)
    lines.append("index,eigenvalue,eta_norm_residual")
    for k in range(decomp.n):
        lines.append(
            f"{k},{float(decomp.eigenvalues[k])!r},{float(norm_residual[k])!r}"
        )
    _emit("\n".join(lines) + "\n", config.options["output"])
    if residuals["degraded"]:
        _warn_degraded(residual)
    return 0


def _run_kernel(config: RunConfig) -> int:
    opts = config.options
    H = _spectrum_operator(config)
    lat = H.lattice
    metric = detailed_balance_metric(H)
    residual = pseudo_hermiticity_residual(H, metric)
    decomp = decompose(H, metric)
    kern = pricing_kernel(decomp, opts["tau"])
    density = kern.density(decomp.weights)
    i = int(np.argmin(np.abs(lat.points - opts["x"])))
    residuals = {
        "pseudo_hermiticity": residual,
        "eta_gram": decomp.gram_deviation(),
        "degraded": residual > DEGRADED_THRESHOLD,
    }
    extra = {"node_index": i, "node_x": float(lat.points[i])}
    lines = _csv_header(config, residuals, extra)
    lines.append("x_prime,density")
    for j in range(lat.n):
        lines.append(f"{float(lat.points[j])!r},{float(density[i, j])!r}")
    _emit("\n".join(lines) + "\n", opts["output"])
    if residuals["degraded"]:
        _warn_degraded(residual)
    return 0


def _price_operator(config: RunConfig) -> tuple[MarketParams, Lattice]:
    """Resolve the lattice actually used: full window or barrier restriction."""
    opts = config.options
    params = MarketParams(sigma=opts["sigma"], r=opts["rate"])
    lat = centered_window(
        math.log(opts["strike"]), params.sigma, opts["tau"],
        opts["window_sigmas"], opts["n"],
    )
    low, high = opts["barrier_low"], opts["barrier_high"]
    if low is None:
        return params, lat
    x_lo = math.log(low)
    if high is not None:
        x_hi = math.log(high)
        if x_hi >= lat.x_max:
            high = None
        elif x_hi <= lat.x_min:
            raise ValueError(
                f"price: upper barrier outside the lattice window "
                f"(ln B_high = {x_hi:.6g} <= x_min = {lat.x_min:.6g})"
            )
    if high is not None:
        sub = _restricted_lattice(lat, max(x_lo, lat.x_min), math.log(high))
        return params, sub
    if x_lo >= lat.x_max:
        raise ValueError(
            f"price: barrier outside the lattice window "
            f"(ln B = {x_lo:.6g} >= x_max = {lat.x_max:.6g})"
        )
    if x_lo <= lat.x_min:
        return params, lat
    return params, _restricted_lattice(lat, x_lo, lat.x_max)


def _run_price(config: RunConfig) -> int:
    opts = config.options
    params, lat = _price_operator(config)
    barrier = opts["barrier_low"] is not None
    H = build_H_BS(params, lat)
    if barrier:
        anchor = float(continuum_metric_BS(params, lat).eta[0])
        metric = detailed_balance_metric(H, eta0=anchor)
    else:
        metric = detailed_balance_metric(H)
    residual = pseudo_hermiticity_residual(H, metric)
    decomp = decompose(H, metric)
    payoff = {
        "call": PayoffSpec.call,
        "put": PayoffSpec.put,
        "digital": PayoffSpec.digital,
    }[opts["payoff"]](opts["strike"])
    if barrier:
        # knock-out walls clip the payoff by contract; the truncation guard
        # inside price() is aimed at plain windows
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            surface = price(decomp, payoff, opts["tau"])
    else:
        surface = price(decomp, payoff, opts["tau"])
    value = surface.value_at(opts["spot"])

    residuals = {
        "pseudo_hermiticity": residual,
        "eta_gram": decomp.gram_deviation(),
    }
    doc = {
        "price": value,
        "spot": opts["spot"],
        "params": {
            "sigma": params.sigma,
            "rate": params.r,
            "strike": opts["strike"],
            "tau": opts["tau"],
            "payoff": opts["payoff"],
            "barrier_low": opts["barrier_low"],
            "barrier_high": opts["barrier_high"],
        },
        "n": lat.n,
        "dx": lat.dx,
        "window": {"x_min": lat.x_min, "x_max": lat.x_max},
        "residuals": residuals,
        "degraded": residual > DEGRADED_THRESHOLD,
        "config": _resolved_config(config),
    }
    if not opts["no_timestamp"]:
        doc["timestamp"] = _timestamp()
    _emit(_json_text(doc), opts["output"])

    if opts["surface"] is not None:
        audit = dict(residuals)
        audit["degraded"] = doc["degraded"]
        lines = _csv_header(config, audit)
        lines.append("x,S,C")
        for j in range(lat.n):
            x_j = float(lat.points[j])
            lines.append(
                f"{x_j!r},{math.exp(x_j)!r},{float(surface.values[j])!r}"
            )
        _emit("\n".join(lines) + "\n", opts["surface"])

    if doc["degraded"]:
        _warn_degraded(residual)
    return 0


def _run_susy(config: RunConfig) -> int:
    opts = config.options
    params = MarketParams(sigma=opts["sigma"], r=opts["rate"])
    lat = make_lattice(-opts["window"], opts["window"], opts["n"])
    W = _materialize_W(opts["W"], lat)
    system = factorized_system(params, W, lat)
    report = verify_susy(system)

    doc = report.to_dict()
    doc["delta"] = system.delta
    doc["derivative"] = W.derivative
    doc["n"] = lat.n
    doc["dx"] = lat.dx
    doc["degraded"] = report.pseudo_hermiticity > DEGRADED_THRESHOLD
    doc["config"] = _resolved_config(config)
    if not opts["no_timestamp"]:
        doc["timestamp"] = _timestamp()
    json_text = _json_text(doc)

    residuals = {
        "anticommutator": report.anticommutator,
        "pseudo_hermiticity": report.pseudo_hermiticity,
        "pairing_max_diff": report.pairing_max_diff,
        "degraded": doc["degraded"],
    }
    lines = _csv_header(config, residuals)
    lines.append("index,eigenvalue_eff,eigenvalue_partner")
    eff = report.eigenvalues_eff
    partner = report.eigenvalues_partner
    for k in range(len(eff)):
        lines.append(f"{k},{float(eff[k])!r},{float(partner[k])!r}")
    csv_text = "\n".join(lines) + "\n"

    if opts["spectra"] is not None:
        _emit(json_text, opts["output"])
        _emit(csv_text, opts["spectra"])
    elif opts["output"] is not None:
        _emit(json_text, opts["output"])
        root, _ = os.path.splitext(opts["output"])
        _emit(csv_text, root + "-spectra.csv")
    else:
        # stdout carries both artifacts, blank-line separated
        sys.stdout.write(json_text)
        sys.stdout.write("\n")
        sys.stdout.write(csv_text)

    if doc["degraded"]:
        _warn_degraded(report.pseudo_hermiticity)
    return 0


def _run_dump(config: RunConfig) -> int:
    opts = config.options
    params = MarketParams(sigma=opts["sigma"], r=opts["rate"])
    lat = make_lattice(opts["x_min"], opts["x_max"], opts["n"])
    name = opts["operator"]
    if name == "bs":
        H = build_H_BS(params, lat)
    elif name == "h-bs":
        H = build_h_BS(params, lat)
    else:
        V = _materialize_potential(opts["potential"], lat)
        if name == "generalized":
            H = build_H_generalized(params.sigma, V, lat)
        else:
            H = build_H_eff(params, V, lat)
    doc = operator_to_dict(H)
    if opts["with_eta"]:
        doc["eta"] = [float(v) for v in detailed_balance_metric(H).eta]
    _emit(_json_text(doc), opts["output"])
    return 0


_RUNNERS = {
    "verify": _run_verify,
    "spectrum": _run_spectrum,
    "kernel": _run_kernel,
    "price": _run_price,
    "susy": _run_susy,
    "dump": _run_dump,
}


def run(config: RunConfig) -> int:
    """Execute one validated run; returns the process exit status."""
    return _RUNNERS[config.command](config)


def main(argv: list[str] | None = None) -> int:
    try:
        config = parse_config(argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:
        # argparse handles --help and malformed flags itself
        return 0 if exc.code is None else int(exc.code)
    try:
        return run(config)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
