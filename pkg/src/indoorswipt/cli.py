"""Command-line interface: chi-table, analyze, simulate and tradeoff.

Configuration files are flat ``key = value`` text with dotted sections
(``params.*``, ``policy.*``, ``run.*``, ``cmd.*``); ``#`` starts a comment.
Every output begins with ``#`` header lines echoing the full resolved
configuration, so stripping the leading ``# `` from them yields a config file
that reruns the command identically. Powers are in dBm and rates in kbit/s
on the command line and in outputs; ``params.*`` values are SI.
"""

import argparse
from dataclasses import dataclass, field
from decimal import Decimal
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import analysis, montecarlo, tradeoff
from .errors import ConfigError, InsufficientSamplesError
from .params import SystemParams, dbm_to_watt, density_from_spacing, watt_to_dbm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CHECK = 4

# Reference chi_eta(lambda_w) values as printed (truncated) in the literature.
REFERENCE_CHI = {
    0.01: ("1.5708", "0.02", "2.5e-4", "3.3e-6", "4.35e-8", "5.73e-10"),
    0.02: ("1.5708", "0.04", "1e-3", "2.6e-5", "6.96e-7", "1.83e-8"),
    0.03: ("1.5708", "0.06", "2.3e-3", "9e-5", "3.5e-6", "1.39e-7"),
    0.04: ("1.5708", "0.08", "4.1e-3", "2.1e-4", "1.1e-5", "5.87e-7"),
    0.05: ("1.5708", "0.1", "6.4e-3", "4.1e-4", "2.7e-5", "1.79e-6"),
}

_POLICY_KEYS = ("n_max", "eta_tol", "abs_tol", "rel_tol", "omega_max", "panel_budget")
_RUN_KEYS = ("seed", "reps", "level", "out", "format")
_CMD_KEYS = ("lambda_w", "eta_max", "mode", "l0", "alpha", "z", "rates_kbps", "powers_dbm", "sweep")
_INT_PARAMS = ("n_t", "n_r")


@dataclass(frozen=True)
class RunConfig:
    params: SystemParams = field(default_factory=SystemParams)
    policy: analysis.TruncationPolicy = analysis.DEFAULT_POLICY
    seed: int = 1
    reps: int = 10_000
    level: float = 0.75
    output_path: str | None = None
    format: str = "csv"
    cmd: dict = field(default_factory=dict)

    def to_items(self):
        """Resolved configuration as ordered (key, text) pairs."""
        items = [(f"params.{k}", repr(v)) for k, v in self.params.to_dict().items()]
        q = self.policy.quad
        pol = {
            "n_max": self.policy.n_max, "eta_tol": self.policy.eta_tol, "abs_tol": q.abs_tol,
            "rel_tol": q.rel_tol, "omega_max": q.omega_max, "panel_budget": q.panel_budget,
        }
        items += [(f"policy.{k}", "auto" if v is None else repr(v)) for k, v in pol.items()]
        items += [("run.seed", str(self.seed)), ("run.reps", str(self.reps)), ("run.level", repr(self.level)),
                  ("run.format", self.format)]
        items += [(f"cmd.{k}", v) for k, v in sorted(self.cmd.items())]
        return items


def parse_config_text(text):
    """Parse ``key = value`` lines into a dict of strings."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key] = value
    return out


def _number(key, text, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {text!r} as {kind.__name__}") from None
    if kind is float and not math.isfinite(value):
        raise ConfigError(f"{key}: value must be finite")
    return value


def build_config(entries, overrides=None):
    """Validate raw entries (plus CLI overrides) into a RunConfig."""
    entries = dict(entries)
    entries.update({k: v for k, v in (overrides or {}).items() if v is not None})
    fields_ = set(SystemParams.field_names())
    prm, pol, run, cmd = {}, {}, {}, {}
    for key, value in entries.items():
        section, _, name = key.partition(".")
        if section == "params" and name in fields_:
            prm[name] = _number(key, value, int if name in _INT_PARAMS else float)
        elif section == "params" and name == "d_ph":
            prm["lambda_ph"] = density_from_spacing(_number(key, value))
        elif section == "policy" and name in _POLICY_KEYS:
            pol[name] = value
        elif section == "run" and name in _RUN_KEYS:
            run[name] = value
        elif section == "cmd" and name in _CMD_KEYS:
            cmd[name] = str(value)
        else:
            raise ConfigError(f"unknown configuration key {key!r}")
    try:
        params = SystemParams(**prm)
        quad_args = {}
        for name, kind in (("abs_tol", float), ("rel_tol", float), ("panel_budget", int)):
            if name in pol:
                quad_args[name] = _number(f"policy.{name}", pol[name], kind)
        if pol.get("omega_max", "auto") != "auto":
            quad_args["omega_max"] = _number("policy.omega_max", pol["omega_max"])
        n_max = None if pol.get("n_max", "auto") == "auto" else _number("policy.n_max", pol["n_max"], int)
        eta_tol = _number("policy.eta_tol", pol["eta_tol"]) if "eta_tol" in pol else 1e-10
        policy = analysis.TruncationPolicy(n_max=n_max, eta_tol=eta_tol, quad=analysis.QuadControls(**quad_args))
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    seed = _number("run.seed", run.get("seed", "1"), int)
    if not 0 <= seed < 2**64:
        raise ConfigError("run.seed must be an unsigned 64-bit integer")
    reps = _number("run.reps", run.get("reps", "10000"), int)
    if reps < 1:
        raise ConfigError("run.reps must be positive")
    level = _number("run.level", run.get("level", "0.75"))
    if not 0 < level < 1:
        raise ConfigError("run.level must lie in (0, 1)")
    fmt = run.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError("run.format must be 'csv' or 'json'")
    return RunConfig(params, policy, seed, reps, level, run.get("out"), fmt, cmd)


def parse_list(key, text):
    text = (text or "").strip()
    if not text:
        return []
    return [_number(key, t.strip()) for t in text.split(",")]


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _fmt(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".12g")


def render(command, config: RunConfig, columns, rows):
    header = [f"command = {command}"] + [f"{k} = {v}" for k, v in config.to_items()]
    if config.format == "json":
        doc = {
            "command": command,
            "config": dict(config.to_items()),
            "columns": list(columns),
            "rows": [[float(x) if not isinstance(x, str) else x for x in row] for row in rows],
        }
        return json.dumps(doc, indent=1) + "\n"
    lines = [f"# {h}" for h in header]
    lines.append(",".join(columns))
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    return "\n".join(lines) + "\n"


def write_atomic(path, text):
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(command, config, columns, rows, stream=None):
    text = render(command, config, columns, rows)
    if config.output_path:
        write_atomic(config.output_path, text)
    else:
        (stream or sys.stdout).write(text)
    return text


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def reference_agrees(value, printed):
    """Printed reference matches within 1% or as a truncation of ``value``."""
    ref = float(printed)
    if abs(value - ref) <= 0.01 * abs(ref):
        return True
    unit = 10.0 ** Decimal(printed).normalize().as_tuple().exponent
    return ref <= value < ref + unit * (1 + 1e-9)


def cmd_chi_table(config: RunConfig):
    lws = parse_list("cmd.lambda_w", config.cmd.get("lambda_w", ",".join(str(k) for k in REFERENCE_CHI)))
    eta_max = _number("cmd.eta_max", config.cmd.get("eta_max", "5"), int)
    if eta_max < 1:
        raise ConfigError("cmd.eta_max must be >= 1")
    rows = []
    failures = []
    for lw in lws:
        tab = analysis.chi_table(lw, eta_max)
        ref = REFERENCE_CHI.get(lw)
        for eta, value in enumerate(tab.values):
            ok = ""
            if ref is not None and eta < len(ref):
                good = reference_agrees(value, ref[eta])
                ok = "1" if good else "0"
                if not good:
                    failures.append((lw, eta))
            rows.append((lw, eta, value, ok))
    return ["lambda_w", "eta", "chi", "reference_ok"], rows, failures


def cmd_analyze(config: RunConfig):
    mode = config.cmd.get("mode", "jccdf")
    prm, pol = config.params, config.policy
    if mode == "minloss":
        alpha = parse_list("cmd.alpha", config.cmd.get("alpha", ",".join(f"{a:.6g}" for a in np.logspace(3, 9, 25))))
        rows = [(a, _at(lambda: analysis.min_loss_cdf(prm, pol, a), f"alpha={a:g}")) for a in alpha]
        return ["alpha", "cdf"], rows
    if mode == "interference":
        if "l0" not in config.cmd:
            raise ConfigError("interference mode needs cmd.l0 (--l0)")
        l0 = _number("cmd.l0", config.cmd["l0"])
        zs = parse_list("cmd.z", config.cmd.get("z", "0,1e-7,3e-7,1e-6,3e-6,1e-5"))
        if any(z < 0 for z in zs):
            raise ConfigError("cmd.z values must be >= 0")
        rows = [(z, _at(lambda: analysis.interference_cdf(prm, pol, z, l0), f"z={z:g}")) for z in zs]
        return ["z", "cdf"], rows
    if mode == "jccdf":
        rates = parse_list("cmd.rates_kbps", config.cmd.get("rates_kbps", "100,300,500"))
        powers = parse_list("cmd.powers_dbm", config.cmd.get("powers_dbm", "-30,-25,-20"))
        rows = []
        for r in rates:
            for q in powers:
                val = _at(lambda: analysis.jccdf(prm, pol, r * 1e3, dbm_to_watt(q)), f"r_star={r:g} kbps, q_star={q:g} dBm")
                rows.append((r, q, val))
        return ["r_star_kbps", "q_star_dbm", "jccdf"], rows
    raise ConfigError(f"unknown analyze mode {mode!r}")


def _at(fn, where):
    try:
        return fn()
    except ArithmeticError as exc:
        raise type(exc)(f"{exc} (at {where})") from exc


def cmd_simulate(config: RunConfig):
    rates = parse_list("cmd.rates_kbps", config.cmd.get("rates_kbps", "100,300,500"))
    powers = parse_list("cmd.powers_dbm", config.cmd.get("powers_dbm", "-30,-25,-20"))
    rng = np.random.default_rng(config.seed)
    samples = montecarlo.sample_arrays(config.params, config.reps, rng)
    rows = []
    for r in rates:
        for q in powers:
            est, half = montecarlo.jccdf_from_samples(samples, r * 1e3, dbm_to_watt(q))
            rows.append((r, q, est, half))
    return ["r_star_kbps", "q_star_dbm", "estimate", "half_width_95"], rows


def parse_sweep(text):
    """``name=v1,v2,...`` into (name, values); name is a params field or d_ph."""
    name, sep, values = (text or "d_ph=3,5,7").partition("=")
    name = name.strip()
    if not sep or (name not in SystemParams.field_names() and name != "d_ph"):
        raise ConfigError(f"bad sweep specification {text!r}; expected NAME=v1,v2,...")
    return name, parse_list("cmd.sweep", values)


def swept_params(base: SystemParams, name, value):
    try:
        if name == "d_ph":
            return base.with_spacing(value)
        return base.replace(**{name: int(value) if name in _INT_PARAMS else value})
    except ValueError as exc:
        raise ConfigError(f"sweep {name}={value:g}: {exc}") from None


def cmd_tradeoff(config: RunConfig):
    name, values = parse_sweep(config.cmd.get("sweep"))
    default_rates = ",".join(f"{r / 1e3:.6g}" for r in tradeoff.default_rate_grid())
    rates = [r * 1e3 for r in parse_list("cmd.rates_kbps", config.cmd.get("rates_kbps", default_rates))]
    members = [(value, swept_params(config.params, name, value)) for value in values]
    rows = []
    for value, prm in members:
        for pt in tradeoff.tradeoff_curve(prm, config.policy, config.level, rates):
            rows.append((value, pt.r_star / 1e3, pt.q_star_dbm, pt.level))
    return [name, "r_star_kbps", "q_star_dbm", "level"], rows


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--reps", type=int)
    common.add_argument("--level", type=float)
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))

    ap = argparse.ArgumentParser(prog="indoorswipt", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("chi-table", parents=[common], help="angular blockage weights")
    p.add_argument("--lambda-w", dest="lambda_w", help="comma-separated wall densities (1/m)")
    p.add_argument("--eta-max", dest="eta_max")
    p = sub.add_parser("analyze", parents=[common], help="analytic curves")
    p.add_argument("--mode", choices=("minloss", "interference", "jccdf"))
    p.add_argument("--l0", help="serving path loss for interference mode")
    p.add_argument("--alpha", help="path-loss grid for minloss mode")
    p.add_argument("--z", help="normalised interference grid for interference mode")
    p.add_argument("--rates", dest="rates_kbps", help="rate thresholds in kbit/s")
    p.add_argument("--powers", dest="powers_dbm", help="harvested-power thresholds in dBm")
    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo joint CCDF")
    p.add_argument("--rates", dest="rates_kbps", help="rate thresholds in kbit/s")
    p.add_argument("--powers", dest="powers_dbm", help="harvested-power thresholds in dBm")
    p = sub.add_parser("tradeoff", parents=[common], help="rate-energy trade-off curves")
    p.add_argument("--sweep", help="NAME=v1,v2,... over a params field or d_ph")
    p.add_argument("--rates", dest="rates_kbps", help="rate grid in kbit/s")
    return ap


_COMMANDS = {"chi-table": cmd_chi_table, "analyze": cmd_analyze, "simulate": cmd_simulate, "tradeoff": cmd_tradeoff}


def load_config(args):
    entries = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                entries = parse_config_text(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
        entries.pop("command", None)
    overrides = {
        "run.seed": args.seed, "run.reps": args.reps, "run.level": args.level,
        "run.out": args.out, "run.format": args.format,
    }
    for name in _CMD_KEYS:
        overrides[f"cmd.{name}"] = getattr(args, name, None)
    return build_config(entries, {k: None if v is None else str(v) for k, v in overrides.items()})


def main(argv=None, stdout=None, stderr=None):
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    args = _parser().parse_args(argv)
    try:
        config = load_config(args)
        result = _COMMANDS[args.command](config)
    except (ConfigError, InsufficientSamplesError) as exc:
        print(f"config error: {exc}", file=stderr)
        return EXIT_CONFIG
    except ArithmeticError as exc:
        print(f"numerical failure: {exc}", file=stderr)
        return EXIT_NUMERICAL
    if args.command == "chi-table":
        columns, rows, failures = result
        emit(args.command, config, columns, rows, stdout)
        if failures:
            listing = ", ".join(f"lambda_w={lw:g} eta={eta}" for lw, eta in failures)
            print(f"reference check failed: {listing}", file=stderr)
            return EXIT_CHECK
        return EXIT_OK
    columns, rows = result
    emit(args.command, config, columns, rows, stdout)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
