"""Command-line batch runner.

Usage::

    specmult <subcommand> [--key=value ...] [--config=path]

Subcommands are ``kato``, ``verify``, ``multiplier``, ``nls``, ``suite`` and
``report``.  Options may also come from a config file of ``key = value``
lines under section headers: ``[run]`` applies to every subcommand and a
section named after the subcommand overrides it.  Command-line options
override the file.  A ``command`` key in ``[run]`` stands in for a missing
subcommand.

Records go to the output directory as JSON lines (one object per line)
and tables as UTF-8 CSV with 17 significant digits.  The directory is
``--out``, else ``$SPECMULT_OUT``, else the config's ``out``, else
``specmult_out``.

Exit codes: 0 when every check passes, 1 when any check fails, 2 on a
usage or configuration error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import NoContractionError, SpecmultError
from .kato import is_k0, kato_split, parse_family, potential_from_spec
from .multiplier import scattering_states, stone_multiplier, symbol_from_spec
from .nls import continuity_check, fixed_point_solve, gaussian_data, mass_check, strichartz_tracker, time_reversal_check
from .oracle import discretize_h
from .radial import build_grid
from .resolvent import thresholds
from .verify import (
    check_dispersive,
    check_dyadic_pieces,
    check_lorentz,
    check_multiplier_oracle,
    check_norm_equivalence,
    check_oscillatory_and_sums,
    check_resolvent_bounds,
    check_resonance,
    check_strichartz,
    make_record,
)

__all__ = ["main", "run", "report", "load_config", "UsageError"]

SUBCOMMANDS = ("kato", "verify", "multiplier", "nls", "suite", "report")
CHECKS = (
    "resolvent_bounds",
    "dyadic_pieces",
    "dispersive",
    "strichartz",
    "norm_equivalence",
    "oscillatory_and_sums",
    "multiplier_oracle",
    "resonance",
    "lorentz",
)
DEFAULTS = {
    "potential": "zero",
    "grid": "n=400,rmax=20",
    "symbol": "constant",
    "seed": "42",
}


class UsageError(Exception):
    """Bad arguments or configuration; exit code 2."""


# -- options -------------------------------------------------------------------


def load_config(path, command: str | None) -> dict:
    """Read ``[run]`` and ``[<command>]`` sections of a key=value config file."""
    path = Path(path)
    if not path.is_file():
        raise UsageError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise UsageError(f"cannot parse config {path}: {exc}") from exc
    opts: dict = {}
    if parser.has_section("run"):
        opts.update(parser["run"])
    command = command or opts.get("command")
    if command and parser.has_section(command):
        opts.update(parser[command])
    return opts


def _parse_argv(argv: list[str]) -> tuple[str | None, list[str], dict]:
    parser = argparse.ArgumentParser(prog="specmult", add_help=True)
    parser.add_argument("command", nargs="?", choices=SUBCOMMANDS)
    parser.add_argument("positional", nargs="*")
    parser.add_argument("--config")
    ns, rest = parser.parse_known_args(argv)
    opts: dict = {}
    for item in rest:
        if not item.startswith("--") or "=" not in item:
            raise UsageError(f"options take the form --key=value, got {item!r}")
        key, _, val = item[2:].partition("=")
        opts[key.replace("-", "_")] = val
    if ns.config:
        opts = {**load_config(ns.config, ns.command), **opts}
    return ns.command, ns.positional, opts


def _out_dir(opts: dict) -> Path:
    out = opts.get("out_cli") or os.environ.get("SPECMULT_OUT") or opts.get("out") or "specmult_out"
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _grid(opts: dict, key: str = "grid"):
    _, fields = parse_family("grid:" + opts.get(key, DEFAULTS["grid"]))
    try:
        n = int(fields.get("n", 400))
        r_max = float(fields.get("rmax", fields.get("r_max", 20)))
    except ValueError as exc:
        raise UsageError(f"bad grid {opts.get(key)!r}") from exc
    return build_grid(r_max, n, fields.get("scheme", "uniform"))


def _float(opts: dict, key: str, default: float) -> float:
    val = opts.get(key)
    if val is None:
        return float(default)
    if val.lower() in ("inf", "infinity"):
        return math.inf
    try:
        return float(val)
    except ValueError as exc:
        raise UsageError(f"--{key} expects a number, got {val!r}") from exc


def _int(opts: dict, key: str, default: int) -> int:
    try:
        return int(opts.get(key, default))
    except ValueError as exc:
        raise UsageError(f"--{key} expects an integer, got {opts.get(key)!r}") from exc


def _potential(opts: dict, grid):
    text = opts.get("potential", DEFAULTS["potential"])
    try:
        return potential_from_spec(text, grid)
    except FileNotFoundError as exc:
        raise UsageError(str(exc)) from exc


# -- output --------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) for v in row])


def write_records(path: Path, records: list[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, allow_nan=False) + "\n")


def _say(rec: dict) -> None:
    status = "PASS" if rec["pass"] else "FAIL"
    label = rec["params"].get("potential") or rec["params"].get("symbol") or ""
    print(f"{status} {rec['check']} {label} constant={rec['constant']} margin={rec['margin']}")


# -- subcommands -----------------------------------------------------------------


def run_kato(opts: dict) -> list[dict]:
    grid = _grid(opts)
    V = _potential(opts, grid)
    seed = _int(opts, "seed", 42)
    eps = _float(opts, "eps", 0.1 * V.kato_norm if not V.is_zero else 0.1)
    extra = {"kato_norm": V.kato_norm, "weak32_norm": V.weak32_norm, "l1_norm": V.l1_norm,
             "support_radius": V.support_radius, "k0": is_k0(V)}
    passed = bool(extra["k0"])
    try:
        split = kato_split(V, eps)
        extra["split"] = {"radius": split.radius, "height": split.height, "remainder_norm": split.V2.kato_norm}
        th = thresholds(V)
        extra["thresholds"] = th.as_dict()
    except SpecmultError as exc:
        extra["error"] = str(exc)
        passed = False
    return [make_record("kato", {"potential": V.label(), "eps": eps}, V.kato_norm, None, passed, grid, seed, **extra)]


def _verify_one(check: str, opts: dict) -> list[dict]:
    seed = _int(opts, "seed", 42)
    if check == "lorentz":
        return [check_lorentz(_int(opts, "pairs", 100), seed)]
    if check == "oscillatory_and_sums":
        return [check_oscillatory_and_sums(symbol_from_spec(opts.get("symbol", "constant")), seed=seed)]
    grid = _grid(opts)
    if check == "resonance":
        return [check_resonance(grid, seed=seed)]
    V = _potential(opts, grid)
    if check == "resolvent_bounds":
        return [check_resolvent_bounds(V, seed=seed)]
    if check == "dyadic_pieces":
        kgrid = _grid(opts, "key_grid") if "key_grid" in opts else grid
        return [check_dyadic_pieces(symbol_from_spec(opts.get("symbol", "constant")), V.on(kgrid),
                                    p=_float(opts, "p", 1.5), seed=seed)]
    if check == "dispersive":
        return [check_dispersive(V, pad=_int(opts, "pad", 8), seed=seed)]
    if check == "strichartz":
        q, r = _float(opts, "q", math.inf), _float(opts, "r", 2.0)
        return [check_strichartz(V, q, r, pad=_int(opts, "pad", 2), seed=seed)]
    if check == "norm_equivalence":
        return [check_norm_equivalence(V, _float(opts, "s", 1.0), _float(opts, "r", 2.0), seed=seed)]
    if check == "multiplier_oracle":
        return [check_multiplier_oracle(symbol_from_spec(opts.get("symbol", "constant")), V,
                                        pad=_int(opts, "pad", 4), seed=seed)]
    raise UsageError(f"unknown check {check!r}; choose from {', '.join(CHECKS)}")


def run_verify(opts: dict, positional: list[str]) -> list[dict]:
    check = positional[0] if positional else opts.get("check")
    if not check:
        raise UsageError(f"verify needs a check name: {', '.join(CHECKS)}")
    return _verify_one(check, opts)


def run_multiplier(opts: dict, out: Path) -> list[dict]:
    grid = _grid(opts)
    V = _potential(opts, grid)
    m = symbol_from_spec(opts.get("symbol", DEFAULTS["symbol"]))
    seed = _int(opts, "seed", 42)
    states = scattering_states(V)
    K = stone_multiplier(m, V, states=states).matrix
    r = grid.nodes
    rows = ((i, j, r[i], r[j], K[i, j].real, K[i, j].imag) for i in range(grid.n) for j in range(grid.n))
    write_csv(out / "multiplier_kernel.csv", ["i", "j", "r_i", "r_j", "re", "im"], rows)
    return [check_multiplier_oracle(m, V, pad=_int(opts, "pad", 4), seed=seed, states=states)]


def run_nls(opts: dict, out: Path) -> list[dict]:
    grid = _grid({"grid": opts.get("grid", "n=256,rmax=16")})
    V = _potential(opts, grid)
    seed = _int(opts, "seed", 42)
    T, tol = _float(opts, "T", 1.0), _float(opts, "tol", 1e-12)
    sign = _int(opts, "sign", 1)
    if sign not in (1, -1):
        raise UsageError("--sign must be 1 (defocusing) or -1 (focusing)")
    A, width = _float(opts, "A", 0.1), _float(opts, "width", 1.0)
    kw = {"slices": _int(opts, "slices", 256), "substeps": _int(opts, "substeps", 4)}
    spec = discretize_h(V, pad=_int(opts, "pad", 1))
    u0 = gaussian_data(grid, A, width)
    params = {"potential": V.label(), "A": A, "width": width, "T": T, "tol": tol, "sign": sign, **kw}
    try:
        state, rec = fixed_point_solve(u0, T, tol, spec, sign=sign, **kw)
    except NoContractionError as exc:
        return [make_record("nls", params, None, None, False, grid, seed, error=str(exc), record=exc.record)]
    norms = strichartz_tracker(state)
    mass = mass_check(u0, state, spec, sign)
    rev = time_reversal_check(u0, T, tol, spec, sign=sign, **kw)
    cont = continuity_check(state)
    rows = zip(state.times, norms["mass"], norms["h1"], norms["slice_L10"])
    write_csv(out / "nls_slices.csv", ["t", "mass", "h1", "L10"], rows)
    passed = (rec["theta"] < 1 and rec["in_ball"] and rec["below_2delta"] and rec["hypothesis_ok"]
              and mass["pass"] and rev["relative_error"] <= 1e-6)
    return [make_record("nls", params, rec["ball"]["C"], 1 - rec["theta"], passed, grid, seed,
                        contraction=rec, mass=mass, time_reversal=rev, continuity=cont)]


def run_suite(opts: dict) -> list[dict]:
    records = []
    for check in CHECKS:
        sub = dict(opts)
        if check == "dyadic_pieces":
            sub.setdefault("key_grid", "n=160,rmax=8")
        if check == "strichartz":
            for q, r in (("inf", "2"), ("10", str(30 / 13))):
                records += _verify_one(check, {**sub, "q": q, "r": r})
            continue
        if check == "norm_equivalence":
            for s, r in (("1", "2"), ("2", "1.2")):
                records += _verify_one(check, {**sub, "s": s, "r": r})
            continue
        records += _verify_one(check, sub)
    return records


# -- report --------------------------------------------------------------------


def _load_records(out: Path) -> list[dict]:
    recs = []
    for path in sorted(out.glob("*.jsonl")):
        if path.name == "summary.jsonl":
            continue
        with open(path, encoding="utf-8") as fh:
            recs += [json.loads(line) for line in fh if line.strip()]
    return recs


def _label(rec: dict) -> str:
    return ";".join(f"{k}={v}" for k, v in rec.get("params", {}).items())


def report(out_dir) -> int:
    """Summarize every record in ``out_dir``; returns the exit code."""
    out = Path(out_dir)
    if not out.is_dir():
        print(f"no such directory: {out}", file=sys.stderr)
        return 2
    recs = _load_records(out)
    if not recs:
        print(f"no run records in {out}", file=sys.stderr)
        return 2
    recs.sort(key=lambda r: bool(r.get("pass")))  # stable: failures first, run order kept
    header = ["check", "params", "constant", "margin", "pass", "n", "r_max", "seed"]

    def row(rec):
        g = rec.get("grid") or {}
        return [rec["check"], _label(rec), rec.get("constant"), rec.get("margin"), rec.get("pass"),
                g.get("n", ""), g.get("r_max", ""), rec.get("seed")]

    write_csv(out / "summary.csv", header, (row(r) for r in recs))
    with open(out / "summary.txt", "w", encoding="utf-8") as fh:
        for rec in recs:
            status = "PASS" if rec.get("pass") else "FAIL"
            fh.write(f"{status:4}  {rec['check']:22} {_label(rec)}  constant={_fmt(rec.get('constant'))}\n")
    fits = []
    for k, rec in enumerate(r for r in recs if r["check"] == "dispersive" and "log_t" in r):
        x, y = np.asarray(rec["log_t"]), np.asarray(rec["log_sup"])
        write_csv(out / f"dispersive_fit_{k}.csv", ["log_t", "log_sup"], zip(x, y))
        fits.append([k, _label(rec), rec["slope"], float(np.polyfit(x, y, 1)[0])])
    if fits:
        write_csv(out / "dispersive_fits.csv", ["index", "params", "slope_recorded", "slope_refit"], fits)
    curves = []
    for rec in recs:
        if "coarse" in rec and "fine" in rec and rec.get("grid"):
            n = rec["grid"]["n"]
            c, f = rec["coarse"], rec["fine"]
            if isinstance(c, dict):
                c, f = c.get("total"), f.get("total")
            elif isinstance(c, list):
                c, f = max(c), max(f)
            curves += [[rec["check"], _label(rec), n, c], [rec["check"], _label(rec), 2 * n, f]]
    if curves:
        write_csv(out / "refinement.csv", ["check", "params", "n", "constant"], curves)
    failed = sum(not r.get("pass") for r in recs)
    print(f"{len(recs)} records, {failed} failed; summary in {out / 'summary.csv'}")
    return 1 if failed else 0


# -- entry point ---------------------------------------------------------------


def run(command: str, positional: list[str], opts: dict) -> int:
    """Execute one subcommand; returns the exit code."""
    if command == "report":
        target = positional[0] if positional else str(_out_dir(opts))
        return report(target)
    out = _out_dir(opts)
    if command == "kato":
        records = run_kato(opts)
    elif command == "verify":
        records = run_verify(opts, positional)
    elif command == "multiplier":
        records = run_multiplier(opts, out)
    elif command == "nls":
        records = run_nls(opts, out)
    elif command == "suite":
        records = run_suite(opts)
    else:
        raise UsageError(f"unknown subcommand {command!r}")
    name = command if command != "verify" else f"verify_{records[0]['check']}"
    write_records(out / f"{name}.jsonl", records)
    for rec in records:
        _say(rec)
    return 0 if all(r["pass"] for r in records) else 1


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        command, positional, opts = _parse_argv(argv)
        if "out" in opts and any(a.startswith("--out=") for a in argv):
            opts["out_cli"] = opts["out"]
        command = command or opts.get("command")
        if not command:
            raise UsageError(f"missing subcommand; choose from {', '.join(SUBCOMMANDS)}")
        if command not in SUBCOMMANDS:
            raise UsageError(f"unknown subcommand {command!r}")
        return run(command, positional, opts)
    except (UsageError, SpecmultError) as exc:
        print(f"specmult: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code or 0) and 2


if __name__ == "__main__":
    sys.exit(main())
