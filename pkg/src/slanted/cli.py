"""Command-line experiment driver.

    slanted bounds      [--config PATH] [--seed N] [--out PATH] [--quiet] [key=value ...]
    slanted reconstruct ...
    slanted certify     ...
    slanted verify      ...

Config files hold ``key=value`` lines (``#`` starts a comment).  Positional
``key=value`` arguments and the ``--seed``/``--out`` flags override the
file.  Every CSV starts with ``#`` lines echoing the resolved config.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bb_analysis as bb
from . import checks
from .frames import NearSingular
from .sampling import (
    Generator,
    Signal,
    build_sampling_matrix,
    generate_jittered_set,
    homogenize,
    reconstruct_from_samples,
    sample,
    stability_bound,
)
from .slant_core import IndexWindow, SlantedMatrix, load_matrix

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

EXPERIMENT_FIELDS = ["seed", "h", "jitter", "gamma", "bound_kappa",
                     "measured_kappa_2", "measured_kappa_inf", "recon_rel_err"]


class ConfigError(ValueError):
    pass


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _norm_index(v):
    if str(v).lower() in ("inf", "infinity"):
        return math.inf
    p = float(v)
    if p < 1:
        raise ValueError("norm index must be >= 1 or inf")
    return p


def _floats(v):
    return tuple(float(t) for t in str(v).split(",") if t.strip())


def _order(v):
    o = int(v)
    if o not in (1, 2):
        raise ValueError("order must be 1 or 2")
    return o


SCHEMAS = {
    "bounds": {"order": (_order, 1), "gammas": (_floats, "0.5,0.8,0.95"), "jitter": (_float, 0.0),
               "L": (_int, 64), "trials": (_int, 2), "seed": (_int, 0), "workers": (_int, 1),
               "out": (str, "-")},
    "reconstruct": {"order": (_order, 1), "h": (_float, 0.7), "jitter": (_float, 0.05),
                    "L": (_int, 64), "trials": (_int, 100), "seed": (_int, 0),
                    "measure": (_int, 0), "workers": (_int, 1), "out": (str, "-")},
    "certify": {"matrix": (str, "identity"), "L": (_int, 8), "p": (_norm_index, math.inf),
                "q": (_norm_index, 2.0), "kappa": (_float, 1.0), "s": (_float, 5.0),
                "budget": (_int, 10**6), "seed": (_int, 0), "out": (str, "-")},
    "verify": {"seed": (_int, 0), "out": (str, "-")},
}


def parse_kv_lines(lines, origin):
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{origin}:{lineno}: expected key=value, got {raw.strip()!r}")
        k, v = line.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve_config(command, config_path=None, overrides=(), seed=None, out=None) -> dict:
    schema = SCHEMAS[command]
    raw = {}
    if config_path:
        try:
            with open(config_path) as fh:
                raw.update(parse_kv_lines(fh, config_path))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
    raw.update(parse_kv_lines(overrides, "<args>"))
    if seed is not None:
        raw["seed"] = str(seed)
    if out is not None:
        raw["out"] = out
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown key(s) for {command}: {', '.join(unknown)}")
    resolved = {}
    for key, (conv, default) in schema.items():
        try:
            resolved[key] = conv(raw[key]) if key in raw else (conv(default) if isinstance(default, str) and conv is _floats else default)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key}: {raw.get(key)!r} ({exc})") from exc
    return resolved


def _fmt(v) -> str:
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.12g}"
    if isinstance(v, tuple):
        return ",".join(_fmt(t) for t in v)
    return str(v)


def config_header(command, cfg) -> str:
    lines = [f"# slanted {command}"]
    lines += [f"# {k}={_fmt(cfg[k])}" for k in sorted(cfg)]
    return "\n".join(lines) + "\n"


def _csv(rows, fields) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in fields})
    return buf.getvalue()


def _experiment(order, h, jitter, L, seed, trials, measure=True):
    """One sampling run: bound, measured constants and round-trip error."""
    g = Generator.bspline(order)
    reach = order + 2
    X = generate_jittered_set(h, jitter, -L - reach, L + reach, seed=seed)
    bound = stability_bound(g, X)
    k2 = kinf = math.nan
    if measure:
        A = build_sampling_matrix(g, homogenize(X), L)
        inner = np.abs(A.cols.indices) <= L - (order + 1)
        k2 = bb.estimate_kappa(A, 2, cols=inner)
        kinf = bb.estimate_kappa(A, math.inf, trials=trials, seed=seed, cols=inner)
    rng = np.random.default_rng(seed)
    c = rng.standard_normal(2 * L + 1)
    f = Signal(c, g, IndexWindow.centered(L))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            rec = reconstruct_from_samples(g, X, sample(f, X), L)
        err = float(np.linalg.norm(rec.coefficients - c) / np.linalg.norm(c))
    except NearSingular:
        # only a failure when the gap condition promised stability
        if bound > 0:
            raise
        err = math.nan
    return {"seed": seed, "h": h, "jitter": jitter, "gamma": X.gap, "bound_kappa": bound,
            "measured_kappa_2": k2, "measured_kappa_inf": kinf, "recon_rel_err": err}


def _run_parallel(fn, jobs, workers):
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda j: fn(*j), jobs))
    else:
        rows = [fn(*j) for j in jobs]
    return sorted(rows, key=lambda r: (r["seed"], r.get("trial", 0)))


def cmd_bounds(cfg) -> str:
    jobs = [(cfg["order"], h, cfg["jitter"], cfg["L"], cfg["seed"] + i, cfg["trials"])
            for i, h in enumerate(cfg["gammas"])]
    rows = _run_parallel(_experiment, jobs, cfg["workers"])
    return _csv(rows, EXPERIMENT_FIELDS)


def cmd_reconstruct(cfg) -> str:
    jobs = [(cfg["order"], cfg["h"], cfg["jitter"], cfg["L"], cfg["seed"] + t, 2, bool(cfg["measure"]))
            for t in range(cfg["trials"])]
    rows = _run_parallel(_experiment, jobs, cfg["workers"])
    return _csv(rows, EXPERIMENT_FIELDS)


def cmd_certify(cfg) -> str:
    if cfg["matrix"] == "identity":
        A = SlantedMatrix.identity(cfg["L"])
    else:
        try:
            A = load_matrix(cfg["matrix"])
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot load matrix: {exc}") from exc
    try:
        cert = bb.certificate(A, cfg["p"], cfg["kappa"], cfg["s"], cfg["q"], cfg["budget"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    return bb.certificates_to_csv([cert])


def cmd_verify(cfg):
    results = checks.run_all(cfg["seed"])
    lines = [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in results]
    return "\n".join(lines) + "\n", all(ok for _, ok, _ in results)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="slanted", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in SCHEMAS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", metavar="PATH")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", metavar="PATH")
        sp.add_argument("--quiet", action="store_true")
        sp.add_argument("overrides", nargs="*", metavar="key=value")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        # overrides may be interleaved with flags; argparse leaves later ones over
        args, extra = parser.parse_known_args(argv)
        stray = [t for t in extra if t.startswith("-") or "=" not in t]
        if stray:
            parser.error(f"unrecognized arguments: {' '.join(stray)}")
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    args.overrides = list(args.overrides) + extra
    log = (lambda *a: None) if args.quiet else (lambda *a: print(*a, file=sys.stderr))
    try:
        cfg = resolve_config(args.command, args.config, args.overrides, args.seed, args.out)
        ok = True
        if args.command == "bounds":
            body = cmd_bounds(cfg)
        elif args.command == "reconstruct":
            body = cmd_reconstruct(cfg)
        elif args.command == "certify":
            body = cmd_certify(cfg)
        else:
            body, ok = cmd_verify(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NearSingular, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    text = config_header(args.command, cfg) + body
    if cfg["out"] == "-":
        sys.stdout.write(text)
    else:
        with open(cfg["out"], "w") as fh:
            fh.write(text)
        log(f"wrote {cfg['out']}")
    if not ok:
        log("invariant violations found")
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
