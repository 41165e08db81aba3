"""Command-line interface: ``repeater-cutoff evaluate|optimize|sample|compare``.

Exit codes: 0 success, 1 Monte Carlo comparison failed, 2 usage or
configuration error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import secrets
import sys
import time
import warnings

import numpy as np

from . import __version__
from .errors import ConfigError, NoKeyError, NumericalError, RepeaterError, UnsupportedCombinationError
from .evaluator import eval_protocol
from .keyrate import secret_key_rate
from .montecarlo import McEstimate, compare_to_exact, estimate_distribution
from .optimize import Mode, OptimizationProblem, optimize_cutoffs
from .protocol import Backend, Kind, Strategy, build_nested_chain, config_to_dict, load_config
from .states import LinkState

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

CSV_HEADER = ["t", "pmf", "cdf", "werner", "fidelity"]


def _threads():
    raw = os.environ.get("REPEATER_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ConfigError(f"REPEATER_THREADS must be an integer, got {raw!r}") from None


def config_hash(root, cfg):
    """SHA-256 of the canonical JSON form of a config."""
    canonical = json.dumps(config_to_dict(root, cfg), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def manifest(command, root, cfg, started, *, seed=None, covered_mass=None):
    return {
        "command": command,
        "config_hash": config_hash(root, cfg),
        "seed": seed,
        "backend": Backend(cfg.backend).value,
        "ttr": cfg.ttr,
        "wall_time_s": time.perf_counter() - started,
        "covered_mass": covered_mass,
        "version": __version__,
    }


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_manifest(out, obj):
    _write_json(f"{out}.manifest.json", obj)


def _fmt(x):
    return format(float(x), ".17g")


def link_to_csv(link):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    cdf = link.cdf
    fid = link.fidelity
    for t in range(1, link.ttr + 1):
        writer.writerow([t, _fmt(link.pmf[t]), _fmt(cdf[t]), _fmt(link.werner[t]), _fmt(fid[t])])
    return buf.getvalue()


def link_to_json(link):
    t = np.arange(1, link.ttr + 1)
    return {
        "t": t.tolist(),
        "pmf": link.pmf[1:].tolist(),
        "cdf": link.cdf[1:].tolist(),
        "werner": link.werner[1:].tolist(),
        "fidelity": link.fidelity[1:].tolist(),
    }


def _link_from_columns(t, pmf, werner, where):
    t = np.asarray(t, dtype=np.int64)
    if t.size == 0 or not np.array_equal(t, np.arange(1, t.size + 1)):
        raise ConfigError(f"{where}: column t must run 1, 2, ..., ttr")
    full_pmf = np.zeros(t.size + 1)
    full_w = np.zeros(t.size + 1)
    full_pmf[1:] = pmf
    full_w[1:] = werner
    return LinkState(full_pmf, full_w)


def read_link(path):
    """Read a distribution written by ``evaluate`` (CSV or JSON)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            doc = json.loads(text)
            cols = doc["distribution"]
            return _link_from_columns(cols["t"], cols["pmf"], cols["werner"], path)
        except (json.JSONDecodeError, KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: not an evaluate JSON output ({exc})") from None
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or rows[0] != CSV_HEADER:
        raise ConfigError(f"{path}: expected CSV header {','.join(CSV_HEADER)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(CSV_HEADER):
        raise ConfigError(f"{path}: malformed CSV rows")
    return _link_from_columns(data[:, 0], data[:, 1], data[:, 3], path)


def _load(args):
    root, cfg = load_config(args.config)
    changes = {}
    if getattr(args, "ttr", None) is not None:
        changes["ttr"] = args.ttr
    if getattr(args, "backend", None) is not None:
        changes["backend"] = Backend(args.backend)
    if getattr(args, "padding_factor", None) is not None:
        changes["padding_factor"] = args.padding_factor
    if changes:
        cfg = cfg.with_(**changes)
        problems = cfg.violations()
        if problems:
            raise ConfigError(problems[0])
    return root, cfg


def _seed(args):
    return args.seed if args.seed is not None else secrets.randbits(32)


def cmd_evaluate(args):
    started = time.perf_counter()
    root, cfg = _load(args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", RuntimeWarning)
        link = eval_protocol(root, cfg)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    try:
        report = secret_key_rate(link).to_dict()
    except NoKeyError:
        report = None
    info = manifest("evaluate", root, cfg, started, covered_mass=link.covered_mass)
    if args.format == "csv":
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(link_to_csv(link))
    else:
        _write_json(args.out, {"distribution": link_to_json(link), "report": report})
    _write_manifest(args.out, {"manifest": info, "report": report})
    print(json.dumps({"report": report, "manifest": info}, sort_keys=True))
    return EXIT_OK


def _chain_levels(root):
    """Nesting depth of a balanced swap chain, or a ConfigError."""
    levels = root.depth()
    if build_nested_chain(levels) != _strip_cutoffs(root):
        raise ConfigError("optimize needs a nested swap chain protocol (e.g. nested_swap)")
    return levels


def _strip_cutoffs(node):
    if node.kind is Kind.GEN:
        return build_nested_chain(0)
    return type(node)(node.kind, _strip_cutoffs(node.left), _strip_cutoffs(node.right))


def _chain_strategy(root, override):
    if override is not None:
        return Strategy(override)
    for node in root.iter_nodes():
        if node.cutoff is not None:
            return node.cutoff.strategy
    return Strategy.DIF_TIME


def cmd_optimize(args):
    started = time.perf_counter()
    root, cfg = _load(args)
    levels = _chain_levels(root)
    strategy = _chain_strategy(root, args.strategy)
    if strategy is Strategy.FIDELITY and Backend(cfg.backend) is Backend.FAST:
        cfg = cfg.with_(backend=Backend.FOURIER)
    mode = Mode(args.mode)
    dim = 1 if mode is Mode.UNIFORM else levels
    seed = _seed(args)
    problem = OptimizationProblem(
        levels=levels, mode=mode, strategy=strategy,
        bounds=None if args.bounds is None else [tuple(args.bounds)] * dim,
        maxiter=args.maxiter, popsize=args.popsize, seed=seed, workers=_threads())
    report = optimize_cutoffs(problem, cfg)
    _write_json(args.out, report)
    info = manifest("optimize", root, cfg, started, seed=seed,
                    covered_mass=report["key"]["covered_mass"])
    _write_manifest(args.out, {"manifest": info})
    print(json.dumps({"thresholds": report["thresholds"], "rate": report["rate"],
                      "baseline_rate": report["baseline_rate"], "manifest": info}, sort_keys=True))
    return EXIT_OK


def cmd_sample(args):
    started = time.perf_counter()
    root, cfg = _load(args)
    seed = _seed(args)
    est = estimate_distribution(root, cfg, args.n, seed, workers=_threads())
    _write_json(args.out, est.to_dict())
    info = manifest("sample", root, cfg, started, seed=seed, covered_mass=1.0 - est.overflow / est.n)
    _write_manifest(args.out, {"manifest": info})
    print(json.dumps({"manifest": info}, sort_keys=True))
    return EXIT_OK


def cmd_compare(args):
    exact = read_link(args.exact)
    try:
        with open(args.samples, encoding="utf-8") as fh:
            est = McEstimate.from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{args.samples}: {exc}") from None
    if est.ttr != exact.ttr:
        raise ConfigError(f"ttr differs: exact {exact.ttr}, samples {est.ttr}")
    report = compare_to_exact(est, exact)
    text = json.dumps(report, indent=2, sort_keys=True)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if report["pass"] else EXIT_MISMATCH


def build_parser():
    parser = argparse.ArgumentParser(
        prog="repeater-cutoff",
        description="Delivery-time and Werner-parameter distributions of repeater chains with cut-offs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--ttr", type=int, help="override the truncation time")
        p.add_argument("--backend", choices=[b.value for b in Backend], help="override the backend")
        p.add_argument("--padding-factor", type=int, help="override the Fourier padding factor")
        p.add_argument("--out", required=True, help="output file")

    p = sub.add_parser("evaluate", help="compute the delivery-time distribution and key rate")
    common(p)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("optimize", help="optimize cut-off thresholds of a nested swap chain")
    common(p)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="uniform")
    p.add_argument("--strategy", choices=[s.value for s in Strategy],
                   help="cut-off strategy (default: the one in the config, else dif_time)")
    p.add_argument("--seed", type=int)
    p.add_argument("--bounds", type=float, nargs=2, metavar=("LOW", "HIGH"),
                   help="search range of every threshold")
    p.add_argument("--maxiter", type=int, default=200, help="maximum DE generations")
    p.add_argument("--popsize", type=int, default=15, help="DE population per dimension")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sample", help="Monte Carlo histogram of the protocol")
    common(p)
    p.add_argument("-n", type=int, required=True, help="number of samples")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("compare", help="check Monte Carlo samples against an exact distribution")
    p.add_argument("--exact", required=True, help="evaluate output (CSV or JSON)")
    p.add_argument("--samples", required=True, help="sample output (JSON)")
    p.add_argument("--out", help="report file (also printed)")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnsupportedCombinationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RepeaterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
