"""Command-line experiment runner.

Every CSV starts with one ``# {json}`` line holding the resolved config, its
hash, the seed, replicate count and subcommand.  Worker counts and timings
are left out so that runs differing only in parallelism produce identical
bytes.

Exit codes: 0 success, 1 usage, config or runtime error, 2 acceptance failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import acceptance
from .analysis import fit_tail_index, ks_distance, log_survival_variance, predict
from .arb import atom_and_conditional
from .branching import conditional_normalized_generation, generation_survival
from .errors import ConfigError, CycleOverflow, DomainError, InsufficientSurvivors, InversionFailure, UnsupportedRegime, ZeroCell
from .experiment import builtin_names, load_experiment
from .model import validate
from .parallel import shutdown
from .speciallaws import Exp1, cdf_limit, law_id
from .subordinated import conditional_normalized_sample, survival_curve, wilson_interval

_RUNTIME = (ConfigError, DomainError, InsufficientSurvivors, InversionFailure, UnsupportedRegime, CycleOverflow, ZeroCell)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------


def _header(args, config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    meta = {
        "subcommand": args.command,
        "config_hash": hashlib.sha256(blob.encode()).hexdigest()[:16],
        "config": config,
        "seed": args.seed,
        "reps": args.reps,
    }
    for k in ("grid", "scale", "only"):
        v = getattr(args, k, None)
        if v is not None:
            meta[k] = v
    return "# " + json.dumps(meta, sort_keys=True, separators=(",", ":")) + "\n"


def write_csv(path, header, fields, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(header)
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return path


def _grid(args, default):
    if args.grid is None:
        return np.asarray(default, dtype=float)
    g = np.asarray(args.grid, dtype=float)
    if g.size == 0 or np.any(g < 0) or np.any(np.diff(g) <= 0):
        raise UsageError("--grid must be a strictly ascending list of nonnegative horizons")
    return g


def _parse_grid(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _positive(text):
    try:
        v = int(float(text))
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 1 or v != float(text):
        raise argparse.ArgumentTypeError(f"must be a positive integer: {text!r}")
    return v


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------


def cmd_validate(args, exp):
    rep = validate(exp.model)
    rows = [(c.name, int(c.passed), c.detail) for c in rep.checks]
    rows += [("theta", 1, repr(rep.theta)), ("b", 1, repr(rep.b)), ("regime", 1, rep.regime)]
    if exp.interarrival is not None:
        try:
            p = predict(exp.model, exp.interarrival, exp.sojourn)
            rows.append(("prediction", 1, f"{p.row}; A(t) = {p.normalization.label}; limit {p.limit_id}"))
        except UnsupportedRegime as exc:
            rows.append(("prediction", 0, str(exc)))
    path = write_csv(Path(args.out) / "validation.csv", _header(args, exp.resolved()), ("check", "passed", "detail"), rows)
    print(f"wrote {path}")
    return 0 if rep.ok else 1


def cmd_survival(args, exp):
    reps = args.reps or 2**20
    if exp.interarrival is None:
        grid = _grid(args, np.unique(np.round(np.geomspace(16, 512, 16))))
        if np.any(grid != np.round(grid)):
            raise UsageError("generation grids must be integers")
        res = generation_survival(exp.model, grid.astype(np.int64), reps, args.seed, args.workers, name="cli:survival")
        ci = np.array([wilson_interval(k, reps) for k in res.survivors]).reshape(-1, 2)
        lo, hi, exponent = ci[:, 0], ci[:, 1], -(1.0 + abs(exp.model.theta))
    else:
        grid = _grid(args, np.geomspace(16, 512, 16))
        res = survival_curve(exp.model, exp.interarrival, grid, reps, args.seed, args.workers, name="cli:survival")
        lo, hi = res.lo, res.hi
        exponent = predict(exp.model, exp.interarrival).exponent
    head = _header(args, exp.resolved())
    out = Path(args.out)
    rows = zip(grid, res.estimate, lo, hi, res.survivors)
    write_csv(out / "survival.csv", head, ("t", "p_hat", "ci_lo", "ci_hi", "survivors"), rows)
    try:
        fit = fit_tail_index(grid, res.estimate)
        wfit = fit_tail_index(grid, res.estimate, log_survival_variance(res.survivors, reps))
        frows = [("ols", fit.exponent, fit.stderr, fit.t_range[0], fit.t_range[1], fit.points, exponent, ""), ("weighted", wfit.exponent, wfit.stderr, *wfit.t_range, wfit.points, exponent, "")]
    except (ZeroCell, DomainError) as exc:
        frows = [("ols", "", "", grid[0], grid[-1], grid.size, exponent, f"{type(exc).__name__}: {exc}")]
    write_csv(out / "fit.csv", head, ("fit", "exponent", "stderr", "t_min", "t_max", "points", "predicted_exponent", "error"), frows)
    print(f"wrote {out / 'survival.csv'} and {out / 'fit.csv'}")
    return 0


def cmd_yaglom(args, exp):
    reps = args.reps or 2**20
    t = float(_grid(args, [512.0])[-1])
    if exp.interarrival is None:
        s = conditional_normalized_generation(exp.model, int(t), reps, args.seed, args.workers, min_survivors=2, name="cli:yaglom")
        laws = [("literal", Exp1())]
        survivors, scale = s.survivors, s.scale
    else:
        pred = predict(exp.model, exp.interarrival)
        s = conditional_normalized_sample(exp.model, exp.interarrival, t, reps, args.seed, args.workers, min_survivors=2, name="cli:yaglom")
        laws = [("literal", pred.limit)]
        if pred.corrected_limit not in ("same", None):
            laws.append(("corrected", pred.corrected_limit))
        survivors, scale = s.survivors, s.scale
    rows = []
    for kind, law in laws:
        ks = ks_distance(s.values, cdf_limit(law), law_id(law))
        rows.append((kind, ks.reference, ks.statistic, ks.n, t, scale, reps))
    path = write_csv(Path(args.out) / "ks.csv", _header(args, exp.resolved()), ("limit", "reference", "statistic", "n", "t", "scale", "reps"), rows)
    print(f"wrote {path} ({survivors} survivors)")
    return 0


def cmd_arb(args, exp):
    reps = args.reps or 2**16
    t = float(_grid(args, [1e4])[-1])
    cfg = exp.arb
    pred = predict(cfg.model, cfg.interarrival, cfg.sojourn)
    r = atom_and_conditional(cfg, t, reps, args.seed, args.workers, prediction=pred, name="cli:arb")
    rows = [("atom", "", r.atom, r.zeros, r.ci[0], r.ci[1], pred.atom, pred.delta)]
    laws = [("literal", pred.limit)]
    if pred.corrected_limit is not None:
        laws.append(("corrected", pred.corrected_limit))
    if r.survivors >= 2:
        for kind, law in laws:
            ks = ks_distance(r.values, cdf_limit(law), law_id(law))
            rows.append((f"ks_{kind}", ks.reference, ks.statistic, ks.n, "", "", "", ""))
    fields = ("quantity", "reference", "value", "count", "ci_lo", "ci_hi", "predicted", "delta")
    path = write_csv(Path(args.out) / "arb.csv", _header(args, exp.resolved()), fields, rows)
    print(f"wrote {path}")
    return 0


def cmd_laws(args, exp):
    x = _grid(args, np.geomspace(1e-3, 1e2, 200))
    if np.any(x <= 0):
        raise UsageError("law grids must be positive")
    if exp.interarrival is None:
        laws = [("literal", Exp1())]
    else:
        pred = predict(exp.model, exp.interarrival, exp.sojourn)
        laws = [("literal", pred.limit)]
        if pred.corrected_limit not in ("same", None):
            laws.append(("corrected", pred.corrected_limit))
    head = _header(args, exp.resolved())
    written = []
    for kind, law in laws:
        F = cdf_limit(law)
        rows = zip(x, F(x), F.density(x))
        written.append(write_csv(Path(args.out) / f"laws_{kind}.csv", head, ("x", "cdf", "density_estimate"), rows))
    print("wrote " + ", ".join(map(str, written)))
    return 0


def cmd_verify(args, exp):
    only = None if args.only is None else [int(v) for v in args.only]
    res = acceptance.run_suite(args.seed, args.scale, args.workers, only=only, log=print)
    config = {n: load_experiment(f"builtin:{n}").resolved() for n in builtin_names()}
    path = Path(args.out) / "verify.csv"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_header(args, config) + acceptance.render_summary(res))
    n_ok = sum(r.passed for r in res)
    print(f"{n_ok}/{len(res)} criteria passed; wrote {path}")
    return 0 if n_ok == len(res) else 2


COMMANDS = {
    "validate": cmd_validate,
    "survival": cmd_survival,
    "yaglom": cmd_yaglom,
    "arb": cmd_arb,
    "laws": cmd_laws,
    "verify": cmd_verify,
}


def build_parser():
    p = _Parser(prog="subbranch", description="Critical branching with emigration: simulation and limit-law checks.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML experiment file, or builtin:NAME")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--reps", type=_positive)
        s.add_argument("--workers", type=_positive, default=1)
        s.add_argument("--out", default=".")
        s.add_argument("--grid", type=_parse_grid, help="comma-separated ascending horizons")
        if name == "verify":
            s.add_argument("--scale", type=float, default=1.0, help="multiplier on every Monte Carlo count")
            s.add_argument("--only", type=_parse_grid, help="comma-separated criterion numbers")
    return p


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        if args.seed < 0 or args.seed >= 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        if args.command == "verify":
            if not args.scale > 0:
                raise UsageError("--scale must be positive")
            exp = None
        else:
            if args.config is None:
                raise UsageError(f"{args.command} needs --config")
            exp = load_experiment(args.config)
        return COMMANDS[args.command](args, exp)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except _RUNTIME as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    finally:
        shutdown()


if __name__ == "__main__":
    sys.exit(main())
