"""amscale command line.

Exit codes: 0 success, 1 input/IO error, 2 identification or convergence failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import sys
from dataclasses import asdict, replace
from pathlib import Path

from . import _jsonio
from .am_core import EstimatorConfig, bootstrap_ci, scale
from .baselines import compare_estimators, compare_observed
from .errors import AmscaleError, EstimationError, InputError
from .identification import EXPLAIN, diagnose
from .placements import DEFAULT_MISSING, IngestOptions, load_csv, write_csv
from .simharness import SimConfig, generate, run_bin_replications, write_truth_csv

DEFAULT_SEED = 1234


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


class UsageError(InputError):
    pass


def _add_io(p, needs_input):
    p.add_argument("--input", required=needs_input, help="placements CSV (header row required)")
    p.add_argument("--output", help="output file (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--id-column", default="id",
                   help="respondent id column, used if present (default: id; '' disables)")
    p.add_argument("--self-column", default="self",
                   help="self-placement column, used if present (default: self; '' disables)")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--missing", nargs="+", default=sorted(DEFAULT_MISSING),
                   help="tokens read as missing")


def _add_estimator(p):
    p.add_argument("--method", choices=("naive", "qr"), default="qr")
    p.add_argument("--polarity", default="0",
                   help="stimulus label or 0-based index placed on the negative side")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--retain-degenerate", dest="retain", action="store_true", default=None)
    g.add_argument("--drop-degenerate", dest="retain", action="store_false")
    p.add_argument("--threads", type=int, default=1)


def _add_sim(p):
    d = SimConfig()
    p.add_argument("--seed", type=int, default=None,
                   help=f"RNG seed (fallback: $AMSCALE_SEED, then {DEFAULT_SEED})")
    p.add_argument("--n", type=int, default=d.n)
    p.add_argument("--j", type=int, default=d.j)
    p.add_argument("--sd-min", type=float, default=d.sd_min)
    p.add_argument("--sd-max", type=float, default=d.sd_max)
    p.add_argument("--w-min", type=float, default=d.w_min)
    p.add_argument("--w-max", type=float, default=d.w_max)
    p.add_argument("--c-sd", type=float, default=d.c_sd)
    p.add_argument("--degenerates", type=int, default=0)
    p.add_argument("--error-mode", choices=("cell", "respondent"), default="cell")


def build_parser():
    parser = _Parser(prog="amscale", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scale", help="estimate stimulus positions and respondent transforms")
    _add_io(p, True)
    _add_estimator(p)

    p = sub.add_parser("simulate", help="generate data and compare AM with column means")
    p.add_argument("--output", help="directory for placements.csv, truth.csv, comparison.json "
                                    "(default: print the comparison only)")
    _add_sim(p)
    _add_estimator(p)

    p = sub.add_parser("compare", help="AM vs mean vs median, with BIN on simulated data")
    _add_io(p, False)
    _add_sim(p)
    _add_estimator(p)
    p.add_argument("--replicates", type=int, default=200)

    p = sub.add_parser("diagnose", help="identification report")
    _add_io(p, True)
    _add_estimator(p)

    p = sub.add_parser("bootstrap", help="percentile intervals for stimulus positions")
    _add_io(p, True)
    _add_estimator(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replicates", type=int, default=200)
    p.add_argument("--level", type=float, default=0.9)
    return parser


# --------------------------------------------------------------------------

def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("AMSCALE_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"AMSCALE_SEED must be an integer, got {env!r}") from None
    return DEFAULT_SEED


def _load(args):
    path = Path(args.input)
    with path.open(encoding="utf-8") as fh:
        header = [h.strip() for h in fh.readline().rstrip("\r\n").split(args.delimiter)]
    opts = IngestOptions(
        missing_tokens=frozenset(args.missing),
        id_column=args.id_column if args.id_column in header else None,
        self_column=args.self_column if args.self_column in header else None,
        delimiter=args.delimiter,
    )
    return load_csv(path, opts)


def _polarity(value, labels=None):
    if labels and value in labels:
        return labels.index(value)
    try:
        k = int(value)
    except ValueError:
        raise UsageError(f"unknown polarity stimulus {value!r}") from None
    if k < 0 or (labels and k >= len(labels)):
        raise UsageError(f"polarity index {k} out of range")
    return k


def _estimator(args, labels=None):
    return EstimatorConfig(method=args.method, polarity_index=_polarity(args.polarity, labels),
                           retain_degenerate=args.retain, threads=args.threads)


def _sim_config(args):
    return SimConfig(n=args.n, j=args.j, sd_min=args.sd_min, sd_max=args.sd_max,
                     w_min=args.w_min, w_max=args.w_max, c_sd=args.c_sd, seed=_seed(args),
                     degenerate_count=args.degenerates, error_mode=args.error_mode)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["" if v is None else (format(v, ".17g") if isinstance(v, float) else v)
                    for v in row])
    return buf.getvalue()


def _emit(text, output):
    if output is None:
        sys.stdout.write(text)
    else:
        Path(output).write_text(text, encoding="utf-8")


def _identification_hint(exc, J):
    msg = str(exc)
    if J is not None and J < 3 and EXPLAIN[min(J, 2)] not in msg:
        msg += "; " + EXPLAIN[min(J, 2)]
    return msg


# --------------------------------------------------------------------------

def cmd_scale(args):
    p = _load(args)
    try:
        rep = scale(p, _estimator(args, p.stimulus_labels))
    except EstimationError as exc:
        raise type(exc)(_identification_hint(exc, p.J)) from exc
    if args.format == "csv":
        text = _csv_text(["label", "position"],
                         [[lab, float(y)] for lab, y in zip(p.stimulus_labels, rep.solution.y_hat)])
    else:
        text = rep.to_json()
    _emit(text, args.output)
    return 0


def cmd_simulate(args):
    cfg = _sim_config(args)
    sim = generate(cfg)
    ecfg = _estimator(args, sim.placements.stimulus_labels)
    rec = compare_estimators(sim, ecfg)
    rec.meta = {"seed": cfg.seed, "config": asdict(cfg)}
    if args.output is not None:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_csv(sim.placements, out / "placements.csv")
        write_truth_csv(sim, out / "truth.csv")
        (out / "comparison.json").write_text(rec.to_json(), encoding="utf-8")
    else:
        sys.stdout.write(rec.to_json())
    if not rec.ok:
        print(f"amscale: {_identification_hint(rec.error, cfg.j)}", file=sys.stderr)
        return 2
    return 0


def cmd_compare(args):
    if args.input:
        p = _load(args)
        try:
            cors = compare_observed(p, _estimator(args, p.stimulus_labels))
        except EstimationError as exc:
            raise type(exc)(_identification_hint(exc, p.J)) from exc
        if args.format == "csv":
            text = _csv_text(["pair", "r"], [[k, v] for k, v in cors.items()])
        else:
            text = _jsonio.dumps({"source": str(args.input), "correlations": cors})
        _emit(text, args.output)
        return 0

    cfg = _sim_config(args)
    sim = generate(cfg)
    ecfg = _estimator(args, sim.placements.stimulus_labels)
    rec = compare_estimators(sim, ecfg)
    rec.meta = {"seed": cfg.seed, "config": asdict(cfg), "replicates": args.replicates}
    if not rec.ok:
        _emit(rec.to_json(), args.output)
        print(f"amscale: {_identification_hint(rec.error, cfg.j)}", file=sys.stderr)
        return 2
    rec.bin = {}
    if args.replicates >= 2:
        reps = run_bin_replications(cfg, args.replicates, replace(ecfg, threads=1),
                                    threads=args.threads)
        rec.bin = reps.stats
    if args.format == "csv":
        text = _csv_text(["name", "r_truth", "bias", "information", "noise"], rec.csv_rows())
    else:
        text = rec.to_json()
    _emit(text, args.output)
    return 0


def cmd_diagnose(args):
    p = _load(args)
    rep = diagnose(p, _estimator(args, p.stimulus_labels))
    _emit(_jsonio.dumps(rep.to_dict()), args.output)
    return 0


def cmd_bootstrap(args):
    p = _load(args)
    try:
        res = bootstrap_ci(p, _estimator(args, p.stimulus_labels), B=args.replicates,
                           seed=_seed(args), level=args.level)
    except EstimationError as exc:
        raise type(exc)(_identification_hint(exc, p.J)) from exc
    if args.format == "csv":
        text = _csv_text(["label", "estimate", "lower", "upper"],
                         [[s["label"], s["estimate"], s["lower"], s["upper"]]
                          for s in res.to_dict()["stimuli"]])
    else:
        text = _jsonio.dumps(res.to_dict())
    _emit(text, args.output)
    return 0


COMMANDS = {
    "scale": cmd_scale,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
    "bootstrap": cmd_bootstrap,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except EstimationError as exc:
        print(f"amscale: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except BrokenPipeError:
        # reader went away (e.g. `| head`); silence the flush at interpreter exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except (InputError, OSError, UnicodeDecodeError, csv.Error) as exc:
        print(f"amscale: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except AmscaleError as exc:  # pragma: no cover
        print(f"amscale: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
