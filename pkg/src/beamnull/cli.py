"""Command-line front end: ``beamnull {capacity,ber,figure,compare,selftest}``.

Exit codes: 0 success, 1 invalid input, 2 numerical failure, 3 self-test failure.
"""

import argparse
import csv
import io
import json
import os
import re
import sys

from . import config as rc
from . import sim
from .exceptions import NumericalError, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_SELFTEST = 0, 1, 2, 3

CAPACITY_COLUMNS = ("rho_db", "scheme", "mean_bits", "stderr", "trials")
BER_COLUMNS = ("rho_db", "system", "ber", "errors", "bits")


def _num(x):
    return repr(float(x))


def slug(label):
    return re.sub(r"[^a-z0-9]+", "-", label.lower()).strip("-")


# -- row builders ----------------------------------------------------------------

def capacity_rows(curves):
    return [
        {"rho_db": float(x), "scheme": c.label, "mean_bits": float(m),
         "stderr": float(s), "trials": int(c.trials)}
        for c in curves for x, m, s in zip(c.rho_grid_db, c.mean_bits, c.stderr)
    ]


def ber_rows(curves):
    rows = []
    for c in curves:
        if c.kind == "analytic":
            # Analytic curves have no counts; report the number of channel draws.
            for x, b in zip(c.rho_grid_db, c.ber):
                rows.append({"rho_db": float(x), "system": c.label, "ber": float(b),
                             "errors": None, "bits": None})
        else:
            for x, b, e, n in zip(c.rho_grid_db, c.ber, c.error_counts, c.bit_counts):
                rows.append({"rho_db": float(x), "system": c.label, "ber": float(b),
                             "errors": int(e), "bits": int(n)})
    return rows


def render(rows, columns, cfg, fmt, extra=None):
    """Serialize rows with the resolved configuration embedded."""
    resolved = cfg.resolved()
    if fmt == "json":
        doc = {"config": resolved, "columns": list(columns), "rows": rows}
        if extra:
            doc.update(extra)
        return json.dumps(doc, indent=1, sort_keys=True) + "\n"
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(resolved, sort_keys=True) + "\n")
    for k, v in sorted((extra or {}).items()):
        buf.write(f"# {k}: " + json.dumps(v, sort_keys=True) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow(["" if r[c] is None else (_num(r[c]) if isinstance(r[c], float) else r[c])
                    for c in columns])
    return buf.getvalue()


def read_embedded_config(path):
    """Recover the RunConfig embedded in an output file."""
    with open(path) as fh:
        text = fh.read()
    if path.endswith(".json"):
        return rc.from_resolved(json.loads(text)["config"])
    for line in text.splitlines():
        if line.startswith("# config: "):
            return rc.from_resolved(json.loads(line[len("# config: "):]))
    raise ValidationError(f"no embedded configuration in {path}")


def _write(cfg, name, text):
    os.makedirs(cfg.out, exist_ok=True)
    path = os.path.join(cfg.out, f"{name}.{cfg.format}")
    with open(path, "w") as fh:
        fh.write(text)
    return path


# -- runners ---------------------------------------------------------------------

def _summary(curves):
    crossings = []
    for i in range(len(curves)):
        for j in range(i + 1, len(curves)):
            for c in sim.detect_crossover(curves[i], curves[j]):
                crossings.append({"a": curves[i].label, "b": curves[j].label,
                                  "rho_db": c.rho_db, "confident": c.confident,
                                  "multiple": c.multiple})
    regions = [{"best": lab, "start_db": s, "end_db": e} for lab, s, e in sim.best_regions(curves)]
    return {"crossovers": crossings, "regions": regions}


def run_capacity(cfg, summary=False):
    curves = sim.estimate_capacity(cfg.scheme_specs(), cfg.channel(), cfg.rho_grid_db(),
                                   cfg.trials, snr_reference=cfg.snr_reference,
                                   workers=cfg.workers, common=cfg.common_random)
    extra = _summary(curves) if summary and len(curves) > 1 else None
    paths = [_write(cfg, slug(c.label), render(capacity_rows([c]), CAPACITY_COLUMNS, cfg,
                                                cfg.format))
             for c in curves]
    paths.append(_write(cfg, "compare" if summary else "capacity",
                        render(capacity_rows(curves), CAPACITY_COLUMNS, cfg, cfg.format, extra)))
    return curves, extra, paths


def run_ber(cfg):
    chan = cfg.channel()
    grid = cfg.rho_grid_db()
    stop = sim.Stopping(cfg.min_errors, cfg.max_bits)
    curves = []
    for system in cfg.link_systems():
        if cfg.analytic:
            curves.append(sim.analytic_ber(system, chan, grid, cfg.analytic_trials,
                                           snr_reference=cfg.snr_reference, workers=cfg.workers))
        curves.append(sim.simulate_ber(system, chan, grid, stop,
                                       snr_reference=cfg.snr_reference, workers=cfg.workers))
    paths = [_write(cfg, slug(c.label), render(ber_rows([c]), BER_COLUMNS, cfg, cfg.format))
             for c in curves]
    paths.append(_write(cfg, "ber", render(ber_rows(curves), BER_COLUMNS, cfg, cfg.format)))
    return curves, paths


def run(cfg):
    """Run a validated configuration; returns the list of files written."""
    cfg.validate()
    if cfg.command == "capacity":
        return run_capacity(cfg)[2]
    if cfg.command == "compare":
        return run_capacity(cfg, summary=True)[2]
    if cfg.command == "ber":
        return run_ber(cfg)[1]
    raise ValidationError(f"command {cfg.command!r} cannot be run from a configuration")


# -- argument parsing ------------------------------------------------------------

def _common(p):
    p.add_argument("--config", help="flat key = value file; flags override it")
    p.add_argument("--nt", type=int)
    p.add_argument("--nr", type=int)
    p.add_argument("--rho", nargs=3, type=float, metavar=("START", "STOP", "STEP"),
                   help="SNR grid in dB")
    p.add_argument("--snr-reference", choices=sim.SNR_REFERENCES)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--out")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--trials", type=int)


def _ber_flags(p):
    p.add_argument("--rate", type=float, help="bits per channel use")
    p.add_argument("--constellation", help="fixed constellation instead of a rate")
    p.add_argument("--min-errors", type=int)
    p.add_argument("--max-bits", type=int)
    p.add_argument("--analytic", action="store_true", default=None,
                   help="also evaluate the closed-form BER average")
    p.add_argument("--analytic-trials", type=int)


def build_parser():
    parser = argparse.ArgumentParser(prog="beamnull",
                                     description="MIMO beamforming / beam-nulling simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, helptext in (("capacity", "ergodic capacity curves"),
                           ("compare", "capacity curves with crossovers and best regions")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--schemes", help="comma list, e.g. eq,wf,bf,bn,bn2,bf2")
        p.add_argument("--independent", dest="common_random", action="store_false", default=None,
                       help="draw independent channels per scheme instead of common ones")

    p = sub.add_parser("ber", help="bit error rate of link systems")
    _common(p)
    _ber_flags(p)
    p.add_argument("--preset", help=f"named system: {', '.join(rc.SYSTEM_PRESETS)}")
    p.add_argument("--systems", help="comma list of <scheme>[+<code>][/<receiver>]")

    p = sub.add_parser("figure", help="reproduce a figure preset")
    p.add_argument("name", choices=sorted(rc.FIGURES))
    _common(p)
    _ber_flags(p)

    p = sub.add_parser("selftest", help="fast property checks")
    p.add_argument("--inject-fault", default=None, help=argparse.SUPPRESS)
    return parser


def config_from_args(args):
    """Layering: defaults or figure preset, then config file, then flags."""
    if args.command == "figure":
        cfg = rc.figure_config(args.name)
    else:
        cfg = rc.RunConfig(command=args.command)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = rc.build_config(cfg, **rc.parse_config_text(fh.read()))
        if args.command != "figure":
            cfg.command = args.command
    over = {}
    for key in ("nt", "nr", "seed", "workers", "out", "format", "trials", "rate",
                "constellation", "min_errors", "max_bits", "analytic", "analytic_trials",
                "schemes", "systems", "snr_reference", "common_random"):
        val = getattr(args, key, None)
        if val is not None:
            over[key] = val
    if getattr(args, "rho", None):
        over.update(rho_start_db=args.rho[0], rho_stop_db=args.rho[1], rho_step_db=args.rho[2])
    if getattr(args, "preset", None):
        name = args.preset.lower()
        if name not in rc.SYSTEM_PRESETS:
            raise ValidationError(f"unknown system preset {args.preset!r}")
        over["systems"] = [name]
        over["preset"] = name
    if args.command != "figure" and "nr" not in over and "nt" in over:
        over["nr"] = over["nt"]
    return rc.build_config(cfg, **over)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "selftest":
            from . import selftest
            report = selftest.run(fault=args.inject_fault)
            print(report.text())
            return EXIT_OK if report.passed else EXIT_SELFTEST
        cfg = config_from_args(args)
        for path in run(cfg):
            print(path)
        return EXIT_OK
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
