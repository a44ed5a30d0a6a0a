"""``specsense`` command line: capture generation, calibration, sensing, and
plot-data export.

Exit codes: 0 success, 2 usage/configuration, 3 I/O or file format,
4 numeric failure. With ``--json-errors`` the error is also written to stderr
as one JSON object ``{"error": category, "exit_code": n, "message": ...}``.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .capture import IqCapture, read_capture, write_capture
from .channel import epa_profile, load_profile
from .csvio import read_values, write_csv
from .detectors import ALL_KINDS, StatKind
from .dists import Normal
from .errors import CaptureFormatError, ConfigError, NumericError, SpecSenseError
from .experiment import (DetectionReport, ExperimentConfig, capture_statistics, observe,
                         run_null_calibration, run_roc_sweep, su_result)
from .fitting import Family, fit_candidates, fit_mle, select_best
from .gof import GofTest, ThresholdTable, ecdf, kl_from_samples
from .signal import SignalConfig

EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 2, 3, 4
THRESHOLDS_FORMAT_VERSION = 1


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# -- argument helpers ------------------------------------------------------

def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from exc


def parse_grid(text: str) -> list[float]:
    """``start:step:stop`` (inclusive) or a comma list."""
    if ":" not in text:
        return _floats(text)
    try:
        start, step, stop = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise ConfigError(f"bad grid {text!r}; expected start:step:stop") from exc
    if step == 0 or (stop - start) / step < 0:
        raise ConfigError(f"grid {text!r} is empty or never terminates")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _stat_kinds(text: str) -> list[StatKind]:
    if text.strip().lower() == "all":
        return list(ALL_KINDS)
    return [StatKind.parse(t) for t in text.split(",")]


def _families(text: str) -> list[Family]:
    if text.strip().lower() == "all":
        return list(Family)
    return [Family.parse(t) for t in text.split(",")]


def _seed(args) -> int:
    seed = args.seed if getattr(args, "seed", None) is not None else args.global_seed
    return 0 if seed is None else seed


def _profile(args):
    return load_profile(args.profile) if args.profile else epa_profile()


def _config(args, **kw) -> ExperimentConfig:
    sig = SignalConfig(num_samples=args.n, noise_power_dbm=args.noise_dbm)
    return ExperimentConfig(signal=sig, num_rx=args.num_rx, master_seed=_seed(args), **kw)


def _write_json(path: str, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _read_json(path: str) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise CaptureFormatError(f"missing file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise CaptureFormatError(f"{path} is not valid JSON: {exc}") from exc


def load_thresholds(path: str) -> dict[StatKind, ThresholdTable]:
    doc = _read_json(path)
    if doc.get("format_version") != THRESHOLDS_FORMAT_VERSION or "tables" not in doc:
        raise CaptureFormatError(f"{path} is not a version-{THRESHOLDS_FORMAT_VERSION} "
                                 "threshold file")
    return {StatKind(k): ThresholdTable.from_dict(v) for k, v in doc["tables"].items()}


def _pick_table(tables: dict[StatKind, ThresholdTable], stat: str | None) -> tuple[StatKind, ThresholdTable]:
    if stat is None:
        if len(tables) != 1:
            raise ConfigError("threshold file has several statistics; choose one with --stat")
        return next(iter(tables.items()))
    kind = StatKind.parse(stat)
    if kind not in tables:
        raise ConfigError(f"threshold file has no {kind.value} table")
    return kind, tables[kind]


# -- subcommands -----------------------------------------------------------

def cmd_generate(args) -> int:
    cfg = _config(args, channel=_profile(args))
    snr = None if args.mode == "noise" else args.snr_db
    blocks = [observe(cfg, trial=b, snr_db=snr, signal=args.mode != "noise",
                      noise=args.mode != "pu")
              for b in range(args.blocks)]
    x = np.concatenate(blocks, axis=1)
    extra = {"mode": args.mode, "block_size": args.n, "num_blocks": args.blocks,
             "snr_db": snr, "noise_power_dbm": args.noise_dbm,
             "channel": cfg.channel.to_dict()}
    cap = IqCapture.from_array(x, cfg.signal.sample_rate_hz, label=args.mode,
                               seed=cfg.master_seed, extra=extra)
    write_capture(args.out, cap)
    return 0


def cmd_calibrate(args) -> int:
    kinds = _stat_kinds(args.stat)
    cfg = _config(args, smoothing_L=args.L, trials=args.trials, significances=tuple(args.alpha),
                  significance=args.alpha[0], diagonal_loading=args.loading)
    cal = run_null_calibration(cfg, workers=args.threads)
    doc = {"format_version": THRESHOLDS_FORMAT_VERSION,
           "tables": {k.value: cal.table(k).to_dict() for k in kinds}}
    _write_json(args.out, doc)
    return 0


def cmd_sense(args) -> int:
    cap = read_capture(args.input)
    kind, table = _pick_table(load_thresholds(args.thresholds), args.stat)
    if table.null_samples is None:
        raise ConfigError("threshold table carries no null samples; rerun calibrate")
    n, L = table.n, int(table.null_spec["smoothing_L"])
    loading = float(table.null_spec.get("diagonal_loading", 0.0))
    if cap.meta.num_samples % n:
        raise ConfigError(f"capture length {cap.meta.num_samples} is not a multiple of "
                          f"the calibrated block size {n}")
    blocks = cap.meta.num_samples // n
    col = ALL_KINDS.index(kind)
    x = cap.payload.astype(np.complex128)
    stats = np.stack([capture_statistics(x[m].reshape(blocks, n), L, loading)[:, col]
                      for m in range(cap.meta.num_channels)])  # (channels, blocks)
    threshold = table.threshold(args.alpha)
    null = table.null_samples
    test = GofTest.parse(args.test)
    per_su = [su_result(m, stats[m], threshold, null, test, args.alpha, args.gof_trials,
                        _seed(args), args.threshold_source, args.threads)
              for m in range(cap.meta.num_channels)]
    echo = {"capture": cap.meta.to_dict(), "test": test.value, "significance": args.alpha,
            "threshold_source": args.threshold_source, "gof_trials": args.gof_trials,
            "block_size": n, "num_blocks": blocks, "smoothing_L": L, "seed": _seed(args),
            "null_spec": table.null_spec, "pfa_source": "calibration_sample"}
    report = DetectionReport(kind, cap.meta.extra.get("snr_db"), per_su,
                             float(np.mean(null > threshold)), float(np.mean(stats > threshold)),
                             dict(table.quantiles), echo,
                             kl_to_null=kl_from_samples(stats, null).value)
    Path(args.report).write_text(report.to_json(), encoding="utf-8")
    if args.stats_csv:
        write_csv(args.stats_csv, "statistics",
                  [(m, b, kind.value, stats[m, b]) for m in range(stats.shape[0])
                   for b in range(blocks)])
    for su in per_su:
        print(f"SU{su.su_id}: {'PU present' if su.decision else 'vacant'} "
              f"({su.gof_result.test.value}={su.gof_result.statistic:.4g}, "
              f"threshold={su.gof_result.threshold:.4g})")
    return 0


def cmd_roc(args) -> int:
    cfg = _config(args, channel=_profile(args), smoothing_L=args.L, trials=args.trials,
                  calibration_trials=args.cal_trials, snr_grid_db=tuple(parse_grid(args.snr)),
                  significance=args.alpha)
    rows = run_roc_sweep(cfg, _stat_kinds(args.stat), workers=args.threads)
    write_csv(args.csv, "roc", [(r.snr_db if r.snr_db is not None else -math.inf,
                                 r.statistic.value, r.pfa_hat, r.pd_hat) for r in rows])
    return 0


def _where(args) -> dict:
    where = {}
    if args.su is not None:
        where["su_id"] = args.su
    if args.stat is not None:
        where["statistic"] = StatKind.parse(args.stat).value
    return where


def cmd_fit(args) -> int:
    x = read_values(args.input, args.column, _where(args))
    test = None if args.no_pvalue else GofTest.parse(args.test)
    fits = fit_candidates(x, _families(args.families), test, args.trials, _seed(args),
                          args.threads)
    best = select_best(fits)
    rows = []
    for f in fits:
        names = list(f.params)
        vals = list(f.params.values()) + [None] * (2 - len(names))
        rows.append((f.family.value, ";".join(names), vals[0], vals[1], f.log_likelihood,
                     f.k, f.aic, f.p_value, f is best))
    write_csv(args.csv, "fits", rows)
    for f in sorted(fits, key=lambda f: f.aic):
        p = "" if f.p_value is None else f" p={f.p_value:.3f}"
        print(f"{f.family.value:12s} AIC={f.aic:.6g}{p}{'  <- best' if f is best else ''}")
    return 0


def cmd_cdfdump(args) -> int:
    y = np.sort(read_values(args.input, args.column, _where(args)), kind="stable")
    if (args.null is None) == (args.family is None):
        raise ConfigError("give exactly one of --null or --family")
    if args.null:
        _, table = _pick_table(load_thresholds(args.null), args.stat)
        if table.null_samples is None:
            raise ConfigError("threshold table carries no null samples")
        f0 = ecdf(table.null_samples)
    elif args.family.lower() == "best":
        f0 = select_best([fit_mle(fam, y) for fam in Family]).dist
    elif args.family.lower() == "normal":
        f0 = Normal.fit(y)
    else:
        f0 = fit_mle(Family.parse(args.family), y).dist
    f1 = ecdf(y)(y)
    write_csv(args.csv, "cdf", zip(y, f1, f0(y)))
    return 0


# -- parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="specsense", description=__doc__.split("\n\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--json-errors", action="store_true", help="also report errors as JSON on stderr")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: SPECSENSE_THREADS or CPU count)")
    p.add_argument("--seed", dest="global_seed", type=int, default=None,
                   help="master seed for every random stream")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, capture=True):
        sp.add_argument("--seed", type=int, default=None)
        if capture:
            sp.add_argument("--n", type=int, default=4096, help="samples per block")
            sp.add_argument("--num-rx", type=int, default=4)
            sp.add_argument("--noise-dbm", type=float, default=0.0)

    g = sub.add_parser("generate", help="write a simulated multi-SU capture")
    common(g)
    g.add_argument("--mode", choices=["noise", "pu", "composite"], required=True)
    g.add_argument("--out", required=True, help="capture base path (.json/.iq are appended)")
    g.add_argument("--snr-db", type=float, default=0.0)
    g.add_argument("--blocks", type=int, default=1, help="independent blocks of --n samples")
    g.add_argument("--profile", help="channel profile JSON (default: EPA, block Rayleigh)")
    g.set_defaults(func=cmd_generate)

    c = sub.add_parser("calibrate", help="noise-only thresholds and null samples")
    common(c)
    c.add_argument("--stat", default="all", help="mme, meam, megm, amgm, a comma list, or all")
    c.add_argument("--alpha", type=_floats, default=[0.1, 0.05, 0.01])
    c.add_argument("--trials", type=int, default=10_000)
    c.add_argument("-L", dest="L", type=int, default=8, help="smoothing factor")
    c.add_argument("--loading", type=float, default=0.0, help="diagonal loading epsilon")
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("sense", help="per-SU occupancy decisions for a capture")
    common(s, capture=False)
    s.add_argument("--in", dest="input", required=True)
    s.add_argument("--thresholds", required=True)
    s.add_argument("--stat", default=None, help="statistic table to use (default: the only one)")
    s.add_argument("--test", choices=["ks", "cm", "ad"], default="ks")
    s.add_argument("--alpha", type=float, default=0.05)
    s.add_argument("--threshold-source", choices=["calibrated", "table"], default="calibrated")
    s.add_argument("--gof-trials", type=int, default=2000)
    s.add_argument("--report", required=True)
    s.add_argument("--stats-csv", help="also write per-block statistics")
    s.set_defaults(func=cmd_sense)

    r = sub.add_parser("roc", help="Pd/Pfa over an SNR grid")
    common(r)
    r.add_argument("--snr", default="-20:5:0", help="start:step:stop or comma list, dB")
    r.add_argument("--trials", type=int, default=2000)
    r.add_argument("--cal-trials", type=int, default=None)
    r.add_argument("--stat", default="all")
    r.add_argument("--alpha", type=float, default=0.05)
    r.add_argument("-L", dest="L", type=int, default=8)
    r.add_argument("--profile")
    r.add_argument("--csv", required=True)
    r.set_defaults(func=cmd_roc)

    def samples_in(sp):
        sp.add_argument("--in", dest="input", required=True, help="CSV of statistic samples")
        sp.add_argument("--column", default="value")
        sp.add_argument("--su", type=int, default=None, help="keep rows of one SU")
        sp.add_argument("--stat", default=None)

    f = sub.add_parser("fit", help="candidate-distribution AIC and p-value table")
    common(f, capture=False)
    samples_in(f)
    f.add_argument("--families", default="all")
    f.add_argument("--test", choices=["ks", "cm", "ad"], default="ad")
    f.add_argument("--trials", type=int, default=2000, help="bootstrap resamples")
    f.add_argument("--no-pvalue", action="store_true")
    f.add_argument("--csv", required=True)
    f.set_defaults(func=cmd_fit)

    d = sub.add_parser("cdfdump", help="(y, F1, F0) rows for CDF plots")
    common(d, capture=False)
    samples_in(d)
    d.add_argument("--null", help="threshold JSON whose null samples define F0")
    d.add_argument("--family", help="fit F0 to the input: a family name, normal, or best")
    d.add_argument("--csv", required=True)
    d.set_defaults(func=cmd_cdfdump)
    return p


def _fail(args_json: bool, category: str, code: int, message: str) -> int:
    print(f"specsense: {category} error: {message}", file=sys.stderr)
    if args_json:
        print(json.dumps({"error": category, "exit_code": code, "message": message}),
              file=sys.stderr)
    return code


def _attach_grid_values(argv: list[str]) -> list[str]:
    """Rewrite ``--snr -20:5:0`` as ``--snr=-20:5:0``; argparse would read the value as an option."""
    out = []
    for tok in argv:
        if out and out[-1] == "--snr" and tok.startswith("-") and tok[1:2].isdigit():
            out[-1] = f"--snr={tok}"
        else:
            out.append(tok)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = _attach_grid_values(sys.argv[1:] if argv is None else list(argv))
    json_errors = "--json-errors" in argv
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        return _fail(json_errors, "usage", EXIT_USAGE, str(exc))
    except ConfigError as exc:
        return _fail(json_errors, "usage", EXIT_USAGE, str(exc))
    except (CaptureFormatError, OSError) as exc:
        return _fail(json_errors, "io", EXIT_IO, str(exc))
    except (NumericError, ArithmeticError, np.linalg.LinAlgError) as exc:
        return _fail(json_errors, "numeric", EXIT_NUMERIC, str(exc))
    except SpecSenseError as exc:
        return _fail(json_errors, exc.category, EXIT_NUMERIC, str(exc))
