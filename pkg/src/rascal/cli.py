"""Command-line pipeline: ``rascal <command> [options]``.

Exit status is 0 on success, 2 on data errors and 3 when calibration does
not converge (the trace is still written).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import datasets
from .data import DataError, apply_scoring, read_keys_csv, read_responses_csv, trim_extremes, \
    write_keys_csv, write_responses_csv
from .diag import DiagnosticError, ctt_summary, parallel_analysis, pca, scree_csv
from .estimate import EstimationConfig, jmle_calibrate
from .fit import FitThresholds, fit_statistics, standardized_residuals
from .report import (category_table_rows, emit_category_curves, misfit_rows, render_category_table,
                     render_misfit_table, render_wright_map, rows_to_csv, rows_to_json)
from .simulate import REPORTED_DELTA, REPORTED_ITEM_IDS, REPORTED_TAU, simulate_rsm

EXIT_OK, EXIT_DATA, EXIT_NONCONVERGED = 0, 2, 3
SEED_ENV = "RASCAL_SEED"

log = logging.getLogger("rascal")


@dataclass
class RunConfig:
    command: str
    input: str | None = None
    keys: str | None = None
    tolerance: float = 0.001
    max_iter: int = 100
    damping: float = 1.0
    bias_correction: bool = False
    seed: int = 0
    replications: int = 100
    pca_mode: str = "residuals"
    out: str | None = None
    format: str = "text"

    def __post_init__(self):
        if not self.tolerance > 0:
            raise DataError("tolerance must be positive")
        if self.max_iter < 1:
            raise DataError("max-iter must be at least 1")
        if self.replications < 1:
            raise DataError("reps must be at least 1")
        if self.pca_mode not in ("residuals", "scores"):
            raise DataError("--pca-on must be residuals or scores")

    @property
    def estimation(self) -> EstimationConfig:
        return EstimationConfig(self.tolerance, self.max_iter, self.damping, self.bias_correction)


_CONFIG_KEYS = {"tolerance", "max_iter", "damping", "bias_correction", "seed", "replications"}


def _load_config_file(path):
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read config {path}: {exc}") from None
    unknown = set(data) - _CONFIG_KEYS
    if unknown:
        raise DataError(f"unknown config keys {sorted(unknown)}")
    return data


def _resolve_config(args) -> RunConfig:
    values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    for name, attr in (("tolerance", "tolerance"), ("max_iter", "max_iter"), ("damping", "damping"),
                       ("replications", "reps"), ("seed", "seed")):
        v = getattr(args, attr, None)
        if v is not None:
            values[name] = v
    if getattr(args, "bias_correction", False):
        values["bias_correction"] = True
    if "seed" not in values:
        env = os.environ.get(SEED_ENV)
        if env is not None:
            try:
                values["seed"] = int(env)
            except ValueError:
                raise DataError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    inp, keys = getattr(args, "input", None), getattr(args, "keys", None)
    if getattr(args, "bundled", False):
        inp, keys = str(datasets.BUNDLED_RESPONSES), str(datasets.BUNDLED_KEYS)
    return RunConfig(
        command=args.command, input=inp, keys=keys,
        pca_mode=getattr(args, "pca_on", "residuals"), out=getattr(args, "out", None),
        format=getattr(args, "format", "text"), **values,
    )


# -- output ----------------------------------------------------------------

class Sink:
    """Writes named artifacts into ``out`` or concatenates them on stdout."""

    def __init__(self, out):
        self.out = Path(out) if out else None
        if self.out:
            self.out.mkdir(parents=True, exist_ok=True)

    def write(self, name, text):
        if self.out:
            (self.out / name).write_text(text)
        else:
            sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj) -> str:
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o).__name__)


# -- pipeline stages -------------------------------------------------------

def _load(cfg: RunConfig):
    if not cfg.input:
        raise DataError("--input (or --bundled) is required")
    keys = read_keys_csv(cfg.keys) if cfg.keys else None
    raw = read_responses_csv(cfg.input, keys)
    return apply_scoring(raw)


def _calibrate(cfg: RunConfig):
    scored = _load(cfg)
    trimmed, trim_log = trim_extremes(scored)
    cal = jmle_calibrate(trimmed, cfg.estimation, trim_log=trim_log)
    return scored, cal


def _fit(cal):
    return fit_statistics(standardized_residuals(cal.matrix, cal), cal, FitThresholds())


def _emit_calibration(sink, cfg, cal):
    if cfg.format == "csv" and sink.out:
        sink.write("persons.csv", rows_to_csv([asdict(p) for p in cal.persons]))
        sink.write("items.csv", rows_to_csv([asdict(i) for i in cal.items]))
    sink.write("calibration.json", _json(cal.as_dict()))


def _emit_fit(sink, cfg, cal, fit):
    rows = misfit_rows(cal, fit)
    person_rows = [{"person_id": p.person_id, "measure": p.measure, **r.as_dict()}
                   for p, r in zip(cal.persons, fit.persons)]
    if cfg.format == "json":
        sink.write("item_fit.json", rows_to_json(rows))
        sink.write("person_fit.json", rows_to_json(person_rows))
    elif cfg.format == "csv":
        sink.write("item_fit.csv", rows_to_csv(rows))
        sink.write("person_fit.csv", rows_to_csv(person_rows))
    else:
        sink.write("item_fit.txt", render_misfit_table(cal, fit))
    if sink.out:
        z = fit.residuals.z
        lines = ["person_id," + ",".join(cal.matrix.item_ids)]
        for pid, row in zip(cal.matrix.person_ids, z):
            lines.append(pid + "," + ",".join("NA" if np.isnan(v) else f"{v:.6f}" for v in row))
        sink.write("residuals.csv", "\n".join(lines) + "\n")


def _emit_category(sink, cfg, cal, fit):
    if cfg.format == "json":
        sink.write("category.json", rows_to_json(category_table_rows(cal, fit)))
    elif cfg.format == "csv":
        sink.write("category.csv", rows_to_csv(category_table_rows(cal, fit)))
    else:
        sink.write("category.txt", render_category_table(cal, fit))
    if sink.out:
        sink.write("category_curves.csv", emit_category_curves(cal))


def _emit_map(sink, cfg, cal, variant="simple", bin_width=0.1):
    sink.write(f"map_{variant}.txt", render_wright_map(cal, bin_width, variant))


def _pca_data(cfg, scored, cal, fit):
    if cfg.pca_mode == "scores":
        return cal.matrix.cells
    return fit.residuals.z


def _emit_pca(sink, cfg, cal, fit, scored, components=2):
    data = _pca_data(cfg, scored, cal, fit)
    result = pca(data, components)
    par = parallel_analysis(result.n_obs, data.shape[1], cfg.replications, cfg.seed,
                            observed=result.eigenvalues)
    payload = result.as_dict()
    payload["mode"] = cfg.pca_mode
    payload["parallel"] = par.as_dict()
    sink.write("pca.json", _json(payload))
    sink.write("scree.csv", scree_csv(result.eigenvalues, par))


def _parallel_text(par) -> str:
    lines = [f"Random Data Eigenvalues ({par.replications} replications, seed {par.seed}, {par.rng})",
             f"{'Root':>6} {'Means':>10} {'Prcntyle':>10}"]
    for k, (m, p) in enumerate(zip(par.mean_eigenvalues, par.pct95_eigenvalues), 1):
        lines.append(f"{k:>6d} {m:>10.6f} {p:>10.6f}")
    return "\n".join(lines) + "\n"


def _emit_parallel(sink, cfg, par):
    if cfg.format == "json":
        sink.write("parallel.json", _json(par.as_dict()))
    elif cfg.format == "csv":
        rows = [{"root": k + 1, "mean": float(m), "pct95": float(p)}
                for k, (m, p) in enumerate(zip(par.mean_eigenvalues, par.pct95_eigenvalues))]
        sink.write("parallel.csv", rows_to_csv(rows))
    else:
        sink.write("parallel.txt", _parallel_text(par))


def _ctt_text(res) -> str:
    lines = ["Reliability Statistics",
             f"Cronbach's Alpha {res.alpha:.3f}  Standardized {res.alpha_standardized:.3f}  "
             f"N of Items {res.n_items}  N of Cases {res.n_cases}", "", "Item-Total Statistics",
             f"{'ITEM':<10} {'MEAN DEL':>9} {'VAR DEL':>9} {'CORR IT':>8} {'SMC':>6} {'ALPHA DEL':>9}"]
    for r in res.items:
        lines.append(f"{r.item_id:<10} {r.scale_mean_if_deleted:>9.2f} {r.scale_variance_if_deleted:>9.3f} "
                     f"{r.corrected_item_total:>8.3f} {r.squared_multiple_correlation:>6.3f} "
                     f"{r.alpha_if_deleted:>9.3f}")
    return "\n".join(lines) + "\n"


def _emit_ctt(sink, cfg, scored):
    res = ctt_summary(scored)
    if cfg.format == "json":
        sink.write("ctt.json", _json(res.as_dict()))
    else:
        sink.write("ctt.txt", _ctt_text(res))


# -- command handlers ------------------------------------------------------

def _status(cal):
    if not cal.converged:
        log.error("calibration did not converge after %d iterations", cal.trace.iterations)
        return EXIT_NONCONVERGED
    return EXIT_OK


def cmd_simulate(args, cfg):
    delta = [float(v) for v in args.delta.split(",")] if args.delta else list(REPORTED_DELTA)
    tau = [float(v) for v in args.tau.split(",")] if args.tau else list(REPORTED_TAU)
    ids = args.item_ids.split(",") if args.item_ids else (
        list(REPORTED_ITEM_IDS) if len(delta) == len(REPORTED_ITEM_IDS) else None)
    reverse = tuple(args.reverse.split(",")) if args.reverse else (
        ("03BR", "03CR", "03GR") if ids == list(REPORTED_ITEM_IDS) else ())
    raw, _ = simulate_rsm(args.n, delta, tau, cfg.seed, mean=args.mean, sd=args.sd,
                          item_ids=ids, reverse=reverse)
    sink = Sink(cfg.out)
    sink.write("responses.csv", write_responses_csv(raw))
    if sink.out:
        sink.write("keys.csv", write_keys_csv(raw.keys))
    return EXIT_OK


def cmd_calibrate(args, cfg):
    _, cal = _calibrate(cfg)
    _emit_calibration(Sink(cfg.out), cfg, cal)
    return _status(cal)


def cmd_fit(args, cfg):
    _, cal = _calibrate(cfg)
    _emit_fit(Sink(cfg.out), cfg, cal, _fit(cal))
    return _status(cal)


def cmd_category(args, cfg):
    _, cal = _calibrate(cfg)
    _emit_category(Sink(cfg.out), cfg, cal, _fit(cal))
    return _status(cal)


def cmd_map(args, cfg):
    _, cal = _calibrate(cfg)
    _emit_map(Sink(cfg.out), cfg, cal, args.variant, args.bin_width)
    return _status(cal)


def cmd_pca(args, cfg):
    scored, cal = _calibrate(cfg)
    _emit_pca(Sink(cfg.out), cfg, cal, _fit(cal), scored, args.components)
    return _status(cal)


def cmd_parallel(args, cfg):
    par = parallel_analysis(args.n, args.l, cfg.replications, cfg.seed)
    _emit_parallel(Sink(cfg.out), cfg, par)
    return EXIT_OK


def cmd_ctt(args, cfg):
    _emit_ctt(Sink(cfg.out), cfg, _load(cfg))
    return EXIT_OK


def cmd_report(args, cfg):
    scored, cal = _calibrate(cfg)
    fit = _fit(cal)
    sink = Sink(cfg.out)
    _emit_calibration(sink, cfg, cal)
    _emit_fit(sink, cfg, cal, fit)
    _emit_category(sink, cfg, cal, fit)
    for variant in ("simple", "thresholds"):
        _emit_map(sink, cfg, cal, variant, args.bin_width)
    _emit_pca(sink, cfg, cal, fit, scored, args.components)
    _emit_ctt(sink, cfg, scored)
    return _status(cal)


COMMANDS = {
    "simulate": cmd_simulate, "calibrate": cmd_calibrate, "fit": cmd_fit, "category": cmd_category,
    "map": cmd_map, "pca": cmd_pca, "parallel": cmd_parallel, "ctt": cmd_ctt, "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help=f"random seed (falls back to ${SEED_ENV}, then 0)")
    common.add_argument("--reps", type=int, help="parallel-analysis replications (default 100)")
    common.add_argument("--out", help="output directory (default: stdout)")
    common.add_argument("--format", choices=("text", "json", "csv"), default="text")
    common.add_argument("--config", help="JSON file with tolerance/max_iter/damping/bias_correction/seed")
    common.add_argument("-v", "--verbose", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", help="response CSV (person_id,<item>...)")
    data.add_argument("--keys", help="scoring key CSV (item_id,direction,min,max)")
    data.add_argument("--bundled", action="store_true", help="use the bundled simulated 4026x7 dataset")
    data.add_argument("--tolerance", type=float)
    data.add_argument("--max-iter", type=int, dest="max_iter")
    data.add_argument("--damping", type=float)
    data.add_argument("--bias-correction", action="store_true", dest="bias_correction")
    data.add_argument("--pca-on", choices=("residuals", "scores"), default="residuals", dest="pca_on")
    data.add_argument("--components", type=int, default=2)
    data.add_argument("--bin-width", type=float, default=0.1, dest="bin_width")

    parser = argparse.ArgumentParser(prog="rascal", description="Rasch rating-scale calibration toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="generate rating-scale data")
    sim.add_argument("--n", type=int, default=4026)
    sim.add_argument("--delta", help="comma-separated item difficulties")
    sim.add_argument("--tau", help="comma-separated Andrich thresholds")
    sim.add_argument("--item-ids", dest="item_ids")
    sim.add_argument("--reverse", help="comma-separated reverse-keyed item ids")
    sim.add_argument("--mean", type=float, default=0.0)
    sim.add_argument("--sd", type=float, default=1.0)
    for name in ("calibrate", "fit", "category", "pca", "ctt", "report"):
        sub.add_parser(name, parents=[common, data])
    mp = sub.add_parser("map", parents=[common, data])
    mp.add_argument("--variant", choices=("simple", "thresholds"), default="simple")
    par = sub.add_parser("parallel", parents=[common])
    par.add_argument("--n", type=int, required=True)
    par.add_argument("--l", type=int, required=True)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = _resolve_config(args)
        return COMMANDS[args.command](args, cfg)
    except (DataError, DiagnosticError) as exc:
        print(f"rascal: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
