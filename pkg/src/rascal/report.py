"""Winsteps-style tables: variable maps, category structure, item misfit, curves.

Every function here is a pure function of calibration and fit results, so
identical inputs give byte-identical text.  Displayed numbers are rounded
half away from zero.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from decimal import ROUND_HALF_UP, Decimal

import numpy as np

from .fit import display_zstd
from .model import rsm_category_probs, score_zone_boundaries, thurstone_thresholds

MAP_GLYPH_WIDTH = 40


# -- number formatting -----------------------------------------------------

def round_half_away(x: float, places: int = 2) -> float:
    """Round half away from zero, using the shortest decimal repr of ``x``."""
    q = Decimal(1).scaleb(-places)
    return float(Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP))


def fmt(x, places: int = 2, paren: bool = False) -> str:
    """Winsteps number style: ``.45``, ``-.45``, ``1.71``."""
    if x is None:
        return "NONE"
    if isinstance(x, float) and math.isinf(x):
        return "+INF" if x > 0 else "-INF"
    if isinstance(x, float) and math.isnan(x):
        return ""
    s = f"{round_half_away(x, places):.{places}f}"
    if s.startswith("0."):
        s = s[1:]
    elif s.startswith("-0."):
        s = "-" + s[2:]
    if s in ("-.00", "-.0"):
        s = s[1:]
    return f"({s})" if paren else s


def parse_fmt(s: str) -> float:
    s = s.strip().strip("()")
    return float(s)


def _table(header, rows, align=None) -> str:
    cols = list(zip(header, *rows)) if rows else [(h,) for h in header]
    widths = [max(len(str(c)) for c in col) for col in cols]
    align = align or ["r"] * len(header)

    def line(cells):
        out = []
        for c, w, a in zip(cells, widths, align):
            out.append(str(c).ljust(w) if a == "l" else str(c).rjust(w))
        return " ".join(out).rstrip()

    rule = "-" * len(line(header))
    return "\n".join([rule, line(header), rule, *(line(r) for r in rows), rule])


def rows_to_csv(rows) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow(r)
    return buf.getvalue()


def rows_to_json(rows) -> str:
    return json.dumps(rows, indent=2, allow_nan=True) + "\n"


# -- Wright map ------------------------------------------------------------

@dataclass
class MapRow:
    index: int
    measure: float
    person_count: int = 0
    glyphs: str = ""
    person_marker: str = " "
    item_marker: str = " "
    columns: list = field(default_factory=list)


@dataclass
class WrightMap:
    rows: list
    glyph_scale: int
    bin_width: float
    column_titles: list

    def row_of(self, label, column=0):
        for r in self.rows:
            if label in r.columns[column]:
                return r
        raise KeyError(label)


def _bin(measure, width):
    return int(round_half_away(measure / width, 0))


def _markers(values, width):
    """Row index -> marker letter for mean, +/-1 SD and +/-2 SD."""
    values = np.asarray(values, dtype=float)
    mean = values.mean()
    sd = values.std(ddof=0) if values.size > 1 else 0.0
    marks = {}
    for letter, k in (("T", 2), ("S", 1)):
        for sign in (-1, 1):
            marks[_bin(mean + sign * k * sd, width)] = letter
    marks[_bin(mean, width)] = "M"
    return marks


def build_wright_map(person_measures, item_columns, bin_width=0.1, marker_values=None,
                     column_titles=None) -> WrightMap:
    """Bin persons and item labels into rows of ``bin_width`` logits.

    ``item_columns`` is a list of columns, each a list of ``(label, measure)``.
    Item M/S/T markers use ``marker_values`` (default: the first column).
    """
    persons = np.asarray(person_measures, dtype=float)
    p_bins = [_bin(b, bin_width) for b in persons]
    col_bins = [[(_bin(m, bin_width), label) for label, m in col] for col in item_columns]
    if marker_values is None:
        marker_values = [m for _, m in item_columns[0]]
    p_marks = _markers(persons, bin_width) if persons.size else {}
    i_marks = _markers(marker_values, bin_width) if len(marker_values) else {}
    every = p_bins + [b for col in col_bins for b, _ in col] + list(p_marks) + list(i_marks)
    top, bottom = max(every), min(every)
    counts = {}
    for b in p_bins:
        counts[b] = counts.get(b, 0) + 1
    scale = max(1, math.ceil(max(counts.values(), default=0) / MAP_GLYPH_WIDTH))
    rows = []
    for k in range(top, bottom - 1, -1):
        n = counts.get(k, 0)
        glyphs = "#" * (n // scale) + ("." if n % scale else "")
        cols = [[label for b, label in col if b == k] for col in col_bins]
        rows.append(MapRow(k, k * bin_width, n, glyphs, p_marks.get(k, " "), i_marks.get(k, " "), cols))
    return WrightMap(rows, scale, bin_width, column_titles or ["ITEM"])


def _is_integer_row(row, width):
    v = row.measure
    return abs(v - round(v)) < width * 1e-6


def format_wright_map(wmap: WrightMap, title="PERSON - MAP - ITEM") -> str:
    gw = max([len(r.glyphs) for r in wmap.rows] + [6])
    ncol = len(wmap.column_titles)
    widths = [max([len(" ".join(r.columns[c])) for r in wmap.rows] + [len(wmap.column_titles[c])])
              for c in range(ncol)]
    lines = [f"MEASURE  {title}"]
    if ncol > 1:
        heads = " | ".join(t.ljust(w) for t, w in zip(wmap.column_titles, widths)).rstrip()
        lines.append(" " * (gw + 13) + heads)
    lines.append(f"{'':>7} {'<more>':>{gw}}  |<rare>")
    for r in wmap.rows:
        integer = _is_integer_row(r, wmap.bin_width)
        label = f"{round(r.measure):d}" if integer else ""
        sep = "+" if integer else "|"
        cells = [" ".join(c).ljust(w) for c, w in zip(r.columns, widths)]
        body = " | ".join(cells) if ncol > 1 else cells[0]
        lines.append(f"{label:>7} {r.glyphs:>{gw}} {r.person_marker}{sep}{r.item_marker} {body}".rstrip())
    lines.append(f"{'':>7} {'<less>':>{gw}}  |<freq>")
    s = wmap.glyph_scale
    if s > 1:
        dot = f"{1} TO {s - 1}" if s > 2 else "1"
        lines.append(f'EACH "#" IS {s}: EACH "." IS {dot}')
    else:
        lines.append('EACH "#" IS 1')
    return "\n".join(lines) + "\n"


def wright_map_data(calibration, bin_width=0.1, variant="simple") -> WrightMap:
    beta = calibration.beta
    delta = calibration.delta
    ids = [i.item_id for i in calibration.items]
    if variant == "simple":
        return build_wright_map(beta, [list(zip(ids, delta))], bin_width)
    if variant == "thresholds":
        thur = thurstone_thresholds(0.0, calibration.tau)
        bottom = [(iid, d + thur[0]) for iid, d in zip(ids, delta)]
        top = [(iid, d + thur[-1]) for iid, d in zip(ids, delta)]
        return build_wright_map(beta, [bottom, list(zip(ids, delta)), top], bin_width,
                                marker_values=list(delta),
                                column_titles=["BOTTOM P=50%", "MEAN", "TOP P=50%"])
    raise ValueError(f"unknown map variant {variant!r}")


def render_wright_map(calibration, bin_width=0.1, variant="simple") -> str:
    """Text variable map: persons left (``#`` glyphs), items right."""
    wmap = wright_map_data(calibration, bin_width, variant)
    title = "PERSON - MAP - ITEM" if variant == "simple" else "PERSON - MAP - ITEM - 50% Cumulative probabilities"
    return format_wright_map(wmap, title)


# -- category structure ----------------------------------------------------

def _relative_measures(calibration):
    return calibration.beta[:, None] - calibration.delta[None, :]


def category_table_rows(calibration, fit, counts=None):
    """One dict per category: counts, average measures, fit, thresholds and zones."""
    matrix = calibration.matrix
    x = matrix.cells
    obs = matrix.observed
    tau = calibration.tau
    m = tau.size
    res = fit.residuals
    if counts is None:
        counts = np.array([np.sum(x[obs] == k) for k in range(m + 1)])
    counts = np.asarray(counts, dtype=float)
    total = counts.sum()
    rel = _relative_measures(calibration)
    probs = calibration.category_probs()
    thur = thurstone_thresholds(0.0, tau)
    cm = calibration.structure.category_measures
    zones = score_zone_boundaries(0.0, tau)
    min_cat = matrix.keys[0].min_category
    e = np.where(obs, res.expected, 0.0)
    v_all = np.where(obs, res.variance, 1.0)
    rows = []
    for k in range(m + 1):
        sel = obs & (x == k)
        w = np.where(obs, probs[..., k], 0.0)
        # Observed squared residuals in category k over their model expectation
        # across all cells, so each category's mean-square is 1 under the model.
        d2 = (k - e) ** 2
        infit = d2[sel].sum() / (w * d2).sum()
        outfit = (d2 / v_all)[sel].sum() / (w * d2 / v_all).sum()
        rows.append({
            "category": k + min_cat,
            "score": k,
            "count": int(counts[k]),
            "percent": int(round_half_away(100 * counts[k] / total, 0)) if total else 0,
            "observed_average": float(rel[sel].mean()) if sel.any() else math.nan,
            "expected_average": float((w * rel).sum() / w.sum()) if w.sum() > 0 else math.nan,
            "infit_mnsq": float(infit) if sel.any() else math.nan,
            "outfit_mnsq": float(outfit) if sel.any() else math.nan,
            "andrich_threshold": None if k == 0 else float(tau[k - 1]),
            "threshold_se": None if k == 0 else float(calibration.structure.tau_se[k - 1]),
            "category_measure": float(cm[k]),
            "zone_low": -math.inf if k == 0 else float(zones[k - 1]),
            "zone_high": math.inf if k == m else float(zones[k]),
            "thurstone": None if k == 0 else float(thur[k - 1]),
        })
    return rows


def disordered_averages(rows):
    """Categories whose observed average measure falls below the previous one."""
    out = []
    for prev, cur in zip(rows, rows[1:]):
        if cur["observed_average"] < prev["observed_average"]:
            out.append(cur["category"])
    return out


def render_category_table(calibration, fit, counts=None) -> str:
    rows = category_table_rows(calibration, fit, counts)
    m = len(rows) - 1
    bad = set(disordered_averages(rows))
    head1 = ["CATEGORY", "SCORE", "OBSVD COUNT", "%", "OBSVD AVRGE", "SAMPLE EXPECT",
             "INFIT MNSQ", "OUTFIT MNSQ", "ANDRICH THRESHOLD", "CATEGORY MEASURE"]
    body1 = []
    for r in rows:
        extreme = r["score"] in (0, m)
        body1.append([
            r["category"], r["score"], r["count"], r["percent"],
            fmt(r["observed_average"]) + ("*" if r["category"] in bad else ""),
            fmt(r["expected_average"]), fmt(r["infit_mnsq"]), fmt(r["outfit_mnsq"]),
            fmt(r["andrich_threshold"]), fmt(r["category_measure"], paren=extreme),
        ])
    head2 = ["CATEGORY", "STRUCTURE MEASURE", "S.E.", "SCORE-TO-MEASURE AT CAT.", "ZONE", "50% CUM. PROBABILITY"]
    body2 = []
    for r in rows:
        extreme = r["score"] in (0, m)
        body2.append([
            r["category"], fmt(r["andrich_threshold"]),
            "" if r["threshold_se"] is None else fmt(r["threshold_se"]),
            fmt(r["category_measure"], paren=extreme),
            f"{fmt(r['zone_low'])} {fmt(r['zone_high'])}",
            fmt(r["thurstone"]),
        ])
    out = ['SUMMARY OF CATEGORY STRUCTURE. Model="R"', _table(head1, body1),
           "OBSERVED AVERAGE is mean of measures in category. It is not a parameter estimate."]
    if bad:
        out.append("* observed average measure is lower than in the category below (disordered)")
    out += ["", _table(head2, body2)]
    return "\n".join(out) + "\n"


# -- item misfit -----------------------------------------------------------

def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b / den) if den > 0 else math.nan


def point_measure(calibration, fit):
    """Observed and expected point-measure correlations per item.

    The expected value adds the model variance of each response to the
    spread of the expected scores.
    """
    matrix = calibration.matrix
    beta = calibration.beta
    res = fit.residuals
    out = []
    for i in range(matrix.shape[1]):
        sel = matrix.observed[:, i]
        x = matrix.cells[sel, i]
        b = beta[sel]
        e = res.expected[sel, i]
        v = res.variance[sel, i]
        obs_r = _pearson(x, b)
        bc = b - b.mean()
        ec = e - e.mean()
        den = math.sqrt(float(np.sum(ec**2 + v)) * float(bc @ bc))
        out.append((obs_r, float(ec @ bc / den) if den > 0 else math.nan))
    return out


def exact_match(calibration, fit):
    """Observed and expected percentages of responses equal to the rounded expectation."""
    matrix = calibration.matrix
    res = fit.residuals
    probs = calibration.category_probs()
    obs = matrix.observed
    e = np.where(obs, res.expected, 0.0)
    nearest = np.floor(e + 0.5).astype(int)
    hit = np.where(obs, matrix.cells == nearest, False)
    p_hit = np.take_along_axis(probs, nearest[..., None], axis=-1)[..., 0]
    p_hit = np.where(obs, p_hit, 0.0)
    n = obs.sum(axis=0)
    return 100 * hit.sum(axis=0) / n, 100 * p_hit.sum(axis=0) / n


def misfit_rows(calibration, fit):
    """Item rows sorted by worst mean-square distance from 1 (stable)."""
    pm = point_measure(calibration, fit)
    obs_pct, exp_pct = exact_match(calibration, fit)
    rows = []
    for i, (item, rec) in enumerate(zip(calibration.items, fit.items)):
        key = calibration.matrix.keys[i]
        rows.append({
            "entry": i + 1,
            "total_score": item.raw_score + item.count * key.min_category,
            "count": item.count,
            "measure": item.measure,
            "se": item.se,
            "infit_mnsq": rec.infit_mnsq,
            "infit_zstd": rec.infit_zstd,
            "outfit_mnsq": rec.outfit_mnsq,
            "outfit_zstd": rec.outfit_zstd,
            "ptmeasure_obs": pm[i][0],
            "ptmeasure_exp": pm[i][1],
            "exact_obs_pct": float(obs_pct[i]),
            "exact_exp_pct": float(exp_pct[i]),
            "flag": rec.flag,
            "advisory": rec.advisory,
            "item_id": item.item_id,
            "_worst": rec.worst_misfit,
        })
    rows.sort(key=lambda r: -r["_worst"])
    for r in rows:
        del r["_worst"]
    return rows


def render_misfit_table(calibration, fit) -> str:
    rows = misfit_rows(calibration, fit)
    header = ["ENTRY", "TOTAL SCORE", "TOTAL COUNT", "MEASURE", "MODEL S.E.", "INFIT MNSQ", "ZSTD",
              "OUTFIT MNSQ", "ZSTD", "PTMEA CORR.", "EXP.", "EXACT OBS%", "MATCH EXP%", "ITEM"]
    body = []
    for r in rows:
        body.append([
            r["entry"], f"{r['total_score']:.0f}", r["count"], fmt(r["measure"]), fmt(r["se"]),
            fmt(r["infit_mnsq"]), fmt(display_zstd(r["infit_zstd"]), 1),
            fmt(r["outfit_mnsq"]), fmt(display_zstd(r["outfit_zstd"]), 1),
            fmt(r["ptmeasure_obs"]), fmt(r["ptmeasure_exp"]),
            f"{round_half_away(r['exact_obs_pct'], 1):.1f}", f"{round_half_away(r['exact_exp_pct'], 1):.1f}",
            r["item_id"],
        ])
    align = ["r"] * (len(header) - 1) + ["l"]
    return "ITEM STATISTICS: MISFIT ORDER\n" + _table(header, body, align) + "\n"


# -- category characteristic curves ----------------------------------------

def default_grid():
    return np.round(np.linspace(-4.0, 4.0, 161), 10)


def category_curves(tau, grid=None):
    grid = default_grid() if grid is None else np.asarray(grid, dtype=float)
    return grid, rsm_category_probs(grid, 0.0, tau)


def emit_category_curves(calibration_or_tau, grid=None) -> str:
    """CSV of category probabilities against ``beta - delta``."""
    if hasattr(calibration_or_tau, "tau"):
        tau = calibration_or_tau.tau
        min_cat = calibration_or_tau.matrix.keys[0].min_category
    else:
        tau = np.asarray(calibration_or_tau, dtype=float)
        min_cat = 0
    grid, probs = category_curves(tau, grid)
    header = ["relative_measure"] + [f"cat_{k + min_cat}" for k in range(tau.size + 1)]
    lines = [",".join(header)]
    for g, row in zip(grid, probs):
        lines.append(",".join([f"{g:.2f}", *(f"{p:.10f}" for p in row)]))
    return "\n".join(lines) + "\n"
