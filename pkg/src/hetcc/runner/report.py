"""Result tables, significance marks and plot-data series."""
from __future__ import annotations

import csv
import math
from collections import OrderedDict, defaultdict
from pathlib import Path
from typing import Dict, Iterable, List, Sequence

import numpy as np
from scipy.stats import ranksums

RESULT_FIELDS = ("instance", "mode", "seed", "best_cost", "fes", "runtime", "ledger_ok")
TRACE_FIELDS = ("t", "k", "action", "reward", "fes", "step_fes", "cost")
FORMAT_VERSION = 1


def significance_mark(reference: Sequence[float], baseline: Sequence[float], alpha: float = 0.05) -> str:
    """``+`` when the reference is significantly better (lower), ``-`` when worse, else ``≈``."""
    ref = np.asarray(reference, dtype=float)
    base = np.asarray(baseline, dtype=float)
    if ref.size == 0 or base.size == 0:
        return "≈"
    if np.array_equal(np.sort(ref), np.sort(base)):
        return "≈"
    stat, p = ranksums(ref, base)
    if not p < alpha:
        return "≈"
    return "+" if stat < 0 else "-"


def delta_sum_log10(reference_means: Sequence[float], baseline_means: Sequence[float],
                    floor: float = 1e-20) -> float:
    """Sum over instances of log10(reference) - log10(baseline); negative when the baseline is worse."""
    ref = np.log10(np.maximum(np.asarray(reference_means, dtype=float), floor))
    base = np.log10(np.maximum(np.asarray(baseline_means, dtype=float), floor))
    return float(np.sum(ref - base))


def group_costs(records: Iterable[Dict]) -> "OrderedDict[str, OrderedDict[str, List[float]]]":
    table: "OrderedDict[str, OrderedDict[str, List[float]]]" = OrderedDict()
    for r in records:
        table.setdefault(r["instance"], OrderedDict()).setdefault(r["mode"], []).append(float(r["best_cost"]))
    return table


def summarize(records: Iterable[Dict], reference: str = "learned", alpha: float = 0.05) -> Dict:
    """Mean, std, median and mark per (instance, mode), plus win/tie/loss and the log aggregate."""
    table = group_costs(records)
    modes: List[str] = []
    for per_mode in table.values():
        for m in per_mode:
            if m not in modes:
                modes.append(m)
    rows = []
    counts = {m: {"+": 0, "≈": 0, "-": 0} for m in modes if m != reference}
    means = defaultdict(list)
    for inst, per_mode in table.items():
        row = {"instance": inst}
        ref = per_mode.get(reference)
        for m in modes:
            vals = np.asarray(per_mode.get(m, []), dtype=float)
            if vals.size == 0:
                continue
            cell = {"mean": float(vals.mean()), "std": float(vals.std()), "median": float(np.median(vals))}
            if m != reference and ref is not None:
                cell["mark"] = significance_mark(ref, vals, alpha)
                counts[m][cell["mark"]] += 1
            row[m] = cell
            means[m].append(cell["mean"])
        rows.append(row)
    delta = {}
    if reference in modes:
        for m in modes:
            if m != reference and len(means[m]) == len(means[reference]):
                delta[m] = delta_sum_log10(means[reference], means[m])
    return {"modes": modes, "reference": reference, "rows": rows, "counts": counts, "delta": delta}


def write_summary(summary: Dict, path) -> None:
    """Delimited table: mean ± std per cell, with marks, a +/≈/- row and the log aggregate row."""
    modes, ref = summary["modes"], summary["reference"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["# format", FORMAT_VERSION])
        w.writerow(["instance"] + modes)
        for row in summary["rows"]:
            cells = []
            for m in modes:
                c = row.get(m)
                if c is None:
                    cells.append("")
                    continue
                text = f"{c['mean']:.3e} ± {c['std']:.3e}"
                if "mark" in c:
                    text += f" ({c['mark']})"
                cells.append(text)
            w.writerow([row["instance"]] + cells)
        w.writerow(["+/≈/-"] + ["N/A" if m == ref else
                                "{}/{}/{}".format(*(summary["counts"].get(m, {}).get(s, 0) for s in "+≈-"))
                                for m in modes])
        w.writerow(["delta_sum_log10"] + ["N/A" if m == ref else
                                          (f"{summary['delta'][m]:.2f}" if m in summary["delta"] else "")
                                          for m in modes])


def write_results(records: Iterable[Dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["# format", FORMAT_VERSION])
        w.writerow(RESULT_FIELDS)
        for r in records:
            w.writerow([repr(r[f]) if isinstance(r[f], float) else r[f] for f in RESULT_FIELDS])


def read_results(path) -> List[Dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["# format"]:
        raise ValueError(f"{path} is not a result table")
    if int(rows[0][1]) > FORMAT_VERSION:
        raise ValueError(f"result table version {rows[0][1]} is newer than supported")
    header = rows[1]
    out = []
    for row in rows[2:]:
        rec = dict(zip(header, row))
        rec["seed"] = int(rec["seed"])
        rec["best_cost"] = float(rec["best_cost"])
        rec["fes"] = int(rec["fes"])
        rec["runtime"] = float(rec["runtime"])
        rec["ledger_ok"] = rec["ledger_ok"] == "True"
        out.append(rec)
    return out


def write_trace(trace: Sequence[Dict], path) -> None:
    """One line per decision step: bookkeeping columns followed by the state features."""
    n_feat = len(trace[0]["features"]) if trace else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(TRACE_FIELDS) + [f"s{i}" for i in range(n_feat)])
        for rec in trace:
            w.writerow([rec[f] for f in TRACE_FIELDS] + [repr(float(v)) for v in rec["features"]])


def write_convergence(history: Sequence, path) -> None:
    """Plot data: the best cost after each decision step against FEs consumed."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["step", "fes", "cost"])
        for i, (fes, cost) in enumerate(history):
            w.writerow([i, fes, repr(float(cost))])


def mean_convergence(histories: Sequence[Sequence], n_points: int = 50) -> np.ndarray:
    """Average log10 best-cost curve over runs, sampled on a shared FE grid."""
    end = max(h[-1][0] for h in histories)
    grid = np.linspace(0, end, n_points)
    curves = []
    for h in histories:
        fes = np.array([p[0] for p in h], dtype=float)
        cost = np.log10(np.maximum([p[1] for p in h], 1e-20))
        idx = np.clip(np.searchsorted(fes, grid, side="right") - 1, 0, len(fes) - 1)
        curves.append(cost[idx])
    return np.column_stack([grid, np.mean(curves, axis=0)])
