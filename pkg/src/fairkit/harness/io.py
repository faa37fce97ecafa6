"""Report serialisation: JSON with 6 significant digits, flat CSV tables."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def round_sig(x, digits=6):
    """Round floats to ``digits`` significant digits; NaN and inf become None."""
    if isinstance(x, dict):
        return {str(k): round_sig(v, digits) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [round_sig(v, digits) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{digits}g}")
    return x


def dumps_report(data: dict) -> str:
    return json.dumps(round_sig(data), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(data: dict, path) -> Path:
    path = Path(path)
    path.write_text(dumps_report(data), encoding="utf-8")
    return path


def load_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _g(x):
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return f"{x:.6g}" if isinstance(x, float) else str(x)


def write_csv_tables(data: dict, outdir) -> list:
    """``summary.csv``: one row per (attribute, method); ``groups.csv``: one row per group."""
    outdir = Path(outdir)
    summary = outdir / "summary.csv"
    groups = outdir / "groups.csv"
    with summary.open("w", newline="", encoding="utf-8") as fs, \
            groups.open("w", newline="", encoding="utf-8") as fg:
        ws = csv.writer(fs, lineterminator="\n")
        wg = csv.writer(fg, lineterminator="\n")
        ws.writerow(["attribute", "method", "status", "eod", "gamma", "fair", "privileged",
                     "unprivileged", "bacc", "bacc_ci_low", "bacc_ci_high", "auc", "auc_ci_low",
                     "auc_ci_high", "error"])
        wg.writerow(["attribute", "method", "group", "tp", "fp", "tn", "fn", "tpr", "fpr",
                     "mean_tpr", "half_width"])
        for attr in sorted(data["attributes"]):
            for method, cell in sorted(data["attributes"][attr]["cells"].items()):
                if cell.get("status") != "ok":
                    ws.writerow([attr, method, cell.get("status")] + [""] * 11 + [cell.get("error", "")])
                    continue
                fair, bacc, auc = cell["fairness"], cell["bacc"], cell["auc"]
                ws.writerow([attr, method, "ok", _g(fair["eod"]), _g(fair["gamma"]), fair["fair"],
                             fair["privileged"], fair["unprivileged"], _g(bacc["pooled"]),
                             _g(bacc["ci"][0]), _g(bacc["ci"][1]), _g(auc["pooled"]),
                             _g(auc["ci"][0]), _g(auc["ci"][1]), ""])
                for g, s in cell["group_report"]["groups"].items():
                    c = s["counts"]
                    wg.writerow([attr, method, g, _g(c["tp"]), _g(c["fp"]), _g(c["tn"]),
                                 _g(c["fn"]), _g(s["tpr"]), _g(s["fpr"]), _g(s["mean_tpr"]),
                                 _g(s["half_width"])])
    return [summary, groups]
