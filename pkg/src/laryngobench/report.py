"""Markdown report for a benchmark run directory."""

from __future__ import annotations

import json
from pathlib import Path

METRIC_LABELS = (("balanced_accuracy", "Bal. acc."), ("sensitivity", "Sens."), ("specificity", "Spec."),
                 ("auroc", "AUROC"))


def format_cell(interval: dict | None, bold: bool = False, sep: str = "<br>") -> str:
    """Point estimate with its interval beneath: ``0.691<br>(0.593, 0.784)``."""
    if not interval:
        return ""
    point = f"{interval['point']:.3f}"
    if bold:
        point = f"**{point}**"
    return f"{point}{sep}({interval['ci_low']:.3f}, {interval['ci_high']:.3f})"


def _fmt_p(entry) -> str:
    if not entry:
        return ""
    if entry.get("skipped"):
        return "skipped"
    if entry.get("computable") is False:
        return f"n/c ({entry['reason']})"
    return f"{entry['p_value']:.3g}"


def _load(path: Path):
    return json.loads(path.read_text()) if path.exists() else None


def render_report(run_dir) -> str:
    run = Path(run_dir)
    summary = _load(run / "summary.json")
    if summary is None:
        raise FileNotFoundError(f"{run}: no summary.json; is this a benchmark run directory?")
    cells = summary["cells"]
    metrics = {c["cell"]: (_load(run / "cells" / c["cell"] / "metrics.json") or {}).get("test_sets", {})
               for c in cells}
    fairness = {c["cell"]: (_load(run / "cells" / c["cell"] / "fairness.json") or {}).get("test_sets", {})
                for c in cells}
    test_sets: list[str] = []
    for m in metrics.values():
        for name in m:
            if name not in test_sets:
                test_sets.append(name)

    lines = ["# Benchmark report", ""]
    counts = summary.get("counts", {})
    lines.append(f"Cells: {len(cells)} ({counts.get('ok', 0)} ok, {counts.get('skipped', 0)} skipped, "
                 f"{counts.get('failed', 0)} failed).")
    lines.append("")

    # best point per (test set, metric) column
    best = {}
    for ts in test_sets:
        for key, _ in METRIC_LABELS:
            vals = [m[ts]["metrics"][key]["point"] for m in metrics.values()
                    if ts in m and not m[ts].get("skipped") and m[ts]["metrics"].get(key)]
            best[(ts, key)] = max(vals) if vals else None

    lines.append("## Classification metrics")
    lines.append("")
    lines.append("Point estimate with its 95% percentile-bootstrap interval beneath; best per column in bold.")
    lines.append("")
    head = ["Feature set", "Variant", "Algorithm"] + [f"{ts}: {lab}" for ts in test_sets for _, lab in METRIC_LABELS]
    lines.append("| " + " | ".join(head) + " | Note |")
    lines.append("|" + "---|" * (len(head) + 1))
    for c in cells:
        row = [c["feature_set"], c["variant"], c["algorithm"]]
        notes = []
        if c["status"] != "ok":
            notes.append(f"{c['status']}: {c.get('reason') or c.get('error', '')}")
        for ts in test_sets:
            m = metrics[c["cell"]].get(ts)
            if not m or m.get("skipped"):
                row += [""] * len(METRIC_LABELS)
                if m:
                    notes.append(m["reason"])
                continue
            for key, _ in METRIC_LABELS:
                iv = m["metrics"].get(key)
                row.append(format_cell(iv, bold=iv is not None and iv["point"] == best[(ts, key)]))
        lines.append("| " + " | ".join(row) + " | " + "; ".join(notes) + " |")
    lines.append("")

    lines.append("## Fairness")
    lines.append("")
    lines.append("Two-sided p-values: Fisher exact test of sex against correct/incorrect, "
                 "Welch t-test of age between correct and incorrect predictions.")
    lines.append("")
    head = ["Feature set", "Variant", "Algorithm"] + [f"{ts}: {t}" for ts in test_sets for t in ("sex p", "age p")]
    lines.append("| " + " | ".join(head) + " |")
    lines.append("|" + "---|" * len(head))
    for c in cells:
        row = [c["feature_set"], c["variant"], c["algorithm"]]
        for ts in test_sets:
            f = fairness[c["cell"]].get(ts) or {}
            if f.get("skipped"):
                row += ["skipped", "skipped"]
            else:
                row += [_fmt_p(f.get("sex_fisher")), _fmt_p(f.get("age_t_test"))]
        lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    timing = _load(run / "timing.json")
    if timing:
        lines.append("## Prediction time")
        lines.append("")
        lines.append(f"Seconds per file, median over repeats; {timing[0]['environment']}.")
        lines.append("")
        lines.append("| Model | End-to-end median | End-to-end p95 | Feature stage | Feature median | "
                     "Predict median | Files | Errors |")
        lines.append("|---|---|---|---|---|---|---|---|")
        for t in timing:
            s = t["summary"]
            e2e, feat, pred = s.get("end_to_end"), s.get(t["stages"][1]), s.get("predict_only")
            if not e2e:
                lines.append(f"| {t['model_id']} |  |  | {t['stages'][1]} |  |  | 0 | {len(t['errors'])} |")
                continue
            lines.append(f"| {t['model_id']} | {e2e['median']:.4f} | {e2e['p95']:.4f} | {t['stages'][1]} | "
                         f"{feat['median']:.4f} | {pred['median']:.6f} | {e2e['n_files']} | {len(t['errors'])} |")
        lines.append("")

    lines.append("## Selected hyperparameters")
    lines.append("")
    lines.append("| Cell | CV mean balanced accuracy | Winner |")
    lines.append("|---|---|---|")
    for c in cells:
        if c["status"] == "ok":
            hp = ", ".join(f"{k}={v}" for k, v in c["winner"].items() if v is not None)
            lines.append(f"| {c['cell']} | {c['cv_mean']:.3f} | {hp} |")
    lines.append("")
    return "\n".join(lines)
