"""Campaign output rendering: JSONL logs, CSV/JSON stats, SVG bar charts."""

from __future__ import annotations

import csv
import json

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .campaign import CampaignStats, GroupStats  # noqa: E402

CSV_HEADER = ["group", "n", "masked", "noncrit", "crit",
              "f_noncrit", "f_noncrit_lo", "f_noncrit_hi",
              "f_crit", "f_crit_lo", "f_crit_hi"]


def record_to_dict(rec) -> dict:
    return {"image": rec.image, "iter": rec.iteration, "cycle": rec.cycle,
            "group": rec.group, "instance": rec.instance, "bit": rec.bit,
            "outcome": rec.outcome, "logit_delta": rec.logit_delta}


def golden_to_dict(rec) -> dict:
    return {"image": rec.image, "model_cycles": rec.model_cycles,
            "golden": list(rec.golden)}


def write_records_jsonl(result, path) -> None:
    """One golden line per image followed by its injection lines."""
    by_image: dict = {}
    for rec in result.records:
        by_image.setdefault(rec.image, []).append(rec)
    with open(path, "w", encoding="utf-8") as fh:
        for g in result.golden:
            fh.write(json.dumps(golden_to_dict(g), separators=(",", ":")))
            fh.write("\n")
            for rec in sorted(by_image.get(g.image, []),
                              key=lambda r: r.iteration):
                fh.write(json.dumps(record_to_dict(rec), separators=(",", ":")))
                fh.write("\n")


def _stats_row(name: str, gs: GroupStats) -> dict:
    nc_lo, nc_hi = gs.noncrit_interval()
    c_lo, c_hi = gs.crit_interval()
    return {"group": name, "n": gs.n, "masked": gs.masked,
            "noncrit": gs.noncrit, "crit": gs.crit,
            "f_noncrit": gs.f_noncrit, "f_noncrit_lo": nc_lo,
            "f_noncrit_hi": nc_hi, "f_crit": gs.f_crit,
            "f_crit_lo": c_lo, "f_crit_hi": c_hi}


def stats_to_dict(stats: CampaignStats, meta: dict | None = None) -> dict:
    return {"meta": meta or {},
            "groups": {name: _stats_row(name, gs) for name, gs in stats.rows()}}


def stats_from_dict(doc: dict) -> tuple:
    """(meta, {group: row dict}) from a stats JSON document."""
    return doc.get("meta", {}), doc.get("groups", {})


def write_stats_csv(stats: CampaignStats, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_HEADER)
        writer.writeheader()
        for name, gs in stats.rows():
            row = _stats_row(name, gs)
            row = {k: (f"{v:.6f}" if isinstance(v, float) else v)
                   for k, v in row.items()}
            writer.writerow(row)


def write_stats_json(stats: CampaignStats, path, meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(stats_to_dict(stats, meta), fh, indent=1)
        fh.write("\n")


def render_stats_figure(stats_docs: list, path) -> None:
    """Paired horizontal bar chart: F_crit left, F_noncrit right.

    stats_docs: list of (label, stats dict) as produced by stats_to_dict;
    multiple entries (e.g. several array sizes) become grouped bars.
    """
    all_groups: list = []
    for _, doc in stats_docs:
        for name in doc.get("groups", {}):
            if name not in all_groups:
                all_groups.append(name)
    if not all_groups:
        all_groups = ["(no data)"]
    n_sets = max(len(stats_docs), 1)
    height = 0.8 / n_sets
    fig, axes = plt.subplots(1, 2, figsize=(10, 1 + 0.5 * len(all_groups)),
                             sharey=True)
    y = list(range(len(all_groups)))
    for panel, metric in zip(axes, ("f_crit", "f_noncrit")):
        for si, (label, doc) in enumerate(stats_docs):
            groups = doc.get("groups", {})
            vals, los, his = [], [], []
            for name in all_groups:
                row = groups.get(name)
                vals.append(row[metric] if row else 0.0)
                # clamp: roundoff can push the interval a hair past the point
                los.append(max(0.0, row[metric] - row[f"{metric}_lo"]) if row else 0.0)
                his.append(max(0.0, row[f"{metric}_hi"] - row[metric]) if row else 0.0)
            offs = [yy + (si - (n_sets - 1) / 2) * height for yy in y]
            panel.barh(offs, vals, height=height * 0.9, label=label,
                       xerr=(los, his), capsize=2)
        panel.set_yticks(y, all_groups)
        panel.set_xlabel(metric)
        panel.invert_yaxis()
        panel.grid(axis="x", alpha=0.3)
    if stats_docs and len(stats_docs) > 1:
        axes[0].legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
