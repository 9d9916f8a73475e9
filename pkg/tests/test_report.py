import csv
import json

import pytest

from safsim.campaign import (CampaignConfig, CampaignRecord, CampaignResult,
                             GoldenRecord, aggregate, run_campaign)
from safsim.report import (CSV_HEADER, render_stats_figure, stats_from_dict,
                           stats_to_dict, write_records_jsonl, write_stats_csv,
                           write_stats_json)


def tiny_result():
    records = [
        CampaignRecord(0, 0, 5, "w-reg", 0, 1, "masked", 0),
        CampaignRecord(0, 1, 9, "accum-reg", 1, 30, "crit", 50),
        CampaignRecord(1, 0, 2, "nlf-reg", 0, 7, "noncrit", 3),
    ]
    golden = [GoldenRecord(0, 100, (1, 2, 3)), GoldenRecord(1, 100, (3, 2, 1))]
    return CampaignResult(golden=golden, records=records,
                          stats=aggregate(records))


def test_records_jsonl_layout(tmp_path):
    path = tmp_path / "records.jsonl"
    write_records_jsonl(tiny_result(), path)
    lines = [json.loads(l) for l in path.read_text().splitlines()]
    assert lines[0] == {"image": 0, "model_cycles": 100, "golden": [1, 2, 3]}
    assert lines[1] == {"image": 0, "iter": 0, "cycle": 5, "group": "w-reg",
                        "instance": 0, "bit": 1, "outcome": "masked",
                        "logit_delta": 0}
    assert lines[3]["golden"] == [3, 2, 1]
    assert lines[4]["outcome"] == "noncrit"


def test_stats_csv_header_and_rows(tmp_path):
    path = tmp_path / "stats.csv"
    write_stats_csv(tiny_result().stats, path)
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert list(rows[0]) == CSV_HEADER
    by_group = {r["group"]: r for r in rows}
    assert by_group["accum-reg"]["crit"] == "1"
    assert by_group["accum-reg"]["f_crit"] == "1.000000"
    assert float(by_group["w-reg"]["f_crit_hi"]) < 1.0
    # rollup rows follow the per-group rows
    assert "8bit-sa-regs" in by_group and "post-proc-regs" in by_group


def test_stats_json_roundtrip(tmp_path):
    path = tmp_path / "stats.json"
    write_stats_json(tiny_result().stats, path, meta={"sa": "2x2"})
    doc = json.loads(path.read_text())
    meta, groups = stats_from_dict(doc)
    assert meta == {"sa": "2x2"}
    assert groups["accum-reg"]["n"] == 1
    assert groups["w-reg"]["f_noncrit_lo"] <= groups["w-reg"]["f_noncrit"]


def test_render_stats_figure_svg(tmp_path):
    doc = stats_to_dict(tiny_result().stats, meta={})
    out = tmp_path / "fig.svg"
    render_stats_figure([("2x2", doc)], out)
    body = out.read_text()
    assert body.lstrip().startswith("<?xml")
    assert "<svg" in body


def test_render_multiple_docs_grouped(tmp_path):
    doc = stats_to_dict(tiny_result().stats, meta={})
    out = tmp_path / "fig.svg"
    render_stats_figure([("2x2", doc), ("4x4", doc)], out)
    assert "</svg>" in out.read_text()


def test_render_empty_stats(tmp_path):
    out = tmp_path / "fig.svg"
    render_stats_figure([], out)
    assert out.exists()


def test_campaign_to_files_end_to_end(tmp_path, fc3_fixture, sa22):
    model, images = fc3_fixture
    cfg = CampaignConfig(model=model, images=images[:2], sa=sa22,
                         iterations=8, seed=3, stratified=True, jobs=1)
    result = run_campaign(cfg)
    write_records_jsonl(result, tmp_path / "records.jsonl")
    write_stats_csv(result.stats, tmp_path / "stats.csv")
    lines = (tmp_path / "records.jsonl").read_text().splitlines()
    assert len(lines) == 2 + 16  # one golden line per image + records
