import json
from datetime import date

import pytest

from courtaudit.cli import RunConfig, describe_corpus, main, run_pipeline
from courtaudit.ingest import CANONICAL_COLUMNS, read_canonical, write_canonical
from courtaudit.records import Decision, ProceedingRecord
from courtaudit.synth import ScenarioConfig, generate


def simulate_into(tmp_path, cases=1200, seed=3, climate_effect=0.2):
    outdir = tmp_path / "sim"
    code = main(
        [
            "simulate",
            "--output-dir",
            str(outdir),
            "--cases",
            str(cases),
            "--seed",
            str(seed),
            "--climate-effect",
            str(climate_effect),
        ]
    )
    assert code == 0
    return outdir


def corpus_args(simdir):
    return [
        "--input",
        str(simdir / "corpus.csv"),
        "--administrations",
        str(simdir / "administrations.csv"),
        "--state-votes",
        str(simdir / "state_votes.csv"),
    ]


def test_simulate_writes_corpus_tables_scenario_manifest(tmp_path):
    outdir = simulate_into(tmp_path)
    for name in ("corpus.csv", "administrations.csv", "state_votes.csv", "scenario.json", "manifest.json"):
        assert (outdir / name).exists()
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["status"] == "ok"
    assert set(manifest["artifacts"]) >= {"corpus.csv", "scenario.json"}


def test_score_subcommand(tmp_path):
    simdir = simulate_into(tmp_path)
    outdir = tmp_path / "scores"
    code = main(["score", *corpus_args(simdir), "--output-dir", str(outdir)])
    assert code == 0
    summary = json.loads((outdir / "score_summary.json").read_text())
    assert summary["proceedings_scored"] == 1200
    assert 0.0 <= summary["mean_partisanship"] <= 1.0
    lines = (outdir / "scores_proceedings.csv").read_text().splitlines()
    assert lines[0] == "proceeding_id,omega,gamma"
    assert len(lines) == 1201

    jw_dir = tmp_path / "scores_jw"
    code = main(
        ["score", *corpus_args(simdir), "--output-dir", str(jw_dir), "--judge-weighted"]
    )
    assert code == 0
    jw_summary = json.loads((jw_dir / "score_summary.json").read_text())
    assert jw_summary["judge_weighted"] is True
    assert jw_summary["mean_partisanship"] == summary["mean_partisanship"]  # gamma unchanged
    assert jw_summary["mean_disaggregated_consistency"] != summary[
        "mean_disaggregated_consistency"
    ]


def test_describe_subcommand_and_duration_example(tmp_path):
    records = [
        ProceedingRecord(
            proceeding_id="p1",
            judge_id="J1",
            nationality="MX",
            court_id="DAL",
            state="TX",
            charge_date=date(2020, 1, 1),
            decision_date=date(2020, 1, 31),
            decision=Decision.GRANT,
            represented=True,
        )
    ]
    report = describe_corpus(records)
    assert report["yearly"] == [
        {
            "year": 2020,
            "cases": 1,
            "grants": 1,
            "grant_rate": 1.0,
            "representation_rate": 1.0,
        }
    ]
    rep_true = [d for d in report["representation_duration"] if d["represented"]][0]
    assert rep_true["mean_days"] == 30.0

    corpus_path = tmp_path / "one.csv"
    write_canonical(records, corpus_path)
    outdir = tmp_path / "desc"
    assert main(["describe", "--input", str(corpus_path), "--output-dir", str(outdir)]) == 0
    yearly = (outdir / "describe_yearly.csv").read_text().splitlines()
    assert yearly[1].startswith("2020,1,1,1.0")


def test_describe_matches_generator_bookkeeping(tmp_path):
    corpus = generate(ScenarioConfig(n_cases=700, seed=8))
    report = describe_corpus(corpus)
    by_year = {}
    for r in corpus:
        by_year.setdefault(r.decision_date.year, []).append(r)
    for row in report["yearly"]:
        group = by_year[row["year"]]
        assert row["cases"] == len(group)
        assert row["grants"] == sum(r.decision is Decision.GRANT for r in group)


def test_describe_empty_corpus_errors():
    with pytest.raises(ValueError):
        describe_corpus([])


def test_predict_subcommand_writes_report_and_models(tmp_path):
    simdir = simulate_into(tmp_path)
    outdir = tmp_path / "pred"
    code = main(["predict", *corpus_args(simdir), "--output-dir", str(outdir)])
    assert code == 0
    report = json.loads((outdir / "prediction_report.json").read_text())
    assert "leakage" in json.dumps(report).lower() or "predictors" in report["leakage_warning"]
    assert "EOIR" in report["non_reproducible_note"]
    fitted = [e for e in report["feature_sets"] if not e.get("skipped")]
    assert fitted, "expected at least one fitted feature set"
    assert (outdir / "model_partisanship_logistic.json").exists()


def test_trend_subcommand(tmp_path):
    simdir = simulate_into(tmp_path, cases=2500, seed=5)
    outdir = tmp_path / "trend"
    code = main(["trend", *corpus_args(simdir), "--output-dir", str(outdir)])
    assert code == 0
    decomposition = (outdir / "trend_decomposition.csv").read_text().splitlines()
    assert decomposition[0] == (
        "week_start,actual,trend,seasonality,fitted,fitted_lower,fitted_upper"
    )
    summary = json.loads((outdir / "trend_summary.json").read_text())
    assert summary["changepoint_scale"] == 0.1
    assert summary["seasonality_scale"] == 0.01
    assert summary["interval_width"] >= 0.0


def test_correlate_subcommand_reports_m(tmp_path):
    simdir = simulate_into(tmp_path, cases=900)
    outdir = tmp_path / "corr"
    code = main(
        [
            "correlate",
            *corpus_args(simdir),
            "--output-dir",
            str(outdir),
            "--replicates",
            "5",
            "--sample-size",
            "300",
        ]
    )
    assert code == 0
    summary = json.loads((outdir / "correlate_summary.json").read_text())
    assert summary["bonferroni_m"] == summary["columns_after_prune"]
    assert summary["alpha"] == 0.05
    header = (outdir / "importances.csv").read_text().splitlines()[0]
    assert header == "feature,mean,std,coefficient,p,significant"


def test_report_runs_all_stages_and_is_reproducible(tmp_path):
    simdir = simulate_into(tmp_path, cases=1500, seed=7)
    args = [
        "report",
        *corpus_args(simdir),
        "--replicates",
        "4",
        "--sample-size",
        "400",
    ]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(args + ["--output-dir", str(out1)]) == 0
    assert main(args + ["--output-dir", str(out2)]) == 0
    m1 = json.loads((out1 / "manifest.json").read_text())
    m2 = json.loads((out2 / "manifest.json").read_text())
    assert [s["name"] for s in m1["stages"]] == [
        "load",
        "describe",
        "score",
        "correlate",
        "predict",
        "trend",
    ]
    assert all(s["status"] == "ok" for s in m1["stages"])
    assert m1["artifacts"] == m2["artifacts"]  # identical content hashes
    assert not (out1 / "FAILED").exists()


def test_failure_leaves_marker_and_nonzero_exit(tmp_path):
    # a one-row corpus cannot support the trend stage: too few weeks
    records = generate(ScenarioConfig(n_cases=3, seed=1))
    corpus_path = tmp_path / "tiny.csv"
    write_canonical(records, corpus_path)
    outdir = tmp_path / "fail"
    code = main(["trend", "--input", str(corpus_path), "--output-dir", str(outdir)])
    assert code == 1
    assert (outdir / "FAILED").exists()
    manifest = json.loads((outdir / "manifest.json").read_text())
    assert manifest["status"] == "failed"
    assert "[trend]" in manifest["error"] or "[score]" in manifest["error"]


def test_ingest_subcommand_with_mapping(tmp_path):
    raw = tmp_path / "raw.csv"
    raw.write_text(
        "ID,JUDGE,NAT,COURT,ST,FILED,DONE,RESULT\n"
        "c1,J1,MX,DAL,TX,1994-02-03,1995-04-05,G\n"
        "c2,J2,CN,NYC,NY,1996-02-03,bad-date,D\n",
        encoding="utf-8",
    )
    mapping = tmp_path / "mapping.json"
    mapping.write_text(
        json.dumps(
            {
                "proceeding_id": "ID",
                "judge_id": "JUDGE",
                "nationality": "NAT",
                "court_id": "COURT",
                "state": "ST",
                "charge_date": "FILED",
                "decision_date": "DONE",
                "decision": "RESULT",
            }
        ),
        encoding="utf-8",
    )
    outdir = tmp_path / "ing"
    code = main(
        ["ingest", "--input", str(raw), "--mapping", str(mapping), "--output-dir", str(outdir)]
    )
    assert code == 0
    report = json.loads((outdir / "ingest_report.json").read_text())
    assert report["accepted"] == 1 and report["rejected"] == 1
    parsed, _ = read_canonical(outdir / "corpus.csv")
    assert parsed[0].proceeding_id == "c1"
    assert parsed[0].decision is Decision.GRANT
    header = (outdir / "corpus.csv").read_text().splitlines()[0]
    assert header == ",".join(CANONICAL_COLUMNS)


def test_exit_code_zero_iff_all_stages_succeed(tmp_path):
    simdir = simulate_into(tmp_path, cases=400)
    cfg = RunConfig(
        command="describe",
        input=str(simdir / "corpus.csv"),
        output_dir=str(tmp_path / "ok"),
    )
    manifest, code = run_pipeline(cfg)
    assert code == 0 and manifest["status"] == "ok"
    cfg_bad = RunConfig(
        command="describe", input=str(tmp_path / "missing.csv"), output_dir=str(tmp_path / "bad")
    )
    manifest, code = run_pipeline(cfg_bad)
    assert code == 1 and manifest["status"] == "failed"
    assert manifest["stages"] == [{"name": "load", "status": "failed"}]
    assert (tmp_path / "bad" / "FAILED").exists()
