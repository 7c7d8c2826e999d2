"""Subcommand front end: ingest, describe, score, correlate, predict, trend,
simulate, and a full-pipeline report.

Every run writes its artifacts under --output-dir plus a manifest.json
recording the command, parameters, and a sha256 per artifact, so a rerun
with identical inputs can be checked hash-for-hash. A failed stage leaves
partial outputs in place alongside a FAILED marker file and a nonzero exit
code. All randomness flows from --seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .ingest import (
    ColumnMapping,
    load_reference_tables,
    parse_corpus,
    read_canonical,
    write_canonical,
)
from .models import NON_REPRODUCIBLE_NOTE, predict_decision_suite, save_model, LinearModel
from .records import Decision, ProceedingRecord, ReferenceTables
from .scoring import ScoreTable, build_index, index_universe, score_corpus
from .stats import bag_importances, build_feature_matrix, prune_correlated, target_vector
from .synth import ScenarioConfig, generate, load_scenario, save_scenario, write_reference_tables
from .timeseries import (
    aggregate_weekly,
    cross_validate,
    decompose,
    fit_model,
    grid_search,
    residual_interval,
)

TARGET_CHOICES = (
    "partisanship",
    "cohort_consistency",
    "disaggregated_consistency",
    "decision",
    "president_party",
)


@dataclass
class RunConfig:
    """Flat bag of run parameters; defaults track the published settings."""

    command: str
    input: str | None = None
    output_dir: str = "out"
    mapping: str | None = None
    administrations: str | None = None
    state_votes: str | None = None
    scenario: str | None = None
    target: str = "partisanship"
    seed: int = 0
    threads: int = 1
    prune_threshold: float = 0.95
    alpha: float = 0.05
    changepoint_scale: float = 0.1
    seasonality_scale: float = 0.01
    n_changepoints: int = 25
    fourier_order: int = 3
    replicates: int = 50
    sample_size: int = 5000
    cases: int = 5000
    climate_effect: float = 0.0
    judge_weighted: bool = False
    count_weighted_weeks: bool = False
    grid: bool = False
    plots: bool = False


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _load_tables(cfg: RunConfig) -> ReferenceTables:
    return load_reference_tables(cfg.administrations, cfg.state_votes)


def _load_corpus(cfg: RunConfig) -> list[ProceedingRecord]:
    if cfg.input is None:
        raise ValueError("--input is required")
    records, _ = read_canonical(cfg.input, tables=_load_tables(cfg))
    return records


def describe_corpus(records: list[ProceedingRecord]) -> dict:
    """Yearly volumes/rates plus representation breakdowns over decided cases."""
    decided = [r for r in records if r.decided]
    if not decided:
        raise ValueError("empty corpus: nothing to describe")
    yearly: dict[int, dict] = {}
    for r in decided:
        y = yearly.setdefault(
            r.decision_date.year,
            {"cases": 0, "grants": 0, "rep_known": 0, "rep_true": 0},
        )
        y["cases"] += 1
        y["grants"] += r.decision is Decision.GRANT
        if r.represented is not None:
            y["rep_known"] += 1
            y["rep_true"] += r.represented

    custody: dict[tuple[bool, str], int] = {}
    durations: dict[bool, list[int]] = {True: [], False: []}
    for r in decided:
        if r.represented is None:
            continue
        cust = r.custody.value if r.custody else "unknown"
        custody[(r.represented, cust)] = custody.get((r.represented, cust), 0) + 1
        durations[r.represented].append(r.duration_days())

    return {
        "yearly": [
            {
                "year": year,
                "cases": v["cases"],
                "grants": v["grants"],
                "grant_rate": v["grants"] / v["cases"],
                "representation_rate": (
                    v["rep_true"] / v["rep_known"] if v["rep_known"] else None
                ),
            }
            for year, v in sorted(yearly.items())
        ],
        "representation_custody": [
            {"represented": rep, "custody": cust, "cases": n}
            for (rep, cust), n in sorted(custody.items())
        ],
        "representation_duration": [
            {
                "represented": rep,
                "cases": len(vals),
                "mean_days": float(np.mean(vals)) if vals else None,
                "median_days": float(np.median(vals)) if vals else None,
            }
            for rep, vals in sorted(durations.items())
        ],
    }


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join("" if v is None else str(v) for v in row) + "\n")


def stage_describe(records, outdir: Path) -> dict[str, Path]:
    report = describe_corpus(records)
    paths = {}
    paths["describe_yearly.csv"] = outdir / "describe_yearly.csv"
    _write_csv(
        paths["describe_yearly.csv"],
        ["year", "cases", "grants", "grant_rate", "representation_rate"],
        [
            [d["year"], d["cases"], d["grants"], d["grant_rate"], d["representation_rate"]]
            for d in report["yearly"]
        ],
    )
    paths["describe_representation_custody.csv"] = outdir / "describe_representation_custody.csv"
    _write_csv(
        paths["describe_representation_custody.csv"],
        ["represented", "custody", "cases"],
        [[d["represented"], d["custody"], d["cases"]] for d in report["representation_custody"]],
    )
    paths["describe_representation_duration.csv"] = outdir / "describe_representation_duration.csv"
    _write_csv(
        paths["describe_representation_duration.csv"],
        ["represented", "cases", "mean_days", "median_days"],
        [
            [d["represented"], d["cases"], d["mean_days"], d["median_days"]]
            for d in report["representation_duration"]
        ],
    )
    return paths


def stage_score(records, cfg: RunConfig, outdir: Path) -> tuple[ScoreTable, dict[str, Path]]:
    index = build_index(index_universe(records))
    table = score_corpus(records, index, judge_weighted=cfg.judge_weighted)
    paths = {
        "scores_proceedings.csv": outdir / "scores_proceedings.csv",
        "scores_judges.csv": outdir / "scores_judges.csv",
        "score_summary.json": outdir / "score_summary.json",
    }
    table.write_proceeding_csv(paths["scores_proceedings.csv"])
    table.write_judge_csv(paths["scores_judges.csv"])
    finite_phi = table.phi[np.isfinite(table.phi)]
    summary = {
        "proceedings_scored": len(table.proceeding_ids),
        "judges": len(table.judges),
        "mean_disaggregated_consistency": table.mean_omega(),
        "mean_partisanship": table.mean_gamma(),
        "mean_cohort_consistency": float(finite_phi.mean()) if len(finite_phi) else None,
        "judge_weighted": cfg.judge_weighted,
    }
    paths["score_summary.json"].write_text(json.dumps(summary, indent=2) + "\n")
    return table, paths


def stage_correlate(records, table, cfg: RunConfig, outdir: Path) -> dict[str, Path]:
    matrix = build_feature_matrix(records)
    target = target_vector(records, table, cfg.target)
    if cfg.target in ("decision",):
        keep = [i for i, n in enumerate(matrix.names) if n != "decision"]
        matrix = matrix.select(keep)
    pruned = prune_correlated(matrix, cfg.prune_threshold)
    summary = bag_importances(
        pruned,
        target,
        replicates=cfg.replicates,
        sample_size=cfg.sample_size,
        seed=cfg.seed,
        alpha=cfg.alpha,
        threads=cfg.threads,
    )
    paths = {
        "importances.csv": outdir / "importances.csv",
        "correlate_summary.json": outdir / "correlate_summary.json",
    }
    summary.write_csv(paths["importances.csv"])
    meta = {
        "target": cfg.target,
        "alpha": cfg.alpha,
        "bonferroni_m": summary.n_tests,
        "replicates": summary.replicates,
        "sample_size": cfg.sample_size,
        "prune_threshold": cfg.prune_threshold,
        "columns_before_prune": matrix.n_cols,
        "columns_after_prune": pruned.n_cols,
        "significant_features": [
            f for f, s in zip(summary.features, summary.significant) if s
        ],
    }
    paths["correlate_summary.json"].write_text(json.dumps(meta, indent=2) + "\n")
    return paths


def stage_predict(records, table, cfg: RunConfig, outdir: Path) -> dict[str, Path]:
    report = predict_decision_suite(table, records, seed=cfg.seed)
    paths = {"prediction_report.json": outdir / "prediction_report.json"}
    paths["prediction_report.json"].write_text(json.dumps(report, indent=2) + "\n")
    for entry in report["feature_sets"]:
        if entry.get("skipped", True):
            continue
        for kind, fitted in entry["models"].items():
            name = f"model_{entry['name'].replace('+', '_')}_{kind}.json"
            model = LinearModel(
                weights=np.asarray(list(fitted["weights"].values())),
                intercept=fitted["intercept"],
                kind=kind,
            )
            save_model(model, outdir / name, feature_names=entry["features"])
            paths[name] = outdir / name
    return paths


def stage_trend(records, table, cfg: RunConfig, outdir: Path) -> dict[str, Path]:
    series = aggregate_weekly(table, records)
    paths: dict[str, Path] = {}
    cells = None
    cs, ss = cfg.changepoint_scale, cfg.seasonality_scale
    cv = None
    if cfg.grid:
        result = grid_search(
            series,
            n_changepoints=cfg.n_changepoints,
            fourier_order=cfg.fourier_order,
            count_weighted=cfg.count_weighted_weeks,
            threads=cfg.threads,
        )
        cs, ss = result.changepoint_scale, result.seasonality_scale
        cv = result.metrics
        cells = result.cells
    else:
        try:
            cv = cross_validate(
                series,
                cs,
                ss,
                n_changepoints=cfg.n_changepoints,
                fourier_order=cfg.fourier_order,
                count_weighted=cfg.count_weighted_weeks,
            )
        except ValueError:
            cv = None  # not enough history; fit proceeds without CV metrics

    model = fit_model(
        series,
        changepoint_scale=cs,
        seasonality_scale=ss,
        n_changepoints=cfg.n_changepoints,
        fourier_order=cfg.fourier_order,
        count_weighted=cfg.count_weighted_weeks,
    )
    trend, seasonal, fitted = decompose(model, series.week_starts)
    lo, hi = residual_interval(model, series)
    paths["trend_decomposition.csv"] = outdir / "trend_decomposition.csv"
    _write_csv(
        paths["trend_decomposition.csv"],
        ["week_start", "actual", "trend", "seasonality", "fitted", "fitted_lower", "fitted_upper"],
        [
            [
                w.isoformat(),
                repr(float(a)),
                repr(float(t)),
                repr(float(s)),
                repr(float(f)),
                repr(float(f + lo)),
                repr(float(f + hi)),
            ]
            for w, a, t, s, f in zip(series.week_starts, series.values, trend, seasonal, fitted)
        ],
    )
    if cells is not None:
        paths["trend_cv.csv"] = outdir / "trend_cv.csv"
        _write_csv(
            paths["trend_cv.csv"],
            ["changepoint_scale", "seasonality_scale", "cv_rmse"],
            [[a, b, repr(c)] for a, b, c in cells],
        )
    summary = {
        "weeks": len(series),
        "changepoint_scale": cs,
        "seasonality_scale": ss,
        "grid_searched": cfg.grid,
        "count_weighted_weeks": cfg.count_weighted_weeks,
        "base_rate_per_span": model.k,
        "offset": model.m,
        "nonzero_changepoints": int(np.count_nonzero(model.deltas)),
        # descriptive in-sample residual-quantile band, 90% coverage
        "interval_offsets": [lo, hi],
        "interval_width": hi - lo,
        "cv": None
        if cv is None
        else {"rmse": cv.rmse, "mae": cv.mae, "r2": cv.r2, "folds": cv.folds},
    }
    paths["trend_summary.json"] = outdir / "trend_summary.json"
    paths["trend_summary.json"].write_text(json.dumps(summary, indent=2) + "\n")
    if cfg.plots:
        paths.update(_trend_plots(series, trend, seasonal, fitted, outdir))
    return paths


def _trend_plots(series, trend, seasonal, fitted, outdir: Path) -> dict[str, Path]:
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "courtaudit"  # reproducible ids
    import matplotlib.pyplot as plt

    paths = {}
    weeks = series.week_starts
    for name, draw in (
        ("trend.svg", lambda ax: ax.plot(weeks, trend, color="tab:red")),
        ("seasonality.svg", lambda ax: ax.plot(weeks, seasonal, color="tab:green")),
        (
            "fitted_vs_actual.svg",
            lambda ax: (
                ax.plot(weeks, series.values, ".", ms=2, alpha=0.5, label="weekly mean"),
                ax.plot(weeks, fitted, color="tab:red", label="fitted"),
                ax.legend(),
            ),
        ),
    ):
        fig, ax = plt.subplots(figsize=(8, 3))
        draw(ax)
        ax.set_xlabel("week")
        ax.set_ylabel(name.split(".")[0].replace("_", " "))
        fig.tight_layout()
        fig.savefig(outdir / name, metadata={"Date": None})
        plt.close(fig)
        paths[name] = outdir / name
    return paths


def stage_ingest(cfg: RunConfig, outdir: Path) -> dict[str, Path]:
    mapping = ColumnMapping.from_json(cfg.mapping) if cfg.mapping else None
    records, report = parse_corpus(cfg.input, mapping, tables=_load_tables(cfg))
    paths = {
        "corpus.csv": outdir / "corpus.csv",
        "ingest_report.json": outdir / "ingest_report.json",
    }
    write_canonical(records, paths["corpus.csv"])
    report.write_json(paths["ingest_report.json"])
    return paths


def stage_simulate(cfg: RunConfig, outdir: Path) -> dict[str, Path]:
    if cfg.scenario:
        scenario = load_scenario(cfg.scenario)
    else:
        scenario = ScenarioConfig(
            n_cases=cfg.cases, seed=cfg.seed, climate_effect=cfg.climate_effect
        )
    records = generate(scenario)
    tables = scenario.reference_tables()
    paths = {
        "corpus.csv": outdir / "corpus.csv",
        "administrations.csv": outdir / "administrations.csv",
        "state_votes.csv": outdir / "state_votes.csv",
        "scenario.json": outdir / "scenario.json",
    }
    write_canonical(records, paths["corpus.csv"])
    write_reference_tables(tables, paths["administrations.csv"], paths["state_votes.csv"])
    save_scenario(scenario, paths["scenario.json"])
    return paths


PIPELINE_STAGES = ("describe", "score", "correlate", "predict", "trend")


def run_pipeline(cfg: RunConfig) -> tuple[dict, int]:
    """Execute the requested stage(s), writing artifacts and a manifest.

    Returns (manifest, exit_code); exit code 0 only when every requested
    stage succeeded.
    """
    outdir = Path(cfg.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    manifest: dict = {
        "tool": f"courtaudit {__version__}",
        "command": cfg.command,
        "parameters": asdict(cfg),
        "non_reproducible_note": NON_REPRODUCIBLE_NOTE,
        "stages": [],
        "artifacts": {},
        "status": "ok",
    }
    artifacts: dict[str, Path] = {}
    code = 0
    try:
        if cfg.command == "ingest":
            artifacts.update(_run_stage(manifest, "ingest", lambda: stage_ingest(cfg, outdir)))
        elif cfg.command == "simulate":
            artifacts.update(_run_stage(manifest, "simulate", lambda: stage_simulate(cfg, outdir)))
        else:
            records: list[ProceedingRecord] = []
            artifacts.update(
                _run_stage(manifest, "load", lambda: _noting(records, _load_corpus(cfg)))
            )
            if cfg.command == "report":
                wanted = list(PIPELINE_STAGES)
            elif cfg.command in ("correlate", "predict", "trend"):
                wanted = ["score", cfg.command]  # scores are inputs downstream
            else:
                wanted = [cfg.command]
            table: ScoreTable | None = None
            for stage in wanted:
                if stage == "describe":
                    artifacts.update(
                        _run_stage(manifest, stage, lambda: stage_describe(records, outdir))
                    )
                elif stage == "score":
                    def scored():
                        nonlocal table
                        table, paths = stage_score(records, cfg, outdir)
                        return paths

                    artifacts.update(_run_stage(manifest, stage, scored))
                elif stage == "correlate":
                    artifacts.update(
                        _run_stage(
                            manifest, stage, lambda: stage_correlate(records, table, cfg, outdir)
                        )
                    )
                elif stage == "predict":
                    artifacts.update(
                        _run_stage(
                            manifest, stage, lambda: stage_predict(records, table, cfg, outdir)
                        )
                    )
                elif stage == "trend":
                    artifacts.update(
                        _run_stage(
                            manifest, stage, lambda: stage_trend(records, table, cfg, outdir)
                        )
                    )
    except StageError as exc:
        manifest["status"] = "failed"
        manifest["error"] = str(exc)
        (outdir / "FAILED").write_text(str(exc) + "\n", encoding="utf-8")
        print(f"error: {exc}", file=sys.stderr)
        code = 1

    manifest["artifacts"] = {name: _sha256(path) for name, path in sorted(artifacts.items())}
    (outdir / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest, code


def _noting(sink: list, loaded: list) -> dict[str, Path]:
    sink.extend(loaded)
    return {}


def _run_stage(manifest: dict, stage: str, fn) -> dict[str, Path]:
    try:
        paths = fn()
    except Exception as exc:  # noqa: BLE001 - stage boundary converts to tagged error
        manifest["stages"].append({"name": stage, "status": "failed"})
        raise StageError(stage, exc) from exc
    manifest["stages"].append({"name": stage, "status": "ok"})
    return paths


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="courtaudit",
        description="Quantify individual and systemic decision variability in adjudication data.",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, needs_input: bool = True) -> None:
        if needs_input:
            p.add_argument("--input", required=True, help="corpus CSV (canonical format)")
        p.add_argument("--output-dir", default="out")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--administrations", help="administrations CSV (default: shipped)")
        p.add_argument("--state-votes", help="state votes CSV (default: shipped)")

    p = sub.add_parser("ingest", help="parse a raw CSV into the canonical corpus format")
    common(p)
    p.add_argument("--mapping", help="column-mapping JSON (default: canonical headers)")

    p = sub.add_parser("describe", help="per-year volumes, grant and representation rates")
    common(p)

    p = sub.add_parser("score", help="compute consistency and partisanship scores")
    common(p)
    p.add_argument("--judge-weighted", action="store_true",
                   help="weight omega per counterfactual judge rather than per proceeding")

    p = sub.add_parser("correlate", help="bagged forest importances against a target")
    common(p)
    p.add_argument("--target", choices=TARGET_CHOICES, default="partisanship")
    p.add_argument("--prune-threshold", type=float, default=0.95)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--sample-size", type=int, default=5000)

    p = sub.add_parser("predict", help="decision prediction from score combinations")
    common(p)

    p = sub.add_parser("trend", help="weekly partisanship trend decomposition")
    common(p)
    p.add_argument("--changepoint-scale", type=float, default=0.1)
    p.add_argument("--seasonality-scale", type=float, default=0.01)
    p.add_argument("--n-changepoints", type=int, default=25)
    p.add_argument("--fourier-order", type=int, default=3)
    p.add_argument("--grid-search", dest="grid", action="store_true")
    p.add_argument("--count-weighted-weeks", action="store_true")
    p.add_argument("--plots", action="store_true", help="also write SVG charts")

    p = sub.add_parser("simulate", help="generate a synthetic corpus + reference tables")
    common(p, needs_input=False)
    p.add_argument("--scenario", help="scenario JSON (default: built-in demo scenario)")
    p.add_argument("--cases", type=int, default=5000)
    p.add_argument("--climate-effect", type=float, default=0.0)

    p = sub.add_parser("report", help="full pipeline: describe, score, correlate, predict, trend")
    common(p)
    p.add_argument("--target", choices=TARGET_CHOICES, default="partisanship")
    p.add_argument("--prune-threshold", type=float, default=0.95)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--sample-size", type=int, default=5000)
    p.add_argument("--changepoint-scale", type=float, default=0.1)
    p.add_argument("--seasonality-scale", type=float, default=0.01)
    p.add_argument("--n-changepoints", type=int, default=25)
    p.add_argument("--fourier-order", type=int, default=3)
    p.add_argument("--grid-search", dest="grid", action="store_true")
    p.add_argument("--judge-weighted", action="store_true")
    p.add_argument("--count-weighted-weeks", action="store_true")
    p.add_argument("--plots", action="store_true")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {f for f in RunConfig.__dataclass_fields__}
    values = {k: v for k, v in vars(args).items() if k in fields and v is not None}
    return RunConfig(**values)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = config_from_args(args)
    _, code = run_pipeline(cfg)
    return code


if __name__ == "__main__":
    sys.exit(main())
