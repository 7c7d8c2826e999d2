#!/usr/bin/env python3
"""Synthetic sensitivity study: how injected effects surface in the scores.

Sweeps the injected climate effect and a biased judge's grant-propensity
offset over seeded corpora, reports seed-averaged score responses, then runs
the full CLI pipeline once on the largest scenario. Everything lands under
--output-dir.

Usage:
    python scripts/run_synthetic_study.py --output-dir study_out --seeds 5
"""

import argparse
import json
from pathlib import Path

import numpy as np

from courtaudit.cli import RunConfig, run_pipeline
from courtaudit.scoring import build_index, index_universe, score_corpus
from courtaudit.synth import ScenarioConfig, generate


def mean_scores(config: ScenarioConfig) -> tuple[float | None, float | None]:
    corpus = generate(config)
    table = score_corpus(corpus, build_index(index_universe(corpus)))
    return table.mean_gamma(), table.mean_omega()


def climate_sweep(seeds: int, cases: int) -> list[dict]:
    rows = []
    for d in (0.0, 0.1, 0.2, 0.3):
        gammas, omegas = [], []
        for seed in range(seeds):
            g, o = mean_scores(ScenarioConfig(n_cases=cases, seed=seed, climate_effect=d))
            gammas.append(g)
            omegas.append(o)
        rows.append(
            {
                "climate_effect": d,
                "mean_partisanship": float(np.mean(gammas)),
                "mean_disaggregated_consistency": float(np.mean(omegas)),
            }
        )
    return rows


def judge_bias_sweep(seeds: int, cases: int) -> list[dict]:
    rows = []
    for offset in (0.0, -0.15, -0.3):
        gaps = []
        for seed in range(seeds):
            cfg = ScenarioConfig(
                n_cases=cases,
                seed=seed,
                n_judges=10,
                judge_offsets=(offset,) + (0.0,) * 9,
                n_courts=1,
                n_nationalities=2,
                base_rate=0.65,
            )
            corpus = generate(cfg)
            table = score_corpus(corpus, build_index(index_universe(corpus)))
            phis = {j: table.phi_of(j) for j in table.judges}
            others = [v for j, v in phis.items() if j != "J000" and v is not None]
            gaps.append(phis["J000"] - float(np.median(others)))
        rows.append({"judge_offset": offset, "phi_gap_vs_median": float(np.mean(gaps))})
    return rows


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="study_out")
    parser.add_argument("--seeds", type=int, default=5)
    parser.add_argument("--cases", type=int, default=2500)
    args = parser.parse_args()
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)

    print("climate-effect sweep...")
    climate_rows = climate_sweep(args.seeds, args.cases)
    for row in climate_rows:
        print(f"  d={row['climate_effect']:.1f}  mean gamma={row['mean_partisanship']:.4f}")

    print("judge-bias sweep...")
    bias_rows = judge_bias_sweep(args.seeds, args.cases)
    for row in bias_rows:
        print(f"  offset={row['judge_offset']:+.2f}  phi gap={row['phi_gap_vs_median']:+.4f}")

    (outdir / "study_summary.json").write_text(
        json.dumps({"climate_sweep": climate_rows, "judge_bias_sweep": bias_rows}, indent=2)
        + "\n"
    )

    print("full pipeline on the strongest scenario...")
    sim_cfg = RunConfig(
        command="simulate",
        output_dir=str(outdir / "sim"),
        cases=max(args.cases * 4, 5000),
        seed=0,
        climate_effect=0.3,
    )
    _, sim_code = run_pipeline(sim_cfg)
    if sim_code != 0:
        return sim_code
    report_cfg = RunConfig(
        command="report",
        input=str(outdir / "sim" / "corpus.csv"),
        administrations=str(outdir / "sim" / "administrations.csv"),
        state_votes=str(outdir / "sim" / "state_votes.csv"),
        output_dir=str(outdir / "report"),
        replicates=10,
        sample_size=1000,
        plots=True,
    )
    _, code = run_pipeline(report_cfg)
    print(f"pipeline exit code {code}; artifacts in {outdir}/report")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
