#!/usr/bin/env python3
"""Scaling benchmark for cohort indexing and scoring.

Times build_index + score_corpus at increasing corpus sizes and reports
throughput and peak memory. The largest default size matches the
6,000,000-row performance gate in the acceptance suite.

Usage:
    python scripts/benchmark_scoring.py --sizes 100000 1000000 6000000
"""

import argparse
import resource
import time

from courtaudit.scoring import build_index, index_universe, score_corpus
from courtaudit.synth import ScenarioConfig, generate


def bench(n_cases: int) -> None:
    config = ScenarioConfig(
        n_cases=n_cases,
        n_judges=600,
        n_nationalities=60,
        n_courts=40,
        n_states=30,
        start_year=1981,
        end_year=2020,
        seed=3,
        climate_effect=0.1,
    )
    t0 = time.perf_counter()
    corpus = generate(config)
    t1 = time.perf_counter()
    index = build_index(index_universe(corpus))
    t2 = time.perf_counter()
    table = score_corpus(corpus, index)
    t3 = time.perf_counter()
    peak_gb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1e6
    rate = n_cases / (t3 - t1)
    print(
        f"{n_cases:>9,} rows | generate {t1 - t0:6.1f}s | index {t2 - t1:6.1f}s | "
        f"score {t3 - t2:6.1f}s | {rate:,.0f} rows/s | peak {peak_gb:.2f} GB | "
        f"cohorts {index.n_cohorts:,} | mean gamma {table.mean_gamma():.4f}"
    )


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--sizes", type=int, nargs="+", default=[100_000, 1_000_000, 6_000_000]
    )
    args = parser.parse_args()
    for n in args.sizes:
        bench(n)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
