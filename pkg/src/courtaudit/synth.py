"""Deterministic synthetic corpora with injectable effects, plus naive oracles.

The generator draws each decision as Bernoulli(base_rate + judge offset +
climate shift), clamped to [0, 1]. The climate shift applies while a
PartyA administration sits, so a nonzero ``climate_effect`` links decisions
to climate and should surface as partisanship. The oracle recomputes every
score by literal pairwise enumeration of the counterfactual definitions; it
shares no indexing machinery with the production scorer, which is what
makes index-vs-oracle equality a meaningful check.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from .records import (
    ClimateKey,
    Custody,
    Decision,
    Party,
    ProceedingRecord,
    ReferenceTables,
    year_bin,
)
from .scoring import ScoreTable

ORACLE_MAX_RECORDS = 20_000

_CLIMATES = (
    ClimateKey(Party.A, Party.A),
    ClimateKey(Party.A, Party.B),
    ClimateKey(Party.B, Party.A),
    ClimateKey(Party.B, Party.B),
)
_CUSTODIES = (Custody.DETAINED, Custody.RELEASED, Custody.NEVER_DETAINED)


@dataclass(frozen=True)
class ScenarioConfig:
    """Ground-truth scenario for a synthetic corpus.

    Administrations alternate PartyA/PartyB every ``admin_period_years``
    starting at ``start_year``; presidential elections run every
    ``election_period_years`` with state ``s`` leaning PartyA in election
    ``k`` when ``(s + k)`` is even, so cohorts span several climates.
    """

    n_cases: int
    n_judges: int = 12
    judge_offsets: tuple[float, ...] | None = None
    n_nationalities: int = 4
    n_courts: int = 3
    n_states: int = 2
    start_year: int = 1985
    end_year: int = 2004
    admin_period_years: int = 4
    election_period_years: int = 4
    base_rate: float = 0.3
    climate_effect: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_cases < 1:
            raise ValueError("scenario needs at least one case")
        if self.judge_offsets is not None and len(self.judge_offsets) != self.n_judges:
            raise ValueError("judge_offsets length must equal n_judges")
        if self.start_year < 1980 or self.end_year < self.start_year:
            raise ValueError("year range must lie within the analysis range")

    def offsets(self) -> np.ndarray:
        if self.judge_offsets is None:
            return np.zeros(self.n_judges)
        return np.asarray(self.judge_offsets, dtype=float)

    def reference_tables(self) -> ReferenceTables:
        period = self.admin_period_years
        admins = []
        y = self.start_year
        i = 0
        while y <= self.end_year:
            admins.append(
                (date(y, 1, 1), date(y + period, 1, 1), Party.A if i % 2 == 0 else Party.B)
            )
            y += period
            i += 1
        votes: dict[tuple[str, int], Party] = {}
        first_election = self.start_year - self.election_period_years
        for k, year in enumerate(
            range(first_election, self.end_year + 1, self.election_period_years)
        ):
            for s in range(self.n_states):
                votes[(f"S{s:02d}", year)] = Party.A if (s + k) % 2 == 0 else Party.B
        return ReferenceTables(administrations=tuple(admins), state_votes=votes)


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    data = asdict(config)
    Path(path).write_text(json.dumps(data, indent=2) + "\n", encoding="utf-8")


def load_scenario(path: str | Path) -> ScenarioConfig:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("judge_offsets") is not None:
        data["judge_offsets"] = tuple(data["judge_offsets"])
    return ScenarioConfig(**data)


def generate(config: ScenarioConfig) -> list[ProceedingRecord]:
    """Draw a corpus; identical config and seed give an identical corpus."""
    rng = np.random.default_rng(config.seed)
    n = config.n_cases
    offsets = config.offsets()

    base_day = date(config.start_year, 1, 1)
    total_days = (date(config.end_year, 12, 31) - base_day).days + 1
    decision_offsets = rng.integers(0, total_days, size=n)
    durations = rng.integers(30, 900, size=n)

    judge_idx = rng.integers(0, config.n_judges, size=n)
    nat_idx = rng.integers(0, config.n_nationalities, size=n)
    court_idx = rng.integers(0, config.n_courts, size=n)
    state_idx = rng.integers(0, config.n_states, size=n)
    rep_draw = rng.random(size=n)
    custody_idx = rng.integers(0, len(_CUSTODIES), size=n)
    decision_draw = rng.random(size=n)

    years = np.asarray(
        [(base_day + timedelta(days=int(d))).year for d in np.unique(decision_offsets)]
    )
    year_of_offset = dict(zip(np.unique(decision_offsets).tolist(), years.tolist()))
    decision_years = np.fromiter(
        (year_of_offset[int(d)] for d in decision_offsets), dtype=np.int64, count=n
    )

    # Climate, vectorized to match resolve_climate() on the scenario tables.
    admin_ordinal = (decision_years - config.start_year) // config.admin_period_years
    president_b = (admin_ordinal % 2).astype(np.int64)
    first_election = config.start_year - config.election_period_years
    election_ordinal = (decision_years - 1 - first_election) // config.election_period_years
    leaning_b = ((state_idx + election_ordinal) % 2).astype(np.int64)
    climate_idx = president_b * 2 + leaning_b

    p = np.clip(
        config.base_rate
        + offsets[judge_idx]
        + np.where(president_b == 0, config.climate_effect, 0.0),
        0.0,
        1.0,
    )
    granted = decision_draw < p

    judges = [f"J{j:03d}" for j in range(config.n_judges)]
    nats = [f"N{k:02d}" for k in range(config.n_nationalities)]
    courts = [f"C{k:02d}" for k in range(config.n_courts)]
    states = [f"S{k:02d}" for k in range(config.n_states)]
    day_pool = [base_day + timedelta(days=k) for k in range(total_days)]
    floor_day = date(1980, 1, 1)
    charge_pool: dict[int, date] = {}

    records: list[ProceedingRecord] = []
    append = records.append
    for i in range(n):
        off = int(decision_offsets[i])
        decision_day = day_pool[off]
        charge_off = off - int(durations[i])
        charge_day = charge_pool.get(charge_off)
        if charge_day is None:
            charge_day = max(base_day + timedelta(days=charge_off), floor_day)
            charge_pool[charge_off] = charge_day
        append(
            ProceedingRecord(
                proceeding_id=f"P{i:07d}",
                judge_id=judges[judge_idx[i]],
                nationality=nats[nat_idx[i]],
                court_id=courts[court_idx[i]],
                state=states[state_idx[i]],
                charge_date=charge_day,
                decision_date=decision_day,
                decision=Decision.GRANT if granted[i] else Decision.DENY,
                represented=bool(rep_draw[i] < 0.45),
                custody=_CUSTODIES[custody_idx[i]],
                climate=_CLIMATES[climate_idx[i]],
            )
        )
    return records


def write_reference_tables(tables: ReferenceTables, admin_path, votes_path) -> None:
    with open(admin_path, "w", encoding="utf-8") as f:
        f.write("start_date,end_date,party\n")
        for start, end, party in tables.administrations:
            f.write(f"{start.isoformat()},{end.isoformat()},{party.value}\n")
    with open(votes_path, "w", encoding="utf-8") as f:
        f.write("state,election_year,party\n")
        for (state, year), party in sorted(tables.state_votes.items()):
            f.write(f"{state},{year},{party.value}\n")


def shuffle_decisions(records: list[ProceedingRecord], seed: int) -> list[ProceedingRecord]:
    """Control corpus: same records, decisions randomly permuted across them."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(records))
    shuffled = []
    for rec, k in zip(records, perm):
        src = records[int(k)]
        shuffled.append(
            ProceedingRecord(
                proceeding_id=rec.proceeding_id,
                judge_id=rec.judge_id,
                nationality=rec.nationality,
                court_id=rec.court_id,
                state=rec.state,
                charge_date=rec.charge_date,
                decision_date=rec.decision_date,
                decision=src.decision,
                represented=rec.represented,
                custody=rec.custody,
                covariates=rec.covariates,
                climate=rec.climate,
            )
        )
    return shuffled


def oracle_scores(records: list[ProceedingRecord]) -> ScoreTable:
    """Score a small corpus by literal enumeration of the counterfactual sets.

    Intentionally naive: every score walks the whole corpus and applies the
    membership tests pairwise. Refuses corpora above
    ``ORACLE_MAX_RECORDS`` (quadratic cost).
    """
    if len(records) > ORACLE_MAX_RECORDS:
        raise ValueError(f"oracle refuses corpora above {ORACLE_MAX_RECORDS} records")
    decided = [r for r in records if r.decided]

    # Counterfactual universe: decided proceedings with a known judge.
    universe = [r for r in decided if r.judge_id is not None]
    u_nat = [r.nationality for r in universe]
    u_court = [r.court_id for r in universe]
    u_bin = [year_bin(r.decision_date) for r in universe]
    u_judge = [r.judge_id for r in universe]
    u_clim = [r.climate for r in universe]
    u_grant = [r.decision is Decision.GRANT for r in universe]
    m = len(universe)

    omega = np.full(len(decided), np.nan)
    gamma = np.full(len(decided), np.nan)
    for i, rec in enumerate(decided):
        nat = rec.nationality
        court = rec.court_id
        ybin = year_bin(rec.decision_date)
        grant = rec.decision is Decision.GRANT
        judge = rec.judge_id
        clim = rec.climate

        if judge is not None:
            agree = total = 0
            for k in range(m):
                if u_nat[k] != nat or u_court[k] != court or u_bin[k] != ybin:
                    continue
                if u_judge[k] == judge:
                    continue
                total += 1
                if u_grant[k] == grant:
                    agree += 1
            if total:
                omega[i] = agree / total

        if clim is not None:
            opposite = total = 0
            for k in range(m):
                if u_nat[k] != nat or u_court[k] != court or u_bin[k] != ybin:
                    continue
                other = u_clim[k]
                if other is None or other == clim:
                    continue
                total += 1
                if u_grant[k] != grant:
                    opposite += 1
            if total:
                gamma[i] = opposite / total

    judges: list[str] = []
    seen: set[str] = set()
    for r in decided:
        if r.judge_id is not None and r.judge_id not in seen:
            seen.add(r.judge_id)
            judges.append(r.judge_id)
    phi = np.full(len(judges), np.nan)
    counts = np.zeros(len(judges), dtype=np.int64)
    for k, judge in enumerate(judges):
        vals = [
            omega[i]
            for i, r in enumerate(decided)
            if r.judge_id == judge and not math.isnan(omega[i])
        ]
        counts[k] = len(vals)
        if vals:
            phi[k] = float(np.sum(np.sort(np.asarray(vals))) / len(vals))

    return ScoreTable(
        proceeding_ids=[r.proceeding_id for r in decided],
        record_judges=[r.judge_id for r in decided],
        omega=omega,
        gamma=gamma,
        judges=judges,
        phi=phi,
        scored_case_count=counts,
    )
