"""Cohort indexing and counterfactual decision-variability scores.

Three scores are produced over a corpus of decided proceedings:

* omega, disaggregated consistency: for one proceeding, the fraction of
  same-cohort proceedings heard by *other* judges that reached the same
  decision.
* phi, cohort consistency: a judge's mean omega over their scored cases.
* gamma, partisanship: for one proceeding, the fraction of same-cohort
  proceedings decided under a *different* political climate that reached
  the opposite decision.

The counterfactual universe is the set of decided proceedings with a known
judge; a proceeding never qualifies as its own counterfactual (its judge
equals its judge, its climate equals its climate). Empty counterfactual
sets yield null, never 0 or 1, and nulls propagate out of means.

The index stores integer tallies, not record lists, so each score is O(1)
arithmetic on (cohort totals, per-judge tallies, per-climate tallies). The
index is immutable after construction and scoring is a deterministic map
over records, so both are safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .records import (
    BIN_ANCHOR_YEAR,
    BIN_WIDTH_YEARS,
    ClimateKey,
    Decision,
    OutOfRangeError,
    Party,
    ProceedingRecord,
)

N_CLIMATES = 4  # (president_party, state_leaning) over two parties


class CorpusMismatchError(RuntimeError):
    """A record being scored is absent from the index it claims to belong to."""


def climate_code(climate: ClimateKey) -> int:
    return 2 * (climate.president_party is Party.B) + (climate.state_leaning is Party.B)


def index_universe(records: Sequence[ProceedingRecord]) -> list[ProceedingRecord]:
    """Records eligible to serve as counterfactuals: decided, judge known."""
    return [r for r in records if r.decided and r.judge_id is not None]


def _factor_strings(values: list) -> tuple[np.ndarray, list]:
    codes = np.empty(len(values), dtype=np.int64)
    table: dict = {}
    get = table.get
    for i, v in enumerate(values):
        code = get(v)
        if code is None:
            code = len(table)
            table[v] = code
        codes[i] = code
    return codes, list(table)


def _cohort_inverse(records: Sequence[ProceedingRecord]) -> tuple[list[tuple], np.ndarray]:
    """Factor records into cohort triples (nationality, court, year_bin)."""
    n = len(records)
    if n == 0:
        return [], np.empty(0, dtype=np.int64)
    years = np.fromiter((r.decision_date.year for r in records), dtype=np.int64, count=n)
    if years.min() < BIN_ANCHOR_YEAR:
        raise OutOfRangeError("decision dates before 1980 cannot be binned")
    bin_idx = (years - BIN_ANCHOR_YEAR) // BIN_WIDTH_YEARS
    nat_codes, nat_pool = _factor_strings([r.nationality for r in records])
    court_codes, court_pool = _factor_strings([r.court_id for r in records])
    n_bins = int(bin_idx.max()) + 1
    combined = (nat_codes * len(court_pool) + court_codes) * n_bins + bin_idx
    uniq, inverse = np.unique(combined, return_inverse=True)
    rest, bins_u = np.divmod(uniq, n_bins)
    nat_u, court_u = np.divmod(rest, len(court_pool))
    triples = [
        (nat_pool[a], court_pool[b], BIN_ANCHOR_YEAR + BIN_WIDTH_YEARS * int(c))
        for a, b, c in zip(nat_u, court_u, bins_u)
    ]
    return triples, inverse


def _decisions(records: Sequence[ProceedingRecord]) -> np.ndarray:
    # 1 = grant, 0 = deny; column index of every tally array.
    return np.fromiter(
        (r.decision is Decision.GRANT for r in records), dtype=np.int64, count=len(records)
    )


def _climate_codes(records: Sequence[ProceedingRecord]) -> np.ndarray:
    codes = np.empty(len(records), dtype=np.int64)
    for i, r in enumerate(records):
        codes[i] = -1 if r.climate is None else climate_code(r.climate)
    return codes


@dataclass(frozen=True)
class CohortIndex:
    """Immutable tallies over the counterfactual universe.

    ``totals[c, d]`` counts cohort ``c``'s decisions of kind ``d`` (0 deny,
    1 grant); ``pair_counts[p]`` the same for one (cohort, judge) pair; and
    ``climate_counts[c, k, d]`` restricts to climate-resolved proceedings
    with climate code ``k``. Per-judge counts therefore sum to cohort
    totals, and per-climate counts sum to the climate-resolved subtotal.
    """

    cohort_ids: Mapping[tuple[str, str, int], int]
    totals: np.ndarray
    pair_ids: Mapping[tuple[int, str], int]
    pair_counts: np.ndarray
    pair_cohorts: np.ndarray
    climate_counts: np.ndarray

    @property
    def n_cohorts(self) -> int:
        return self.totals.shape[0]

    def cohort_of(self, record: ProceedingRecord) -> int | None:
        key = record.cohort_key()
        if key is None:
            return None
        return self.cohort_ids.get((key.nationality, key.court_id, key.year_bin))


def build_index(records: Sequence[ProceedingRecord]) -> CohortIndex:
    """Tally the counterfactual universe in one pass.

    Callers pass decided records with judge and cohort fields present (see
    :func:`index_universe`); anything else raises. An empty input yields an
    empty index.
    """
    for r in records:
        if not r.decided:
            raise ValueError(f"pending proceeding {r.proceeding_id} cannot be indexed")
        if r.judge_id is None:
            raise ValueError(f"proceeding {r.proceeding_id} lacks a judge and cannot be indexed")

    triples, inverse = _cohort_inverse(records)
    n_cohorts = len(triples)
    dec = _decisions(records)
    totals = np.bincount(inverse * 2 + dec, minlength=2 * n_cohorts).reshape(-1, 2)

    judge_codes, judge_pool = _factor_strings([r.judge_id for r in records])
    n_judges = max(len(judge_pool), 1)
    pair_code = inverse * n_judges + judge_codes
    uniq_pairs, pair_inverse = np.unique(pair_code, return_inverse=True)
    pair_counts = np.bincount(pair_inverse * 2 + dec, minlength=2 * len(uniq_pairs)).reshape(-1, 2)
    pair_cohorts = uniq_pairs // n_judges
    pair_ids = {
        (int(pc // n_judges), judge_pool[int(pc % n_judges)]): i
        for i, pc in enumerate(uniq_pairs)
    }

    clim = _climate_codes(records)
    mask = clim >= 0
    climate_counts = np.bincount(
        (inverse[mask] * N_CLIMATES + clim[mask]) * 2 + dec[mask],
        minlength=2 * N_CLIMATES * n_cohorts,
    ).reshape(n_cohorts, N_CLIMATES, 2)

    for arr in (totals, pair_counts, pair_cohorts, climate_counts):
        arr.setflags(write=False)
    return CohortIndex(
        cohort_ids=MappingProxyType({t: i for i, t in enumerate(triples)}),
        totals=totals,
        pair_ids=MappingProxyType(pair_ids),
        pair_counts=pair_counts,
        pair_cohorts=pair_cohorts,
        climate_counts=climate_counts,
    )


def _require_cohort(record: ProceedingRecord, index: CohortIndex) -> int | None:
    c = index.cohort_of(record)
    if c is None and record.judge_id is not None:
        raise CorpusMismatchError(
            f"proceeding {record.proceeding_id} is not covered by this index"
        )
    return c


def disaggregated_consistency(record: ProceedingRecord, index: CohortIndex) -> float | None:
    """Fraction of other-judge cohort proceedings sharing the record's decision.

    Null when the record has no judge or when no other judge heard a case in
    the cohort. A judged record whose (cohort, judge) pair is missing from
    the index signals a corpus mismatch and raises.
    """
    if not record.decided:
        raise ValueError("pending proceedings are not scored")
    if record.judge_id is None:
        return None
    c = _require_cohort(record, index)
    p = index.pair_ids.get((c, record.judge_id))
    if p is None:
        raise CorpusMismatchError(
            f"judge {record.judge_id} has no indexed cases in {record.proceeding_id}'s cohort"
        )
    d = int(record.decision is Decision.GRANT)
    agree = int(index.totals[c, d]) - int(index.pair_counts[p, d])
    total = int(index.totals[c].sum()) - int(index.pair_counts[p].sum())
    if total == 0:
        return None
    return agree / total


def partisanship(record: ProceedingRecord, index: CohortIndex) -> float | None:
    """Fraction of different-climate cohort proceedings with the opposite decision.

    Null when the record's climate is unresolved or when every indexed
    cohort proceeding shares its climate.
    """
    if not record.decided:
        raise ValueError("pending proceedings are not scored")
    if record.climate is None:
        return None
    c = _require_cohort(record, index)
    if c is None:
        return None
    counts = index.climate_counts[c]
    code = climate_code(record.climate)
    diff_total = int(counts.sum()) - int(counts[code].sum())
    if diff_total == 0:
        return None
    opp = 1 - int(record.decision is Decision.GRANT)
    opposite = int(counts[:, opp].sum()) - int(counts[code, opp])
    return opposite / diff_total


def _stable_mean(values: np.ndarray) -> float:
    # Summing in sorted order keeps the result invariant under any input
    # permutation of the corpus.
    return float(np.sum(np.sort(values)) / len(values))


@dataclass
class ScoreTable:
    """Per-proceeding omega/gamma and per-judge phi with explicit nulls (NaN)."""

    proceeding_ids: list[str]
    record_judges: list[str | None]
    omega: np.ndarray
    gamma: np.ndarray
    judges: list[str]
    phi: np.ndarray
    scored_case_count: np.ndarray

    def __post_init__(self) -> None:
        self._row: dict[str, int] = {}
        self._judge_row: dict[str, int] = {}

    def _rows(self) -> dict[str, int]:
        if not self._row:
            self._row = {pid: i for i, pid in enumerate(self.proceeding_ids)}
        return self._row

    def _judge_rows(self) -> dict[str, int]:
        if not self._judge_row:
            self._judge_row = {j: i for i, j in enumerate(self.judges)}
        return self._judge_row

    @staticmethod
    def _lift(x: float) -> float | None:
        return None if np.isnan(x) else float(x)

    def omega_of(self, proceeding_id: str) -> float | None:
        return self._lift(self.omega[self._rows()[proceeding_id]])

    def gamma_of(self, proceeding_id: str) -> float | None:
        return self._lift(self.gamma[self._rows()[proceeding_id]])

    def phi_of(self, judge_id: str) -> float | None:
        return self._lift(self.phi[self._judge_rows()[judge_id]])

    def mean_omega(self) -> float | None:
        finite = self.omega[np.isfinite(self.omega)]
        return float(finite.mean()) if len(finite) else None

    def mean_gamma(self) -> float | None:
        finite = self.gamma[np.isfinite(self.gamma)]
        return float(finite.mean()) if len(finite) else None

    def write_proceeding_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("proceeding_id,omega,gamma\n")
            for pid, o, g in zip(self.proceeding_ids, self.omega, self.gamma):
                so = "" if np.isnan(o) else repr(float(o))
                sg = "" if np.isnan(g) else repr(float(g))
                f.write(f"{pid},{so},{sg}\n")

    def write_judge_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("judge_id,phi,scored_case_count\n")
            for j, p, c in zip(self.judges, self.phi, self.scored_case_count):
                sp = "" if np.isnan(p) else repr(float(p))
                f.write(f"{j},{sp},{int(c)}\n")


def cohort_consistency(judge_id: str, table: ScoreTable) -> float | None:
    """Mean of a judge's non-null omegas; null when the judge has none."""
    if judge_id not in table._judge_rows():
        raise KeyError(f"unknown judge {judge_id!r}")
    return table.phi_of(judge_id)


def _judge_majority_credit(index: CohortIndex) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    g = index.pair_counts[:, 1]
    d = index.pair_counts[:, 0]
    credit = np.where(g > d, 1.0, np.where(g == d, 0.5, 0.0))
    n_cohorts = index.n_cohorts
    judge_count = np.bincount(index.pair_cohorts, minlength=n_cohorts)
    credit_sum = np.bincount(index.pair_cohorts, weights=credit, minlength=n_cohorts)
    return credit, judge_count, credit_sum


def score_corpus(
    records: Sequence[ProceedingRecord],
    index: CohortIndex,
    judge_weighted: bool = False,
) -> ScoreTable:
    """Score every decided record against an index built from the same corpus.

    With ``judge_weighted`` set, omega weights each counterfactual judge
    equally by their within-cohort majority decision (ties count half)
    instead of weighting each counterfactual proceeding equally.
    """
    decided = [r for r in records if r.decided]
    n = len(decided)
    pids = [r.proceeding_id for r in decided]
    record_judges = [r.judge_id for r in decided]

    omega = np.full(n, np.nan)
    gamma = np.full(n, np.nan)
    if n == 0:
        return ScoreTable(pids, record_judges, omega, gamma, [], np.empty(0), np.empty(0, dtype=np.int64))

    dec = _decisions(decided)
    triples, inverse = _cohort_inverse(decided)
    cohort_row = np.fromiter(
        (index.cohort_ids.get(t, -1) for t in triples), dtype=np.int64, count=len(triples)
    )
    c_of = cohort_row[inverse]

    judge_codes, judge_pool = _factor_strings(record_judges)
    jp = np.fromiter((j is not None for j in record_judges), dtype=bool, count=n)
    if (c_of[jp] < 0).any():
        bad = int(np.nonzero(jp & (c_of < 0))[0][0])
        raise CorpusMismatchError(f"proceeding {pids[bad]} is not covered by this index")

    # Map each judged record to its (cohort, judge) tally row via the
    # distinct pairs only.
    n_judge_pool = max(len(judge_pool), 1)
    local_pair = c_of * n_judge_pool + judge_codes
    uniq_local, pair_inv = np.unique(local_pair[jp], return_inverse=True)
    pair_row_of = np.empty(len(uniq_local), dtype=np.int64)
    for k, code in enumerate(uniq_local):
        cohort = int(code // n_judge_pool)
        judge = judge_pool[int(code % n_judge_pool)]
        row = index.pair_ids.get((cohort, judge))
        if row is None:
            raise CorpusMismatchError(f"judge {judge!r} has no indexed cases in cohort {cohort}")
        pair_row_of[k] = row
    pair_rows = pair_row_of[pair_inv]

    if judge_weighted:
        credit, judge_count, credit_sum = _judge_majority_credit(index)
        others = judge_count[c_of[jp]] - 1
        other_credit = credit_sum[c_of[jp]] - credit[pair_rows]
        agree = np.where(dec[jp] == 1, other_credit, others - other_credit)
        nz = others > 0
        vals = np.full(jp.sum(), np.nan)
        vals[nz] = agree[nz] / others[nz]
        omega[jp] = vals
    else:
        agree = index.totals[c_of[jp], dec[jp]] - index.pair_counts[pair_rows, dec[jp]]
        total = index.totals[c_of[jp]].sum(axis=1) - index.pair_counts[pair_rows].sum(axis=1)
        nz = total > 0
        vals = np.full(jp.sum(), np.nan)
        vals[nz] = agree[nz] / total[nz]
        omega[jp] = vals

    clim = _climate_codes(decided)
    gm = (clim >= 0) & (c_of >= 0)
    if gm.any():
        counts = index.climate_counts[c_of[gm]]
        code = clim[gm]
        m = counts.shape[0]
        rows = np.arange(m)
        diff_total = counts.sum(axis=(1, 2)) - counts[rows, code].sum(axis=1)
        opp = 1 - dec[gm]
        opp_all = np.where(opp[:, None] == 1, counts[:, :, 1], counts[:, :, 0]).sum(axis=1)
        opposite = opp_all - counts[rows, code, opp]
        vals = np.full(m, np.nan)
        nz = diff_total > 0
        vals[nz] = opposite[nz] / diff_total[nz]
        gamma[gm] = vals

    # Per-judge phi over non-null omegas, in first-appearance judge order.
    judges = [j for j in judge_pool if j is not None]
    phi = np.full(len(judges), np.nan)
    counts_out = np.zeros(len(judges), dtype=np.int64)
    if judges:
        code_of_judge = {j: k for k, j in enumerate(judges)}
        jcodes = np.fromiter(
            (code_of_judge[j] for j in (rj for rj, keep in zip(record_judges, jp) if keep)),
            dtype=np.int64,
            count=int(jp.sum()),
        )
        om = omega[jp]
        order = np.argsort(jcodes, kind="stable")
        sorted_codes = jcodes[order]
        sorted_om = om[order]
        starts = np.searchsorted(sorted_codes, np.arange(len(judges)))
        ends = np.searchsorted(sorted_codes, np.arange(len(judges)) + 1)
        for k in range(len(judges)):
            vals = sorted_om[starts[k]:ends[k]]
            vals = vals[np.isfinite(vals)]
            counts_out[k] = len(vals)
            if len(vals):
                phi[k] = _stable_mean(vals)

    return ScoreTable(pids, record_judges, omega, gamma, judges, phi, counts_out)
