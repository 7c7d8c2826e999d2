"""Core domain types for adjudication corpora.

A corpus is a flat list of proceedings. Each proceeding carries the
identifiers and attributes needed to place it in a cohort (nationality,
court, 5-year decision bin) and in a political climate (sitting
administration's party, state leaning at the last presidential election).
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from datetime import date
from enum import Enum


BIN_ANCHOR_YEAR = 1980
BIN_WIDTH_YEARS = 5


class Decision(str, Enum):
    GRANT = "grant"
    DENY = "deny"
    PENDING = "pending"


class Custody(str, Enum):
    DETAINED = "detained"
    RELEASED = "released"
    NEVER_DETAINED = "never_detained"


class Party(str, Enum):
    A = "A"
    B = "B"


class OutOfRangeError(ValueError):
    """Date falls outside the supported analysis range."""


@dataclass(frozen=True, slots=True)
class CohortKey:
    """Similarity class of a proceeding: nationality x court x 5-year bin."""

    nationality: str
    court_id: str
    year_bin: int

    def __post_init__(self) -> None:
        if self.year_bin < BIN_ANCHOR_YEAR or (self.year_bin - BIN_ANCHOR_YEAR) % BIN_WIDTH_YEARS:
            raise ValueError(f"year_bin {self.year_bin} is not a valid bin lower bound")


@dataclass(frozen=True, slots=True)
class ClimateKey:
    """Political climate of a decision.

    ``president_party`` is the party holding the presidency on the decision
    date; ``state_leaning`` is the party that carried the proceeding's state
    in the most recent presidential election from a year strictly earlier
    than the decision year.
    """

    president_party: Party
    state_leaning: Party


@dataclass(slots=True)
class ProceedingRecord:
    """One adjudicated case.

    ``climate`` is derived (see :func:`resolve_climate`) and is attached by
    ingestion or synthesis; it is None when the inputs needed to resolve it
    are missing. ``covariates`` holds extra named values carried through from
    the source file; None means the record has none.
    """

    proceeding_id: str
    judge_id: str | None
    nationality: str
    court_id: str
    state: str | None
    charge_date: date
    decision_date: date | None
    decision: Decision
    represented: bool | None = None
    custody: Custody | None = None
    covariates: dict[str, str | float | None] | None = None
    climate: ClimateKey | None = None

    @property
    def decided(self) -> bool:
        return self.decision is not Decision.PENDING

    def cohort_key(self) -> CohortKey | None:
        """Cohort of the record, or None while the proceeding is undecided."""
        if self.decision_date is None:
            return None
        return CohortKey(self.nationality, self.court_id, year_bin(self.decision_date))

    def duration_days(self) -> int | None:
        if self.decision_date is None:
            return None
        return (self.decision_date - self.charge_date).days


def year_bin(decision_date: date) -> int:
    """Lower bound of the 5-year bin containing ``decision_date``.

    Bins are anchored at 1980, so every bin start satisfies
    ``b % 5 == 0`` and ``b >= 1980``. Dates before 1980 are outside the
    analysis range and raise :class:`OutOfRangeError`.
    """
    if decision_date < date(BIN_ANCHOR_YEAR, 1, 1):
        raise OutOfRangeError(f"{decision_date} predates the {BIN_ANCHOR_YEAR} analysis range")
    offset = decision_date.year - BIN_ANCHOR_YEAR
    return BIN_ANCHOR_YEAR + (offset // BIN_WIDTH_YEARS) * BIN_WIDTH_YEARS


@dataclass(frozen=True)
class ReferenceTables:
    """External political facts: administrations and state-level election wins.

    ``administrations`` is a list of (start, end, party) with half-open
    intervals [start, end) that must tile the analysis range without overlap.
    ``state_votes`` maps (state, election_year) to the winning party.
    """

    administrations: tuple[tuple[date, date, Party], ...]
    state_votes: dict[tuple[str, int], Party]
    _admin_starts: tuple[date, ...] = field(init=False, repr=False, compare=False)
    _election_years: tuple[int, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        admins = tuple(sorted(self.administrations, key=lambda a: a[0]))
        for (s0, e0, _), (s1, _, _) in zip(admins, admins[1:]):
            if e0 != s1:
                raise ValueError(f"administration intervals not contiguous: {e0} vs {s1}")
        for s, e, _ in admins:
            if s >= e:
                raise ValueError(f"empty administration interval {s}..{e}")
        object.__setattr__(self, "administrations", admins)
        object.__setattr__(self, "_admin_starts", tuple(a[0] for a in admins))
        object.__setattr__(
            self, "_election_years", tuple(sorted({y for _, y in self.state_votes}))
        )

    def president_party(self, on: date) -> Party | None:
        i = bisect.bisect_right(self._admin_starts, on) - 1
        if i < 0:
            return None
        start, end, party = self.administrations[i]
        return party if start <= on < end else None

    def state_leaning(self, state: str, on: date) -> Party | None:
        # Election years are compared at year granularity: a decision made in
        # year Y looks at the most recent election from a year < Y, so a
        # November win does not take effect until the following January.
        i = bisect.bisect_left(self._election_years, on.year) - 1
        while i >= 0:
            year = self._election_years[i]
            party = self.state_votes.get((state, year))
            if party is not None:
                return party
            i -= 1
        return None


def resolve_climate(record: ProceedingRecord, tables: ReferenceTables) -> ClimateKey | None:
    """Resolve the political climate of a record, or None when unresolvable.

    Pure function of (decision_date, state, tables); a missing decision date,
    missing state, or failed table lookup yields None rather than an error.
    """
    if record.decision_date is None or record.state is None:
        return None
    president = tables.president_party(record.decision_date)
    leaning = tables.state_leaning(record.state, record.decision_date)
    if president is None or leaning is None:
        return None
    return ClimateKey(president, leaning)
