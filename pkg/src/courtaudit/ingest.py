"""Corpus ingestion: CSV parsing, validation, canonical output, reference data.

The parser consumes one flattened CSV with a header row. A column-mapping
config renames source headers onto the canonical fields; rows that violate a
record invariant are rejected individually and reported, never aborting the
run. Parsing is sequential but chunk-order independent: every decision about
a row depends only on that row (plus the first-occurrence rule for duplicate
ids), so outputs are stable in input line order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from datetime import date
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

from .records import (
    Custody,
    Decision,
    Party,
    ProceedingRecord,
    ReferenceTables,
    resolve_climate,
)

CANONICAL_COLUMNS = (
    "proceeding_id",
    "judge_id",
    "nationality",
    "court_id",
    "state",
    "charge_date",
    "decision_date",
    "decision",
    "represented",
    "custody",
)
REQUIRED_FIELDS = (
    "proceeding_id",
    "judge_id",
    "nationality",
    "court_id",
    "state",
    "charge_date",
    "decision_date",
    "decision",
)
# Canonical fields that may legitimately be empty in an accepted row.
NULLABLE_FIELDS = ("judge_id", "state", "decision_date", "represented", "custody")

MIN_CHARGE_DATE = date(1980, 1, 1)
MAX_CHARGE_DATE = date(2022, 1, 1)  # exclusive

_TRUE = {"true", "t", "1", "yes", "y"}
_FALSE = {"false", "f", "0", "no", "n"}
_CUSTODY = {
    "detained": Custody.DETAINED,
    "d": Custody.DETAINED,
    "released": Custody.RELEASED,
    "r": Custody.RELEASED,
    "never_detained": Custody.NEVER_DETAINED,
    "neverdetained": Custody.NEVER_DETAINED,
    "never": Custody.NEVER_DETAINED,
    "n": Custody.NEVER_DETAINED,
}


class ConfigError(ValueError):
    """Fatal ingestion configuration problem (bad mapping, missing column)."""


@dataclass(frozen=True)
class ColumnMapping:
    """Maps canonical field names to source CSV headers.

    ``columns`` covers the canonical fields; ``covariates`` maps extra
    carried-through columns (canonical covariate name -> source header).
    ``decision_values`` lists the source spellings of each decision outcome;
    unlisted terminal outcomes are treated as denials only when
    ``other_decisions_as_deny`` is set, otherwise their rows are rejected.
    """

    columns: dict[str, str]
    covariates: dict[str, str] = field(default_factory=dict)
    decision_values: dict[str, tuple[str, ...]] = field(
        default_factory=lambda: {
            "grant": ("grant", "granted", "g"),
            "deny": ("deny", "denied", "denial", "d"),
            "pending": ("pending", ""),
        }
    )
    other_decisions_as_deny: bool = False

    def __post_init__(self) -> None:
        missing = [f for f in REQUIRED_FIELDS if f not in self.columns]
        if missing:
            raise ConfigError(f"mapping lacks required canonical fields: {missing}")

    def decision_lookup(self) -> dict[str, Decision]:
        table: dict[str, Decision] = {}
        for name, dec in (("grant", Decision.GRANT), ("deny", Decision.DENY), ("pending", Decision.PENDING)):
            for value in self.decision_values.get(name, ()):
                table[value.strip().lower()] = dec
        return table

    @classmethod
    def identity(cls) -> "ColumnMapping":
        return cls(columns={c: c for c in CANONICAL_COLUMNS})

    @classmethod
    def from_json(cls, path: str | Path) -> "ColumnMapping":
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
        if not isinstance(raw, dict):
            raise ConfigError("mapping file must hold a JSON object")
        columns = {
            k: v for k, v in raw.items() if k not in ("covariates", "decision_values", "other_decisions_as_deny")
        }
        decision_values = {k: tuple(v) for k, v in raw.get("decision_values", {}).items()}
        kwargs = {}
        if decision_values:
            kwargs["decision_values"] = decision_values
        return cls(
            columns=columns,
            covariates=dict(raw.get("covariates", {})),
            other_decisions_as_deny=bool(raw.get("other_decisions_as_deny", False)),
            **kwargs,
        )


@dataclass
class IngestReport:
    """Line-level audit of one parse run."""

    total_rows: int = 0
    accepted: int = 0
    rejections: list[tuple[int, str]] = field(default_factory=list)
    null_counts: dict[str, int] = field(default_factory=dict)

    def reject(self, line: int, reason: str) -> None:
        self.rejections.append((line, reason))

    def count_null(self, column: str) -> None:
        self.null_counts[column] = self.null_counts.get(column, 0) + 1

    def as_dict(self) -> dict:
        return {
            "total_rows": self.total_rows,
            "accepted": self.accepted,
            "rejected": len(self.rejections),
            "rejections": [{"line": ln, "reason": r} for ln, r in self.rejections],
            "null_counts": dict(self.null_counts),
        }

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.as_dict(), indent=2) + "\n", encoding="utf-8")


def _parse_date(text: str) -> date:
    return date.fromisoformat(text.strip())


def parse_corpus(
    path: str | Path,
    mapping: ColumnMapping | None = None,
    tables: ReferenceTables | None = None,
    min_charge_date: date = MIN_CHARGE_DATE,
    max_charge_date: date = MAX_CHARGE_DATE,
) -> tuple[list[ProceedingRecord], IngestReport]:
    """Parse a proceedings CSV into validated records plus a line-level report.

    Every data row either becomes a record or a (line, reason) rejection;
    malformed rows never abort the run. When ``tables`` is given, each
    record's political climate is resolved and attached. Null occurrences per
    nullable column are tallied over accepted rows.
    """
    mapping = mapping or ColumnMapping.identity()
    report = IngestReport()
    records: list[ProceedingRecord] = []
    seen_ids: set[str] = set()
    decision_lookup = mapping.decision_lookup()

    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty file, header row required")
        headers = set(reader.fieldnames)
        for fld, src in mapping.columns.items():
            if fld in REQUIRED_FIELDS and src not in headers:
                raise ConfigError(f"{path}: required column {src!r} (for {fld}) missing from header")
        for cov, src in mapping.covariates.items():
            if src not in headers:
                raise ConfigError(f"{path}: covariate column {src!r} (for {cov}) missing from header")

        for row in reader:
            line = reader.line_num
            report.total_rows += 1
            rec = _parse_row(row, line, mapping, decision_lookup, report, seen_ids,
                             min_charge_date, max_charge_date)
            if rec is None:
                continue
            if tables is not None:
                rec.climate = resolve_climate(rec, tables)
            seen_ids.add(rec.proceeding_id)
            records.append(rec)
            report.accepted += 1
            for fld in NULLABLE_FIELDS:
                if getattr(rec, fld) is None:
                    report.count_null(fld)
            for name, value in (rec.covariates or {}).items():
                if value is None:
                    report.count_null(name)
    return records, report


def _parse_row(
    row: dict,
    line: int,
    mapping: ColumnMapping,
    decision_lookup: dict[str, Decision],
    report: IngestReport,
    seen_ids: set[str],
    min_charge_date: date,
    max_charge_date: date,
) -> ProceedingRecord | None:
    def cell(fld: str) -> str:
        src = mapping.columns.get(fld)
        if src is None:
            return ""
        return (row.get(src) or "").strip()

    proceeding_id = cell("proceeding_id")
    nationality = cell("nationality")
    court_id = cell("court_id")
    if not proceeding_id or not nationality or not court_id or not cell("charge_date"):
        report.reject(line, "missing_required_value")
        return None
    if proceeding_id in seen_ids:
        report.reject(line, "duplicate_id")
        return None

    try:
        charge_date = _parse_date(cell("charge_date"))
    except ValueError:
        report.reject(line, "malformed_date")
        return None
    decision_date: date | None = None
    if cell("decision_date"):
        try:
            decision_date = _parse_date(cell("decision_date"))
        except ValueError:
            report.reject(line, "malformed_date")
            return None
    if not (min_charge_date <= charge_date < max_charge_date):
        report.reject(line, "out_of_range")
        return None

    decision = decision_lookup.get(cell("decision").lower())
    if decision is None:
        if mapping.other_decisions_as_deny and cell("decision"):
            decision = Decision.DENY
        else:
            report.reject(line, "unmapped_decision")
            return None

    # Pending iff no decision date; a decided row must carry its date.
    if (decision is Decision.PENDING) != (decision_date is None):
        report.reject(line, "invariant_violation")
        return None
    if decision_date is not None and decision_date < charge_date:
        report.reject(line, "invariant_violation")
        return None

    represented: bool | None = None
    rep_text = cell("represented").lower()
    if rep_text:
        if rep_text in _TRUE:
            represented = True
        elif rep_text in _FALSE:
            represented = False
        else:
            report.reject(line, "malformed_value")
            return None
    custody: Custody | None = None
    cust_text = cell("custody").lower()
    if cust_text:
        custody = _CUSTODY.get(cust_text)
        if custody is None:
            report.reject(line, "malformed_value")
            return None

    covariates: dict[str, str | float | None] | None = None
    if mapping.covariates:
        covariates = {}
        for name, src in mapping.covariates.items():
            text = (row.get(src) or "").strip()
            if not text:
                covariates[name] = None
            else:
                try:
                    covariates[name] = float(text)
                except ValueError:
                    covariates[name] = text

    return ProceedingRecord(
        proceeding_id=proceeding_id,
        judge_id=cell("judge_id") or None,
        nationality=nationality,
        court_id=court_id,
        state=cell("state") or None,
        charge_date=charge_date,
        decision_date=decision_date,
        decision=decision,
        represented=represented,
        custody=custody,
        covariates=covariates,
    )


def _serialize_value(value: str | float | bool | None) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_canonical(records: Sequence[ProceedingRecord], path: str | Path) -> list[str]:
    """Write records in the canonical corpus format; returns the column order.

    Columns are the fixed canonical ten followed by covariate names in the
    order they appear on the first record. All records must share one
    covariate key set so the file re-parses into identical records.
    """
    cov_names: list[str] = list((records[0].covariates or {}).keys()) if records else []
    for rec in records:
        if list((rec.covariates or {}).keys()) != cov_names:
            raise ValueError("records disagree on covariate columns; cannot serialize")
    columns = list(CANONICAL_COLUMNS) + cov_names
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(columns)
        for rec in records:
            row = [
                rec.proceeding_id,
                rec.judge_id or "",
                rec.nationality,
                rec.court_id,
                rec.state or "",
                rec.charge_date.isoformat(),
                rec.decision_date.isoformat() if rec.decision_date else "",
                rec.decision.value,
                _serialize_value(rec.represented),
                rec.custody.value if rec.custody else "",
            ]
            cov = rec.covariates or {}
            row.extend(_serialize_value(cov[name]) for name in cov_names)
            writer.writerow(row)
    return columns


def canonical_mapping(covariate_names: Iterable[str] = ()) -> ColumnMapping:
    """Identity mapping for files written by :func:`write_canonical`."""
    return ColumnMapping(
        columns={c: c for c in CANONICAL_COLUMNS},
        covariates={name: name for name in covariate_names},
    )


def read_canonical(
    path: str | Path, tables: ReferenceTables | None = None
) -> tuple[list[ProceedingRecord], IngestReport]:
    """Parse a canonical corpus file, inferring covariate columns from the header."""
    with open(path, newline="", encoding="utf-8") as f:
        header = next(csv.reader(f))
    cov_names = [c for c in header if c not in CANONICAL_COLUMNS]
    return parse_corpus(path, canonical_mapping(cov_names), tables=tables)


def _load_csv_rows(path_or_default: str | Path | None, default_name: str) -> list[dict]:
    if path_or_default is None:
        source = resources.files("courtaudit.data").joinpath(default_name)
        text = source.read_text(encoding="utf-8")
    else:
        text = Path(path_or_default).read_text(encoding="utf-8")
    return list(csv.DictReader(text.splitlines()))


def load_reference_tables(
    administrations: str | Path | None = None,
    state_votes: str | Path | None = None,
) -> ReferenceTables:
    """Load administration and state-vote tables, shipped defaults when unset.

    The shipped tables label the two major U.S. parties as A (Democratic)
    and B (Republican); user-supplied tables may encode any two parties.
    """
    admin_rows = _load_csv_rows(administrations, "administrations.csv")
    vote_rows = _load_csv_rows(state_votes, "state_votes.csv")
    admins = tuple(
        (_parse_date(r["start_date"]), _parse_date(r["end_date"]), Party(r["party"].strip()))
        for r in admin_rows
    )
    votes = {
        (r["state"].strip(), int(r["election_year"])): Party(r["party"].strip())
        for r in vote_rows
    }
    return ReferenceTables(administrations=admins, state_votes=votes)


def add_null_indicators(
    records: Sequence[ProceedingRecord],
    matrix: "FeatureMatrix | None" = None,
    columns: Sequence[str] | None = None,
):
    """Append one 0/1 null-indicator column per nullable field to a matrix.

    ``columns`` defaults to every nullable canonical field plus every
    covariate present; each indicator is 1 exactly where the field is null,
    so its sum equals the parse report's null count for that column. Returns
    a new :class:`courtaudit.stats.FeatureMatrix` (the input matrix, when
    given, is not modified).
    """
    import numpy as np

    from .stats import FeatureMatrix

    if columns is None:
        columns = list(NULLABLE_FIELDS)
        if records and records[0].covariates:
            columns += list(records[0].covariates.keys())
    cols = []
    for name in columns:
        if name in NULLABLE_FIELDS:
            values = [getattr(r, name) for r in records]
        else:
            values = [(r.covariates or {}).get(name) for r in records]
        cols.append(np.array([1.0 if v is None else 0.0 for v in values]))
    names = [f"{name}__is_null" for name in columns]
    data = np.column_stack(cols) if cols else np.empty((len(records), 0))
    indicators = FeatureMatrix(
        names=names, values=data, provenance=["null-indicator"] * len(names)
    )
    if matrix is None:
        return indicators
    return matrix.extend(indicators)
