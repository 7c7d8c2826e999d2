from datetime import date, timedelta

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from courtaudit.ingest import (
    CANONICAL_COLUMNS,
    ColumnMapping,
    ConfigError,
    add_null_indicators,
    load_reference_tables,
    parse_corpus,
    read_canonical,
    write_canonical,
)
from courtaudit.records import Custody, Decision, ProceedingRecord
from courtaudit.synth import ScenarioConfig, generate

HEADER = ",".join(CANONICAL_COLUMNS)


def write_rows(tmp_path, rows, header=HEADER, name="corpus.csv"):
    path = tmp_path / name
    path.write_text(header + "\n" + "\n".join(rows) + "\n", encoding="utf-8")
    return path


def test_well_formed_rows_all_accepted(tmp_path):
    path = write_rows(
        tmp_path,
        [
            "p1,J1,MX,DAL,TX,1990-01-05,1991-02-03,deny,true,detained",
            "p2,J2,CN,NYC,NY,1995-07-01,1996-01-09,grant,false,released",
            "p3,,GT,LOS,CA,2000-03-04,,pending,,",
        ],
    )
    records, report = parse_corpus(path)
    assert len(records) == 3 and report.rejections == []
    assert records[0].decision is Decision.DENY and records[0].represented is True
    assert records[2].decision is Decision.PENDING and records[2].judge_id is None


def test_decided_row_without_decision_date_rejected(tmp_path):
    path = write_rows(tmp_path, ["p1,J1,MX,DAL,TX,1990-01-05,,deny,,"])
    records, report = parse_corpus(path)
    assert records == []
    assert report.rejections == [(2, "invariant_violation")]


def test_pending_with_decision_date_rejected(tmp_path):
    path = write_rows(tmp_path, ["p1,J1,MX,DAL,TX,1990-01-05,1991-01-01,pending,,"])
    _, report = parse_corpus(path)
    assert report.rejections == [(2, "invariant_violation")]


def test_decision_before_charge_rejected(tmp_path):
    path = write_rows(tmp_path, ["p1,J1,MX,DAL,TX,1992-01-05,1991-01-01,deny,,"])
    _, report = parse_corpus(path)
    assert report.rejections == [(2, "invariant_violation")]


def test_thousand_rows_with_ten_malformed_dates(tmp_path):
    rows = []
    for i in range(1000):
        decision_date = "not-a-date" if i % 100 == 7 else "1996-03-04"
        rows.append(f"p{i},J{i % 9},MX,DAL,TX,1995-01-02,{decision_date},deny,,")
    path = write_rows(tmp_path, rows)
    # independent scan of what we just wrote
    with open(path) as f:
        bad = sum("not-a-date" in line for line in f)
    assert bad == 10
    records, report = parse_corpus(path)
    assert len(records) == 990
    assert len(report.rejections) == 10
    assert all(reason == "malformed_date" for _, reason in report.rejections)
    assert report.total_rows == 1000


def test_missing_required_column_is_fatal(tmp_path):
    header = ",".join(c for c in CANONICAL_COLUMNS if c != "decision")
    path = write_rows(tmp_path, ["p1,J1,MX,DAL,TX,1990-01-05,1991-02-03,,"], header=header)
    with pytest.raises(ConfigError):
        parse_corpus(path)


def test_duplicate_id_rejected(tmp_path):
    path = write_rows(
        tmp_path,
        [
            "p1,J1,MX,DAL,TX,1990-01-05,1991-02-03,deny,,",
            "p1,J2,CN,NYC,NY,1990-01-05,1991-02-03,grant,,",
        ],
    )
    records, report = parse_corpus(path)
    assert len(records) == 1 and records[0].judge_id == "J1"
    assert report.rejections == [(3, "duplicate_id")]


def test_out_of_range_charges_rejected(tmp_path):
    path = write_rows(
        tmp_path,
        [
            "p1,J1,MX,DAL,TX,1979-12-31,1991-02-03,deny,,",
            "p2,J1,MX,DAL,TX,2022-01-01,2022-02-03,deny,,",
        ],
    )
    _, report = parse_corpus(path)
    assert [r for _, r in report.rejections] == ["out_of_range", "out_of_range"]


def test_unmapped_decision_excluded_unless_configured(tmp_path):
    rows = ["p1,J1,MX,DAL,TX,1990-01-05,1991-02-03,administrative closure,,"]
    path = write_rows(tmp_path, rows)
    _, report = parse_corpus(path)
    assert report.rejections == [(2, "unmapped_decision")]
    lenient = ColumnMapping(
        columns={c: c for c in CANONICAL_COLUMNS}, other_decisions_as_deny=True
    )
    records, report = parse_corpus(path, lenient)
    assert report.rejections == [] and records[0].decision is Decision.DENY


def test_custom_mapping_and_covariates(tmp_path):
    header = "ID,JDG,NAT,COURT,ST,CHARGED,DECIDED,OUTCOME,ATTY"
    path = write_rows(
        tmp_path, ["c1,J9,HT,MIA,FL,1994-02-03,1995-04-05,G,2.0"], header=header
    )
    mapping = ColumnMapping(
        columns={
            "proceeding_id": "ID",
            "judge_id": "JDG",
            "nationality": "NAT",
            "court_id": "COURT",
            "state": "ST",
            "charge_date": "CHARGED",
            "decision_date": "DECIDED",
            "decision": "OUTCOME",
        },
        covariates={"attorney_count": "ATTY"},
    )
    records, report = parse_corpus(path, mapping)
    assert report.accepted == 1
    assert records[0].decision is Decision.GRANT
    assert records[0].covariates == {"attorney_count": 2.0}


def test_null_counts_match_column_scan(tmp_path):
    rows = [
        "p1,J1,MX,DAL,,1990-01-05,1991-02-03,deny,,detained",
        "p2,,MX,DAL,TX,1990-01-05,1991-02-03,grant,true,",
        "p3,J1,MX,DAL,TX,1990-01-05,,pending,,",
    ]
    path = write_rows(tmp_path, rows)
    _, report = parse_corpus(path)
    assert report.null_counts["state"] == 1
    assert report.null_counts["judge_id"] == 1
    assert report.null_counts["represented"] == 2
    assert report.null_counts["custody"] == 2
    assert report.null_counts["decision_date"] == 1


def test_climate_attached_when_tables_given(tmp_path):
    path = write_rows(tmp_path, ["p1,J1,MX,DAL,TX,2018-01-05,2019-06-01,deny,,"])
    records, _ = parse_corpus(path, tables=load_reference_tables())
    assert records[0].climate is not None
    records, _ = parse_corpus(path)
    assert records[0].climate is None


# -- canonical round trip ----------------------------------------------------

covariate_values = st.one_of(
    st.none(),
    st.floats(allow_nan=False, allow_infinity=False, width=64),
    st.text(alphabet=st.characters(whitelist_categories=("Lu", "Ll")), min_size=1, max_size=8),
)


@st.composite
def record_lists(draw):
    n = draw(st.integers(min_value=1, max_value=8))
    cov_names = draw(
        st.lists(st.sampled_from(["alpha", "beta", "gamma_col"]), unique=True, max_size=2)
    )
    records = []
    for i in range(n):
        charge = draw(st.dates(min_value=date(1980, 1, 1), max_value=date(2020, 12, 31)))
        pending = draw(st.booleans())
        if pending:
            decision_date = None
            decision = Decision.PENDING
        else:
            decision_date = charge + timedelta(days=draw(st.integers(0, 2000)))
            decision = draw(st.sampled_from([Decision.GRANT, Decision.DENY]))
        records.append(
            ProceedingRecord(
                proceeding_id=f"p{i}",
                judge_id=draw(st.one_of(st.none(), st.sampled_from(["J1", "J2"]))),
                nationality=draw(st.sampled_from(["MX", "CN", "HT"])),
                court_id=draw(st.sampled_from(["DAL", "NYC"])),
                state=draw(st.one_of(st.none(), st.sampled_from(["TX", "NY"]))),
                charge_date=charge,
                decision_date=decision_date,
                decision=decision,
                represented=draw(st.one_of(st.none(), st.booleans())),
                custody=draw(st.one_of(st.none(), st.sampled_from(list(Custody)))),
                covariates={name: draw(covariate_values) for name in cov_names} or None,
            )
        )
    return records


@settings(max_examples=50, deadline=None)
@given(record_lists())
def test_canonical_round_trip(tmp_path_factory, records):
    path = tmp_path_factory.mktemp("rt") / "corpus.csv"
    write_canonical(records, path)
    parsed, report = read_canonical(path)
    assert report.rejections == []
    assert parsed == records


def test_round_trip_preserves_climate_with_same_tables(tmp_path):
    corpus = generate(ScenarioConfig(n_cases=50, seed=5))
    tables = ScenarioConfig(n_cases=50, seed=5).reference_tables()
    path = tmp_path / "corpus.csv"
    write_canonical(corpus, path)
    parsed, _ = read_canonical(path, tables=tables)
    assert parsed == corpus


# -- null indicators ----------------------------------------------------------

def _records_with_covariate(values):
    return [
        ProceedingRecord(
            proceeding_id=f"p{i}",
            judge_id="J1",
            nationality="MX",
            court_id="DAL",
            state="TX",
            charge_date=date(1990, 1, 1),
            decision_date=date(1991, 1, 1),
            decision=Decision.DENY,
            covariates={"x": v},
        )
        for i, v in enumerate(values)
    ]


def test_null_indicator_no_nulls_all_zero():
    matrix = add_null_indicators(_records_with_covariate([1.0, 2.0]), columns=["x"])
    assert matrix.names == ["x__is_null"]
    assert matrix.values.sum() == 0.0


def test_null_indicator_all_null_all_one():
    matrix = add_null_indicators(_records_with_covariate([None, None, None]), columns=["x"])
    assert matrix.values.sum() == 3.0


def test_null_indicator_sum_matches_independent_count():
    rng = np.random.default_rng(4)
    values = [None if rng.random() < 0.2 else float(v) for v in rng.normal(size=200)]
    # force an exact known count
    values = [None] * 37 + [float(v) for v in rng.normal(size=163)]
    matrix = add_null_indicators(_records_with_covariate(values), columns=["x"])
    assert matrix.values.sum() == sum(v is None for v in values) == 37
    assert matrix.provenance == ["null-indicator"]


def test_indicator_sums_equal_report_null_counts(tmp_path):
    rows = [
        "p1,J1,MX,DAL,,1990-01-05,1991-02-03,deny,,detained",
        "p2,,MX,DAL,TX,1990-01-05,1991-02-03,grant,true,",
        "p4,J2,MX,DAL,TX,1990-01-05,1991-02-03,grant,,released",
    ]
    path = write_rows(tmp_path, rows)
    records, report = parse_corpus(path)
    matrix = add_null_indicators(records)
    for name in ("judge_id", "state", "represented", "custody"):
        col = matrix.column(f"{name}__is_null")
        assert col.sum() == report.null_counts.get(name, 0)
