"""Feature engineering and statistical testing for the correlation pipeline.

Null handling follows one policy throughout: nulls are NaN inside a
FeatureMatrix, correlations use pairwise deletion, and model fits drop rows
where the target is null. Data standardization is deliberately not offered.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata
from scipy.stats import t as t_dist

from .forest import ForestParams, fit_forest


class ConstantInputError(ValueError):
    """Correlation asked of a column with no variation."""


@dataclass
class FeatureMatrix:
    """Dense numeric matrix with per-column provenance.

    ``values`` is rows x columns, NaN marking nulls. Provenance tags are
    ``raw-numeric``, ``frequency-encoded`` or ``null-indicator``.
    """

    names: list[str]
    values: np.ndarray
    provenance: list[str]

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be 2-D")
        if self.values.shape[1] != len(self.names) or len(self.names) != len(self.provenance):
            raise ValueError("names, provenance and columns must align")

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def select(self, keep: Sequence[int]) -> "FeatureMatrix":
        keep = list(keep)
        return FeatureMatrix(
            names=[self.names[i] for i in keep],
            values=self.values[:, keep],
            provenance=[self.provenance[i] for i in keep],
        )

    def extend(self, other: "FeatureMatrix") -> "FeatureMatrix":
        if other.n_rows != self.n_rows:
            raise ValueError("row counts differ")
        return FeatureMatrix(
            names=self.names + other.names,
            values=np.hstack([self.values, other.values]),
            provenance=self.provenance + other.provenance,
        )


def frequency_encode(column: Sequence) -> np.ndarray:
    """Replace each category with its relative frequency in the column.

    The denominator is the full row count, so values lie in (0, 1] and a
    category appearing k times encodes to k/n everywhere it occurs. Nulls
    (None) stay null (NaN) and do not join any category.
    """
    if len(column) == 0:
        raise ValueError("cannot frequency-encode an empty column")
    n = len(column)
    counts: dict = {}
    for v in column:
        if v is not None:
            counts[v] = counts.get(v, 0) + 1
    out = np.full(n, np.nan)
    for i, v in enumerate(column):
        if v is not None:
            out[i] = counts[v] / n
    return out


def _pairwise_r(a: np.ndarray, b: np.ndarray) -> float:
    mask = np.isfinite(a) & np.isfinite(b)
    if mask.sum() < 3:
        return 0.0
    x = a[mask]
    y = b[mask]
    dx = x - x.mean()
    dy = y - y.mean()
    den = np.sqrt((dx * dx).sum() * (dy * dy).sum())
    if den == 0.0:
        return 0.0
    return float((dx * dy).sum() / den)


def prune_correlated(matrix: FeatureMatrix, threshold: float = 0.95) -> FeatureMatrix:
    """Drop redundant columns so no surviving pair has |r| above threshold.

    Greedy in column order: the earlier column of an offending pair is kept.
    Zero-variance columns (correlation undefined, no information) are
    dropped up front.
    """
    survivors: list[int] = []
    for j in range(matrix.n_cols):
        col = matrix.values[:, j]
        finite = col[np.isfinite(col)]
        if len(finite) == 0 or np.all(finite == finite[0]):
            continue
        if all(abs(_pairwise_r(matrix.values[:, i], col)) <= threshold for i in survivors):
            survivors.append(j)
    return matrix.select(survivors)


def spearman(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Spearman rank correlation with a large-sample t approximation p-value.

    Ties receive average ranks; rows where either side is null are removed
    pairwise. A constant input has no rank order and raises
    :class:`ConstantInputError`.
    """
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.shape != b.shape:
        raise ValueError("columns must have equal length")
    mask = np.isfinite(a) & np.isfinite(b)
    a = a[mask]
    b = b[mask]
    n = len(a)
    if n < 3:
        raise ValueError("need at least 3 paired observations")
    if np.all(a == a[0]) or np.all(b == b[0]):
        raise ConstantInputError("rank correlation undefined for a constant column")
    ra = rankdata(a)
    rb = rankdata(b)
    da = ra - ra.mean()
    db = rb - rb.mean()
    rho = float((da * db).sum() / np.sqrt((da * da).sum() * (db * db).sum()))
    if abs(rho) >= 1.0:
        return rho, 0.0
    t = rho * np.sqrt((n - 2) / (1.0 - rho * rho))
    p = float(2.0 * t_dist.sf(abs(t), n - 2))
    return rho, p


def bonferroni(p_values: Sequence[float], alpha: float = 0.05) -> list[bool]:
    """Family-wise significance flags: p < alpha / m with m = len(p_values)."""
    if len(p_values) == 0:
        raise ValueError("empty p-value list")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    cutoff = alpha / len(p_values)
    return [p < cutoff for p in p_values]


@dataclass
class ImportanceSummary:
    """Bagged feature importances with rank correlations against the target."""

    features: list[str]
    mean_importance: np.ndarray
    std_importance: np.ndarray
    spearman_rho: np.ndarray
    p_value: np.ndarray
    significant: list[bool]
    alpha: float
    n_tests: int
    replicates: int

    def write_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write("feature,mean,std,coefficient,p,significant\n")
            for i, name in enumerate(self.features):
                rho = "" if np.isnan(self.spearman_rho[i]) else repr(float(self.spearman_rho[i]))
                p = "" if np.isnan(self.p_value[i]) else repr(float(self.p_value[i]))
                f.write(
                    f"{name},{self.mean_importance[i]:.6f},{self.std_importance[i]:.6f},"
                    f"{rho},{p},{str(self.significant[i]).lower()}\n"
                )


def bag_importances(
    matrix: FeatureMatrix,
    target: Sequence[float],
    replicates: int = 1000,
    sample_size: int = 5000,
    seed: int = 0,
    task: str | None = None,
    params: ForestParams | None = None,
    alpha: float = 0.05,
    threads: int = 1,
) -> ImportanceSummary:
    """Bootstrap-bag forest importances and test each feature against the target.

    Rows with a null target are removed first. Each replicate draws its own
    subsample (without replacement when sample_size fits, else with
    replacement) under a seed spawned deterministically from ``seed``, so
    results do not depend on scheduling. Remaining feature nulls are filled
    with 0 for the fit; the null-indicator columns carry the missingness
    signal. Spearman coefficients are computed once on the full target-valid
    rows; significance uses a Bonferroni correction with m = feature count.
    """
    y_all = np.asarray(target, dtype=float)
    if len(y_all) != matrix.n_rows:
        raise ValueError("target length must match matrix rows")
    keep = np.isfinite(y_all)
    y = y_all[keep]
    X = matrix.values[keep]
    n = len(y)
    if n == 0 or np.all(y == y[0]):
        raise ValueError("target is constant or empty; nothing to rank")
    if task is None:
        task = "classify" if set(np.unique(y)) <= {0.0, 1.0} else "regress"
    params = params or ForestParams()

    child_seeds = np.random.SeedSequence(seed).spawn(replicates)

    def one(rep: int) -> np.ndarray:
        rng = np.random.default_rng(child_seeds[rep])
        if sample_size <= n:
            rows = rng.choice(n, size=sample_size, replace=False)
        else:
            rows = rng.choice(n, size=sample_size, replace=True)
        Xs = np.nan_to_num(X[rows], nan=0.0)
        forest = fit_forest(
            Xs, y[rows], params=params, task=task, seed=int(rng.integers(2**32))
        )
        return forest.importances

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stacks = list(pool.map(one, range(replicates)))
    else:
        stacks = [one(rep) for rep in range(replicates)]
    imp = np.vstack(stacks)
    mean = imp.mean(axis=0)
    std = imp.std(axis=0)

    rhos = np.full(matrix.n_cols, np.nan)
    ps = np.full(matrix.n_cols, np.nan)
    for j in range(matrix.n_cols):
        try:
            rhos[j], ps[j] = spearman(X[:, j], y)
        except (ConstantInputError, ValueError):
            pass
    # the correction family counts only the features that could be tested
    tested = [j for j in range(matrix.n_cols) if not np.isnan(ps[j])]
    flags = [False] * matrix.n_cols
    if tested:
        tested_flags = bonferroni([float(ps[j]) for j in tested], alpha)
        for j, f in zip(tested, tested_flags):
            flags[j] = f
    return ImportanceSummary(
        features=list(matrix.names),
        mean_importance=mean,
        std_importance=std,
        spearman_rho=rhos,
        p_value=ps,
        significant=flags,
        alpha=alpha,
        n_tests=len(tested),
        replicates=replicates,
    )


def build_feature_matrix(records) -> FeatureMatrix:
    """Encode decided records into a numeric matrix for correlation studies.

    Categorical identifiers are frequency-encoded, dates become year and
    duration numbers, booleans become 0/1, and each nullable column
    contributes a null indicator. Aligned row-for-row with the score table
    built from the same corpus.
    """
    from .ingest import add_null_indicators
    from .records import Party

    decided = [r for r in records if r.decided]
    if not decided:
        raise ValueError("no decided records to encode")
    names: list[str] = []
    cols: list[np.ndarray] = []
    prov: list[str] = []

    def raw(name: str, values) -> None:
        names.append(name)
        cols.append(np.asarray(values, dtype=float))
        prov.append("raw-numeric")

    def freq(name: str, values) -> None:
        names.append(name)
        cols.append(frequency_encode(values))
        prov.append("frequency-encoded")

    raw("decision", [1.0 if r.decision.value == "grant" else 0.0 for r in decided])
    raw("decision_year", [r.decision_date.year for r in decided])
    raw("duration_days", [r.duration_days() for r in decided])
    raw(
        "represented",
        [np.nan if r.represented is None else float(r.represented) for r in decided],
    )
    raw(
        "president_party",
        [
            np.nan if r.climate is None else float(r.climate.president_party is Party.B)
            for r in decided
        ],
    )
    raw(
        "state_leaning",
        [
            np.nan if r.climate is None else float(r.climate.state_leaning is Party.B)
            for r in decided
        ],
    )
    freq("nationality", [r.nationality for r in decided])
    freq("court_id", [r.court_id for r in decided])
    freq("state", [r.state for r in decided])
    freq("judge_id", [r.judge_id for r in decided])
    freq("custody", [r.custody.value if r.custody else None for r in decided])

    cov_names = list((decided[0].covariates or {}).keys())
    for name in cov_names:
        values = [(r.covariates or {}).get(name) for r in decided]
        if any(isinstance(v, str) for v in values):
            freq(f"cov_{name}", values)
        else:
            raw(f"cov_{name}", [np.nan if v is None else float(v) for v in values])

    base = FeatureMatrix(names=names, values=np.column_stack(cols), provenance=prov)
    return add_null_indicators(decided, matrix=base)


def target_vector(records, table, name: str) -> np.ndarray:
    """Score or outcome column used as a prediction target, NaN where null."""
    from .records import Party

    decided = [r for r in records if r.decided]
    if name == "partisanship":
        return table.gamma.copy()
    if name == "disaggregated_consistency":
        return table.omega.copy()
    if name == "cohort_consistency":
        phi_of = {j: p for j, p in zip(table.judges, table.phi)}
        return np.asarray(
            [phi_of.get(r.judge_id, np.nan) if r.judge_id else np.nan for r in decided]
        )
    if name == "decision":
        return np.asarray([1.0 if r.decision.value == "grant" else 0.0 for r in decided])
    if name == "president_party":
        return np.asarray(
            [
                np.nan if r.climate is None else float(r.climate.president_party is Party.B)
                for r in decided
            ]
        )
    raise ValueError(f"unknown target {name!r}")
