"""Weekly score aggregation and additive trend/seasonality decomposition.

The fitted model is y(t) = trend(t) + seasonality(t) where the trend is a
continuous piecewise-linear function, k*t + m + sum_j delta_j * relu(t - s_j)
over candidate changepoints s_j, and seasonality is a partial Fourier sum
with a one-year period. Fitting minimizes

    sum_i w_i * (y_i - yhat_i)^2
        + (1 / changepoint_scale) * sum_j |delta_j|
        + (1 / seasonality_scale) * sum_k beta_k^2

by cyclic coordinate descent; the L1 term soft-thresholds each delta, so
unused changepoints come out exactly zero and a small changepoint scale
(a tight prior) forces a straight line. Time is rescaled to [0, 1] over the
fitted span. Weeks start on Monday and are labeled by their start date.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import date, timedelta
from typing import Sequence

import numpy as np

DAYS_PER_YEAR = 365.25
DEFAULT_CHANGEPOINT_SCALES = (0.01, 0.1, 1.0)
DEFAULT_SEASONALITY_SCALES = (0.001, 0.01, 0.1)


def week_start(d: date) -> date:
    return d - timedelta(days=d.weekday())


@dataclass
class WeeklySeries:
    """Mean score per calendar week; weeks with no cases are omitted."""

    week_starts: list[date]
    values: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.values = np.asarray(self.values, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if not (
            len(self.week_starts) == len(self.values) == len(self.counts)
        ):
            raise ValueError("series components must align")
        for a, b in zip(self.week_starts, self.week_starts[1:]):
            if b <= a:
                raise ValueError("week starts must be strictly increasing")
        if (self.counts < 1).any():
            raise ValueError("every emitted week needs at least one case")

    def __len__(self) -> int:
        return len(self.week_starts)


def aggregate_weekly(table, records) -> WeeklySeries:
    """Mean partisanship per decision week over records with a scored gamma."""
    decided = [r for r in records if r.decided]
    if len(decided) != len(table.proceeding_ids):
        raise ValueError("score table does not align with the decided records")
    sums: dict[date, float] = {}
    counts: dict[date, int] = {}
    for rec, g in zip(decided, table.gamma):
        if np.isnan(g):
            continue
        wk = week_start(rec.decision_date)
        sums[wk] = sums.get(wk, 0.0) + float(g)
        counts[wk] = counts.get(wk, 0) + 1
    if not sums:
        raise ValueError("no scored records to aggregate")
    weeks = sorted(sums)
    return WeeklySeries(
        week_starts=weeks,
        values=np.asarray([sums[w] / counts[w] for w in weeks]),
        counts=np.asarray([counts[w] for w in weeks]),
    )


@dataclass
class TrendModel:
    """Fitted additive model; evaluation works on any dates, past or future."""

    k: float
    m: float
    changepoints: np.ndarray  # positions in normalized fitted time
    deltas: np.ndarray
    fourier: np.ndarray  # [a_1, b_1, ..., a_N, b_N]
    fourier_order: int
    changepoint_scale: float
    seasonality_scale: float
    start: date
    span_days: int
    objective_history: list[float] = field(default_factory=list)

    def _t(self, dates: Sequence[date]) -> np.ndarray:
        return np.asarray([(d - self.start).days for d in dates], dtype=float) / self.span_days

    def trend(self, dates: Sequence[date]) -> np.ndarray:
        t = self._t(dates)
        out = self.k * t + self.m
        for s, d in zip(self.changepoints, self.deltas):
            out += d * np.maximum(t - s, 0.0)
        return out

    def seasonality(self, dates: Sequence[date]) -> np.ndarray:
        days = np.asarray([(d - self.start).days for d in dates], dtype=float)
        out = np.zeros(len(days))
        for i in range(1, self.fourier_order + 1):
            arg = 2.0 * np.pi * i * days / DAYS_PER_YEAR
            out += self.fourier[2 * (i - 1)] * np.cos(arg)
            out += self.fourier[2 * (i - 1) + 1] * np.sin(arg)
        return out

    def predict(self, dates: Sequence[date]) -> np.ndarray:
        return self.trend(dates) + self.seasonality(dates)


def _design(
    series: WeeklySeries, changepoints: np.ndarray, fourier_order: int
) -> tuple[np.ndarray, np.ndarray, int]:
    days = np.asarray(
        [(d - series.week_starts[0]).days for d in series.week_starts], dtype=float
    )
    span = int(days[-1])
    if span <= 0:
        raise ValueError("series spans no time; cannot fit a trend")
    t = days / span
    cols = [t, np.ones(len(t))]
    for s in changepoints:
        cols.append(np.maximum(t - s, 0.0))
    for i in range(1, fourier_order + 1):
        arg = 2.0 * np.pi * i * days / DAYS_PER_YEAR
        cols.append(np.cos(arg))
        cols.append(np.sin(arg))
    return np.column_stack(cols), t, span


def fit_model(
    series: WeeklySeries,
    changepoint_scale: float = 0.1,
    seasonality_scale: float = 0.01,
    n_changepoints: int = 25,
    fourier_order: int = 3,
    count_weighted: bool = False,
    changepoint_placement: str = "grid",
    seed: int = 0,
    max_sweeps: int = 5000,
    tol: float = 1e-12,
) -> TrendModel:
    """Fit the penalized additive model by cyclic coordinate descent.

    Candidate changepoints sit on a uniform grid over the first 80% of the
    fitted span (``changepoint_placement="random"`` draws them uniformly at
    random there instead, seeded). With ``count_weighted`` the squared error
    of each week is weighted by its case count scaled to mean 1; by default
    weeks weigh equally regardless of volume.
    """
    if len(series) < 2 * fourier_order + n_changepoints + 2:
        raise ValueError(
            f"series too short: need at least {2 * fourier_order + n_changepoints + 2} weeks"
        )
    if changepoint_scale <= 0 or seasonality_scale <= 0:
        raise ValueError("prior scales must be positive")
    if changepoint_placement == "grid":
        cps = 0.8 * np.arange(1, n_changepoints + 1) / n_changepoints
    elif changepoint_placement == "random":
        cps = np.sort(np.random.default_rng(seed).uniform(0.0, 0.8, size=n_changepoints))
    else:
        raise ValueError(f"unknown changepoint placement {changepoint_placement!r}")

    A, _, span = _design(series, cps, fourier_order)
    y = series.values
    n, p = A.shape
    if count_weighted:
        w = series.counts / series.counts.mean()
    else:
        w = np.ones(n)

    lam_l1 = 1.0 / changepoint_scale
    lam_l2 = 1.0 / seasonality_scale
    is_l1 = np.zeros(p, dtype=bool)
    is_l1[2 : 2 + n_changepoints] = True
    is_l2 = np.zeros(p, dtype=bool)
    is_l2[2 + n_changepoints :] = True

    Aw = A * w[:, None]
    colsq = (A * Aw).sum(axis=0)
    theta = np.zeros(p)
    resid = y.copy()

    def objective() -> float:
        return float(
            (w * resid * resid).sum()
            + lam_l1 * np.abs(theta[is_l1]).sum()
            + lam_l2 * (theta[is_l2] ** 2).sum()
        )

    history = [objective()]
    for _ in range(max_sweeps):
        for j in range(p):
            if colsq[j] == 0.0:
                continue
            rho = float(Aw[:, j] @ resid) + colsq[j] * theta[j]
            if is_l1[j]:
                shrunk = abs(rho) - lam_l1 / 2.0
                new = 0.0 if shrunk <= 0.0 else np.sign(rho) * shrunk / colsq[j]
            elif is_l2[j]:
                new = rho / (colsq[j] + lam_l2)
            else:
                new = rho / colsq[j]
            if new != theta[j]:
                resid += A[:, j] * (theta[j] - new)
                theta[j] = new
        history.append(objective())
        if abs(history[-2] - history[-1]) <= tol * max(1.0, abs(history[-1])):
            break

    return TrendModel(
        k=float(theta[0]),
        m=float(theta[1]),
        changepoints=cps,
        deltas=theta[2 : 2 + n_changepoints].copy(),
        fourier=theta[2 + n_changepoints :].copy(),
        fourier_order=fourier_order,
        changepoint_scale=changepoint_scale,
        seasonality_scale=seasonality_scale,
        start=series.week_starts[0],
        span_days=span,
        objective_history=history,
    )


def _subseries(series: WeeklySeries, mask: np.ndarray) -> WeeklySeries:
    idx = np.nonzero(mask)[0]
    return WeeklySeries(
        week_starts=[series.week_starts[i] for i in idx],
        values=series.values[idx],
        counts=series.counts[idx],
    )


@dataclass
class CvMetrics:
    rmse: float
    mae: float
    r2: float
    folds: int


def cross_validate(
    series: WeeklySeries,
    changepoint_scale: float,
    seasonality_scale: float,
    n_changepoints: int = 25,
    fourier_order: int = 3,
    min_train_years: int = 2,
    count_weighted: bool = False,
) -> CvMetrics:
    """Rolling-origin CV over one-year hold-out segments.

    Each fold trains on every week strictly before January 1 of the held-out
    year and predicts that year's weeks, so no training window overlaps its
    hold-out. Errors are pooled across folds.
    """
    years = np.asarray([d.year for d in series.week_starts])
    distinct = sorted(set(years.tolist()))
    if len(distinct) < 3:
        raise ValueError("need at least 3 calendar years of data for cross-validation")
    min_len = 2 * fourier_order + n_changepoints + 2
    preds: list[np.ndarray] = []
    actuals: list[np.ndarray] = []
    folds = 0
    for hold in distinct[min_train_years:]:
        train_mask = years < hold
        test_mask = years == hold
        if train_mask.sum() < min_len or not test_mask.any():
            continue
        model = fit_model(
            _subseries(series, train_mask),
            changepoint_scale=changepoint_scale,
            seasonality_scale=seasonality_scale,
            n_changepoints=n_changepoints,
            fourier_order=fourier_order,
            count_weighted=count_weighted,
        )
        test = _subseries(series, test_mask)
        preds.append(model.predict(test.week_starts))
        actuals.append(test.values)
        folds += 1
    if folds == 0:
        raise ValueError("insufficient history for any cross-validation fold")
    pred = np.concatenate(preds)
    actual = np.concatenate(actuals)
    err = actual - pred
    ss_tot = float(((actual - actual.mean()) ** 2).sum())
    return CvMetrics(
        rmse=float(np.sqrt((err**2).mean())),
        mae=float(np.abs(err).mean()),
        r2=float("nan") if ss_tot == 0 else 1.0 - float((err**2).sum()) / ss_tot,
        folds=folds,
    )


@dataclass
class GridSearchResult:
    changepoint_scale: float
    seasonality_scale: float
    metrics: CvMetrics
    cells: list[tuple[float, float, float]]  # (cp scale, seasonality scale, rmse)


def grid_search(
    series: WeeklySeries,
    changepoint_scales: Sequence[float] = DEFAULT_CHANGEPOINT_SCALES,
    seasonality_scales: Sequence[float] = DEFAULT_SEASONALITY_SCALES,
    n_changepoints: int = 25,
    fourier_order: int = 3,
    count_weighted: bool = False,
    threads: int = 1,
) -> GridSearchResult:
    """Pick the prior scales with the lowest rolling-origin CV RMSE.

    The default grid is logarithmic with centers 0.1 (changepoint) and 0.01
    (seasonality).
    """
    grid = [(cs, ss) for cs in changepoint_scales for ss in seasonality_scales]

    def run(cell: tuple[float, float]) -> CvMetrics:
        return cross_validate(
            series,
            cell[0],
            cell[1],
            n_changepoints=n_changepoints,
            fourier_order=fourier_order,
            count_weighted=count_weighted,
        )

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, grid))
    else:
        results = [run(cell) for cell in grid]
    best = min(range(len(grid)), key=lambda i: results[i].rmse)
    return GridSearchResult(
        changepoint_scale=grid[best][0],
        seasonality_scale=grid[best][1],
        metrics=results[best],
        cells=[(cs, ss, r.rmse) for (cs, ss), r in zip(grid, results)],
    )


def decompose(
    model: TrendModel, weeks: Sequence[date]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-week (trend, seasonality, fitted); fitted is their pointwise sum."""
    trend = model.trend(weeks)
    seasonal = model.seasonality(weeks)
    return trend, seasonal, trend + seasonal


def residual_interval(
    model: TrendModel, series: WeeklySeries, coverage: float = 0.9
) -> tuple[float, float]:
    """Uncertainty band offsets from in-sample residual quantiles.

    Simply the empirical (1-coverage)/2 and 1-(1-coverage)/2 quantiles of
    actual minus fitted; add them to fitted values to band a plot. This is a
    descriptive in-sample band, not a posterior interval.
    """
    if not 0.0 < coverage < 1.0:
        raise ValueError("coverage must lie in (0, 1)")
    residuals = series.values - model.predict(series.week_starts)
    tail = (1.0 - coverage) / 2.0
    lo, hi = np.quantile(residuals, [tail, 1.0 - tail])
    return float(lo), float(hi)


def weekly_range(start: date, end: date) -> list[date]:
    """Monday-aligned week starts covering [start, end]."""
    first = week_start(start)
    out = []
    wk = first
    while wk <= end:
        out.append(wk)
        wk += timedelta(days=7)
    return out
