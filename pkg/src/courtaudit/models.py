"""From-scratch predictive models and their evaluation.

Logistic regression minimizes mean log-loss by full-batch gradient descent
with backtracking line search (documented tolerance: it stops when the
gradient norm falls below ``grad_tol`` or the iteration budget runs out).
The linear SVC minimizes the standard sum-form objective
0.5*||w||^2 + C * sum(hinge) by deterministic projected subgradient steps
with tail averaging. Evaluation computes R^2 on the hard 0/1 predicted
labels, which makes the always-deny baseline score exactly -p/(1-p) at
grant rate p.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .forest import ForestModel, ForestParams, _Tree

MODEL_FORMAT = "courtaudit-model/1"


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie strictly between 0 and 1")


def split_indices(n: int, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray]:
    """Disjoint train/test index arrays; deterministic for a fixed seed."""
    if n < 2:
        raise ValueError("need at least 2 rows to split")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = int(round(n * spec.train_fraction))
    n_train = min(max(n_train, 1), n - 1)
    return perm[:n_train], perm[n_train:]


def train_test_split(rows: Sequence, spec: SplitSpec) -> tuple[list, list]:
    train_idx, test_idx = split_indices(len(rows), spec)
    return [rows[i] for i in train_idx], [rows[i] for i in test_idx]


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_loss_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, l2: float = 0.0
) -> tuple[float, np.ndarray, float]:
    """Mean log-loss (plus optional ridge term) with its exact gradient."""
    z = X @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * l2 * (w @ w))
    err = _sigmoid(z) - y
    gw = X.T @ err / len(y) + l2 * w
    gb = float(err.mean())
    return loss, gw, gb


@dataclass
class LinearModel:
    weights: np.ndarray
    intercept: float
    kind: str  # logistic | linear_svc

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float)
        if not np.isfinite(self.weights).all() or not np.isfinite(self.intercept):
            raise ValueError("model parameters must be finite")

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if self.kind != "logistic":
            raise ValueError("probabilities are only defined for logistic models")
        return _sigmoid(self.score(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        # 1 iff probability >= 0.5, i.e. raw score >= 0.
        return (self.score(X) >= 0.0).astype(float)


@dataclass
class ConstantModel:
    """Degenerate baseline that always predicts one class (0 = deny)."""

    label: float = 0.0
    kind: str = "constant"

    def predict(self, X: np.ndarray) -> np.ndarray:
        return np.full(len(X), float(self.label))


def _check_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or len(X) != len(y):
        raise ValueError("X must be 2-D and aligned with y")
    if not np.isfinite(X).all() or not np.isfinite(y).all():
        raise ValueError("inputs must be finite")
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("labels must be 0/1")
    if len(np.unique(y)) < 2:
        raise ValueError("need both classes present to fit")
    if min((y == 0).sum(), (y == 1).sum()) < 2:
        raise ValueError("need at least 2 rows per class")
    return X, y


def fit_logistic(
    X,
    y,
    l2: float = 0.0,
    max_iter: int = 5000,
    grad_tol: float = 1e-7,
) -> LinearModel:
    """Gradient-descent logistic regression with backtracking line search."""
    X, y = _check_xy(X, y)
    w = np.zeros(X.shape[1])
    b = 0.0
    step = 1.0
    for _ in range(max_iter):
        loss, gw, gb = logistic_loss_grad(w, b, X, y, l2)
        gsq = float(gw @ gw + gb * gb)
        if np.sqrt(gsq) <= grad_tol:
            break
        t = min(step * 2.0, 1e8)
        while t > 1e-14:
            nw = w - t * gw
            nb = b - t * gb
            new_loss, _, _ = logistic_loss_grad(nw, nb, X, y, l2)
            if new_loss <= loss - 1e-4 * t * gsq:
                break
            t *= 0.5
        w = w - t * gw
        b = b - t * gb
        step = t
    return LinearModel(weights=w, intercept=b, kind="logistic")


def fit_linear_svc(X, y, c: float = 1.0, max_iter: int = 4000) -> LinearModel:
    """Projected subgradient descent on 0.5*||w||^2 + C*sum(hinge).

    Deterministic full-batch steps with a 1/(lam*t) schedule, iterates
    projected onto the ||w|| <= 1/sqrt(lam) ball, and the last half of the
    trajectory averaged. Labels are 0/1; internally remapped to -1/+1.
    """
    X, y = _check_xy(X, y)
    n = len(y)
    y2 = 2.0 * y - 1.0
    lam = 1.0 / (c * n)
    radius = 1.0 / np.sqrt(lam)
    w = np.zeros(X.shape[1])
    b = 0.0
    avg_w = np.zeros_like(w)
    avg_b = 0.0
    n_avg = 0
    for t in range(1, max_iter + 1):
        margins = y2 * (X @ w + b)
        active = margins < 1.0
        gw = lam * w - (y2[active, None] * X[active]).sum(axis=0) / n
        gb = -float(y2[active].sum()) / n
        eta = 1.0 / (lam * (t + 1))
        w = w - eta * gw
        b = b - eta * gb
        norm = float(np.sqrt(w @ w))
        if norm > radius:
            w *= radius / norm
        if t > max_iter // 2:
            avg_w += w
            avg_b += b
            n_avg += 1
    return LinearModel(weights=avg_w / n_avg, intercept=avg_b / n_avg, kind="linear_svc")


@dataclass
class Metrics:
    accuracy: float
    r2: float
    precision: float
    recall: float
    confusion: list[list[int]]  # [[tn, fp], [fn, tp]]

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "r2": self.r2,
            "precision": self.precision,
            "recall": self.recall,
            "confusion": self.confusion,
        }


def evaluate(model, X, y) -> Metrics:
    """Accuracy, label-space R^2, and grant-class precision/recall/confusion."""
    y = np.asarray(y, dtype=float)
    if len(y) == 0:
        raise ValueError("empty evaluation set")
    pred = np.asarray(model.predict(np.asarray(X, dtype=float)), dtype=float)
    accuracy = float((pred == y).mean())
    ss_res = float(((y - pred) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = float("nan") if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    tp = int(((pred == 1) & (y == 1)).sum())
    fp = int(((pred == 1) & (y == 0)).sum())
    fn = int(((pred == 0) & (y == 1)).sum())
    tn = int(((pred == 0) & (y == 0)).sum())
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return Metrics(
        accuracy=accuracy,
        r2=r2,
        precision=precision,
        recall=recall,
        confusion=[[tn, fp], [fn, tp]],
    )


LEAKAGE_WARNING = (
    "Scores used as predictors here are functions of the decisions being "
    "predicted; metrics measure explanatory power, not deployable forecasting skill."
)
NON_REPRODUCIBLE_NOTE = (
    "Published reference values derived from the EOIR corpus (mean cohort "
    "consistency 0.790468, mean partisanship 0.179371, two-score R^2 "
    "0.582006, logistic weights 10.035049/-4.519468, and the per-feature "
    "correlation tables) cannot be recomputed without that non-distributable "
    "dataset; supply an EOIR-shaped file through the column-mapping config "
    "to attempt replication."
)

FEATURE_SETS = (
    ("partisanship+cohort_consistency", ("gamma", "phi")),
    ("partisanship+disaggregated_consistency", ("gamma", "omega")),
    ("partisanship", ("gamma",)),
    ("cohort_consistency", ("phi",)),
    ("disaggregated_consistency", ("omega",)),
)


def predict_decision_suite(table, records, seed: int = 0, min_rows: int = 100) -> dict:
    """Fit logistic + linear SVC on every valid score combination.

    For each feature set, rows with any required score null are dropped; a
    set with fewer than ``min_rows`` usable rows is skipped with a warning.
    Each model trains on an 80/20 split keyed to ``seed`` and reports
    metrics plus fitted weights.
    """
    decided = [r for r in records if r.decided]
    if len(decided) != len(table.proceeding_ids):
        raise ValueError("score table does not align with the decided records")
    y_all = np.asarray([1.0 if r.decision.value == "grant" else 0.0 for r in decided])
    phi_of = {j: p for j, p in zip(table.judges, table.phi)}
    columns = {
        "gamma": table.gamma,
        "omega": table.omega,
        "phi": np.asarray(
            [phi_of.get(r.judge_id, np.nan) if r.judge_id else np.nan for r in decided]
        ),
    }
    pretty = {
        "gamma": "partisanship",
        "omega": "disaggregated_consistency",
        "phi": "cohort_consistency",
    }

    report: dict = {
        "leakage_warning": LEAKAGE_WARNING,
        "non_reproducible_note": NON_REPRODUCIBLE_NOTE,
        "seed": seed,
        "feature_sets": [],
    }
    for name, keys in FEATURE_SETS:
        X_full = np.column_stack([columns[k] for k in keys])
        usable = np.isfinite(X_full).all(axis=1)
        entry: dict = {
            "name": name,
            "features": [pretty[k] for k in keys],
            "rows": int(usable.sum()),
        }
        if usable.sum() < min_rows:
            entry["skipped"] = True
            entry["warning"] = (
                f"only {int(usable.sum())} usable rows (< {min_rows}); feature set skipped"
            )
            report["feature_sets"].append(entry)
            continue
        X = X_full[usable]
        y = y_all[usable]
        try:
            tr, te = split_indices(len(y), SplitSpec(0.8, seed))
            fits = {
                "logistic": fit_logistic(X[tr], y[tr]),
                "linear_svc": fit_linear_svc(X[tr], y[tr]),
            }
        except ValueError as exc:
            entry["skipped"] = True
            entry["warning"] = str(exc)
            report["feature_sets"].append(entry)
            continue
        entry["skipped"] = False
        entry["train_rows"] = len(tr)
        entry["test_rows"] = len(te)
        entry["models"] = {}
        for kind, model in fits.items():
            metrics = evaluate(model, X[te], y[te])
            entry["models"][kind] = {
                "weights": {pretty[k]: float(w) for k, w in zip(keys, model.weights)},
                "intercept": float(model.intercept),
                "metrics": metrics.as_dict(),
            }
        report["feature_sets"].append(entry)
    return report


def save_model(model, path: str | Path, feature_names: Sequence[str]) -> None:
    """Persist a fitted model as versioned JSON (text, no binary pickling)."""
    data: dict = {"format": MODEL_FORMAT, "feature_names": list(feature_names)}
    if isinstance(model, LinearModel):
        data["kind"] = model.kind
        data["weights"] = model.weights.tolist()
        data["intercept"] = model.intercept
    elif isinstance(model, ConstantModel):
        data["kind"] = "constant"
        data["label"] = model.label
    elif isinstance(model, ForestModel):
        data["kind"] = f"forest_{model.task}"
        data["n_features"] = model.n_features
        data["params"] = {
            "n_trees": model.params.n_trees,
            "sample_cap": model.params.sample_cap,
            "max_depth": model.params.max_depth,
            "feature_rule": model.params.feature_rule,
            "min_samples_split": model.params.min_samples_split,
            "bootstrap": model.params.bootstrap,
        }
        data["trees"] = [t.as_dict() for t in model.trees]
    else:
        raise TypeError(f"cannot persist {type(model).__name__}")
    Path(path).write_text(json.dumps(data) + "\n", encoding="utf-8")


def load_model(path: str | Path):
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if data.get("format") != MODEL_FORMAT:
        raise ValueError(f"unsupported model format {data.get('format')!r}")
    names = data["feature_names"]
    kind = data["kind"]
    if kind in ("logistic", "linear_svc"):
        return LinearModel(np.asarray(data["weights"]), float(data["intercept"]), kind), names
    if kind == "constant":
        return ConstantModel(label=float(data["label"])), names
    if kind in ("forest_classify", "forest_regress"):
        params = ForestParams(**data["params"])
        n_features = int(data["n_features"])
        trees = [_Tree.from_dict(t, n_features) for t in data["trees"]]
        return (
            ForestModel(trees=trees, task=kind.removeprefix("forest_"), n_features=n_features, params=params),
            names,
        )
    raise ValueError(f"unknown model kind {kind!r}")
