import numpy as np
import pytest

from courtaudit.forest import ForestParams, fit_forest
from courtaudit.models import (
    ConstantModel,
    LinearModel,
    SplitSpec,
    evaluate,
    fit_linear_svc,
    fit_logistic,
    load_model,
    logistic_loss_grad,
    predict_decision_suite,
    save_model,
    split_indices,
    train_test_split,
)
from courtaudit.scoring import build_index, index_universe, score_corpus
from courtaudit.synth import ScenarioConfig, generate


def blobs(rng, n=60, gap=2.0):
    X = np.vstack(
        [rng.normal(-gap, 0.4, size=(n // 2, 2)), rng.normal(gap, 0.4, size=(n // 2, 2))]
    )
    y = np.r_[np.zeros(n // 2), np.ones(n // 2)]
    return X, y


# -- splitting -----------------------------------------------------------------

def test_split_ten_rows_eight_two():
    train, test = train_test_split(list(range(10)), SplitSpec(0.8, seed=1))
    assert len(train) == 8 and len(test) == 2
    assert sorted(train + test) == list(range(10))


def test_split_deterministic():
    a = split_indices(1000, SplitSpec(0.8, seed=42))
    b = split_indices(1000, SplitSpec(0.8, seed=42))
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_split_monte_carlo_test_rate():
    n = 1000
    hits = np.zeros(n)
    for seed in range(100):
        _, test = split_indices(n, SplitSpec(0.8, seed=seed))
        hits[test] += 1
    rates = hits / 100
    assert abs(rates.mean() - 0.2) < 1e-9
    assert (np.abs(rates - 0.2) < 0.15).all()  # per-row wobble
    assert abs(rates.mean() - 0.2) <= 0.05


def test_split_validation():
    with pytest.raises(ValueError):
        split_indices(1, SplitSpec(0.8, 0))
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)


# -- logistic regression ---------------------------------------------------------

def test_logistic_separable_perfect_train_accuracy():
    X, y = blobs(np.random.default_rng(0))
    model = fit_logistic(X, y)
    assert evaluate(model, X, y).accuracy == 1.0


def test_logistic_recovers_generating_weight():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(10_000, 1))
    p = 1.0 / (1.0 + np.exp(-3.0 * x[:, 0]))
    y = (rng.random(10_000) < p).astype(float)
    model = fit_logistic(x, y)
    assert abs(model.weights[0] - 3.0) < 0.3


def test_logistic_positive_association_positive_weight():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(2000, 1))
    y = (rng.random(2000) < 1.0 / (1.0 + np.exp(-1.5 * x[:, 0]))).astype(float)
    assert fit_logistic(x, y).weights[0] > 0


def test_logistic_gradient_small_at_optimum():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(500, 3))
    noisy = 0.8 * X[:, 0] - 0.4 * X[:, 2] + rng.normal(scale=2.0, size=500)
    y = (noisy > 0).astype(float)  # overlapping classes: interior optimum
    model = fit_logistic(X, y, grad_tol=1e-7)
    _, gw, gb = logistic_loss_grad(model.weights, model.intercept, X, y)
    assert np.sqrt(gw @ gw + gb * gb) < 1e-6


def test_logistic_gradient_matches_finite_differences():
    rng = np.random.default_rng(4)
    for trial in range(10):
        n, d = int(rng.integers(5, 30)), int(rng.integers(1, 4))
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 2, size=n).astype(float)
        w = rng.normal(size=d)
        b = float(rng.normal())
        loss, gw, gb = logistic_loss_grad(w, b, X, y, l2=0.1)
        h = 1e-6
        for j in range(d):
            e = np.zeros(d)
            e[j] = h
            lp, _, _ = logistic_loss_grad(w + e, b, X, y, l2=0.1)
            lm, _, _ = logistic_loss_grad(w - e, b, X, y, l2=0.1)
            fd = (lp - lm) / (2 * h)
            assert abs(fd - gw[j]) <= 1e-5 * max(1.0, abs(gw[j]))
        lp, _, _ = logistic_loss_grad(w, b + h, X, y, l2=0.1)
        lm, _, _ = logistic_loss_grad(w, b - h, X, y, l2=0.1)
        assert abs((lp - lm) / (2 * h) - gb) <= 1e-5 * max(1.0, abs(gb))


def test_logistic_rejects_single_class():
    X = np.zeros((10, 1))
    with pytest.raises(ValueError):
        fit_logistic(X, np.ones(10))


# -- linear SVC -------------------------------------------------------------------

def test_svc_separable_perfect_accuracy():
    X, y = blobs(np.random.default_rng(5))
    model = fit_linear_svc(X, y)
    assert evaluate(model, X, y).accuracy == 1.0


def test_svc_agrees_with_logistic_on_separable_data():
    X, y = blobs(np.random.default_rng(6), n=100)
    svc = fit_linear_svc(X, y)
    logit = fit_logistic(X, y)
    assert np.array_equal(svc.predict(X), logit.predict(X))


def test_svc_degenerate_geometry_predicts_majority():
    X = np.ones((50, 1))
    y = np.r_[np.ones(30), np.zeros(20)]
    model = fit_linear_svc(X, y)
    assert (model.predict(X) == 1.0).all()


# -- forest ------------------------------------------------------------------------

def test_forest_importance_concentrates_on_signal():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(800, 2))
    y = (X[:, 0] > 0).astype(float)
    model = fit_forest(
        X, y, ForestParams(n_trees=25, sample_cap=400, feature_rule="all"), seed=2
    )
    assert model.importances[0] >= 0.9
    assert abs(model.importances.sum() - 1.0) < 1e-12


def test_forest_constant_target_predicts_constant():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(50, 2))
    model = fit_forest(X, np.ones(50), ForestParams(n_trees=5), seed=0)
    assert (model.predict(X) == 1.0).all()
    assert (model.importances == 0.0).all()  # no split ever happened


def test_forest_regression_memorizes_line():
    x = np.linspace(0, 1, 300).reshape(-1, 1)
    y = x[:, 0].copy()
    model = fit_forest(
        x,
        y,
        ForestParams(n_trees=1, sample_cap=10**9, max_depth=None, bootstrap=False),
        task="regress",
        seed=0,
    )
    pred = model.predict(x)
    r2 = 1 - ((y - pred) ** 2).sum() / ((y - y.mean()) ** 2).sum()
    assert r2 >= 0.99


def test_forest_seeded_determinism():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(300, 3))
    y = (X[:, 1] + 0.3 * rng.normal(size=300) > 0).astype(float)
    params = ForestParams(n_trees=10, sample_cap=200)
    a = fit_forest(X, y, params, seed=11)
    b = fit_forest(X, y, params, seed=11)
    assert np.array_equal(a.predict(X), b.predict(X))
    assert np.array_equal(a.importances, b.importances)


def test_forest_input_validation():
    with pytest.raises(ValueError):
        fit_forest(np.ones((5, 1)), np.array([0, 1, 2, 0, 1.0]))
    with pytest.raises(ValueError):
        fit_forest(np.full((4, 1), np.nan), np.array([0, 1, 0, 1.0]))


# -- evaluation ----------------------------------------------------------------------

def test_always_deny_baseline_reproduces_published_numbers():
    y = np.zeros(1_000_000)
    y[:128_751] = 1.0
    metrics = evaluate(ConstantModel(0.0), np.zeros((len(y), 1)), y)
    assert abs(metrics.accuracy - 0.871249) <= 1e-6
    assert abs(metrics.r2 - (-0.147777)) <= 1e-5
    assert metrics.recall == 0.0


def test_perfect_predictor_metrics():
    y = np.r_[np.zeros(10), np.ones(10)]
    X = y.reshape(-1, 1)
    model = LinearModel(weights=np.array([1.0]), intercept=-0.5, kind="logistic")
    metrics = evaluate(model, X, y)
    assert metrics.accuracy == metrics.precision == metrics.recall == metrics.r2 == 1.0


def test_baseline_r2_closed_form():
    rng = np.random.default_rng(10)
    for p, n in ((0.2, 10_000), (0.35, 5000), (0.05, 20_000)):
        y = (rng.random(n) < p).astype(float)
        metrics = evaluate(ConstantModel(0.0), np.zeros((n, 1)), y)
        rate = y.mean()
        assert abs(metrics.r2 - (-rate / (1 - rate))) <= 1e-12
        # rounding the label-mean-rate predictor to a class gives the same model
        assert round(rate) == 0.0


def test_confusion_marginals_match_class_counts():
    rng = np.random.default_rng(11)
    X, y = blobs(rng, n=80, gap=0.7)
    model = fit_logistic(X, y)
    metrics = evaluate(model, X, y)
    (tn, fp), (fn, tp) = metrics.confusion
    assert tn + fp == (y == 0).sum()
    assert fn + tp == (y == 1).sum()
    assert tn + fp + fn + tp == len(y)


def test_evaluate_empty_set_errors():
    with pytest.raises(ValueError):
        evaluate(ConstantModel(0.0), np.zeros((0, 1)), np.array([]))


# -- decision prediction suite ----------------------------------------------------

def suite_for(config):
    corpus = generate(config)
    table = score_corpus(corpus, build_index(index_universe(corpus)))
    return predict_decision_suite(table, corpus, seed=0), table


def test_suite_partisanship_beats_consistency_on_climate_driven_corpus():
    report, _ = suite_for(ScenarioConfig(n_cases=4000, seed=17, climate_effect=0.35))
    by_name = {e["name"]: e for e in report["feature_sets"]}
    gamma_r2 = by_name["partisanship"]["models"]["logistic"]["metrics"]["r2"]
    phi_r2 = by_name["cohort_consistency"]["models"]["logistic"]["metrics"]["r2"]
    assert gamma_r2 > phi_r2


def test_suite_reports_leakage_warning_and_nonreproducibility():
    report, _ = suite_for(ScenarioConfig(n_cases=500, seed=18, climate_effect=0.2))
    assert "leakage" in report["leakage_warning"].lower() or "decisions" in report["leakage_warning"]
    assert "EOIR" in report["non_reproducible_note"]
    assert "0.790468" in report["non_reproducible_note"]


def test_suite_skips_small_feature_sets():
    # single-climate scenario: every gamma is null, so partisanship sets skip
    # one decision year, one state, one administration: a single climate
    config = ScenarioConfig(
        n_cases=400,
        seed=19,
        n_states=1,
        admin_period_years=40,
        election_period_years=40,
        start_year=1991,
        end_year=1991,
    )
    corpus = generate(config)
    table = score_corpus(corpus, build_index(index_universe(corpus)))
    assert table.mean_gamma() is None
    report = predict_decision_suite(table, corpus, seed=0)
    by_name = {e["name"]: e for e in report["feature_sets"]}
    assert by_name["partisanship"]["skipped"] is True
    assert "skipped" in by_name["partisanship"]["warning"]
    assert by_name["disaggregated_consistency"]["skipped"] is False


def test_suite_unanimous_cohorts_degenerate_to_baseline():
    # one judge per (nat, court) would null omega; instead force unanimity by
    # zero base rate: every decision deny, single-class target -> skipped
    config = ScenarioConfig(n_cases=400, seed=20, base_rate=0.0)
    corpus = generate(config)
    table = score_corpus(corpus, build_index(index_universe(corpus)))
    assert (table.omega[np.isfinite(table.omega)] == 1.0).all()
    report = predict_decision_suite(table, corpus, seed=0)
    for entry in report["feature_sets"]:
        assert entry["skipped"] is True  # single-class labels cannot be fit


def test_suite_determinism():
    a, _ = suite_for(ScenarioConfig(n_cases=800, seed=21, climate_effect=0.25))
    b, _ = suite_for(ScenarioConfig(n_cases=800, seed=21, climate_effect=0.25))
    assert a == b


# -- persistence -------------------------------------------------------------------

def test_linear_model_round_trip(tmp_path):
    X, y = blobs(np.random.default_rng(12))
    model = fit_logistic(X, y)
    save_model(model, tmp_path / "m.json", feature_names=["a", "b"])
    loaded, names = load_model(tmp_path / "m.json")
    assert names == ["a", "b"]
    assert np.array_equal(loaded.predict(X), model.predict(X))
    assert loaded.kind == "logistic"


def test_forest_model_round_trip(tmp_path):
    rng = np.random.default_rng(13)
    X = rng.normal(size=(200, 2))
    y = (X[:, 0] > 0).astype(float)
    model = fit_forest(X, y, ForestParams(n_trees=7, sample_cap=100), seed=3)
    save_model(model, tmp_path / "f.json", feature_names=["a", "b"])
    loaded, _ = load_model(tmp_path / "f.json")
    assert np.array_equal(loaded.predict(X), model.predict(X))
