from fractions import Fraction

import numpy as np
import pytest

from conftest import make_panel
from trendtest import dml
from trendtest.data import PanelDataset
from trendtest.stats import normal_cdf


def toy_panel():
    d = np.array([1.0, 1.0, 1.0, 0.0, 0.0, 0.0])
    y0 = np.array([1.0, 2.0, 0.0, 1.0, 3.0, 2.0])
    y1 = np.array([3.0, 2.5, 1.0, 2.0, 3.5, 4.0])
    return PanelDataset(y0, y1, d, np.empty((6, 0)))


TOY_PRED = dict(
    mu_y0x=np.array([1.25, 0.5, 0.75, 1.0, 0.25, 1.5]),
    mu_x=np.array([1.0, 1.0, 0.5, 0.75, 0.5, 1.25]),
    p_y0x=np.array([0.5, 0.75, 0.25, 0.5, 0.25, 0.75]),
    p_x=np.array([0.5, 0.5, 0.5, 0.25, 0.5, 0.75]),
)


def theta_by_hand(ds, pred):
    """Exact rational arithmetic of the two normalized DR means."""
    F = lambda v: Fraction(float(v))
    treated = [i for i in range(ds.n) if ds.d[i] == 1]
    ctrl = [i for i in range(ds.n) if ds.d[i] == 0]

    def dr(mu, p):
        odds = {i: F(p[i]) / (1 - F(p[i])) for i in ctrl}
        total = sum(odds.values())
        head = sum(F(mu[i]) for i in treated) / len(treated)
        return head + sum(odds[i] / total * (F(ds.y1[i]) - F(ds.y0[i]) - F(mu[i])) for i in ctrl)

    return dr(pred["mu_y0x"], pred["p_y0x"]) - dr(pred["mu_x"], pred["p_x"])


def test_toy_theta_matches_hand_computation():
    ds = toy_panel()
    scores = dml.theta_scores(ds, dml.Predictions(**TOY_PRED), trim=0.99)
    expected = theta_by_hand(ds, TOY_PRED)
    assert scores.estimate == pytest.approx(float(expected), abs=1e-14)
    assert scores.psi.mean() == pytest.approx(scores.estimate, abs=1e-14)
    for w in scores.weights:
        assert abs(w.sum() - 1.0) < 1e-12


def test_equal_nuisances_give_exact_zero():
    ds = toy_panel()
    c = np.full(6, 0.7)
    q = np.full(6, 0.4)
    s = dml.theta_scores(ds, dml.Predictions(mu_x=c, p_x=q, mu_y0x=c.copy(), p_y0x=q.copy()))
    assert s.estimate == 0.0
    assert np.all(s.psi == 0.0)
    pred = dict(TOY_PRED)
    s = dml.theta_scores(ds, dml.Predictions(mu_x=pred["mu_x"], p_x=pred["p_x"],
                                             mu_y0x=pred["mu_x"], p_y0x=pred["p_x"]))
    assert s.estimate == 0.0


def test_constant_nuisances_give_plain_did():
    ds = make_panel(n=50, seed=4)
    n = ds.n
    pred = dml.Predictions(mu_x=np.full(n, 0.3), p_x=np.full(n, 0.45))
    s = dml.atet_scores(ds, pred)
    plain = ds.dy[ds.d == 1].mean() - ds.dy[ds.d == 0].mean()
    assert abs(s.estimate - plain) < 1e-12
    assert abs(s.psi.mean() - s.estimate) < 1e-12
    assert abs(s.weights[0].sum() - 1.0) < 1e-12


def test_trimming_rules():
    ds = toy_panel()
    pred = dict(TOY_PRED)
    pred["p_y0x"] = pred["p_y0x"].copy()
    pred["p_y0x"][0] = 0.995
    s = dml.theta_scores(ds, dml.Predictions(**pred), trim=0.99)
    assert s.n_trimmed == 1 and 0 not in s.retained
    # exactly at the threshold is kept
    pred["p_y0x"][0] = 0.99
    assert dml.theta_scores(ds, dml.Predictions(**pred), trim=0.99).n_trimmed == 0
    pred["p_y0x"][0] = 0.999
    assert dml.theta_scores(ds, dml.Predictions(**pred), trim=1.0).n_trimmed == 0
    pred["p_x"] = np.full(6, 0.995)
    with pytest.raises(dml.ScoreError):
        dml.theta_scores(ds, dml.Predictions(**pred), trim=0.99)


def test_trim_one_guard_against_unit_propensity():
    ds = toy_panel()
    pred = dict(TOY_PRED)
    pred["p_x"] = pred["p_x"].copy()
    pred["p_x"][4] = 1.0 - 1e-13
    with pytest.raises(dml.ScoreError):
        dml.theta_scores(ds, dml.Predictions(**pred), trim=1.0)


def test_crossfit_two_folds_predicts_each_unit_once():
    ds = make_panel(n=1000, p=5, seed=1)
    sets, pred = dml.crossfit(ds, folds=2, seed=3)
    assert len(sets) == 2 and [s.fold_id for s in sets] == [0, 1]
    assert np.bincount(pred.fold_id).tolist() == [500, 500]
    for arr in (pred.mu_x, pred.p_x, pred.mu_y0x, pred.p_y0x):
        assert np.isfinite(arr).all()
    assert np.all((pred.p_x > 0) & (pred.p_x < 1))
    # out-of-fold: each fold's predictions come from the other fold's fits
    f0 = pred.fold_id == 0
    from trendtest import glm
    np.testing.assert_array_equal(pred.mu_x[f0], glm.predict(sets[0].mu_x, ds.X[f0]))


def test_crossfit_refuses_folds_that_lose_a_class():
    d = np.array([1.0, 0, 0, 0, 0, 0])
    ds = PanelDataset(np.arange(6.0), np.arange(6.0) + 1, d, np.empty((6, 0)))
    with pytest.raises(dml.FoldError, match="too small"):
        dml.crossfit(ds, folds=6, seed=0)


def test_crossfit_thread_count_does_not_change_predictions():
    ds = make_panel(n=600, p=8, seed=2)
    _, one = dml.crossfit(ds, folds=4, seed=5, n_jobs=1)
    _, four = dml.crossfit(ds, folds=4, seed=5, n_jobs=4)
    for k in ("mu_x", "p_x", "mu_y0x", "p_y0x"):
        assert getattr(one, k).tobytes() == getattr(four, k).tobytes()


def test_uninformative_pretreatment_outcome_gives_zero():
    ds = make_panel(n=400, p=4, seed=6)
    zeroed = PanelDataset(np.zeros(ds.n), ds.y1, ds.d, ds.X)
    res = dml.test_common_trends(zeroed, dml.DMLConfig(seed=9))
    assert res.theta_hat == 0.0


def test_result_invariants(panel):
    cfg = dml.DMLConfig(seed=4)
    res = dml.test_common_trends(panel, cfg)
    assert res.se > 0
    assert res.t_stat == pytest.approx(res.theta_hat / res.se, rel=1e-15)
    assert res.p_value == pytest.approx(2 * normal_cdf(-abs(res.t_stat)), abs=1e-15)
    assert res.n_used + res.n_trimmed == panel.n
    assert set(res.to_dict()) == {"theta_hat", "se", "t_stat", "p_value", "n_used",
                                  "n_trimmed", "folds", "seed"}
    _, pred = dml.crossfit(panel, cfg.folds, cfg.seed)
    s = dml.theta_scores(panel, pred, cfg.trim)
    assert abs(s.psi.mean() - res.theta_hat) < 1e-12
    assert res.se == pytest.approx(np.sqrt(np.var(s.psi, ddof=1) / s.psi.size), rel=1e-15)


def test_determinism_across_runs_and_threads(panel):
    a = dml.test_common_trends(panel, dml.DMLConfig(seed=12))
    b = dml.test_common_trends(panel, dml.DMLConfig(seed=12, n_jobs=4))
    assert a == b


def test_analyze_matches_separate_calls(panel):
    cfg = dml.DMLConfig(seed=8)
    test, atet = dml.analyze(panel, cfg)
    assert test == dml.test_common_trends(panel, cfg)
    assert atet == dml.estimate_atet(panel, cfg)


def test_detects_trend_depending_on_y0():
    ds = make_panel(n=1500, p=5, seed=3, shift=0.5)
    res = dml.test_common_trends(ds, dml.DMLConfig(seed=1))
    assert res.p_value < 0.01


def test_atet_recovers_effect(panel):
    ds = make_panel(n=2000, p=5, seed=10)
    res = dml.estimate_atet(ds, dml.DMLConfig(seed=2))
    assert abs(res.atet_hat - 1.0) < 4 * res.se


def test_no_covariates_reduces_to_means():
    ds = make_panel(n=300, p=0, seed=7)
    sets, pred = dml.crossfit(ds, folds=2, seed=1)
    for s in sets:
        train = pred.fold_id != s.fold_id
        ctrl = train & (ds.d == 0)
        assert s.mu_x.intercept == pytest.approx(ds.dy[ctrl].mean(), abs=1e-12)
        assert 1 / (1 + np.exp(-s.p_x.intercept)) == pytest.approx(ds.d[train].mean(), abs=1e-9)
    atet = dml.estimate_atet(ds, dml.DMLConfig(seed=1))
    assert np.isfinite(atet.atet_hat)


@pytest.fixture(scope="module")
def noise_pvalues():
    rng = np.random.default_rng(2024)
    pvals = []
    for rep in range(200):
        n = 300
        y0 = rng.standard_normal(n)
        d = (rng.random(n) < 0.4).astype(float)
        y1 = y0 + rng.standard_normal(n)
        ds = PanelDataset(y0, y1, d, np.empty((n, 0)))
        pvals.append(dml.test_common_trends(ds, dml.DMLConfig(seed=rep)).p_value)
    return np.sort(pvals)


def test_unconditional_test_pvalues_are_uniform_under_null(noise_pvalues):
    # Known to fail: when neither lasso picks up an irrelevant Y0 the two
    # nuisance fits coincide and theta_hat is exactly 0 (p = 1), which puts
    # an atom of roughly 30% at p = 1.
    m = noise_pvalues.size
    ecdf_hi = np.arange(1, m + 1) / m
    ks = max(np.max(ecdf_hi - noise_pvalues), np.max(noise_pvalues - (ecdf_hi - 1 / m)))
    assert ks < 0.1


def test_unconditional_test_size_under_null(noise_pvalues):
    assert np.mean(noise_pvalues <= 0.05) <= 0.10


def test_config_validation():
    with pytest.raises(ValueError):
        dml.DMLConfig(folds=1)
    with pytest.raises(ValueError):
        dml.DMLConfig(trim=0.0)
