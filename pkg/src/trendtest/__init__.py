"""Testing the common-trend assumption of difference-in-differences in two-period panels."""

from trendtest.data import ColumnMap, DesignSpec, PanelDataset, expand_design, load_csv, write_csv
from trendtest.dml import (
    AtetResult,
    DMLConfig,
    TestResult,
    analyze,
    crossfit,
    estimate_atet,
    test_common_trends,
    theta_scores,
)
from trendtest.glm import LassoFit, cv_select_lambda, fit_lasso, fit_lasso_cv, predict
from trendtest.simple_tests import pretrend_ftest, pretrend_ols
from trendtest.sim import SimulationConfig, SimulationSummary, generate, run_monte_carlo

__all__ = [
    "AtetResult", "ColumnMap", "DMLConfig", "DesignSpec", "LassoFit", "PanelDataset",
    "SimulationConfig", "SimulationSummary", "TestResult", "analyze", "crossfit",
    "cv_select_lambda", "estimate_atet", "expand_design", "fit_lasso", "fit_lasso_cv",
    "generate", "load_csv", "predict", "pretrend_ftest", "pretrend_ols", "run_monte_carlo",
    "test_common_trends", "theta_scores", "write_csv",
]
