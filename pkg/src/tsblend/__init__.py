"""Univariate seasonal forecasting toolkit."""

__version__ = "0.1.0"

from .series import (
    TimeSeries,
    BoxCoxParams,
    SplitSpec,
    load_csv,
    save_csv,
    box_cox,
    inv_box_cox,
    guerrero_lambda,
    difference,
    undifference,
    split,
)
from .results import ForecastResult
from .decomp import Decomposition, loess, stl_decompose, decompose
from .features import (
    FeatureVector,
    characteristics,
    acf,
    pacf,
    acf_pacf,
    eacf,
    adf_test,
    kpss_test,
)
from .arima import (
    ArimaSpec,
    ArimaFit,
    InfoCriteria,
    fit_arima,
    info_criteria,
    auto_arima,
    forecast_arima,
    psi_weights,
    fourier_terms,
    DhrFit,
    fit_dhr,
    forecast_dhr,
)
from .ets import (
    EtsSpec,
    EtsFit,
    fit_ses,
    fit_holt_winters,
    fit_ets,
    fit_ets_auto,
    forecast_ets,
)
from .bootstrap import BootstrapConfig, mbb, generate_bootstrap_series, bagged_ets
