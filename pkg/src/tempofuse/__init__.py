"""Multi-horizon departure-demand forecasting with a from-scratch autodiff core."""

__version__ = "0.1.0"
