"""Publication-style plots from the experiment harness's results.csv files:
log-scale loss curves with min/max trial bands, separability-threshold
markers, and closed-form overlay curves."""

__version__ = "0.1.0"
