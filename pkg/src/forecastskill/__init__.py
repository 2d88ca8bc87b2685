"""Measure forecasting skill from text.

Scores probabilistic and numerical forecasts against ground truth, computes
linguistic metrics over forecast justifications, compares skilled and unskilled
groups, trains a text-only skill classifier, and extracts EPS forecasts from
analyst notes.
"""

__version__ = "0.1.0"
