"""Python access to the driftwatch core: drift scores, root cause analysis
and the fleet simulator."""

import json

from ._driftwatch import (
    ConfigError,
    Error,
    InvalidInput,
    SchemaError,
    detect_msp,
    f1,
    fms,
    ks_statistic,
    msp_score,
    softmax,
)
from . import _driftwatch

__all__ = [
    "ConfigError", "Error", "InvalidInput", "SchemaError",
    "analyze", "detect_msp", "f1", "fms", "ks_statistic", "msp_score", "simulate", "softmax",
]


def analyze(entries, thresholds=None, set_reduction=True, counterfactual=True):
    """Root causes of the drift in `entries`, a list of log records
    ({"ts", "device_id", "attributes", "drift"}). Returns the report dict."""
    return json.loads(_driftwatch._analyze(json.dumps(list(entries)), json.dumps(thresholds or {}),
                                           set_reduction, counterfactual))


def simulate(config=None, strategy="by-cause"):
    """Run the fleet simulation. Returns (report dict, summary table)."""
    report, table = _driftwatch._simulate(json.dumps(config or {}), strategy)
    return json.loads(report), table
