"""Time-frequency conditional Granger causality."""

from ._core import (
    analyze,
    bspline,
    bspline_derivative,
    net_causal_flow,
    oracle,
    run_cli,
    score,
    simulate,
    test_bank,
)

__all__ = [
    "analyze",
    "bspline",
    "bspline_derivative",
    "net_causal_flow",
    "oracle",
    "run_cli",
    "score",
    "simulate",
    "test_bank",
]
