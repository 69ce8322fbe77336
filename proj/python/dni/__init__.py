# SPDX-License-Identifier: Apache-2.0
"""Python surface of the dni training engine.

Everything heavy lives in the native module; this package re-exports it and
adds a small json convenience wrapper.
"""

import json as _json

from dni._core import (
    bp_lambda_chain_divergence,
    canonical_config,
    inspect_checkpoint,
    lambda_simplex_deviation,
    make_synthetic_digits,
    oracle_mixture_error,
    rnn_window_recurrence_divergence,
    run_experiment,
    run_sweep,
    verify,
)

__all__ = [
    "bp_lambda_chain_divergence",
    "canonical_config",
    "inspect_checkpoint",
    "lambda_simplex_deviation",
    "make_synthetic_digits",
    "oracle_mixture_error",
    "rnn_window_recurrence_divergence",
    "run_experiment",
    "run_sweep",
    "run",
    "verify",
]


def run(config: dict, resume: str = "") -> dict:
    """Run one experiment from a plain dict config."""
    return run_experiment(_json.dumps(config), resume)
