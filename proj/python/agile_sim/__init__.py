# Copyright 2026 The agile-sim Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the agile-sim simulator."""

import csv as _csv
import io as _io

from ._agile_sim import (
    Config,
    ConfigError,
    ProtocolViolation,
    coherence_run,
    experiment_names,
    gather_run,
    ideal_speedup,
    issuers,
    rand_rw_point,
    run_experiment,
    warp_coalesce,
)

__all__ = [
    "Config",
    "ConfigError",
    "ProtocolViolation",
    "coherence_run",
    "experiment_names",
    "gather_run",
    "ideal_speedup",
    "issuers",
    "rand_rw_point",
    "run_experiment",
    "warp_coalesce",
    "rows",
]


def rows(result):
    """Parses the CSV of a run_experiment result into a list of dicts."""
    return list(_csv.DictReader(_io.StringIO(result["csv"])))
