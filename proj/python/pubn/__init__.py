"""Python bindings for the pubn C++ library."""

import json

from ._pubn import (
    PubnError,
    check,
    cli,
    generate,
    loss,
    loss_derivative,
    metrics,
    risk,
    select_eta,
    sigmoid,
)
from ._pubn import run_experiment as _run_experiment


def run_experiment(config):
    """Run an experiment from a config dict or JSON string and return the parsed summary."""
    text = config if isinstance(config, str) else json.dumps(config)
    return json.loads(_run_experiment(text))


__all__ = [
    "PubnError",
    "check",
    "cli",
    "generate",
    "loss",
    "loss_derivative",
    "metrics",
    "risk",
    "run_experiment",
    "select_eta",
    "sigmoid",
]
