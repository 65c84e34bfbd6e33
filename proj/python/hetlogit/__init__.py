"""Python access to the hetlogit C++ core."""

from ._hetlogit import (
    ConfigError,
    DataError,
    EstimationError,
    choice_probabilities,
    config_defaults,
    fit_logit,
    ingest_swissmetro,
    prepare,
    run,
    sha256_file,
    simulate_linear,
)

__all__ = [
    "ConfigError",
    "DataError",
    "EstimationError",
    "choice_probabilities",
    "config_defaults",
    "fit_logit",
    "ingest_swissmetro",
    "prepare",
    "run",
    "sha256_file",
    "simulate_linear",
]
