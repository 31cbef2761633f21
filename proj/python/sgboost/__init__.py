"""Boosted CNN ensembles with dynamic pixel-subgrid selection."""

from ._core import (
    ConfigError,
    Ensemble,
    Error,
    FormatError,
    GeometryError,
    LabelError,
    NumericError,
    StateError,
    boost_weights,
    config_defaults,
    functional_gradient,
    kept_count,
    line_search,
    load_checkpoint,
    make_synthetic,
    multiclass_loss,
    risk,
    row_col_scores,
    run_experiment,
    select_subgrid,
)

__all__ = [
    "ConfigError",
    "Ensemble",
    "Error",
    "FormatError",
    "GeometryError",
    "LabelError",
    "NumericError",
    "StateError",
    "boost_weights",
    "config_defaults",
    "functional_gradient",
    "kept_count",
    "line_search",
    "load_checkpoint",
    "make_synthetic",
    "multiclass_loss",
    "risk",
    "row_col_scores",
    "run_experiment",
    "select_subgrid",
]
