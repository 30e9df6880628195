"""Affine commodity term-structure models.

Parameter sets and results are plain dicts (the JSON schema of the C++
library); panels are opaque ``Panel`` objects exposing numpy arrays.
"""

import json

from . import _core
from ._core import (
    CtsmError,
    InvalidArgument,
    Panel,
    information_criteria,
    join_panels,
    lie_trotter_step,
    load_futures_csv,
    load_yields_csv,
    mape,
    models,
    read_panel_csv,
    rmse,
    write_panel_csv,
)

__all__ = [
    "CtsmError",
    "InvalidArgument",
    "Panel",
    "default_params",
    "filter_panel",
    "fit",
    "futures_log_price",
    "information_criteria",
    "join_panels",
    "lie_trotter_step",
    "load_futures_csv",
    "load_yields_csv",
    "loadings",
    "mape",
    "mc_futures_price",
    "models",
    "out_of_sample",
    "read_panel_csv",
    "rmse",
    "simulate_panel",
    "validate",
    "write_panel_csv",
]


def _dump(params):
    return params if isinstance(params, str) else json.dumps(params)


def default_params(model, futures, yields=()):
    return json.loads(_core.default_params(model, list(futures), list(yields)))


def validate(params):
    _core.validate(_dump(params))


def loadings(params, taus):
    """Futures loadings ``(alpha, beta)`` with ``beta`` of shape (len(taus), n)."""
    return _core.loadings(_dump(params), list(taus))


def futures_log_price(params, tau, state):
    return _core.futures_log_price(_dump(params), tau, state)


def mc_futures_price(params, x0, tau, n_paths, seed):
    return _core.mc_futures_price(_dump(params), x0, tau, n_paths, seed)


def simulate_panel(params, futures, yields=(), days=2000, seed=1):
    """Returns ``(panel, states)``; ``states`` is the T x n hidden path."""
    return _core.simulate_panel(_dump(params), list(futures), list(yields), days, seed)


def filter_panel(params, panel):
    return _core.filter(_dump(params), panel)


def fit(model, panel, **config):
    """Maximum likelihood fit; keyword arguments follow the fit config schema."""
    return json.loads(_core.fit(model, panel, json.dumps(config)))


def out_of_sample(params, panel, estimation_futures, holdout, estimation_yields=(), mode="futures", burn_in=50):
    return json.loads(
        _core.out_of_sample(
            _dump(params), mode, panel, list(estimation_futures), list(estimation_yields), list(holdout), burn_in
        )
    )
