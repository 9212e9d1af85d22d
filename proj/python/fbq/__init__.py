"""FB/LAS single-server queue laboratory: simulator, analytic formulas, validation."""

import json as _json

from ._core import (  # noqa: F401
    ConfigError,
    DivergenceError,
    DomainError,
    Error,
    InfiniteMomentError,
    NoDensityError,
    NumericError,
    OverloadError,
    ServiceDistribution,
    __version__,
    analytic_quantity_names,
    borel_pmf,
    classify,
    coefficient_of_variation,
    cohort_intensity,
    cohort_intensity_integral,
    critical_size,
    decay_rate,
    det_bound,
    fifo_fb_md1_ratio,
    maxq_geometric_bound,
    maxq_time_bound,
    mean_cond_sojourn,
    mean_queue_length,
    queue_length_pgf,
    rho_x,
    slowdown_profile,
    sojourn_lst,
    suite_names,
    v_fixed_point,
)
from . import _core


def _text(config):
    return config if isinstance(config, str) else _json.dumps(config)


def simulate(config, seed=None, allow_overload=False):
    """Run the simulator on a config (dict or JSON text); returns the metrics dict."""
    return _json.loads(_core._simulate(_text(config), seed, allow_overload))


def analytic(config, quantities=()):
    """Analytic report for the config's model; all quantities when none are named."""
    return _json.loads(_core._analytic(_text(config), list(quantities)))


def validate(suite="all", seed=20240611, effort=1.0):
    """Run a validation suite and return its verdicts as dicts."""
    return _json.loads(_core._validate(suite, seed, effort))


def departures(arrivals, sizes, discipline="fb"):
    """Departure time of every job of a fixed trace (arrivals sorted)."""
    return _core._departures(list(arrivals), list(sizes), _json.dumps(discipline))
