"""EV and charging-station market toolkit."""

import json

from ._evnet import EvnetError, __version__, calibrate_constant, run_cli, simulate_reduced_form
from ._evnet import solve_annual_fixed_point, synth
from . import _evnet

__all__ = [
    "EvnetError",
    "__version__",
    "calibrate_constant",
    "describe",
    "estimate",
    "forecast",
    "run_cli",
    "simulate_reduced_form",
    "solve_annual_fixed_point",
    "synth",
]


def estimate(csv, method="gmm", burden="linear", delta=0.95, lenient=False):
    """Estimate demand and supply from panel CSV text."""
    return json.loads(_evnet.estimate(csv, method, burden, delta, lenient))


def forecast(county, coefficients, scenarios=(), horizon_end=2045, fleet_vehicles=6.22e6):
    """Compare scenarios from a county fixture and coefficient mappings."""
    return json.loads(
        _evnet.forecast(
            json.dumps(county),
            json.dumps(coefficients),
            [json.dumps(s) for s in scenarios],
            horizon_end,
            fleet_vehicles,
        )
    )


def describe(burden="linear"):
    """Model specification as a dict."""
    return json.loads(_evnet.describe(burden))
