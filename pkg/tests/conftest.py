"""Shared fixtures: validated specs and hand-built environments.

``env_from_increments`` realizes a prescribed potential: increment
``delta_x = V(x) - V(x-1) = log rho_x`` maps to ``omega_x = 1/(1+e^delta)``,
so tests can lay out exact landscapes.  Such environments carry a real spec
(used for kappa) but must stay inside their window: extension would resample
from the spec's law instead of the hand-built values.
"""

import numpy as np
import pytest

from rwrelab.envmodel import Environment, validate_spec


@pytest.fixture(scope="session")
def lognormal_half():
    """Log-normal law with kappa = 1/2 exactly."""
    return validate_spec("lognormal", {"mu": -0.25, "sigma": 1.0})


def env_from_increments(spec, lo, increments):
    """Environment on [lo, lo + len(increments)] realizing the given potential
    increments at sites lo+1 .. lo+len(increments); omega at site lo is 1/2
    (unused by the potential)."""
    deltas = np.asarray(increments, dtype=float)
    omega = np.empty(len(deltas) + 1)
    omega[0] = 0.5
    omega[1:] = 1.0 / (1.0 + np.exp(deltas))
    return Environment(spec=spec, master_seed=0, lo=lo, omega=omega)
