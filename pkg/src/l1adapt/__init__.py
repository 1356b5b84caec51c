"""Simulation and certification toolkit for an adaptive control architecture
with guaranteed transient performance.

The package certifies a small-gain stability condition for the filtered
adaptive loop, computes the performance bounds relating the closed loop to
its non-implementable reference system, and verifies those bounds against
deterministic fixed-step simulations.
"""

from importlib import resources

from .bounds import (Certificate, check_l1_requirement, compute_L,
                     compute_performance_bounds, compute_theta_m,
                     hurwitz_sweep, select_output_vector)
from .controller import ControllerConfig, ControllerState
from .l1norm import L1GainResult, l1_gain, small_gain_check
from .lti import (LyapunovPair, Polynomial, RationalTF, StateSpace,
                  feedforward_gain, lyapunov_solve)
from .plant import PlantSpec, UncertaintySets, robot_arm_preset
from .scenario import Scenario, ScenarioError
from .signals import SignalSpec, parse as parse_signal
from .sim import (Metrics, SimSettings, Trace, run_scenario,
                  step_convergence_check, write_trace_csv)

__version__ = "0.1.0"

BUILTIN_SCENARIOS = ("robot_arm_sin", "robot_arm_medium", "robot_arm_fast",
                     "robot_arm_const_theta")


def builtin_scenario_text(name):
    """Document text of a bundled scenario (see BUILTIN_SCENARIOS)."""
    if name not in BUILTIN_SCENARIOS:
        raise KeyError(f"unknown scenario {name!r}; "
                       f"choose from {BUILTIN_SCENARIOS}")
    return (resources.files(__name__) / "scenarios" / f"{name}.scn").read_text()


def load_builtin_scenario(name):
    """Parsed Scenario for a bundled scenario file."""
    from . import scenario
    return scenario.loads(builtin_scenario_text(name))
