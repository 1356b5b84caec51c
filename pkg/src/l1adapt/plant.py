"""Uncertain time-varying plant and the single-link robot-arm preset.

The plant is xdot = A_m x + b (omega*u + theta(t)'x + sigma(t,x)) with
measured full state, unknown constant control effectiveness omega, unknown
time-varying parameter vector theta(t) and bounded disturbance sigma.
"""

import numpy as np

from . import lti, signals


class UncertaintySets:
    """Compact sets for the unknowns: omega interval, theta box, sigma bound,
    and the declared rate bounds of theta(t) and sigma(t)."""

    __slots__ = ("omega_l", "omega_u", "theta_box", "delta",
                 "d_theta", "d_sigma")

    def __init__(self, omega_interval, theta_box, delta, d_theta, d_sigma):
        self.omega_l, self.omega_u = (float(omega_interval[0]),
                                      float(omega_interval[1]))
        self.theta_box = np.atleast_2d(np.asarray(theta_box, dtype=float))
        self.delta = float(delta)
        self.d_theta = float(d_theta)
        self.d_sigma = float(d_sigma)
        if not 0 < self.omega_l < self.omega_u:
            raise ValueError("need 0 < omega_l < omega_u")
        if np.any(self.theta_box[:, 0] > self.theta_box[:, 1]):
            raise ValueError("empty theta interval")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.d_theta < 0 or self.d_sigma < 0:
            raise ValueError("rate bounds must be nonnegative")

    @property
    def n(self):
        return self.theta_box.shape[0]

    def inflated(self, eps):
        """Sets enlarged by the projection boundary layer: each interval grows
        by eps times its half-width on both sides."""
        tb = self.theta_box
        w = eps * 0.5 * (tb[:, 1] - tb[:, 0])
        theta_box = np.column_stack([tb[:, 0] - w, tb[:, 1] + w])
        wo = eps * 0.5 * (self.omega_u - self.omega_l)
        return UncertaintySets((self.omega_l - wo, self.omega_u + wo)
                               if self.omega_l - wo > 0 else
                               (max(self.omega_l - wo, 1e-12), self.omega_u + wo),
                               theta_box, self.delta * (1.0 + eps),
                               self.d_theta, self.d_sigma)


class PlantSpec:
    """Concrete plant instance: nominal dynamics plus true unknowns."""

    __slots__ = ("A_m", "b", "c", "true_omega", "true_theta", "true_sigma",
                 "x0")

    def __init__(self, A_m, b, c, true_omega, true_theta, true_sigma, x0):
        self.A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        self.c = np.asarray(c, dtype=float).reshape(-1)
        self.true_omega = float(true_omega)
        self.true_theta = list(true_theta)   # SignalSpec per component
        self.true_sigma = true_sigma         # SignalSpec, may reference x
        self.x0 = np.asarray(x0, dtype=float).reshape(-1)
        n = self.A_m.shape[0]
        if not (len(self.b) == len(self.c) == len(self.x0) == n
                and len(self.true_theta) == n):
            raise ValueError("plant dimensions inconsistent")

    @property
    def n(self):
        return self.A_m.shape[0]

    def theta_at(self, t):
        return np.array([signals.evaluate(s.expr, t) for s in self.true_theta])

    def sigma_at(self, t, x):
        return signals.evaluate(self.true_sigma.expr, t, x)

    def validate(self, sets, horizon, samples=2001):
        """Structural and range checks against the uncertainty sets.

        Raises ValueError on violation: A_m not Hurwitz, (A_m, b) not
        controllable, omega outside Omega, theta(t) components referencing
        the state, or sampled signals violating their declared bounds.
        """
        if not lti.is_hurwitz(self.A_m):
            raise ValueError("A_m is not Hurwitz")
        if lti.controllability_matrix_rank(self.A_m, self.b) < self.n:
            raise ValueError("(A_m, b) is not controllable")
        if not sets.omega_l <= self.true_omega <= sets.omega_u:
            raise ValueError("true omega outside its interval")
        for i, spec in enumerate(self.true_theta):
            if signals.state_vars_used(spec.expr):
                raise ValueError(f"theta{i + 1} may not depend on the state")
            bound = max(abs(sets.theta_box[i, 0]), abs(sets.theta_box[i, 1]))
            box_spec = signals.SignalSpec(spec.expr, bound, sets.d_theta)
            if not signals.verify_declared_bounds(box_spec, horizon, samples):
                raise ValueError(f"theta{i + 1} exceeds its declared set")
        sig_spec = signals.SignalSpec(self.true_sigma.expr, sets.delta,
                                      sets.d_sigma)
        if not signals.verify_declared_bounds(sig_spec, horizon, samples,
                                              n_states=self.n):
            raise ValueError("sigma exceeds its declared bounds")


def plant_derivative(spec, t, x, u):
    """A_m x + b (omega*u + theta(t)'x + sigma(t, x))."""
    x = np.asarray(x, dtype=float)
    theta = spec.theta_at(t)
    sigma = spec.sigma_at(t, x)
    return spec.A_m @ x + spec.b * (spec.true_omega * u + theta @ x + sigma)


SIGMA_VARIANTS = {
    "sin": ("sin(pi*t)", 3.2),
    "medium": ("cos(x1) + 2*sin(10*t) + cos(15*t)", 40.0),
    "fast": ("cos(x1) + 2*sin(100*t) + cos(150*t)", 360.0),
}


def robot_arm_preset(sigma_variant="sin"):
    """Single-link robot arm rotating in a vertical plane, reduced to the
    (omega, theta, sigma) parametrization.

    The gravity torque is folded into sigma's cos(x1) term and the combined
    position/friction torques into theta(t).  Returns (PlantSpec,
    UncertaintySets).
    """
    sigma_text, d_sigma = SIGMA_VARIANTS[sigma_variant]
    n = 2
    theta_exprs = ["2 + cos(pi*t)", "2 + 0.3*sin(pi*t) + 0.2*cos(2*t)"]
    d_theta = 3.5   # ||thetadot||_2 <= sqrt(pi^2 + (0.3 pi + 0.4)^2) ~ 3.42
    theta = [signals.SignalSpec(signals.parse(e, n), 10.0, d_theta)
             for e in theta_exprs]
    sigma = signals.SignalSpec(signals.parse(sigma_text, n), 10.0, d_sigma)
    spec = PlantSpec(A_m=[[0.0, 1.0], [-1.0, -1.4]],
                     b=[0.0, 1.0], c=[1.0, 0.0],
                     true_omega=1.0, true_theta=theta, true_sigma=sigma,
                     x0=[0.0, 0.0])
    sets = UncertaintySets((0.2, 5.0), [[-10.0, 10.0], [-10.0, 10.0]],
                           10.0, d_theta, d_sigma)
    return spec, sets
