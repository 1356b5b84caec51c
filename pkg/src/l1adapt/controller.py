"""The adaptive controller: companion model, projection-based adaptive laws,
and the filtered control law u = -k * (output of D(s) driven by r_u).

The controller never sees the true parameters; it sees the measured state x,
the reference r(t), and its own estimates.  D(s) is required to be strictly
proper so that u depends only on the filter state and no algebraic loop
appears between u and r_u.
"""

import numpy as np

from . import lti


class EstimateOutOfBounds(Exception):
    """An estimate left its inflated compact set (integrator step too large)."""


class ControllerConfig:
    """Gains, filter and solved Lyapunov data for one scenario."""

    __slots__ = ("A_m", "b", "gamma_c", "k", "D", "Q", "P", "k_g", "sets",
                 "projection_eps", "Pb")

    def __init__(self, A_m, b, c, gamma_c, k, D, Q, sets, projection_eps=0.1):
        self.A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
        self.b = np.asarray(b, dtype=float).reshape(-1)
        if not D.is_siso() or not D.is_strictly_proper():
            raise ValueError("D(s) must be SISO and strictly proper")
        if gamma_c <= 0 or k <= 0:
            raise ValueError("gamma_c and k must be positive")
        self.gamma_c = float(gamma_c)
        self.k = float(k)
        self.D = D
        self.Q = np.asarray(Q, dtype=float)
        self.P = lti.lyapunov_solve(self.A_m, self.Q)
        self.k_g = lti.feedforward_gain(self.A_m, self.b, c)
        self.sets = sets
        self.projection_eps = float(projection_eps)
        self.Pb = self.P.P @ self.b

    @property
    def n(self):
        return self.A_m.shape[0]

    def estimate_boxes(self):
        """Rows [lo, hi] for theta_1..theta_n, sigma, omega in that order."""
        s = self.sets
        rows = [list(r) for r in s.theta_box]
        rows.append([-s.delta, s.delta])
        rows.append([s.omega_l, s.omega_u])
        return np.array(rows)

    def initial_state(self, x0, theta0=None, sigma0=None, omega0=None):
        """Companion state starts at the plant state; estimates default to
        the centers of their compact sets."""
        s = self.sets
        theta0 = (0.5 * (s.theta_box[:, 0] + s.theta_box[:, 1])
                  if theta0 is None else np.asarray(theta0, dtype=float))
        sigma0 = 0.0 if sigma0 is None else float(sigma0)
        omega0 = (0.5 * (s.omega_l + s.omega_u)
                  if omega0 is None else float(omega0))
        chi = np.zeros(self.D.n_states)
        return ControllerState(np.asarray(x0, dtype=float).copy(),
                               theta0.copy(), sigma0, omega0, chi)


class ControllerState:
    __slots__ = ("x_hat", "theta_hat", "sigma_hat", "omega_hat", "chi")

    def __init__(self, x_hat, theta_hat, sigma_hat, omega_hat, chi):
        self.x_hat = x_hat
        self.theta_hat = theta_hat
        self.sigma_hat = float(sigma_hat)
        self.omega_hat = float(omega_hat)
        self.chi = chi


def proj_scalar(update, estimate, lo, hi, eps):
    """Boundary-layer projection for one box component.

    Inside [lo, hi] the update passes unchanged.  In the layer of width
    eps*(hi-lo)/2 outside the box an outward update is scaled linearly to
    zero at the layer's outer edge; inward updates always pass.
    """
    w = eps * 0.5 * (hi - lo)
    slack = 1e-9 * max(1.0, hi - lo) + 0.01 * w
    if estimate > hi + w + slack or estimate < lo - w - slack:
        raise EstimateOutOfBounds(
            f"estimate {estimate} outside [{lo - w}, {hi + w}]")
    if w <= 0.0:  # degenerate layer: clamp at the boundary itself
        if (update > 0.0 and estimate >= hi) or \
                (update < 0.0 and estimate <= lo):
            return 0.0
        return update
    if update > 0.0 and estimate > hi:
        if estimate >= hi + w:
            return 0.0
        return update * (1.0 - (estimate - hi) / w)
    if update < 0.0 and estimate < lo:
        if estimate <= lo - w:
            return 0.0
        return update * (1.0 - (lo - estimate) / w)
    return update


def proj(update, estimate, box, eps):
    """Componentwise boundary-layer projection on a box (rows [lo, hi])."""
    update = np.atleast_1d(np.asarray(update, dtype=float))
    estimate = np.atleast_1d(np.asarray(estimate, dtype=float))
    box = np.atleast_2d(np.asarray(box, dtype=float))
    return np.array([proj_scalar(update[i], estimate[i],
                                 box[i, 0], box[i, 1], eps)
                     for i in range(len(update))])


def adaptive_derivatives(cs, x, u, cfg):
    """Time derivatives of (theta_hat, sigma_hat, omega_hat).

    Raw gradients are -x * (xtilde'Pb), -(xtilde'Pb) and -(xtilde'Pb) u,
    each projected onto its compact set and scaled by gamma_c.
    """
    x = np.asarray(x, dtype=float)
    xtilde = cs.x_hat - x
    dot = float(xtilde @ cfg.Pb)
    s = cfg.sets
    eps = cfg.projection_eps
    dtheta = cfg.gamma_c * proj(-x * dot, cs.theta_hat, s.theta_box, eps)
    dsigma = cfg.gamma_c * proj_scalar(-dot, cs.sigma_hat,
                                       -s.delta, s.delta, eps)
    domega = cfg.gamma_c * proj_scalar(-dot * u, cs.omega_hat,
                                       s.omega_l, s.omega_u, eps)
    return dtheta, dsigma, domega


def control_derivatives(cs, x, r, cfg):
    """Filter-state derivative, control value, and companion-model derivative.

    u = -k * (D's output), dchi = A_D chi + B_D (omega_hat*u + rbar) with
    rbar = theta_hat'x + sigma_hat - k_g r, and the companion model follows
    the plant structure with estimates in place of the unknowns.
    """
    x = np.asarray(x, dtype=float)
    u = -cfg.k * float(cfg.D.C[0] @ cs.chi)
    rbar = float(cs.theta_hat @ x) + cs.sigma_hat - cfg.k_g * r
    r_u = cs.omega_hat * u + rbar
    dchi = cfg.D.A @ cs.chi + cfg.D.B[:, 0] * r_u
    dx_hat = (cfg.A_m @ cs.x_hat
              + cfg.b * (cs.omega_hat * u + float(cs.theta_hat @ x)
                         + cs.sigma_hat))
    return dchi, u, dx_hat
