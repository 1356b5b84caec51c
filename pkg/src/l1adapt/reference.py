"""Closed-loop reference system and related analysis oracles.

The reference system is the non-implementable benchmark: it applies the
low-pass filtered exact-cancellation control computed from the TRUE
parameters.  The adaptive closed loop is expected to stay within the
certified distance of it.  Also here: the (n+1)-state constant-theta system
matrix A_g and the unfiltered ideal control.
"""

import numpy as np


class ReferenceState:
    __slots__ = ("x_ref", "filter_state")

    def __init__(self, x_ref, filter_state):
        self.x_ref = x_ref
        self.filter_state = filter_state


def reference_derivatives(rs, t, r, spec, cfg):
    """Derivatives of the reference state and filter, plus u_ref.

    u_ref is the output of C(s)/omega driven by
    rbar_ref = -theta(t)'x_ref - sigma(t, x_ref) + k_g r, realized as the
    feedback loop u_ref = k D (rbar_ref - omega u_ref) around the scenario's
    strictly proper D(s); sigma is evaluated on x_ref, not on the adaptive
    plant state.
    """
    theta = spec.theta_at(t)
    sigma = spec.sigma_at(t, rs.x_ref)
    rbar_ref = -float(theta @ rs.x_ref) - sigma + cfg.k_g * r
    u_ref = cfg.k * float(cfg.D.C[0] @ rs.filter_state)
    dfilter = (cfg.D.A @ rs.filter_state
               + cfg.D.B[:, 0] * (rbar_ref - spec.true_omega * u_ref))
    dx_ref = (spec.A_m @ rs.x_ref
              + spec.b * (spec.true_omega * u_ref + float(theta @ rs.x_ref)
                          + sigma))
    return dx_ref, dfilter, u_ref


def build_Ag(A_m, b, theta, omega, k):
    """Block matrix [[A_m + b theta', b omega], [-k theta', -k omega]]."""
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    theta = np.asarray(theta, dtype=float).reshape(-1)
    n = A_m.shape[0]
    Ag = np.zeros((n + 1, n + 1))
    Ag[:n, :n] = A_m + np.outer(b, theta)
    Ag[:n, n] = b * omega
    Ag[n, :n] = -k * theta
    Ag[n, n] = -k * omega
    return Ag


def constant_theta_derivative(zeta, t, r_val, sigma_val, Ag, b, k, k_g):
    """zetadot = A_g zeta + [b sigma; -k sigma + k k_g r] for the
    (n+1)-state constant-theta form of the reference system."""
    n = len(b)
    drive = np.concatenate([b * sigma_val,
                            [-k * sigma_val + k * k_g * r_val]])
    return Ag @ zeta + drive


def ideal_control(t, x_ref, r, spec, k_g):
    """(k_g r - theta(t)'x_ref - sigma(t, x_ref)) / omega.

    Substituted into the plant this cancels the uncertainties exactly,
    leaving xdot = A_m x + b k_g r.
    """
    theta = spec.theta_at(t)
    sigma = spec.sigma_at(t, x_ref)
    return (k_g * r - float(theta @ np.asarray(x_ref)) - sigma) / spec.true_omega
