"""Certification: the small-gain condition, the constant-parameter Hurwitz
sweep, and the performance bounds tying the adaptive loop to its reference
system.

The certified quantities, with H(s) = (sI - A_m)^{-1} b and
C(s) = omega*k*D(s) / (1 + omega*k*D(s)):

* the stability requirement  ||H(s)(1 - C(s))||_L1 * L < 1  with
  L = max over the theta box of sum_i |theta_i|;
* theta_m, the Lyapunov-level bound on the adaptation error, and the
  resulting prediction-error bound sqrt(theta_m / (lambda(P) * gamma_c));
* gamma1/gamma2 bounding ||x - x_ref|| and ||u - u_ref|| for time-varying
  parameters, gamma3/gamma4 for the constant-parameter case.

All frequency-domain norms are worst-cased over a grid on the omega
interval, since C(s) depends on the unknown control effectiveness.
"""

import math

import numpy as np

from . import l1norm, lti


class UnstableC(Exception):
    """Some omega in the grid destabilizes the loop filter C(s)."""


class NotControllable(Exception):
    """The numerator-coefficient matrix of H(s) is rank deficient."""


class CertificateUnavailable(Exception):
    """A precondition of the requested bound computation failed."""


class Certificate:
    """Certification results for one scenario.

    gamma1/gamma2 are finite only when the small-gain condition passes;
    gamma3/gamma4 and hurwitz_sweep_pass are None outside constant-parameter
    mode.  `details` holds the per-term breakdown, including both the
    lambda_min(P) (conservative) and lambda_max(P) variants of the bounds.
    """

    __slots__ = ("l1_condition_value", "l1_condition_pass",
                 "hurwitz_sweep_pass", "theta_m", "xtilde_bound",
                 "gamma1", "gamma2", "gamma3", "gamma4", "c_o", "details")

    def __init__(self, **kw):
        for name in self.__slots__:
            setattr(self, name, kw.pop(name))
        if kw:
            raise TypeError(f"unexpected fields {sorted(kw)}")

    @property
    def passed(self):
        if not self.l1_condition_pass:
            return False
        return self.hurwitz_sweep_pass is not False

    def report(self):
        """Key: value text report, one line per certified quantity."""
        lines = [
            f"l1_condition_value: {self.l1_condition_value:.6g}",
            f"l1_condition_pass: {self.l1_condition_pass}",
        ]
        if self.hurwitz_sweep_pass is not None:
            lines.append(f"hurwitz_sweep_pass: {self.hurwitz_sweep_pass}")
        lines += [
            f"theta_m: {self.theta_m:.6g}",
            f"xtilde_bound: {self.xtilde_bound:.6g}",
            f"gamma1: {self.gamma1:.6g}",
            f"gamma2: {self.gamma2:.6g}",
        ]
        if self.gamma3 is not None:
            lines.append(f"gamma3: {self.gamma3:.6g}")
            lines.append(f"gamma4: {self.gamma4:.6g}")
        lines.append("c_o: " + " ".join(f"{v:.6g}" for v in self.c_o))
        for key in sorted(self.details):
            lines.append(f"details.{key}: {self.details[key]:.6g}")
        return "\n".join(lines)


def compute_L(sets):
    """max over the theta box of sum_i |theta_i| (attained at a vertex)."""
    return float(np.sum(np.max(np.abs(sets.theta_box), axis=1)))


def omega_grid(sets, n_points=9):
    return [float(w) for w in np.linspace(sets.omega_l, sets.omega_u,
                                          n_points)]


def _H_system(A_m, b):
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1, 1)
    return lti.StateSpace(A_m, b, np.eye(A_m.shape[0]))


def _C_system(D, omega, k):
    C = lti.loop_filter(D, omega * k)
    if not lti.is_hurwitz(C.A):
        raise UnstableC(f"C(s) unstable at omega = {omega:g}, k = {k:g}")
    return C


def check_l1_requirement(A_m, b, D, k, sets, rel_tol=l1norm.DEFAULT_REL_TOL,
                         n_points=9):
    """Worst ||H(s)(1 - C(s))||_L1 * L over the omega grid, and whether it
    is below one."""
    L = compute_L(sets)
    if L == 0.0:
        return 0.0, True
    H = _H_system(A_m, b)
    worst = 0.0
    for omega in omega_grid(sets, n_points):
        C = _C_system(D, omega, k)
        G = lti.series(lti.one_minus(C), H)
        worst = max(worst, l1norm.l1_gain(G, rel_tol).value * L)
    return worst, worst < 1.0


def hurwitz_sweep(A_m, b, k, sets, grid_per_dim=5, margin=1e-6):
    """Whether the constant-parameter closed-loop matrix A_g is Hurwitz at
    every vertex and on a uniform interior grid of the theta box times the
    omega interval."""
    from .reference import build_Ag
    if k == 0.0:
        return False
    axes = []
    for lo, hi in sets.theta_box:
        axes.append(np.unique(np.concatenate(
            [[lo, hi], np.linspace(lo, hi, grid_per_dim)])))
    axes.append(np.unique(np.concatenate(
        [[sets.omega_l, sets.omega_u],
         np.linspace(sets.omega_l, sets.omega_u, grid_per_dim)])))
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    for point in points:
        Ag = build_Ag(A_m, b, point[:-1], point[-1], k)
        if not lti.is_hurwitz(Ag, margin):
            return False
    return True


def select_output_vector(A_m, b, zeros):
    """c_o such that c_o' H(s) has monic numerator prod_i (s - z_i).

    The requested zeros must lie strictly in the open left half-plane so the
    resulting scalar transfer function is minimum phase with relative degree
    one.
    """
    A_m = np.atleast_2d(np.asarray(A_m, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A_m.shape[0]
    zeros = [float(z) for z in zeros]
    if len(zeros) != n - 1:
        raise ValueError(f"need exactly {n - 1} zeros for n = {n}")
    if any(z >= 0.0 for z in zeros):
        raise ValueError("zeros must have negative real parts")
    _, M = lti.char_poly_and_adjugate(A_m)
    # N[i, j] = coefficient of s^j in the ith numerator of H(s)
    N = np.column_stack([Mk @ b for Mk in M])
    if np.linalg.matrix_rank(N) < n:
        raise NotControllable("numerator coefficient matrix is rank deficient")
    target = lti.poly_from_roots(zeros).coeffs
    c_o = np.linalg.solve(N.T, target)
    return c_o


def compute_theta_m(sets, P):
    """4 max_Theta sum theta_i^2 + 4 Delta^2 + 4 (omega_u - omega_l)^2
    + 2 (lambda_max(P)/lambda_min(Q)) (max_Theta ||theta||_2 d_theta
    + d_sigma Delta), evaluated on the sets as given (pass the inflated
    sets to cover the projection boundary layer)."""
    peak_sq = np.max(sets.theta_box ** 2, axis=1)
    quad = 4.0 * float(np.sum(peak_sq)) + 4.0 * sets.delta ** 2 \
        + 4.0 * (sets.omega_u - sets.omega_l) ** 2
    drift = 2.0 * (P.lambda_max_P / P.lambda_min_Q) * (
        math.sqrt(float(np.sum(peak_sq))) * sets.d_theta
        + sets.d_sigma * sets.delta)
    return quad + drift


def xtilde_bound(theta_m, lambda_P, gamma_c):
    return math.sqrt(theta_m / (lambda_P * gamma_c))


def _co_H_tf(A_m, b, c_o):
    """c_o' H(s) as a RationalTF (relative degree one, stable numerator when
    c_o came from select_output_vector)."""
    d, M = lti.char_poly_and_adjugate(A_m)
    num = lti.Polynomial([float(c_o @ (Mk @ b)) for Mk in M])
    return lti.RationalTF(num, d)


def _inverse_coH_filter(C_ss, coH, omega=1.0):
    """State-space form of C(s) / (omega * c_o' H(s)): a stable biproper
    scalar system (relative degrees cancel)."""
    C_tf = lti.tf_of_ss(C_ss)
    S = lti.RationalTF(C_tf.num * coH.den,
                       lti.Polynomial(omega * (C_tf.den * coH.num).coeffs))
    return lti.ss_of_tf(S)


def compute_performance_bounds(cfg, c, c_o_zeros=None, n_points=9,
                               conservative_lambda=True,
                               rel_tol=l1norm.DEFAULT_REL_TOL,
                               constant_theta=None, true_omega=None,
                               grid_per_dim=5):
    """Full Certificate for one scenario.

    `cfg` is the ControllerConfig (carries A_m, b, D, k, gamma_c, Q, the
    solved P and the uncertainty sets); `c` the plant output vector.  When
    `constant_theta` (and `true_omega`) are given the constant-parameter
    Hurwitz sweep runs and gamma3/gamma4 are evaluated at that parameter
    point.  A failed small-gain condition yields infinite gamma1/gamma2
    rather than an exception so the report can still be printed.
    """
    A_m, b, D, k = cfg.A_m, cfg.b, cfg.D, cfg.k
    sets = cfg.sets
    inflated = sets.inflated(cfg.projection_eps)
    n = cfg.n
    if c_o_zeros is None:
        c_o_zeros = [-1.0] * (n - 1)
    c_o = select_output_vector(A_m, b, c_o_zeros)
    coH = _co_H_tf(A_m, b, c_o)
    sum_co = float(np.sum(np.abs(c_o)))

    L = compute_L(sets)
    theta_m = compute_theta_m(inflated, cfg.P)
    bound_min = xtilde_bound(theta_m, cfg.P.lambda_min_P, cfg.gamma_c)
    bound_max = xtilde_bound(theta_m, cfg.P.lambda_max_P, cfg.gamma_c)
    sqrt_term = bound_min if conservative_lambda else bound_max

    H = _H_system(A_m, b)
    worst_G = worst_C = worst_C_over_w = worst_inv = 0.0
    for omega in omega_grid(sets, n_points):
        C = _C_system(D, omega, k)
        worst_G = max(worst_G, l1norm.l1_gain(
            lti.series(lti.one_minus(C), H), rel_tol).value)
        norm_C = l1norm.l1_gain(C, rel_tol).value
        worst_C = max(worst_C, norm_C)
        worst_C_over_w = max(worst_C_over_w, norm_C / omega)
        worst_inv = max(worst_inv, l1norm.l1_gain(
            _inverse_coH_filter(C, coH, omega), rel_tol).value)

    value = worst_G * L
    condition_pass = value < 1.0
    if condition_pass:
        gamma1 = worst_C / (1.0 - value) * sqrt_term
        gamma2 = worst_C_over_w * L * gamma1 + worst_inv * sum_co * sqrt_term
    else:
        gamma1 = gamma2 = math.inf

    sweep_pass = None
    gamma3 = gamma4 = None
    if constant_theta is not None:
        from .reference import build_Ag
        if true_omega is None:
            raise CertificateUnavailable(
                "constant-parameter mode needs the true omega")
        theta = np.asarray(constant_theta, dtype=float).reshape(-1)
        sweep_pass = hurwitz_sweep(A_m, b, k, sets, grid_per_dim)
        Ag = build_Ag(A_m, b, theta, true_omega, k)
        if lti.is_hurwitz(Ag):
            C_true = _C_system(D, true_omega, k)
            bg = np.concatenate([b, [0.0]]).reshape(-1, 1)
            Hg = lti.StateSpace(Ag, bg, np.eye(n + 1))
            inv_coH = _inverse_coH_filter(C_true, coH)
            gamma3 = (l1norm.l1_gain(lti.series(inv_coH, Hg), rel_tol).value
                      * sum_co * sqrt_term)
            norm_C_true = l1norm.l1_gain(C_true, rel_tol).value
            inv_true = l1norm.l1_gain(
                _inverse_coH_filter(C_true, coH, true_omega), rel_tol).value
            gamma4 = (norm_C_true / true_omega * float(np.sum(np.abs(theta)))
                      * gamma3 + inv_true * sum_co * sqrt_term)
        else:
            sweep_pass = False
            gamma3 = gamma4 = math.inf

    details = {
        "L": L,
        "norm_G_worst": worst_G,
        "norm_C_worst": worst_C,
        "norm_C_over_omega_worst": worst_C_over_w,
        "norm_inverse_filter_worst": worst_inv * sum_co,
        "lambda_min_P": cfg.P.lambda_min_P,
        "lambda_max_P": cfg.P.lambda_max_P,
        "xtilde_bound_lambda_min": bound_min,
        "xtilde_bound_lambda_max": bound_max,
    }
    if condition_pass:
        details["gamma1_lambda_min"] = worst_C / (1.0 - value) * bound_min
        details["gamma1_lambda_max"] = worst_C / (1.0 - value) * bound_max
    return Certificate(l1_condition_value=value,
                       l1_condition_pass=condition_pass,
                       hurwitz_sweep_pass=sweep_pass,
                       theta_m=theta_m,
                       xtilde_bound=bound_min,
                       gamma1=gamma1, gamma2=gamma2,
                       gamma3=gamma3, gamma4=gamma4,
                       c_o=c_o, details=details)
