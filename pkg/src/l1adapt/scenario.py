"""Scenario files: a sectioned key-value text format bundling everything a
run needs — plant, uncertainty sets, controller gains, reference input,
integration grid and certification options.

Matrices and vectors are written as bracketed row literals ([[0, 1],
[-1, -1.4]]); signals are expression strings in the `signals` language.
`load` validates the whole document before any computation; `dumps`
re-serializes a Scenario so that loading the result reproduces identical
computations.
"""

import ast
import configparser
import io

import numpy as np

from . import controller, lti, plant, signals, sim


class ScenarioError(Exception):
    """Malformed or inconsistent scenario document."""


_REQUIRED = {
    "plant": ["A_m", "b", "c", "x0", "true_omega", "sigma"],
    "sets": ["omega", "theta_box", "delta", "d_theta", "d_sigma"],
    "controller": ["k", "gamma_c"],
    "reference": ["r"],
    "sim": ["dt", "horizon"],
}


class Scenario:
    """Validated inputs for one closed-loop study."""

    __slots__ = ("plant", "sets", "cfg", "r", "settings", "c_o_zeros",
                 "omega_grid_points", "conservative_lambda",
                 "initial_estimates")

    def __init__(self, plant_spec, sets, cfg, r, settings,
                 c_o_zeros=None, omega_grid_points=9,
                 conservative_lambda=True, initial_estimates=None):
        self.plant = plant_spec
        self.sets = sets
        self.cfg = cfg
        self.r = r
        self.settings = settings
        self.c_o_zeros = c_o_zeros
        self.omega_grid_points = omega_grid_points
        self.conservative_lambda = conservative_lambda
        self.initial_estimates = initial_estimates

    @property
    def constant_theta(self):
        """The constant parameter vector when every theta expression is a
        constant (no time or state dependence), else None."""
        values = []
        for s in self.plant.true_theta:
            if signals.uses_time(s.expr) or signals.state_vars_used(s.expr):
                return None
            values.append(signals.evaluate(s.expr, 0.0))
        return np.array(values)


def _literal(section, key, text):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError) as exc:
        raise ScenarioError(f"[{section}] {key}: bad literal {text!r}") from exc


def _matrix(section, key, text, shape=None):
    value = np.atleast_2d(np.asarray(_literal(section, key, text), dtype=float))
    if shape is not None and value.shape != shape:
        raise ScenarioError(f"[{section}] {key}: expected shape {shape}, "
                            f"got {value.shape}")
    return value


def _vector(section, key, text, length=None):
    value = np.asarray(_literal(section, key, text), dtype=float).reshape(-1)
    if length is not None and len(value) != length:
        raise ScenarioError(f"[{section}] {key}: expected {length} entries, "
                            f"got {len(value)}")
    return value


def _scalar(section, key, text):
    try:
        return float(text)
    except ValueError as exc:
        raise ScenarioError(f"[{section}] {key}: bad number {text!r}") from exc


def _boolean(section, key, text):
    low = text.strip().lower()
    if low in ("true", "yes", "1"):
        return True
    if low in ("false", "no", "0"):
        return False
    raise ScenarioError(f"[{section}] {key}: bad boolean {text!r}")


def _expr(section, key, text, n_states):
    try:
        return signals.parse(text, n_states)
    except (signals.SignalSyntaxError, signals.UnknownIdentifier,
            signals.ArityError) as exc:
        raise ScenarioError(f"[{section}] {key}: {exc}") from exc


def loads(text):
    """Parse and validate a scenario document."""
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ScenarioError(f"bad document structure: {exc}") from exc
    for section, keys in _REQUIRED.items():
        if not parser.has_section(section):
            raise ScenarioError(f"missing section [{section}]")
        for key in keys:
            if not parser.has_option(section, key):
                raise ScenarioError(f"missing [{section}] {key}")

    p = parser["plant"]
    A_m = _matrix("plant", "A_m", p["A_m"])
    n = A_m.shape[0]
    if A_m.shape != (n, n):
        raise ScenarioError(f"[plant] A_m: not square ({A_m.shape})")
    b = _vector("plant", "b", p["b"], n)
    c = _vector("plant", "c", p["c"], n)
    x0 = _vector("plant", "x0", p["x0"], n)
    true_omega = _scalar("plant", "true_omega", p["true_omega"])

    s = parser["sets"]
    omega_lu = _vector("sets", "omega", s["omega"], 2)
    theta_box = _matrix("sets", "theta_box", s["theta_box"], (n, 2))
    try:
        sets = plant.UncertaintySets(omega_lu, theta_box,
                                     _scalar("sets", "delta", s["delta"]),
                                     _scalar("sets", "d_theta", s["d_theta"]),
                                     _scalar("sets", "d_sigma", s["d_sigma"]))
    except ValueError as exc:
        raise ScenarioError(f"[sets]: {exc}") from exc

    theta_exprs = []
    for i in range(n):
        key = f"theta{i + 1}"
        if not parser.has_option("plant", key):
            raise ScenarioError(f"missing [plant] {key}")
        expr = _expr("plant", key, p[key], n)
        peak = float(np.max(np.abs(theta_box[i])))
        theta_exprs.append(signals.SignalSpec(expr, peak, sets.d_theta))
    sigma = signals.SignalSpec(_expr("plant", "sigma", p["sigma"], n),
                               sets.delta, sets.d_sigma)
    try:
        plant_spec = plant.PlantSpec(A_m, b, c, true_omega, theta_exprs,
                                     sigma, x0)
    except ValueError as exc:
        raise ScenarioError(f"[plant]: {exc}") from exc

    ct = parser["controller"]
    D_num = _vector("controller", "D_num",
                    ct.get("D_num", "[1]"))
    D_den = _vector("controller", "D_den",
                    ct.get("D_den", "[0, 1]"))
    try:
        D = lti.ss_of_tf(lti.RationalTF(lti.Polynomial(D_num),
                                        lti.Polynomial(D_den)))
    except lti.ImproperTransferFunction as exc:
        raise ScenarioError(f"[controller] D: {exc}") from exc
    Q = (_matrix("controller", "Q", ct["Q"], (n, n)) if "Q" in ct
         else np.eye(n))
    try:
        cfg = controller.ControllerConfig(
            A_m, b, c, _scalar("controller", "gamma_c", ct["gamma_c"]),
            _scalar("controller", "k", ct["k"]), D, Q, sets,
            projection_eps=_scalar("controller", "projection_eps",
                                   ct.get("projection_eps", "0.1")))
    except (ValueError, lti.NotHurwitz, lti.NotSPD) as exc:
        raise ScenarioError(f"[controller]: {exc}") from exc

    initial_estimates = None
    if any(key in ct for key in ("theta0", "sigma0", "omega0")):
        initial_estimates = (
            _vector("controller", "theta0", ct["theta0"], n)
            if "theta0" in ct else None,
            _scalar("controller", "sigma0", ct["sigma0"])
            if "sigma0" in ct else None,
            _scalar("controller", "omega0", ct["omega0"])
            if "omega0" in ct else None)

    r = _expr("reference", "r", parser["reference"]["r"], 0)

    sm = parser["sim"]
    try:
        settings = sim.SimSettings(
            _scalar("sim", "dt", sm["dt"]),
            _scalar("sim", "horizon", sm["horizon"]),
            int(_scalar("sim", "record_stride", sm.get("record_stride", "1"))))
    except ValueError as exc:
        raise ScenarioError(f"[sim]: {exc}") from exc

    c_o_zeros = None
    omega_grid_points = 9
    conservative_lambda = True
    if parser.has_section("bounds"):
        bd = parser["bounds"]
        if "c_o_zeros" in bd:
            c_o_zeros = list(_vector("bounds", "c_o_zeros", bd["c_o_zeros"],
                                     n - 1))
        if "omega_grid_points" in bd:
            omega_grid_points = int(_scalar("bounds", "omega_grid_points",
                                            bd["omega_grid_points"]))
        if "conservative_lambda" in bd:
            conservative_lambda = _boolean("bounds", "conservative_lambda",
                                           bd["conservative_lambda"])

    return Scenario(plant_spec, sets, cfg, r, settings,
                    c_o_zeros=c_o_zeros,
                    omega_grid_points=omega_grid_points,
                    conservative_lambda=conservative_lambda,
                    initial_estimates=initial_estimates)


def load(path):
    with open(path) as fh:
        return loads(fh.read())


def _rows(matrix):
    matrix = np.atleast_2d(matrix)
    rows = ", ".join("[" + ", ".join(repr(float(v)) for v in row) + "]"
                     for row in matrix)
    return f"[{rows}]"


def _vec(vector):
    return "[" + ", ".join(repr(float(v)) for v in vector) + "]"


def dumps(sc):
    """Serialize a Scenario back to document text."""
    p, sets, cfg = sc.plant, sc.sets, sc.cfg
    out = io.StringIO()
    out.write("[plant]\n")
    out.write(f"A_m = {_rows(p.A_m)}\n")
    out.write(f"b = {_vec(p.b)}\n")
    out.write(f"c = {_vec(p.c)}\n")
    out.write(f"x0 = {_vec(p.x0)}\n")
    out.write(f"true_omega = {p.true_omega!r}\n")
    for i, spec in enumerate(p.true_theta):
        out.write(f"theta{i + 1} = {signals.pretty(spec.expr)}\n")
    out.write(f"sigma = {signals.pretty(p.true_sigma.expr)}\n")
    out.write("\n[sets]\n")
    out.write(f"omega = {_vec([sets.omega_l, sets.omega_u])}\n")
    out.write(f"theta_box = {_rows(sets.theta_box)}\n")
    out.write(f"delta = {sets.delta!r}\n")
    out.write(f"d_theta = {sets.d_theta!r}\n")
    out.write(f"d_sigma = {sets.d_sigma!r}\n")
    out.write("\n[controller]\n")
    out.write(f"k = {cfg.k!r}\n")
    out.write(f"gamma_c = {cfg.gamma_c!r}\n")
    D_tf = lti.tf_of_ss(cfg.D)
    out.write(f"D_num = {_vec(D_tf.num.coeffs)}\n")
    out.write(f"D_den = {_vec(D_tf.den.coeffs)}\n")
    out.write(f"Q = {_rows(cfg.Q)}\n")
    out.write(f"projection_eps = {cfg.projection_eps!r}\n")
    if sc.initial_estimates is not None:
        theta0, sigma0, omega0 = sc.initial_estimates
        if theta0 is not None:
            out.write(f"theta0 = {_vec(theta0)}\n")
        if sigma0 is not None:
            out.write(f"sigma0 = {sigma0!r}\n")
        if omega0 is not None:
            out.write(f"omega0 = {omega0!r}\n")
    out.write("\n[reference]\n")
    out.write(f"r = {signals.pretty(sc.r)}\n")
    out.write("\n[sim]\n")
    out.write(f"dt = {sc.settings.dt!r}\n")
    out.write(f"horizon = {sc.settings.horizon!r}\n")
    out.write(f"record_stride = {sc.settings.record_stride}\n")
    out.write("\n[bounds]\n")
    if sc.c_o_zeros is not None:
        out.write(f"c_o_zeros = {_vec(sc.c_o_zeros)}\n")
    out.write(f"omega_grid_points = {sc.omega_grid_points}\n")
    out.write(f"conservative_lambda = {str(sc.conservative_lambda).lower()}\n")
    return out.getvalue()
