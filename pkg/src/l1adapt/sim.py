"""Deterministic fixed-step integration of the coupled closed loop.

Plant, companion model, adaptive laws, control filter and (optionally) the
closed-loop reference system are integrated as one monolithic state vector on
one RK4 grid, so sup-norm comparisons between subsystems need no
interpolation.  For speed the coupled derivative and the stepping loop are
generated as scalar source code specialized to the scenario (signal
expressions and gains inlined as literals) and compiled with numba when it is
available; the generated code runs unchanged, only slower, without it.
"""

import math
import warnings

import numpy as np

from . import signals

try:
    from numba import njit
    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover
    _HAVE_NUMBA = False

DIVERGENCE_LIMIT = 1e9
STIFFNESS_SOFT = 0.1
STIFFNESS_HARD = 0.5


class Diverged(Exception):
    def __init__(self, t_last, trace):
        super().__init__(f"state norm exceeded {DIVERGENCE_LIMIT:g} "
                         f"near t = {t_last:.6g}")
        self.t_last = t_last
        self.trace = trace


class EstimateOutOfBounds(Exception):
    def __init__(self, t_last):
        super().__init__(f"estimate left its inflated set near t = "
                         f"{t_last:.6g}; reduce dt")
        self.t_last = t_last


class SimSettings:
    """Fixed integration grid: step, horizon and recording stride."""

    __slots__ = ("dt", "horizon", "record_stride")

    def __init__(self, dt, horizon, record_stride=1):
        if dt <= 0 or horizon <= 0 or record_stride < 1:
            raise ValueError("dt, horizon and record_stride must be positive")
        nsteps = horizon / dt
        if abs(nsteps - round(nsteps)) > 1e-6 * max(1.0, nsteps):
            raise ValueError("horizon must be an integer number of steps")
        self.dt = float(dt)
        self.horizon = float(horizon)
        self.record_stride = int(record_stride)

    @property
    def n_steps(self):
        return int(round(self.horizon / self.dt))

    def check_stiffness(self, gamma_c):
        product = self.dt * gamma_c
        if product > STIFFNESS_HARD:
            warnings.warn(f"dt*gamma_c = {product:.3g} exceeds "
                          f"{STIFFNESS_HARD}; adaptation may be under-resolved",
                          stacklevel=2)
        elif product > STIFFNESS_SOFT:
            warnings.warn(f"dt*gamma_c = {product:.3g} above "
                          f"{STIFFNESS_SOFT}; consider a smaller step",
                          stacklevel=2)


class Trace:
    """Time-indexed record of every closed-loop signal on the recording grid."""

    __slots__ = ("t", "x", "x_hat", "u", "theta_hat", "sigma_hat",
                 "omega_hat", "x_ref", "u_ref", "r", "with_reference")

    def __init__(self, t, x, x_hat, u, theta_hat, sigma_hat, omega_hat,
                 x_ref, u_ref, r, with_reference):
        self.t = t
        self.x = x
        self.x_hat = x_hat
        self.u = u
        self.theta_hat = theta_hat
        self.sigma_hat = sigma_hat
        self.omega_hat = omega_hat
        self.x_ref = x_ref
        self.u_ref = u_ref
        self.r = r
        self.with_reference = with_reference

    @property
    def xtilde(self):
        return self.x_hat - self.x

    @property
    def e(self):
        return self.x - self.x_ref

    def tracking_rms_after(self, t0):
        """RMS of y - r = x1 - r over t >= t0."""
        mask = self.t >= t0
        err = self.x[mask, 0] - self.r[mask]
        return float(np.sqrt(np.mean(err ** 2)))


class Metrics:
    """Discrete sup-norm metrics over the recorded grid."""

    __slots__ = ("sup_xtilde", "sup_e", "sup_u_err", "terminal_xtilde")

    def __init__(self, trace):
        self.sup_xtilde = float(np.max(np.abs(trace.xtilde)))
        tail = trace.t >= trace.t[-1] - 0.1 * (trace.t[-1] - trace.t[0])
        self.terminal_xtilde = float(np.max(np.abs(trace.xtilde[tail])))
        if trace.with_reference:
            self.sup_e = float(np.max(np.abs(trace.e)))
            self.sup_u_err = float(np.max(np.abs(trace.u - trace.u_ref)))
        else:
            self.sup_e = math.nan
            self.sup_u_err = math.nan

    def __repr__(self):
        return (f"Metrics(sup_xtilde={self.sup_xtilde:.6g}, "
                f"sup_e={self.sup_e:.6g}, sup_u_err={self.sup_u_err:.6g}, "
                f"terminal_xtilde={self.terminal_xtilde:.6g})")


def rk4_step(f, t, state, dt):
    """One classical 4-stage Runge-Kutta update of state' = f(t, state)."""
    state = np.asarray(state, dtype=float)
    k1 = np.asarray(f(t, state))
    k2 = np.asarray(f(t + 0.5 * dt, state + 0.5 * dt * k1))
    k3 = np.asarray(f(t + 0.5 * dt, state + 0.5 * dt * k2))
    k4 = np.asarray(f(t + dt, state + dt * k3))
    out = state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(out)):
        raise FloatingPointError(f"non-finite state after step at t = {t}")
    return out


# ---------------------------------------------------------------------------
# code generation for the coupled derivative


def _lit(x):
    return repr(float(x))


def _gen_proj(lines, g, p, lo, hi, w):
    """Append boundary-layer projection code mutating local `g`."""
    if w > 0.0:
        inv_w = 1.0 / w
        lines.append(f"    if {g} > 0.0 and {p} > {_lit(hi)}:")
        lines.append(f"        {g} = 0.0 if {p} >= {_lit(hi + w)} else "
                     f"{g} * (1.0 - ({p} - {_lit(hi)}) * {_lit(inv_w)})")
        lines.append(f"    elif {g} < 0.0 and {p} < {_lit(lo)}:")
        lines.append(f"        {g} = 0.0 if {p} <= {_lit(lo - w)} else "
                     f"{g} * (1.0 - ({_lit(lo)} - {p}) * {_lit(inv_w)})")
    else:
        lines.append(f"    if {g} > 0.0 and {p} >= {_lit(hi)}:")
        lines.append(f"        {g} = 0.0")
        lines.append(f"    elif {g} < 0.0 and {p} <= {_lit(lo)}:")
        lines.append(f"        {g} = 0.0")


def _dot_text(coeffs, names):
    terms = [f"{_lit(c)} * {v}" for c, v in zip(coeffs, names) if c != 0.0]
    return " + ".join(terms) if terms else "0.0"


def generate_source(spec, cfg, r_expr, with_reference):
    """Source text of the scenario-specialized deriv() and run() functions."""
    n = spec.n
    d = cfg.D.n_states
    base_ref = 3 * n + 2 + d
    ny = base_ref + (n + d if with_reference else 0)
    AM, b = spec.A_m, spec.b
    AD, BD, CD = cfg.D.A, cfg.D.B[:, 0], cfg.D.C[0]
    eps = cfg.projection_eps
    boxes = cfg.estimate_boxes()
    widths = eps * 0.5 * (boxes[:, 1] - boxes[:, 0])

    xs = [f"x{i + 1}" for i in range(n)]
    xhs = [f"xh{i + 1}" for i in range(n)]
    ths = [f"th{i + 1}" for i in range(n)]
    chs = [f"ch{i + 1}" for i in range(d)]
    xrs = [f"xr{i + 1}" for i in range(n)]
    crs = [f"cr{i + 1}" for i in range(d)]

    L = ["from math import sin, cos, exp, fabs", "", ""]
    L.append("def deriv(t, y, dy):")
    for i, v in enumerate(xs):
        L.append(f"    {v} = y[{i}]")
    for i, v in enumerate(xhs):
        L.append(f"    {v} = y[{n + i}]")
    for i, v in enumerate(ths):
        L.append(f"    {v} = y[{2 * n + i}]")
    L.append(f"    sh = y[{3 * n}]")
    L.append(f"    wh = y[{3 * n + 1}]")
    for i, v in enumerate(chs):
        L.append(f"    {v} = y[{3 * n + 2 + i}]")
    L.append(f"    r_val = {signals.to_python(r_expr)}")
    for i, tspec in enumerate(spec.true_theta):
        L.append(f"    tht{i + 1} = {signals.to_python(tspec.expr)}")
    L.append(f"    sig = {signals.to_python(spec.true_sigma.expr)}")
    # control from filter state
    L.append(f"    u = {_lit(-cfg.k)} * ({_dot_text(CD, chs)})")
    L.append(f"    thx_hat = {_dot_text([1.0] * n, [f'{t} * {x}' for t, x in zip(ths, xs)])}")
    L.append(f"    rbar = thx_hat + sh - {_lit(cfg.k_g)} * r_val")
    L.append("    ru = wh * u + rbar")
    for i in range(d):
        L.append(f"    dy[{3 * n + 2 + i}] = {_dot_text(AD[i], chs)}"
                 f" + {_lit(BD[i])} * ru")
    # plant
    L.append(f"    thx = {_dot_text([1.0] * n, [f'tht{i + 1} * {x}' for i, x in enumerate(xs)])}")
    L.append(f"    fx = {_lit(spec.true_omega)} * u + thx + sig")
    for i in range(n):
        L.append(f"    dy[{i}] = {_dot_text(AM[i], xs)} + {_lit(b[i])} * fx")
    # companion model
    L.append("    fh = wh * u + thx_hat + sh")
    for i in range(n):
        L.append(f"    dy[{n + i}] = {_dot_text(AM[i], xhs)} + {_lit(b[i])} * fh")
    # adaptation with projection
    L.append(f"    pdot = {_dot_text(cfg.Pb, [f'({h} - {x})' for h, x in zip(xhs, xs)])}")
    for i in range(n):
        L.append(f"    g = -{xs[i]} * pdot")
        _gen_proj(L, "g", ths[i], boxes[i, 0], boxes[i, 1], widths[i])
        L.append(f"    dy[{2 * n + i}] = {_lit(cfg.gamma_c)} * g")
    L.append("    g = -pdot")
    _gen_proj(L, "g", "sh", boxes[n, 0], boxes[n, 1], widths[n])
    L.append(f"    dy[{3 * n}] = {_lit(cfg.gamma_c)} * g")
    L.append("    g = -pdot * u")
    _gen_proj(L, "g", "wh", boxes[n + 1, 0], boxes[n + 1, 1], widths[n + 1])
    L.append(f"    dy[{3 * n + 1}] = {_lit(cfg.gamma_c)} * g")
    if with_reference:
        for i, v in enumerate(xrs):
            L.append(f"    {v} = y[{base_ref + i}]")
        for i, v in enumerate(crs):
            L.append(f"    {v} = y[{base_ref + n + i}]")
        L.append(f"    sig_r = {signals.to_python(spec.true_sigma.expr, 'xr')}")
        L.append(f"    thxr = {_dot_text([1.0] * n, [f'tht{i + 1} * {x}' for i, x in enumerate(xrs)])}")
        L.append(f"    uref = {_lit(cfg.k)} * ({_dot_text(CD, crs)})")
        L.append(f"    rbar_r = -thxr - sig_r + {_lit(cfg.k_g)} * r_val")
        L.append(f"    ru_r = rbar_r - {_lit(spec.true_omega)} * uref")
        for i in range(n):
            L.append(f"    dy[{base_ref + i}] = {_dot_text(AM[i], xrs)}"
                     f" + {_lit(b[i])} * (\n        {_lit(spec.true_omega)} * uref + thxr + sig_r)")
        for i in range(d):
            L.append(f"    dy[{base_ref + n + i}] = {_dot_text(AD[i], crs)}"
                     f" + {_lit(BD[i])} * ru_r")
    L.append("")
    L.append("")
    # stepping loop: clamp estimates to the inflated box after each step,
    # flag divergence (status 1) and gross estimate escapes (status 2)
    L.append("def run(y, dt, nsteps, stride, rec, k1, k2, k3, k4, yt):")
    L.append(f"    ny = {ny}")
    L.append("    for i in range(ny):")
    L.append("        rec[0, i] = y[i]")
    L.append("    ri = 1")
    L.append("    status = 0")
    L.append("    for step in range(nsteps):")
    L.append("        t = step * dt")
    L.append("        deriv(t, y, k1)")
    L.append("        for i in range(ny):")
    L.append("            yt[i] = y[i] + 0.5 * dt * k1[i]")
    L.append("        deriv(t + 0.5 * dt, yt, k2)")
    L.append("        for i in range(ny):")
    L.append("            yt[i] = y[i] + 0.5 * dt * k2[i]")
    L.append("        deriv(t + 0.5 * dt, yt, k3)")
    L.append("        for i in range(ny):")
    L.append("            yt[i] = y[i] + dt * k3[i]")
    L.append("        deriv(t + dt, yt, k4)")
    L.append("        for i in range(ny):")
    L.append("            y[i] = y[i] + (dt / 6.0) * "
             "(k1[i] + 2.0 * (k2[i] + k3[i]) + k4[i])")
    for j in range(n + 2):
        lo, hi, w = boxes[j, 0], boxes[j, 1], widths[j]
        slack = 1e-9 * max(1.0, hi - lo) + 0.01 * w
        idx = 2 * n + j
        L.append(f"        v = y[{idx}]")
        L.append(f"        if v > {_lit(hi + w)}:")
        L.append(f"            if v > {_lit(hi + w + slack)}:")
        L.append("                status = 2")
        L.append(f"            y[{idx}] = {_lit(hi + w)}")
        L.append(f"        elif v < {_lit(lo - w)}:")
        L.append(f"            if v < {_lit(lo - w - slack)}:")
        L.append("                status = 2")
        L.append(f"            y[{idx}] = {_lit(lo - w)}")
    L.append("        bad = False")
    L.append("        for i in range(ny):")
    L.append(f"            if not (-{_lit(DIVERGENCE_LIMIT)} < y[i] < "
             f"{_lit(DIVERGENCE_LIMIT)}):")
    L.append("                bad = True")
    L.append("        if bad:")
    L.append("            status = 1")
    L.append("        if status != 0:")
    L.append("            for i in range(ny):")
    L.append("                rec[ri, i] = y[i]")
    L.append("            ri += 1")
    L.append("            return status, ri, t + dt")
    L.append("        if (step + 1) % stride == 0:")
    L.append("            for i in range(ny):")
    L.append("                rec[ri, i] = y[i]")
    L.append("            ri += 1")
    L.append("    return 0, ri, nsteps * dt")
    return "\n".join(L) + "\n", ny


_COMPILED = {}


def _compile(source):
    cached = _COMPILED.get(source)
    if cached is not None:
        return cached
    ns = {}
    exec(compile(source, "<l1adapt-sim>", "exec"), ns)
    deriv, run = ns["deriv"], ns["run"]
    if _HAVE_NUMBA:
        ns["deriv"] = deriv = njit(nogil=True)(deriv)
        run = njit(nogil=True)(run)
    _COMPILED[source] = (deriv, run)
    return deriv, run


def run_scenario(spec, cfg, r_expr, settings, with_reference=True,
                 initial_estimates=None):
    """Integrate the coupled closed loop and return (Trace, Metrics).

    `initial_estimates` is an optional (theta0, sigma0, omega0) tuple;
    estimates default to the centers of their compact sets.  Deterministic:
    identical inputs give bit-identical traces.
    """
    n, d = spec.n, cfg.D.n_states
    settings.check_stiffness(cfg.gamma_c)
    source, ny = generate_source(spec, cfg, r_expr, with_reference)
    deriv, run = _compile(source)

    theta0, sigma0, omega0 = initial_estimates or (None, None, None)
    cs = cfg.initial_state(spec.x0, theta0, sigma0, omega0)
    y0 = np.zeros(ny)
    y0[:n] = spec.x0
    y0[n:2 * n] = cs.x_hat
    y0[2 * n:3 * n] = cs.theta_hat
    y0[3 * n] = cs.sigma_hat
    y0[3 * n + 1] = cs.omega_hat
    if with_reference:
        y0[3 * n + 2 + d:3 * n + 2 + d + n] = spec.x0

    nsteps = settings.n_steps
    stride = settings.record_stride
    nrec = nsteps // stride + 2
    rec = np.empty((nrec, ny))
    scratch = [np.empty(ny) for _ in range(5)]
    status, ri, t_last = run(y0, settings.dt, nsteps, stride, rec, *scratch)
    rec = rec[:ri]

    trace = _build_trace(rec, spec, cfg, r_expr, settings, with_reference,
                         status)
    if status == 1:
        raise Diverged(t_last, trace)
    if status == 2:
        raise EstimateOutOfBounds(t_last)
    return trace, Metrics(trace)


def _build_trace(rec, spec, cfg, r_expr, settings, with_reference, status):
    n, d = spec.n, cfg.D.n_states
    nrow = rec.shape[0]
    dt_rec = settings.dt * settings.record_stride
    t = np.arange(nrow) * dt_rec
    if status != 0:  # partial trace: last row is the aborting step
        t[-1] = t[-2] + settings.dt if nrow > 1 else settings.dt
    chi = rec[:, 3 * n + 2:3 * n + 2 + d]
    u = -cfg.k * (chi @ cfg.D.C[0])
    r = np.array([signals.evaluate(r_expr, ti) for ti in t])
    if with_reference:
        base = 3 * n + 2 + d
        x_ref = rec[:, base:base + n]
        u_ref = cfg.k * (rec[:, base + n:base + n + d] @ cfg.D.C[0])
    else:
        x_ref = np.full((nrow, n), np.nan)
        u_ref = np.full(nrow, np.nan)
    return Trace(t=t, x=rec[:, :n], x_hat=rec[:, n:2 * n], u=u,
                 theta_hat=rec[:, 2 * n:3 * n], sigma_hat=rec[:, 3 * n],
                 omega_hat=rec[:, 3 * n + 1], x_ref=x_ref, u_ref=u_ref,
                 r=r, with_reference=with_reference)


def step_convergence_check(spec, cfg, r_expr, settings, with_reference=True):
    """Max pointwise trace deviation between runs at dt and dt/2.

    Used to qualify a step size: the deviation should be well below the
    scale of the states being compared.
    """
    coarse, _ = run_scenario(spec, cfg, r_expr, settings, with_reference)
    fine_settings = SimSettings(settings.dt / 2.0, settings.horizon,
                                settings.record_stride * 2)
    fine, _ = run_scenario(spec, cfg, r_expr, fine_settings, with_reference)
    m = min(len(coarse.t), len(fine.t))
    dev = max(np.max(np.abs(coarse.x[:m] - fine.x[:m])),
              np.max(np.abs(coarse.x_hat[:m] - fine.x_hat[:m])))
    if with_reference:
        dev = max(dev, np.max(np.abs(coarse.x_ref[:m] - fine.x_ref[:m])))
    return float(dev)


CSV_FLOAT = repr


def trace_header(n):
    cols = (["t"] + [f"x{i + 1}" for i in range(n)]
            + [f"xhat{i + 1}" for i in range(n)] + ["u"]
            + [f"thetahat{i + 1}" for i in range(n)]
            + ["sigmahat", "omegahat"]
            + [f"xref{i + 1}" for i in range(n)] + ["uref", "r"])
    return ",".join(cols)


def write_trace_csv(trace, path):
    """Full-precision CSV export (decimal round-trip exact)."""
    n = trace.x.shape[1]
    with open(path, "w") as fh:
        fh.write(trace_header(n) + "\n")
        for i in range(len(trace.t)):
            row = ([trace.t[i]] + list(trace.x[i]) + list(trace.x_hat[i])
                   + [trace.u[i]] + list(trace.theta_hat[i])
                   + [trace.sigma_hat[i], trace.omega_hat[i]]
                   + list(trace.x_ref[i]) + [trace.u_ref[i], trace.r[i]])
            fh.write(",".join(CSV_FLOAT(float(v)) for v in row) + "\n")
