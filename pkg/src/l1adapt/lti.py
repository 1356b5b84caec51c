"""Dense LTI algebra for small systems.

State-space realizations, polynomial / transfer-function forms, Lyapunov
equation solving, Hurwitz tests, controllability and static gains.  Everything
here is sized for the n <= 10 systems the rest of the toolkit works with, so
simplicity wins over asymptotics throughout.
"""

import numpy as np


class NotHurwitz(Exception):
    """Matrix has an eigenvalue with nonnegative real part."""


class NotSPD(Exception):
    """Matrix failed a symmetric positive-definiteness test."""


class NoConvergence(Exception):
    """Eigenvalue iteration failed to converge."""


class SingularMatrix(Exception):
    pass


class ZeroDCGain(Exception):
    pass


class ImproperTransferFunction(Exception):
    """Numerator degree exceeds denominator degree."""


class IllPosedLoop(Exception):
    """Feedback interconnection has no well-posed solution."""


# ---------------------------------------------------------------------------
# polynomials (ascending powers of s)


class Polynomial:
    """Real polynomial stored as coefficients in ascending powers of s.

    Trailing (highest-order) zero coefficients are trimmed on construction;
    the zero polynomial is represented by the single coefficient [0.0].
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs):
        c = np.atleast_1d(np.asarray(coeffs, dtype=float))
        nz = np.nonzero(c)[0]
        if nz.size == 0:
            c = np.zeros(1)
        else:
            c = c[: nz[-1] + 1]
        self.coeffs = c

    @property
    def degree(self):
        return len(self.coeffs) - 1

    def is_zero(self):
        return len(self.coeffs) == 1 and self.coeffs[0] == 0.0

    def __call__(self, s):
        # Horner in ascending order
        out = 0.0 * s
        for c in self.coeffs[::-1]:
            out = out * s + c
        return out

    def __add__(self, other):
        other = _as_poly(other)
        n = max(len(self.coeffs), len(other.coeffs))
        a = np.zeros(n)
        a[: len(self.coeffs)] += self.coeffs
        a[: len(other.coeffs)] += other.coeffs
        return Polynomial(a)

    def __sub__(self, other):
        return self + (_as_poly(other) * -1.0)

    def __mul__(self, other):
        if np.isscalar(other):
            return Polynomial(self.coeffs * other)
        other = _as_poly(other)
        return Polynomial(np.convolve(self.coeffs, other.coeffs))

    __rmul__ = __mul__

    def monic(self):
        return Polynomial(self.coeffs / self.coeffs[-1])

    def divmod(self, den):
        """Polynomial division self = q*den + r, deg(r) < deg(den)."""
        den = _as_poly(den)
        if den.is_zero():
            raise ZeroDivisionError("division by zero polynomial")
        q, r = np.polydiv(self.coeffs[::-1], den.coeffs[::-1])
        return Polynomial(np.atleast_1d(q)[::-1]), Polynomial(np.atleast_1d(r)[::-1])

    def roots(self):
        if self.degree < 1:
            return np.array([], dtype=complex)
        return np.roots(self.coeffs[::-1])

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


def _as_poly(p):
    if isinstance(p, Polynomial):
        return p
    return Polynomial(p)


def poly_from_roots(roots):
    p = Polynomial([1.0])
    for r in roots:
        p = p * Polynomial([-r, 1.0])
    return p


# ---------------------------------------------------------------------------
# state-space realizations


class StateSpace:
    """Finite-dimensional LTI realization (A, B, C, D).

    A zero-state system (n = 0) is allowed and represents a static gain D.
    """

    __slots__ = ("A", "B", "C", "D")

    def __init__(self, A, B, C, D=None):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        B = np.asarray(B, dtype=float)
        C = np.asarray(C, dtype=float)
        if A.size == 0:
            A = A.reshape(0, 0)
        if B.ndim == 1:
            B = B.reshape(-1, 1)
        if C.ndim == 1:
            C = C.reshape(1, -1)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ValueError("A must be square")
        if B.shape[0] != n or C.shape[1] != n:
            raise ValueError("B/C dimensions inconsistent with A")
        if D is None:
            D = np.zeros((C.shape[0], B.shape[1]))
        D = np.atleast_2d(np.asarray(D, dtype=float))
        if D.shape != (C.shape[0], B.shape[1]):
            raise ValueError("D dimensions inconsistent with B/C")
        self.A, self.B, self.C, self.D = A, B, C, D

    @property
    def n_states(self):
        return self.A.shape[0]

    @property
    def n_inputs(self):
        return self.B.shape[1]

    @property
    def n_outputs(self):
        return self.C.shape[0]

    def is_strictly_proper(self):
        return not np.any(self.D)

    def is_siso(self):
        return self.n_inputs == 1 and self.n_outputs == 1

    def frequency_response(self, w):
        """Evaluate C (jwI - A)^-1 B + D at each frequency in w (rad/s)."""
        w = np.atleast_1d(np.asarray(w, dtype=float))
        out = np.empty((len(w), self.n_outputs, self.n_inputs), dtype=complex)
        I = np.eye(self.n_states)
        for i, wi in enumerate(w):
            if self.n_states:
                X = np.linalg.solve(1j * wi * I - self.A, self.B)
                out[i] = self.C @ X + self.D
            else:
                out[i] = self.D
        return out

    def __repr__(self):
        return (f"StateSpace(n={self.n_states}, inputs={self.n_inputs}, "
                f"outputs={self.n_outputs})")


class RationalTF:
    """Rational transfer function num(s)/den(s); SISO unless num is a matrix."""

    __slots__ = ("num", "den")

    def __init__(self, num, den):
        self.num = _as_poly(num)
        self.den = _as_poly(den)
        if self.den.is_zero():
            raise ZeroDivisionError("zero denominator")

    def is_proper(self):
        return self.num.degree <= self.den.degree

    def __call__(self, s):
        return self.num(s) / self.den(s)

    def __mul__(self, other):
        if isinstance(other, RationalTF):
            return RationalTF(self.num * other.num, self.den * other.den)
        return RationalTF(self.num * other, self.den)

    __rmul__ = __mul__

    def __repr__(self):
        return f"RationalTF({self.num.coeffs.tolist()}, {self.den.coeffs.tolist()})"


class LyapunovPair:
    """Solution pair of A_m' P + P A_m = -Q with eigenvalue extremes attached."""

    __slots__ = ("P", "Q", "lambda_min_P", "lambda_max_P",
                 "lambda_min_Q", "lambda_max_Q")

    def __init__(self, P, Q):
        self.P = np.asarray(P, dtype=float)
        self.Q = np.asarray(Q, dtype=float)
        ep = np.linalg.eigvalsh(self.P)
        eq = np.linalg.eigvalsh(self.Q)
        self.lambda_min_P = float(ep[0])
        self.lambda_max_P = float(ep[-1])
        self.lambda_min_Q = float(eq[0])
        self.lambda_max_Q = float(eq[-1])


# ---------------------------------------------------------------------------
# operations

LYAP_RESIDUAL_RTOL = 1e-10
RANK_RTOL = 1e-9


def eigenvalues(A):
    """All eigenvalues of a real square matrix, with multiplicity."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.shape[0] == 0:
        return np.array([], dtype=complex)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NoConvergence(str(exc)) from exc


def is_hurwitz(A, margin=0.0):
    """True iff every eigenvalue of A has real part < -margin.

    A zero-state (0 x 0) matrix is vacuously Hurwitz.
    """
    ev = eigenvalues(A)
    if ev.size == 0:
        return True
    return bool(np.max(ev.real) < -margin)


def lyapunov_solve(A_m, Q):
    """Solve A_m' P + P A_m = -Q by Kronecker vectorization.

    A_m must be Hurwitz and Q symmetric positive definite; raises NotHurwitz /
    NotSPD otherwise.  The residual of the returned P is checked against
    1e-10 * max|Q|.
    """
    A_m = np.asarray(A_m, dtype=float)
    Q = np.asarray(Q, dtype=float)
    if not is_hurwitz(A_m):
        raise NotHurwitz("A_m has an eigenvalue with nonnegative real part")
    if not np.allclose(Q, Q.T, rtol=0, atol=1e-12 * max(1.0, np.abs(Q).max())):
        raise NotSPD("Q is not symmetric")
    if np.linalg.eigvalsh(Q)[0] <= 0:
        raise NotSPD("Q is not positive definite")
    n = A_m.shape[0]
    I = np.eye(n)
    # (I (x) A' + A' (x) I) vec(P) = -vec(Q), with vec stacking columns
    K = np.kron(I, A_m.T) + np.kron(A_m.T, I)
    vecP = np.linalg.solve(K, -Q.flatten(order="F"))
    P = vecP.reshape((n, n), order="F")
    P = 0.5 * (P + P.T)
    resid = np.abs(A_m.T @ P + P @ A_m + Q).max()
    if resid > LYAP_RESIDUAL_RTOL * max(np.abs(Q).max(), 1e-300):
        raise NoConvergence(f"Lyapunov residual {resid:.3e} too large")
    return LyapunovPair(P, Q)


def controllability_matrix_rank(A, b):
    """Rank of [b, Ab, ..., A^(n-1) b] via SVD.

    Tolerance is fixed at 1e-9 times the largest column norm.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    n = A.shape[0]
    cols = [b]
    for _ in range(n - 1):
        cols.append(A @ cols[-1])
    M = np.column_stack(cols)
    tol = RANK_RTOL * max(np.linalg.norm(M, axis=0).max(), 1e-300)
    sv = np.linalg.svd(M, compute_uv=False)
    return int(np.sum(sv > tol))


def feedforward_gain(A_m, b, c):
    """k_g = -1 / (c' A_m^-1 b), making the filtered DC gain equal one."""
    A_m = np.asarray(A_m, dtype=float)
    b = np.asarray(b, dtype=float).reshape(-1)
    c = np.asarray(c, dtype=float).reshape(-1)
    try:
        x = np.linalg.solve(A_m, b)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("A_m is singular") from exc
    dc = float(c @ x)
    if abs(dc) < 1e-14 * max(1.0, np.abs(A_m).max()):
        raise ZeroDCGain("c' A_m^-1 b is numerically zero")
    return -1.0 / dc


def char_poly_and_adjugate(A):
    """Faddeev-LeVerrier: det(sI - A) and adj(sI - A).

    Returns (d, M) where d is the characteristic Polynomial (ascending) and
    M is a list of matrices with adj(sI - A) = sum_k M[k] s^k,
    k = 0 .. n-1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    I = np.eye(n)
    Ms = [I]          # coefficient of s^(n-1), filled highest first
    cs = [1.0]        # char poly, descending: s^n + c1 s^(n-1) + ...
    Mk = I
    for k in range(1, n + 1):
        AM = A @ Mk
        ck = -np.trace(AM) / k
        cs.append(ck)
        if k < n:
            Mk = AM + ck * I
            Ms.append(Mk)
    d = Polynomial(cs[::-1])
    M = Ms[::-1]  # index k -> coefficient of s^k
    return d, M


def tf_of_ss(sys):
    """Transfer-function form of a realization.

    SISO systems return a RationalTF; MIMO systems return a nested list
    [output][input] of RationalTF sharing the characteristic denominator.
    """
    d, M = char_poly_and_adjugate(sys.A)
    rows = []
    for i in range(sys.n_outputs):
        row = []
        for j in range(sys.n_inputs):
            if sys.n_states:
                num = Polynomial([float(sys.C[i] @ Mk @ sys.B[:, j]) for Mk in M])
            else:
                num = Polynomial([0.0])
            num = num + d * float(sys.D[i, j])
            row.append(RationalTF(num, d))
        rows.append(row)
    if sys.is_siso():
        return rows[0][0]
    return rows


def ss_of_tf(tf):
    """Controllable-canonical realization of a proper SISO transfer function.

    Direct feedthrough is extracted by polynomial division when
    deg(num) = deg(den).
    """
    if not tf.is_proper():
        raise ImproperTransferFunction(
            f"deg num {tf.num.degree} > deg den {tf.den.degree}")
    den = tf.den.monic()
    num = Polynomial(tf.num.coeffs / tf.den.coeffs[-1])
    d0 = 0.0
    if num.degree == den.degree:
        q, r = num.divmod(den)
        d0 = float(q.coeffs[0])
        num = r
    n = den.degree
    if n == 0:
        return StateSpace(np.zeros((0, 0)), np.zeros((0, 1)),
                          np.zeros((1, 0)), [[d0]])
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -den.coeffs[:-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    C = np.zeros((1, n))
    C[0, : len(num.coeffs)] = num.coeffs
    return StateSpace(A, B, C, [[d0]])


# ---------------------------------------------------------------------------
# interconnections


def constant_gain(D):
    """Zero-state system realizing a static gain matrix."""
    D = np.atleast_2d(np.asarray(D, dtype=float))
    return StateSpace(np.zeros((0, 0)), np.zeros((0, D.shape[1])),
                      np.zeros((D.shape[0], 0)), D)


def scale(sys, alpha):
    """alpha * sys (output scaling)."""
    return StateSpace(sys.A, sys.B, alpha * sys.C, alpha * sys.D)


def series(sys1, sys2):
    """Cascade: input -> sys1 -> sys2 -> output."""
    if sys1.n_outputs != sys2.n_inputs:
        raise ValueError("series dimensions mismatch")
    n1, n2 = sys1.n_states, sys2.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = sys1.A
    A[n1:, n1:] = sys2.A
    A[n1:, :n1] = sys2.B @ sys1.C
    B = np.vstack([sys1.B, sys2.B @ sys1.D])
    C = np.hstack([sys2.D @ sys1.C, sys2.C])
    D = sys2.D @ sys1.D
    return StateSpace(A, B, C, D)


def parallel(sys1, sys2, sign=1.0):
    """sys1 + sign * sys2 (shared input, summed output)."""
    if sys1.n_inputs != sys2.n_inputs or sys1.n_outputs != sys2.n_outputs:
        raise ValueError("parallel dimensions mismatch")
    n1, n2 = sys1.n_states, sys2.n_states
    A = np.zeros((n1 + n2, n1 + n2))
    A[:n1, :n1] = sys1.A
    A[n1:, n1:] = sys2.A
    B = np.vstack([sys1.B, sys2.B])
    C = np.hstack([sys1.C, sign * sys2.C])
    D = sys1.D + sign * sys2.D
    return StateSpace(A, B, C, D)


def feedback(sys, gain=1.0):
    """Unity-gain negative feedback sys / (1 + gain * sys) for square systems.

    Raises IllPosedLoop when the algebraic loop I + gain*D is singular.
    """
    D = sys.D
    E = np.eye(D.shape[0]) + gain * D
    if abs(np.linalg.det(E)) < 1e-12:
        raise IllPosedLoop("I + gain*D is singular")
    Einv = np.linalg.inv(E)
    A = sys.A - gain * (sys.B @ Einv @ sys.C)
    B = sys.B @ Einv
    C = Einv @ sys.C
    Dc = Einv @ D
    return StateSpace(A, B, C, Dc)


def loop_filter(D_sys, loop_gain):
    """C(s) = a D(s) / (1 + a D(s)) for scalar loop gain a = omega*k."""
    return feedback(scale(D_sys, loop_gain))


def one_minus(sys):
    """1 - sys for a SISO system."""
    return parallel(constant_gain([[1.0]]), sys, sign=-1.0)
