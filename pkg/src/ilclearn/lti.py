"""Discrete-time LTI plumbing for trial-based learning control.

A single-input single-output loop (plant P under feedback controller C,
feedforward injected at the plant input) is frozen over a finite horizon
of N samples into its lifted form: length-N signals are vectors and the
causal maps between them are N-by-N lower-triangular Toeplitz matrices
built from impulse responses.

With S = (I + PC)^-1 the sensitivity and J = SP the process sensitivity,
the measured error of a trial with reference r and feedforward f is

    e = S r - J f

so trial-to-trial updates of f act on e through J alone.

Notation
--------
Transfer function coefficients are in descending powers of z, e.g.
num=[1], den=[1, 0] is 1/z.  State space is the controllable canonical
form, impulse response h[0] = D, h[k] = C A^(k-1) B.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STABILITY_MARGIN = 1e-9


class UnstableLoopError(ValueError):
    pass


@dataclass(frozen=True)
class TransferFunction:
    """Rational discrete-time transfer function.

    :param num: numerator coefficients, descending powers of z.
    :param den: denominator coefficients, descending powers of z.
    :param sample_time: sample period in seconds, > 0.
    """

    num: np.ndarray
    den: np.ndarray
    sample_time: float

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=float))
        den = np.atleast_1d(np.asarray(self.den, dtype=float))
        if num.ndim != 1 or den.ndim != 1:
            raise ValueError("coefficient arrays must be one-dimensional")
        if den.size == 0 or np.all(den == 0.0):
            raise ValueError("denominator must be nonzero")
        # strip leading zeros so degrees are meaningful
        den = den[np.argmax(den != 0.0):]
        if num.size and np.any(num != 0.0):
            num = num[np.argmax(num != 0.0):]
        else:
            num = np.zeros(1)
        if num.size > den.size:
            raise ValueError("transfer function must be proper "
                             "(numerator degree %d > denominator degree %d)"
                             % (num.size - 1, den.size - 1))
        if self.sample_time <= 0.0:
            raise ValueError("sample_time must be positive, got %g" % self.sample_time)
        # normalize to a monic denominator
        object.__setattr__(self, "num", num / den[0])
        object.__setattr__(self, "den", den / den[0])

    @property
    def order(self) -> int:
        return self.den.size - 1

    def padded_num(self) -> np.ndarray:
        """Numerator padded with leading zeros to denominator length."""
        return np.concatenate([np.zeros(self.den.size - self.num.size), self.num])


@dataclass(frozen=True)
class StateSpaceModel:
    """Discrete state space x' = A x + B u, y = C x + D u."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    sample_time: float

    @property
    def order(self) -> int:
        return self.a.shape[0]


def tf_to_state_space(tf: TransferFunction) -> StateSpaceModel:
    """Realize a proper transfer function in controllable canonical form.

    For H(z) = (b0 z^n + ... + bn) / (z^n + a1 z^(n-1) + ... + an) the
    realization is

        A = [[-a1 ... -an], [I 0]],  B = [1 0 ... 0]^T,
        C = [b1 - b0 a1, ..., bn - b0 an],  D = b0.

    A zeroth-order (static gain) system yields empty A, B, C.
    """
    n = tf.order
    b = tf.padded_num()
    d = b[0]
    a_coeffs = tf.den[1:]
    a = np.zeros((n, n))
    if n > 0:
        a[0, :] = -a_coeffs
        if n > 1:
            a[1:, :-1] = np.eye(n - 1)
    b_mat = np.zeros((n, 1))
    if n > 0:
        b_mat[0, 0] = 1.0
    c_mat = (b[1:] - d * a_coeffs).reshape(1, n)
    return StateSpaceModel(a, b_mat, c_mat, np.array([[d]]), tf.sample_time)


def impulse_response(model: StateSpaceModel, n_samples: int) -> np.ndarray:
    """First n_samples Markov parameters: h[0] = D, h[k] = C A^(k-1) B."""
    if n_samples < 0:
        raise ValueError("n_samples must be nonnegative")
    h = np.zeros(n_samples)
    if n_samples == 0:
        return h
    h[0] = model.d[0, 0]
    x = model.b[:, 0].copy()
    for k in range(1, n_samples):
        h[k] = model.c[0, :] @ x
        x = model.a @ x
    return h


def lifted_toeplitz(h: np.ndarray, n: int) -> np.ndarray:
    """Lower-triangular Toeplitz convolution matrix from an impulse response.

    T[i, j] = h[i - j] for i >= j, zero above the diagonal.
    """
    h = np.asarray(h, dtype=float)
    if h.size < n:
        raise ValueError("impulse response has %d samples, horizon needs %d" % (h.size, n))
    idx = np.arange(n)
    lag = idx[:, None] - idx[None, :]
    return np.where(lag >= 0, h[np.clip(lag, 0, n - 1)], 0.0)


def _closed_loop_realization(plant: TransferFunction, controller: TransferFunction):
    """State-space interconnection of the loop of a servo task.

    Signals: u = C_out + f drives the plant, y is its output, and the
    error e = r - y feeds the controller.  Returns the loop matrix A_cl,
    the input matrices for r and f, the error output row, and the two
    feedthrough scalars (r -> e and f -> e).
    """
    p = tf_to_state_space(plant)
    c = tf_to_state_space(controller)
    dp = p.d[0, 0]
    dc = c.d[0, 0]
    if abs(1.0 + dp * dc) < 1e-12:
        raise UnstableLoopError("algebraic loop: 1 + Dp*Dc is singular")
    g = 1.0 / (1.0 + dp * dc)
    np_, nc = p.order, c.order

    a_cl = np.zeros((np_ + nc, np_ + nc))
    a_cl[:np_, :np_] = p.a - g * dc * (p.b @ p.c)
    a_cl[:np_, np_:] = g * (p.b @ c.c)
    a_cl[np_:, :np_] = -g * (c.b @ p.c)
    a_cl[np_:, np_:] = c.a - g * dp * (c.b @ c.c)

    b_r = np.concatenate([g * dc * p.b[:, 0], g * c.b[:, 0]])
    b_f = np.concatenate([g * p.b[:, 0], -g * dp * c.b[:, 0]])
    c_e = np.concatenate([-g * p.c[0, :], -g * dp * c.c[0, :]])
    d_re = g
    d_fe = -g * dp
    return a_cl, b_r, b_f, c_e, d_re, d_fe


def _markov_sequence(a, b, c, d, n):
    h = np.zeros(n)
    if n == 0:
        return h
    h[0] = d
    x = b.copy()
    for k in range(1, n):
        h[k] = c @ x
        x = a @ x
    return h


@dataclass(frozen=True)
class LiftedSystem:
    """Closed-loop trial maps over a finite horizon.

    s and j are the N-by-N lower-triangular Toeplitz forms of the
    sensitivity S = (I + PC)^-1 and the process sensitivity J = SP, so a
    trial with reference r and plant-input feedforward f measures

        e = s @ r - j @ f
    """

    s: np.ndarray
    j: np.ndarray
    horizon: int
    sample_time: float


def closed_loop_maps(plant: TransferFunction, controller: TransferFunction,
                     horizon: int) -> LiftedSystem:
    """Build the lifted closed-loop maps S and J = SP.

    The loop is interconnected at state-space level and must be internally
    stable: every closed-loop eigenvalue needs |lambda| < 1 - 1e-9.
    Delay samples (leading zero Markov parameters of J) are kept, so J may
    be singular; gain synthesis handles that through the weights.
    """
    if plant.sample_time != controller.sample_time:
        raise ValueError("plant and controller sample times differ (%g vs %g)"
                         % (plant.sample_time, controller.sample_time))
    if horizon < 1:
        raise ValueError("horizon must be at least 1 sample")
    a_cl, b_r, b_f, c_e, d_re, d_fe = _closed_loop_realization(plant, controller)
    if a_cl.shape[0] > 0:
        mags = np.abs(np.linalg.eigvals(a_cl))
        if mags.max() >= 1.0 - STABILITY_MARGIN:
            raise UnstableLoopError(
                "closed loop is not internally stable: |eig| max = %.12g" % mags.max())
    h_re = _markov_sequence(a_cl, b_r, c_e, d_re, horizon)
    h_fe = _markov_sequence(a_cl, b_f, c_e, d_fe, horizon)
    s = lifted_toeplitz(h_re, horizon)
    j = lifted_toeplitz(-h_fe, horizon)  # e = S r - J f, so J = -(f -> e)
    return LiftedSystem(s, j, horizon, plant.sample_time)


def simulate_trial(system: LiftedSystem, reference: np.ndarray,
                   feedforward: np.ndarray) -> np.ndarray:
    """Error of one trial, e = S r - J f, from zero initial conditions."""
    reference = np.asarray(reference, dtype=float)
    feedforward = np.asarray(feedforward, dtype=float)
    if reference.shape != (system.horizon,) or feedforward.shape != (system.horizon,):
        raise ValueError("reference and feedforward must be length-%d vectors"
                         % system.horizon)
    return system.s @ reference - system.j @ feedforward
