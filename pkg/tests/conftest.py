"""Shared fixtures and independent oracles.

Every oracle here recomputes a quantity through a different algorithm
than the library uses, so agreement is evidence rather than tautology:
impulse responses come from polynomial long division instead of a state
recursion, closed-loop errors from per-sample difference equations
instead of lifted matrices, the optimal parameter update from a stacked
square-root least-squares solve instead of the closed-form gains, the
log-density gradient from central finite differences, and the spectral
norm from power iteration instead of the SVD.
"""

import numpy as np
import pytest

from ilclearn.lti import TransferFunction, LiftedSystem, closed_loop_maps
from ilclearn.trajectory import MoveSpec, third_order_reference, build_basis


# ---------------------------------------------------------------- oracles

def oracle_impulse_long_division(num, den, n_samples):
    """Power-series coefficients of num(z)/den(z) in z^-1 by long division.

    num and den are in descending powers of z with den monic; the series
    coefficient h[k] is the impulse response sample k.
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    den = den / den[0]
    bp = np.concatenate([np.zeros(den.size - num.size), num])
    h = np.zeros(n_samples)
    for k in range(n_samples):
        acc = bp[k] if k < bp.size else 0.0
        for i in range(1, min(k, den.size - 1) + 1):
            acc -= den[i] * h[k - i]
        h[k] = acc
    return h


def oracle_recursive_loop(plant: TransferFunction, ctrl: TransferFunction,
                          reference, feedforward):
    """Per-sample simulation of the loop: e = r - y, u = C e + f, y = P u.

    Implemented directly from the two difference equations; requires the
    plant to have at least one sample of delay so the loop resolves
    sequentially (true for the benchmark plant).
    """
    r = np.asarray(reference, dtype=float)
    f = np.asarray(feedforward, dtype=float)
    pb = plant.padded_num()
    pa = plant.den
    cb = ctrl.padded_num()
    ca = ctrl.den
    assert pb[0] == 0.0, "plant must have at least one delay sample"
    n = r.size
    y = np.zeros(n)
    e = np.zeros(n)
    uc = np.zeros(n)
    u = np.zeros(n)
    for k in range(n):
        acc = 0.0
        for i in range(1, pb.size):
            if k - i >= 0:
                acc += pb[i] * u[k - i] - pa[i] * y[k - i]
        y[k] = acc
        e[k] = r[k] - y[k]
        acc = cb[0] * e[k]
        for i in range(1, cb.size):
            if k - i >= 0:
                acc += cb[i] * e[k - i] - ca[i] * uc[k - i]
        uc[k] = acc
        u[k] = uc[k] + f[k]
    return e


def oracle_criterion_min(g, error, upsilon, we_diag, wu_diag, wd_diag):
    """Minimizer of the quadratic trial criterion by stacked least squares.

    Minimizes ||sqrt(We)(e + G ups - G v)||^2 + ||sqrt(Wu) v||^2
    + ||sqrt(Wd)(v - ups)||^2 over v via one QR-based lstsq solve on the
    stacked square-root system; no reuse of the library's gain formulas.
    """
    g = np.asarray(g, dtype=float)
    n, m = g.shape
    swe = np.sqrt(np.asarray(we_diag, dtype=float))
    swu = np.sqrt(np.asarray(wu_diag, dtype=float))
    swd = np.sqrt(np.asarray(wd_diag, dtype=float))
    rows = np.vstack([swe[:, None] * g, np.diag(swu), np.diag(swd)])
    rhs = np.concatenate([swe * (error + g @ upsilon), np.zeros(m), swd * upsilon])
    sol, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    return sol


def oracle_fd_log_gradient(theta, x, upsilon, sigma2, step=None):
    """Central finite differences of the summed Gaussian log-density
    sum_b log N(upsilon_b; (theta^T x)_b, sigma2) w.r.t. each theta entry."""
    theta = np.asarray(theta, dtype=float)

    def logp(th):
        mu = th.T @ x
        return float(-0.5 * np.sum((upsilon - mu) ** 2) / sigma2
                     - 0.5 * upsilon.size * np.log(2.0 * np.pi * sigma2))

    h = step if step is not None else 1e-6 * max(1.0, np.abs(theta).max())
    grad = np.zeros_like(theta)
    for a in range(theta.shape[0]):
        for b in range(theta.shape[1]):
            tp = theta.copy(); tp[a, b] += h
            tm = theta.copy(); tm[a, b] -= h
            grad[a, b] = (logp(tp) - logp(tm)) / (2.0 * h)
    return grad


def oracle_power_spectral(mat, iters=500, seed=0):
    """Largest singular value by power iteration on A^T A."""
    mat = np.atleast_2d(np.asarray(mat, dtype=float))
    rng = np.random.Generator(np.random.PCG64(seed))
    v = rng.standard_normal(mat.shape[1])
    v /= np.linalg.norm(v)
    for _ in range(iters):
        w = mat.T @ (mat @ v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        v = w / nw
    return float(np.sqrt(v @ (mat.T @ (mat @ v))))


def random_stable_toeplitz_markov(rng, n):
    """Impulse response of a made-up stable causal map, with a possible
    leading delay sample."""
    delay = int(rng.integers(0, 2))
    decay = 0.3 + 0.5 * rng.random()
    h = rng.normal(0.0, 1.0, n) * decay ** np.arange(n)
    h[:delay] = 0.0
    if delay < n:
        h[delay] = np.sign(h[delay] or 1.0) * (0.5 + np.abs(h[delay]))
    return h


# --------------------------------------------------------------- fixtures

SEC5_PLANT_NUM = 1e-8 * np.array([24.24, 130.3, 32.95, -8.486])
SEC5_PLANT_DEN = np.array([1.0, -3.761, 5.438, -3.593, 0.916, 0.0])
SEC5_CTRL_NUM = np.array([108.6, 4.3, -104.3])
SEC5_CTRL_DEN = np.array([1.0, -1.6499, 0.7034])
TS = 1e-3


@pytest.fixture(scope="session")
def sec5_plant():
    return TransferFunction(SEC5_PLANT_NUM, SEC5_PLANT_DEN, TS)


@pytest.fixture(scope="session")
def sec5_controller():
    return TransferFunction(SEC5_CTRL_NUM, SEC5_CTRL_DEN, TS)


@pytest.fixture(scope="session")
def sec5_small_system(sec5_plant, sec5_controller):
    """Benchmark loop at a short horizon, fast enough for unit tests."""
    return closed_loop_maps(sec5_plant, sec5_controller, 400)


@pytest.fixture(scope="session")
def short_profile():
    """One quick move fitting the short horizon."""
    return third_order_reference([MoveSpec(0.01, 0.2, 10.0, 2000.0, 0.05)], TS, 400)


@pytest.fixture(scope="session")
def short_basis(short_profile):
    return build_basis(short_profile)


@pytest.fixture()
def toy_system():
    """One-sample loop where the process sensitivity is the scalar 2."""
    return LiftedSystem(s=np.array([[1.0]]), j=np.array([[2.0]]),
                        horizon=1, sample_time=1.0)


SMALL_CONFIG = """\
plant:
  numerator: [2.424e-07, 1.303e-06, 3.295e-07, -8.486e-08]
  denominator: [1.0, -3.761, 5.438, -3.593, 0.916, 0.0]
controller:
  numerator: [108.6, 4.3, -104.3]
  denominator: [1.0, -1.6499, 0.7034]
sample_time_s: 0.001
horizon_samples: 400
reference:
  segments:
    - displacement_m: 0.01
      max_velocity_mps: 0.2
      max_acceleration_mps2: 10.0
      max_jerk_mps3: 2000.0
      rest_duration_s: 0.05
weights:
  error: 1.0e+06
  parameter: 1.0e-06
method: both
num_trials: 12
gamma: 0.65
schedules:
  alpha_w: {initial: 0.3, rate: 0.995, floor: 0.05}
  alpha_theta: {initial: 2.0e-08, rate: 1.0, floor: 2.0e-08}
  sigma: {initial: 0.01, rate: 0.99, floor: 0.001}
seeds: [0, 1]
"""


@pytest.fixture()
def small_config_file(tmp_path):
    path = tmp_path / "small.yaml"
    path.write_text(SMALL_CONFIG)
    return str(path)
