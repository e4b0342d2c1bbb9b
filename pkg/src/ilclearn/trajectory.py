"""Point-to-point references and feedforward basis construction.

Each move is a symmetric seven-phase constant-jerk profile: jerk
+j, 0, -j for the acceleration ramp, a constant-velocity stretch, then
the mirrored deceleration ramp.  Phase durations are solved from the
displacement and the velocity / acceleration / jerk bounds, rounded up
to the sample grid, and the jerk is re-derated after each rounding so
the continuous-time profile lands exactly on the commanded displacement.
Samples are taken from the exact piecewise cubic, so grid rounding is
absorbed into the final hold instead of accumulating.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class MoveSpec:
    """One point-to-point move followed by a rest.

    :param displacement: commanded position change, >= 0.
    :param max_velocity: velocity bound, > 0.
    :param max_acceleration: acceleration bound, > 0.
    :param max_jerk: jerk bound, > 0.
    :param rest_duration: hold time after the move, seconds, >= 0.
    """

    displacement: float
    max_velocity: float
    max_acceleration: float
    max_jerk: float
    rest_duration: float = 0.0

    def __post_init__(self):
        if self.displacement < 0.0:
            raise ValueError("displacement must be nonnegative, got %g" % self.displacement)
        for name in ("max_velocity", "max_acceleration", "max_jerk"):
            if getattr(self, name) <= 0.0:
                raise ValueError("%s must be positive" % name)
        if self.rest_duration < 0.0:
            raise ValueError("rest_duration must be nonnegative")


@dataclass(frozen=True)
class ReferenceProfile:
    """Sampled position reference.

    :param samples: length-N position trace.
    :param sample_time: sample period in seconds.
    :param segments: the move specs the profile was generated from.
    """

    samples: np.ndarray
    sample_time: float
    segments: tuple


def _ceil_to_grid(t: float, ts: float) -> float:
    # tolerate float fuzz so an exact multiple does not round up a sample
    return max(1, int(np.ceil(t / ts - 1e-9))) * ts


def _phase_times(p: float, v: float, a: float, j: float, ts: float):
    """Jerk-phase duration t1, acceleration hold t2, velocity hold t3.

    Classic third-order setpoint calculation: try the jerk-limited move
    first, shrink t1 if the velocity or acceleration bound binds, then
    grow t2 and t3 as needed.  Each candidate time is rounded up to the
    sample grid and the working jerk jd is re-derated so the profile
    displacement stays exact.
    """
    t1 = _ceil_to_grid((p / (2.0 * j)) ** (1.0 / 3.0), ts)
    jd = p / (2.0 * t1 ** 3)

    if v < jd * t1 ** 2:
        t1 = _ceil_to_grid(np.sqrt(v / j), ts)
        jd = v / t1 ** 2
    if a < jd * t1:
        t1 = _ceil_to_grid(a / j, ts)
        jd = a / t1

    t2 = np.sqrt(t1 ** 2 / 4.0 + p / (jd * t1)) - 1.5 * t1
    if t2 > 1e-12:
        t2 = _ceil_to_grid(t2, ts)
        jd = p / (2.0 * t1 ** 3 + 3.0 * t1 ** 2 * t2 + t1 * t2 ** 2)
    else:
        t2 = 0.0
    if v < jd * (t1 ** 2 + t1 * t2):
        t2 = _ceil_to_grid(v / (jd * t1) - t1, ts)
        jd = v / (t1 ** 2 + t1 * t2)

    t3 = (p - jd * (2.0 * t1 ** 3 + 3.0 * t1 ** 2 * t2 + t1 * t2 ** 2)) / (jd * (t1 ** 2 + t1 * t2))
    if t3 > 1e-12:
        t3 = _ceil_to_grid(t3, ts)
    else:
        t3 = 0.0
    jd = p / (2.0 * t1 ** 3 + 3.0 * t1 ** 2 * t2 + t1 * t2 ** 2
              + t1 ** 2 * t3 + t1 * t2 * t3)
    return t1, t2, t3, jd


def _move_samples(spec: MoveSpec, ts: float):
    """Positions of one move sampled on the grid, and the exact end state."""
    if spec.displacement == 0.0:
        return np.zeros(0), 0.0
    t1, t2, t3, jd = _phase_times(spec.displacement, spec.max_velocity,
                                  spec.max_acceleration, spec.max_jerk, ts)
    n1 = int(round(t1 / ts))
    n2 = int(round(t2 / ts))
    n3 = int(round(t3 / ts))
    phases = [(jd, n1), (0.0, n2), (-jd, n1), (0.0, n3),
              (-jd, n1), (0.0, n2), (jd, n1)]
    chunks = []
    pos, vel, acc = 0.0, 0.0, 0.0
    for jerk, count in phases:
        if count == 0:
            continue
        tau = np.arange(count) * ts
        chunks.append(pos + vel * tau + 0.5 * acc * tau ** 2 + jerk * tau ** 3 / 6.0)
        dt = count * ts
        pos += vel * dt + 0.5 * acc * dt ** 2 + jerk * dt ** 3 / 6.0
        vel += acc * dt + 0.5 * jerk * dt ** 2
        acc += jerk * dt
    return np.concatenate(chunks), pos


def third_order_reference(segments, sample_time: float, horizon: int) -> ReferenceProfile:
    """Concatenate third-order point-to-point moves into a sampled reference.

    Moves run back to back, each followed by its rest hold; the profile
    then holds the final position out to the horizon.  Raises ValueError
    if the moves and rests do not fit in horizon samples.

    :param segments: iterable of MoveSpec.
    :param sample_time: sample period in seconds, > 0.
    :param horizon: number of samples N.
    """
    if sample_time <= 0.0:
        raise ValueError("sample_time must be positive")
    if horizon < 1:
        raise ValueError("horizon must be at least 1 sample")
    segments = tuple(segments)
    pieces = []
    base = 0.0
    used = 0
    for spec in segments:
        move, reached = _move_samples(spec, sample_time)
        n_rest = int(round(_ceil_to_grid(spec.rest_duration, sample_time) / sample_time)) \
            if spec.rest_duration > 0.0 else 0
        used += move.size + n_rest
        if used > horizon:
            raise ValueError("reference needs %d samples but horizon is %d"
                             % (used, horizon))
        pieces.append(base + move)
        base += reached
        if n_rest:
            pieces.append(np.full(n_rest, base))
    if used < horizon:
        pieces.append(np.full(horizon - used, base))
    samples = np.concatenate(pieces) if pieces else np.full(horizon, base)
    return ReferenceProfile(samples, sample_time, segments)


def discrete_derivative(signal: np.ndarray, order: int, sample_time: float) -> np.ndarray:
    """Sampled first or second derivative.

    Central differences on the interior; the endpoints reuse the
    difference of their nearest interior neighbor (one-sided), which
    keeps the output length equal to the input length.
    """
    x = np.asarray(signal, dtype=float)
    if x.ndim != 1:
        raise ValueError("signal must be one-dimensional")
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2, got %r" % (order,))
    if sample_time <= 0.0:
        raise ValueError("sample_time must be positive")
    n = x.size
    out = np.zeros(n)
    if n < 3:
        if order == 1 and n == 2:
            out[:] = (x[1] - x[0]) / sample_time
        return out
    if order == 1:
        out[1:-1] = (x[2:] - x[:-2]) / (2.0 * sample_time)
        out[0] = (x[1] - x[0]) / sample_time
        out[-1] = (x[-1] - x[-2]) / sample_time
    else:
        out[1:-1] = (x[2:] - 2.0 * x[1:-1] + x[:-2]) / sample_time ** 2
        out[0] = (x[2] - 2.0 * x[1] + x[0]) / sample_time ** 2
        out[-1] = (x[-1] - 2.0 * x[-2] + x[-3]) / sample_time ** 2
    return out


@dataclass(frozen=True)
class BasisMatrix:
    """Feedforward basis: f = Psi @ upsilon.

    :param psi: N-by-m basis matrix.
    :param labels: one name per column.
    """

    psi: np.ndarray
    labels: tuple

    @property
    def m(self) -> int:
        return self.psi.shape[1]

    @property
    def horizon(self) -> int:
        return self.psi.shape[0]


def build_basis(reference: ReferenceProfile) -> BasisMatrix:
    """Two-column kinematic basis from the reference.

    Column 0 is the sampled acceleration (mass feedforward) and column 1
    the sampled velocity (viscous friction feedforward), so upsilon holds
    a mass-like and a damping-like coefficient.
    """
    acc = discrete_derivative(reference.samples, 2, reference.sample_time)
    vel = discrete_derivative(reference.samples, 1, reference.sample_time)
    return BasisMatrix(np.column_stack([acc, vel]), ("acceleration", "velocity"))


def identity_basis(horizon: int) -> BasisMatrix:
    """Identity basis Psi = I: upsilon is the full feedforward signal."""
    return BasisMatrix(np.eye(horizon), tuple("sample_%d" % k for k in range(horizon)))
