"""Model-free actor-critic tuning of the feedforward parameters.

The trial loop is cast as a Markov decision process whose state is the
pair (e_j, upsilon_j), whose action is the next parameter vector
upsilon_{j+1}, and whose per-trial cost reuses the quadratic criterion of
the model-based update.  Two linear function approximators learn from the
measured data alone:

critic   V(x) = w^T x            on the projected error x = Psi^T e,
actor    upsilon ~ N(theta^T x, sigma^2 I).

After each trial the one-step Bellman residual

    delta = c + gamma V(x_next) - V(x)

corrects both: the critic moves along its feature vector, and the actor
moves against delta times the likelihood-ratio gradient of the Gaussian
policy.  Learning rates and the exploration spread follow nonincreasing
exponential schedules with floors, so exploration never fully stops.

No model enters any update; the plant is only touched through the
simulated trial itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import SeededSampler, Weighting, gaussian_vector, trial_cost
from .trajectory import BasisMatrix
from .lti import LiftedSystem, simulate_trial


class DivergenceError(RuntimeError):
    """Learner state left the finite range; carries the partial log."""

    def __init__(self, trial_index: int, records):
        super().__init__(
            "actor-critic run diverged at trial %d (non-finite learner state); "
            "lower the learning rates or raise gamma damping" % trial_index)
        self.trial_index = trial_index
        self.records = records


@dataclass(frozen=True)
class DecaySchedule:
    """Exponentially decaying, floored coefficient sequence.

    value(j) = max(floor, initial * rate**j); nonincreasing in j because
    the rate is at most one.
    """

    initial: float
    rate: float
    floor: float

    def __post_init__(self):
        if not 0.0 < self.rate <= 1.0:
            raise ValueError("rate must be in (0, 1], got %g" % self.rate)
        if self.floor < 0.0:
            raise ValueError("floor must be nonnegative, got %g" % self.floor)
        if self.initial < 0.0:
            raise ValueError("initial must be nonnegative, got %g" % self.initial)

    def value(self, j: int) -> float:
        return max(self.floor, self.initial * self.rate ** j)


@dataclass(frozen=True)
class LearnerSchedules:
    """The three decay schedules of one learning run.

    The defaults are generic starting points for small problems; any
    concrete experiment should scale them to its own cost magnitude (the
    shipped preset does).  sigma is scheduled as a standard deviation and
    should start at a fraction of the expected parameter magnitude.
    """

    alpha_w: DecaySchedule = field(default_factory=lambda: DecaySchedule(0.05, 0.95, 1e-4))
    alpha_theta: DecaySchedule = field(default_factory=lambda: DecaySchedule(0.01, 0.95, 1e-5))
    sigma: DecaySchedule = field(default_factory=lambda: DecaySchedule(0.1, 0.9, 1e-3))


@dataclass(frozen=True)
class MdpConfig:
    """Trial-level decision process: discount, cost weights, basis."""

    gamma: float
    weighting: Weighting
    basis: BasisMatrix

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1], got %g" % self.gamma)

    @property
    def m(self) -> int:
        return self.basis.m

    @property
    def horizon(self) -> int:
        return self.basis.horizon


@dataclass
class CriticState:
    """Linear value estimate V(x) = w^T x and its current learning rate."""

    w: np.ndarray
    alpha_w: float


@dataclass
class ActorState:
    """Gaussian policy N(theta^T x, sigma2 I) and its current rates."""

    theta: np.ndarray
    alpha_theta: float
    sigma2: float


@dataclass
class TrialRecord:
    """Everything observed and learned in one trial.

    upsilon is the parameter vector applied during the trial; delta the
    Bellman residual computed after it; w, theta, sigma2 the learner state
    after the updates of this trial.
    """

    j: int
    cost: float
    e_norm2: float
    upsilon: np.ndarray
    delta: float
    sigma2: float
    alpha_w: float
    alpha_theta: float
    x: np.ndarray | None = None
    w: np.ndarray | None = None
    theta: np.ndarray | None = None


def project_error(basis: BasisMatrix, error: np.ndarray) -> np.ndarray:
    """Feature vector x = Psi^T e, the correlation of the error with each
    basis column."""
    psi = basis.psi if isinstance(basis, BasisMatrix) else np.asarray(basis, dtype=float)
    return psi.T @ np.asarray(error, dtype=float)


def critic_value(critic: CriticState, x: np.ndarray) -> float:
    """V(x) = w^T x."""
    return float(np.dot(critic.w, x))


def td_error(cost: float, v_next: float, v_now: float, gamma: float) -> float:
    """Bellman residual delta = c + gamma * V(x_next) - V(x), both values
    taken at the pre-update weights."""
    return cost + gamma * v_next - v_now


def critic_update(critic: CriticState, delta: float, x: np.ndarray) -> CriticState:
    """Gradient step w' = w + alpha_w * delta * x."""
    return CriticState(critic.w + critic.alpha_w * delta * np.asarray(x, dtype=float),
                       critic.alpha_w)


def policy_mean(actor: ActorState, x: np.ndarray) -> np.ndarray:
    """Mean action mu = theta^T x."""
    return actor.theta.T @ np.asarray(x, dtype=float)


def draw_action(actor: ActorState, x: np.ndarray, sampler: SeededSampler) -> np.ndarray:
    """Sample upsilon ~ N(theta^T x, sigma2 I); zero variance returns the
    mean exactly (evaluation mode)."""
    return gaussian_vector(sampler, policy_mean(actor, x), actor.sigma2)


def log_policy_gradient(upsilon: np.ndarray, mu: np.ndarray, sigma2: float,
                        x: np.ndarray) -> np.ndarray:
    """Likelihood-ratio gradient of the Gaussian log-density.

    For the componentwise density prod_b N(upsilon_b; (theta^T x)_b, sigma2)
    the gradient with respect to theta is the outer product

        G[a, b] = x[a] * (upsilon[b] - mu[b]) / sigma2.
    """
    if sigma2 <= 0.0:
        raise ValueError("sigma2 must be positive for the likelihood-ratio "
                         "gradient, got %g" % sigma2)
    upsilon = np.asarray(upsilon, dtype=float)
    mu = np.asarray(mu, dtype=float)
    return np.outer(np.asarray(x, dtype=float), upsilon - mu) / sigma2


def actor_update(actor: ActorState, delta: float, grad: np.ndarray) -> ActorState:
    """Descent step theta' = theta - alpha_theta * delta * grad."""
    return ActorState(actor.theta - actor.alpha_theta * delta * grad,
                      actor.alpha_theta, actor.sigma2)


def _finite(*arrays) -> bool:
    return all(np.all(np.isfinite(a)) for a in arrays)


def run_acilc(system: LiftedSystem, reference: np.ndarray, mdp: MdpConfig,
              schedules: LearnerSchedules, sampler: SeededSampler,
              num_trials: int,
              upsilon0: np.ndarray | None = None,
              feature_scaling: np.ndarray | None = None):
    """Run the actor-critic trial loop and return the list of TrialRecord.

    Per trial j: simulate the loop under the applied parameters, project
    the error, draw the next action from the policy, evaluate the trial
    cost and the Bellman residual, then update critic and actor and
    advance all schedules.  The action drawn at trial j is applied at
    trial j+1; trial 0 applies upsilon0 (default zero feedforward).
    Critic and actor parameters start at zero.

    feature_scaling, when given, is a fixed positive length-m vector d
    applied as x = d * (Psi^T e); it is recorded by the harness metadata.
    With a zero exploration spread the drawn action equals the mean and no
    likelihood-ratio information exists, so the actor update is skipped
    for that trial.

    Raises DivergenceError (carrying the partial log and trial index) as
    soon as any learner quantity becomes NaN or Inf.
    """
    m = mdp.m
    psi = mdp.basis.psi
    if feature_scaling is not None:
        feature_scaling = np.asarray(feature_scaling, dtype=float)
        if feature_scaling.shape != (m,) or np.any(feature_scaling <= 0.0):
            raise ValueError("feature_scaling must be a positive length-%d vector" % m)

    def features(error):
        x = psi.T @ error
        return x if feature_scaling is None else feature_scaling * x

    upsilon = np.zeros(m) if upsilon0 is None else np.asarray(upsilon0, dtype=float).copy()
    critic = CriticState(np.zeros(m), schedules.alpha_w.value(0))
    actor = ActorState(np.zeros((m, m)), schedules.alpha_theta.value(0),
                       schedules.sigma.value(0) ** 2)

    records: list[TrialRecord] = []
    error = simulate_trial(system, reference, psi @ upsilon)
    x = features(error)
    for j in range(num_trials):
        critic.alpha_w = schedules.alpha_w.value(j)
        actor.alpha_theta = schedules.alpha_theta.value(j)
        sigma = schedules.sigma.value(j)
        actor.sigma2 = sigma ** 2

        mu = policy_mean(actor, x)
        upsilon_next = draw_action(actor, x, sampler)
        cost = trial_cost(error, upsilon, upsilon_next, mdp.weighting)
        error_next = simulate_trial(system, reference, psi @ upsilon_next)
        x_next = features(error_next)

        delta = td_error(cost, critic_value(critic, x_next),
                         critic_value(critic, x), mdp.gamma)
        critic = critic_update(critic, delta, x)
        if actor.sigma2 > 0.0:
            grad = log_policy_gradient(upsilon_next, mu, actor.sigma2, x)
            actor = actor_update(actor, delta, grad)

        records.append(TrialRecord(
            j=j, cost=cost, e_norm2=float(np.linalg.norm(error)),
            upsilon=upsilon.copy(), delta=delta, sigma2=actor.sigma2,
            alpha_w=critic.alpha_w, alpha_theta=actor.alpha_theta,
            x=x.copy(), w=critic.w.copy(), theta=actor.theta.copy()))

        if not _finite(critic.w, actor.theta, upsilon_next, x_next) \
                or not np.isfinite(cost):
            raise DivergenceError(j, records)

        upsilon, error, x = upsilon_next, error_next, x_next
    return records
