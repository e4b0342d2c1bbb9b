"""Norm-optimal gain synthesis for basis-function feedforward tuning.

Each trial applies the feedforward f = Psi upsilon and measures the error
e.  The next parameter vector is chosen as the minimizer of the quadratic
trial criterion

    ||e_next||^2_We + ||upsilon_next||^2_Wu + ||upsilon_next - upsilon||^2_Wdu

where e_next = e - J Psi (upsilon_next - upsilon) predicts the effect of
the parameter change through the process sensitivity J.  The minimizer is
affine in the current trial data,

    upsilon_next = Q upsilon + L e,

with gains built from the model once per experiment:

    M = G^T We G + Wu + Wdu          (G = J Psi, M is m-by-m)
    Q = M^-1 (G^T We G + Wdu)
    L = M^-1 G^T We

The parameter-space error contracts monotonically whenever the largest
singular value of Q - L G is below one; that margin is recorded on the
gains at synthesis time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import Weighting, spectral_norm, trial_cost
from .trajectory import BasisMatrix
from .lti import LiftedSystem, simulate_trial

RANK_RTOL = 1e-10


class SynthesisError(ValueError):
    pass


@dataclass(frozen=True)
class NoilcGains:
    """Feedforward update gains upsilon_next = q @ upsilon + l @ e.

    :param q: m-by-m robustness matrix.
    :param l: m-by-N learning matrix.
    :param convergence_margin: spectral norm of q - l @ J @ Psi at synthesis.
    """

    q: np.ndarray
    l: np.ndarray
    convergence_margin: float

    @property
    def m(self) -> int:
        return self.q.shape[0]

    @property
    def horizon(self) -> int:
        return self.l.shape[1]


def _weight_dense(weight, n: int, name: str) -> np.ndarray:
    try:
        return weight.dense(n)
    except Exception as exc:
        raise SynthesisError("%s: %s" % (name, exc)) from exc


def synthesize_gains(j_mat: np.ndarray, psi: np.ndarray,
                     weighting: Weighting) -> NoilcGains:
    """Build the norm-optimal gains Q and L from the lifted model.

    The m-by-m synthesis matrix M = G^T We G + Wu + Wdu must be positive
    definite; it is factorized (Cholesky), never inverted explicitly.
    Psi must have full column rank, checked against a singular-value
    threshold of 1e-10 times the largest singular value.

    :param j_mat: N-by-N process sensitivity.
    :param psi: N-by-m basis matrix (or a BasisMatrix).
    :param weighting: trial criterion weights; w_e acts on length-N error
        vectors, w_upsilon and w_delta_upsilon on length-m parameter
        vectors.
    """
    if isinstance(psi, BasisMatrix):
        psi = psi.psi
    psi = np.asarray(psi, dtype=float)
    j_mat = np.asarray(j_mat, dtype=float)
    if psi.ndim != 2 or j_mat.ndim != 2 or j_mat.shape[0] != j_mat.shape[1]:
        raise SynthesisError("J must be square and Psi two-dimensional")
    n, m = psi.shape
    if j_mat.shape[0] != n:
        raise SynthesisError("Psi has %d rows but J is %d-by-%d" % (n, *j_mat.shape))

    sv = np.linalg.svd(psi, compute_uv=False)
    if sv.size == 0 or sv.min() <= RANK_RTOL * sv.max():
        raise SynthesisError(
            "basis matrix is rank deficient (singular values %s); "
            "remove or re-derive dependent columns" % np.array2string(sv, precision=3))

    g = j_mat @ psi
    if weighting.w_e.is_scalar:
        gt_we = weighting.w_e.scalar * g.T
    else:
        gt_we = g.T @ _weight_dense(weighting.w_e, n, "w_e")
    gtwg = gt_we @ g
    w_u = _weight_dense(weighting.w_upsilon, m, "w_upsilon")
    w_du = _weight_dense(weighting.w_delta_upsilon, m, "w_delta_upsilon")

    m_mat = gtwg + w_u + w_du
    m_mat = 0.5 * (m_mat + m_mat.T)
    try:
        np.linalg.cholesky(m_mat)
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(
            "synthesis matrix G^T We G + Wu + Wdu is not positive definite; "
            "set w_upsilon positive definite (or enrich the basis) so the "
            "update is well posed") from exc

    q = np.linalg.solve(m_mat, gtwg + w_du)
    l = np.linalg.solve(m_mat, gt_we)
    margin = spectral_norm(q - l @ g)
    return NoilcGains(q, l, margin)


def noilc_update(gains: NoilcGains, upsilon: np.ndarray, error: np.ndarray) -> np.ndarray:
    """One parameter update, upsilon_next = Q upsilon + L e."""
    upsilon = np.asarray(upsilon, dtype=float)
    error = np.asarray(error, dtype=float)
    if upsilon.shape != (gains.m,):
        raise ValueError("upsilon must have length %d" % gains.m)
    if error.shape != (gains.horizon,):
        raise ValueError("error must have length %d" % gains.horizon)
    return gains.q @ upsilon + gains.l @ error


def convergence_margin(gains: NoilcGains, j_mat: np.ndarray, psi) -> float:
    """Spectral norm of Q - L J Psi; below one means the parameter-space
    iteration is a contraction and the error 2-norm converges
    monotonically."""
    if isinstance(psi, BasisMatrix):
        psi = psi.psi
    return spectral_norm(gains.q - gains.l @ (np.asarray(j_mat, dtype=float) @ psi))


def run_noilc(system: LiftedSystem, reference: np.ndarray, basis: BasisMatrix,
              weighting: Weighting, num_trials: int,
              upsilon0: np.ndarray | None = None):
    """Iterate the norm-optimal update on the simulated loop.

    Returns (gains, records) where records is a list of TrialRecord with
    the learner-specific fields zeroed, so model-based and model-free logs
    share one schema.  Trial j records the error produced by upsilon_j and
    the cost of moving to upsilon_{j+1}.
    """
    from .acilc import TrialRecord  # local import, avoids a module cycle

    gains = synthesize_gains(system.j, basis.psi, weighting)
    m = basis.m
    upsilon = np.zeros(m) if upsilon0 is None else np.asarray(upsilon0, dtype=float).copy()
    records = []
    for j in range(num_trials):
        error = simulate_trial(system, reference, basis.psi @ upsilon)
        upsilon_next = noilc_update(gains, upsilon, error)
        cost = trial_cost(error, upsilon, upsilon_next, weighting)
        records.append(TrialRecord(
            j=j, cost=cost, e_norm2=float(np.linalg.norm(error)),
            upsilon=upsilon.copy(), delta=0.0, sigma2=0.0,
            alpha_w=0.0, alpha_theta=0.0,
            x=basis.psi.T @ error, w=np.zeros(m), theta=np.zeros((m, m))))
        upsilon = upsilon_next
    return gains, records
