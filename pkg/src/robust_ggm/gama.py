"""Online graphical alternating minimization.

The dual iterate ``gamma`` is kept within ``lam`` of the covariance estimate
entrywise by a clip; the primal pair is recovered in closed form:
``omega = inv(gamma)`` and ``phi = soft_threshold(zeta * omega - s_hat + gamma, lam) / zeta``.
One dual update is applied per incoming covariance estimate. ``phi`` is the
sparse precision estimate; ``omega`` is kept for diagnostics.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from .errors import NumericalError, ParameterError, PenaltyError

EIG_FLOOR = 1e-12


def soft_threshold(x, lam):
    """``sign(x) * max(|x| - lam, 0)``, elementwise."""
    if np.ndim(x) == 0:
        if x > lam:
            return x - lam
        if x < -lam:
            return x + lam
        return 0.0 * x
    x = np.asarray(x, dtype=float)
    return np.sign(x) * np.maximum(np.abs(x) - lam, 0.0)


def clip(x, lam):
    """``min(max(x, -lam), lam)``, elementwise."""
    if np.ndim(x) == 0:
        return min(max(x, -lam), lam)
    return np.clip(x, -lam, lam)


@dataclass(frozen=True)
class SymmetricEigenResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray = None

    @property
    def lambda_min(self):
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])


def symmetric_eigen(a, vectors=False):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending."""
    a = np.asarray(a, dtype=float)
    if vectors:
        w, v = linalg.eigh(a)
        return SymmetricEigenResult(w, v)
    return SymmetricEigenResult(linalg.eigvalsh(a))


def _symmetrize(a):
    return 0.5 * (a + a.T)


def omega_update(gamma):
    """Inverse of a symmetric positive definite matrix.

    Uses a Cholesky factorization; if that fails, falls back to an
    eigendecomposition with eigenvalues floored at ``1e-12``. A matrix whose
    smallest eigenvalue is not positive raises :class:`NumericalError`.
    """
    gamma = np.asarray(gamma, dtype=float)
    p = gamma.shape[0]
    try:
        c = linalg.cho_factor(gamma, lower=True, check_finite=True)
        inv = linalg.cho_solve(c, np.eye(p), check_finite=False)
    except (linalg.LinAlgError, ValueError):
        eig = symmetric_eigen(gamma, vectors=True)
        if not eig.lambda_min > 0.0:
            raise NumericalError("matrix is not positive definite", lambda_min=eig.lambda_min)
        w = np.maximum(eig.eigenvalues, EIG_FLOOR)
        v = eig.eigenvectors
        inv = (v / w) @ v.T
    return _symmetrize(inv)


def dual_update(gamma_prev, s_hat, zeta_prev, lam, omega_prev=None):
    """One clipped dual step.

    Returns ``clip(gamma_prev - s_hat + zeta_prev * inv(gamma_prev), lam) + s_hat``,
    symmetrized. ``omega_prev`` may be passed to reuse a known inverse of
    ``gamma_prev``.
    """
    if not zeta_prev > 0:
        raise ParameterError("zeta", f"must be positive, got {zeta_prev!r}")
    gamma_prev = np.asarray(gamma_prev, dtype=float)
    s_hat = np.asarray(s_hat, dtype=float)
    if omega_prev is None:
        lmin = symmetric_eigen(gamma_prev).lambda_min
        if lmin < EIG_FLOOR:
            raise NumericalError("previous dual iterate is not invertible", lambda_min=lmin)
        omega_prev = omega_update(gamma_prev)
    arg = gamma_prev - s_hat + zeta_prev * omega_prev
    gamma = clip(arg, lam) + s_hat
    return _symmetrize(gamma)


def phi_update(omega, s_hat, gamma, zeta, lam):
    """Sparse precision estimate ``soft_threshold(zeta omega - s_hat + gamma, lam) / zeta``."""
    if not zeta > 0:
        raise ParameterError("zeta", f"must be positive, got {zeta!r}")
    arg = zeta * np.asarray(omega) - np.asarray(s_hat) + np.asarray(gamma)
    return _symmetrize(soft_threshold(arg, lam) / zeta)


@dataclass(frozen=True)
class GamaConfig:
    """Penalty and step-size rule.

    ``step_fraction`` is the constant ``c`` in ``zeta_t = c * lambda_min(gamma_t)**2``.
    ``refine`` is the number of dual updates per incoming estimate (1 in the
    streaming algorithm).
    """

    lam: float = 0.15
    step_fraction: float = 0.9
    t0: int = 100
    refine: int = 1

    def __post_init__(self):
        if not self.lam >= 0:
            raise ParameterError("lambda", f"must be nonnegative, got {self.lam!r}")
        if not 0.0 < self.step_fraction < 1.0:
            raise ParameterError("step_fraction", f"must lie in (0, 1), got {self.step_fraction!r}")
        if int(self.t0) != self.t0 or self.t0 < 1:
            raise ParameterError("t0", f"must be a positive integer, got {self.t0!r}")
        if int(self.refine) != self.refine or self.refine < 1:
            raise ParameterError("refine", f"must be a positive integer, got {self.refine!r}")


@dataclass
class GamaState:
    """Dual and primal iterates at time ``t``.

    ``delta`` is the most recent descent-gap term and ``delta_sum`` the running
    sum of all of them since initialization; ``logdet_gamma0`` is
    ``log det`` of the initial dual iterate.
    """

    config: GamaConfig
    gamma: np.ndarray
    omega: np.ndarray
    phi: np.ndarray
    zeta: float
    t: int
    lambda_min: float
    lambda_max: float
    s_hat: np.ndarray = field(repr=False, default=None)
    delta: float = 0.0
    delta_sum: float = 0.0
    logdet_gamma0: float = 0.0

    @property
    def p(self):
        return self.gamma.shape[0]

    def dual_gap(self):
        """``max |gamma_ij - s_hat_ij|``; never exceeds ``lam`` up to rounding."""
        return float(np.max(np.abs(self.gamma - self.s_hat)))

    def diagnostics(self):
        """Per-step scalars for the trace sink."""
        return {
            "t": self.t,
            "lambda_min_gamma": self.lambda_min,
            "lambda_max_gamma": self.lambda_max,
            "zeta": self.zeta,
            "delta": self.delta,
            "delta_sum": self.delta_sum,
            "dual_gap": self.dual_gap(),
        }

    def to_record(self):
        """Flat float64 record: config fields, t, zeta, then the upper
        triangles of gamma, omega, phi and s_hat in row-major order."""
        iu = np.triu_indices(self.p)
        cfg = self.config
        head = [cfg.lam, cfg.step_fraction, cfg.t0, cfg.refine, self.t, self.zeta,
                self.delta, self.delta_sum, self.logdet_gamma0]
        parts = [np.array(head, dtype=float)]
        parts += [m[iu] for m in (self.gamma, self.omega, self.phi, self.s_hat)]
        return np.concatenate(parts)

    @classmethod
    def from_record(cls, record):
        rec = np.asarray(record, dtype=float)
        n_pairs = (rec.size - 9) // 4
        p = int(round((np.sqrt(8 * n_pairs + 1) - 1) / 2))
        if 4 * n_pairs + 9 != rec.size or p * (p + 1) // 2 != n_pairs or p < 1:
            raise ValueError(f"record of length {rec.size} is not a gama checkpoint")
        cfg = GamaConfig(lam=rec[0], step_fraction=rec[1], t0=int(rec[2]), refine=int(rec[3]))
        iu = np.triu_indices(p)
        mats = []
        for k in range(4):
            m = np.empty((p, p))
            vec = rec[9 + k * n_pairs:9 + (k + 1) * n_pairs]
            m[iu] = vec
            m.T[iu] = vec
            mats.append(m)
        eig = symmetric_eigen(mats[0])
        return cls(cfg, mats[0], mats[1], mats[2], float(rec[5]), int(rec[4]),
                   eig.lambda_min, eig.lambda_max, mats[3],
                   float(rec[6]), float(rec[7]), float(rec[8]))

    def to_bytes(self):
        return self.to_record().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        return cls.from_record(np.frombuffer(data, dtype="<f8"))


def minimal_lambda(s_hat):
    """Smallest admissible penalty for ``s_hat + lam I`` to be positive definite, plus 1e-6."""
    return max(0.0, -symmetric_eigen(s_hat).lambda_min) + 1e-6


def init_dual(s_hat, config, t=None):
    """Initialize ``gamma = s_hat + lam I`` and the matching primal pair.

    Raises
    ------
    PenaltyError
        If ``lam`` does not make the initial dual iterate positive definite.
    """
    s_hat = _symmetrize(np.asarray(s_hat, dtype=float))
    lam = config.lam
    lmin_s = symmetric_eigen(s_hat).lambda_min
    if not (lam > 0 and lam > -lmin_s):
        raise PenaltyError(
            f"lambda={lam!r} does not make the initial dual variable positive definite",
            minimal_lambda=max(0.0, -lmin_s) + 1e-6,
            lambda_min=lmin_s,
        )
    p = s_hat.shape[0]
    gamma = s_hat + lam * np.eye(p)
    eig = symmetric_eigen(gamma)
    if eig.lambda_min <= 0:
        raise PenaltyError("initial dual variable is not positive definite",
                           minimal_lambda=max(0.0, -lmin_s) + 1e-6, lambda_min=eig.lambda_min)
    zeta = config.step_fraction * eig.lambda_min ** 2
    omega = omega_update(gamma)
    phi = phi_update(omega, s_hat, gamma, zeta, lam)
    logdet = float(np.linalg.slogdet(gamma)[1])
    return GamaState(config, gamma, omega, phi, zeta, config.t0 if t is None else t,
                     eig.lambda_min, eig.lambda_max, s_hat, 0.0, 0.0, logdet)


def delta_term(gamma_next, gamma, omega, zeta):
    """``tr((gamma_next - gamma)(-omega)) + ||gamma_next - gamma||_F**2 / (2 zeta)``."""
    gamma_next = np.asarray(gamma_next, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    omega = np.asarray(omega, dtype=float)
    if gamma_next.shape != gamma.shape or gamma.shape != omega.shape:
        raise ValueError(
            f"shape mismatch: {gamma_next.shape}, {gamma.shape}, {omega.shape}")
    if not zeta > 0:
        raise ParameterError("zeta", f"must be positive, got {zeta!r}")
    d = gamma_next - gamma
    return float(-np.sum(d * omega.T) + np.sum(d * d) / (2.0 * zeta))


def _single_update(state, s_hat):
    cfg = state.config
    gamma = dual_update(state.gamma, s_hat, state.zeta, cfg.lam, omega_prev=state.omega)
    eig = symmetric_eigen(gamma)
    if not eig.lambda_min > 0:
        raise PenaltyError(
            f"dual iterate lost positive definiteness at t={state.t + 1}; "
            f"increase lambda (currently {cfg.lam!r})",
            lambda_min=eig.lambda_min,
        )
    omega = omega_update(gamma)
    # the primal step pairs with the step size that produced gamma
    phi = phi_update(omega, s_hat, gamma, state.zeta, cfg.lam)
    delta = delta_term(gamma, state.gamma, state.omega, state.zeta)
    zeta = cfg.step_fraction * eig.lambda_min ** 2
    return replace(
        state,
        gamma=gamma,
        omega=omega,
        phi=phi,
        zeta=zeta,
        lambda_min=eig.lambda_min,
        lambda_max=eig.lambda_max,
        s_hat=s_hat,
        delta=delta,
        delta_sum=state.delta_sum + delta,
    )


def step(state, s_hat, refine=None):
    """Advance one time step with the new covariance estimate ``s_hat``.

    Applies ``refine`` dual updates (default ``state.config.refine``) against
    the same ``s_hat`` and increments ``t`` once.
    """
    s_hat = _symmetrize(np.asarray(s_hat, dtype=float))
    if s_hat.shape != state.gamma.shape:
        raise ValueError(f"s_hat has shape {s_hat.shape}, expected {state.gamma.shape}")
    k = state.config.refine if refine is None else refine
    for _ in range(k):
        state = _single_update(state, s_hat)
    state.t += 1
    return state


def solve_fixed_point(s, config, tol=1e-10, max_iter=200_000):
    """Iterate the dual update on a constant ``s`` until ``||gamma_{k+1} - gamma_k||_F < tol``.

    Returns the final state and the list of dual iterates visited (including
    the initial one).
    """
    state = init_dual(s, config)
    history = [state.gamma]
    for _ in range(max_iter):
        state = step(state, s, refine=1)
        history.append(state.gamma)
        if np.linalg.norm(history[-1] - history[-2]) < tol:
            return state, history
    raise NumericalError(f"fixed-point iteration did not reach tol={tol} in {max_iter} steps")
