"""Online trimmed inner product estimator of a covariance matrix.

For every pair of variables ``(i, j)`` the products ``x_i * x_j`` of the
first ``t0`` observations are buffered. At ``t0`` their order statistics fix
a pair of trimming thresholds ``(alpha_ij, beta_ij)`` for the rest of the
stream, and the estimate becomes the running mean of the clamped products.

No mean is subtracted anywhere: observations are assumed to be zero mean.
Only the upper triangle (``i <= j``) is stored; matrices are mirrored on read.
"""

import enum
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    ParameterError,
    StateError,
    TheoryWarning,
    ThresholdOrderError,
)

MAX_ETA = 1.0 / 32.0


def compute_epsilon(eta, delta, t0):
    """Trimming fraction ``8 eta + 12 ln(4/delta) / t0``."""
    _check_eta(eta)
    _check_delta(delta)
    _check_t0(t0)
    return 8.0 * eta + 12.0 * math.log(4.0 / delta) / t0


def _check_eta(eta):
    if not (0.0 < eta < MAX_ETA):
        raise ParameterError("eta", f"must lie in (0, 1/32), got {eta!r}")


def _check_delta(delta):
    if not (0.0 < delta < 1.0):
        raise ParameterError("delta", f"must lie in (0, 1), got {delta!r}")


def _check_t0(t0):
    if int(t0) != t0 or t0 < 1:
        raise ParameterError("t0", f"must be a positive integer, got {t0!r}")


def hypotheses_hold(t0, delta, eta):
    """Whether ``(t0, delta, eta)`` satisfy the error-bound hypotheses.

    These are ``t0 > max(3 ln(8/delta) / (2 eta), 12 ln(4/delta) / (0.25 - 8 eta))``
    and ``delta >= 4 exp(-t0)``.
    """
    need = max(
        3.0 * math.log(8.0 / delta) / (2.0 * eta),
        12.0 * math.log(4.0 / delta) / (0.25 - 8.0 * eta),
    )
    return t0 > need and delta >= 4.0 * math.exp(-t0)


@dataclass(frozen=True)
class TrimConfig:
    """Parameters of the trimmed estimator.

    ``epsilon`` and ``valid`` are derived on construction. ``valid`` records
    whether the theoretical guarantees apply; the estimator runs either way.
    """

    t0: int
    delta: float
    eta: float
    epsilon: float = field(init=False)
    valid: bool = field(init=False)

    def __post_init__(self):
        eps = compute_epsilon(self.eta, self.delta, self.t0)
        object.__setattr__(self, "t0", int(self.t0))
        object.__setattr__(self, "epsilon", eps)
        object.__setattr__(self, "valid", hypotheses_hold(self.t0, self.delta, self.eta))


def trim(s, alpha, beta):
    """Clamp ``s`` to ``[alpha, beta]``. Works elementwise on arrays."""
    if np.any(np.asarray(alpha) > np.asarray(beta)):
        raise ThresholdOrderError(alpha, beta)
    if np.ndim(s) == 0 and np.ndim(alpha) == 0 and np.ndim(beta) == 0:
        if s > beta:
            return beta
        if s < alpha:
            return alpha
        return s
    return np.minimum(np.maximum(s, alpha), beta)


def _ceil(x):
    # guard against products such as 0.07 * 100 = 7.000000000000001
    return math.ceil(round(x, 9))


def threshold_indices(n, epsilon):
    """1-based order-statistic indices ``(i_alpha, i_beta)`` for ``n`` samples."""
    i_alpha = max(1, _ceil(epsilon * n))
    i_beta = min(n, _ceil((1.0 - epsilon) * n))
    if i_alpha > i_beta:
        raise ParameterError(
            "epsilon",
            f"{epsilon!r} leaves no samples between the thresholds "
            f"(i_alpha={i_alpha}, i_beta={i_beta})",
        )
    return i_alpha, i_beta


def compute_thresholds(buffer, epsilon):
    """Trimming thresholds from the order statistics of ``buffer``.

    Parameters
    ----------
    buffer : array_like, shape (t0,) or (t0, k)
        Products observed up to the initialization step. A 2-D buffer is
        treated column by column.
    epsilon : float
        Trimming fraction.

    Returns
    -------
    alpha, beta : float or ndarray
        The ``ceil(epsilon t0)``-th and ``ceil((1 - epsilon) t0)``-th smallest
        values (1-based, clamped to ``[1, t0]``).
    """
    buf = np.asarray(buffer, dtype=float)
    n = buf.shape[0] if buf.ndim else 0
    if n == 0:
        raise StateError("cannot compute thresholds from an empty buffer")
    i_alpha, i_beta = threshold_indices(n, epsilon)
    ordered = np.sort(buf, axis=0)
    alpha = ordered[i_alpha - 1]
    beta = ordered[i_beta - 1]
    if buf.ndim == 1:
        return float(alpha), float(beta)
    return alpha, beta


class Phase(enum.Enum):
    BUFFERING = "buffering"
    INITIALIZED = "initialized"


class TrimState:
    """Running state of the online trimmed inner product.

    Parameters
    ----------
    config : TrimConfig
    p : int
        Dimension of the observations.
    trimming : bool, default True
        With ``False`` the thresholds are ``-inf`` and ``+inf``, which turns
        the estimator into the plain running mean of products (same recursion,
        no clamping). Used as the naive baseline.
    epsilon : float, optional
        Trimming fraction used at ``t0``; defaults to ``config.epsilon``.

    Attributes
    ----------
    t : int
        Number of ingested samples.
    phase : Phase
    alpha, beta, estimate : ndarray or None
        Upper-triangle vectors of length ``p (p + 1) / 2``; ``None`` while
        buffering.
    """

    def __init__(self, config, p, trimming=True, epsilon=None):
        if int(p) != p or p < 1:
            raise ParameterError("p", f"must be a positive integer, got {p!r}")
        self.config = config
        self.p = int(p)
        self.trimming = trimming
        self.epsilon = config.epsilon if epsilon is None else float(epsilon)
        if trimming:
            threshold_indices(config.t0, self.epsilon)
        self.t = 0
        self.phase = Phase.BUFFERING
        self._iu = np.triu_indices(self.p)
        self.buffers = np.empty((config.t0, len(self._iu[0])))
        self.alpha = None
        self.beta = None
        self.estimate = None

    @property
    def n_pairs(self):
        return len(self._iu[0])

    def products(self, sample):
        """Validated upper-triangle products ``x_i x_j`` (``i <= j``) of one sample."""
        x = np.asarray(sample, dtype=float)
        if x.shape != (self.p,):
            raise DataError(f"expected a sample of dimension {self.p}, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise DataError("sample contains non-finite entries")
        return x[self._iu[0]] * x[self._iu[1]]

    def ingest(self, sample):
        """Consume one observation vector and return ``self``."""
        s = self.products(sample)
        t = self.t + 1
        t0 = self.config.t0
        if t <= t0:
            self.buffers[t - 1] = s
            if t == t0:
                self._initialize()
        else:
            phi = np.minimum(np.maximum(s, self.alpha), self.beta)
            self.estimate = ((t - 1) * self.estimate + phi) / t
        self.t = t
        return self

    def _initialize(self):
        cfg = self.config
        if self.trimming:
            if self.epsilon >= 0.25:
                warnings.warn(
                    f"epsilon={self.epsilon:.4f} >= 0.25; the error bounds do not apply",
                    TheoryWarning,
                    stacklevel=3,
                )
            alpha, beta = compute_thresholds(self.buffers, self.epsilon)
        else:
            alpha = np.full(self.n_pairs, -np.inf)
            beta = np.full(self.n_pairs, np.inf)
        phi = np.minimum(np.maximum(self.buffers, alpha), beta)
        self.alpha = alpha
        self.beta = beta
        self.estimate = phi.sum(axis=0) / cfg.t0
        self.buffers = None
        self.phase = Phase.INITIALIZED

    def _mirror(self, vec):
        out = np.empty((self.p, self.p))
        out[self._iu] = vec
        out.T[self._iu] = vec
        return out

    def current_estimate(self):
        """Current covariance estimate as a symmetric ``p x p`` matrix."""
        self._require_initialized()
        return self._mirror(self.estimate)

    def thresholds(self):
        """``(alpha, beta)`` as symmetric ``p x p`` matrices."""
        self._require_initialized()
        return self._mirror(self.alpha), self._mirror(self.beta)

    def _require_initialized(self):
        if self.phase is not Phase.INITIALIZED:
            raise StateError(
                f"estimate unavailable before t0={self.config.t0} samples (t={self.t})"
            )

    def copy(self):
        new = TrimState.__new__(TrimState)
        new.__dict__.update(self.__dict__)
        for name in ("buffers", "alpha", "beta", "estimate"):
            val = getattr(self, name)
            setattr(new, name, None if val is None else val.copy())
        return new

    # -- checkpointing -------------------------------------------------------

    def to_record(self):
        """Flat float64 record: config fields, t, phase, then the upper
        triangles of alpha, beta and estimate in row-major order.

        Only initialized states can be checkpointed, since the raw buffers are
        not part of the record.
        """
        self._require_initialized()
        cfg = self.config
        head = [cfg.t0, cfg.delta, cfg.eta, self.epsilon, self.t, 1.0]
        return np.concatenate([np.array(head, dtype=float), self.alpha, self.beta, self.estimate])

    @classmethod
    def from_record(cls, record):
        rec = np.asarray(record, dtype=float)
        n_pairs = (rec.size - 6) // 3
        p = int(round((math.sqrt(8 * n_pairs + 1) - 1) / 2))
        if rec.size < 9 or 3 * n_pairs + 6 != rec.size or p * (p + 1) // 2 != n_pairs:
            raise DataError(f"record of length {rec.size} is not a trim checkpoint")
        if rec[5] != 1.0:
            raise DataError("record is not in the initialized phase")
        cfg = TrimConfig(t0=int(rec[0]), delta=float(rec[1]), eta=float(rec[2]))
        trimming = bool(np.all(np.isfinite(rec[6:6 + n_pairs])))
        state = cls.__new__(cls)
        state.config = cfg
        state.p = p
        state.trimming = trimming
        state.epsilon = float(rec[3])
        state._iu = np.triu_indices(p)
        state.t = int(rec[4])
        state.phase = Phase.INITIALIZED
        state.buffers = None
        state.alpha = rec[6:6 + n_pairs].copy()
        state.beta = rec[6 + n_pairs:6 + 2 * n_pairs].copy()
        state.estimate = rec[6 + 2 * n_pairs:].copy()
        return state

    def to_bytes(self):
        """Little-endian IEEE-754 encoding of :meth:`to_record`."""
        return self.to_record().astype("<f8").tobytes()

    @classmethod
    def from_bytes(cls, data):
        return cls.from_record(np.frombuffer(data, dtype="<f8"))


def batch_trimmed_mean(samples, alpha, beta):
    """Mean of clamped products over a whole stream, as a ``p x p`` matrix.

    ``samples`` has one observation per row; ``alpha`` and ``beta`` are
    ``p x p`` threshold matrices.
    """
    X = np.asarray(samples, dtype=float)
    prods = X[:, :, None] * X[:, None, :]
    return np.clip(prods, alpha, beta).mean(axis=0)
