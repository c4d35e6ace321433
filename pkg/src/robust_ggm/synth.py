"""Synthetic ground truth, Gaussian streams and corruption injection.

Every function takes an integer ``seed`` and draws from its own named
substream, ``numpy.random.default_rng([seed, SUBSTREAM])`` (PCG64 seeded
through ``SeedSequence``), so the graph, the clean stream and the corruption
stay decorrelated even when they share one experiment seed.
"""

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import DataError, DegenerateBudgetWarning, NumericalError, ParameterError
from .trim import MAX_ETA

GRAPH, STREAM, CORRUPTION = 0, 1, 2

EDGE_PROB = 0.05
EDGE_LOW, EDGE_HIGH = 0.3, 0.6


def rng_for(seed, substream):
    """Generator for one of the ``GRAPH``, ``STREAM``, ``CORRUPTION`` substreams."""
    return np.random.default_rng([int(seed) & 0xFFFFFFFFFFFFFFFF, substream])


@dataclass(frozen=True)
class GroundTruth:
    theta_star: np.ndarray
    s_star: np.ndarray
    edges: tuple

    @property
    def p(self):
        return self.theta_star.shape[0]


def precision_from_adjacency(a):
    """Shift a symmetric weight matrix so its smallest eigenvalue is exactly 1.

    ``theta = a + (xi + |l|) I`` with ``l = lambda_min(a)`` and
    ``xi = 1 - l - |l|``, i.e. ``theta = a + (1 - l) I``.
    """
    lmin = float(linalg.eigvalsh(a)[0])
    xi = 1.0 - lmin - abs(lmin)
    return a + (xi + abs(lmin)) * np.eye(a.shape[0])


def generate_graph(p, seed):
    """Sparse Erdos-Renyi precision matrix and its inverse.

    Each upper-triangle pair is an edge with probability 0.05; edge weights
    are ``sign * U[0.3, 0.6]`` with a fair random sign.
    """
    if int(p) != p or p < 2:
        raise ParameterError("p", f"must be an integer >= 2, got {p!r}")
    p = int(p)
    rng = rng_for(seed, GRAPH)
    iu = np.triu_indices(p, k=1)
    n = len(iu[0])
    present = rng.random(n) < EDGE_PROB
    magnitude = rng.uniform(EDGE_LOW, EDGE_HIGH, size=n)
    sign = np.where(rng.random(n) < 0.5, -1.0, 1.0)
    weights = np.where(present, sign * magnitude, 0.0)
    a = np.zeros((p, p))
    a[iu] = weights
    a += a.T
    theta = precision_from_adjacency(a)
    s_star = linalg.inv(theta)
    s_star = 0.5 * (s_star + s_star.T)
    edges = tuple((int(i), int(j)) for i, j, e in zip(iu[0], iu[1], present) if e)
    return GroundTruth(theta, s_star, edges)


def sample_stream(s_star, t, seed):
    """``t`` i.i.d. draws from ``N(0, s_star)`` as a ``p x t`` matrix (one column per time)."""
    s_star = np.asarray(s_star, dtype=float)
    if int(t) != t or t < 1:
        raise ParameterError("t", f"must be a positive integer, got {t!r}")
    try:
        chol = linalg.cholesky(s_star, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"covariance is not positive definite: {exc}") from None
    z = rng_for(seed, STREAM).standard_normal((s_star.shape[0], int(t)))
    return chol @ z


class CorruptionModel(enum.Enum):
    COLUMN = "column"
    DISTRIBUTED = "distributed"
    PER_ROW = "per-row"

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).strip().lower().replace("_", "-"))
        except ValueError:
            names = ", ".join(m.value for m in cls)
            raise ParameterError("corruption", f"unknown model {value!r} (choose from {names})") from None


@dataclass(frozen=True)
class CorruptionSpec:
    """Where and how cells are replaced.

    ``sigma`` is a standard deviation: corrupted cells are ``N(mu, sigma**2)``.
    """

    model: CorruptionModel = CorruptionModel.PER_ROW
    eta: float = 0.03
    mu: float = 1.0
    sigma: float = 5.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "model", CorruptionModel.parse(self.model))
        if not 0.0 <= self.eta < MAX_ETA:
            raise ParameterError("eta", f"must lie in [0, 1/32), got {self.eta!r}")
        if not self.sigma > 0:
            raise ParameterError("sigma", f"must be positive, got {self.sigma!r}")

    def cells_per_row(self, t):
        if self.model is CorruptionModel.DISTRIBUTED:
            return math.floor(self.eta * t / 2)
        if self.model is CorruptionModel.PER_ROW:
            return math.floor(self.eta * t)
        return 0

    def columns(self, t):
        if self.model is CorruptionModel.COLUMN:
            return math.floor(self.eta * t)
        return 0


@dataclass(frozen=True)
class CorruptionMask:
    cells: np.ndarray

    @property
    def row_counts(self):
        return self.cells.sum(axis=1)

    @property
    def col_counts(self):
        return self.cells.sum(axis=0)

    @property
    def n_corrupted(self):
        return int(self.cells.sum())

    def pair_counts(self):
        """Number of corrupted products ``x_i x_j`` for every pair ``(i, j)``."""
        c = self.cells.astype(np.int64)
        both = c @ c.T
        per_row = c.sum(axis=1)
        return per_row[:, None] + per_row[None, :] - both

    def positions(self):
        """``(row, col)`` pairs of corrupted cells in row-major order."""
        return np.argwhere(self.cells)


def corrupt(data, spec):
    """Replace cells of a ``p x t`` data matrix according to ``spec``.

    Returns
    -------
    corrupted : ndarray
        Copy of ``data`` with the masked cells redrawn from ``N(mu, sigma**2)``.
    mask : CorruptionMask
    """
    data = np.asarray(data, dtype=float)
    if data.ndim != 2:
        raise DataError(f"expected a p x t matrix, got shape {data.shape}")
    p, t = data.shape
    cells = np.zeros((p, t), dtype=bool)
    out = data.copy()
    if spec.eta * t < 1:
        warnings.warn(
            f"eta * t = {spec.eta * t:.3g} < 1: no cells corrupted",
            DegenerateBudgetWarning,
            stacklevel=2,
        )
        return out, CorruptionMask(cells)
    rng = rng_for(spec.seed, CORRUPTION)
    if spec.model is CorruptionModel.COLUMN:
        cols = rng.choice(t, size=spec.columns(t), replace=False)
        cells[:, cols] = True
    else:
        k = spec.cells_per_row(t)
        for i in range(p):
            cells[i, rng.choice(t, size=k, replace=False)] = True
    # positions are drawn before values so that specs differing only in
    # (mu, sigma) share the mask and the standardized draws
    z = rng.standard_normal(int(cells.sum()))
    out[cells] = spec.mu + spec.sigma * z
    return out, CorruptionMask(cells)
