"""Theoretical error bounds evaluated as runtime diagnostics, and the error trace.

All logarithms are natural.
"""

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonContractiveWarning, ParameterError
from .trim import compute_epsilon

SQRT_TERM = math.sqrt(2.0) + math.sqrt(6.0) / 9.0
BIAS_TERM = 43.0 * math.sqrt(2.0) / 12.0


def sigma_entry(s_star, i, j):
    """Standard deviation of one entry of the Wishart sample covariance,
    ``sqrt(S_ij**2 + S_ii S_jj)``."""
    s_star = np.asarray(s_star, dtype=float)
    p = s_star.shape[0]
    if not (0 <= i < p and 0 <= j < p):
        raise IndexError(f"index ({i}, {j}) out of range for p={p}")
    return math.sqrt(s_star[i, j] ** 2 + s_star[i, i] * s_star[j, j])


def sigma_matrix(s_star):
    s = np.asarray(s_star, dtype=float)
    d = np.diag(s)
    return np.sqrt(s ** 2 + np.outer(d, d))


def sigma_max(s_star):
    return float(sigma_matrix(s_star).max())


def theorem1_bound(t, t0, delta, eta, sigma):
    """Entrywise high-probability error bound of the trimmed estimator at time ``t``.

    ``(sqrt 2 + sqrt 6 / 9) sigma sqrt(ln(4/delta) / t) + (43 sqrt 2 / 12) sigma sqrt(eps)``
    """
    if t < t0:
        raise ParameterError("t", f"bound holds for t >= t0={t0}, got t={t}")
    eps = compute_epsilon(eta, delta, t0)
    return SQRT_TERM * sigma * math.sqrt(math.log(4.0 / delta) / t) + BIAS_TERM * sigma * math.sqrt(eps)


def corollary1_bound(t, p, sigma_max, t0, delta, eta):
    """Frobenius form of :func:`theorem1_bound`: ``p`` times the entrywise bound at ``sigma_max``."""
    return p * theorem1_bound(t, t0, delta, eta, sigma_max)


def corollary_frobenius_bound(p, sigma_max, eta, delta, t0):
    """Asymptotic Frobenius bound ``(43/6) p sigma sqrt(4 eta + 6 ln(4/delta) / t0)``."""
    compute_epsilon(eta, delta, t0)  # range checks
    if p < 1:
        raise ParameterError("p", f"must be positive, got {p!r}")
    if sigma_max < 0:
        raise ParameterError("sigma_max", f"must be nonnegative, got {sigma_max!r}")
    return 43.0 / 6.0 * p * sigma_max * math.sqrt(4.0 * eta + 6.0 * math.log(4.0 / delta) / t0)


def contraction_rate(a, b, zeta):
    """``max(|1 - zeta / a**2|, |1 - zeta / b**2|)``.

    Emits :class:`NonContractiveWarning` when the rate is at least 1.
    """
    if not (a > 0 and b > 0 and zeta > 0):
        raise ParameterError("a, b, zeta", f"must be positive, got {a!r}, {b!r}, {zeta!r}")
    if a > b:
        raise ParameterError("a", f"must not exceed b, got a={a!r}, b={b!r}")
    r = max(abs(1.0 - zeta / a ** 2), abs(1.0 - zeta / b ** 2))
    if r >= 1.0:
        warnings.warn(f"contraction rate r={r:.4g} >= 1", NonContractiveWarning, stacklevel=2)
    return r


def is_contractive(r):
    return r < 1.0


def dual_error_bound(r, initial_error, cov_errors):
    """Finite-time dual error bound after ``len(cov_errors)`` steps.

    ``r**n ||gamma_t0 - gamma*|| + 2 sum_k r**(n-1-k) ||S_hat_{t0+k+1} - S*||`` where
    ``cov_errors[k]`` is the covariance error fed at the ``k``-th step.
    """
    errs = np.asarray(cov_errors, dtype=float)
    n = errs.size
    weights = r ** np.arange(n - 1, -1, -1, dtype=float)
    return float(r ** n * initial_error + 2.0 * np.dot(weights, errs))


def dual_limit_bound(r, sigma_max, eta, delta, t0):
    """Asymptotic dual error ``(43 / (6 (1 - r))) sigma sqrt(4 eta + 6 ln(4/delta) / t0)``."""
    if not 0 <= r < 1:
        raise ParameterError("r", f"must lie in [0, 1), got {r!r}")
    return corollary_frobenius_bound(1, sigma_max, eta, delta, t0) / (1.0 - r)


def logdet_lower_bound(logdet_gamma0, delta_sum):
    """``g(t) = log det gamma_t0 - sum of descent gaps``."""
    return logdet_gamma0 - delta_sum


def eigen_lower_bound(g, b, p):
    """Lower eigenvalue bound ``exp(g) * b**(1 - p)``."""
    return math.exp(g) * b ** (1 - p)


def frobenius_error(estimate, truth):
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if estimate.shape != truth.shape:
        raise ValueError(f"shape mismatch: {estimate.shape} vs {truth.shape}")
    return float(np.linalg.norm(estimate - truth))


TRACE_COLUMNS = (
    "t",
    "cov_err",
    "prec_err",
    "dual_err",
    "thm1_bound",
    "cor2_bound",
    "lambda_min_gamma",
    "delta_sum",
)


def format_float(x):
    """Shortest round-trip decimal representation."""
    return repr(float(x))


@dataclass
class ErrorTrace:
    """Time-indexed error and bound records. Missing values are NaN."""

    rows: list = field(default_factory=list)

    def append(self, t, **values):
        if self.rows and t <= self.rows[-1]["t"]:
            raise ValueError(f"trace times must increase strictly: {t} after {self.rows[-1]['t']}")
        unknown = set(values) - set(TRACE_COLUMNS)
        if unknown:
            raise KeyError(f"unknown trace columns: {sorted(unknown)}")
        row = {c: math.nan for c in TRACE_COLUMNS}
        row.update(values)
        row["t"] = int(t)
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def last(self):
        return self.rows[-1]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_COLUMNS)
            for r in self.rows:
                w.writerow([r["t"]] + [format_float(r[c]) for c in TRACE_COLUMNS[1:]])

    @classmethod
    def read_csv(cls, path):
        trace = cls()
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            for rec in reader:
                t = int(rec.pop("t"))
                trace.append(t, **{k: float(v) for k, v in rec.items()})
        return trace
