import math

import numpy as np
import pytest

from robust_ggm import bounds
from robust_ggm.bounds import (
    ErrorTrace,
    contraction_rate,
    corollary_frobenius_bound,
    frobenius_error,
    sigma_entry,
    theorem1_bound,
)
from robust_ggm.errors import NonContractiveWarning, ParameterError

# 40-digit mpmath evaluations
THM1_PAPER = 3.486224726074676888
THM1_SAMPLING = 0.2059630832678111476
THM1_BIAS = 3.280261642806865740
COR2_PAPER = 46.38990503389718655


def test_sigma_entry_examples():
    assert sigma_entry(np.eye(3), 1, 1) == pytest.approx(math.sqrt(2))
    assert sigma_entry(np.eye(3), 0, 2) == 1.0
    assert sigma_entry(np.diag([4.0, 1.0]), 0, 1) == 2.0
    with pytest.raises(IndexError):
        sigma_entry(np.eye(2), 0, 2)


def test_sigma_matrix_agrees_with_entries(rng):
    a = rng.standard_normal((4, 4))
    s = a @ a.T + np.eye(4)
    m = bounds.sigma_matrix(s)
    for i in range(4):
        for j in range(4):
            assert m[i, j] == pytest.approx(sigma_entry(s, i, j), rel=1e-14)
    assert bounds.sigma_max(s) == m.max()


def test_theorem1_paper_parameters():
    val = theorem1_bound(100, 100, 0.9, 0.03, 1.0)
    assert val == pytest.approx(THM1_PAPER, rel=1e-13)
    assert val == pytest.approx(3.486, abs=5e-4)
    sampling = bounds.SQRT_TERM * math.sqrt(math.log(4 / 0.9) / 100)
    assert sampling == pytest.approx(THM1_SAMPLING, rel=1e-13)
    assert val - sampling == pytest.approx(THM1_BIAS, rel=1e-13)


def test_theorem1_scaling_and_limits():
    assert theorem1_bound(500, 100, 0.9, 0.03, 0.0) == 0.0
    assert theorem1_bound(500, 100, 0.9, 0.03, 3.0) == pytest.approx(3 * theorem1_bound(500, 100, 0.9, 0.03, 1.0))
    ts = [100, 200, 1000, 10**5, 10**9]
    vals = [theorem1_bound(t, 100, 0.9, 0.03, 1.0) for t in ts]
    assert all(a > b for a, b in zip(vals, vals[1:]))
    assert vals[-1] == pytest.approx(THM1_BIAS, rel=1e-3)
    with pytest.raises(ParameterError):
        theorem1_bound(99, 100, 0.9, 0.03, 1.0)


def test_theorem1_increases_with_epsilon():
    a = theorem1_bound(1000, 1000, 0.5, 0.001, 1.0)
    b = theorem1_bound(1000, 1000, 0.5, 0.01, 1.0)
    assert b > a


def test_corollary_bound():
    assert corollary_frobenius_bound(10, math.sqrt(2), 0.03, 0.9, 100) == pytest.approx(COR2_PAPER, rel=1e-13)
    assert corollary_frobenius_bound(10, math.sqrt(2), 0.03, 0.9, 100) == pytest.approx(46.38, abs=0.02)
    assert corollary_frobenius_bound(10, 0.0, 0.03, 0.9, 100) == 0.0
    assert corollary_frobenius_bound(20, 1.3, 0.01, 0.5, 300) == 2 * corollary_frobenius_bound(10, 1.3, 0.01, 0.5, 300)


def test_corollary1_is_p_times_entrywise():
    assert bounds.corollary1_bound(400, 7, 1.5, 100, 0.5, 0.01) == pytest.approx(
        7 * theorem1_bound(400, 100, 0.5, 0.01, 1.5))


def test_contraction_rate():
    assert contraction_rate(1.0, 2.0, 0.8) == pytest.approx(0.8)
    assert contraction_rate(1.5, 1.5, 2.25) == 0.0
    with pytest.warns(NonContractiveWarning):
        r = contraction_rate(1.0, 1.0, 2.5)
    assert r == 1.5 and not bounds.is_contractive(r)
    with pytest.raises(ParameterError):
        contraction_rate(0.0, 1.0, 0.1)
    with pytest.raises(ParameterError):
        contraction_rate(2.0, 1.0, 0.1)


def test_dual_bounds():
    r = 0.5
    assert bounds.dual_error_bound(r, 1.0, []) == 1.0
    # r^2 * 1 + 2 (r * 0.1 + 0.2)
    assert bounds.dual_error_bound(r, 1.0, [0.1, 0.2]) == pytest.approx(0.25 + 2 * (0.05 + 0.2))
    lim = bounds.dual_limit_bound(r, 1.0, 0.03, 0.9, 100)
    assert lim == pytest.approx(corollary_frobenius_bound(1, 1.0, 0.03, 0.9, 100) / 0.5)
    with pytest.raises(ParameterError):
        bounds.dual_limit_bound(1.0, 1.0, 0.03, 0.9, 100)


def test_logdet_bookkeeping():
    g = bounds.logdet_lower_bound(math.log(8.0), math.log(2.0))
    assert g == pytest.approx(math.log(4.0))
    assert bounds.eigen_lower_bound(g, 2.0, 3) == pytest.approx(1.0)


def test_frobenius_error(rng):
    a = rng.standard_normal((5, 5))
    b = rng.standard_normal((5, 5))
    assert frobenius_error(a, a) == 0.0
    assert frobenius_error(np.eye(2), np.zeros((2, 2))) == pytest.approx(math.sqrt(2))
    oracle = math.sqrt(math.fsum((x - y) ** 2 for x, y in zip(a.ravel(), b.ravel())))
    assert frobenius_error(a, b) == pytest.approx(oracle, abs=1e-12)
    with pytest.raises(ValueError):
        frobenius_error(np.eye(2), np.eye(3))


def test_trace_roundtrip(tmp_path):
    tr = ErrorTrace()
    tr.append(1, cov_err=1.5)
    tr.append(2, cov_err=0.1 + 0.2, prec_err=2.0, lambda_min_gamma=0.3, delta_sum=-1e-17)
    with pytest.raises(ValueError):
        tr.append(2, cov_err=1.0)
    with pytest.raises(KeyError):
        tr.append(3, bogus=1.0)
    path = tmp_path / "trace.csv"
    tr.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,cov_err,prec_err,dual_err,thm1_bound,cor2_bound,lambda_min_gamma,delta_sum"
    assert lines[2].startswith("2,0.30000000000000004,2.0,nan")
    back = ErrorTrace.read_csv(path)
    assert back.rows[1]["cov_err"] == 0.1 + 0.2
    assert back.rows[1]["delta_sum"] == -1e-17
    assert math.isnan(back.rows[0]["prec_err"])
