import csv
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from llvqa.exceptions import FitError, UndefinedCorrelationError
from llvqa.metrics import evaluate, fit_poly4, plcc, rmse, srcc, write_scatter


def enumerate_ranks(v):
    """1-based ranks by counting smaller and equal values; ties get the average rank."""
    out = []
    for x in v:
        less = sum(1 for y in v if y < x)
        equal = sum(1 for y in v if y == x)
        out.append(less + (equal + 1) / 2.0)
    return out


def textbook_pearson(a, b):
    n = len(a)
    ma, mb = sum(a) / n, sum(b) / n
    cov = sum((x - ma) * (y - mb) for x, y in zip(a, b)) / n
    va = sum((x - ma) ** 2 for x in a) / n
    vb = sum((y - mb) ** 2 for y in b) / n
    return cov / math.sqrt(va * vb)


finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def distinct_vectors(n_min=5, n_max=20):
    # well-separated values so affine maps cannot merge points in floating point
    ints = st.lists(st.integers(-10_000, 10_000), min_size=n_min, max_size=n_max, unique=True)
    return ints.map(lambda v: [i / 10.0 for i in v])


# ----------------------------------------------------------------------- srcc


def test_srcc_perfect_orderings():
    gt = np.array([1.0, 4.0, 2.0, 9.0, 5.0])
    assert srcc(gt**3 + 1, gt) == 1.0
    assert srcc(-gt, gt) == -1.0


def test_srcc_with_tie_matches_rank_enumeration():
    rng = np.random.default_rng(6)
    pred = rng.standard_normal(6)
    pred[4] = pred[1]
    gt = rng.standard_normal(6)
    expected = textbook_pearson(enumerate_ranks(list(pred)), enumerate_ranks(list(gt)))
    assert srcc(pred, gt) == pytest.approx(expected, abs=1e-12)


def test_srcc_undefined_and_short():
    with pytest.raises(UndefinedCorrelationError):
        srcc([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        srcc([1.0, 2.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        srcc([1.0, 2.0, 3.0], [1.0, 2.0])


@settings(max_examples=100)
@given(st.lists(st.integers(-1000, 1000), min_size=5, max_size=20, unique=True), st.integers(0, 2**32 - 1))
def test_srcc_invariant_to_increasing_transforms(x, seed):
    x = np.array(x, dtype=float)
    gt = np.random.default_rng(seed).permutation(x.size).astype(float)
    base = srcc(x, gt)
    squashed = x / 1e3
    assert srcc(np.exp(squashed), gt) == pytest.approx(base, abs=1e-12)
    assert srcc(squashed**3, gt) == pytest.approx(base, abs=1e-12)
    assert srcc(x, np.exp(gt / 20)) == pytest.approx(base, abs=1e-12)


# ----------------------------------------------------------------------- plcc


def test_plcc_affine_cases():
    gt = np.array([3.0, 1.0, 4.0, 1.5, 5.0])
    assert plcc(2 * gt + 3, gt) == pytest.approx(1.0, abs=1e-12)
    assert plcc(-gt, gt) == pytest.approx(-1.0, abs=1e-12)


def test_plcc_matches_covariance_formula():
    rng = np.random.default_rng(8)
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    assert plcc(a, b) == pytest.approx(textbook_pearson(list(a), list(b)), abs=1e-12)


def test_plcc_zero_variance():
    with pytest.raises(UndefinedCorrelationError):
        plcc([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])


def test_plcc_fitted_uses_quartic():
    x = np.linspace(-2, 2, 9)
    y = x**4 - 2 * x**2 + 1
    assert plcc(x, y, fitted=True) == pytest.approx(1.0, abs=1e-9)
    assert abs(plcc(x, y)) < 0.1


@settings(max_examples=100)
@given(distinct_vectors(), distinct_vectors(), st.floats(0.01, 100), st.floats(-100, 100))
def test_plcc_invariant_to_positive_affine(a, b, scale, shift):
    n = min(len(a), len(b))
    a, b = np.array(a[:n]), np.array(b[:n])
    base = plcc(a, b)
    assert plcc(scale * a + shift, b) == pytest.approx(base, abs=1e-9)
    assert plcc(a, scale * b + shift) == pytest.approx(base, abs=1e-9)


# ----------------------------------------------------------------------- rmse


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355, abs=5e-5)
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5), abs=1e-12)
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


@given(st.lists(finite, min_size=1, max_size=20), st.floats(-50, 50))
def test_rmse_offset_and_symmetry(gt, d):
    gt = np.array(gt)
    assert rmse(gt + d, gt) == pytest.approx(abs(d), abs=1e-9)
    pred = gt[::-1]
    assert rmse(pred, gt) == rmse(gt, pred)


# ---------------------------------------------------------------------- poly4


def test_poly4_reproduces_generating_quartic():
    x = np.linspace(-2, 2, 9)
    y = x**4 - 2 * x**2 + 1
    fit = fit_poly4(x, y)
    np.testing.assert_allclose(fit(x), y, atol=1e-6)


def test_poly4_constant_and_interpolation():
    fit = fit_poly4([1.0, 2.0, 3.0, 4.0, 7.0], [5.0] * 5)
    np.testing.assert_allclose(fit.coef, [5.0, 0, 0, 0, 0], atol=1e-9)
    x = np.array([0.0, 1.0, 3.0, 4.0, 9.0])
    y = np.array([2.0, -1.0, 7.0, 0.5, 3.0])
    np.testing.assert_allclose(fit_poly4(x, y)(x), y, atol=1e-8)


def test_poly4_degenerate():
    with pytest.raises(FitError):
        fit_poly4([2.0] * 6, [1.0, 2, 3, 4, 5, 6])
    with pytest.raises(ValueError):
        fit_poly4([1.0, 2, 3, 4], [1.0, 2, 3, 4])


@settings(max_examples=100)
@given(distinct_vectors(6, 20), st.integers(0, 2**32 - 1))
def test_poly4_beats_linear(x, seed):
    x = np.array(x)
    assume(x.std() > 1e-3)
    y = np.random.default_rng(seed).standard_normal(x.size)
    quartic = np.sum((fit_poly4(x, y)(x) - y) ** 2)
    lin = np.polynomial.polynomial.polyfit(x, y, 1)
    linear = np.sum((np.polynomial.polynomial.polyval(x, lin) - y) ** 2)
    assert quartic <= linear + 1e-8 * (1 + linear)


# ----------------------------------------------------------------- evaluate


def test_evaluate_report_and_scatter(tmp_path):
    rng = np.random.default_rng(1)
    gt = rng.uniform(0, 100, 12)
    pred = gt + rng.standard_normal(12) * 5
    report = evaluate(pred, gt)
    assert report.n == 12
    assert report.srcc == srcc(pred, gt) and report.plcc_raw == plcc(pred, gt)
    assert report.plcc_fitted == pytest.approx(plcc(pred, gt, fitted=True), abs=1e-12)
    assert report.rmse == rmse(pred, gt)
    assert len(report.to_dict()["poly4"]["coef"]) == 5
    write_scatter(tmp_path / "s.csv", pred, gt, report.poly4)
    with open(tmp_path / "s.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 12 and set(rows[0]) == {"pred", "mos", "fitted_pred"}
    assert float(rows[3]["fitted_pred"]) == pytest.approx(report.poly4(pred[3]))


def test_evaluate_small_n():
    report = evaluate([1.0, 2.0, 3.0], [1.0, 3.0, 2.0])
    assert report.plcc_fitted is None and report.poly4 is None
    assert report.srcc == pytest.approx(0.5)
    with pytest.raises(ValueError):
        evaluate([1.0, 2.0], [1.0, 2.0])
