"""Correlation metrics and the quartic mapping used for fitted scatter curves."""

import csv
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import rankdata

from ._validation import check_scores
from .exceptions import FitError, UndefinedCorrelationError

POLY_RIDGE = 1e-12


def _pearson(a, b):
    a = a - a.mean()
    b = b - b.mean()
    sa, sb = np.dot(a, a), np.dot(b, b)
    if sa == 0.0 or sb == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(a, b) / np.sqrt(sa * sb), -1.0, 1.0))


def srcc(pred, gt):
    """Spearman rank correlation with average ranks for ties."""
    pred, gt = check_scores(pred, gt, min_len=3, name="srcc")
    return _pearson(rankdata(pred, method="average"), rankdata(gt, method="average"))


def plcc(pred, gt, fitted=False):
    """Pearson correlation of raw predictions, or of their quartic fit to ``gt``."""
    pred, gt = check_scores(pred, gt, min_len=3, name="plcc")
    if fitted:
        pred = fit_poly4(pred, gt)(pred)
    return _pearson(pred, gt)


def rmse(pred, gt):
    pred, gt = check_scores(pred, gt, min_len=1, name="rmse")
    return float(np.sqrt(np.mean((pred - gt) ** 2)))


@dataclass(frozen=True)
class Poly4Fit:
    """``y ~ sum_j coef[j] * z**j`` with ``z = (x - x_mean) / x_std``."""

    coef: tuple
    x_mean: float
    x_std: float

    def __call__(self, x):
        z = (np.asarray(x, dtype=np.float64) - self.x_mean) / self.x_std
        return np.polynomial.polynomial.polyval(z, self.coef)


def fit_poly4(x, y):
    """Least-squares quartic on standardized ``x`` (normal equations, ridge 1e-12)."""
    x, y = check_scores(x, y, min_len=5, name="fit_poly4")
    mu, sd = float(x.mean()), float(x.std())
    if sd == 0.0:
        raise FitError("fit_poly4: x has zero variance")
    z = (x - mu) / sd
    A = np.vander(z, 5, increasing=True)
    coef = np.linalg.solve(A.T @ A + POLY_RIDGE * np.eye(5), A.T @ y)
    return Poly4Fit(tuple(float(c) for c in coef), mu, sd)


@dataclass
class MetricsReport:
    n: int
    srcc: float
    plcc_raw: float
    plcc_fitted: float | None
    rmse: float
    poly4: Poly4Fit | None

    def to_dict(self):
        d = asdict(self)
        if self.poly4 is not None:
            d["poly4"] = {"coef": list(self.poly4.coef), "x_mean": self.poly4.x_mean, "x_std": self.poly4.x_std}
        return d


def evaluate(pred, gt):
    """Full report. The quartic needs 5 points; below that the fitted fields are None."""
    pred, gt = check_scores(pred, gt, min_len=3, name="evaluate")
    fit = fit_poly4(pred, gt) if pred.size >= 5 else None
    return MetricsReport(
        n=int(pred.size),
        srcc=srcc(pred, gt),
        plcc_raw=plcc(pred, gt),
        plcc_fitted=_pearson(fit(pred), gt) if fit is not None else None,
        rmse=rmse(pred, gt),
        poly4=fit,
    )


def write_scatter(path, pred, gt, fit=None):
    """CSV with columns pred, mos, fitted_pred."""
    pred, gt = check_scores(pred, gt, name="scatter")
    fit = fit or fit_poly4(pred, gt)
    fitted = fit(pred)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["pred", "mos", "fitted_pred"])
        for p, g, f in zip(pred, gt, fitted):
            w.writerow([repr(float(p)), repr(float(g)), repr(float(f))])
