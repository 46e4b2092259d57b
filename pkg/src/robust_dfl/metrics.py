"""Localization error metrics and eigen-network reporting."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike

import numpy as np

from .covariance import EigenDecomposition
from .geometry import LinkSet, SensorLayout


@dataclass(frozen=True, eq=False)
class ErrorSeries:
    errors: np.ndarray
    t: np.ndarray | None = None
    estimator: str = ""
    scenario: str = ""

    def __len__(self) -> int:
        return int(self.errors.size)


def _errors(series) -> np.ndarray:
    e = series.errors if isinstance(series, ErrorSeries) else np.asarray(series, float)
    return np.asarray(e, float).reshape(-1)


def localization_errors(estimates, truth, estimator: str = "", scenario: str = "") -> ErrorSeries:
    """Euclidean distance between each estimate and the true position.

    ``truth`` is a ``GroundTruth`` or an ``(n, 2)`` array.
    """
    est = np.asarray(estimates, float).reshape(-1, 2)
    pos = getattr(truth, "positions", truth)
    pos = np.asarray(pos, float).reshape(-1, 2)
    if est.shape != pos.shape:
        raise ValueError(f"{est.shape[0]} estimates for {pos.shape[0]} ground-truth frames")
    t = getattr(truth, "t", None)
    return ErrorSeries(np.hypot(*(est - pos).T), t, estimator, scenario)


def rmse(series) -> float:
    e = _errors(series)
    if e.size == 0:
        raise ValueError("empty error series")
    return float(np.sqrt(np.mean(e * e)))


def error_percentile(series, q: float = 0.97) -> float:
    """Empirical quantile with linear interpolation between order statistics
    (position ``q * (n - 1)`` in the sorted errors)."""
    if not 0.0 < q <= 1.0:
        raise ValueError("q must lie in (0, 1]")
    e = _errors(series)
    if e.size == 0:
        raise ValueError("empty error series")
    return float(np.quantile(e, q, method="linear"))


@dataclass(frozen=True)
class EigenNetworkReport:
    """Links of the first eigen-network above ``threshold_frac`` of its maximum,
    sorted by descending weight, plus the full scree (eigenvalue) sequence."""

    link_index: np.ndarray
    tx: np.ndarray
    rx: np.ndarray
    weight: np.ndarray
    threshold_frac: float
    scree: np.ndarray
    endpoints: np.ndarray  # (n, 2, 2) tx and rx coordinates

    def __len__(self) -> int:
        return int(self.link_index.size)


def eigen_network_report(
    eig: EigenDecomposition,
    links: LinkSet,
    layout: SensorLayout,
    threshold_frac: float = 0.30,
) -> EigenNetworkReport:
    u1 = eig.U[:, 0].copy()
    j = int(np.argmax(np.abs(u1)))
    if u1[j] < 0:
        u1 = -u1
    cutoff = threshold_frac * u1.max()
    if threshold_frac >= 1.0:
        sel = np.flatnonzero(u1 >= cutoff)
    else:
        sel = np.flatnonzero(u1 > cutoff)
    sel = sel[np.argsort(-u1[sel], kind="stable")]
    tx = links.tx[sel]
    rx = links.rx[sel]
    ends = np.array(
        [[layout.position(a), layout.position(b)] for a, b in zip(tx, rx)]
    ).reshape(-1, 2, 2)
    return EigenNetworkReport(sel, tx, rx, u1[sel], threshold_frac, eig.eigenvalues.copy(), ends)


def write_scree_csv(eigenvalues, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "eigenvalue"])
        for i, v in enumerate(np.asarray(eigenvalues).tolist(), start=1):
            w.writerow([i, repr(v)])


def write_eigen_network_csv(report: EigenNetworkReport, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link_index", "tx", "rx", "u1"])
        for row in zip(report.link_index.tolist(), report.tx.tolist(), report.rx.tolist(), report.weight.tolist()):
            w.writerow([row[0], row[1], row[2], repr(row[3])])
