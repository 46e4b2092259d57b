"""Elliptical link weight model relating voxel motion to link variance."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from os import PathLike

import numpy as np
import scipy.sparse as sp

from .geometry import LinkSet, SensorLayout, VoxelGrid, link_endpoints, link_lengths


@dataclass(frozen=True)
class WeightModelParams:
    lambda_ell: float = 0.1  # excess path length defining the ellipse, m
    phi: float = 1.0

    def __post_init__(self):
        if not self.lambda_ell > 0:
            raise ValueError("lambda_ell must be positive")
        if not self.phi > 0:
            raise ValueError("phi must be positive")


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    """Sparse ``(L, P)`` forward model."""

    values: sp.csr_matrix
    params: WeightModelParams

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def toarray(self) -> np.ndarray:
        return self.values.toarray()


def ellipse_mask(tx_pos, rx_pos, points, lambda_ell: float) -> np.ndarray:
    """Boolean ``(L, Q)`` mask: point ``q`` lies strictly inside link ``l``'s ellipse.

    ``tx_pos`` and ``rx_pos`` are ``(L, 2)``; ``points`` is ``(Q, 2)``.
    """
    tx_pos = np.atleast_2d(tx_pos)
    rx_pos = np.atleast_2d(rx_pos)
    points = np.atleast_2d(points)
    d_link = np.hypot(*(tx_pos - rx_pos).T)
    d_tx = np.hypot(
        tx_pos[:, None, 0] - points[None, :, 0], tx_pos[:, None, 1] - points[None, :, 1]
    )
    d_rx = np.hypot(
        rx_pos[:, None, 0] - points[None, :, 0], rx_pos[:, None, 1] - points[None, :, 1]
    )
    return d_tx + d_rx < (d_link + lambda_ell)[:, None]


def build_weight_matrix(
    layout: SensorLayout,
    links: LinkSet,
    grid: VoxelGrid,
    params: WeightModelParams = WeightModelParams(),
) -> WeightMatrix:
    """``W[l, p] = phi / sqrt(d_l)`` when voxel center ``p`` lies strictly inside
    the ellipse of link ``l`` (foci at its endpoints, excess path ``lambda_ell``),
    else 0."""
    link_lengths(layout, links)  # rejects coincident endpoints
    # work relative to the grid origin so translating layout and grid together
    # leaves every distance unchanged
    origin = np.asarray(grid.origin)
    a, b = link_endpoints(layout, links)
    a = a - origin
    b = b - origin
    centers = grid.local_centers
    rows, cols, vals = [], [], []
    # chunk over links to bound the (L, P) temporaries
    step = max(1, 2_000_000 // max(grid.n_voxels, 1))
    for start in range(0, len(links), step):
        sl = slice(start, start + step)
        r, c = np.nonzero(ellipse_mask(a[sl], b[sl], centers, params.lambda_ell))
        rows.append(r + start)
        cols.append(c)
        d_local = np.hypot(*(a[sl] - b[sl]).T)
        vals.append(params.phi / np.sqrt(d_local[r]))
    W = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(len(links), grid.n_voxels),
    )
    W.sort_indices()
    return WeightMatrix(W, params)


@dataclass(frozen=True)
class CoverageReport:
    counts: np.ndarray
    uncovered: np.ndarray


def coverage_report(W: WeightMatrix) -> CoverageReport:
    """Number of links whose ellipse covers each voxel, and the voxels no link sees."""
    counts = np.asarray((W.values > 0).sum(axis=0)).ravel().astype(np.int64)
    return CoverageReport(counts, np.flatnonzero(counts == 0))


def export_weights_csv(W: WeightMatrix, path: str | PathLike) -> None:
    coo = W.values.tocoo()
    order = np.lexsort((coo.col, coo.row))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["link_index", "voxel_index", "weight"])
        for i in order:
            w.writerow([int(coo.row[i]), int(coo.col[i]), repr(float(coo.data[i]))])
