"""Sensor layouts, directional links and the voxel grid of the imaging region."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from os import PathLike
from typing import Iterable, Sequence

import numpy as np


class GeometryError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SensorLayout:
    """Ordered sensor nodes with planar coordinates in meters."""

    node_ids: np.ndarray
    positions: np.ndarray

    def __post_init__(self):
        ids = np.array(self.node_ids, dtype=np.int64).reshape(-1)
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        if ids.size != pos.shape[0]:
            raise GeometryError("node_ids and positions differ in length")
        if ids.size < 2:
            raise GeometryError("a layout needs at least 2 nodes")
        if np.unique(ids).size != ids.size:
            raise GeometryError("node ids must be unique")
        if not np.all(np.isfinite(pos)):
            raise GeometryError("node positions must be finite")
        object.__setattr__(self, "node_ids", _frozen(ids))
        object.__setattr__(self, "positions", _frozen(pos))
        object.__setattr__(
            self, "_index", {int(n): i for i, n in enumerate(ids)}
        )

    @property
    def n_nodes(self) -> int:
        return int(self.node_ids.size)

    def index_of(self, node_id: int) -> int:
        try:
            return self._index[int(node_id)]
        except KeyError:
            raise GeometryError(f"unknown node id {node_id}") from None

    def position(self, node_id: int) -> np.ndarray:
        return self.positions[self.index_of(node_id)]

    def translated(self, offset) -> "SensorLayout":
        return SensorLayout(self.node_ids, self.positions + np.asarray(offset, float))


@dataclass(frozen=True, eq=False)
class LinkSet:
    """Directional links; link ``l`` is ``(tx[l], rx[l])`` given as node ids."""

    tx: np.ndarray
    rx: np.ndarray

    def __post_init__(self):
        tx = np.array(self.tx, dtype=np.int64).reshape(-1)
        rx = np.array(self.rx, dtype=np.int64).reshape(-1)
        if tx.size != rx.size:
            raise GeometryError("tx and rx differ in length")
        if np.any(tx == rx):
            bad = int(np.flatnonzero(tx == rx)[0])
            raise GeometryError(f"link {bad} has tx == rx == {tx[bad]}")
        pairs = set(zip(tx.tolist(), rx.tolist()))
        if len(pairs) != tx.size:
            raise GeometryError("duplicate (tx, rx) pair in link list")
        object.__setattr__(self, "tx", _frozen(tx))
        object.__setattr__(self, "rx", _frozen(rx))
        object.__setattr__(
            self, "_lookup", {p: i for i, p in enumerate(zip(tx.tolist(), rx.tolist()))}
        )

    def __len__(self) -> int:
        return int(self.tx.size)

    @property
    def n_links(self) -> int:
        return len(self)

    def index_of(self, tx: int, rx: int) -> int:
        try:
            return self._lookup[(int(tx), int(rx))]
        except KeyError:
            raise GeometryError(f"no link ({tx}, {rx})") from None

    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.tx.tolist(), self.rx.tolist()))


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """Regular ``nx`` by ``ny`` grid of square voxels.

    Voxel ``p`` has column ``ix = p % nx`` and row ``iy = p // nx``; its center is
    ``origin + ((ix + 0.5) * voxel_size, (iy + 0.5) * voxel_size)``.
    """

    origin: tuple[float, float]
    voxel_size: float
    nx: int
    ny: int
    centers: np.ndarray = field(init=False, repr=False)
    local_centers: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if not self.voxel_size > 0:
            raise GeometryError("voxel_size must be positive")
        if self.nx < 1 or self.ny < 1:
            raise GeometryError("grid needs at least one voxel per axis")
        ox, oy = (float(v) for v in self.origin)
        object.__setattr__(self, "origin", (ox, oy))
        ix, iy = np.meshgrid(np.arange(self.nx), np.arange(self.ny))
        local = np.column_stack(
            [(ix.ravel() + 0.5) * self.voxel_size, (iy.ravel() + 0.5) * self.voxel_size]
        )
        object.__setattr__(self, "local_centers", _frozen(local))
        object.__setattr__(self, "centers", _frozen(local + np.array([ox, oy])))

    @property
    def n_voxels(self) -> int:
        return self.nx * self.ny

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        ox, oy = self.origin
        return ox, oy, ox + self.nx * self.voxel_size, oy + self.ny * self.voxel_size

    @classmethod
    def covering(cls, xmin, ymin, xmax, ymax, voxel_size: float = 0.3) -> "VoxelGrid":
        """Smallest grid anchored at ``(xmin, ymin)`` that covers the box."""
        nx = int(np.ceil((xmax - xmin) / voxel_size - 1e-9))
        ny = int(np.ceil((ymax - ymin) / voxel_size - 1e-9))
        return cls((xmin, ymin), voxel_size, max(nx, 1), max(ny, 1))

    def translated(self, offset) -> "VoxelGrid":
        ox, oy = self.origin
        return VoxelGrid((ox + offset[0], oy + offset[1]), self.voxel_size, self.nx, self.ny)

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "voxel_size": self.voxel_size,
            "nx": self.nx,
            "ny": self.ny,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VoxelGrid":
        return cls(tuple(d["origin"]), float(d["voxel_size"]), int(d["nx"]), int(d["ny"]))


def enumerate_links(
    layout: SensorLayout, pairs: Iterable[Sequence[int]] | None = None
) -> LinkSet:
    """Build the link set of a layout.

    With ``pairs=None`` every ordered pair ``(i, j)``, ``i != j``, is returned in
    tx-major, rx-minor order of ``layout.node_ids``. Otherwise the explicit list of
    ``(tx, rx)`` node ids is validated against the layout and indexed in the order
    given.
    """
    ids = layout.node_ids
    if pairs is None:
        n = ids.size
        ti, ri = np.nonzero(~np.eye(n, dtype=bool))
        return LinkSet(ids[ti], ids[ri])
    pairs = [tuple(int(v) for v in p) for p in pairs]
    for tx, rx in pairs:
        layout.index_of(tx)
        layout.index_of(rx)
    return LinkSet([p[0] for p in pairs], [p[1] for p in pairs])


def link_endpoints(layout: SensorLayout, links: LinkSet) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(L, 2)`` arrays of transmitter and receiver coordinates."""
    ti = np.array([layout.index_of(n) for n in links.tx], dtype=np.int64)
    ri = np.array([layout.index_of(n) for n in links.rx], dtype=np.int64)
    return layout.positions[ti], layout.positions[ri]


def link_lengths(layout: SensorLayout, links: LinkSet) -> np.ndarray:
    a, b = link_endpoints(layout, links)
    d = np.hypot(*(a - b).T)
    if np.any(d <= 0):
        bad = int(np.flatnonzero(d <= 0)[0])
        raise GeometryError(
            f"link {bad} ({links.tx[bad]} -> {links.rx[bad]}) has coincident endpoints"
        )
    return d


def link_geometry(layout: SensorLayout, links: LinkSet, link: int):
    """Length and endpoints ``(tx_pos, rx_pos)`` of link index ``link``."""
    if not 0 <= link < len(links):
        raise GeometryError(f"link index {link} out of range")
    a = layout.position(links.tx[link])
    b = layout.position(links.rx[link])
    d = float(np.hypot(*(a - b)))
    if d <= 0:
        raise GeometryError(f"link {link} has coincident endpoints")
    return d, (a.copy(), b.copy())


def perimeter_layout(
    n_nodes: int, width: float, height: float, origin=(0.0, 0.0), first_id: int = 0
) -> SensorLayout:
    """Place nodes evenly along the perimeter of a rectangle, counter-clockwise
    from ``origin``."""
    perim = 2.0 * (width + height)
    s = np.arange(n_nodes) * perim / n_nodes
    pts = np.empty((n_nodes, 2))
    for i, si in enumerate(s):
        if si < width:
            pts[i] = (si, 0.0)
        elif si < width + height:
            pts[i] = (width, si - width)
        elif si < 2 * width + height:
            pts[i] = (width - (si - width - height), height)
        else:
            pts[i] = (0.0, height - (si - 2 * width - height))
    pts += np.asarray(origin, float)
    return SensorLayout(np.arange(first_id, first_id + n_nodes), pts)


def read_layout_csv(path: str | PathLike) -> SensorLayout:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or set(reader.fieldnames) < {"node_id", "x", "y"}:
            raise GeometryError(f"{path}: expected header node_id,x,y")
        rows = [(int(r["node_id"]), float(r["x"]), float(r["y"])) for r in reader]
    if not rows:
        raise GeometryError(f"{path}: no nodes")
    return SensorLayout([r[0] for r in rows], [(r[1], r[2]) for r in rows])


def write_layout_csv(layout: SensorLayout, path: str | PathLike) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node_id", "x", "y"])
        for n, (x, y) in zip(layout.node_ids.tolist(), layout.positions.tolist()):
            w.writerow([n, repr(x), repr(y)])
