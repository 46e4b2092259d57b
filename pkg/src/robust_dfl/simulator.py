"""Synthetic RSS traces: one person walking a waypoint circuit through a static
network, plus spatially clustered intrinsic-motion sources.

Each sample of link ``l`` is::

    rss = baseline + extrinsic + intrinsic + noise

* extrinsic: ``extrinsic_gain * g`` with ``g ~ N(0, 1)`` i.i.d., only while the
  person stands strictly inside the link's ellipse;
* intrinsic: ``amplitude * a_t`` summed over every source whose disc meets the
  link segment, where ``a_t`` is a unit-variance AR(1) process shared by all
  links that source touches;
* noise: ``N(0, measurement_noise_db**2)`` i.i.d.

Random streams
--------------
All randomness comes from numpy's PCG64 generator. Stream ``(channel, index)``
is seeded with ``SeedSequence(seed, spawn_key=(channel, index))``:
channel 0 is the measurement noise of link ``index``, channel 1 the extrinsic
fading of link ``index`` and channel 2 the innovations of source ``index``.
Every stream draws one value per sample (the source stream draws one extra for
the stationary start), so each is independent of geometry and of the others.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from os import PathLike

import numpy as np

from .forward_model import ellipse_mask
from .geometry import (
    LinkSet,
    SensorLayout,
    VoxelGrid,
    enumerate_links,
    link_endpoints,
    perimeter_layout,
)
from .ingest import DEFAULT_WINDOW, RssTrace

NOISE, FADING, SOURCE = 0, 1, 2
REFERENCE_VERSION = 1


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class PathConfig:
    waypoints: tuple[tuple[float, float], ...]
    speed: float = 0.5  # m/s
    sample_rate: float = 3.0  # Hz

    def __post_init__(self):
        wp = tuple((float(x), float(y)) for x, y in self.waypoints)
        object.__setattr__(self, "waypoints", wp)
        if len(wp) < 2:
            raise ScenarioError("a path needs at least 2 waypoints")
        if not self.speed > 0 or not self.sample_rate > 0:
            raise ScenarioError("speed and sample rate must be positive")


@dataclass(frozen=True)
class IntrinsicSource:
    center: tuple[float, float]
    radius: float
    amplitude: float  # dB
    correlation: float = 0.9  # AR(1) coefficient

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ScenarioError("source radius must be positive")
        if self.amplitude < 0:
            raise ScenarioError("source amplitude must be non-negative")
        if not 0.0 <= self.correlation < 1.0:
            raise ScenarioError("AR coefficient must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    layout: SensorLayout
    grid: VoxelGrid
    path: PathConfig
    calibration_duration: float = 60.0  # s
    walk_duration: float = 72.0  # s
    baseline_rss: float = -55.0  # dBm
    extrinsic_gain: float = 2.5  # dB
    intrinsic_sources: tuple[IntrinsicSource, ...] = ()
    measurement_noise_db: float = 1.0
    seed: int = 0
    ellipse_lambda: float = 0.1  # m
    window: int = DEFAULT_WINDOW
    links: tuple[tuple[int, int], ...] | None = None  # None: all ordered pairs
    name: str = "custom"

    def __post_init__(self):
        object.__setattr__(self, "intrinsic_sources", tuple(self.intrinsic_sources))
        if self.links is not None:
            object.__setattr__(self, "links", tuple(tuple(int(v) for v in p) for p in self.links))
        if self.calibration_duration < 0 or self.walk_duration < 0:
            raise ScenarioError("durations must be non-negative")
        if self.measurement_noise_db < 0 or self.extrinsic_gain < 0:
            raise ScenarioError("noise level and extrinsic gain must be non-negative")
        if not self.ellipse_lambda > 0:
            raise ScenarioError("ellipse_lambda must be positive")
        if not 0 <= self.seed < 2**64:
            raise ScenarioError("seed must be a 64-bit unsigned integer")

    @property
    def link_set(self) -> LinkSet:
        return enumerate_links(self.layout, self.links)

    @property
    def n_calibration_samples(self) -> int:
        return int(round(self.calibration_duration * self.path.sample_rate))

    @property
    def n_walk_samples(self) -> int:
        return int(round(self.walk_duration * self.path.sample_rate))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "layout": {
                "node_ids": self.layout.node_ids.tolist(),
                "positions": self.layout.positions.tolist(),
            },
            "grid": self.grid.to_dict(),
            "path": {
                "waypoints": [list(w) for w in self.path.waypoints],
                "speed": self.path.speed,
                "sample_rate": self.path.sample_rate,
            },
            "calibration_duration": self.calibration_duration,
            "walk_duration": self.walk_duration,
            "baseline_rss": self.baseline_rss,
            "extrinsic_gain": self.extrinsic_gain,
            "intrinsic_sources": [
                {**asdict(s), "center": list(s.center)} for s in self.intrinsic_sources
            ],
            "measurement_noise_db": self.measurement_noise_db,
            "seed": self.seed,
            "ellipse_lambda": self.ellipse_lambda,
            "window": self.window,
            "links": None if self.links is None else [list(p) for p in self.links],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        lay = d.pop("layout")
        if "positions" in lay:
            layout = SensorLayout(lay["node_ids"], lay["positions"])
        else:
            layout = perimeter_layout(int(lay["n_nodes"]), float(lay["width"]), float(lay["height"]))
        grid = VoxelGrid.from_dict(d.pop("grid"))
        p = d.pop("path")
        path = PathConfig(tuple(map(tuple, p["waypoints"])), float(p["speed"]), float(p["sample_rate"]))
        sources = tuple(
            IntrinsicSource(tuple(s["center"]), s["radius"], s["amplitude"], s.get("correlation", 0.9))
            for s in d.pop("intrinsic_sources", [])
        )
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ScenarioError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(layout=layout, grid=grid, path=path, intrinsic_sources=sources, **d)


def load_scenario(path: str | PathLike) -> ScenarioConfig:
    with open(path) as fh:
        return ScenarioConfig.from_dict(json.load(fh))


def save_scenario(cfg: ScenarioConfig, path: str | PathLike) -> None:
    with open(path, "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
        fh.write("\n")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    """Person position at each real-time frame (sample index ``t``)."""

    t: np.ndarray
    positions: np.ndarray

    def __len__(self) -> int:
        return int(self.t.size)


def _circuit(waypoints) -> tuple[np.ndarray, np.ndarray]:
    pts = np.asarray(waypoints, float)
    if not np.array_equal(pts[0], pts[-1]):
        pts = np.vstack([pts, pts[:1]])
    seg = np.hypot(*np.diff(pts, axis=0).T)
    return pts, np.concatenate([[0.0], np.cumsum(seg)])


def path_positions(path: PathConfig, n_samples: int) -> np.ndarray:
    """Positions at times ``0, 1/rate, ...`` walking the closed waypoint circuit
    at constant speed."""
    pts, cum = _circuit(path.waypoints)
    total = cum[-1]
    if total <= 0:
        raise ScenarioError("path has zero length")
    s = np.mod(np.arange(n_samples) * (path.speed / path.sample_rate), total)
    x = np.interp(s, cum, pts[:, 0])
    y = np.interp(s, cum, pts[:, 1])
    return np.column_stack([x, y])


def generate_path(cfg: ScenarioConfig) -> GroundTruth:
    T0 = cfg.n_calibration_samples
    n = cfg.n_walk_samples
    return GroundTruth(np.arange(T0, T0 + n), path_positions(cfg.path, n))


def segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from one point to each segment ``a[l] -> b[l]``."""
    p = np.asarray(points, float).reshape(2)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    u = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    closest = a + u[:, None] * ab
    return np.hypot(*(p - closest).T)


def source_links(cfg: ScenarioConfig, links: LinkSet | None = None) -> list[np.ndarray]:
    """For each intrinsic source, the indices of links whose segment meets its disc."""
    links = cfg.link_set if links is None else links
    a, b = link_endpoints(cfg.layout, links)
    return [
        np.flatnonzero(segment_distance(src.center, a, b) <= src.radius)
        for src in cfg.intrinsic_sources
    ]


def _stream(seed: int, channel: int, index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(channel, index)))
    )


def ar1(rng: np.random.Generator, n: int, rho: float) -> np.ndarray:
    """Unit-variance stationary AR(1): ``a_t = rho a_{t-1} + sqrt(1 - rho^2) e_t``."""
    e = rng.standard_normal(n + 1)
    a = np.empty(n)
    prev = e[0]
    c = np.sqrt(1.0 - rho * rho)
    for t in range(n):
        prev = rho * prev + c * e[t + 1]
        a[t] = prev
    return a


@dataclass(frozen=True, eq=False)
class Simulation:
    trace: RssTrace
    truth: GroundTruth
    calibration_end: int
    source_links: list

    def __iter__(self):
        # unpacks as (trace, truth, calibration_end)
        return iter((self.trace, self.truth, self.calibration_end))


def simulate_rss(cfg: ScenarioConfig) -> Simulation:
    """Generate the trace, ground truth and calibration end index for a scenario.

    The person is absent for the first ``n_calibration_samples`` samples; the
    calibration end index is the last of those.
    """
    links = cfg.link_set
    L = len(links)
    T0 = cfg.n_calibration_samples
    truth = generate_path(cfg)
    T = T0 + len(truth)
    if T0 < 1:
        raise ScenarioError("calibration period is empty")

    rss = np.full((L, T), float(cfg.baseline_rss))
    a, b = link_endpoints(cfg.layout, links)

    if len(truth) and cfg.extrinsic_gain > 0:
        inside = ellipse_mask(a, b, truth.positions, cfg.ellipse_lambda)  # (L, n_walk)
        for li in range(L):
            g = _stream(cfg.seed, FADING, li).standard_normal(T)
            rss[li, T0:] += cfg.extrinsic_gain * np.where(inside[li], g[T0:], 0.0)

    touched = source_links(cfg, links)
    for si, (src, idx) in enumerate(zip(cfg.intrinsic_sources, touched)):
        sig = src.amplitude * ar1(_stream(cfg.seed, SOURCE, si), T, src.correlation)
        rss[idx] += sig

    if cfg.measurement_noise_db > 0:
        for li in range(L):
            rss[li] += cfg.measurement_noise_db * _stream(cfg.seed, NOISE, li).standard_normal(T)

    trace = RssTrace(links, rss, 1.0 / cfg.path.sample_rate)
    return Simulation(trace, truth, T0 - 1, touched)


def _reference_base(name: str, sources, seed: int) -> ScenarioConfig:
    side = 6.0
    layout = perimeter_layout(34, side, side)
    grid = VoxelGrid((0.0, 0.0), 0.3, 20, 20)
    path = PathConfig(((1.5, 1.5), (4.5, 1.5), (4.5, 4.5), (1.5, 4.5)), speed=0.5, sample_rate=3.0)
    return ScenarioConfig(
        layout=layout,
        grid=grid,
        path=path,
        calibration_duration=60.0,
        walk_duration=72.0,
        extrinsic_gain=2.5,
        intrinsic_sources=sources,
        measurement_noise_db=1.0,
        seed=seed,
        window=4,
        name=name,
    )


def reference_scenario(name: str) -> ScenarioConfig:
    """Pinned scenarios: ``calm`` (no intrinsic motion) and ``windy`` (one
    strong gusting source just outside a corner of the network)."""
    if name == "calm":
        return _reference_base("calm", (), seed=20090301)
    if name == "windy":
        src = IntrinsicSource(center=(6.3, -0.3), radius=1.0, amplitude=3.0, correlation=0.9)
        return _reference_base("windy", (src,), seed=20100501)
    raise ScenarioError(f"unknown reference scenario {name!r}; expected 'calm' or 'windy'")
