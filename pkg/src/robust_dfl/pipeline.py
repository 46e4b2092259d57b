"""End-to-end localization/tracking runs and parameter sweeps.

A run goes trace -> windowed variance -> calibration statistics -> operator ->
per-frame image and argmax -> optional Kalman filter -> metrics, and writes
``estimates.csv``, ``errors.csv`` and ``metrics.json`` when given an output
directory.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from . import covariance as cov
from .estimators import (
    ProjectionOperator,
    SubVrtConfig,
    VrtiConfig,
    build_lsvrt,
    build_subvrt,
    build_vrti,
    estimate_images,
    fingerprint,
    localize_all,
)
from .forward_model import WeightMatrix, WeightModelParams, build_weight_matrix
from .geometry import LinkSet, SensorLayout, VoxelGrid, read_layout_csv, write_layout_csv
from .ingest import FrameSplit, RssTrace, parse_trace, split_calibration, windowed_variance, write_trace
from .metrics import ErrorSeries, error_percentile, localization_errors, rmse
from .simulator import GroundTruth, ScenarioConfig, save_scenario, simulate_rss
from .tracking import KalmanConfig, track_positions

SWEEP_PARAMETERS = ("k", "sigma_x2", "sigma_v2", "alpha")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage


@dataclass(frozen=True)
class PipelineParams:
    estimator: Literal["vrti", "subvrt", "lsvrt"] = "vrti"
    k: int = 4
    alpha: float = 100.0
    q_kind: str = "identity"
    sigma_x2: float = cov.DEFAULT_SIGMA_X2
    delta: float = cov.DEFAULT_DELTA
    sigma_w2: float = 2.0
    sigma_v2: float = 5.0
    window: int | None = None  # None: the dataset's window
    tracking: bool = False
    lambda_ell: float | None = None  # None: the dataset's ellipse parameter
    phi: float = 1.0

    def __post_init__(self):
        if self.estimator not in ("vrti", "subvrt", "lsvrt"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass(eq=False)
class Dataset:
    """Everything a run needs besides the estimator parameters."""

    layout: SensorLayout
    links: LinkSet
    grid: VoxelGrid
    trace: RssTrace
    truth: GroundTruth
    calibration_end: int
    window: int = 4
    lambda_ell: float = 0.1
    name: str = "dataset"
    _cache: dict = field(default_factory=dict, repr=False)

    @classmethod
    def from_scenario(cls, cfg: ScenarioConfig) -> "Dataset":
        sim = simulate_rss(cfg)
        return cls(
            cfg.layout, sim.trace.links, cfg.grid, sim.trace, sim.truth,
            sim.calibration_end, cfg.window, cfg.ellipse_lambda, cfg.name,
        )

    @classmethod
    def from_dir(cls, path: str | os.PathLike) -> "Dataset":
        """Load a directory written by :meth:`save`."""
        path = Path(path)
        meta = json.loads((path / "dataset.json").read_text())
        layout = read_layout_csv(path / "layout.csv")
        links = LinkSet([p[0] for p in meta["links"]], [p[1] for p in meta["links"]])
        trace = parse_trace(path / "trace.csv", links, meta.get("sample_interval", 1.0))
        return cls(
            layout, links, VoxelGrid.from_dict(meta["grid"]), trace,
            read_truth_csv(path / "truth.csv"), int(meta["calibration_end"]),
            int(meta.get("window", 4)), float(meta.get("lambda_ell", 0.1)),
            meta.get("name", path.name),
        )

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        path.mkdir(parents=True, exist_ok=True)
        write_layout_csv(self.layout, path / "layout.csv")
        write_trace(self.trace, path / "trace.csv")
        write_truth_csv(self.truth, path / "truth.csv")
        meta = {
            "name": self.name,
            "grid": self.grid.to_dict(),
            "calibration_end": self.calibration_end,
            "sample_interval": self.trace.sample_interval,
            "window": self.window,
            "lambda_ell": self.lambda_ell,
            "links": [list(p) for p in self.links.pairs()],
        }
        (path / "dataset.json").write_text(json.dumps(meta, indent=2) + "\n")

    # cached intermediate results; all are pure functions of the dataset

    def frames(self, window: int) -> FrameSplit:
        key = ("frames", window)
        if key not in self._cache:
            self._cache[key] = split_calibration(windowed_variance(self.trace, window), self.calibration_end)
        return self._cache[key]

    def weights(self, lambda_ell: float, phi: float) -> WeightMatrix:
        key = ("W", lambda_ell, phi)
        if key not in self._cache:
            self._cache[key] = build_weight_matrix(
                self.layout, self.links, self.grid, WeightModelParams(lambda_ell, phi)
            )
        return self._cache[key]

    def eigen(self, window: int) -> cov.EigenDecomposition:
        key = ("eig", window)
        if key not in self._cache:
            self._cache[key] = cov.eigen_networks(cov.sample_covariance(self.frames(window).calibration))
        return self._cache[key]

    def shrinkage(self, window: int) -> cov.ShrinkageCovariance:
        key = ("lw", window)
        if key not in self._cache:
            self._cache[key] = cov.ledoit_wolf(self.frames(window).calibration)
        return self._cache[key]

    def fingerprint(self) -> str:
        if "fp" not in self._cache:
            self._cache["fp"] = fingerprint(
                self.layout.node_ids, self.layout.positions, self.links.tx, self.links.rx,
                self.grid.to_dict(), self.trace.samples, self.truth.t, self.truth.positions,
                self.calibration_end,
            )
        return self._cache["fp"]


def write_truth_csv(truth: GroundTruth, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "x", "y"])
        for t, (x, y) in zip(truth.t.tolist(), truth.positions.tolist()):
            w.writerow([t, repr(x), repr(y)])


def read_truth_csv(path) -> GroundTruth:
    with open(path, newline="") as fh:
        rows = [(int(r["frame"]), float(r["x"]), float(r["y"])) for r in csv.DictReader(fh)]
    return GroundTruth(
        np.array([r[0] for r in rows], dtype=np.int64),
        np.array([(r[1], r[2]) for r in rows], dtype=float).reshape(-1, 2),
    )


def _stage(name):
    def wrap(fn):
        def inner(*a, **kw):
            try:
                return fn(*a, **kw)
            except PipelineError:
                raise
            except Exception as e:  # noqa: BLE001 - re-raised with stage name
                raise PipelineError(name, e) from e
        return inner
    return wrap


def effective(params: PipelineParams, data: Dataset) -> PipelineParams:
    return replace(
        params,
        window=params.window if params.window is not None else data.window,
        lambda_ell=params.lambda_ell if params.lambda_ell is not None else data.lambda_ell,
    )


@_stage("operator")
def build_operator(data: Dataset, params: PipelineParams) -> ProjectionOperator:
    p = effective(params, data)
    W = data.weights(p.lambda_ell, p.phi)
    vcfg = VrtiConfig(p.alpha, p.q_kind)
    if p.estimator == "vrti":
        op = build_vrti(W, vcfg, data.grid)
    elif p.estimator == "subvrt":
        op = build_subvrt(W, vcfg, data.eigen(p.window), SubVrtConfig(p.k), data.grid)
    else:
        op = build_lsvrt(W, data.shrinkage(p.window), cov.exp_spatial_cov(data.grid, p.sigma_x2, p.delta))
    op.provenance["fingerprint"] = operator_fingerprint(data, p)
    return op


def operator_fingerprint(data: Dataset, params: PipelineParams) -> str:
    p = effective(params, data)
    relevant = {"estimator": p.estimator, "window": p.window, "lambda_ell": p.lambda_ell, "phi": p.phi}
    if p.estimator in ("vrti", "subvrt"):
        relevant.update(alpha=p.alpha, q_kind=p.q_kind)
    if p.estimator == "subvrt":
        relevant["k"] = p.k
    if p.estimator == "lsvrt":
        relevant.update(sigma_x2=p.sigma_x2, delta=p.delta)
    cal = data.frames(p.window).calibration
    return fingerprint(
        data.layout.node_ids, data.layout.positions, data.links.tx, data.links.rx,
        data.grid.to_dict(), cal.t, cal.y, relevant,
    )


@dataclass(frozen=True, eq=False)
class PipelineResult:
    estimates: np.ndarray  # raw argmax positions
    tracked: np.ndarray | None
    errors: ErrorSeries  # of the final output (tracked when tracking is on)
    raw_errors: ErrorSeries
    metrics: dict
    operator: ProjectionOperator

    @property
    def positions(self) -> np.ndarray:
        return self.tracked if self.tracked is not None else self.estimates


def _fmt(x) -> str:
    return repr(float(x))


def run_pipeline(
    data: Dataset | ScenarioConfig,
    params: PipelineParams = PipelineParams(),
    out_dir: str | os.PathLike | None = None,
    emit_plot_data: bool = False,
) -> PipelineResult:
    if isinstance(data, ScenarioConfig):
        data = _stage("simulate")(Dataset.from_scenario)(data)
    p = effective(params, data)
    split = _stage("variance")(data.frames)(p.window)
    op = build_operator(data, p)

    @_stage("localize")
    def _localize():
        est = localize_all(estimate_images(op, split.realtime), data.grid)
        if est.shape[0] != len(data.truth) or not np.array_equal(split.realtime.t, data.truth.t):
            raise ValueError("real-time frames are not aligned with the ground truth")
        return est

    est = _localize()
    raw = localization_errors(est, data.truth, p.estimator, data.name)
    tracked = None
    errors = raw
    if p.tracking:
        tracked = _stage("track")(track_positions)(est, KalmanConfig(p.sigma_w2, p.sigma_v2))
        errors = localization_errors(tracked, data.truth, p.estimator, data.name)

    metrics = {
        "estimator": p.estimator,
        "scenario": data.name,
        "tracking": p.tracking,
        "frames": len(errors),
        "rmse": rmse(errors),
        "p97": error_percentile(errors, 0.97),
        "raw_rmse": rmse(raw),
        "raw_p97": error_percentile(raw, 0.97),
        "params": asdict(p),
        "config_fingerprint": fingerprint(data.fingerprint(), asdict(p)),
    }
    if p.estimator == "lsvrt":
        metrics["shrinkage_nu"] = op.provenance.get("nu")
    result = PipelineResult(est, tracked, errors, raw, metrics, op)
    if out_dir is not None:
        _stage("write")(write_outputs)(result, data, out_dir, emit_plot_data)
    return result


def write_outputs(result: PipelineResult, data: Dataset, out_dir, emit_plot_data: bool = False) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t = data.truth.t.tolist()
    with open(out / "estimates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "x", "y"])
        for ti, (x, y) in zip(t, result.positions.tolist()):
            w.writerow([ti, _fmt(x), _fmt(y)])
    with open(out / "errors.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["frame", "e_loc"])
        for ti, e in zip(t, result.errors.errors.tolist()):
            w.writerow([ti, _fmt(e)])
    (out / "metrics.json").write_text(json.dumps(result.metrics, indent=2, sort_keys=True) + "\n")
    if emit_plot_data:
        with open(out / "plot_data.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["series", "frame", "x", "y"])
            series = [("truth", data.truth.positions), ("estimate", result.estimates)]
            if result.tracked is not None:
                series.append(("tracked", result.tracked))
            for name, arr in series:
                for ti, (x, y) in zip(t, arr.tolist()):
                    w.writerow([name, ti, _fmt(x), _fmt(y)])


@dataclass(frozen=True)
class SweepResult:
    parameter: str
    values: tuple
    rmse: tuple
    metrics: tuple = ()

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["value", "rmse"])
            for v, r in zip(self.values, self.rmse):
                w.writerow([v if isinstance(v, int) else _fmt(v), _fmt(r)])


def sweep(
    data: Dataset | ScenarioConfig,
    params: PipelineParams,
    parameter: str,
    values: Sequence,
    out_dir: str | os.PathLike | None = None,
) -> SweepResult:
    """One full run per value with every other parameter held fixed.

    Sweeping ``sigma_v2`` turns tracking on, since it only affects the filter.
    """
    if parameter not in SWEEP_PARAMETERS:
        raise ValueError(f"cannot sweep {parameter!r}; choose from {SWEEP_PARAMETERS}")
    if isinstance(data, ScenarioConfig):
        data = Dataset.from_scenario(data)
    base = replace(params, tracking=True) if parameter == "sigma_v2" else params
    cast = int if parameter == "k" else float
    vals, rms, mets = [], [], []
    for v in values:
        res = run_pipeline(data, replace(base, **{parameter: cast(v)}))
        vals.append(cast(v))
        rms.append(res.metrics["rmse"])
        mets.append(res.metrics)
    result = SweepResult(parameter, tuple(vals), tuple(rms), tuple(mets))
    if out_dir is not None:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        result.write_csv(Path(out_dir) / "sweep.csv")
    return result


def save_simulation(cfg: ScenarioConfig, out_dir) -> Dataset:
    data = Dataset.from_scenario(cfg)
    data.save(out_dir)
    save_scenario(cfg, Path(out_dir) / "scenario.json")
    return data
