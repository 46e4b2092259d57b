"""Variance-based device-free localization with robust estimators.

Three linear reconstruction operators turn a vector of windowed link RSS
variances into a motion image over a voxel grid:

* VRTI, Tikhonov-regularized inversion of the elliptical link model;
* SubVRT, VRTI after projecting out the top eigen-networks of the calibration
  covariance;
* LSVRT, a regularized least-squares estimate weighted by a Ledoit-Wolf
  shrinkage covariance with an exponential spatial prior.

The argmax voxel of each image is the position estimate; a constant-velocity
Kalman filter smooths the estimates over time.
"""
from .covariance import (
    EigenDecomposition,
    SampleCovariance,
    ShrinkageCovariance,
    SpatialCovariance,
    eigen_networks,
    exp_spatial_cov,
    ledoit_wolf,
    sample_covariance,
)
from .estimators import (
    MotionImage,
    ProjectionOperator,
    SubVrtConfig,
    VrtiConfig,
    build_lsvrt,
    build_subvrt,
    build_vrti,
    estimate_image,
    estimate_images,
    localize,
    localize_all,
    project_extrinsic,
    verify_estimator_connection,
)
from .forward_model import WeightMatrix, WeightModelParams, build_weight_matrix, coverage_report
from .geometry import LinkSet, SensorLayout, VoxelGrid, enumerate_links, link_geometry, perimeter_layout
from .ingest import RssTrace, VarianceFrame, VarianceFrames, parse_trace, split_calibration, windowed_variance
from .metrics import ErrorSeries, eigen_network_report, error_percentile, localization_errors, rmse
from .pipeline import Dataset, PipelineParams, run_pipeline, sweep
from .simulator import ScenarioConfig, generate_path, reference_scenario, simulate_rss
from .tracking import KalmanConfig, TrackState, kf_init, kf_step, track_sequence

__version__ = "0.1.0"
