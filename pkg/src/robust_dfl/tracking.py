"""Constant-velocity Kalman filter over per-frame position estimates."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# state [px, py, vx, vy]; one frame per step
G = np.array(
    [[1.0, 0.0, 1.0, 0.0], [0.0, 1.0, 0.0, 1.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
)
H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 1.0, 0.0, 0.0]])


@dataclass(frozen=True)
class KalmanConfig:
    sigma_w2: float = 2.0  # process noise on velocity
    sigma_v2: float = 5.0  # measurement noise on position

    def __post_init__(self):
        if self.sigma_w2 < 0 or not self.sigma_v2 > 0:
            raise ValueError("sigma_w2 must be >= 0 and sigma_v2 > 0")

    @property
    def process_cov(self) -> np.ndarray:
        return np.diag([0.0, 0.0, self.sigma_w2, self.sigma_w2])

    @property
    def measurement_cov(self) -> np.ndarray:
        return self.sigma_v2 * np.eye(2)


@dataclass(frozen=True, eq=False)
class TrackState:
    s: np.ndarray
    P_cov: np.ndarray
    skipped_update: bool = False

    @property
    def position(self) -> np.ndarray:
        return self.s[:2]

    @property
    def velocity(self) -> np.ndarray:
        return self.s[2:]


def kf_init(first_obs, cfg: KalmanConfig = KalmanConfig()) -> TrackState:
    """Start at the first observation with zero velocity."""
    z = np.asarray(first_obs, float).reshape(2)
    s = np.array([z[0], z[1], 0.0, 0.0])
    P = np.diag([cfg.sigma_v2, cfg.sigma_v2, cfg.sigma_w2, cfg.sigma_w2])
    return TrackState(s, P)


def kf_predict(state: TrackState, cfg: KalmanConfig) -> TrackState:
    s = G @ state.s
    P = G @ state.P_cov @ G.T + cfg.process_cov
    return TrackState(s, 0.5 * (P + P.T))


def kf_step(state: TrackState, obs, cfg: KalmanConfig = KalmanConfig()) -> TrackState:
    """Predict one frame ahead, then update with ``obs``.

    The covariance update uses the Joseph form. A non-finite observation skips
    the update and the returned state has ``skipped_update=True``.
    """
    pred = kf_predict(state, cfg)
    z = np.asarray(obs, float).reshape(2)
    if not np.all(np.isfinite(z)):
        return TrackState(pred.s, pred.P_cov, skipped_update=True)
    R = cfg.measurement_cov
    S = H @ pred.P_cov @ H.T + R
    K = np.linalg.solve(S, H @ pred.P_cov).T
    s = pred.s + K @ (z - H @ pred.s)
    IKH = np.eye(4) - K @ H
    P = IKH @ pred.P_cov @ IKH.T + K @ R @ K.T
    return TrackState(s, 0.5 * (P + P.T))


def track_relative(observations, cfg: KalmanConfig = KalmanConfig()) -> list[TrackState]:
    """Filter the offsets ``observations - observations[0]``.

    Gains and covariances do not depend on the data, so translating every
    observation leaves these states bit-identical whenever the offsets are.
    """
    obs = np.asarray(observations, float).reshape(-1, 2)
    if obs.shape[0] == 0:
        raise ValueError("no observations to track")
    rel = obs - obs[0]
    states = [kf_init(rel[0], cfg)]
    for z in rel[1:]:
        states.append(kf_step(states[-1], z, cfg))
    return states


def track_sequence(observations, cfg: KalmanConfig = KalmanConfig()) -> list[TrackState]:
    """Run the filter over a sequence; output is aligned 1:1 with the input."""
    obs = np.asarray(observations, float).reshape(-1, 2)
    rel = track_relative(obs, cfg)
    out = []
    for st in rel:
        s = st.s.copy()
        s[:2] += obs[0]
        out.append(TrackState(s, st.P_cov, st.skipped_update))
    return out


def track_positions(observations, cfg: KalmanConfig = KalmanConfig()) -> np.ndarray:
    return np.array([st.position for st in track_sequence(observations, cfg)])
