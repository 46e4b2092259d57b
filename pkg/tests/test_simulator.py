import dataclasses

import numpy as np
import pytest

from robust_dfl.covariance import eigen_networks, sample_covariance
from robust_dfl.geometry import SensorLayout, VoxelGrid, link_endpoints
from robust_dfl.ingest import windowed_variance
from robust_dfl.metrics import eigen_network_report
from robust_dfl.simulator import (
    IntrinsicSource,
    PathConfig,
    ScenarioConfig,
    ScenarioError,
    generate_path,
    load_scenario,
    path_positions,
    reference_scenario,
    save_scenario,
    simulate_rss,
    source_links,
)

SQUARE = PathConfig(((0, 0), (2, 0), (2, 2), (0, 2)), speed=0.5, sample_rate=2.0)


def four_nodes(**kw):
    lay = SensorLayout([0, 1, 2, 3], [(0, 0), (10, 0), (0, 10), (10, 10)])
    # links 3 and 7 are the two directions of the bottom edge
    links = ((0, 2), (0, 3), (2, 0), (0, 1), (3, 0), (2, 3), (3, 2), (1, 0))
    base = dict(
        layout=lay,
        grid=VoxelGrid((0, 0), 1.0, 10, 10),
        path=PathConfig(((2, 2), (8, 2)), 1.0, 1.0),
        links=links,
        walk_duration=0.0,
    )
    base.update(kw)
    return ScenarioConfig(**base)


def test_linear_interpolation():
    pos = path_positions(PathConfig(((0, 0), (10, 0)), 1.0, 1.0), 5)
    np.testing.assert_allclose(pos[3], (3.0, 0.0))


def test_square_returns_to_start():
    perimeter = 8.0
    n = int(perimeter / SQUARE.speed * SQUARE.sample_rate)
    pos = path_positions(SQUARE, n + 1)
    np.testing.assert_allclose(pos[n], pos[0], atol=1e-12)
    assert not np.allclose(pos[n // 2], pos[0])


def test_positions_on_path():
    pos = path_positions(SQUARE, 200)
    on_edge = (
        np.isclose(pos[:, 0], 0) | np.isclose(pos[:, 0], 2) | np.isclose(pos[:, 1], 0) | np.isclose(pos[:, 1], 2)
    )
    assert on_edge.all()
    step = np.hypot(*np.diff(pos, axis=0).T)
    assert step.max() <= SQUARE.speed / SQUARE.sample_rate + 1e-12


def test_coincident_waypoints():
    with pytest.raises(ScenarioError):
        path_positions(PathConfig(((1, 1), (1, 1)), 1.0, 1.0), 3)


@pytest.mark.parametrize(
    "kw",
    [dict(speed=0.0), dict(sample_rate=-1.0), dict(waypoints=((0, 0),))],
)
def test_path_validation(kw):
    args = dict(waypoints=((0, 0), (1, 0)), speed=1.0, sample_rate=1.0)
    args.update(kw)
    with pytest.raises(ScenarioError):
        PathConfig(**args)


@pytest.mark.parametrize(
    "kw", [dict(radius=0.0), dict(amplitude=-1.0), dict(correlation=1.0), dict(correlation=-0.1)]
)
def test_source_validation(kw):
    args = dict(center=(0, 0), radius=1.0, amplitude=1.0, correlation=0.5)
    args.update(kw)
    with pytest.raises(ScenarioError):
        IntrinsicSource(**args)


def test_noise_free_constant_trace():
    cfg = four_nodes(measurement_noise_db=0.0, calibration_duration=50.0)
    sim = simulate_rss(cfg)
    assert np.all(sim.trace.samples == cfg.baseline_rss)
    np.testing.assert_array_equal(windowed_variance(sim.trace).y, 0.0)


def test_source_touches_exact_links():
    src = IntrinsicSource((5.0, -0.5), 1.0, 2.0, correlation=0.0)
    cfg = four_nodes(intrinsic_sources=(src,))
    assert source_links(cfg)[0].tolist() == [3, 7]


def test_source_variance_monte_carlo():
    A, noise = 2.0, 0.5
    src = IntrinsicSource((5.0, -0.5), 1.0, A, correlation=0.0)
    cfg = four_nodes(intrinsic_sources=(src,), measurement_noise_db=noise, calibration_duration=2400.0, seed=7)
    trace, truth, cal_end = simulate_rss(cfg)
    m = 4
    v = windowed_variance(trace, m).y[: cal_end - m + 2]
    assert v.shape[0] >= 500
    # non-overlapping windows give independent variance estimates for the standard error
    blocks = trace.samples[:, : cal_end + 1]
    nb = blocks.shape[1] // m
    indep = blocks[:, : nb * m].reshape(len(cfg.link_set), nb, m).var(axis=2, ddof=1)
    for li in range(len(cfg.link_set)):
        expect = A * A + noise * noise if li in (3, 7) else noise * noise
        se = indep[li].std(ddof=1) / np.sqrt(nb)
        assert abs(v[:, li].mean() - expect) <= 3 * se, li


def test_links_touched_by_source_share_signal():
    src = IntrinsicSource((5.0, -0.5), 1.0, 3.0, correlation=0.9)
    sim = simulate_rss(four_nodes(intrinsic_sources=(src,), measurement_noise_db=0.0, calibration_duration=30.0))
    s = sim.trace.samples
    np.testing.assert_array_equal(s[3], s[7])
    assert s[3].std() > 0
    np.testing.assert_array_equal(s[0], -55.0)


def test_determinism():
    cfg = reference_scenario("windy")
    a = simulate_rss(cfg)
    b = simulate_rss(reference_scenario("windy"))
    assert np.array_equal(a.trace.samples, b.trace.samples)
    assert np.array_equal(a.truth.positions, b.truth.positions)
    c = simulate_rss(dataclasses.replace(cfg, seed=cfg.seed + 1))
    assert not np.array_equal(a.trace.samples, c.trace.samples)


def test_calibration_segment_has_no_person():
    cfg = reference_scenario("calm")
    sim = simulate_rss(cfg)
    assert sim.calibration_end == cfg.n_calibration_samples - 1
    assert sim.truth.t[0] == sim.calibration_end + 1
    assert len(sim.truth) == cfg.n_walk_samples
    assert sim.trace.n_samples == cfg.n_calibration_samples + cfg.n_walk_samples


def test_reference_definitions():
    calm, windy = reference_scenario("calm"), reference_scenario("windy")
    assert calm.intrinsic_sources == ()
    assert len(windy.intrinsic_sources) == 1
    src = windy.intrinsic_sources[0]
    assert src.amplitude == 3.0 and src.correlation == 0.9
    for cfg in (calm, windy):
        assert cfg.layout.n_nodes == 34
        assert cfg.window == 4
        assert cfg.calibration_duration == 60.0
    with pytest.raises(ScenarioError):
        reference_scenario("stormy")


def test_windy_source_touch_count_bruteforce():
    cfg = reference_scenario("windy")
    src = cfg.intrinsic_sources[0]
    a, b = link_endpoints(cfg.layout, cfg.link_set)
    u = np.linspace(0.0, 1.0, 20001)
    touched = []
    for l in range(len(a)):
        pts = a[l] + u[:, None] * (b[l] - a[l])
        if np.hypot(*(pts - src.center).T).min() <= src.radius + 1e-3:
            touched.append(l)
    got = source_links(cfg)[0].tolist()
    assert got == touched
    assert len(got) >= 10


def test_calm_calibration_variance_matches_noise(calm):
    split = calm.frames(4)
    v = split.calibration.y  # (M, L) frame variances
    sigma2 = 1.0
    # per-link variance of the raw calibration samples; s^2 of n Gaussians has SE sigma^2 sqrt(2/(n-1))
    x = calm.trace.samples[:, : calm.calibration_end + 1]
    n = x.shape[1]
    s2 = x.var(axis=1, ddof=1)
    se = sigma2 * np.sqrt(2.0 / (n - 1))
    assert abs(s2.mean() - sigma2) <= 3 * se / np.sqrt(s2.size)
    # a 3-sigma band misses 0.27% of links by chance; allow up to 1%
    assert np.mean(np.abs(s2 - sigma2) > 3 * se) <= 0.01
    assert abs(v.mean() - sigma2) <= 0.02


def test_windy_eigen_network_clusters_on_source(windy):
    eig = windy.eigen(4)
    rep = eigen_network_report(eig, windy.links, windy.layout, 0.30)
    src_links = set(source_links(reference_scenario("windy"))[0].tolist())
    frac = np.mean([l in src_links for l in rep.link_index.tolist()])
    assert len(rep) > 0 and frac >= 0.8


def test_json_round_trip(tmp_path):
    cfg = reference_scenario("windy")
    save_scenario(cfg, tmp_path / "s.json")
    back = load_scenario(tmp_path / "s.json")
    assert back.to_dict() == cfg.to_dict()
    np.testing.assert_array_equal(simulate_rss(back).trace.samples, simulate_rss(cfg).trace.samples)


def test_unknown_json_field():
    d = reference_scenario("calm").to_dict()
    d["humidity"] = 0.5
    with pytest.raises(ScenarioError):
        ScenarioConfig.from_dict(d)


def test_ground_truth_on_path():
    cfg = reference_scenario("calm")
    gt = generate_path(cfg)
    x, y = gt.positions.T
    on_edge = np.isclose(x, 1.5) | np.isclose(x, 4.5) | np.isclose(y, 1.5) | np.isclose(y, 4.5)
    assert on_edge.all()
    assert ((x >= 1.5 - 1e-12) & (x <= 4.5 + 1e-12) & (y >= 1.5 - 1e-12) & (y <= 4.5 + 1e-12)).all()
