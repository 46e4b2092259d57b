import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from robust_dfl.covariance import EigenDecomposition
from robust_dfl.geometry import SensorLayout, enumerate_links
from robust_dfl.metrics import (
    ErrorSeries,
    eigen_network_report,
    error_percentile,
    localization_errors,
    rmse,
    write_eigen_network_csv,
    write_scree_csv,
)
from robust_dfl.simulator import GroundTruth


def test_localization_errors():
    e = localization_errors([(3.0, 4.0), (1.0, 1.0)], [(0.0, 0.0), (1.0, 1.0)])
    np.testing.assert_allclose(e.errors, [5.0, 0.0])
    gt = GroundTruth(np.array([10, 11]), np.zeros((2, 2)))
    assert localization_errors(np.ones((2, 2)), gt).t.tolist() == [10, 11]
    with pytest.raises(ValueError):
        localization_errors(np.zeros((3, 2)), np.zeros((2, 2)))


def test_rmse():
    assert rmse([3.0, 4.0]) == pytest.approx(np.sqrt(12.5), abs=1e-15)
    assert rmse(ErrorSeries(np.zeros(5))) == 0.0
    with pytest.raises(ValueError):
        rmse([])


def test_percentile():
    e = np.arange(101.0)
    assert error_percentile(e, 0.97) == pytest.approx(97.0)
    assert error_percentile([1.0, 2.0], 0.5) == pytest.approx(1.5)
    assert error_percentile([2.0, 7.0, 1.0], 1.0) == 7.0
    with pytest.raises(ValueError):
        error_percentile(e, 0.0)
    with pytest.raises(ValueError):
        error_percentile([], 0.5)


@settings(max_examples=100)
@given(arrays(np.float64, st.integers(1, 60), elements=st.floats(0, 100)), st.floats(0.01, 1.0))
def test_metric_oracles(e, q):
    assert abs(rmse(e) - np.sqrt(sum(v * v for v in e) / len(e))) <= 1e-12 * max(1.0, e.max())
    s = sorted(e)
    pos = q * (len(s) - 1)
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(s) - 1)
    ref = s[lo] + (pos - lo) * (s[hi] - s[lo])
    assert abs(error_percentile(e, q) - ref) <= 1e-12 * max(1.0, e.max())
    assert error_percentile(e, q) <= e.max()


def _eig(u1):
    L = len(u1)
    U = np.linalg.qr(np.column_stack([u1, np.eye(L)[:, : L - 1]]))[0]
    U[:, 0] = u1  # unnormalized so threshold arithmetic is exact
    return EigenDecomposition(U, np.arange(L, 0, -1.0))


@pytest.fixture
def tri():
    lay = SensorLayout([1, 2, 3], [(0, 0), (1, 0), (0, 1)])
    return lay, enumerate_links(lay)


def test_report_one_hot(tri):
    lay, links = tri
    u1 = np.zeros(6)
    u1[4] = 1.0
    rep = eigen_network_report(_eig(u1), links, lay)
    assert rep.link_index.tolist() == [4]
    assert (rep.tx[0], rep.rx[0]) == links.pairs()[4]
    np.testing.assert_array_equal(rep.endpoints[0], [lay.position(rep.tx[0]), lay.position(rep.rx[0])])


def test_report_threshold_and_sign(tri):
    lay, links = tri
    u1 = -np.array([1.0, 0.1, 0.5, 0.3, 0.31, 0.0])  # negative overall sign
    rep = eigen_network_report(_eig(u1), links, lay, 0.30)
    # the 30% cutoff is strict: the entry equal to 0.3 is excluded
    assert rep.link_index.tolist() == [0, 2, 4]
    assert np.all(np.diff(rep.weight) <= 0)
    top = eigen_network_report(_eig(u1), links, lay, 1.0)
    assert top.link_index.tolist() == [0]
    np.testing.assert_array_equal(rep.scree, np.arange(6, 0, -1.0))


def test_csv_writers(tmp_path, tri):
    lay, links = tri
    u1 = np.array([1.0, 0.1, 0.5, 0.3, 0.31, 0.0])
    rep = eigen_network_report(_eig(u1), links, lay)
    write_eigen_network_csv(rep, tmp_path / "e.csv")
    lines = (tmp_path / "e.csv").read_text().splitlines()
    assert lines[0] == "link_index,tx,rx,u1" and len(lines) == 4
    write_scree_csv([3.0, 1.0], tmp_path / "s.csv")
    assert (tmp_path / "s.csv").read_text() == "index,eigenvalue\n1,3.0\n2,1.0\n"


def test_documented_cases():
    e = [1.0, 2.0, 3.0, 4.0, 5.0]
    assert error_percentile(e, 1.0) == 5.0
    assert error_percentile(e, 0.5) == 3.0
    assert error_percentile([2.5] * 7, 0.13) == 2.5
    assert rmse([1.7] * 4) == pytest.approx(1.7, abs=1e-15)
    z = np.array([[1.0, 2.0], [3.0, -1.0]])
    np.testing.assert_array_equal(localization_errors(z, z).errors, 0.0)
    assert len(localization_errors([(0.0, 1.0)], [(0.0, 0.0)])) == 1
