import numpy as np
import pytest

from dpkmeans.clustering import LloydConfig, lloyd
from dpkmeans.core import DiameterError, WeightedDataset, kmeans_cost, make_rng
from dpkmeans.datasets import CsvFormatError, gen_hard_instance, gen_synthetic, ingest_csv


def write(tmp_path, text):
    path = tmp_path / "data.csv"
    path.write_text(text)
    return path


def test_ingest_zeros(tmp_path):
    data = ingest_csv(write(tmp_path, "0,0\n0,0\n0,0\n"), 1.0)
    assert (data.n, data.d) == (3, 2)


def test_ingest_header_and_blank_lines(tmp_path):
    data = ingest_csv(write(tmp_path, "x,y\n\n1,2\n3,4\n"), 10.0, skip_header=True)
    assert np.array_equal(data.points, [[1, 2], [3, 4]])


def test_ingest_diameter_violation_names_pair(tmp_path):
    with pytest.raises(DiameterError) as info:
        ingest_csv(write(tmp_path, "0,0\n0,3\n"), 2.0)
    assert "0" in str(info.value) and "1" in str(info.value)


def test_ingest_bad_cell_reports_position(tmp_path):
    with pytest.raises(CsvFormatError, match="row 2, column 1"):
        ingest_csv(write(tmp_path, "0,0\nabc,1\n"), 5.0)


def test_ingest_ragged_and_empty(tmp_path):
    with pytest.raises(CsvFormatError, match="row 2"):
        ingest_csv(write(tmp_path, "0,0\n1\n"), 5.0)
    with pytest.raises(CsvFormatError):
        ingest_csv(write(tmp_path, "\n"), 5.0)


def test_synthetic_single_component_no_spread():
    data = gen_synthetic(50, 3, 1, 0.0, seed=2)
    assert np.all(data.points == data.points[0])


def test_synthetic_deterministic_and_bounded():
    a, b = gen_synthetic(300, 5, 4, 0.2, seed=9), gen_synthetic(300, 5, 4, 0.2, seed=9)
    assert np.array_equal(a.points, b.points)
    assert np.all(np.linalg.norm(a.points, axis=1) <= a.diameter_bound / 2 * (1 + 1e-12))
    with pytest.raises(ValueError):
        gen_synthetic(3, 2, 4)


def test_synthetic_sixteen_components_well_clustered():
    data = gen_synthetic(seed=0)
    w = WeightedDataset.unweighted(data.points)
    one = kmeans_cost(data, data.points.mean(axis=0, keepdims=True))
    sixteen = min(kmeans_cost(data, lloyd(w, LloydConfig(16), make_rng(s))) for s in range(3))
    assert sixteen <= 0.1 * one


def test_hard_instance_example():
    data = gen_hard_instance(2, 16, 5, seed=0)
    assert data.n == 10
    distinct = np.unique(data.points, axis=0)
    assert len(distinct) == 2
    assert kmeans_cost(data, distinct) == 0.0


@pytest.mark.parametrize("seed", range(5))
def test_hard_instance_cost_zero_and_lloyd_finds_it(seed):
    data = gen_hard_instance(4, 16, 3, seed=seed)
    words = np.unique(data.points, axis=0)
    assert len(words) == 4 and kmeans_cost(data, words) == 0.0
    # Hamming distance >= d/4 between the scaled codewords.
    ham = (np.sign(words)[:, None, :] != np.sign(words)[None, :, :]).sum(axis=2)
    assert ham[~np.eye(4, dtype=bool)].min() >= 4
    init = LloydConfig(4, seeding="provided", initial_centers=words)
    assert kmeans_cost(data, lloyd(WeightedDataset.unweighted(data.points), init, make_rng(0))) == 0.0
    best = min(kmeans_cost(data, lloyd(WeightedDataset.unweighted(data.points), LloydConfig(4), make_rng(s)))
               for s in range(5))
    assert best == 0.0


def test_hard_instance_retry_exhaustion():
    with pytest.raises(ValueError):
        gen_hard_instance(32, 2, 1)
