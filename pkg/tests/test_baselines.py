import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from core.errors import ConfigError, DimensionError
from baselines.felzenszwalb import felzenszwalb, segment_graph, Universe
from baselines.grid import predict_baseline, run_grid
from baselines.ncut import ncut_bipartition, ncut_value, recursive_ncut, ncut
from baselines.runner import BaselineConfig, run_baseline, fill_unlabeled, METHODS
from baselines.slic import slic
from tests.conftest import box, two_part_sample


def two_colour_image(size=16):
    image = np.zeros((size, size, 3))
    image[:, : size // 2] = (0.9, 0.1, 0.1)
    image[:, size // 2:] = (0.1, 0.1, 0.9)
    return image


# ---- felzenszwalb ----

def test_constant_colour_is_one_segment():
    image = np.full((16, 16, 3), 0.4)
    labels = felzenszwalb(image, np.ones((16, 16), dtype=bool))
    assert set(np.unique(labels)) == {0}


def test_two_colours_two_segments():
    labels = felzenszwalb(two_colour_image(), np.ones((16, 16), dtype=bool), k=1.0, sigma=0.0, min_size=1)
    assert (labels[:, :8] == 0).all()
    assert (labels[:, 8:] == 1).all()


def test_outside_mask_is_unlabeled():
    mask = box((16, 16), 4, 12, 4, 12)
    labels = felzenszwalb(two_colour_image(), mask, k=1.0, sigma=0.8, min_size=1)
    assert (labels[~mask] == -1).all()
    assert (labels[mask] >= 0).all()


def test_universe_tracks_sizes():
    u = Universe(4)
    root = u.join(u.find(0), u.find(1))
    assert u.size(root) == 2
    assert u.find(0) == u.find(1) != u.find(2)
    assert u.num == 3


def _reference_segmentation(n, edges, k):
    comps = [{i} for i in range(n)]
    internal = [0.0] * n
    where = list(range(n))
    for a, b, w in sorted(edges, key=lambda e: e[2]):
        ca, cb = where[a], where[b]
        if ca == cb:
            continue
        if w <= min(internal[ca] + k / len(comps[ca]), internal[cb] + k / len(comps[cb])):
            comps[ca] |= comps[cb]
            for v in comps[cb]:
                where[v] = ca
            comps[cb] = set()
            internal[ca] = w
    return {frozenset(c) for c in comps if c}


graph_edges = st.integers(2, 8).flatmap(lambda n: st.tuples(
    st.just(n),
    st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1), st.integers(0, 20)),
             min_size=1, max_size=16),
))


@given(graph_edges, st.sampled_from([0.5, 2.0, 10.0, 50.0]))
@settings(max_examples=200)
def test_segment_graph_matches_reference(graph, k):
    n, raw = graph
    edges = [(a, b, float(w)) for a, b, w in raw if a != b]
    # distinct weights keep the merge order unambiguous
    edges = [(a, b, w + i * 1e-3) for i, (a, b, w) in enumerate(edges)]
    u = segment_graph(n, edges if edges else np.zeros((0, 3)), k)
    got = {}
    for v in range(n):
        got.setdefault(u.find(v), set()).add(v)
    assert {frozenset(c) for c in got.values()} == _reference_segmentation(n, edges, k)


# ---- normalized cut ----

def planted_graph():
    w = np.full((6, 6), 0.01)
    w[:3, :3] = 1.0
    w[3:, 3:] = 1.0
    np.fill_diagonal(w, 0.0)
    return w


def test_bipartition_recovers_planted_split():
    w = planted_graph()
    part, value = ncut_bipartition(w)
    assert part.tolist() == [False, False, False, True, True, True]
    best = min(ncut_value(w, np.array(bits, dtype=bool))
               for bits in itertools.product([False, True], repeat=6) if any(bits) and not all(bits))
    assert value == pytest.approx(best)


def test_ncut_value_of_trivial_split_is_infinite():
    assert ncut_value(planted_graph(), np.zeros(6, dtype=bool)) == np.inf


def test_recursive_ncut_stops_at_requested_count():
    labels = recursive_ncut(planted_graph(), 2)
    assert len(set(labels)) == 2
    assert len(set(labels[:3])) == 1 and len(set(labels[3:])) == 1


def test_ncut_on_image_partitions_mask():
    mask = box((16, 16), 2, 14, 2, 14)
    labels = ncut(two_colour_image(), mask, n_cuts=2, sigma_color=0.5)
    assert (labels[~mask] == -1).all()
    assert len(np.unique(labels[mask])) == 2
    assert labels[5, 3] != labels[5, 12]


# ---- slic ----

def test_slic_uniform_image_gives_requested_equal_segments():
    image = np.full((40, 40, 3), 0.5)
    labels = slic(image, np.ones((40, 40), dtype=bool), n_segments=4)
    ids, areas = np.unique(labels, return_counts=True)
    assert len(ids) == 4
    # equal share is 400 px
    assert all(280 <= a <= 520 for a in areas), areas


def test_slic_respects_mask():
    mask = box((24, 24), 4, 20, 6, 18)
    labels = slic(two_colour_image(24), mask, n_segments=4)
    assert (labels[~mask] == -1).all()
    assert (labels[mask] >= 0).all()


# ---- dispatch ----

@pytest.mark.parametrize("method", METHODS)
def test_baseline_partitions_object_mask(method):
    s = two_part_sample()
    parts = run_baseline(s.image, s.object_mask, BaselineConfig(method=method))
    assert parts
    union = np.zeros(s.size, dtype=bool)
    for p in parts:
        assert not (union & p.mask).any()
        assert p.score == 1.0 and p.class_id == 1
        union |= p.mask
    assert np.array_equal(union, s.object_mask)


def test_empty_mask_gives_no_parts():
    s = two_part_sample()
    assert run_baseline(s.image, np.zeros(s.size, dtype=bool), BaselineConfig()) == []


def test_mask_size_mismatch():
    s = two_part_sample()
    with pytest.raises(DimensionError):
        run_baseline(s.image, np.ones((8, 8), dtype=bool), BaselineConfig())


def test_config_validation():
    with pytest.raises(ConfigError, match="unknown params"):
        BaselineConfig(method="slic", params={"k": 3}).validate()
    with pytest.raises(ConfigError):
        BaselineConfig(method="felzenszwalb", params={"k": -1}).validate()
    with pytest.raises(ConfigError):
        BaselineConfig(method="ncut", params={"max_side": 100}).validate()
    with pytest.raises(ConfigError):
        BaselineConfig(method="watershed").validate()
    BaselineConfig(method="felzenszwalb", params={"sigma": 0}).validate()
    cfg = BaselineConfig(method="slic", params={"n_segments": 6}, seed=2)
    assert BaselineConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.resolved() == {"n_segments": 6, "compactness": 10.0}


def test_fill_unlabeled():
    mask = np.ones((1, 4), dtype=bool)
    assert fill_unlabeled(np.array([[0, -1, -1, 1]]), mask).tolist() == [[0, 0, 1, 1]]
    assert fill_unlabeled(np.array([[-1, -1, -1, -1]]), mask).tolist() == [[0, 0, 0, 0]]


def test_predict_baseline_needs_object_mask():
    with pytest.raises(ConfigError):
        predict_baseline([two_part_sample()], BaselineConfig(), mask_mode="none")


def test_run_grid_picks_best():
    samples = [two_part_sample(sample_id=i) for i in range(2)]
    grid = [{"k": 1.0, "sigma": 0.0, "min_size": 1}, {"k": 1e6}]
    out = run_grid(samples, "felzenszwalb", masks=("perfect",), grid=grid)
    rows = out["perfect"]["rows"]
    assert len(rows) == 2
    assert out["perfect"]["best"]["params"] == grid[0]
    assert rows[0]["report"].ap == pytest.approx(1.0)
