import numpy as np
import pytest

from specdemux.core import Measurement, SensitivityMatrix, WavelengthGrid
from specdemux.errors import DataFormatError, DimensionError, UsageError
from specdemux.forest import (
    ForestConfig,
    ForestModel,
    allocate_trees,
    best_split,
    forest_predict,
    forest_predict_batch,
    forest_train,
    tree_fit,
)
from specdemux.specgen import SpectraGenConfig, build_dataset, generate_spectra_array

from . import oracles

MEMORIZE = dict(max_depth=None, min_leaf_samples=1, bootstrap=False)


def node_samples(tree, X):
    """Map each node to the indices of the rows of X routed through it."""
    members = {0: np.arange(len(X))}
    for node in range(tree.node_count):
        idx = members.get(node)
        if idx is None or tree.feature[node] < 0:
            continue
        go_left = X[idx, tree.feature[node]] <= tree.threshold[node]
        members[int(tree.left[node])] = idx[go_left]
        members[int(tree.right[node])] = idx[~go_left]
    return members


def check_splits_against_oracle(tree, X, y, min_leaf):
    checked = 0
    for node, idx in node_samples(tree, X).items():
        if tree.feature[node] < 0:
            continue
        Xn, yn = X[idx].tolist(), y[idx].tolist()
        best = oracles.best_exhaustive_split(Xn, yn, min_leaf)
        chosen = [c for c in oracles.exhaustive_splits(Xn, yn, min_leaf)
                  if c[1] == tree.feature[node] and c[2] == tree.threshold[node]]
        assert chosen, f"node {node}: chosen split is not an admissible candidate"
        assert chosen[0][0] == pytest.approx(best[0], rel=1e-9, abs=1e-15)
        checked += 1
    return checked


@pytest.fixture(scope="module")
def small_data():
    g = WavelengthGrid(410, 30, 11)
    r = np.random.default_rng(4)
    sens = SensitivityMatrix(g, r.uniform(0.05, 1.0, size=(3, 11)))
    spectra = generate_spectra_array(SpectraGenConfig(seed=11, count=150), g)
    return build_dataset(spectra, sens)


class TestTreeFit:
    def test_constant_target_single_leaf(self):
        X = np.random.default_rng(0).uniform(size=(20, 3))
        tree = tree_fit(X, np.full(20, 0.37), ForestConfig(bootstrap=False))
        assert tree.node_count == 1
        assert tree.value[0] == 0.37
        np.testing.assert_array_equal(tree.predict(X), 0.37)

    def test_two_samples_exact_fit(self):
        X = np.array([[0.1, 0.5, 0.2], [0.3, 0.4, 0.9]])
        y = np.array([0.2, 0.8])
        tree = tree_fit(X, y, ForestConfig(min_leaf_samples=1, bootstrap=False))
        assert tree.node_count == 3 and tree.leaf_count == 2
        np.testing.assert_array_equal(tree.predict(X), y)

    def test_accepts_measurements(self):
        ms = [Measurement([0.0, 1.0]), Measurement([1.0, 0.0])]
        tree = tree_fit(ms, [0.0, 1.0], ForestConfig(min_leaf_samples=1, bootstrap=False))
        np.testing.assert_array_equal(tree.predict(ms), [0.0, 1.0])

    def test_root_split_matches_exhaustive_oracle(self):
        r = np.random.default_rng(200)
        X = r.uniform(size=(200, 3))
        y = np.sin(4 * X[:, 0]) + X[:, 1] ** 2 + 0.1 * r.normal(size=200)
        f, t, imp = best_split(X, y)
        want = oracles.best_exhaustive_split(X.tolist(), y.tolist())
        assert (f, t) == (want[1], want[2])
        assert imp == pytest.approx(want[0], rel=1e-12)
        tree = tree_fit(X, y, ForestConfig(bootstrap=False, max_depth=3, min_leaf_samples=1))
        assert (tree.feature[0], tree.threshold[0]) == (f, t)

    @pytest.mark.parametrize("min_leaf", [1, 3, 10])
    def test_every_split_optimal(self, min_leaf):
        r = np.random.default_rng(min_leaf)
        X = r.uniform(size=(120, 3))
        X[:, 2] = np.round(X[:, 2], 1)  # duplicated values exercise tie handling
        y = X[:, 0] * X[:, 1] + np.cos(3 * X[:, 2])
        tree = tree_fit(X, y, ForestConfig(bootstrap=False, max_depth=6, min_leaf_samples=min_leaf))
        assert check_splits_against_oracle(tree, X, y, min_leaf) > 3

    def test_tie_prefers_lowest_channel(self):
        X = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 0.0], [1.0, 1.0]])
        y = np.array([0.0, 1.0, 0.0, 1.0])
        f, t, imp = best_split(X, y)
        assert (f, t, imp) == (0, 0.5, 0.0)

    def test_min_leaf_respected(self):
        r = np.random.default_rng(9)
        X = r.uniform(size=(80, 3))
        y = r.uniform(size=80)
        tree = tree_fit(X, y, ForestConfig(bootstrap=False, max_depth=None, min_leaf_samples=7))
        leaves = [idx for node, idx in node_samples(tree, X).items() if tree.feature[node] < 0]
        assert min(len(i) for i in leaves) >= 7

    def test_depth_limit(self):
        r = np.random.default_rng(1)
        X = r.uniform(size=(300, 3))
        tree = tree_fit(X, r.uniform(size=300), ForestConfig(bootstrap=False, max_depth=4, min_leaf_samples=1))
        assert tree.depth == 4

    def test_bootstrap_uses_rng(self):
        r = np.random.default_rng(1)
        X = r.uniform(size=(100, 3))
        y = r.uniform(size=100)
        cfg = ForestConfig(max_depth=5)
        a = tree_fit(X, y, cfg, np.random.default_rng(5))
        b = tree_fit(X, y, cfg, np.random.default_rng(5))
        c = tree_fit(X, y, cfg, np.random.default_rng(6))
        assert a.threshold.tobytes() == b.threshold.tobytes()
        assert a.threshold.tobytes() != c.threshold.tobytes()


class TestConfig:
    def test_allocation_paper_scale(self):
        alloc = allocate_trees(8000, 61)
        assert sum(alloc) == 8000
        assert set(alloc) == {131, 132}
        assert alloc[:9] == [132] * 9

    @pytest.mark.parametrize("kw", [{"total_trees": 0}, {"max_depth": 0}, {"min_leaf_samples": 0}])
    def test_invalid(self, kw):
        with pytest.raises(UsageError):
            ForestConfig(**kw)

    def test_too_few_trees(self, small_data):
        with pytest.raises(UsageError):
            forest_train(small_data, ForestConfig(total_trees=10))


class TestForest:
    def test_one_stump_per_wavelength(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=11, max_depth=1, seed=1))
        assert model.tree_count == 11
        np.testing.assert_array_equal(model.trees_per_wavelength(), 1)
        assert all(model.tree(t).node_count <= 3 for t in range(11))
        assert model.tree_depths().max() == 1

    def test_deterministic_bytes(self, small_data):
        cfg = ForestConfig(total_trees=33, max_depth=6, seed=7)
        assert forest_train(small_data, cfg).to_bytes() == forest_train(small_data, cfg).to_bytes()
        assert forest_train(small_data, cfg).to_bytes() != forest_train(small_data, ForestConfig(
            total_trees=33, max_depth=6, seed=8)).to_bytes()

    def test_parallel_equals_sequential(self, small_data):
        cfg = ForestConfig(total_trees=44, max_depth=8, seed=3)
        assert forest_train(small_data, cfg, n_jobs=1).to_bytes() == forest_train(small_data, cfg, n_jobs=4).to_bytes()

    def test_memorization(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=22, seed=0, **MEMORIZE))
        pred = forest_predict_batch(model, small_data.measurements)
        np.testing.assert_array_equal(pred, small_data.spectra)
        one = forest_predict(model, Measurement(small_data.measurements[5]))
        np.testing.assert_array_equal(one.values, small_data.spectra[5])

    def test_constant_leaves(self):
        g = WavelengthGrid(400, 10, 4)
        sens = SensitivityMatrix(g, np.ones((2, 4)))
        data = build_dataset(np.full((10, 4), 0.25), sens)
        model = forest_train(data, ForestConfig(total_trees=8, seed=1))
        np.testing.assert_array_equal(forest_predict(model, Measurement([3.0, -1.0])).values, 0.25)

    def test_bounded_by_training_range(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=55, max_depth=8, seed=2))
        r = np.random.default_rng(0)
        lo, hi = small_data.measurements.min(0), small_data.measurements.max(0)
        probes = r.uniform(lo - 0.5 * (hi - lo), hi + 0.5 * (hi - lo), size=(2000, 3))
        pred = forest_predict_batch(model, probes)
        assert np.all(pred >= small_data.spectra.min(0)) and np.all(pred <= small_data.spectra.max(0))

    def test_monotone_training_error_in_depth(self, small_data):
        mses = []
        for depth in range(1, 12):
            model = forest_train(small_data, ForestConfig(total_trees=11, max_depth=depth, min_leaf_samples=1,
                                                          bootstrap=False))
            mses.append(np.mean((forest_predict_batch(model, small_data.measurements) - small_data.spectra) ** 2))
        assert all(b <= a for a, b in zip(mses, mses[1:]))

    def test_two_tree_average(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=22, max_depth=5, seed=4))
        X = small_data.measurements[:50]
        pred = forest_predict_batch(model, X)
        for k, trees in enumerate(model.per_wavelength_ensembles):
            assert len(trees) == 2
            mean = 0.5 * (trees[0].predict(X) + trees[1].predict(X))
            np.testing.assert_allclose(pred[:, k], mean, rtol=0, atol=1e-15)

    def test_forest_splits_optimal(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=11, max_depth=5, min_leaf_samples=2,
                                                      bootstrap=False))
        X = small_data.measurements
        for k in range(0, 11, 5):
            check_splits_against_oracle(model.tree(k), X, small_data.spectra[:, k], 2)

    def test_channel_mismatch(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=11, max_depth=2))
        with pytest.raises(DimensionError):
            forest_predict(model, Measurement([1.0, 2.0]))


class TestModelFile:
    def test_round_trip(self, tmp_path, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=23, max_depth=None, seed=5))
        path = tmp_path / "f.bin"
        model.save(path)
        back = ForestModel.load(path)
        assert back.to_bytes() == path.read_bytes()
        assert back.config == model.config
        np.testing.assert_array_equal(forest_predict_batch(back, small_data.measurements),
                                      forest_predict_batch(model, small_data.measurements))

    def test_stats(self, small_data):
        model = forest_train(small_data, ForestConfig(total_trees=23, max_depth=4, seed=5))
        s = model.stats()
        assert s["trees"] == 23
        assert s["trees_per_wavelength"] == {"min": 2, "max": 3}
        assert sum(s["depth_histogram"].values()) == 23
        assert max(s["depth_histogram"]) <= 4

    def test_wrong_magic(self, small_data):
        blob = forest_train(small_data, ForestConfig(total_trees=11, max_depth=2)).to_bytes()
        with pytest.raises(DataFormatError):
            ForestModel.from_bytes(b"SDMXWIEN" + blob[8:])
