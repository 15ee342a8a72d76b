from __future__ import annotations

import collections
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .. import modelfile
from ..core import Measurement, Spectrum, WavelengthGrid
from ..errors import DataFormatError, DimensionError, UsageError
from ..rng import make_rng
from ..specgen import TrainingDataset
from . import _kernels

MAGIC = b"SDMXFRST"
VERSION = 1
PAPER_TOTAL_TREES = 8000


@dataclass(frozen=True)
class ForestConfig:
    """Random-forest hyperparameters.

    ``max_depth=None`` grows trees until leaves are pure or too small to split.
    Every split considers all input channels; randomness comes from the
    bootstrap resample alone.
    """

    total_trees: int = PAPER_TOTAL_TREES
    max_depth: Optional[int] = 14
    min_leaf_samples: int = 2
    bootstrap: bool = True
    seed: int = 0

    def __post_init__(self):
        if int(self.total_trees) != self.total_trees or self.total_trees < 1:
            raise UsageError(f"total_trees must be a positive integer, got {self.total_trees}")
        if self.max_depth is not None and (int(self.max_depth) != self.max_depth or self.max_depth < 1):
            raise UsageError(f"max_depth must be a positive integer or None, got {self.max_depth}")
        if int(self.min_leaf_samples) != self.min_leaf_samples or self.min_leaf_samples < 1:
            raise UsageError(f"min_leaf_samples must be a positive integer, got {self.min_leaf_samples}")

    def check_grid(self, grid: WavelengthGrid):
        if self.total_trees < grid.count:
            raise UsageError(f"total_trees={self.total_trees} leaves some of the {grid.count} wavelengths without a tree")


def allocate_trees(total_trees, n_outputs):
    """Trees per output: ``total // n`` each, plus one for the first ``total % n`` outputs."""
    base, extra = divmod(total_trees, n_outputs)
    return [base + 1 if k < extra else base for k in range(n_outputs)]


@dataclass(frozen=True)
class RegressionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def node_count(self):
        return self.feature.size

    @property
    def leaf_count(self):
        return int(np.count_nonzero(self.feature < 0))

    @property
    def depth(self):
        return int(_kernels.tree_depths(self.left, self.right, np.array([0, self.node_count]))[0])

    def predict(self, inputs):
        X = _as_inputs(inputs)
        out = _kernels.predict_ensembles(X, self.feature, self.threshold, self.left, self.right,
                                         self.value, np.array([0, self.node_count]), np.array([0, 1]))
        return out[:, 0]


def _as_inputs(inputs):
    if isinstance(inputs, Measurement):
        inputs = [inputs]
    if len(inputs) and isinstance(inputs[0], Measurement):
        inputs = [m.values for m in inputs]
    X = np.ascontiguousarray(np.atleast_2d(np.asarray(inputs, dtype=np.float64)))
    if X.ndim != 2:
        raise DimensionError(f"inputs must be 2-D, got shape {X.shape}")
    return X


def _fit(X, y, idx, config):
    depth = -1 if config.max_depth is None else int(config.max_depth)
    return RegressionTree(*_kernels.fit_tree(X, y, idx, depth, int(config.min_leaf_samples)))


def tree_fit(inputs, targets, config: ForestConfig, rng=None) -> RegressionTree:
    """Grow one CART regression tree.

    With ``config.bootstrap`` the tree is fit on a with-replacement resample
    of the same size drawn from ``rng`` (default: a stream seeded by
    ``config.seed``).
    """
    X = _as_inputs(inputs)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    if X.shape[0] != y.size or y.size < 1:
        raise UsageError(f"{X.shape[0]} inputs vs {y.size} targets")
    m = y.size
    if config.bootstrap:
        rng = rng if rng is not None else make_rng(config.seed)
        idx = rng.integers(0, m, size=m)
    else:
        idx = np.arange(m)
    return _fit(X, y, idx.astype(np.int64), config)


def best_split(inputs, targets, min_leaf_samples=1):
    """Return ``(channel, threshold, weighted_child_variance)`` or ``None``.

    Weighted child variance is the summed within-child squared deviation
    divided by the sample count.
    """
    X = _as_inputs(inputs)
    y = np.ascontiguousarray(targets, dtype=np.float64)
    m = y.size
    f, t, sse = _kernels.split_search(X, y, np.arange(m), 0, m, int(min_leaf_samples), np.empty(m))
    if f < 0:
        return None
    return int(f), float(t), float(sse) / m


@dataclass(frozen=True)
class ForestModel:
    """Per-wavelength tree ensembles packed into flat node arrays.

    Tree ``t`` occupies nodes ``node_offsets[t]:node_offsets[t + 1]``;
    ensemble ``k`` (wavelength ``k``) owns trees
    ``ensemble_offsets[k]:ensemble_offsets[k + 1]``.
    """

    grid: WavelengthGrid
    config: ForestConfig
    training_fingerprint: str
    channel_names: tuple
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    node_offsets: np.ndarray
    ensemble_offsets: np.ndarray

    def __post_init__(self):
        for name in ("feature", "threshold", "left", "right", "value", "node_offsets", "ensemble_offsets"):
            getattr(self, name).setflags(write=False)
        if self.ensemble_offsets.size != self.grid.count + 1:
            raise DataFormatError("ensemble count does not match the wavelength grid")
        if int(self.ensemble_offsets[-1]) != self.node_offsets.size - 1:
            raise DataFormatError("ensemble offsets do not cover every tree")
        if int(self.node_offsets[-1]) != self.feature.size:
            raise DataFormatError("node offsets do not cover every node")

    @property
    def channels(self):
        return len(self.channel_names)

    @property
    def tree_count(self):
        return self.node_offsets.size - 1

    def tree(self, t) -> RegressionTree:
        a, b = int(self.node_offsets[t]), int(self.node_offsets[t + 1])
        return RegressionTree(self.feature[a:b], self.threshold[a:b], self.left[a:b],
                              self.right[a:b], self.value[a:b])

    @property
    def per_wavelength_ensembles(self):
        return [[self.tree(t) for t in range(self.ensemble_offsets[k], self.ensemble_offsets[k + 1])]
                for k in range(self.grid.count)]

    def trees_per_wavelength(self):
        return np.diff(self.ensemble_offsets)

    def tree_depths(self):
        return _kernels.tree_depths(self.left, self.right, self.node_offsets)

    def stats(self):
        depths = self.tree_depths()
        sizes = np.diff(self.node_offsets)
        per = self.trees_per_wavelength()
        return {
            "trees": int(self.tree_count),
            "wavelengths": int(self.grid.count),
            "trees_per_wavelength": {"min": int(per.min()), "max": int(per.max())},
            "nodes": int(self.feature.size),
            "leaves": int(np.count_nonzero(self.feature < 0)),
            "nodes_per_tree": {"min": int(sizes.min()), "max": int(sizes.max()), "mean": float(sizes.mean())},
            "depth_histogram": {int(d): int(c) for d, c in sorted(collections.Counter(depths.tolist()).items())},
            "config": asdict(self.config),
        }

    def to_bytes(self):
        header = {
            "kind": "forest",
            "grid": self.grid.to_dict(),
            "config": asdict(self.config),
            "training_fingerprint": self.training_fingerprint,
            "channel_names": list(self.channel_names),
        }
        arrays = [("feature", self.feature), ("threshold", self.threshold), ("left", self.left),
                  ("right", self.right), ("value", self.value), ("node_offsets", self.node_offsets),
                  ("ensemble_offsets", self.ensemble_offsets)]
        return modelfile.encode(MAGIC, VERSION, header, arrays)

    def save(self, path):
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def from_bytes(cls, data):
        magic, version, header, a = modelfile.decode(data)
        if magic != MAGIC or version != VERSION:
            raise DataFormatError("not a version-1 forest model file")
        try:
            return cls(WavelengthGrid(**header["grid"]), ForestConfig(**header["config"]),
                       header["training_fingerprint"], tuple(header["channel_names"]),
                       a["feature"], a["threshold"], a["left"], a["right"], a["value"],
                       a["node_offsets"], a["ensemble_offsets"])
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"forest model header incomplete: {exc}") from exc

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


def forest_train(data: TrainingDataset, config: ForestConfig, n_jobs: int = 1) -> ForestModel:
    """Train one bootstrap ensemble per wavelength.

    Tree ``t`` (numbered wavelength-major) draws its bootstrap sample from
    substream ``(config.seed, t)``, so the model does not depend on
    ``n_jobs``.
    """
    grid = data.grid
    config.check_grid(grid)
    X = np.ascontiguousarray(data.measurements)
    Y = np.ascontiguousarray(data.spectra.T)
    m = X.shape[0]
    alloc = allocate_trees(config.total_trees, grid.count)
    owners = np.repeat(np.arange(grid.count), alloc)

    def build(t):
        if config.bootstrap:
            idx = make_rng(config.seed, t).integers(0, m, size=m)
        else:
            idx = np.arange(m)
        return _fit(X, Y[owners[t]], idx.astype(np.int64), config)

    if n_jobs is not None and n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            trees = list(pool.map(build, range(config.total_trees)))
    else:
        trees = [build(t) for t in range(config.total_trees)]

    sizes = np.array([tr.node_count for tr in trees], dtype=np.int64)
    node_offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    ensemble_offsets = np.concatenate([[0], np.cumsum(alloc)]).astype(np.int64)

    def cat(name):
        return np.concatenate([getattr(tr, name) for tr in trees])

    return ForestModel(grid, config, data.fingerprint(), data.channel_names,
                       cat("feature"), cat("threshold"), cat("left"), cat("right"), cat("value"),
                       node_offsets, ensemble_offsets)


def forest_predict_batch(model: ForestModel, measurements) -> np.ndarray:
    X = _as_inputs(measurements)
    if X.shape[1] != model.channels:
        raise DimensionError(f"model expects {model.channels} channels, measurement has {X.shape[1]}")
    return _kernels.predict_ensembles(X, model.feature, model.threshold, model.left, model.right,
                                      model.value, model.node_offsets, model.ensemble_offsets)


def forest_predict(model: ForestModel, c: Measurement) -> Spectrum:
    return Spectrum(model.grid, forest_predict_batch(model, c.values[None, :])[0])
