"""Random-forest demultiplexer: CART regression trees, one bootstrap ensemble per wavelength."""

from .model import (
    PAPER_TOTAL_TREES,
    ForestConfig,
    ForestModel,
    RegressionTree,
    allocate_trees,
    best_split,
    forest_predict,
    forest_predict_batch,
    forest_train,
    tree_fit,
)

__all__ = [
    "PAPER_TOTAL_TREES",
    "ForestConfig",
    "ForestModel",
    "RegressionTree",
    "allocate_trees",
    "best_split",
    "forest_predict",
    "forest_predict_batch",
    "forest_train",
    "tree_fit",
]
