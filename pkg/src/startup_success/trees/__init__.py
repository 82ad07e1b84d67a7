"""Tree learners: CART, random forest and gradient-boosted trees."""

from .binning import BinMapper, Histograms, build_histograms
from .ensemble import TreeEnsemble, sigmoid
from .forest import CART_DEFAULTS, ForestParams, train_cart, train_forest
from .gbdt import (LGBM_PRESET, XGB_PRESET, BoostParams, best_split, preset, split_gain,
                   train_gbdt, weighted_logloss)
from .grower import Split, TreeArrays, TreeGrower

__all__ = [
    "BinMapper", "Histograms", "build_histograms", "TreeEnsemble", "sigmoid",
    "CART_DEFAULTS", "ForestParams", "train_cart", "train_forest",
    "LGBM_PRESET", "XGB_PRESET", "BoostParams", "best_split", "preset", "split_gain",
    "train_gbdt", "weighted_logloss", "Split", "TreeArrays", "TreeGrower",
]
