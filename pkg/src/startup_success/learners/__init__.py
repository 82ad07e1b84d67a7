from .baseline import BaselineResult, expected_random_metrics, random_baseline
from .knn import KNNClassifier, train_knn
from .logreg import LogisticModel, train_logreg
from .mlp import DivergenceError, MLPClassifier, MLPParams, train_mlp
from .scaling import Scaler
from .softtree import SoftDecisionTree, SoftTreeParams, train_soft_tree
from .tune import TuneResult, random_search

__all__ = [
    "BaselineResult", "expected_random_metrics", "random_baseline", "KNNClassifier", "train_knn",
    "LogisticModel", "train_logreg", "DivergenceError", "MLPClassifier", "MLPParams", "train_mlp",
    "Scaler", "SoftDecisionTree", "SoftTreeParams", "train_soft_tree", "TuneResult",
    "random_search",
]
