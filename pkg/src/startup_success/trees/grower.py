"""Growing one tree from binned data and per-row statistics."""

from __future__ import annotations

import heapq
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .binning import BinMapper

PARALLEL_MIN_ROWS = 20000


@dataclass
class Split:
    feature: int
    bin: int
    threshold: float
    default_left: bool
    gain: float


@dataclass
class TreeArrays:
    """Flat node arrays; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    default_left: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray
    gain: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[i] + 1
                depth[self.right[i]] = depth[i] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "default_left": self.default_left.astype(int).tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "cover": self.cover.tolist(),
            "gain": self.gain.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TreeArrays":
        return cls(np.asarray(d["feature"], dtype=np.int64),
                   np.asarray(d["threshold"], dtype=float),
                   np.asarray(d["default_left"], dtype=bool),
                   np.asarray(d["left"], dtype=np.int64),
                   np.asarray(d["right"], dtype=np.int64),
                   np.asarray(d["value"], dtype=float),
                   np.asarray(d["cover"], dtype=float),
                   np.asarray(d["gain"], dtype=float))

    @classmethod
    def leaf(cls, value: float, cover: float) -> "TreeArrays":
        return cls(np.array([-1]), np.array([0.0]), np.array([True]), np.array([-1]),
                   np.array([-1]), np.array([float(value)]), np.array([float(cover)]),
                   np.array([0.0]))


class _Node:
    __slots__ = ("rows", "depth", "a", "b", "idx", "split")

    def __init__(self, rows, depth, a, b, idx):
        self.rows = rows
        self.depth = depth
        self.a = a
        self.b = b
        self.idx = idx
        self.split = None


class TreeGrower:
    """Grows a single tree level-wise or leaf-wise.

    ``a`` and ``b`` are the per-row statistics (gradient/hessian or weighted
    positive/negative mass); ``leaf_value(A, B)`` maps node sums to a leaf
    output and ``cover(A, B)`` to its cover.
    """

    def __init__(self, binned: np.ndarray, mapper: BinMapper, *, criterion: int,
                 lam: float = 0.0, gamma: float = 0.0, min_child_weight: float = 0.0,
                 min_samples_leaf: int = 1, max_depth: int | None = None,
                 max_leaves: int | None = None, growth: str = "level",
                 feature_sampler=None, n_threads: int = 1):
        self.binned = binned
        self.mapper = mapper
        self.n_present = mapper.n_present_bins
        self.criterion = criterion
        self.lam = float(lam)
        self.gamma = float(gamma)
        self.min_child_weight = float(min_child_weight)
        self.min_samples_leaf = int(min_samples_leaf)
        self.max_depth = max_depth
        self.max_leaves = max_leaves
        if growth not in ("level", "leaf"):
            raise ValueError(f"growth must be 'level' or 'leaf', got {growth!r}")
        self.growth = growth
        self.feature_sampler = feature_sampler
        self.n_threads = max(1, int(n_threads))
        self.n_features = binned.shape[0]
        self._hist = np.zeros((self.n_features, mapper.n_bins + 1, 3))
        self._all_feats = np.arange(self.n_features, dtype=np.int64)
        self._pool = ThreadPoolExecutor(self.n_threads) if self.n_threads > 1 else None

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    # -- statistics -------------------------------------------------------

    def leaf_value(self, A, B):
        if self.criterion == K.GRADIENT:
            return -A / (B + self.lam)
        return A / (A + B)

    def cover(self, A, B):
        return B if self.criterion == K.GRADIENT else A + B

    def _fill(self, rows, a, b, feats):
        if self._pool is None or rows.shape[0] < PARALLEL_MIN_ROWS or feats.shape[0] < 2:
            K.fill_histograms(self.binned, rows, a, b, feats, self._hist)
            return
        chunks = np.array_split(feats, min(self.n_threads, feats.shape[0]))
        futures = [self._pool.submit(K.fill_histograms, self.binned, rows, a, b, c, self._hist)
                   for c in chunks if c.size]
        for fut in futures:
            fut.result()

    def find_split(self, rows, a, b, feats=None) -> Split | None:
        if feats is None:
            feats = self._all_feats
        self._fill(rows, a, b, feats)
        gain, f, j, dl = K.scan_splits(self._hist, self.n_present, feats, self.criterion,
                                       self.lam, self.gamma, self.min_child_weight,
                                       float(self.min_samples_leaf))
        if f < 0:
            return None
        return Split(int(f), int(j), self.mapper.threshold(int(f), int(j)), bool(dl), float(gain))

    # -- growth -----------------------------------------------------------

    def grow(self, rows: np.ndarray, a: np.ndarray, b: np.ndarray) -> tuple[TreeArrays, list]:
        """Returns the tree and, per leaf node index, the training rows that reached it."""
        rows = np.asarray(rows, dtype=np.int64)
        nodes: list[_Node] = []

        def make(node_rows, depth):
            node = _Node(node_rows, depth, float(np.sum(a[node_rows])),
                         float(np.sum(b[node_rows])), len(nodes))
            nodes.append(node)
            return node

        def try_split(node):
            if self.max_depth is not None and node.depth >= self.max_depth:
                return None
            if node.rows.shape[0] < 2 * self.min_samples_leaf:
                return None
            feats = None if self.feature_sampler is None else self.feature_sampler()
            node.split = self.find_split(node.rows, a, b, feats)
            return node.split

        children = {}

        def split(node):
            s = node.split
            mask = K.go_left_mask(self.binned[s.feature], node.rows, s.bin, s.default_left,
                                  self.mapper.missing_bin)
            lft = make(node.rows[mask], node.depth + 1)
            rgt = make(node.rows[~mask], node.depth + 1)
            children[node.idx] = (lft.idx, rgt.idx)
            return lft, rgt

        root = make(rows, 0)
        if self.growth == "level":
            frontier = [root]
            while frontier:
                nxt = []
                for node in frontier:
                    if try_split(node) is not None:
                        nxt.extend(split(node))
                frontier = nxt
        else:
            max_leaves = self.max_leaves or 31
            heap = []
            if try_split(root) is not None:
                heapq.heappush(heap, (-root.split.gain, root.idx))
            n_leaves = 1
            while heap and n_leaves < max_leaves:
                _, idx = heapq.heappop(heap)
                for child in split(nodes[idx]):
                    if try_split(child) is not None:
                        heapq.heappush(heap, (-child.split.gain, child.idx))
                n_leaves += 1

        n = len(nodes)
        tree = TreeArrays(np.full(n, -1, dtype=np.int64), np.zeros(n), np.ones(n, dtype=bool),
                          np.full(n, -1, dtype=np.int64), np.full(n, -1, dtype=np.int64),
                          np.zeros(n), np.zeros(n), np.zeros(n))
        leaf_rows = {}
        for node in nodes:
            i = node.idx
            tree.value[i] = self.leaf_value(node.a, node.b)
            tree.cover[i] = self.cover(node.a, node.b)
            if i in children:
                s = node.split
                tree.feature[i] = s.feature
                tree.threshold[i] = s.threshold
                tree.default_left[i] = s.default_left
                tree.left[i], tree.right[i] = children[i]
                tree.gain[i] = s.gain
            else:
                leaf_rows[i] = node.rows
        return tree, leaf_rows
