"""Random forest of Gini CART trees.

Induction (bootstrap, sqrt(d) feature subsampling, Gini splits) is done by
scikit-learn; the fitted trees are flattened into arrays and evaluated here
by majority vote.
"""
from __future__ import annotations

import numpy as np
from sklearn.ensemble import RandomForestClassifier

LEAF = -1


class Forest:
    def __init__(self, trees: list[dict]):
        self.trees = [
            {
                "left": np.asarray(t["left"], dtype=np.int64),
                "right": np.asarray(t["right"], dtype=np.int64),
                "feature": np.asarray(t["feature"], dtype=np.int64),
                "threshold": np.asarray(t["threshold"], dtype=np.float64),
                "label": np.asarray(t["label"], dtype=np.int64),
            }
            for t in trees
        ]

    @classmethod
    def fit(cls, X, y, n_trees: int, max_depth, max_features, seed: int) -> "Forest":
        rf = RandomForestClassifier(
            n_estimators=n_trees,
            criterion="gini",
            max_depth=max_depth,
            max_features=max_features,
            bootstrap=True,
            random_state=seed,
            n_jobs=1,
        )
        rf.fit(X, y)
        trees = []
        for est in rf.estimators_:
            t = est.tree_
            votes = t.value[:, 0, :]
            trees.append(
                {
                    "left": t.children_left,
                    "right": t.children_right,
                    "feature": t.feature,
                    "threshold": t.threshold,
                    # ties inside a leaf go to the lower label (human)
                    "label": rf.classes_[np.argmax(votes, axis=1)],
                }
            )
        return cls(trees)

    def votes(self, X: np.ndarray) -> np.ndarray:
        # trees were induced on float32 copies of the data; compare the same way
        X = np.asarray(X, dtype=np.float32).astype(np.float64)
        rows = np.arange(len(X))
        total = np.zeros(len(X))
        for t in self.trees:
            node = np.zeros(len(X), dtype=np.int64)
            active = t["left"][node] != LEAF
            while active.any():
                idx = np.flatnonzero(active)
                nd = node[idx]
                go_left = X[rows[idx], t["feature"][nd]] <= t["threshold"][nd]
                node[idx] = np.where(go_left, t["left"][nd], t["right"][nd])
                active[idx] = t["left"][node[idx]] != LEAF
            total += t["label"][node]
        return total

    def score(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting bot."""
        return self.votes(X) / len(self.trees)

    def state(self) -> dict:
        return {"trees": self.trees}

    @classmethod
    def from_state(cls, d: dict) -> "Forest":
        return cls(d["trees"])
