"""Fixed network structure: adjacency, degrees and normalised adjacency."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigurationError


def _frozen(a, dtype=float):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class NetworkSpec:
    """Directed network on ``d`` nodes.

    ``adjacency[i, j] = 1`` means node ``j`` enters the intensity of node
    ``i``.  ``out_degrees[i]`` counts the nodes that influence ``i`` and the
    normalised adjacency is ``W = diag(1 / out_degrees) @ adjacency``.  Nodes
    without any neighbour get a zero row in ``W``.
    """

    adjacency: np.ndarray
    out_degrees: np.ndarray
    W: np.ndarray

    @classmethod
    def from_adjacency(cls, adjacency) -> "NetworkSpec":
        m = np.asarray(adjacency)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ConfigurationError("adjacency must be a square matrix")
        if not np.isin(m, (0, 1)).all():
            raise ConfigurationError("adjacency entries must be 0 or 1")
        m = m.astype(np.int64)
        n = m.sum(axis=1)
        with np.errstate(divide="ignore"):
            inv = np.where(n > 0, 1.0 / np.maximum(n, 1), 0.0)
        return cls(_frozen(m, np.int64), _frozen(n, np.int64), _frozen(inv[:, None] * m))

    @classmethod
    def from_edges(cls, edges, d: int, symmetric: bool = False) -> "NetworkSpec":
        """Build from ``(dst, src)`` index pairs: ``src`` influences ``dst``."""
        m = np.zeros((d, d), dtype=np.int64)
        for i, j in edges:
            m[i, j] = 1
            if symmetric:
                m[j, i] = 1
        return cls.from_adjacency(m)

    @classmethod
    def empty(cls, d: int) -> "NetworkSpec":
        return cls.from_adjacency(np.zeros((d, d), dtype=np.int64))

    @property
    def d(self) -> int:
        return self.adjacency.shape[0]

    @property
    def n_edges(self) -> int:
        return int(self.adjacency.sum())

    def violations(self) -> list[str]:
        out = []
        if np.any(np.diag(self.adjacency) != 0):
            out.append("self-loop: adjacency has a nonzero diagonal")
        expected_w = np.where(self.out_degrees[:, None] > 0,
                              self.adjacency / np.maximum(self.out_degrees, 1)[:, None], 0.0)
        if not np.allclose(self.W, expected_w, rtol=0, atol=1e-12):
            out.append("normalised adjacency W differs from diag(1/n) M")
        if not np.array_equal(self.out_degrees, self.adjacency.sum(axis=1)):
            out.append("degrees do not match adjacency row sums")
        rows = self.W.sum(axis=1)
        bad = (self.out_degrees > 0) & ~np.isclose(rows, 1.0, rtol=0, atol=1e-12)
        if bad.any():
            out.append(f"W rows {np.nonzero(bad)[0].tolist()} do not sum to 1")
        return out

    def to_dict(self) -> dict:
        return {"adjacency": self.adjacency.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "NetworkSpec":
        return cls.from_adjacency(data["adjacency"])
