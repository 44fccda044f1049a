from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class RadioModel:
    """Unit-disk links with a fixed per-hop delay and no loss."""

    range: float = 250.0
    hop_delay: float = 0.001

    def __post_init__(self):
        if self.range <= 0:
            raise ValueError("radio range must be positive")
        if self.hop_delay < 0:
            raise ValueError("hop delay must be non-negative")


def neighbors(positions: np.ndarray, node: int, radio_range: float) -> list[int]:
    """Every other node within ``radio_range`` meters of ``node``, in id order."""
    d = positions - positions[node]
    close = np.einsum("ij,ij->i", d, d) <= radio_range * radio_range
    close[node] = False
    return np.flatnonzero(close).tolist()


def linked(positions: np.ndarray, u: int, v: int, radio_range: float) -> bool:
    d = positions[u] - positions[v]
    return u != v and float(d @ d) <= radio_range * radio_range


def adjacency(positions: np.ndarray, radio_range: float) -> np.ndarray:
    diff = positions[:, None, :] - positions[None, :, :]
    adj = np.einsum("ijk,ijk->ij", diff, diff) <= radio_range * radio_range
    np.fill_diagonal(adj, False)
    return adj
