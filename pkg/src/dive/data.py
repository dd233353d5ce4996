"""Instrument-treatment-response datasets."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

Z_TYPES = ("continuous", "discrete")

DISCRETE_DETECTION_LIMIT = 10


@dataclass(frozen=True)
class IVDataset:
    """Immutable sample of (z, d, y) triples with instrument-type metadata.

    z may be a vector or an (n, d_z) array; d is binary with both arms
    present; y is the real-valued response.
    """

    z: np.ndarray
    d: np.ndarray
    y: np.ndarray
    z_type: str = "continuous"

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float)
        d = np.asarray(self.d)
        y = np.asarray(self.y, dtype=float)
        if z.ndim not in (1, 2):
            raise ValueError("z must be a vector or a 2-D array")
        if d.ndim != 1 or y.ndim != 1:
            raise ValueError("d and y must be vectors")
        if not (z.shape[0] == d.shape[0] == y.shape[0]):
            raise ValueError("z, d and y must have equal length")
        if not np.all(np.isin(d, (0, 1))):
            raise ValueError("treatment must be binary 0/1")
        d = d.astype(np.int64)
        if d.min() == d.max():
            raise ValueError("both treatment arms required")
        if not np.all(np.isfinite(y)):
            raise ValueError("response contains non-finite values")
        if not np.all(np.isfinite(z)):
            raise ValueError("instrument contains non-finite values")
        if self.z_type not in Z_TYPES:
            raise ValueError(f"z_type must be one of {Z_TYPES}")
        for name, arr in (("z", z), ("d", d), ("y", y)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    def arm(self, d: int) -> np.ndarray:
        """Responses of one treatment arm."""
        return self.y[self.d == d]


def infer_z_type(z) -> str:
    """Treat instruments with few distinct values as discrete."""
    z = np.asarray(z, dtype=float)
    distinct = np.unique(z.ravel()).size
    return "discrete" if distinct <= DISCRETE_DETECTION_LIMIT else "continuous"
