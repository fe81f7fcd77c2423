"""Point cloud container, unit-ball normalization, and XYZ text I/O."""

from dataclasses import dataclass
from typing import Optional

import numpy as np


class CloudError(ValueError):
    """Raised for malformed or degenerate point cloud data."""


@dataclass(frozen=True)
class PointCloud:
    """An n-by-3 coordinate matrix with an optional class label.

    Coordinates are the graph signal everything downstream operates on.
    Clouds are immutable; the points array is marked read-only.
    """

    points: np.ndarray
    label: Optional[int] = None

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise CloudError(f"expected an (n, 3) array, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise CloudError(f"need at least 2 points, got {pts.shape[0]}")
        if not np.all(np.isfinite(pts)):
            raise CloudError("non-finite coordinate")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]


def normalize_unit_ball(points: np.ndarray) -> np.ndarray:
    """Center a cloud on its centroid and rescale so the farthest point has norm 1.

    Idempotent and invariant to uniform scaling of the input. Raises
    CloudError when all points coincide (no scale to normalize by).
    """
    pts = np.asarray(points, dtype=np.float64)
    centered = pts - pts.mean(axis=0)
    # one re-centering pass kills the O(n*eps) residual of the first subtraction
    centered = centered - centered.mean(axis=0)
    radius = np.sqrt((centered * centered).sum(axis=1).max())
    if radius == 0.0:
        raise CloudError("degenerate cloud: all points identical")
    return centered / radius


def save_xyz(path, points: np.ndarray) -> None:
    """Write one "x y z" line per point, 17 significant digits (exact round trip)."""
    pts = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        for x, y, z in pts:
            fh.write(f"{x:.17g} {y:.17g} {z:.17g}\n")


def load_xyz(path) -> np.ndarray:
    """Read an XYZ text file written by save_xyz (or any "x y z" per line file)."""
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            fields = stripped.split()
            if len(fields) != 3:
                raise CloudError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
            try:
                rows.append([float(f) for f in fields])
            except ValueError:
                raise CloudError(f"{path}:{lineno}: non-numeric token") from None
    if len(rows) < 2:
        raise CloudError(f"{path}: need at least 2 points, got {len(rows)}")
    return np.array(rows, dtype=np.float64)
