"""Cubic-cell discretization of continuous airspace and its zone partition.

The airspace is covered by an axis-aligned grid of cubic cells of side
``cell_size`` anchored at a configurable origin. Cells carry signed integer
coordinates (i, j, k); the horizontal plane is further partitioned into
square zones of ``zone_side`` x ``zone_side`` cells so each zone's network
can be generated independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


class CellCoord(NamedTuple):
    """Discrete grid coordinates of one cubic cell."""

    i: int
    j: int
    k: int


class ZoneCoord(NamedTuple):
    """Discrete coordinates of one zone (a column of N x N cell bases)."""

    a: int
    b: int


@dataclass(frozen=True)
class GridConfig:
    """World-to-cell mapping: anchor point, cell size and zone base side.

    ``anchor`` is in projected CRS meters; the grid axes are aligned with the
    CRS axes. ``max_k`` clamps the vertical extent materialized in practice
    (the model itself is unbounded above).
    """

    anchor: tuple[float, float, float] = (0.0, 0.0, 0.0)
    cell_size: float = 5.0
    zone_side: int = 200
    crs_label: str = "custom"
    max_k: int = 200

    def __post_init__(self) -> None:
        if len(self.anchor) != 3 or not all(math.isfinite(c) for c in self.anchor):
            raise ValueError(f"anchor must be 3 finite coordinates, got {self.anchor!r}")
        if not (math.isfinite(self.cell_size) and self.cell_size > 0):
            raise ValueError(f"cell_size must be positive, got {self.cell_size!r}")
        if self.zone_side < 3:
            raise ValueError(f"zone_side must be >= 3 (a slice needs an interior), got {self.zone_side}")
        if self.max_k < 1:
            raise ValueError(f"max_k must be >= 1, got {self.max_k}")


def locate_cell(p, cfg: GridConfig) -> CellCoord:
    """Map a continuous point (meters) to the cell that encloses it.

    Floor semantics are exact for negative coordinates: a point exactly on a
    cell face belongs to the cell with the larger index.
    """
    x, y, z = float(p[0]), float(p[1]), float(p[2])
    if not (math.isfinite(x) and math.isfinite(y) and math.isfinite(z)):
        raise ValueError(f"non-finite point coordinate: {p!r}")
    ax, ay, az = cfg.anchor
    d = cfg.cell_size
    return CellCoord(
        math.floor((x - ax) / d),
        math.floor((y - ay) / d),
        math.floor((z - az) / d),
    )


def cell_center(c: CellCoord, cfg: GridConfig) -> tuple[float, float, float]:
    """Continuous center point of a cell, in the same CRS as the anchor."""
    ax, ay, az = cfg.anchor
    d = cfg.cell_size
    return (ax + (c[0] + 0.5) * d, ay + (c[1] + 0.5) * d, az + (c[2] + 0.5) * d)


def cartesian_neighbors(c: CellCoord) -> set[CellCoord]:
    """The six cells sharing a face with ``c`` (no diagonals)."""
    i, j, k = c
    return {
        CellCoord(i + 1, j, k),
        CellCoord(i - 1, j, k),
        CellCoord(i, j + 1, k),
        CellCoord(i, j - 1, k),
        CellCoord(i, j, k + 1),
        CellCoord(i, j, k - 1),
    }


def zone_of_cell(c: CellCoord, cfg: GridConfig) -> ZoneCoord:
    """Zone containing a cell; depends on (i, j) only."""
    n = cfg.zone_side
    return ZoneCoord(c[0] // n, c[1] // n)


def zone_horizontal_cells(z: ZoneCoord, cfg: GridConfig) -> set[tuple[int, int]]:
    """All N^2 horizontal (i, j) pairs covered by zone ``z``."""
    n = cfg.zone_side
    return {
        (i, j)
        for i in range(n * z[0], n * (z[0] + 1))
        for j in range(n * z[1], n * (z[1] + 1))
    }


def zone_origin(z: ZoneCoord, cfg: GridConfig) -> tuple[int, int]:
    """Smallest (i, j) of the zone; local coordinates are offsets from it."""
    n = cfg.zone_side
    return (n * z[0], n * z[1])
