"""Corridor growth along streamlines and the rules around it.

A corridor is a chain of free cells from one slice boundary to the other,
grown one Cartesian step at a time while staying as close as possible to the
stream-function value of its starting cell. Starts are picked around the
zone perimeter with a minimum spacing, giving priority to cells that would
extend corridors of already-generated neighbor zones.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Callable, Iterable, Sequence

from .elevation import ElevationMap, Slice
from .grid import CellCoord, ZoneCoord
from .streamfield import LayerSpec, PsiField

_ORIENT_EPS = 1e-12
_PROGRESS_EPS = 1e-9

# Fixed candidate order used for final tie-breaking: +i, -i, +j, -j.
_NEIGHBOR_STEPS = ((1, 0), (-1, 0), (0, 1), (0, -1))


class Orientation(Enum):
    """Whether the nominal direction points into, out of, or along the slice boundary."""

    FORWARD = "forward"
    BACKWARD = "backward"
    NONE = "none"


@dataclass
class Corridor:
    """Ordered cell chain approximating one streamline, boundary to boundary."""

    layer_index: int
    zone: ZoneCoord
    k: int
    cells: list[tuple[int, int]]
    direction: tuple[float, float] | None = None  # growth direction, +/- the layer nominal
    status: str = "complete"

    @property
    def start(self) -> tuple[int, int]:
        return self.cells[0]

    @property
    def end(self) -> tuple[int, int]:
        return self.cells[-1]

    def __len__(self) -> int:
        return len(self.cells)


@dataclass(frozen=True)
class GrowthFailure:
    """Normal negative outcome of a growth attempt: where and why it stopped."""

    cause: str  # "dead-end" or "collision"
    cell: tuple[int, int]


@dataclass(frozen=True)
class VerticalConnection:
    """Vertical chain of free cells joining corridor cells of two layers."""

    i: int
    j: int
    lower_layer: int
    upper_layer: int
    cells: tuple[CellCoord, ...]


def classify_orientation(c: tuple[int, int], s: Slice, layer: LayerSpec) -> Orientation:
    """Orient a boundary cell by the inward normal of its perimeter faces.

    Edge cells have one perimeter face, corner cells two; the orientation is
    the sign of the nominal direction dotted with the summed inward normals.
    """
    i, j = c
    li, lj = s.local(i, j)
    n = s.n
    if not (0 <= li < n and 0 <= lj < n) or not s.is_boundary(i, j):
        raise ValueError(f"cell ({i}, {j}) is not on the boundary of zone {tuple(s.zone)}")
    nx = (1 if li == 0 else 0) + (-1 if li == n - 1 else 0)
    ny = (1 if lj == 0 else 0) + (-1 if lj == n - 1 else 0)
    dx, dy = layer.direction
    dot = dx * nx + dy * ny
    if dot > _ORIENT_EPS:
        return Orientation.FORWARD
    if dot < -_ORIENT_EPS:
        return Orientation.BACKWARD
    return Orientation.NONE


def grow_corridor(
    start: tuple[int, int],
    s: Slice,
    psi: PsiField,
    layer: LayerSpec,
    reserved: set[tuple[int, int]],
) -> Corridor | GrowthFailure:
    """Grow one corridor from a boundary cell, following the start cell's streamline.

    Each step extends from the last cell to the in-slice neighbor whose psi is
    closest to the start's, among neighbors that are free, new to this
    corridor, and not behind the last cell along the growth direction. Ties
    prefer larger progress, then the fixed +i, -i, +j, -j order. The attempt
    fails on a dead end or when the best neighbor belongs to another
    corridor; it succeeds when it reaches a boundary cell oriented opposite
    to the start.
    """
    start = (int(start[0]), int(start[1]))
    start_orient = classify_orientation(start, s, layer)
    if start_orient is Orientation.NONE:
        raise ValueError(f"start cell {start} has no orientation")
    if s.is_full(*start):
        raise ValueError(f"start cell {start} is full")
    if start in reserved:
        raise ValueError(f"start cell {start} is reserved by another corridor")

    sign = 1.0 if start_orient is Orientation.FORWARD else -1.0
    dx, dy = layer.direction
    dx, dy = sign * dx, sign * dy
    stop_orient = (
        Orientation.BACKWARD if start_orient is Orientation.FORWARD else Orientation.FORWARD
    )

    cells = [start]
    members = {start}
    psi0 = psi.psi_at(*start)
    last = start
    while not (s.is_boundary(*last) and classify_orientation(last, s, layer) is stop_orient):
        last_progress = last[0] * dx + last[1] * dy
        candidates = []
        for order, (di, dj) in enumerate(_NEIGHBOR_STEPS):
            nb = (last[0] + di, last[1] + dj)
            if not s.contains(*nb) or s.is_full(*nb) or nb in members:
                continue
            progress = nb[0] * dx + nb[1] * dy
            if progress < last_progress - _PROGRESS_EPS:
                continue
            candidates.append((abs(psi.psi_at(*nb) - psi0), -progress, order, nb))
        if not candidates:
            return GrowthFailure(cause="dead-end", cell=last)
        best = min(candidates)[3]
        if best in reserved:
            return GrowthFailure(cause="collision", cell=best)
        cells.append(best)
        members.add(best)
        last = best
    return Corridor(
        layer_index=layer.index,
        zone=s.zone,
        k=s.k,
        cells=cells,
        direction=(dx, dy),
    )


def perimeter_arc_distance(p1: int, p2: int, perimeter_len: int) -> int:
    """Cyclic distance in cells between two perimeter positions."""
    d = abs(p1 - p2) % perimeter_len
    return min(d, perimeter_len - d)


def generate_layer(
    s: Slice,
    psi: PsiField,
    layer: LayerSpec,
    n_r: int,
    neighbor_hints: Sequence[tuple[ZoneCoord, tuple[int, int]]] = (),
) -> list[Corridor]:
    """Grow all corridors of one (zone, layer).

    Hinted starts (boundary cells adjacent to committed neighbor-zone
    corridor endpoints) are attempted first, ordered by neighbor zone then
    perimeter position; then every other oriented free boundary cell in
    perimeter order. A start is skipped when its perimeter arc distance to
    either endpoint of an already-grown corridor is below ``n_r``. Failed
    attempts release their cells and do not consume spacing.
    """
    if n_r < 1:
        raise ValueError(f"n_r must be >= 1, got {n_r}")
    perimeter_len = 4 * (s.n - 1)
    reserved: set[tuple[int, int]] = set()
    corridors: list[Corridor] = []
    marks: list[int] = []  # perimeter positions of successful corridors' endpoints
    attempted: set[tuple[int, int]] = set()

    def attempt(cell: tuple[int, int]) -> None:
        if cell in attempted:
            return
        attempted.add(cell)
        if s.is_full(*cell) or cell in reserved:
            return
        if classify_orientation(cell, s, layer) is Orientation.NONE:
            return
        pos = s.perimeter_position(*cell)
        if any(perimeter_arc_distance(pos, m, perimeter_len) < n_r for m in marks):
            return
        outcome = grow_corridor(cell, s, psi, layer, reserved)
        if isinstance(outcome, Corridor):
            corridors.append(outcome)
            reserved.update(outcome.cells)
            marks.append(s.perimeter_position(*outcome.start))
            marks.append(s.perimeter_position(*outcome.end))

    hints = sorted(
        neighbor_hints,
        key=lambda h: (h[0][0], h[0][1], s.perimeter_position(*h[1])),
    )
    for _, cell in hints:
        attempt((int(cell[0]), int(cell[1])))
    for cell in s.perimeter_cells():
        attempt(cell)
    return corridors


FreeFn = Callable[[int, int, int], bool]


def vertical_connections(
    lower: Iterable[Corridor],
    upper: Iterable[Corridor],
    maps: ElevationMap | FreeFn | None,
    k1: int,
    k2: int,
) -> list[VerticalConnection]:
    """Vertical chains where both layers have a corridor cell at the same (i, j).

    A chain is emitted only when every intermediate cell k1 < k < k2 is free;
    ``maps`` may be the zone's elevation map, a free-cell predicate, or None
    when no intermediate data exists (all intermediates assumed free).
    """
    if k1 >= k2:
        raise ValueError(f"expected k1 < k2, got k1={k1}, k2={k2}")
    lower = list(lower)
    upper = list(upper)
    if not lower or not upper:
        return []

    if maps is None:
        free = lambda i, j, k: True  # noqa: E731
    elif isinstance(maps, ElevationMap):
        free = lambda i, j, k: k > maps.height(i, j)  # noqa: E731
    else:
        free = maps

    lower_cells = {cell for c in lower for cell in c.cells}
    upper_cells = {cell for c in upper for cell in c.cells}
    lower_layer = lower[0].layer_index
    upper_layer = upper[0].layer_index
    out = []
    for i, j in sorted(lower_cells & upper_cells):
        if all(free(i, j, k) for k in range(k1 + 1, k2)):
            chain = tuple(CellCoord(i, j, k) for k in range(k1, k2 + 1))
            out.append(
                VerticalConnection(
                    i=i, j=j, lower_layer=lower_layer, upper_layer=upper_layer, cells=chain
                )
            )
    return out
