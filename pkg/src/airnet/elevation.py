"""Per-zone discrete elevation maps, fixed-altitude slices and obstacle labels.

Terrain and structures are merged into a single "ground cell altitude" per
horizontal coordinate: every cell at or below it is full, everything above is
free. Maps are built either by rasterizing decoded LiDAR point sets (max cell
altitude per column, +inf where no data exists) or directly from per-altitude
obstacle rasters.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy import ndimage

from .grid import CellCoord, GridConfig, ZoneCoord, zone_origin
from .pgm import read_pgm, write_pgm


class CellType(Enum):
    FULL = "full"
    FREE = "free"


@dataclass(frozen=True)
class PointSet:
    """Decoded elevation points (projected meters, same CRS as the grid)."""

    points: np.ndarray  # (n, 3) float64
    source_id: str = "unnamed"

    def __post_init__(self) -> None:
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        object.__setattr__(self, "points", pts)
        if pts.size and not np.isfinite(pts).all():
            raise ValueError(f"point set {self.source_id!r} contains non-finite coordinates")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class ElevationMap:
    """Ground cell altitude for every horizontal cell of one zone.

    ``heights`` is an (N, N) float array indexed by zone-local (li, lj);
    values are integral cell altitudes or +inf where no data exists.
    """

    zone: ZoneCoord
    heights: np.ndarray

    def __post_init__(self) -> None:
        h = np.asarray(self.heights, dtype=np.float64)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError(f"heights must be square, got shape {h.shape}")
        object.__setattr__(self, "heights", h)

    @property
    def n(self) -> int:
        return self.heights.shape[0]

    @property
    def origin(self) -> tuple[int, int]:
        return (self.n * self.zone[0], self.n * self.zone[1])

    def contains(self, i: int, j: int) -> bool:
        i0, j0 = self.origin
        return i0 <= i < i0 + self.n and j0 <= j < j0 + self.n

    def height(self, i: int, j: int) -> float:
        """Ground cell altitude at global (i, j); +inf means no data."""
        if not self.contains(i, j):
            raise KeyError(f"cell ({i}, {j}) is outside zone {tuple(self.zone)}")
        i0, j0 = self.origin
        return float(self.heights[i - i0, j - j0])


@dataclass(frozen=True)
class Slice:
    """One zone's cells at a fixed cell altitude, classified full/free.

    ``full`` and ``labels`` are (N, N) arrays in zone-local coordinates;
    ``labels`` holds a dense obstacle id per full cell and -1 elsewhere.
    """

    zone: ZoneCoord
    k: int
    full: np.ndarray
    labels: np.ndarray = field(repr=False)
    n_obstacles: int = 0

    @classmethod
    def from_mask(cls, zone: ZoneCoord, k: int, mask: np.ndarray) -> "Slice":
        if k < 0:
            raise ValueError(f"slice altitude k={k} is below the anchor; not modeled")
        mask = np.asarray(mask, dtype=bool)
        if mask.ndim != 2 or mask.shape[0] != mask.shape[1] or mask.shape[0] < 3:
            raise ValueError(f"mask must be square (N >= 3), got shape {mask.shape}")
        labels, count = label_obstacles(mask)
        return cls(zone=ZoneCoord(*zone), k=int(k), full=mask, labels=labels, n_obstacles=count)

    @property
    def n(self) -> int:
        return self.full.shape[0]

    @property
    def origin(self) -> tuple[int, int]:
        return (self.n * self.zone[0], self.n * self.zone[1])

    def contains(self, i: int, j: int) -> bool:
        i0, j0 = self.origin
        return i0 <= i < i0 + self.n and j0 <= j < j0 + self.n

    def local(self, i: int, j: int) -> tuple[int, int]:
        i0, j0 = self.origin
        return (i - i0, j - j0)

    def is_full(self, i: int, j: int) -> bool:
        li, lj = self.local(i, j)
        return bool(self.full[li, lj])

    def is_boundary(self, i: int, j: int) -> bool:
        li, lj = self.local(i, j)
        n = self.n
        return (0 <= li < n and 0 <= lj < n) and (li in (0, n - 1) or lj in (0, n - 1))

    def obstacle_id(self, i: int, j: int) -> int:
        """Dense obstacle id of a full cell; -1 for free cells."""
        li, lj = self.local(i, j)
        return int(self.labels[li, lj])

    def in_slice_neighbors(self, i: int, j: int) -> list[tuple[int, int]]:
        """Horizontal Cartesian neighbors of (i, j) that lie in this slice."""
        return [
            (ni, nj)
            for ni, nj in ((i + 1, j), (i - 1, j), (i, j + 1), (i, j - 1))
            if self.contains(ni, nj)
        ]

    @property
    def boundary_set(self) -> set[tuple[int, int]]:
        return set(self.perimeter_cells())

    def perimeter_cells(self) -> list[tuple[int, int]]:
        """Boundary cells in a fixed counterclockwise walk from the zone's minimal corner.

        South edge (+i), east edge (+j), north edge (-i), then west edge (-j);
        4N-4 cells total. This ordering defines perimeter positions used for
        corridor start spacing.
        """
        i0, j0 = self.origin
        n = self.n
        cells = [(i0 + t, j0) for t in range(n)]
        cells += [(i0 + n - 1, j0 + t) for t in range(1, n)]
        cells += [(i0 + t, j0 + n - 1) for t in range(n - 2, -1, -1)]
        cells += [(i0, j0 + t) for t in range(n - 2, 0, -1)]
        return cells

    def perimeter_position(self, i: int, j: int) -> int:
        """Index of a boundary cell along the canonical perimeter walk."""
        li, lj = self.local(i, j)
        n = self.n
        if lj == 0:
            return li
        if li == n - 1:
            return (n - 1) + lj
        if lj == n - 1:
            return (n - 1) + (n - 1) + (n - 1 - li)
        if li == 0:
            return 3 * (n - 1) + (n - 1 - lj)
        raise ValueError(f"cell ({i}, {j}) is not on the boundary of zone {tuple(self.zone)}")


def label_obstacles(full_mask: np.ndarray) -> tuple[np.ndarray, int]:
    """Group full cells into obstacles by in-slice 4-adjacency.

    Returns (labels, count) where labels assigns each full cell a dense id in
    0..count-1 and -1 to free cells. Ids are ordered by each component's first
    cell in a row-major (i, then j) scan, so the assignment is deterministic.
    """
    mask = np.asarray(full_mask, dtype=bool)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)
    raw, count = ndimage.label(mask, structure=structure)
    labels = np.full(mask.shape, -1, dtype=np.int32)
    if count == 0:
        return labels, 0
    flat = raw.ravel()
    ids, first = np.unique(flat[flat > 0], return_index=True)
    order = ids[np.argsort(first)]
    remap = np.zeros(count + 1, dtype=np.int32)
    remap[order] = np.arange(count, dtype=np.int32)
    labels[mask] = remap[raw[mask]]
    return labels, int(count)


def build_map_from_points(ps: PointSet, z: ZoneCoord, cfg: GridConfig) -> ElevationMap:
    """Rasterize a point set into a zone's elevation map.

    Each column's height is the maximum cell altitude of the points mapping
    into it; columns without points get +inf (the conservative choice for
    missing data). Heights below the anchor altitude clamp to 0.
    """
    n = cfg.zone_side
    heights = np.full((n, n), -np.inf)
    pts = ps.points
    if len(pts):
        anchor = np.asarray(cfg.anchor)
        cells = np.floor((pts - anchor) / cfg.cell_size).astype(np.int64)
        i0, j0 = n * z[0], n * z[1]
        li = cells[:, 0] - i0
        lj = cells[:, 1] - j0
        inside = (li >= 0) & (li < n) & (lj >= 0) & (lj < n)
        np.maximum.at(heights, (li[inside], lj[inside]), cells[inside, 2].astype(np.float64))

    below = np.isfinite(heights) & (heights < 0)
    if below.any():
        warnings.warn(
            f"{ps.source_id}: {int(below.sum())} cells below anchor altitude clamped to k=0",
            stacklevel=2,
        )
        heights[below] = 0.0
    heights[heights == -np.inf] = np.inf
    return ElevationMap(zone=ZoneCoord(*z), heights=heights)


def build_map_from_slices(rasters, z: ZoneCoord, cfg: GridConfig) -> list[Slice]:
    """Build one Slice per (altitude_m, obstacle mask) pair, bypassing elevation maps.

    Masks must cover exactly the zone's N x N cells; two rasters may not land
    on the same cell altitude.
    """
    n = cfg.zone_side
    out: list[Slice] = []
    seen: dict[int, float] = {}
    for altitude_m, mask in rasters:
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != (n, n):
            raise ValueError(f"raster at {altitude_m} m has shape {mask.shape}, expected {(n, n)}")
        k = int(np.floor((float(altitude_m) - cfg.anchor[2]) / cfg.cell_size))
        if k in seen:
            raise ValueError(
                f"rasters at {seen[k]} m and {altitude_m} m both map to cell altitude k={k}"
            )
        seen[k] = float(altitude_m)
        out.append(Slice.from_mask(ZoneCoord(*z), k, mask))
    return out


def cell_type(c: CellCoord, m: ElevationMap) -> CellType:
    """full if the cell sits at or below the column's ground altitude."""
    h = m.height(c[0], c[1])  # raises for cells outside the zone
    return CellType.FULL if c[2] <= h else CellType.FREE


def extract_slice(m: ElevationMap, k: int) -> Slice:
    """Classify all of a zone's cells at cell altitude ``k`` and label obstacles."""
    if k < 0:
        raise ValueError(f"slice altitude k={k} is below the anchor; not modeled")
    return Slice.from_mask(m.zone, k, k <= m.heights)


def flat_map(z: ZoneCoord, cfg: GridConfig, ground_k: int = 0) -> ElevationMap:
    """Uniform terrain at cell altitude ``ground_k`` (every slice above it is empty)."""
    n = cfg.zone_side
    return ElevationMap(zone=ZoneCoord(*z), heights=np.full((n, n), float(ground_k)))


# ---------------------------------------------------------------------------
# Point file formats


_BINARY_MAGIC = b"AXYZ"


def load_points(path, source_id: str | None = None) -> PointSet:
    """Read a point file, sniffing ASCII XYZ vs the AXYZ binary format."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(4)
    if magic == _BINARY_MAGIC:
        return load_points_binary(path, source_id)
    return load_points_ascii(path, source_id)


def load_points_ascii(path, source_id: str | None = None) -> PointSet:
    """One "x y z" triple per line; '#' starts a comment; blank lines ignored."""
    path = Path(path)
    rows = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        parts = text.split()
        if len(parts) != 3:
            raise ValueError(f"{path}:{lineno}: expected 3 coordinates, got {len(parts)}")
        rows.append([float(v) for v in parts])
    pts = np.array(rows, dtype=np.float64).reshape(-1, 3)
    return PointSet(points=pts, source_id=source_id or path.name)


def load_points_binary(path, source_id: str | None = None) -> PointSet:
    """Length-prefixed binary triples: magic "AXYZ", u32 count, count*3 float64, all little-endian."""
    path = Path(path)
    data = path.read_bytes()
    if data[:4] != _BINARY_MAGIC:
        raise ValueError(f"{path}: bad magic {data[:4]!r}, expected {_BINARY_MAGIC!r}")
    if len(data) < 8:
        raise ValueError(f"{path}: truncated header")
    (count,) = struct.unpack_from("<I", data, 4)
    expected = 8 + count * 24
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes for {count} points, got {len(data)}")
    pts = np.frombuffer(data, dtype="<f8", count=count * 3, offset=8).reshape(-1, 3)
    return PointSet(points=pts.copy(), source_id=source_id or path.name)


def save_points_ascii(path, ps: PointSet) -> None:
    lines = [f"# {len(ps)} points from {ps.source_id}"]
    lines += [f"{x!r} {y!r} {z!r}" for x, y, z in ps.points]
    Path(path).write_text("\n".join(lines) + "\n")


def save_points_binary(path, ps: PointSet) -> None:
    pts = np.ascontiguousarray(ps.points, dtype="<f8")
    Path(path).write_bytes(_BINARY_MAGIC + struct.pack("<I", len(pts)) + pts.tobytes())


# ---------------------------------------------------------------------------
# Obstacle raster format (PGM per altitude + JSON sidecar)


def load_raster_stack(sidecar_path) -> list[tuple[float, np.ndarray]]:
    """Read a sidecar JSON listing {file, altitude_m} entries into (altitude, mask) pairs.

    PGM files are interpreted as 0 = free, nonzero = full; image column c maps
    to local i = c and image row r to local j = height-1-r (north up).
    """
    sidecar_path = Path(sidecar_path)
    entries = json.loads(sidecar_path.read_text())
    if not isinstance(entries, list):
        raise ValueError(f"{sidecar_path}: sidecar must be a JSON list")
    out = []
    for entry in entries:
        img = read_pgm(sidecar_path.parent / entry["file"])
        out.append((float(entry["altitude_m"]), pgm_to_mask(img)))
    return out


def save_raster_stack(directory, stem: str, rasters) -> Path:
    """Write (altitude_m, mask) pairs as PGMs plus a sidecar JSON; returns the sidecar path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for altitude_m, mask in rasters:
        name = f"{stem}_{float(altitude_m):g}m.pgm"
        write_pgm(directory / name, mask_to_pgm(np.asarray(mask, dtype=bool)), maxval=255)
        entries.append({"file": name, "altitude_m": float(altitude_m)})
    sidecar = directory / f"{stem}.json"
    sidecar.write_text(json.dumps(entries, indent=2) + "\n")
    return sidecar


def pgm_to_mask(img: np.ndarray) -> np.ndarray:
    """Image (row, col) -> local (li, lj) boolean mask, north up."""
    return (img != 0).T[:, ::-1]


def mask_to_pgm(mask: np.ndarray) -> np.ndarray:
    """Local (li, lj) boolean mask -> image array (row, col), full cells white."""
    return np.where(mask, 255, 0).astype(np.uint16)[:, ::-1].T
