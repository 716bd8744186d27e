"""Stream-function fields over fixed-altitude slices.

Each slice gets Dirichlet data on its boundary ring (encoding the layer's
nominal flow direction) and one shared value per obstacle (so streamlines
split around it), then the discrete Laplace equation is solved for the free
interior cells with conjugate gradients on the sparse free-free block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .elevation import Slice


@dataclass(frozen=True)
class LayerSpec:
    """One corridor layer: altitude plus the nominal flow direction."""

    index: int
    altitude_m: float
    direction: tuple[float, float]

    def __post_init__(self) -> None:
        dx, dy = self.direction
        norm = math.hypot(dx, dy)
        if abs(norm - 1.0) > 1e-9:
            raise ValueError(
                f"layer {self.index}: direction {self.direction} is not unit length (|d|={norm})"
            )
        object.__setattr__(self, "direction", (float(dx), float(dy)))

    @property
    def rotated(self) -> tuple[float, float]:
        """Direction rotated +90 degrees counterclockwise: (x, y) -> (-y, x)."""
        dx, dy = self.direction
        return (-dy, dx)


class ConvergenceError(RuntimeError):
    """Conjugate gradients hit the iteration cap before reaching tolerance."""

    def __init__(self, message: str, residual: float, iterations: int):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


@dataclass
class LaplacianSystem:
    """Sparse system A x = b over the slice's free non-boundary cells.

    A is the free-free block of the slice Laplacian (diagonal 4, -1 per
    free-free adjacency); b collects the Dirichlet neighbors' values. The
    Dirichlet field carries boundary and obstacle values for the merge after
    the solve.
    """

    slice: Slice
    a: sparse.csr_matrix
    b: np.ndarray
    unknown_mask: np.ndarray = field(repr=False)
    unknown_index: np.ndarray = field(repr=False)
    dirichlet: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return self.b.shape[0]

    @property
    def nnz(self) -> int:
        return int(self.a.nnz)


@dataclass
class PsiField:
    """Complete per-cell stream-function values for one solved slice."""

    slice: Slice
    psi: np.ndarray  # (N, N), zone-local
    iterations: int = 0
    residual: float = 0.0

    @property
    def boundary_mask(self) -> np.ndarray:
        n = self.slice.n
        mask = np.zeros((n, n), dtype=bool)
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = True
        return mask

    @property
    def free_mask(self) -> np.ndarray:
        """Free non-boundary cells (the solved unknowns)."""
        return ~self.slice.full & ~self.boundary_mask

    @property
    def full_mask(self) -> np.ndarray:
        """Full non-boundary cells (obstacle Dirichlet cells)."""
        return self.slice.full & ~self.boundary_mask

    @property
    def m_b(self) -> int:
        return int(self.boundary_mask.sum())

    @property
    def m_f(self) -> int:
        return int(self.free_mask.sum())

    @property
    def m_o(self) -> int:
        return int(self.full_mask.sum())

    @property
    def psi_b(self) -> np.ndarray:
        return self.psi[self.boundary_mask]

    @property
    def psi_f(self) -> np.ndarray:
        return self.psi[self.free_mask]

    @property
    def psi_o(self) -> np.ndarray:
        return self.psi[self.full_mask]

    def psi_at(self, i: int, j: int) -> float:
        li, lj = self.slice.local(i, j)
        return float(self.psi[li, lj])


def boundary_value(i: int, j: int, layer: LayerSpec) -> float:
    """Dirichlet value of a boundary cell: its coordinate along the rotated direction."""
    rx, ry = layer.rotated
    return i * rx + j * ry


def assign_boundary_psi(s: Slice, layer: LayerSpec) -> dict[tuple[int, int], float]:
    """Dirichlet values for every boundary cell, full or free.

    Values grow along the rotated direction, so cells on a line parallel to
    the nominal direction share a value and streamlines flow that way.
    """
    return {(i, j): boundary_value(i, j, layer) for (i, j) in s.perimeter_cells()}


def assign_obstacle_psi(s: Slice, layer: LayerSpec) -> dict[int, float]:
    """One Dirichlet value per obstacle, chosen to disturb the flow minimally.

    The obstacle's continuous center (mean of member-cell centers) is located
    back to a cell, and that cell's coordinate along the rotated direction
    becomes the shared value. Distinct obstacles keep distinct streamlines
    between them.
    """
    if s.n_obstacles == 0:
        return {}
    flat = s.labels.ravel()
    member = flat >= 0
    li = np.repeat(np.arange(s.n), s.n)
    lj = np.tile(np.arange(s.n), s.n)
    counts = np.bincount(flat[member], minlength=s.n_obstacles)
    sum_i = np.bincount(flat[member], weights=li[member], minlength=s.n_obstacles)
    sum_j = np.bincount(flat[member], weights=lj[member], minlength=s.n_obstacles)
    i0, j0 = s.origin
    # Mean of cell centers is mean(index) + 0.5 in cell units; the grid anchor
    # and cell size cancel when locating the center back to a cell.
    ci = np.floor(sum_i / counts + i0 + 0.5).astype(np.int64)
    cj = np.floor(sum_j / counts + j0 + 0.5).astype(np.int64)
    rx, ry = layer.rotated
    return {oid: float(ci[oid] * rx + cj[oid] * ry) for oid in range(s.n_obstacles)}


def assemble_system(
    s: Slice,
    boundary_psi: dict[tuple[int, int], float],
    obstacle_psi: dict[int, float],
) -> LaplacianSystem:
    """Build the sparse free-free system with Dirichlet data moved to the right-hand side.

    Every free non-boundary cell is interior, so its diagonal (in-slice
    neighbor count) is always 4; each neighbor contributes either a -1
    coupling (free) or its Dirichlet value to b (boundary or obstacle).
    """
    n = s.n
    boundary = np.zeros((n, n), dtype=bool)
    boundary[0, :] = boundary[-1, :] = boundary[:, 0] = boundary[:, -1] = True
    unknown = ~s.full & ~boundary

    dirichlet = np.zeros((n, n))
    i0, j0 = s.origin
    for (i, j), value in boundary_psi.items():
        dirichlet[i - i0, j - j0] = value
    interior_full = s.full & ~boundary
    if interior_full.any():
        values = np.zeros(s.n_obstacles)
        for oid, value in obstacle_psi.items():
            values[oid] = value
        dirichlet[interior_full] = values[s.labels[interior_full]]

    count = int(unknown.sum())
    index = np.full((n, n), -1, dtype=np.int64)
    index[unknown] = np.arange(count)

    b = np.zeros(count)
    rows = [np.arange(count)]
    cols = [np.arange(count)]
    data = [np.full(count, 4.0)]
    core = unknown[1:-1, 1:-1]  # unknowns only exist strictly inside the ring
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = (slice(1 + di, n - 1 + di), slice(1 + dj, n - 1 + dj))
        nb_unknown = unknown[nb]
        coupled = core & nb_unknown
        if coupled.any():
            rows.append(index[1:-1, 1:-1][coupled])
            cols.append(index[nb][coupled])
            data.append(np.full(int(coupled.sum()), -1.0))
        fixed = core & ~nb_unknown
        if fixed.any():
            np.add.at(b, index[1:-1, 1:-1][fixed], dirichlet[nb][fixed])

    a = sparse.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(count, count),
    )
    return LaplacianSystem(
        slice=s, a=a, b=b, unknown_mask=unknown, unknown_index=index, dirichlet=dirichlet
    )


def conjugate_gradient(
    a: sparse.csr_matrix, b: np.ndarray, tol: float, max_iter: int
) -> tuple[np.ndarray, int, float]:
    """Plain CG for a symmetric positive definite sparse system.

    Returns (x, iterations, relative residual); raises ConvergenceError when
    the cap is hit first. A zero right-hand side short-circuits to x = 0.
    """
    norm_b = float(np.linalg.norm(b))
    if norm_b == 0.0 or a.shape[0] == 0:
        return np.zeros_like(b), 0, 0.0
    x = np.zeros_like(b)
    r = b.copy()
    p = r.copy()
    rs = float(r @ r)
    for it in range(1, max_iter + 1):
        ap = a @ p
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= tol * norm_b:
            return x, it, math.sqrt(rs_new) / norm_b
        p = r + (rs_new / rs) * p
        rs = rs_new
    final = math.sqrt(rs) / norm_b
    raise ConvergenceError(
        f"conjugate gradient did not reach tol={tol} in {max_iter} iterations "
        f"(relative residual {final:.3e})",
        residual=final,
        iterations=max_iter,
    )


def solve_psi(
    sys: LaplacianSystem, tol: float = 1e-9, max_iter: int | None = None
) -> PsiField:
    """Solve the assembled system and merge boundary, obstacle and free values."""
    if max_iter is None:
        max_iter = 10 * sys.slice.n ** 2
    x, iterations, residual = conjugate_gradient(sys.a, sys.b, tol, max_iter)
    psi = sys.dirichlet.copy()
    psi[sys.unknown_mask] = x
    return PsiField(slice=sys.slice, psi=psi, iterations=iterations, residual=residual)


def solve_slice(
    s: Slice, layer: LayerSpec, tol: float = 1e-9, max_iter: int | None = None
) -> PsiField:
    """Assign boundary and obstacle values, assemble and solve in one step."""
    sys = assemble_system(s, assign_boundary_psi(s, layer), assign_obstacle_psi(s, layer))
    return solve_psi(sys, tol=tol, max_iter=max_iter)


# ---------------------------------------------------------------------------
# Debug dumps


def psi_to_csv(f: PsiField) -> str:
    """CSV grid of the field: one row per j (ascending), one column per i."""
    lines = []
    for lj in range(f.slice.n):
        lines.append(",".join(repr(float(v)) for v in f.psi[:, lj]))
    return "\n".join(lines) + "\n"


def psi_to_image(f: PsiField) -> np.ndarray:
    """Grayscale image of the field, [min, max] mapped linearly to [0, 255].

    A constant field maps to all zeros. Row 0 is the highest j (north up),
    matching the raster mask convention.
    """
    lo = float(f.psi.min())
    hi = float(f.psi.max())
    if hi > lo:
        scaled = np.rint((f.psi - lo) / (hi - lo) * 255.0).astype(np.uint16)
    else:
        scaled = np.zeros_like(f.psi, dtype=np.uint16)
    return scaled[:, ::-1].T
