"""Grid coordinate system, patch shapes, packing-center enumeration and
coverage analytics for cuboid, cylinder and sphere patches.

A grid(h, w, d) flattens cell (i, j, k) to index i*w*d + j*d + k. Patches are
offset sets around a center; packings place centers at integer multiples of
the center distances (d_h, d_w, d_d), rounded half-up when the distances are
irrational. Centers produced by the literal floor formula may fall outside the
grid; their patch cells are zero-padded unless clipping is requested.
"""

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    h: int
    w: int
    d: int = 1

    def __post_init__(self):
        if self.h < 1 or self.w < 1 or self.d < 1:
            raise ValueError("grid dimensions must be >= 1")

    @property
    def size(self):
        return self.h * self.w * self.d


@dataclass(frozen=True)
class Cuboid:
    p_h: int
    p_h2: int
    p_w: int
    p_w2: int
    p_d: int = 0
    p_d2: int = 0


@dataclass(frozen=True)
class Cylinder:
    r: int
    p_d: int = 0
    p_d2: int = 0


@dataclass(frozen=True)
class Sphere:
    r: int


# named packing strategies -> center distances as functions of the patch
_CYLINDER_STRATEGIES = {
    # sparse leaves gaps, complete overlaps to cover every interior cell
    "sparse_square": lambda r: (2.0 * r, 2.0 * r),
    "sparse_hexagonal": lambda r: (math.sqrt(3.0) * r, 2.0 * r),
    "complete_square": lambda r: (math.sqrt(2.0) * r, math.sqrt(2.0) * r),
    "complete_hexagonal": lambda r: (1.5 * r, math.sqrt(3.0) * r),
}

_SPHERE_STRATEGIES = {
    "sparse_cubic": lambda r: (2.0 * r,) * 3,
    "complete_cubic": lambda r: (2.0 * math.sqrt(3.0) / 3.0 * r,) * 3,
}


@dataclass(frozen=True)
class PackingSpec:
    d_h: float = 1.0
    d_w: float = 1.0
    d_d: float = 1.0
    strategy: str = ""
    clip_out_of_grid: bool = False

    def resolve(self, shape):
        """Center distances, applying the named strategy when present."""
        if not self.strategy:
            return self.d_h, self.d_w, self.d_d
        if isinstance(shape, Cylinder) and self.strategy in _CYLINDER_STRATEGIES:
            dh, dw = _CYLINDER_STRATEGIES[self.strategy](shape.r)
            return dh, dw, self.d_d
        if isinstance(shape, Sphere) and self.strategy in _SPHERE_STRATEGIES:
            return _SPHERE_STRATEGIES[self.strategy](shape.r)
        raise ValueError("unknown packing strategy %r for %r" % (self.strategy, shape))


def index_of(coord, grid):
    i, j, k = coord
    if not (0 <= i < grid.h and 0 <= j < grid.w and 0 <= k < grid.d):
        raise IndexError("coordinate %r outside grid" % (coord,))
    return i * grid.w * grid.d + j * grid.d + k


def coord_of(index, grid):
    if not (0 <= index < grid.size):
        raise IndexError("index out of range")
    i = index // (grid.w * grid.d)
    rem = index % (grid.w * grid.d)
    return (i, rem // grid.d, rem % grid.d)


def patch_offsets(shape):
    """Lexicographically ordered integer offsets belonging to the patch."""
    out = []
    if isinstance(shape, Cuboid):
        for di in range(-shape.p_h, shape.p_h2 + 1):
            for dj in range(-shape.p_w, shape.p_w2 + 1):
                for dk in range(-shape.p_d, shape.p_d2 + 1):
                    out.append((di, dj, dk))
    elif isinstance(shape, Cylinder):
        r2 = shape.r * shape.r
        for di in range(-shape.r, shape.r + 1):
            for dj in range(-shape.r, shape.r + 1):
                if di * di + dj * dj > r2:
                    continue
                for dk in range(-shape.p_d, shape.p_d2 + 1):
                    out.append((di, dj, dk))
    elif isinstance(shape, Sphere):
        r2 = shape.r * shape.r
        for di in range(-shape.r, shape.r + 1):
            for dj in range(-shape.r, shape.r + 1):
                for dk in range(-shape.r, shape.r + 1):
                    if di * di + dj * dj + dk * dk <= r2:
                        out.append((di, dj, dk))
    else:
        raise TypeError("unknown patch shape %r" % (shape,))
    return out


def patch_size(shape):
    return len(patch_offsets(shape))


def _axis_centers(extent, dist):
    # centers at round(t * dist) for t = 0 .. floor(extent / dist), half-up
    count = int(math.floor(extent / dist))
    seen = []
    for t in range(count + 1):
        c = int(math.floor(t * dist + 0.5))
        if c not in seen:
            seen.append(c)
    return seen


def packing_centers(grid, packing, shape=None):
    dh, dw, dd = packing.resolve(shape) if (packing.strategy and shape is not None) \
        else (packing.d_h, packing.d_w, packing.d_d)
    his = _axis_centers(grid.h, dh)
    wjs = _axis_centers(grid.w, dw)
    dks = _axis_centers(grid.d, dd)
    hexagonal = "hexagonal" in packing.strategy
    half = int(math.floor(dw / 2.0 + 0.5))
    centers = []
    for row, i in enumerate(his):
        # hexagonal packings shift every other row by half the column distance
        off = half if (hexagonal and row % 2 == 1) else 0
        for j in wjs:
            for k in dks:
                centers.append((i, j + off, k))
    if packing.clip_out_of_grid:
        centers = [(i, j, k) for (i, j, k) in centers
                   if i < grid.h and j < grid.w and k < grid.d]
    return centers


def patch_count(grid, packing, shape=None):
    """Literal (1+floor(h/d_h))(1+floor(w/d_w))(1+floor(d/d_d)) count.

    Equals len(packing_centers) with clip disabled, modulo de-duplication of
    rounded centers (which only collapses when a distance < 1).
    """
    dh, dw, dd = packing.resolve(shape) if (packing.strategy and shape is not None) \
        else (packing.d_h, packing.d_w, packing.d_d)
    return ((1 + int(math.floor(grid.h / dh)))
            * (1 + int(math.floor(grid.w / dw)))
            * (1 + int(math.floor(grid.d / dd))))


def patch_cells(center, offsets, grid):
    """In-grid flat indices of the patch at `center`; out-of-grid cells skipped."""
    ci, cj, ck = center
    cells = []
    for di, dj, dk in offsets:
        i, j, k = ci + di, cj + dj, ck + dk
        if 0 <= i < grid.h and 0 <= j < grid.w and 0 <= k < grid.d:
            cells.append(i * grid.w * grid.d + j * grid.d + k)
    return cells


def coverage_stats(grid, shape, packing, boundary_margin=None):
    """Fraction of (interior) cells covered by at least one patch plus the
    mean per-patch overlap fraction.

    The margin keeps boundary truncation out of the estimate so the discrete
    ratio can be compared against the continuum packing densities.
    """
    offsets = np.asarray(patch_offsets(shape), dtype=int)
    centers = packing_centers(grid, packing, shape)
    if len(centers) < 4:
        raise ValueError("degenerate grid: fewer than 4 patches fit")
    counts = np.zeros((grid.h, grid.w, grid.d), dtype=int)
    per_patch = []
    dims = np.array([grid.h, grid.w, grid.d])
    strides = np.array([grid.w * grid.d, grid.d, 1])
    for c in centers:
        coords = offsets + np.asarray(c, dtype=int)
        ok = np.all((coords >= 0) & (coords < dims), axis=1)
        cells = coords[ok] @ strides
        per_patch.append(cells)
        if cells.size:
            np.add.at(counts.reshape(-1), cells, 1)
    if boundary_margin is None:
        if isinstance(shape, Cuboid):
            boundary_margin = max(shape.p_h, shape.p_h2, shape.p_w, shape.p_w2,
                                  shape.p_d, shape.p_d2)
        else:
            boundary_margin = shape.r
    m = int(boundary_margin)
    hs = slice(m, grid.h - m) if grid.h > 2 * m else slice(0, grid.h)
    ws = slice(m, grid.w - m) if grid.w > 2 * m else slice(0, grid.w)
    ds = slice(m, grid.d - m) if grid.d > 2 * m else slice(0, grid.d)
    region = counts[hs, ws, ds]
    coverage = float((region > 0).sum()) / region.size
    flat_counts = counts.reshape(-1)
    overlaps = []
    for cells in per_patch:
        if cells.size == 0:
            continue
        shared = np.count_nonzero(flat_counts[cells] > 1)
        overlaps.append(shared / cells.size)
    return {"coverage_ratio": coverage,
            "mean_overlap_ratio": float(np.mean(overlaps)) if overlaps else 0.0}
