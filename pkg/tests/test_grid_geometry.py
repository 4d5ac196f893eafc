import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rpn2 import grid_geometry as gg


def test_index_coord_roundtrip_examples():
    grid = gg.GridSpec(4, 5, 3)
    assert gg.index_of((0, 0, 0), grid) == 0
    assert gg.index_of((1, 0, 0), grid) == 15
    assert gg.index_of((0, 1, 0), grid) == 3
    assert gg.coord_of(22, grid) == (1, 2, 1)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.integers(1, 4),
       st.integers(0, 10 ** 6))
def test_index_coord_roundtrip_property(h, w, d, raw):
    grid = gg.GridSpec(h, w, d)
    idx = raw % grid.size
    assert gg.index_of(gg.coord_of(idx, grid), grid) == idx


def test_grid_rejects_degenerate():
    with pytest.raises(ValueError):
        gg.GridSpec(0, 3, 1)


def test_patch_sizes():
    assert gg.patch_size(gg.Cuboid(1, 1, 1, 1, 1, 1)) == 27
    assert gg.patch_size(gg.Cuboid(1, 1, 1, 1, 0, 0)) == 9
    # cylinder r=1: 5-cell cross per depth slice
    assert gg.patch_size(gg.Cylinder(1, 0, 0)) == 5
    assert gg.patch_size(gg.Sphere(1)) == 7
    assert gg.patch_size(gg.Sphere(2)) == 33


def test_patch_offsets_lexicographic():
    offs = gg.patch_offsets(gg.Cuboid(1, 1, 1, 1, 0, 0))
    assert offs == sorted(offs)
    assert offs[0] == (-1, -1, 0)
    assert offs[-1] == (1, 1, 0)


def test_packing_centers_spec_examples():
    # 6x6 grid, distances 3, clipped: height centers {0, 3} -> 8 centers total
    grid = gg.GridSpec(6, 6, 1)
    packing = gg.PackingSpec(3, 3, 1, clip_out_of_grid=True)
    centers = gg.packing_centers(grid, packing)
    his = sorted({c[0] for c in centers})
    assert his == [0, 3]
    # depth axis: floor(1/1) = 1 gives centers {0, 1}, 1 clipped away
    assert sorted({c[2] for c in centers}) == [0]
    assert len(centers) == 4  # {0,3} x {0,3} x {0}
    # 4x4, distance 2, unclipped: centers {0, 2, 4} per the floor formula
    centers2 = gg.packing_centers(gg.GridSpec(4, 4, 1), gg.PackingSpec(2, 2, 1))
    assert sorted({c[0] for c in centers2}) == [0, 2, 4]


def test_patch_count_literal_formula():
    grid = gg.GridSpec(8, 8, 3)
    packing = gg.PackingSpec(1, 1, 1)
    assert gg.patch_count(grid, packing) == 9 * 9 * 4
    assert gg.patch_count(grid, packing) == \
        len(gg.packing_centers(grid, packing))


def test_hexagonal_rows_are_offset():
    grid = gg.GridSpec(256, 256, 1)
    packing = gg.PackingSpec(strategy="sparse_hexagonal")
    centers = gg.packing_centers(grid, packing, gg.Cylinder(16))
    rows = sorted({c[0] for c in centers})
    cols_even = sorted({c[1] for c in centers if c[0] == rows[0]})
    cols_odd = sorted({c[1] for c in centers if c[0] == rows[1]})
    assert cols_odd[0] - cols_even[0] == 16  # half of d_w = 2r


def test_strategy_distances():
    assert gg.PackingSpec(strategy="sparse_square").resolve(gg.Cylinder(4))[:2] \
        == (8.0, 8.0)
    dh, dw, _ = gg.PackingSpec(strategy="complete_square").resolve(gg.Cylinder(4))
    assert dh == pytest.approx(4 * np.sqrt(2))
    d3 = gg.PackingSpec(strategy="complete_cubic").resolve(gg.Sphere(3))
    assert d3[0] == pytest.approx(2 * np.sqrt(3) / 3 * 3)
    with pytest.raises(ValueError):
        gg.PackingSpec(strategy="nope").resolve(gg.Sphere(3))


def test_patch_cells_skips_out_of_grid():
    grid = gg.GridSpec(4, 4, 1)
    offs = gg.patch_offsets(gg.Cuboid(1, 1, 1, 1, 0, 0))
    cells = gg.patch_cells((0, 0, 0), offs, grid)
    assert len(cells) == 4  # corner keeps the 2x2 in-grid part
    assert len(gg.patch_cells((2, 2, 0), offs, grid)) == 9


def test_coverage_degenerate_raises():
    with pytest.raises(ValueError):
        gg.coverage_stats(gg.GridSpec(4, 4, 1), gg.Cylinder(16),
                          gg.PackingSpec(strategy="sparse_square"))


def test_coverage_complete_square_exact():
    stats = gg.coverage_stats(gg.GridSpec(256, 256, 1), gg.Cylinder(16),
                              gg.PackingSpec(strategy="complete_square"))
    assert stats["coverage_ratio"] == 1.0
    assert stats["mean_overlap_ratio"] > 0.0


def test_coverage_sparse_leaves_gaps():
    stats = gg.coverage_stats(gg.GridSpec(256, 256, 1), gg.Cylinder(16),
                              gg.PackingSpec(strategy="sparse_square"))
    assert 0.7 < stats["coverage_ratio"] < 0.82
