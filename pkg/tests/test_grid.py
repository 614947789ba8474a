"""Grid construction, indexing, serialization."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpattern import (
    BackgroundSpec,
    CellGrid,
    LinePatternSpec,
    flatten,
    generate_grid,
    perfect_grating,
    probability_field,
    read_grid,
    subgrid,
    transpose_grid,
    unflatten,
    write_grid,
)
from qpattern.grid import point_list

from conftest import exact_half_grid, random_grid


# ---------------------------------------------------------------- flatten

def test_flatten_origin():
    assert flatten(0, 0, 8, 4) == 0


def test_flatten_row_major_in_x():
    # z = x + N*y: moving one column right advances z by 1
    assert flatten(3, 2, 8, 4) == 19


def test_flatten_rejects_out_of_range():
    with pytest.raises(ValueError):
        flatten(8, 0, 8, 4)
    with pytest.raises(ValueError):
        flatten(0, 4, 8, 4)
    with pytest.raises(ValueError):
        flatten(-1, 0, 8, 4)


def test_unflatten_inverts_flatten_exhaustive():
    n_cols, m_rows = 16, 8
    for z in range(n_cols * m_rows):
        x, y = unflatten(z, n_cols, m_rows)
        assert flatten(x, y, n_cols, m_rows) == z


@given(
    n=st.integers(0, 6),
    m=st.integers(0, 6),
    data=st.data(),
)
def test_flatten_bijection(n, m, data):
    n_cols, m_rows = 2**n, 2**m
    x = data.draw(st.integers(0, n_cols - 1))
    y = data.draw(st.integers(0, m_rows - 1))
    z = flatten(x, y, n_cols, m_rows)
    assert 0 <= z < n_cols * m_rows
    assert unflatten(z, n_cols, m_rows) == (x, y)


def test_flatten_vectorized():
    xs = np.array([0, 1, 3])
    ys = np.array([0, 0, 2])
    assert flatten(xs, ys, 8, 4).tolist() == [0, 1, 19]


# ---------------------------------------------------------------- CellGrid

def test_cellgrid_properties():
    g = CellGrid(n=3, m=2, cells=np.zeros(32, dtype=np.uint8))
    assert (g.n_cols, g.m_rows, g.size, g.qubits) == (8, 4, 32, 5)
    assert g.white_count == 0 and g.rho == 0.0


def test_cellgrid_rejects_wrong_length():
    with pytest.raises(ValueError):
        CellGrid(n=3, m=2, cells=np.zeros(31, dtype=np.uint8))


def test_cellgrid_rejects_non_binary():
    with pytest.raises(ValueError):
        CellGrid(n=1, m=1, cells=np.array([0, 1, 2, 0]))


def test_cellgrid_cells_immutable():
    g = CellGrid(n=1, m=1, cells=np.array([0, 1, 0, 1]))
    with pytest.raises(ValueError):
        g.cells[0] = 1


# ---------------------------------------------------------------- generation

def test_generated_density_near_rho():
    # Bernoulli(rho) over S cells: |rho_hat - rho| < 3 sigma
    g = random_grid(5, 5, rho=0.5, seed=7)
    sigma = math.sqrt(0.5 * 0.5 / g.size)
    assert abs(g.rho - 0.5) < 3 * sigma


def test_generated_density_three_sigma_over_many_seeds():
    rho = 0.3
    bad = 0
    for seed in range(120):
        g = random_grid(5, 5, rho=rho, seed=seed)
        sigma = math.sqrt(rho * (1 - rho) / g.size)
        bad += abs(g.rho - rho) >= 3 * sigma
    # 3 sigma excursions happen ~0.3% of the time; allow a couple
    assert bad <= 3


def test_all_white_background():
    g = random_grid(4, 4, rho=1.0, seed=0)
    assert g.white_count == g.size


def test_all_black_background():
    g = random_grid(4, 4, rho=0.0, seed=0)
    assert g.white_count == 0


def test_generation_is_seed_deterministic():
    a = random_grid(5, 4, rho=0.4, seed=11)
    b = random_grid(5, 4, rho=0.4, seed=11)
    c = random_grid(5, 4, rho=0.4, seed=12)
    assert a == b
    assert a != c


def test_vertical_line_pattern_column_profile():
    # d=4, theta=0, full contrast over the whole array: on-line columns
    # are certain white, compensated columns certain black, period 4
    N = M = 32
    g = generate_grid(
        N, M,
        BackgroundSpec(rho=0.5, seed=3),
        LinePatternSpec(d=4, theta=0.0, region=(0, 0, N, M), delta_rho=0.5),
    )
    col_whites = g.as_array().sum(axis=0)
    on_cols = col_whites == M
    assert on_cols.sum() == M // 2
    # the on/off assignment repeats with period d
    assert np.array_equal(on_cols[4:], on_cols[:-4])
    assert np.all(col_whites[~on_cols] == 0)


def test_pattern_confined_to_region():
    N = M = 32
    region = (8, 8, 16, 16)
    base = BackgroundSpec(rho=0.5, seed=5)
    plain = generate_grid(N, M, base)
    patt = generate_grid(
        N, M, base,
        LinePatternSpec(d=4, theta=0.0, region=region, delta_rho=0.5),
    )
    a, b = plain.as_array(), patt.as_array()
    outside = np.ones((M, N), dtype=bool)
    x0, y0, w, h = region
    outside[y0 : y0 + h, x0 : x0 + w] = False
    # same seed, same draws: cells outside the region are identical
    assert np.array_equal(a[outside], b[outside])
    assert not np.array_equal(a[~outside], b[~outside])


def test_probability_field_region_mean_is_rho():
    bg = BackgroundSpec(rho=0.4, seed=0)
    for d, theta in [(4, 0.0), (8, math.pi / 8), (6.5, -math.pi / 4)]:
        probs = probability_field(
            64, 64, bg,
            LinePatternSpec(d=d, theta=theta, region=(0, 0, 64, 64),
                            delta_rho=0.3),
        )
        assert probs.mean() == pytest.approx(0.4, abs=1e-12)


def test_probability_field_plain_is_constant():
    probs = probability_field(16, 16, BackgroundSpec(rho=0.25, seed=0))
    assert probs.shape == (16, 16)
    assert np.all(probs == 0.25)


def test_pattern_rejects_excess_contrast():
    with pytest.raises(ValueError, match="exceeds 1"):
        generate_grid(
            32, 32,
            BackgroundSpec(rho=0.8, seed=0),
            LinePatternSpec(d=4, theta=0.0, region=(0, 0, 32, 32),
                            delta_rho=0.3),
        )


def test_pattern_rejects_infeasible_compensation():
    # narrow region catching mostly line cells: off-line prob would go
    # negative
    with pytest.raises(ValueError, match="infeasible contrast"):
        probability_field(
            32, 32,
            BackgroundSpec(rho=0.5, seed=0),
            LinePatternSpec(d=8, theta=0.0, region=(21, 0, 4, 32),
                            delta_rho=0.5),
        )


def test_pattern_rejects_all_line_region():
    # region sits entirely inside one line band: nothing left to thin
    with pytest.raises(ValueError, match="cover the whole region"):
        probability_field(
            32, 32,
            BackgroundSpec(rho=0.5, seed=0),
            LinePatternSpec(d=8, theta=0.0, region=(22, 0, 3, 32),
                            delta_rho=0.5),
        )


def test_pattern_rejects_oversized_spacing():
    with pytest.raises(ValueError, match="exceeds min"):
        generate_grid(
            32, 8,
            BackgroundSpec(rho=0.5, seed=0),
            LinePatternSpec(d=16, theta=0.0, region=(0, 0, 32, 8),
                            delta_rho=0.25),
        )


def test_pattern_spec_validation():
    with pytest.raises(ValueError):
        LinePatternSpec(d=1.0, theta=0.0, region=(0, 0, 8, 8), delta_rho=0.1)
    with pytest.raises(ValueError):
        LinePatternSpec(d=4.0, theta=math.pi / 2, region=(0, 0, 8, 8),
                        delta_rho=0.1)
    with pytest.raises(ValueError):
        LinePatternSpec(d=4.0, theta=0.0, region=(0, 0, 0, 8), delta_rho=0.1)


def test_non_power_of_two_dims_are_padded():
    # the background fills the enlarged array, so the padded grid keeps
    # density rho overall
    g = generate_grid(20, 12, BackgroundSpec(rho=1.0, seed=0))
    assert (g.n_cols, g.m_rows) == (32, 16)
    assert g.white_count == g.size


# ---------------------------------------------------------------- grating

def test_perfect_grating_density():
    # width-1 vertical lines every 4 columns
    g = perfect_grating(8, 4, d=4, theta=0.0)
    assert g.rho == pytest.approx(0.25)
    cols = g.as_array().sum(axis=0)
    assert cols.tolist() == [4, 0, 0, 0, 4, 0, 0, 0]


def test_perfect_grating_anchor():
    g = perfect_grating(8, 4, d=4, theta=0.0, z0=2)
    cols = g.as_array().sum(axis=0)
    assert cols.tolist() == [0, 0, 4, 0, 0, 0, 4, 0]


def test_perfect_grating_tilted_line_count_per_row():
    g = perfect_grating(32, 32, d=4, theta=math.pi / 8)
    rows = g.as_array().sum(axis=1)
    # every row crosses the same number of lines, up to edge effects
    assert rows.min() >= 6 and rows.max() <= 9


# ---------------------------------------------------------------- transforms

def test_transpose_swaps_dims_and_cells():
    g = random_grid(4, 3, rho=0.5, seed=1)
    t = transpose_grid(g)
    assert (t.n, t.m) == (g.m, g.n)
    assert np.array_equal(t.as_array(), g.as_array().T)


def test_transpose_involution():
    g = random_grid(5, 4, rho=0.37, seed=9)
    assert transpose_grid(transpose_grid(g)) == g


def test_transpose_turns_vertical_into_horizontal():
    g = perfect_grating(16, 16, d=4, theta=0.0)
    t = transpose_grid(g)
    # column histogram of the original equals row histogram of transpose
    assert np.array_equal(g.as_array().sum(axis=0), t.as_array().sum(axis=1))


def test_point_list_all_white():
    g = CellGrid(n=2, m=2, cells=np.ones(16, dtype=np.uint8))
    assert point_list(g).tolist() == list(range(16))


def test_point_list_single_point():
    cells = np.zeros(16, dtype=np.uint8)
    cells[flatten(1, 1, 4, 4)] = 1
    g = CellGrid(n=2, m=2, cells=cells)
    assert point_list(g).tolist() == [5]


def test_point_list_counts_whites():
    g = random_grid(4, 4, rho=0.5, seed=2)
    assert len(point_list(g)) == g.white_count


def test_subgrid_whole_is_identity():
    g = random_grid(4, 4, rho=0.5, seed=3)
    assert subgrid(g, (0, 0, 16, 16)) == g


def test_subgrid_quadrants_partition_whites():
    g = random_grid(5, 5, rho=0.5, seed=4)
    quads = [
        subgrid(g, (0, 0, 16, 16)),
        subgrid(g, (16, 0, 16, 16)),
        subgrid(g, (0, 16, 16, 16)),
        subgrid(g, (16, 16, 16, 16)),
    ]
    assert sum(q.white_count for q in quads) == g.white_count


def test_subgrid_rejects_bad_regions():
    g = random_grid(4, 4, rho=0.5, seed=0)
    with pytest.raises(ValueError):
        subgrid(g, (0, 0, 12, 16))  # not a power of two
    with pytest.raises(ValueError):
        subgrid(g, (8, 0, 16, 16))  # overhangs the edge


# ---------------------------------------------------------------- files

def test_write_read_round_trip(tmp_path):
    g = random_grid(5, 3, rho=0.42, seed=17)
    path = tmp_path / "g.grid"
    write_grid(g, path)
    assert read_grid(path) == g


def test_write_read_round_trip_with_meta(tmp_path):
    g = random_grid(3, 3, rho=0.5, seed=1)
    path = tmp_path / "g.grid"
    write_grid(g, path, meta={"seed": 1, "note": "x"})
    text = path.read_text()
    assert text.splitlines()[1] == "# seed=1"
    assert read_grid(path) == g


def test_read_pads_non_power_of_two(tmp_path):
    path = tmp_path / "g.grid"
    path.write_text("P1-like: 3 2\n111\n101\n")
    g = read_grid(path)
    assert (g.n_cols, g.m_rows) == (4, 2)
    assert g.as_array().tolist() == [[1, 1, 1, 0], [1, 0, 1, 0]]


def test_read_rejects_bad_header(tmp_path):
    path = tmp_path / "g.grid"
    path.write_text("P2 4 4\n")
    with pytest.raises(ValueError, match="bad header"):
        read_grid(path)


def test_read_rejects_ragged_rows(tmp_path):
    path = tmp_path / "g.grid"
    path.write_text("P1-like: 4 2\n1010\n101\n")
    with pytest.raises(ValueError, match="bad grid row"):
        read_grid(path)


def test_read_rejects_missing_rows(tmp_path):
    path = tmp_path / "g.grid"
    path.write_text("P1-like: 4 2\n1010\n")
    with pytest.raises(ValueError, match="expected 2 rows"):
        read_grid(path)


@settings(max_examples=25, deadline=None)
@given(n=st.integers(0, 5), m=st.integers(0, 5), seed=st.integers(0, 999))
def test_round_trip_bit_exact(tmp_path_factory, n, m, seed):
    g = random_grid(n, m, rho=0.5, seed=seed)
    path = tmp_path_factory.mktemp("grids") / "g.grid"
    write_grid(g, path)
    assert read_grid(path) == g


def test_exact_half_helper():
    g = exact_half_grid(5, 5, seed=0)
    assert g.white_count == g.size // 2
