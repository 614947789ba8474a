"""Binary cell arrays and seeded generation of imperfect line patterns.

A grid is an N x M array of black/white cells (N = 2**n columns,
M = 2**m rows) stored flattened: cell (x, y) lives at index
z = x + N*y, with both registers little-endian (bit j weighs 2**j).
White cells are the "points"; their fraction is rho.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Generated grids larger than this are almost certainly a typo'd config.
MAX_QUBITS = 26


def _is_pow2(v: int) -> bool:
    return v >= 1 and (v & (v - 1)) == 0


def _next_pow2(v: int) -> int:
    return 1 if v <= 1 else 1 << (v - 1).bit_length()


def flatten(x, y, n_cols: int, m_rows: int):
    """Map cell coordinates to the flat index z = x + N*y.

    Accepts scalars or arrays; rejects out-of-range coordinates.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if np.any(x < 0) or np.any(x >= n_cols) or np.any(y < 0) or np.any(y >= m_rows):
        raise ValueError(f"coordinates out of range for {n_cols}x{m_rows} grid")
    z = x + n_cols * y
    return int(z) if z.ndim == 0 else z


def unflatten(z, n_cols: int, m_rows: int):
    """Inverse of flatten: z -> (x, y)."""
    z = np.asarray(z)
    if np.any(z < 0) or np.any(z >= n_cols * m_rows):
        raise ValueError(f"flat index out of range for {n_cols}x{m_rows} grid")
    x = z % n_cols
    y = z // n_cols
    if z.ndim == 0:
        return int(x), int(y)
    return x, y


@dataclass(frozen=True)
class CellGrid:
    """Immutable binary cell array with power-of-two dims.

    cells is a uint8 vector of length S = N*M indexed by z; a 1 is a
    white cell (a point).
    """

    n: int
    m: int
    cells: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.n < 0 or self.m < 0 or self.n + self.m > MAX_QUBITS:
            raise ValueError(f"unreasonable qubit counts n={self.n}, m={self.m}")
        cells = np.ascontiguousarray(self.cells, dtype=np.uint8)
        if cells.shape != (self.size,):
            raise ValueError(f"cells must be a flat vector of length {self.size}")
        if cells.max(initial=0) > 1:
            raise ValueError("cells must be 0/1 valued")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def n_cols(self) -> int:
        return 1 << self.n

    @property
    def m_rows(self) -> int:
        return 1 << self.m

    @property
    def size(self) -> int:
        """Total number of cells S = N*M = 2**(n+m)."""
        return 1 << (self.n + self.m)

    @property
    def qubits(self) -> int:
        """Coordinate register width s = n + m."""
        return self.n + self.m

    @property
    def white_count(self) -> int:
        return int(self.cells.sum())

    @property
    def rho(self) -> float:
        """Measured white-cell fraction, exactly white_count/S."""
        return self.white_count / self.size

    def as_array(self) -> np.ndarray:
        """Cells as an (M, N) array, rows = y, columns = x."""
        return self.cells.reshape(self.m_rows, self.n_cols)

    def __eq__(self, other):
        if not isinstance(other, CellGrid):
            return NotImplemented
        return self.n == other.n and self.m == other.m and bool(
            np.array_equal(self.cells, other.cells)
        )


@dataclass(frozen=True)
class BackgroundSpec:
    """Uniform random background: each cell white with probability rho."""

    rho: float
    seed: int

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")


@dataclass(frozen=True)
class LinePatternSpec:
    """Parallel-line pattern: spacing d, angle theta, confined to region.

    region is (x0, y0, w, h) in cells. Inside it, cells within
    line_width of a line center are white with probability
    rho + delta_rho; the remaining region cells are thinned so the
    region's expected density stays rho. z0 anchors the line family:
    column z0 % N in row 0 is a line center. line_width is a
    half-width; None means d/4 (lines of total width d/2).
    """

    d: float
    theta: float
    region: tuple[int, int, int, int]
    delta_rho: float
    z0: int = 0
    line_width: float | None = None

    def __post_init__(self):
        if self.d < 2.0:
            raise ValueError(f"line spacing d must be >= 2 cells, got {self.d}")
        if not abs(self.theta) < math.pi / 2:
            raise ValueError(
                "need |theta| < pi/2; for steeper lines transpose the grid"
            )
        if self.delta_rho < 0.0:
            raise ValueError("delta_rho must be >= 0")
        x0, y0, w, h = self.region
        if w <= 0 or h <= 0 or x0 < 0 or y0 < 0:
            raise ValueError(f"degenerate region {self.region}")
        if self.line_width is not None and self.line_width <= 0:
            raise ValueError("line_width must be positive")

    @property
    def half_width(self) -> float:
        return self.d / 4.0 if self.line_width is None else self.line_width


def _line_mask(pattern: LinePatternSpec, n_cols: int, m_rows: int) -> np.ndarray:
    """Boolean (M, N) array marking cells within half_width of a line center.

    Line centers in row y sit at x = (z0 % N) + tan(theta)*y + l*d/cos(theta)
    for integer l; membership uses the half-open band [c - w, c + w).
    """
    x0, y0, w, h = pattern.region
    if x0 + w > n_cols or y0 + h > m_rows:
        raise ValueError(
            f"region {pattern.region} exceeds {n_cols}x{m_rows} grid"
        )
    step = pattern.d / math.cos(pattern.theta)  # horizontal spacing between centers
    anchor = pattern.z0 % n_cols
    hw = pattern.half_width

    ys = np.arange(y0, y0 + h)
    xs = np.arange(x0, x0 + w)
    # offset of each cell from the nearest line center at or below it, in [0, step)
    offs = (xs[None, :] - anchor - math.tan(pattern.theta) * ys[:, None]) % step
    band = (offs < hw) | (offs >= step - hw)

    mask = np.zeros((m_rows, n_cols), dtype=bool)
    mask[y0 : y0 + h, x0 : x0 + w] = band
    return mask


def probability_field(
    width: int,
    height: int,
    background: BackgroundSpec,
    pattern: LinePatternSpec | None = None,
) -> np.ndarray:
    """Per-cell white probability on the enlarged power-of-two array.

    Background covers the whole array. Within the pattern region,
    on-line cells get rho + delta_rho and off-line cells the exactly
    compensated probability, so the region's expected density is rho
    and the whole grid's expected density is rho as well.
    """
    if width < 1 or height < 1:
        raise ValueError("grid dims must be positive")
    n_cols = _next_pow2(width)
    m_rows = _next_pow2(height)
    n = n_cols.bit_length() - 1
    m = m_rows.bit_length() - 1
    if n + m > MAX_QUBITS:
        raise ValueError(f"{n_cols}x{m_rows} grid exceeds {MAX_QUBITS}-qubit budget")

    probs = np.full((m_rows, n_cols), background.rho)
    if pattern is not None:
        if pattern.d > min(n_cols, m_rows):
            raise ValueError(
                f"spacing d={pattern.d} exceeds min(N, M)={min(n_cols, m_rows)}"
            )
        p_on = background.rho + pattern.delta_rho
        if p_on > 1.0:
            raise ValueError(f"rho + delta_rho = {p_on} exceeds 1")
        on = _line_mask(pattern, n_cols, m_rows)
        x0, y0, w, h = pattern.region
        region = np.zeros_like(on)
        region[y0 : y0 + h, x0 : x0 + w] = True
        w_frac = on.sum() / region.sum()
        if w_frac == 1.0:
            # region is all line; only consistent if there is nothing to compensate
            p_off = background.rho
            if pattern.delta_rho > 0:
                raise ValueError("lines cover the whole region; cannot compensate")
        else:
            p_off = (background.rho - w_frac * p_on) / (1.0 - w_frac)
        if not 0.0 <= p_off <= 1.0:
            raise ValueError(
                f"infeasible contrast: compensated off-line probability {p_off:.4f}"
            )
        probs[on] = p_on
        probs[region & ~on] = p_off
    return probs


def generate_grid(
    width: int,
    height: int,
    background: BackgroundSpec,
    pattern: LinePatternSpec | None = None,
) -> CellGrid:
    """Generate a seeded random grid, optionally with an imperfect line
    pattern, by sampling each cell against probability_field."""
    probs = probability_field(width, height, background, pattern)
    m_rows, n_cols = probs.shape
    n = n_cols.bit_length() - 1
    m = m_rows.bit_length() - 1
    rng = np.random.default_rng(background.seed)
    cells = (rng.random((m_rows, n_cols)) < probs).astype(np.uint8)
    return CellGrid(n=n, m=m, cells=cells.ravel())


def perfect_grating(
    width: int,
    height: int,
    d: float,
    theta: float = 0.0,
    z0: int = 0,
    line_width: float = 0.5,
) -> CellGrid:
    """Deterministic full-contrast grating: line cells white, rest black.

    line_width=0.5 with the half-open band keeps exactly the rounded
    center column of each line in every row.
    """
    n_cols = _next_pow2(width)
    m_rows = _next_pow2(height)
    pattern = LinePatternSpec(
        d=d,
        theta=theta,
        region=(0, 0, n_cols, m_rows),
        delta_rho=0.0,
        z0=z0,
        line_width=line_width,
    )
    mask = _line_mask(pattern, n_cols, m_rows)
    return CellGrid(
        n=n_cols.bit_length() - 1,
        m=m_rows.bit_length() - 1,
        cells=mask.ravel().astype(np.uint8),
    )


def transpose_grid(grid: CellGrid) -> CellGrid:
    """Swap axes: cell (x, y) -> (y, x), dims N x M -> M x N."""
    arr = grid.as_array().T  # now (N, M): rows = old columns
    return CellGrid(n=grid.m, m=grid.n, cells=arr.ravel())


def point_list(grid: CellGrid) -> np.ndarray:
    """Flat indices of all white cells, ascending."""
    return np.flatnonzero(grid.cells)


def subgrid(grid: CellGrid, region: tuple[int, int, int, int]) -> CellGrid:
    """Crop a power-of-two aligned region (x0, y0, w, h) into its own grid."""
    x0, y0, w, h = region
    if not (_is_pow2(w) and _is_pow2(h)):
        raise ValueError(f"subgrid dims must be powers of two, got {w}x{h}")
    if x0 < 0 or y0 < 0 or x0 + w > grid.n_cols or y0 + h > grid.m_rows:
        raise ValueError(f"region {region} out of bounds")
    arr = grid.as_array()[y0 : y0 + h, x0 : x0 + w]
    return CellGrid(n=w.bit_length() - 1, m=h.bit_length() - 1, cells=arr.ravel())


GRID_MAGIC = "P1-like:"


def write_grid(grid: CellGrid, path, meta: dict | None = None) -> None:
    """Write the text format: header "P1-like: N M", optional '# key=value'
    provenance lines, then M rows of N bits."""
    arr = grid.as_array()
    with open(path, "w") as fh:
        fh.write(f"{GRID_MAGIC} {grid.n_cols} {grid.m_rows}\n")
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        for row in arr:
            fh.write("".join("1" if v else "0" for v in row) + "\n")


def read_grid(path) -> CellGrid:
    """Read the text format; non-power-of-two dims are padded with black."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 3 or header[0] != GRID_MAGIC:
            raise ValueError(f"not a grid file: bad header in {path}")
        n_cols, m_rows = int(header[1]), int(header[2])
        rows = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if len(line) != n_cols or set(line) - {"0", "1"}:
                raise ValueError(f"bad grid row of length {len(line)} in {path}")
            rows.append([c == "1" for c in line])
    if len(rows) != m_rows:
        raise ValueError(f"expected {m_rows} rows, found {len(rows)} in {path}")
    arr = np.array(rows, dtype=np.uint8)
    pad_n = _next_pow2(n_cols)
    pad_m = _next_pow2(m_rows)
    if (pad_n, pad_m) != (n_cols, m_rows):
        padded = np.zeros((pad_m, pad_n), dtype=np.uint8)
        padded[:m_rows, :n_cols] = arr
        arr = padded
    return CellGrid(
        n=pad_n.bit_length() - 1, m=pad_m.bit_length() - 1, cells=arr.ravel()
    )
