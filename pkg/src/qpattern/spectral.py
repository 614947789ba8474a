"""Classical spectral reference: exact wave-number distributions and peak
predictions for line-pattern grids.

Everything here is independent of the gate-level simulator; it is both
the analysis oracle and the classical-complexity baseline.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CellGrid

TWO_PI = 2.0 * math.pi


def bit_reverse_indices(size: int) -> np.ndarray:
    """Permutation sending index i to its bit-reversed counterpart."""
    if size & (size - 1):
        raise ValueError(f"size must be a power of two, got {size}")
    bits = size.bit_length() - 1
    idx = np.arange(size)
    rev = np.zeros(size, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def radix2_dft(values: np.ndarray, sign: int = 1) -> tuple[np.ndarray, int]:
    """Iterative radix-2 transform F[k] = sum_z v[z] exp(sign*2*pi*i*zk/S).

    Returns (F, ops) where ops counts butterfly operations (one complex
    multiply plus two adds each): exactly (S/2)*log2(S).
    """
    x = np.asarray(values, dtype=complex)
    size = x.shape[0]
    if size & (size - 1):
        raise ValueError(f"length must be a power of two, got {size}")
    x = x[bit_reverse_indices(size)]
    ops = 0
    span = 2
    while span <= size:
        half = span // 2
        twiddle = np.exp(sign * 2j * np.pi * np.arange(half) / span)
        x = x.reshape(-1, span)
        t = x[:, half:] * twiddle
        x[:, half:] = x[:, :half] - t
        x[:, :half] += t
        ops += size // 2
        span *= 2
    return x.reshape(size), ops


@dataclass(frozen=True)
class Spectrum:
    """Exact wave-number distribution P(k), k = 0..S-1."""

    n: int
    m: int
    encoding: str
    probs: np.ndarray = field(repr=False)
    rho: float
    classical_ops: int

    @property
    def size(self) -> int:
        return 1 << (self.n + self.m)


def exact_distribution(grid: CellGrid, encoding: str = "amplitude") -> Spectrum:
    """Exact measurement distribution over wave numbers k.

    amplitude: P(k) = |sum_points exp(2pi*i*z*k/S)|^2 / (rho*S^2)
    phase:     P(k) = |sum_z (-1)^f(z) exp(2pi*i*z*k/S)|^2 / S^2
    """
    size = grid.size
    if encoding == "amplitude":
        if grid.white_count == 0:
            raise ValueError("amplitude encoding needs at least one white cell")
        transform, ops = radix2_dft(grid.cells.astype(float))
        probs = np.abs(transform) ** 2 / (grid.rho * size**2)
    elif encoding == "phase":
        signs = 1.0 - 2.0 * grid.cells.astype(float)  # (-1)^f(z)
        transform, ops = radix2_dft(signs)
        probs = np.abs(transform) ** 2 / size**2
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    return Spectrum(
        n=grid.n,
        m=grid.m,
        encoding=encoding,
        probs=probs,
        rho=grid.rho,
        classical_ops=ops,
    )


def noise_floor(size: int, rho: float | None = None) -> float:
    """Background mass per wave number, 1/S (independent of rho)."""
    return 1.0 / size


def laue(xi: float, kappa) -> np.ndarray | float:
    """Coherence envelope sin^2(pi*xi*kappa) / sin^2(pi*kappa).

    At integer kappa the limit xi^2 is returned. Both sine arguments are
    reduced to their nearest-integer residual first, which keeps the
    ratio stable arbitrarily close to the singular points.
    """
    kappa_arr = np.asarray(kappa, dtype=float)
    r_den = kappa_arr - np.round(kappa_arr)
    r_num = xi * kappa_arr - np.round(xi * kappa_arr)
    den = np.sin(np.pi * r_den) ** 2
    num = np.sin(np.pi * r_num) ** 2
    at_integer = np.abs(r_den) < 1e-12
    out = np.divide(num, den, out=np.full_like(kappa_arr, float(xi) ** 2),
                    where=~at_integer)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class PeakPrediction:
    """One predicted spectral peak (or allowed wave-number window)."""

    source: str        # "row" | "column" | "resonance"
    order: int         # the integer multiple behind this prediction
    k_center: float    # predicted wave number (may be fractional)
    width: float       # window half-width scale around k_center
    xi: float          # Laue sharpness parameter for this family
    kappa_per_k: float # multiply k by this to get the Laue argument kappa
    suppressed: bool = False


def predict_row_peaks(
    d: float, theta: float, n: int, m: int, chi: float
) -> list[PeakPrediction]:
    """Wave numbers favored by the per-row line positions.

    Centers at order*cos(theta)*S/d with width ~ M/(d*sqrt(chi)); the
    envelope is laue(N*sqrt(chi), k*d/(cos(theta)*S)).
    """
    _check_chi(chi)
    n_cols, m_rows = 1 << n, 1 << m
    size = n_cols * m_rows
    cos_t = math.cos(theta)
    count = max(int(d / cos_t) - 1, 0)
    width = m_rows / (d * math.sqrt(chi))
    xi = n_cols * math.sqrt(chi)
    return [
        PeakPrediction(
            source="row",
            order=order,
            k_center=order * cos_t * size / d,
            width=width,
            xi=xi,
            kappa_per_k=d / (cos_t * size),
        )
        for order in range(1, count + 1)
    ]


def predict_column_condition(
    theta: float, n: int, m: int, chi: float
) -> list[PeakPrediction]:
    """Wave numbers compatible with the row-to-row phase alignment.

    Centers at order*(N - tan(theta))/N * M with width ~ 1/sqrt(chi);
    envelope laue(M*sqrt(chi), k*(N + tan(theta))/S).
    """
    _check_chi(chi)
    n_cols, m_rows = 1 << n, 1 << m
    size = n_cols * m_rows
    tan_t = math.tan(theta)
    step = (n_cols - tan_t) / n_cols * m_rows
    preds = []
    order = 1
    while step > 0 and order * step < size:
        preds.append(
            PeakPrediction(
                source="column",
                order=order,
                k_center=order * step,
                width=1.0 / math.sqrt(chi),
                xi=m_rows * math.sqrt(chi),
                kappa_per_k=(n_cols + tan_t) / size,
            )
        )
        order += 1
    return preds


def predict_resonances(
    d: float,
    theta: float,
    n: int,
    m: int,
    chi: float,
    transposed: bool = False,
) -> list[PeakPrediction]:
    """Joint predictions: where row and column conditions meet.

    Original run: centers at order*(cos(theta)*S/d - sin(theta)*M/d).
    Transposed run: order*(sin(theta)*S/d - cos(theta)*N/d), i.e. the
    same line family seen at angle pi/2 - theta.

    An order is marked suppressed when order*cos(theta)*N/d misses an
    integer by more than 1/(d*sqrt(chi)) (transposed: the analogous
    order*sin(theta)*M/d test), meaning the two conditions cannot be met
    simultaneously and the peak loses its weight.
    """
    _check_chi(chi)
    n_cols, m_rows = 1 << n, 1 << m
    size = n_cols * m_rows
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    if transposed:
        fundamental = sin_t * size / d - cos_t * n_cols / d
        align_step = abs(sin_t) * m_rows / d
        direction = abs(sin_t)
    else:
        fundamental = cos_t * size / d - sin_t * m_rows / d
        align_step = cos_t * n_cols / d
        direction = cos_t
    if fundamental == 0.0:
        return []
    # physical order cap ~ d/|cos| lines resolved; degenerate angles fall
    # back to the lattice cap |fundamental*order| < S
    if direction > 1e-9:
        count = max(int(d / direction) - 1, 0)
    else:
        count = max(int(size / abs(fundamental)) - 1, 0)
    tol = 1.0 / (d * math.sqrt(chi))
    # peaks land on the nearest cross-scan lattice point, not on the
    # continuous center, so tilted patterns need a lattice-step margin
    if transposed:
        cross = abs(m_rows - cos_t / sin_t) * n_cols / m_rows if sin_t else -1.0
    else:
        cross = abs(n_cols - math.tan(theta)) * m_rows / n_cols
    m_axis = n_cols if transposed else m_rows
    tilted = abs(math.tan(theta)) > 1e-12 if not transposed else abs(theta - math.pi / 2) > 1e-12
    lattice_margin = cross if (tilted and 0.0 < cross <= 2.0 * m_axis) else 0.0
    width = m_axis / (d * math.sqrt(chi)) + lattice_margin + 2.0
    kappa_per_k = d / (size * direction) if direction > 1e-9 else 0.0
    # tilted patterns also radiate wrap sidebands: the pattern phase does
    # not close around the torus, shifting weight by whole cross-scan
    # periods (one row of wave number = N for the original orientation)
    wrap_step = m_rows if transposed else n_cols
    wraps = (0, -1, 1, -2, 2) if lattice_margin > 0.0 else (0,)
    preds = []
    for order in range(1, count + 1):
        align = order * align_step
        suppressed = abs(align - round(align)) > tol
        centers = {
            (sgn * order * fundamental + j * wrap_step) % size
            for sgn in (1, -1)  # real input: every order has its mirror
            for j in wraps
        }
        for center in sorted(centers):
            preds.append(
                PeakPrediction(
                    source="resonance",
                    order=order,
                    k_center=center,
                    width=width,
                    xi=n_cols * math.sqrt(chi),
                    kappa_per_k=kappa_per_k,
                    suppressed=suppressed,
                )
            )
    return preds


def peak_probability_estimate(rho: float, delta_rho: float, chi: float) -> float:
    """Expected single-run probability scale of a pattern peak: (chi*delta_rho)^2/rho."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return (chi * delta_rho) ** 2 / rho


def _check_chi(chi: float) -> None:
    if not 0.0 < chi <= 1.0:
        raise ValueError(f"chi must lie in (0, 1], got {chi}")


def write_spectrum_csv(spectrum: Spectrum, path, meta: dict | None = None) -> None:
    """CSV of (k, P(k)) with '# key=value' provenance header lines."""
    with open(path, "w") as fh:
        for key, value in (meta or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(f"# encoding={spectrum.encoding}\n")
        fh.write(f"# n={spectrum.n} m={spectrum.m} rho={spectrum.rho!r}\n")
        fh.write("k,prob\n")
        for k, p in enumerate(spectrum.probs):
            fh.write(f"{k},{float(p)!r}\n")


def predictions_json(preds: list[PeakPrediction]) -> str:
    """Peak predictions as a JSON array of records."""
    records = [
        {
            "source": p.source,
            "order": p.order,
            "k_center": p.k_center,
            "width": p.width,
            "xi": p.xi,
            "kappa_per_k": p.kappa_per_k,
            "suppressed": p.suppressed,
        }
        for p in preds
    ]
    return json.dumps(records, indent=2)
