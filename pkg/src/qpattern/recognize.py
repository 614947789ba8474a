"""Turning spectra or measured wave numbers into pattern statements:
peak clusters, common spacing, (D, theta, chi) estimates, presence
decisions, and pattern localisation by subdivision.

Peak structure of an imperfect grating has two scales. Fine spikes sit
on the column lattice with step (N - tan(theta))*M/N (step parity is
odd in theta, which is what breaks the theta <-> -theta mirror
ambiguity), while the row-window envelope groups those spikes into
blobs centred at integer multiples of the fundamental spacing. Blobs
carry the D information, the lattice carries theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CellGrid, subgrid
from .qsim import MeasurementSample, run_pipeline, samples_to_array
from .spectral import Spectrum, exact_distribution, noise_floor

FINE_GAP = 2  # hot bins closer than this merge into one spike


class InconsistentPeaksError(RuntimeError):
    """Peaks admit no common spacing within tolerance."""


@dataclass(frozen=True)
class DetectionPolicy:
    """Thresholds for calling spectral weight a peak.

    tau scales the oracle-mode threshold above the 1/S noise floor.
    Sample mode flags bins well above the observed rate
    (candidate_factor times it) and keeps blobs whose strongest spike
    beats both c_min and a family-wise negative-binomial bound at level
    alpha. gap=None means the row-window width scale
    ceil(M/(2*sqrt(chi_target))) resolved against the grid's row count.
    """

    tau: float = 16.0
    gap: int | None = None
    chi_target: float = 1.0 / 16.0
    c_min: int = 2
    candidate_factor: float = 4.0
    alpha: float = 0.01

    def resolved_gap(self, m_rows: int) -> int:
        if self.gap is not None:
            if self.gap < 1:
                raise ValueError("gap must be >= 1")
            return self.gap
        return max(1, math.ceil(m_rows / (2.0 * math.sqrt(self.chi_target))))

    def spacing_tolerance(self) -> float:
        """Default matching tolerance for spacing extraction."""
        return max(1.0, 1.0 / (2.0 * math.sqrt(self.chi_target)))


@dataclass(frozen=True)
class PeakCluster:
    """A blob of elevated wave numbers: fine spikes grouped by the
    row-window scale."""

    k_low: int
    k_high: int
    sample_count: int
    weighted_center: float
    mass: float  # probability mass (oracle) or sample fraction (sample mode)
    spikes: tuple[tuple[float, float], ...] = ()  # (center, mass) per fine spike

    @property
    def dominant_spike(self) -> float:
        if not self.spikes:
            return self.weighted_center
        return max(self.spikes, key=lambda s: s[1])[0]


@dataclass(frozen=True)
class PeakReport:
    clusters: tuple[PeakCluster, ...]
    total_shots: int
    excluded_k0: bool
    size: int
    mode: str  # "oracle" | "sample"

    @property
    def centers(self) -> np.ndarray:
        return np.array([c.weighted_center for c in self.clusters])

    @property
    def peak_mass(self) -> float:
        return float(sum(c.mass for c in self.clusters))


def _cluster_ranges(ks: np.ndarray, gap: int) -> list[tuple[int, int]]:
    """Group sorted wave numbers; a break opens where neighbours are
    gap or more apart."""
    if ks.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(ks) >= gap)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks, [ks.size - 1]))
    return [(int(ks[a]), int(ks[b])) for a, b in zip(starts, ends)]


def _nb_tail(c: float, r: int, q: float) -> float:
    """P(X >= c) for X = sum of r geometric(q) failure counts.

    Sampling a realized spectrum makes null bin counts geometric, not
    Poisson: count ~ Poisson(shots * P(k)) where P(k) is itself
    exponentially distributed over bins, and the mixture has the
    heavier q^c tail. r bins in a run add r such variables.
    """
    if q <= 0.0:
        return 0.0 if c > 0 else 1.0
    c_int = max(int(math.ceil(c)), 0)
    if c_int == 0:
        return 1.0
    pmf = (1.0 - q) ** r
    cdf = pmf
    for j in range(1, c_int):
        pmf *= q * (j + r - 1) / j
        cdf += pmf
        if pmf < 1e-300 and j > r:
            break
    return max(1.0 - cdf, 0.0)


def _window_excess(
    counts: np.ndarray,
    members: list[tuple[int, int, float, float]],
    q: float,
    size: int,
    alpha: float,
) -> bool:
    """Second-chance test for peaks spread over several weak spikes.

    Sums every bin across the blob's span (plus the fine-gap padding)
    and asks whether that total beats the null for a window of that
    width, familywise over all window positions. A lone hot bin never
    enters: it must not get a second test the spike floor rejected.
    """
    if len(members) < 2:
        return False
    lo = max(members[0][0] - FINE_GAP, 1)
    hi = min(members[-1][1] + FINE_GAP, size - 1)
    span = hi - lo + 1
    total = float(counts[lo : hi + 1].sum())
    return (size - 1) * _nb_tail(total, span, q) <= alpha


def _nb_min_count(rate: float, r: int, n_tests: int, alpha: float) -> int:
    """Smallest c with n_tests * P(NB(r, q) >= c) <= alpha, q = rate/(1+rate)."""
    if rate <= 0.0:
        return 1
    q = rate / (1.0 + rate)
    bound = alpha / max(n_tests, 1)
    pmf = (1.0 - q) ** r
    tail = 1.0 - pmf
    c = 1
    while tail > bound and c < 100_000:
        pmf *= q * (c + r - 1) / c
        tail -= pmf
        tail = max(tail, 0.0)
        c += 1
    return c


def _spikes_in_range(
    hot: np.ndarray, weight: np.ndarray, k_low: int, k_high: int
) -> list[tuple[int, int, float, float]]:
    """Fine spikes (lo, hi, center, weight) inside one index range."""
    inside = hot[(hot >= k_low) & (hot <= k_high)]
    out = []
    for lo, hi in _cluster_ranges(inside, FINE_GAP):
        w = weight[lo : hi + 1]
        ks = np.arange(lo, hi + 1)
        total = float(w.sum())
        out.append((lo, hi, float((ks * w).sum() / total), total))
    return out


def _blobs_from_hot(
    hot: np.ndarray, weight: np.ndarray, blob_gap: int
) -> list[tuple[int, int, list[tuple[int, int, float, float]]]]:
    """Two-level grouping: fine spikes first, then blobs of spikes whose
    edge distance is below blob_gap."""
    spikes = _spikes_in_range(hot, weight, int(hot[0]), int(hot[-1])) if hot.size else []
    blobs: list[tuple[int, int, list]] = []
    for spk in spikes:
        if blobs and spk[0] - blobs[-1][1] < blob_gap:
            lo, _, members = blobs[-1]
            members.append(spk)
            blobs[-1] = (lo, spk[1], members)
        else:
            blobs.append((spk[0], spk[1], [spk]))
    return blobs


def detect_peaks(
    data: Spectrum | list[MeasurementSample] | np.ndarray,
    policy: DetectionPolicy | None = None,
    size: int | None = None,
    m_rows: int | None = None,
) -> PeakReport:
    """Find peak blobs in an exact spectrum or in measured samples.

    Oracle mode (Spectrum input): bins with P(k) > tau/S, k=0 excluded.
    Sample mode: per-bin candidates above candidate_factor times the
    observed background rate, grouped into spikes and blobs; a blob is
    kept when its strongest spike beats a familywise negative-binomial
    floor, or when its whole span carries a familywise-significant
    count excess. Sample mode needs size; m_rows defaults to the
    square-grid value when the default gap has to be resolved.
    """
    policy = policy or DetectionPolicy()

    if isinstance(data, Spectrum):
        probs = data.probs
        s_size = data.size
        gap = policy.resolved_gap(1 << data.m)
        threshold = policy.tau * noise_floor(s_size)
        hot = np.flatnonzero(probs > threshold)
        excluded_k0 = bool(hot.size and hot[0] == 0)
        hot = hot[hot != 0]
        clusters = []
        for k_low, k_high, members in _blobs_from_hot(hot, probs, gap):
            mass = sum(m[3] for m in members)
            center = sum(m[2] * m[3] for m in members) / mass
            clusters.append(
                PeakCluster(
                    k_low=k_low,
                    k_high=k_high,
                    sample_count=0,
                    weighted_center=center,
                    mass=mass,
                    spikes=tuple((m[2], m[3]) for m in members),
                )
            )
        return PeakReport(
            clusters=tuple(clusters),
            total_shots=0,
            excluded_k0=excluded_k0,
            size=s_size,
            mode="oracle",
        )

    ks = data if isinstance(data, np.ndarray) else samples_to_array(data)
    if size is None:
        raise ValueError("sample-mode detection needs the spectrum size")
    if ks.size == 0:
        raise ValueError("empty sample set")
    if m_rows is None:
        m_rows = 1 << (max(size - 1, 1).bit_length() // 2)
    gap = policy.resolved_gap(m_rows)
    total = int(ks.size)
    excluded_k0 = bool(np.any(ks == 0))
    ks = ks[ks != 0]
    counts = np.bincount(ks, minlength=size).astype(float)
    rate = ks.size / (size - 1)  # self-calibrated background rate per bin
    q = rate / (1.0 + rate)
    cand_level = max(1.0, policy.candidate_factor * rate)
    hot = np.flatnonzero(counts >= cand_level)
    # null spikes are short runs of geometric counts; r=3 covers them
    spike_floor = max(
        policy.c_min,
        _nb_min_count(rate, 3, size - 1, policy.alpha),
    )
    clusters = []
    for k_low, k_high, members in _blobs_from_hot(hot, counts, gap):
        strongest = max(m[3] for m in members)
        if strongest < spike_floor and not _window_excess(
            counts, members, q, size, policy.alpha
        ):
            continue
        count = int(sum(m[3] for m in members))
        center = sum(m[2] * m[3] for m in members) / count
        clusters.append(
            PeakCluster(
                k_low=k_low,
                k_high=k_high,
                sample_count=count,
                weighted_center=center,
                mass=count / total if total else 0.0,
                spikes=tuple((m[2], m[3]) for m in members),
            )
        )
    return PeakReport(
        clusters=tuple(clusters),
        total_shots=total,
        excluded_k0=excluded_k0,
        size=size,
        mode="sample",
    )


# -- spacing extraction ------------------------------------------------------

def _lattice_distance(center: float, spacing: float, size: int) -> tuple[float, float, int]:
    """Distance from center to the nearest multiple of spacing, mirror-aware.

    Real-valued grids have symmetric spectra, so a peak at k may be the
    mirror of a lattice point near size - k. Returns (distance,
    unwrapped value, order) for the better match.
    """
    best = None
    for x in (center, size - center):
        order = round(x / spacing)
        dist = abs(x - order * spacing)
        if best is None or dist < best[0]:
            best = (dist, x, int(order))
    return best


def common_spacing(
    report: PeakReport,
    tolerance: float | None = None,
    chi_target: float = 1.0 / 16.0,
) -> float:
    """Largest spacing whose integer multiples explain every peak center.

    Candidates are divisors of the smallest center and of the pairwise
    center gaps; each candidate is checked mirror-aware against all
    centers and refined by least squares before acceptance. Raises
    InconsistentPeaksError if nothing within tolerance explains the
    peaks.
    """
    if not report.clusters:
        raise InconsistentPeaksError("no peaks to extract a spacing from")
    if tolerance is None:
        tolerance = max(1.0, 1.0 / (2.0 * math.sqrt(chi_target)))
    centers = np.sort(report.centers)
    size = report.size

    floor_spacing = max(2.0 * tolerance, 2.0)
    bases = {float(centers[0])}
    for i in range(len(centers)):
        for j in range(i + 1, len(centers)):
            gap_val = float(centers[j] - centers[i])
            if gap_val > floor_spacing / 2:
                bases.add(gap_val)

    candidates = set()
    for base in bases:
        q = 1
        while base / q >= floor_spacing:
            value = base / q
            if value <= size / 2 + tolerance:
                candidates.add(round(value, 6))
            q += 1

    for candidate in sorted(candidates, reverse=True):
        matches = [_lattice_distance(c, candidate, size) for c in centers]
        if any(dist > tolerance for dist, _, _ in matches):
            continue
        xs = np.array([x for _, x, _ in matches])
        orders = np.array([o for _, _, o in matches], dtype=float)
        if np.any(orders < 1):
            continue
        refined = float((xs * orders).sum() / (orders**2).sum())
        if refined < floor_spacing:
            continue
        final = [_lattice_distance(c, refined, size) for c in centers]
        if all(dist <= tolerance for dist, _, _ in final):
            return refined
    raise InconsistentPeaksError(
        f"no spacing within tolerance {tolerance} explains {len(centers)} peaks"
    )


# -- parameter estimation ----------------------------------------------------

@dataclass(frozen=True)
class PatternEstimate:
    """Recovered line-pattern parameters from the dual (original +
    transposed) runs. candidates holds scored alternatives; ambiguous
    flags a near-tie between geometrically distinct hypotheses."""

    d_hat: float
    theta_hat: float
    delta_k: float
    delta_k_transposed: float
    uncertainty_d: float
    uncertainty_theta: float
    confidence: float
    candidates: tuple[tuple[float, float, float], ...]  # (d, theta, score)
    ambiguous: bool
    chi_hat: float | None = None


def _folded_spikes(report: PeakReport) -> list[tuple[float, float]]:
    """All fine spikes folded onto (0, S/2], mirror pairs merged."""
    size = report.size
    raw = []
    for cluster in report.clusters:
        spikes = cluster.spikes or ((cluster.weighted_center, cluster.mass),)
        for center, mass in spikes:
            folded = min(center, size - center)
            if folded > 0:
                raw.append((folded, mass))
    raw.sort()
    merged: list[tuple[float, float]] = []
    for k, mass in raw:
        if merged and k - merged[-1][0] < FINE_GAP:
            k0, m0 = merged[-1]
            merged[-1] = ((k0 * m0 + k * mass) / (m0 + mass), m0 + mass)
        else:
            merged.append((k, mass))
    return merged


def _fit_column_lattice(
    spikes: list[tuple[float, float]], n_axis: int, m_axis: int
) -> tuple[float, float, float, int] | None:
    """Fit spikes to the lattice q*col, col = (n_axis - tan)*m_axis/n_axis.

    Returns (tan, col, residual_rms, q_max) for the best anchor, or
    None when no assignment explains at least 70% of the spike mass.
    A fit pinned to near-DC spikes (q=0) cannot be a column lattice
    and is rejected by the residual test.
    """
    if not spikes:
        return None
    best = None
    for anchor_k, _ in spikes:
        q0 = round(anchor_k / m_axis)
        if q0 < 1:
            continue
        col = anchor_k / q0
        if not 0.5 * m_axis <= col <= 1.5 * m_axis:
            continue
        for _ in range(3):
            num = den = 0.0
            for k, w in spikes:
                q = round(k / col)
                if q >= 1:
                    num += w * q * k
                    den += w * q * q
            if den == 0.0:
                break
            col = num / den
        if den == 0.0:
            continue
        tol = max(2.5, col / 32.0)
        total = explained = sq = 0.0
        q_max = 0
        for k, w in spikes:
            q = round(k / col)
            r = abs(k - q * col)
            total += w
            sq += w * r * r
            if q >= 1 and r <= tol:
                explained += w
                q_max = max(q_max, q)
        if explained < 0.7 * total:
            continue
        rms = math.sqrt(sq / total)
        tan = n_axis * (1.0 - col / m_axis)
        if abs(tan) > n_axis / 2:
            continue
        cand = (rms, -explained, tan, col, q_max)
        if best is None or cand < best:
            best = cand
    if best is None:
        return None
    rms, neg_expl, tan, col, q_max = best
    return tan, col, rms, q_max


def _fundamental(d: float, theta: float, n_cols: int, m_rows: int,
                 transposed: bool) -> float:
    """|k| spacing of resonance orders for one run of the dual pair."""
    size = n_cols * m_rows
    if transposed:
        return abs(math.sin(theta) * size - math.cos(theta) * n_cols) / d
    return abs(math.cos(theta) * size - math.sin(theta) * m_rows) / d


def _column_step(theta: float, n_cols: int, m_rows: int, transposed: bool) -> float:
    """Lattice step of the fine spikes for one run; <=0 means degenerate
    (lines parallel to the scan direction, no lattice)."""
    if transposed:
        t = math.tan(math.pi / 2.0 - theta) if theta != 0.0 else math.inf
        return (m_rows - t) * n_cols / m_rows if math.isfinite(t) else -1.0
    return (n_cols - math.tan(theta)) * m_rows / n_cols


def _allowed_distance(
    k: float, d: float, theta: float, n_cols: int, m_rows: int,
    chi: float, transposed: bool,
) -> float:
    """Distance from folded spike k to the nearest wave number the
    hypothesis (d, theta) allows: column-lattice points inside the
    row-window envelope around each resonance order."""
    size = n_cols * m_rows
    f = _fundamental(d, theta, n_cols, m_rows, transposed)
    if f < 1.0:
        return math.inf
    m_axis = n_cols if transposed else m_rows
    env = m_axis / (d * math.sqrt(chi))
    col = _column_step(theta, n_cols, m_rows, transposed)
    half = size / 2.0
    n_max = min(int(half / f) + 2, 16)
    best = math.inf
    for order in range(1, n_max + 1):
        center = order * f
        center = min(center % size, (size - center) % size)  # fold
        if 0.1 * m_axis <= col <= 2.0 * m_axis:
            w_q = max(1.0, env / col)
            q_lo = max(1, math.ceil(center / col - w_q))
            q_hi = math.floor(center / col + w_q)
            for q in range(q_lo, q_hi + 1):
                pos = q * col
                pos = min(pos, size - pos)
                best = min(best, abs(k - pos))
        else:
            # degenerate lattice: pure harmonic positions
            best = min(best, abs(k - center))
    return best


def _score_hypothesis(
    d: float, theta: float,
    spikes_o: list[tuple[float, float]],
    spikes_t: list[tuple[float, float]],
    n_cols: int, m_rows: int, chi: float,
) -> float:
    """Mass-weighted agreement between (d, theta) and both runs' spikes.

    Explained fraction of spike mass plus a coverage term requiring
    the fundamental's window to actually hold mass (this is what
    separates d from its harmonics 2d, 3d, ...).
    """
    score = 0.0
    for spikes, transposed in ((spikes_o, False), (spikes_t, True)):
        if not spikes:
            continue
        col = _column_step(theta, n_cols, m_rows, transposed)
        tol = max(3.0, col * 0.05) if col > 0 else 3.0
        f = _fundamental(d, theta, n_cols, m_rows, transposed)
        m_axis = n_cols if transposed else m_rows
        env = m_axis / (d * math.sqrt(chi)) + max(col, 0.0) / 2.0 + tol
        total = sum(w for _, w in spikes)
        explained = 0.0
        fundamental_mass = 0.0
        for k, w in spikes:
            if _allowed_distance(k, d, theta, n_cols, m_rows, chi, transposed) <= tol:
                explained += w
            size = n_cols * m_rows
            f_folded = min(f % size, (size - f) % size)
            if abs(k - f_folded) <= env:
                fundamental_mass += w
        score += explained / total
        score += 0.3 if fundamental_mass >= 0.05 * total else -0.3
    return score


def _solve_pair(
    f_orig: float, f_trans: float, n_cols: int, m_rows: int
) -> tuple[float, float] | None:
    """Invert the two fundamental-spacing equations for (d, theta).

    f_orig = a*S - b*M and f_trans = b*S - a*N with a = cos(theta)/d,
    b = sin(theta)/d.
    """
    size = n_cols * m_rows
    det = size**2 - n_cols * m_rows  # = S(S-1)
    a = (size * f_orig + m_rows * f_trans) / det
    b = (n_cols * f_orig + size * f_trans) / det
    if a <= 0.0:
        return None
    d = 1.0 / math.hypot(a, b)
    theta = math.atan2(b, a)
    if not 2.0 <= d <= min(n_cols, m_rows) * 1.25:
        return None
    return d, theta


def estimate_parameters(
    report: PeakReport,
    report_transposed: PeakReport,
    n: int,
    m: int,
    tolerance: float | None = None,
    chi_hint: float = 1.0 / 16.0,
) -> PatternEstimate:
    """Recover (D, theta) from the original and transposed peak reports.

    theta comes primarily from the column-lattice fit of the fine
    spikes (its step is odd in theta, so the sign is direct); D comes
    from matching blob centers to resonance orders of the fundamental.
    All hypotheses, including the classic two-spacing inversion with
    both transposed signs, are scored against the full spike pattern;
    a near-tie between distinct survivors is flagged ambiguous.
    """
    if not report.clusters or not report_transposed.clusters:
        raise ValueError("parameter estimation needs peaks from both runs")
    n_cols, m_rows = 1 << n, 1 << m
    size = n_cols * m_rows
    if report.size != size:
        raise ValueError("report size does not match the stated dims")

    spikes_o = _folded_spikes(report)
    spikes_t = _folded_spikes(report_transposed)

    fit_o = _fit_column_lattice(spikes_o, n_cols, m_rows)
    fit_t = _fit_column_lattice(spikes_t, m_rows, n_cols)
    theta_fits = []
    if fit_o is not None:
        theta_fits.append(math.atan(fit_o[0]))
    if fit_t is not None and abs(fit_t[0]) > 0.05:
        theta_fits.append(math.atan(1.0 / fit_t[0]))

    def blob_centers(rep: PeakReport) -> list[float]:
        ranked = sorted(rep.clusters, key=lambda c: -c.mass)[:2]
        vals = []
        for c in ranked:
            for v in (c.dominant_spike, c.weighted_center):
                folded = min(v, rep.size - v)
                if folded >= 2.0 and not any(abs(folded - u) < 1.0 for u in vals):
                    vals.append(folded)
        return vals

    centers_o = blob_centers(report)
    centers_t = blob_centers(report_transposed)

    # candidate hypotheses: (d, theta, source run, source spacing, order)
    raw: list[tuple[float, float, bool, float, int]] = []
    d_cap = min(n_cols, m_rows) * 1.25
    for theta_c in theta_fits:
        for transposed, centers in ((False, centers_o), (True, centers_t)):
            f_unit = _fundamental(1.0, theta_c, n_cols, m_rows, transposed)
            for dk in centers:
                for order in (1, 2, 3):
                    d_c = order * f_unit / dk
                    if 2.0 <= d_c <= d_cap:
                        raw.append((d_c, theta_c, transposed, dk, order))
    for dk_o in centers_o:
        for dk_t in centers_t:
            for sign in (1.0, -1.0):
                solved = _solve_pair(dk_o, sign * dk_t, n_cols, m_rows)
                if solved is not None:
                    raw.append((solved[0], solved[1], False, dk_o, 1))

    if not raw:
        raise InconsistentPeaksError(
            "no hypothesis is geometrically consistent with the peak reports"
        )

    seen: dict[tuple[float, float], tuple[float, float, bool, float, int]] = {}
    for cand in raw:
        key = (round(math.log(cand[0]), 2), round(cand[1], 2))
        seen.setdefault(key, cand)

    # ties resolve toward the best-constrained hypothesis: fundamental
    # order, original run, largest source spacing
    scored = sorted(
        (
            (
                _score_hypothesis(d_c, th_c, spikes_o, spikes_t, n_cols, m_rows, chi_hint),
                d_c, th_c, transposed, dk, order,
            )
            for d_c, th_c, transposed, dk, order in seen.values()
        ),
        key=lambda t: (-t[0], t[5], t[3], -t[4]),
    )
    best_score, d_best, theta_best, src_t, src_dk, src_order = scored[0]
    ambiguous = any(
        s >= best_score - 0.05
        and (abs(th - theta_best) > 0.1 or abs(math.log(dc / d_best)) > 0.1)
        for s, dc, th, *_ in scored[1:]
    )

    # refinement: the lattice fit pins theta more sharply than the solve
    theta_hat = theta_best
    if fit_o is not None:
        theta_fit = math.atan(fit_o[0])
        if abs(theta_fit - theta_best) <= 0.15:
            theta_hat = theta_fit
    d_hat = d_best
    f_unit = _fundamental(1.0, theta_hat, n_cols, m_rows, src_t)
    refined = src_order * f_unit / src_dk
    if 2.0 <= refined <= d_cap:
        d_hat = refined

    if tolerance is None:
        tolerance = DetectionPolicy().spacing_tolerance()
    col_hat = max(_column_step(theta_hat, n_cols, m_rows, False), 1.0)
    if fit_o is not None:
        d_tan = max(2.5, fit_o[1] / 32.0) / max(fit_o[3], 1) * n_cols / m_rows
        unc_theta = d_tan * math.cos(theta_hat) ** 2
    else:
        unc_theta = (tolerance + 2.0) / max(src_dk, 1.0)
    unc_d = d_hat * (col_hat / 2.0 + tolerance) / max(src_dk, 1.0)

    dominant_o = max(report.clusters, key=lambda c: c.mass)
    dominant_t = max(report_transposed.clusters, key=lambda c: c.mass)
    return PatternEstimate(
        d_hat=d_hat,
        theta_hat=theta_hat,
        delta_k=float(dominant_o.weighted_center),
        delta_k_transposed=float(dominant_t.weighted_center),
        uncertainty_d=unc_d,
        uncertainty_theta=unc_theta,
        confidence=best_score,
        candidates=tuple((dc, th, s) for s, dc, th, *_ in scored[:5]),
        ambiguous=ambiguous,
    )


# -- pattern fraction and presence -------------------------------------------

@dataclass(frozen=True)
class ChiEstimate:
    """Pattern-fraction estimate; label says what value actually is."""

    value: float
    label: str  # "chi" | "chi_times_delta_rho" | "chi_min_upper_bound" | "no_peaks"
    p_hat: float
    calibration: float
    chi_min: float


def estimate_chi(
    report: PeakReport,
    rho: float,
    delta_rho: float | None = None,
    calibration: float = 1.0,
) -> ChiEstimate:
    """Invert the peak-probability relation p = calibration*(chi*delta_rho)^2/rho.

    With unknown delta_rho only the product chi*delta_rho is
    identifiable and is returned labeled as such. With no peak mass at
    all, only the sampling resolution bound chi_min = 1/sqrt(shots) can
    be stated.
    """
    if rho <= 0.0:
        raise ValueError("rho must be positive")
    p_hat = report.peak_mass
    chi_min = 1.0 / math.sqrt(report.total_shots) if report.total_shots else 0.0
    if p_hat <= 0.0:
        if report.mode == "sample" and report.total_shots:
            return ChiEstimate(
                value=chi_min,
                label="chi_min_upper_bound",
                p_hat=0.0,
                calibration=calibration,
                chi_min=chi_min,
            )
        return ChiEstimate(
            value=0.0, label="no_peaks", p_hat=0.0, calibration=calibration,
            chi_min=chi_min,
        )
    product = math.sqrt(p_hat * rho / calibration)
    if delta_rho is None:
        return ChiEstimate(
            value=product,
            label="chi_times_delta_rho",
            p_hat=p_hat,
            calibration=calibration,
            chi_min=chi_min,
        )
    return ChiEstimate(
        value=product / delta_rho,
        label="chi",
        p_hat=p_hat,
        calibration=calibration,
        chi_min=chi_min,
    )


def decide_pattern_present(
    samples: list[MeasurementSample] | np.ndarray,
    size: int,
    policy: DetectionPolicy | None = None,
    omega: int | None = None,
    m_rows: int | None = None,
) -> tuple[bool, float]:
    """Is any pattern present? Returns (present, chi_min).

    present means at least one non-k0 peak blob survived the
    thresholds; chi_min = 1/sqrt(omega) is the smallest pattern
    fraction the sample budget could have resolved. The decision uses
    sample fractions, so adding draws from the same distribution does
    not flip it while the clusters stand.
    """
    ks = samples if isinstance(samples, np.ndarray) else samples_to_array(samples)
    omega = int(ks.size) if omega is None else omega
    if omega <= 0:
        raise ValueError("need at least one sample")
    report = detect_peaks(ks, policy, size=size, m_rows=m_rows)
    chi_min = 1.0 / math.sqrt(omega)
    return bool(report.clusters), chi_min


# -- localisation ------------------------------------------------------------

@dataclass(frozen=True)
class LocaliseReport:
    """Regions (x0, y0, w, h) retaining peak evidence after subdivision."""

    regions: tuple[tuple[int, int, int, int], ...]
    queries_used: int
    budget: int | None
    complete: bool
    evaluations: int


def localise(
    grid_obj: CellGrid,
    chi_target: float,
    budget: int | None = None,
    policy: DetectionPolicy | None = None,
    mode: str = "oracle",
    shots: int = 4096,
    rng: np.random.Generator | None = None,
    encoding: str = "amplitude",
) -> LocaliseReport:
    """Narrow the pattern down by recursive power-of-two subdivision.

    Subgrids keep halving while they show peak evidence, stopping at
    the chi_target scale. A parent whose children all lose the evidence
    is kept whole (the pattern straddles the cut). Query accounting:
    oracle mode charges one query per subgrid evaluation, sample mode
    charges the pipeline's actual oracle queries; on budget exhaustion
    the unevaluated region is kept and the report flagged incomplete.
    """
    if mode not in ("oracle", "sample"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "sample" and rng is None:
        raise ValueError("sample mode needs an rng")
    policy = policy or DetectionPolicy(chi_target=chi_target)
    min_cells = max(16.0, chi_target * grid_obj.size)
    state = {"queries": 0, "evals": 0, "complete": True}

    def evidence(sub: CellGrid) -> bool:
        state["evals"] += 1
        if sub.white_count == 0:
            state["queries"] += 1
            return False
        if mode == "oracle":
            state["queries"] += 1
            rep = detect_peaks(exact_distribution(sub, encoding), policy)
        else:
            result = run_pipeline(sub, shots, rng, encoding=encoding)
            state["queries"] += result.counters.queries
            rep = detect_peaks(
                result.samples, policy, size=sub.size, m_rows=sub.m_rows
            )
        return bool(rep.clusters)

    def descend(region: tuple[int, int, int, int]) -> list[tuple[int, int, int, int]]:
        x0, y0, w, h = region
        if budget is not None and state["queries"] >= budget:
            state["complete"] = False
            return [region]  # unevaluated: keep conservatively
        sub = subgrid(grid_obj, region)
        if not evidence(sub):
            return []
        half_w = w // 2 if w >= 2 else w
        half_h = h // 2 if h >= 2 else h
        if (
            (w <= 1 and h <= 1)
            or half_w * half_h < min_cells
            or (half_w < 1 or half_h < 1)
        ):
            return [region]
        children = []
        for cx in range(0, w, half_w):
            for cy in range(0, h, half_h):
                children.append((x0 + cx, y0 + cy, half_w, half_h))
        kept = [descend(c) for c in children]
        if all(not part for part in kept):
            return [region]  # evidence lost by cutting: pattern straddles
        if all(part == [child] for part, child in zip(kept, children)):
            return [region]  # everything kept whole: merge back up
        return [r for part in kept for r in part]

    full = (0, 0, grid_obj.n_cols, grid_obj.m_rows)
    regions = descend(full)
    return LocaliseReport(
        regions=tuple(regions),
        queries_used=state["queries"],
        budget=budget,
        complete=state["complete"],
        evaluations=state["evals"],
    )
