"""Gate-level simulation of the oracle -> post-selection -> QFT pipeline.

The register layout is s coordinate qubits plus one ancilla. Amplitude
index 2*z + a holds |z> (x) |a>, z little-endian over the coordinate
qubits (qubit j weighs 2**j), the ancilla being the global least
significant bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import CellGrid, point_list

# Dense state vectors above this register width exhaust desk-scale memory.
MAX_STATE_QUBITS = 22

INV_SQRT2 = 1.0 / math.sqrt(2.0)


class PostselectionError(RuntimeError):
    """Raised when the ancilla has no weight on |1> (no points to keep)."""


@dataclass
class PureState:
    """Dense pure state over s coordinate qubits and one ancilla.

    gate_count and query_count track what was applied to this instance.
    """

    s: int
    amplitudes: np.ndarray = field(repr=False)
    gate_count: int = 0
    query_count: int = 0

    @property
    def size(self) -> int:
        """Coordinate-space dimension S = 2**s."""
        return 1 << self.s

    def copy(self) -> "PureState":
        return PureState(
            s=self.s,
            amplitudes=self.amplitudes.copy(),
            gate_count=self.gate_count,
            query_count=self.query_count,
        )

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def coordinate_distribution(self) -> np.ndarray:
        """Marginal probability over z, traced over the ancilla."""
        pairs = np.abs(self.amplitudes.reshape(self.size, 2)) ** 2
        return pairs.sum(axis=1)

    # -- single- and two-qubit primitives on coordinate qubits ------------

    def _split(self, qubit: int) -> np.ndarray:
        # axes: (above qubit, qubit, below qubit, ancilla)
        return self.amplitudes.reshape(
            1 << (self.s - 1 - qubit), 2, 1 << qubit, 2
        )

    def apply_hadamard(self, qubit: int) -> None:
        view = self._split(qubit)
        lo = view[:, 0].copy()
        hi = view[:, 1]
        view[:, 0] = (lo + hi) * INV_SQRT2
        view[:, 1] = (lo - hi) * INV_SQRT2
        self.gate_count += 1

    def apply_phase(self, qubit: int, angle: float) -> None:
        view = self._split(qubit)
        view[:, 1] *= np.exp(1j * angle)
        self.gate_count += 1

    def apply_cphase(self, qubit_a: int, qubit_b: int, angle: float) -> None:
        hi, lo = max(qubit_a, qubit_b), min(qubit_a, qubit_b)
        view = self.amplitudes.reshape(
            1 << (self.s - 1 - hi), 2, 1 << (hi - lo - 1), 2, 1 << lo, 2
        )
        view[:, 1, :, 1] *= np.exp(1j * angle)
        self.gate_count += 1

    def apply_swap(self, qubit_a: int, qubit_b: int) -> None:
        hi, lo = max(qubit_a, qubit_b), min(qubit_a, qubit_b)
        view = self.amplitudes.reshape(
            1 << (self.s - 1 - hi), 2, 1 << (hi - lo - 1), 2, 1 << lo, 2
        )
        tmp = view[:, 0, :, 1].copy()
        view[:, 0, :, 1] = view[:, 1, :, 0]
        view[:, 1, :, 0] = tmp
        self.gate_count += 1

    def apply_x_ancilla(self) -> None:
        view = self.amplitudes.reshape(self.size, 2)
        view[:] = view[:, ::-1]
        self.gate_count += 1

    def apply_h_ancilla(self) -> None:
        view = self.amplitudes.reshape(self.size, 2)
        lo = view[:, 0].copy()
        view[:, 0] = (lo + view[:, 1]) * INV_SQRT2
        view[:, 1] = (lo - view[:, 1]) * INV_SQRT2
        self.gate_count += 1


def prepare_superposition(s: int, s_max: int = MAX_STATE_QUBITS) -> PureState:
    """Uniform superposition over all z with the ancilla in |0>.

    Filled directly; the gate counter is charged the s Hadamards the
    physical preparation costs.
    """
    if not 1 <= s <= s_max:
        raise ValueError(f"s={s} outside the supported range 1..{s_max}")
    amps = np.zeros(1 << (s + 1), dtype=complex)
    amps[0::2] = 1.0 / math.sqrt(1 << s)
    return PureState(s=s, amplitudes=amps, gate_count=s)


def _check_register_match(state: PureState, grid: CellGrid) -> None:
    if grid.qubits != state.s:
        raise ValueError(
            f"grid needs {grid.qubits} coordinate qubits, state has {state.s}"
        )


def oracle_amplitude(state: PureState, grid: CellGrid) -> PureState:
    """One oracle query |z,0> -> |z,f(z)>; requires the ancilla in |0>."""
    _check_register_match(state, grid)
    pairs = state.amplitudes.reshape(state.size, 2)
    if np.abs(pairs[:, 1]).max(initial=0.0) > 1e-12:
        raise ValueError("amplitude oracle is defined on ancilla |0> input only")
    whites = point_list(grid)
    pairs[whites, 1] = pairs[whites, 0]
    pairs[whites, 0] = 0.0
    state.query_count += 1
    return state


def oracle_phase_xor(state: PureState, grid: CellGrid) -> PureState:
    """One oracle query |z,a> -> |z, a xor f(z)>: valid on any ancilla state.

    Applying it twice is the identity.
    """
    _check_register_match(state, grid)
    pairs = state.amplitudes.reshape(state.size, 2)
    whites = point_list(grid)
    pairs[whites] = pairs[whites][:, ::-1]
    state.query_count += 1
    return state


def measure_ancilla(state: PureState, rng: np.random.Generator) -> int:
    """Projective ancilla measurement; collapses and renormalizes."""
    pairs = state.amplitudes.reshape(state.size, 2)
    p_one = float(np.sum(np.abs(pairs[:, 1]) ** 2))
    outcome = 1 if rng.random() < p_one else 0
    p_keep = p_one if outcome == 1 else 1.0 - p_one
    if p_keep <= 0.0:
        raise PostselectionError("measured a zero-probability branch")
    pairs[:, 1 - outcome] = 0.0
    pairs /= math.sqrt(p_keep)
    return outcome


def postselect_f1(state: PureState) -> tuple[PureState, float]:
    """Keep the f(z)=1 branch exactly; returns (state, success probability).

    On a uniform oracle-queried superposition the success probability is
    exactly rho and the surviving amplitudes are 1/sqrt(rho*S) on the
    point coordinates. The discarded branch decoheres away; it is not
    renormalized back in.
    """
    pairs = state.amplitudes.reshape(state.size, 2)
    p_success = float(np.sum(np.abs(pairs[:, 1]) ** 2))
    if p_success <= 0.0:
        raise PostselectionError("no amplitude on the f=1 branch (rho = 0?)")
    pairs[:, 0] = 0.0
    pairs[:, 1] /= math.sqrt(p_success)
    return state, p_success


def qft_gate_total(s: int) -> int:
    """Elementary gates in the full transform circuit: s(s+1)/2 + floor(s/2)."""
    return s * (s + 1) // 2 + s // 2


def qft_circuit(state: PureState) -> PureState:
    """Full transform circuit: amp'[k] = (1/sqrt(S)) sum_z e^{+2pi i zk/S} amp[z].

    Hadamards and controlled phases from the most significant coordinate
    qubit down, then bit-order reversal via swaps. Acts on the coordinate
    register only; the ancilla rides along.
    """
    s = state.s
    for target in range(s - 1, -1, -1):
        state.apply_hadamard(target)
        for control in range(target - 1, -1, -1):
            angle = 2.0 * math.pi / (1 << (target - control + 1))
            state.apply_cphase(control, target, angle)
    for low in range(s // 2):
        state.apply_swap(low, s - 1 - low)
    return state


@dataclass(frozen=True)
class MeasurementSample:
    """One measured wave number k at shot index shot."""

    k: int
    shot: int


def sample_k(
    state: PureState, shots: int, rng: np.random.Generator
) -> list[MeasurementSample]:
    """Draw wave-number measurements from the state's coordinate marginal."""
    probs = state.coordinate_distribution()
    probs = probs / probs.sum()
    ks = rng.choice(state.size, size=shots, p=probs)
    return [MeasurementSample(k=int(k), shot=i) for i, k in enumerate(ks)]


def samples_to_array(samples: list[MeasurementSample]) -> np.ndarray:
    return np.fromiter((s.k for s in samples), dtype=np.int64, count=len(samples))


def _measure_coordinate_qubit(
    state: PureState, qubit: int, rng: np.random.Generator
) -> int:
    view = state._split(qubit)
    p_one = float(np.sum(np.abs(view[:, 1]) ** 2))
    outcome = 1 if rng.random() < p_one else 0
    p_keep = p_one if outcome == 1 else 1.0 - p_one
    view[:, 1 - outcome] = 0.0
    view /= math.sqrt(p_keep)
    return outcome


def semiclassical_qft_sample(
    state: PureState, rng: np.random.Generator
) -> MeasurementSample:
    """Measurement-based transform: one sample in 2s-1 gates instead of O(s^2).

    Each coordinate qubit gets one merged phase rotation (conditioned on
    the bits already measured), a Hadamard, and an immediate measurement.
    The state collapses as the physical run would; the caller re-prepares
    for the next shot.
    """
    s = state.s
    outcomes = np.zeros(s, dtype=np.int64)
    for qubit in range(s - 1, -1, -1):
        if qubit < s - 1:
            angle = 0.0
            for higher in range(qubit + 1, s):
                if outcomes[higher]:
                    angle += 2.0 * math.pi / (1 << (higher - qubit + 1))
            state.apply_phase(qubit, angle)
        state.apply_hadamard(qubit)
        outcomes[qubit] = _measure_coordinate_qubit(state, qubit, rng)
    # circuit-order measurement leaves the output bits reversed
    k = 0
    for qubit in range(s):
        k |= int(outcomes[qubit]) << (s - 1 - qubit)
    return MeasurementSample(k=k, shot=0)


def semiclassical_distribution(state: PureState) -> np.ndarray:
    """Exact distribution the measurement-based sampler induces.

    Walks every outcome branch; exponential in s, intended for small
    registers as a cross-check against the full circuit.
    """
    s = state.s
    out = np.zeros(1 << s)

    def descend(st: PureState, qubit: int, prob: float, bits: int) -> None:
        if prob <= 0.0:
            return
        if qubit < 0:
            k = 0
            for q in range(s):
                k |= ((bits >> q) & 1) << (s - 1 - q)
            out[k] += prob
            return
        if qubit < s - 1:
            angle = 0.0
            for higher in range(qubit + 1, s):
                if (bits >> higher) & 1:
                    angle += 2.0 * math.pi / (1 << (higher - qubit + 1))
            st.apply_phase(qubit, angle)
        st.apply_hadamard(qubit)
        view = st._split(qubit)
        p_one = float(np.sum(np.abs(view[:, 1]) ** 2))
        for outcome, p_branch in ((0, 1.0 - p_one), (1, p_one)):
            if p_branch <= 1e-300:
                continue
            branch = st.copy()
            bview = branch._split(qubit)
            bview[:, 1 - outcome] = 0.0
            bview /= math.sqrt(p_branch)
            descend(branch, qubit - 1, prob * p_branch, bits | (outcome << qubit))

    descend(state.copy(), s - 1, 1.0, 0)
    return out


# -- switch gate -----------------------------------------------------------

def switch_gate(alpha: int, beta: int) -> tuple[int, int, int]:
    """Classical switch: (alpha, beta, 0) -> (alpha, (not alpha) and beta, alpha and beta)."""
    if alpha not in (0, 1) or beta not in (0, 1):
        raise ValueError("switch gate inputs must be bits")
    return alpha, (1 - alpha) & beta, alpha & beta


def switch_gate_unitary() -> np.ndarray:
    """The switch as an 8x8 permutation on |alpha, beta, gamma>.

    Index is 4*alpha + 2*beta + gamma. On the gamma=0 domain it realizes
    the truth table above; the completion on gamma=1 makes it exactly a
    controlled swap of (beta, gamma) with alpha as control.
    """
    mat = np.zeros((8, 8))
    for alpha in (0, 1):
        for beta in (0, 1):
            for gamma in (0, 1):
                if alpha and beta != gamma:
                    out_b, out_g = gamma, beta
                else:
                    out_b, out_g = beta, gamma
                mat[4 * alpha + 2 * out_b + out_g, 4 * alpha + 2 * beta + gamma] = 1.0
    return mat


def apply_switch_gate(amplitudes: np.ndarray) -> np.ndarray:
    """Apply the switch unitary to a 3-qubit state with gamma required |0>."""
    amps = np.asarray(amplitudes, dtype=complex)
    if amps.shape != (8,):
        raise ValueError("switch gate acts on an 8-amplitude register")
    if np.abs(amps[1::2]).max() > 1e-12:
        raise ValueError("switch gate input requires the third qubit in |0>")
    return switch_gate_unitary() @ amps


# -- pipeline --------------------------------------------------------------

@dataclass
class Counters:
    """Physical resource ledger for a batch of shots."""

    gates: int = 0
    queries: int = 0
    trials: int = 0


@dataclass
class RunResult:
    """Samples plus the exact post-transform state and the resource ledger."""

    encoding: str
    shots: int
    samples: list[MeasurementSample]
    state: PureState
    counters: Counters
    success_probability: float


def run_pipeline(
    grid: CellGrid,
    shots: int,
    rng: np.random.Generator,
    encoding: str = "amplitude",
    sampler: str = "circuit",
) -> RunResult:
    """Run the full pipeline on a grid and draw `shots` wave-number samples.

    amplitude encoding: each shot repeats {prepare, oracle, measure
    ancilla} until the f=1 branch is caught (geometrically many trials,
    expectation 1/rho), then transforms and measures. phase encoding
    succeeds every trial: the oracle kicks (-1)^f(z) onto the
    superposition via an ancilla in (|0>-|1>)/sqrt(2).

    The post-selected state is identical on every successful trial, so
    the exact state is built once; trial counts are drawn geometrically
    for the ledger. counters reflect the physical per-shot costs.
    """
    if sampler not in ("circuit", "semiclassical"):
        raise ValueError(f"unknown sampler {sampler!r}")
    s = grid.qubits
    counters = Counters()

    if encoding == "amplitude":
        state = prepare_superposition(s)
        oracle_amplitude(state, grid)
        state, p_success = postselect_f1(state)
        trials = rng.geometric(p_success, size=shots) if shots else np.zeros(0, int)
        counters.trials = int(trials.sum())
        counters.queries = int(trials.sum())
        counters.gates = int(trials.sum()) * s  # preparation per trial
        prepared = state
    elif encoding == "phase":
        state = prepare_superposition(s)
        state.apply_x_ancilla()
        state.apply_h_ancilla()
        oracle_phase_xor(state, grid)
        p_success = 1.0
        counters.trials = shots
        counters.queries = shots
        counters.gates = shots * (s + 2)
        prepared = state
    else:
        raise ValueError(f"unknown encoding {encoding!r}")

    if sampler == "circuit":
        post = qft_circuit(prepared.copy())
        samples = sample_k(post, shots, rng)
        counters.gates += shots * qft_gate_total(s)
    else:
        post = qft_circuit(prepared.copy())  # exact state for the report
        samples = []
        for shot in range(shots):
            work = prepared.copy()
            drawn = semiclassical_qft_sample(work, rng)
            samples.append(MeasurementSample(k=drawn.k, shot=shot))
            counters.gates += 2 * s - 1
    return RunResult(
        encoding=encoding,
        shots=shots,
        samples=samples,
        state=post,
        counters=counters,
        success_probability=p_success,
    )
