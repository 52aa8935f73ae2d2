"""Post-selected process fidelity of the noisy CZ gate.

The noisy gate is simulated once per parameter set on a complete operator
basis of cavity inputs, turned into a superoperator on the two cavities, and
then scored with Nielsen's entanglement-fidelity formula. The transmon is
read out at the end of the gate; detected errors flag the shot, and the
fidelity is computed on the kept branch only.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .fock import SuperOperator, build_basis, tensor_superoperators
from .gates import cz_pulse_schedule, cz_unitary
from .noise import ParameterSet, collapse_operators, lindblad_evolve

COMPUTATIONAL = ((0, 0), (0, 1), (1, 0), (1, 1))


@dataclass(frozen=True)
class MeasurementModel:
    """Probabilities of reading 'g' given the transmon is in g, e or f."""

    eta_gg: float = 1 - 1e-4
    eta_ge: float = 0.01
    eta_gf: float | None = None

    def __post_init__(self):
        if self.eta_gf is None:
            object.__setattr__(self, "eta_gf", self.eta_ge**2)
        for v in (self.eta_gg, self.eta_ge, self.eta_gf):
            if not 0 <= v <= 1:
                raise ValueError("measurement coefficients must lie in [0, 1]")

    @classmethod
    def ideal(cls) -> "MeasurementModel":
        return cls(1.0, 0.0, 0.0)

    def kraus(self) -> np.ndarray:
        """3x3 Kraus operator of the 'no error detected' outcome."""
        return np.diag(np.sqrt([self.eta_gg, self.eta_ge, self.eta_gf])).astype(complex)


@dataclass
class ChannelEstimate:
    F_e_tilde: float
    P_success: float
    F_e: float
    F_g: float
    epsilon: float

    def as_dict(self) -> dict:
        return dict(F_e_tilde=self.F_e_tilde, P_success=self.P_success, F_e=self.F_e, F_g=self.F_g,
                    epsilon=self.epsilon)


# ---------------------------------------------------------------------------
# Input ensemble and Nielsen's formula
# ---------------------------------------------------------------------------


def nielsen_states(d: int) -> list[np.ndarray]:
    """The 2d^2 - d pure states used to reconstruct every |j><k|.

    Basis states, then for each pair j<k the states (j+k), (j-k), (j+ik),
    (j-ik), each normalized.
    """
    states = []
    eye = np.eye(d, dtype=complex)
    for j in range(d):
        states.append(eye[j])
    for j, k in itertools.combinations(range(d), 2):
        for c in (1, -1, 1j, -1j):
            states.append((eye[j] + c * eye[k]) / np.sqrt(2))
    return states


def _reconstruct_outputs(outputs: list[np.ndarray], d: int) -> dict[tuple[int, int], np.ndarray]:
    """E(|j><k|) from the channel outputs on the Nielsen ensemble.

    |j><k| = |+><+| + i|-><-| - (1+i)/2 (|j><j| + |k><k|) with
    |+> = (j+k)/sqrt2 and |-> = (j+ik)/sqrt2.
    """
    E = {(j, j): outputs[j] for j in range(d)}
    pos = d
    for j, k in itertools.combinations(range(d), 2):
        plus, _, iplus, _ = outputs[pos:pos + 4]
        pos += 4
        E[(j, k)] = plus + 1j * iplus - (1 + 1j) / 2 * (E[(j, j)] + E[(k, k)])
        # adjoint of the same decomposition
        E[(k, j)] = plus - 1j * iplus - (1 - 1j) / 2 * (E[(j, j)] + E[(k, k)])
    return E


def nielsen_post_selected_fidelity(
    channel: SuperOperator | Callable[[np.ndarray], np.ndarray],
    target_unitary: np.ndarray,
    checkmark_operator: np.ndarray | None = None,
    dim: int = 4,
    embedding: Sequence[int] | None = None,
) -> ChannelEstimate:
    """Post-selected entanglement and gate fidelity of a channel.

    Parameters
    ----------
    channel : SuperOperator or callable
        Maps an input density matrix on the channel's input space to an output
        density matrix on its output space.
    target_unitary : ndarray
        Ideal d x d action on the computational subspace.
    checkmark_operator : ndarray, optional
        Kraus operator of the kept outcome, applied on the output space.
    dim : int
        Dimension d of the computational subspace.
    embedding : sequence of int, optional
        Indices of the computational states inside the input and output spaces.
    """
    d = dim
    apply = channel.apply if isinstance(channel, SuperOperator) else channel
    if isinstance(channel, SuperOperator):
        d_space = channel.d_in
    else:
        d_space = None
    idx = np.arange(d) if embedding is None else np.asarray(embedding)
    U = np.asarray(target_unitary, dtype=complex)
    if U.shape != (d, d):
        raise ValueError("target unitary must be d x d")

    outputs, traces = [], []
    for psi in nielsen_states(d):
        n_in = d_space if d_space is not None else int(idx.max()) + 1
        full = np.zeros(n_in, dtype=complex)
        full[idx] = psi
        out = apply(np.outer(full, full.conj()))
        if checkmark_operator is not None:
            M = np.asarray(checkmark_operator)
            out = M @ out @ M.conj().T
        tr = float(np.real(np.trace(out)))
        if tr > 1 + 1e-8:
            raise ValueError(f"channel increases trace ({tr:.3g})")
        traces.append(tr)
        outputs.append(out[np.ix_(idx, idx)])

    E = _reconstruct_outputs(outputs, d)
    F_tilde = 0.0
    for j in range(d):
        for k in range(d):
            F_tilde += np.real(U[:, j].conj() @ E[(j, k)] @ U[:, k])
    F_tilde /= d**2
    P = float(np.mean(traces))
    F_e = F_tilde / P if P > 0 else 0.0
    F_g = (d * F_e + 1) / (d + 1)
    return ChannelEstimate(float(F_tilde), P, float(F_e), float(F_g), float(1 - F_g))


def entanglement_fidelity_direct(S: SuperOperator, U: np.ndarray, embedding: Sequence[int]) -> float:
    """Unnormalized entanglement fidelity read straight off the superoperator.

    F = sum_{mn} <m|U^dag E(|m><n|) U|n> / d^2, restricted to the embedding.
    """
    idx = list(embedding)
    d = len(idx)
    D = S.d_in
    Dout = S.d_out
    T = S.matrix.reshape(Dout, Dout, D, D)
    total = 0.0 + 0.0j
    for a, m in enumerate(idx):
        for b, n in enumerate(idx):
            out = T[:, :, m, n][np.ix_(idx, idx)]
            total += U[:, a].conj() @ out @ U[:, b]
    return float(np.real(total)) / d**2


# ---------------------------------------------------------------------------
# Physical single-rail CZ channel
# ---------------------------------------------------------------------------


@dataclass
class CZChannel:
    superoperator: SuperOperator  # kept branch on the two-cavity space
    P_CZ: float
    cutoff: int
    embedding: tuple[int, ...]

    def __iter__(self):
        return iter((self.superoperator, self.P_CZ))


def simulate_physical_cz_channel(
    params: ParameterSet,
    measurement_model: MeasurementModel | None = None,
    cutoff: int = 2,
    rtol: float = 1e-8,
    atol: float = 1e-10,
) -> CZChannel:
    """Noisy pulse-level CZ, read out and post-selected on 'g'.

    Every operator |m><n| on the cavity space is propagated with the ancilla
    starting in |g>; the kept-branch Kraus operator is applied to the
    ancilla, which is then traced out. P_CZ is the no-flag probability
    averaged over the Nielsen ensemble of the computational subspace.
    """
    mm = MeasurementModel() if measurement_model is None else measurement_model
    basis = build_basis(2, cutoff, None, 3)
    cav = build_basis(2, cutoff)
    nc = cav.dim
    schedule = cz_pulse_schedule(basis, 0, 1, params)
    collapses = collapse_operators(basis, ["data_cavity", "data_cavity"], params)

    inputs = np.zeros((nc * nc, basis.dim, basis.dim), dtype=complex)
    for m in range(nc):
        for n in range(nc):
            # ancilla |g> is level 0, which occupies the first nc indices
            inputs[m * nc + n, m, n] = 1.0
    traj = lindblad_evolve(schedule, collapses, inputs, rtol=rtol, atol=atol)
    out = traj.final.reshape(nc * nc, 3, nc, 3, nc)
    K = mm.kraus()
    kept = np.einsum("ab,kbmcn,ac->kmn", K, out, K.conj(), optimize=True)
    # columns of the superoperator are the vectorized outputs
    S = SuperOperator(kept.reshape(nc * nc, nc * nc).T, (cutoff + 1, cutoff + 1), (cutoff + 1, cutoff + 1))
    embedding = tuple(cav.index(s) for s in COMPUTATIONAL)
    P = nielsen_post_selected_fidelity(S, ideal_cz_matrix(), None, 4, embedding).P_success
    return CZChannel(S, P, cutoff, embedding)


def ideal_cz_matrix() -> np.ndarray:
    """CZ restricted to |00>, |01>, |10>, |11>."""
    b = build_basis(2, 1)
    U = cz_unitary(b, 0, 1).toarray()
    order = [b.index(s) for s in COMPUTATIONAL]
    return U[np.ix_(order, order)]


def single_rail_estimate(ch: CZChannel) -> ChannelEstimate:
    return nielsen_post_selected_fidelity(ch.superoperator, ideal_cz_matrix(), None, 4, ch.embedding)


# ---------------------------------------------------------------------------
# Dual rail
# ---------------------------------------------------------------------------

# logical |0_L> = photon in the first rail, |1_L> = photon in the second rail
DUAL_RAIL_TARGET = np.diag([-1, 1, 1, -1]).astype(complex)


def _restrict_to_qubits(ch: CZChannel) -> SuperOperator:
    """Keep inputs and outputs with at most one photon per cavity."""
    S = ch.superoperator
    nc = S.d_in
    idx = np.array(ch.embedding)
    T = S.matrix.reshape(nc, nc, nc, nc)[np.ix_(idx, idx, idx, idx)]
    return SuperOperator(T.reshape(16, 16), (2, 2), (2, 2))


def dual_rail_logical_embedding() -> tuple[int, ...]:
    """Indices of |i_L j_L> in the (a1, a2, b1, b2) qubit-rail space."""
    out = []
    for i, j in COMPUTATIONAL:
        a1, a2, b1, b2 = 1 - i, i, 1 - j, j
        out.append(a1 * 8 + a2 * 4 + b1 * 2 + b2)
    return tuple(out)


def dual_rail_projector() -> np.ndarray:
    P = np.zeros((16, 16), dtype=complex)
    for k in dual_rail_logical_embedding():
        P[k, k] = 1
    return P


@dataclass
class DualRailChannel:
    superoperator: SuperOperator  # on rails (a1, a2, b1, b2), before projection
    P_step: float
    estimate: ChannelEstimate


def dual_rail_channel(sr: CZChannel, post_select: bool = True) -> DualRailChannel:
    """Two parallel single-rail CZ channels read in the dual-rail basis.

    CZs act on rail pairs (a1, b1) and (a2, b2); wires are realigned to
    (a1, a2, b1, b2) and the codespace projector is applied as the kept
    outcome. Since the projector only keeps states with at most one photon per
    rail, each single-rail channel is first restricted to that sector. With
    ``post_select=False`` nothing is discarded and leaving the codespace
    counts as infidelity.
    """
    q = _restrict_to_qubits(sr)
    joint = tensor_superoperators(q, q, wire_permutation=[0, 2, 1, 3])
    est = nielsen_post_selected_fidelity(
        joint, DUAL_RAIL_TARGET, dual_rail_projector() if post_select else None, 4,
        dual_rail_logical_embedding(),
    )
    return DualRailChannel(joint, est.P_success, est)


# ---------------------------------------------------------------------------
# Scaling sweeps
# ---------------------------------------------------------------------------

SWEEP_PARAMETERS = ("T1_cavity", "Tphi_cavity", "T1_transmon_ge", "Tphi_transmon_ee")


@dataclass
class SweepRow:
    parameter: str
    value: float
    epsilon: float
    flag_probability: float
    rail_mode: str


def scaling_sweep(
    parameter_name: str,
    values: Sequence[float],
    rail_mode: str = "single",
    base: ParameterSet | None = None,
    measurement_model: MeasurementModel | None = None,
    rtol: float = 1e-11,
    atol: float = 1e-13,
) -> list[SweepRow]:
    """Sweep one coherence time with every other decay channel disabled.

    The thermal population is kept, so a swept cavity T1 still brings its
    heating channel. Measurement defaults to ideal readout so the slopes
    reflect only the swept channel. Tolerances are tighter than the default
    because second-order dual-rail terms sit close to the integrator floor.
    """
    if parameter_name not in SWEEP_PARAMETERS:
        raise ValueError(f"parameter must be one of {SWEEP_PARAMETERS}")
    if rail_mode not in ("single", "dual"):
        raise ValueError("rail_mode must be 'single' or 'dual'")
    from .noise import preset

    base = preset("PS2") if base is None else base
    quiet = base.replace(T1_cavity=math.inf, Tphi_cavity=math.inf, T1_transmon_ge=math.inf,
                         Tphi_transmon_ee=math.inf)
    mm = MeasurementModel.ideal() if measurement_model is None else measurement_model
    rows = []
    for v in values:
        ch = simulate_physical_cz_channel(quiet.replace(**{parameter_name: float(v)}), mm, rtol=rtol, atol=atol)
        if rail_mode == "single":
            est = single_rail_estimate(ch)
        else:
            est = dual_rail_channel(ch).estimate
        rows.append(SweepRow(parameter_name, float(v), est.epsilon, 1 - est.P_success, rail_mode))
    return rows


def loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log(y) against log(x)."""
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])
