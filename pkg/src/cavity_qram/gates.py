"""Analytic gate unitaries and pulse schedules for the CSWAP architecture.

Modes carry photon-number (Fock) states; a three-level transmon ancilla,
dispersively coupled to one cavity, mediates the joint-parity interaction.
All frequencies are angular and in rad/us, all times in us.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

from .fock import FockBasis, ancilla_operator, is_hermitian, mode_operator, propagator


@dataclass
class Segment:
    """One schedule step: a Hamiltonian held for ``duration`` or an instant unitary."""

    hamiltonian: sp.csr_matrix | None = None
    duration: float = 0.0
    unitary: sp.csr_matrix | None = None
    label: str = ""

    def __post_init__(self):
        if (self.hamiltonian is None) == (self.unitary is None):
            raise ValueError("segment needs exactly one of hamiltonian or unitary")
        if self.unitary is not None:
            self.duration = 0.0
        elif self.duration < 0:
            raise ValueError("negative segment duration")

    @property
    def instantaneous(self) -> bool:
        return self.unitary is not None


@dataclass
class GateSchedule:
    """Ordered list of segments applied left to right."""

    segments: list[Segment] = field(default_factory=list)

    @property
    def total_duration(self) -> float:
        return float(sum(s.duration for s in self.segments))

    def __add__(self, other: "GateSchedule") -> "GateSchedule":
        return GateSchedule(self.segments + other.segments)

    def unitary(self) -> np.ndarray:
        """Noiseless propagator of the whole schedule."""
        if not self.segments:
            raise ValueError("empty schedule")
        dim = (self.segments[0].hamiltonian if self.segments[0].hamiltonian is not None
               else self.segments[0].unitary).shape[0]
        U = np.eye(dim, dtype=complex)
        for seg in self.segments:
            step = seg.unitary.toarray() if seg.instantaneous else propagator(seg.hamiltonian, seg.duration)
            U = step @ U
        return U


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------


def _expm_hermitian(G, dense_limit: int = 2048) -> sp.csr_matrix:
    """exp(-i G) for a Hermitian sparse generator."""
    if G.shape[0] <= dense_limit:
        return sp.csr_matrix(propagator(G, 1.0))
    if not is_hermitian(G, atol=1e-10):
        raise ValueError("generator is not Hermitian")
    U = scipy.sparse.linalg.expm(-1j * sp.csc_matrix(G))
    U.data[np.abs(U.data) < 1e-15] = 0
    U.eliminate_zeros()
    return U.tocsr()


def _diag_unitary(phases: np.ndarray) -> sp.csr_matrix:
    return sp.diags(np.exp(1j * phases), format="csr")


def _occ(basis: FockBasis, mode: int) -> np.ndarray:
    if not 0 <= mode < basis.num_modes:
        raise IndexError(f"mode {mode} out of range")
    return basis.occupations()[:, mode]


def _distinct(*modes: int):
    if len(set(modes)) != len(modes):
        raise ValueError("modes must be distinct")


def phase_align(U: np.ndarray) -> np.ndarray:
    """Divide out the phase of the largest-magnitude entry."""
    U = np.asarray(U)
    k = np.argmax(np.abs(U))
    ref = U.flat[k]
    return U * (abs(ref) / ref)


def subspace_process_fidelity(U: np.ndarray, V: np.ndarray, indices: Sequence[int] | None = None) -> float:
    """|Tr(U^dag V)|^2 / d^2 on the subspace spanned by ``indices``."""
    U = U.toarray() if sp.issparse(U) else np.asarray(U)
    V = V.toarray() if sp.issparse(V) else np.asarray(V)
    if indices is not None:
        idx = np.asarray(indices)
        U = U[np.ix_(idx, idx)]
        V = V[np.ix_(idx, idx)]
    d = U.shape[0]
    return float(abs(np.trace(U.conj().T @ V)) ** 2 / d**2)


# ---------------------------------------------------------------------------
# Analytic unitaries
# ---------------------------------------------------------------------------


def beamsplitter_unitary(basis: FockBasis, mode_b: int, mode_c: int, alpha: float) -> sp.csr_matrix:
    """50:50 beamsplitter exp(-i pi/4 [e^{i alpha} c^dag b + h.c.])."""
    _distinct(mode_b, mode_c)
    b = mode_operator(basis, mode_b, "annihilate")
    c = mode_operator(basis, mode_c, "annihilate")
    term = np.exp(1j * alpha) * (c.conj().T @ b)
    G = (np.pi / 4) * (term + term.conj().T)
    return _expm_hermitian(G.tocsr())


def mode_rotation(basis: FockBasis, mode: int, theta: float) -> sp.csr_matrix:
    """Phase e^{-i theta n} on Fock level n of one mode."""
    return _diag_unitary(-theta * _occ(basis, mode))


def parity_phase(basis: FockBasis, modes: Sequence[int]) -> np.ndarray:
    """Diagonal of the joint parity e^{i pi (sum of n)} as +-1 values."""
    total = sum(_occ(basis, m) for m in modes)
    return np.where(total % 2 == 0, 1.0, -1.0)


def cz_unitary(basis: FockBasis, mode_a: int, mode_b: int) -> sp.csr_matrix:
    """Controlled-phase with phase exp(-i pi/2 [P/2 + n_a + n_b - 1/2])."""
    _distinct(mode_a, mode_b)
    na, nb = _occ(basis, mode_a), _occ(basis, mode_b)
    P = parity_phase(basis, [mode_a, mode_b])
    return _diag_unitary(-np.pi / 2 * (P / 2 + na + nb - 0.5))


def zz_unitary(basis: FockBasis, mode_a: int, mode_b: int, theta: float) -> sp.csr_matrix:
    """cos(theta/2) I - i sin(theta/2) e^{i pi (n_a + n_b)} on the mode sector."""
    _distinct(mode_a, mode_b)
    P = parity_phase(basis, [mode_a, mode_b])
    return sp.diags(np.cos(theta / 2) - 1j * np.sin(theta / 2) * P, format="csr")


def jp_unitary(basis: FockBasis, mode_a: int, mode_b: int) -> sp.csr_matrix:
    """Joint parity |g><g| + e^{i pi (n_a+n_b)} |f><f|, identity on |e>."""
    if not basis.has_ancilla:
        raise ValueError("joint parity needs an ancilla")
    P = parity_phase(basis, [mode_a, mode_b])
    anc = basis.ancilla_column()
    return sp.diags(np.where(anc == 2, P, 1.0).astype(complex), format="csr")


def cswap_unitary(basis: FockBasis, control: int, target_b: int, target_c: int, variant: str) -> sp.csr_matrix:
    """Controlled SWAP of modes b and c built from two beamsplitters and a CZ.

    ``C1`` swaps when the control holds a photon, ``C0`` when it is empty.
    """
    _distinct(control, target_b, target_c)
    bs = beamsplitter_unitary(basis, target_b, target_c, np.pi / 2)
    cz = cz_unitary(basis, control, target_b)
    if variant == "C1":
        return (bs.conj().T @ cz @ bs).tocsr()
    if variant == "C0":
        flip = mode_rotation(basis, target_b, -np.pi)
        return (flip @ bs @ cz @ bs).tocsr()
    raise ValueError(f"unknown CSWAP variant {variant!r}")


# ---------------------------------------------------------------------------
# Pulse schedules
# ---------------------------------------------------------------------------


def jp_coupling(chi: float) -> float:
    """Beamsplitter rate that closes one full cycle in time 2 pi / chi.

    In each ancilla branch the one-photon sector has splitting
    2 sqrt(chi^2/16 + g^2); matching it to chi gives g = sqrt(3) chi / 4.
    """
    return np.sqrt(3.0) * chi / 4


def _chi(params) -> float:
    return float(params if np.isscalar(params) else params.chi)


def jp_hamiltonian(basis: FockBasis, mode_a: int, mode_b: int, chi: float, g_bs: float | None = None):
    a = mode_operator(basis, mode_a, "annihilate")
    b = mode_operator(basis, mode_b, "annihilate")
    na = mode_operator(basis, mode_a, "number")
    sz = ancilla_operator(basis, "sigma_z_gf")
    g = jp_coupling(chi) if g_bs is None else g_bs
    hop = a.conj().T @ b
    return ((chi / 2) * (na @ sz) + g * (hop + hop.conj().T)).tocsr()


def jp_pulse_schedule(
    basis: FockBasis,
    mode_a: int,
    mode_b: int,
    params,
    hadamards: bool = True,
    g_bs: float | None = None,
) -> GateSchedule:
    """Joint-parity block: dispersive shift plus a resonant beamsplitter.

    The free evolution for 2 pi / chi returns exp(i pi/2 (n_a + n_b)) times
    the joint parity; an instantaneous frame rotation removes that factor.
    With ``hadamards`` the block is sandwiched by g/f Hadamards, mapping the
    joint parity onto the ancilla population.
    """
    if not basis.has_ancilla:
        raise ValueError("joint-parity schedule needs an ancilla")
    _distinct(mode_a, mode_b)
    chi = _chi(params)
    H = jp_hamiltonian(basis, mode_a, mode_b, chi, g_bs)
    frame = (mode_rotation(basis, mode_a, np.pi / 2) @ mode_rotation(basis, mode_b, np.pi / 2)).tocsr()
    core = [Segment(hamiltonian=H, duration=2 * np.pi / chi, label="jp"), Segment(unitary=frame, label="frame")]
    if not hadamards:
        return GateSchedule(core)
    had = ancilla_operator(basis, "hadamard_gf")
    return GateSchedule([Segment(unitary=had, label="hadamard")] + core + [Segment(unitary=had, label="hadamard")])


def zz_pulse_schedule(basis: FockBasis, mode_a: int, mode_b: int, params, theta: float,
                      g_bs: float | None = None) -> GateSchedule:
    """ZZ(theta): two joint-parity blocks separated by ancilla rotations."""
    rot = lambda axis, angle: Segment(unitary=ancilla_operator(basis, "rotation", axis, angle), label=f"r{axis}")
    jp = jp_pulse_schedule(basis, mode_a, mode_b, params, hadamards=False, g_bs=g_bs)
    return (
        GateSchedule([rot("y", np.pi / 2)])
        + jp
        + GateSchedule([rot("x", theta)])
        + jp
        + GateSchedule([rot("y", -np.pi / 2)])
    )


def cz_pulse_schedule(basis: FockBasis, mode_a: int, mode_b: int, params, g_bs: float | None = None) -> GateSchedule:
    """Full CZ: ZZ(pi/2) followed by the single-cavity frame corrections."""
    sched = zz_pulse_schedule(basis, mode_a, mode_b, params, np.pi / 2, g_bs)
    frame = (np.exp(1j * np.pi / 4) * mode_rotation(basis, mode_a, np.pi / 2) @ mode_rotation(basis, mode_b, np.pi / 2))
    return sched + GateSchedule([Segment(unitary=sp.csr_matrix(frame), label="cz-frame")])


def lift_to_ancilla(basis: FockBasis, mode_unitary) -> sp.csr_matrix:
    """Tensor a mode-sector operator with identity on the ancilla.

    ``mode_unitary`` must be expressed on the ancilla-free basis with the same
    modes and cutoffs.
    """
    return sp.kron(sp.identity(3, dtype=complex), sp.csr_matrix(mode_unitary), format="csr")


# ---------------------------------------------------------------------------
# Data copy
# ---------------------------------------------------------------------------


def data_copy_gates(variant: str, data_bit: int) -> list[str]:
    """Classically controlled gate list for copying one data bit onto the bus.

    ``C1Z`` is a CZ between router and bus. ``C0Z`` is a CZ followed by a
    software Z on the bus, so the bus flips only when the router is empty.
    """
    if variant not in ("C0Z", "C1Z"):
        raise ValueError(f"unknown data-copy variant {variant!r}")
    if data_bit not in (0, 1):
        raise ValueError("data_bit must be 0 or 1")
    if data_bit == 0:
        return []
    return ["CZ"] if variant == "C1Z" else ["CZ", "Z"]


def data_copy_unitary(basis: FockBasis, router: int, bus: int, variant: str, data_bit: int) -> sp.csr_matrix:
    U = basis.identity()
    for name in data_copy_gates(variant, data_bit):
        step = cz_unitary(basis, router, bus) if name == "CZ" else mode_rotation(basis, bus, np.pi)
        U = (step @ U).tocsr()
    return U
