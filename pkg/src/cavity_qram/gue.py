"""Pitch-and-catch state transfer between giant unidirectional emitters.

Each emitter (GUE) is a pair of data cavities, each coupled through a tunable
beamsplitter to a transfer resonator that decays into a shared waveguide.
The two transfer resonators of one GUE sit a quarter wavelength apart, so a
suitable superposition emits only to the left or only to the right.

Mode layout for a chain of GUEs a, b, c: mode ``4*k + j`` where k indexes the
GUE and j = 0, 1 are the transfer resonators, j = 2, 3 the data cavities.
"""

from __future__ import annotations

import itertools
import logging
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp
from scipy.special import erfc

from .fock import FockBasis, build_basis, check_cutoff_convergence, mode_operator, partial_trace
from .noise import CollapseSet, ParameterSet, TimeDependentHamiltonian, collapse_operators, lindblad_evolve

log = logging.getLogger(__name__)

GUE_LABELS = ("a", "b", "c")


def mode_index(gue: int, slot: int) -> int:
    """Index of slot 0..3 (resonator 1, resonator 2, cavity 3, cavity 4) of a GUE."""
    return 4 * gue + slot


@dataclass
class GueChain:
    """Geometry and couplings of GUEs along one waveguide.

    Attributes
    ----------
    num_gues : int
        2 (sender b, receiver c) or 3 (receivers a and c around sender b).
    gamma_per_resonator : ndarray
        Decay rates into the waveguide, shape (num_gues, 2), rad/us.
    intra_gue_phase : float
        Propagation phase between the two resonators of one GUE.
    inter_gue_phases : tuple of float
        Phases between neighbouring GUEs.
    static_coupling_J : float or None
        Direct resonator-resonator exchange; ``None`` picks the value that
        cancels the waveguide-mediated exchange.
    """

    num_gues: int = 3
    gamma_per_resonator: np.ndarray = None
    intra_gue_phase: float = np.pi / 2
    inter_gue_phases: tuple[float, ...] = (np.pi / 2, np.pi / 2)
    static_coupling_J: float | None = None

    def __post_init__(self):
        if self.num_gues not in (2, 3):
            raise ValueError("num_gues must be 2 or 3")
        if self.gamma_per_resonator is None:
            raise ValueError("gamma_per_resonator is required; use GueChain.symmetric")
        self.gamma_per_resonator = np.broadcast_to(
            np.asarray(self.gamma_per_resonator, dtype=float), (self.num_gues, 2)
        ).copy()
        if np.any(self.gamma_per_resonator <= 0):
            raise ValueError("decay rates must be positive")
        two_pi = 2 * np.pi
        self.intra_gue_phase = self.intra_gue_phase % two_pi
        self.inter_gue_phases = tuple(p % two_pi for p in self.inter_gue_phases)
        if len(self.inter_gue_phases) < self.num_gues - 1:
            raise ValueError("need one inter-GUE phase per neighbouring pair")

    @classmethod
    def symmetric(cls, gamma: float, num_gues: int = 3) -> "GueChain":
        return cls(num_gues=num_gues, gamma_per_resonator=np.full((num_gues, 2), gamma))

    @property
    def num_modes(self) -> int:
        return 4 * self.num_gues

    def J(self, k: int) -> float:
        if self.static_coupling_J is not None:
            return self.static_coupling_J
        g1, g2 = self.gamma_per_resonator[k]
        return -np.sqrt(g1 * g2) * np.sin(self.intra_gue_phase)

    def origin_phase(self, k: int) -> float:
        """Propagation phase from the first resonator of GUE 0 to GUE k."""
        return k * self.intra_gue_phase + sum(self.inter_gue_phases[:k])


# ---------------------------------------------------------------------------
# Pulses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PulsePair:
    """Time-symmetric emission / absorption pulse pair.

    The sender envelope is sqrt(gamma/2) exp(-zeta t^2/2) /
    sqrt(1/xi - sqrt(pi/(4 zeta)) erf(sqrt(zeta) t)); the receiver uses the
    time-reversed envelope. Both are clamped at ``clamp_max`` once the square
    root argument gets small or negative.
    """

    gamma: float
    xi: float
    zeta: float
    lambda_b: float = 1.0
    lambda_c: float = 1.0
    t_final: float = 0.0
    clamp_max: float = 0.0

    def __post_init__(self):
        if self.zeta > np.pi * self.xi**2 / 4 * (1 + 1e-12):
            raise ValueError("zeta must not exceed pi xi^2 / 4")
        if self.t_final <= 0 or self.clamp_max <= 0:
            raise ValueError("t_final and clamp_max must be positive")

    @classmethod
    def from_params(cls, params: ParameterSet, zeta_fraction: float = 1.0, window: float = 4.0) -> "PulsePair":
        xi, gamma = params.xi, params.gamma
        return cls(
            gamma=gamma,
            xi=xi,
            zeta=zeta_fraction * np.pi * xi**2 / 4,
            lambda_b=params.lambda_b,
            lambda_c=params.lambda_c,
            t_final=window / xi,
            clamp_max=gamma / 2,
        )

    @property
    def window(self) -> tuple[float, float]:
        return (-self.t_final, self.t_final)

    def base(self, t):
        """Unscaled sender envelope with clamping."""
        t = np.asarray(t, dtype=float)
        # 1/xi - c erf(x) written with erfc to avoid cancellation when c = 1/xi
        c = np.sqrt(np.pi / (4 * self.zeta))
        denom = (1 / self.xi - c) + c * erfc(np.sqrt(self.zeta) * t)
        num = np.sqrt(self.gamma / 2) * np.exp(-self.zeta * t**2 / 2)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = np.where(denom > 0, num / np.sqrt(np.where(denom > 0, denom, 1.0)), np.inf)
        return np.minimum(g, self.clamp_max)


def emission_pulse(t, pulse: PulsePair, role: str = "sender"):
    """Drive envelope for the sending or receiving GUE at time t."""
    if role == "sender":
        return pulse.lambda_b * pulse.base(t)
    if role == "receiver":
        return pulse.lambda_c * pulse.base(-np.asarray(t, dtype=float))
    raise ValueError(f"unknown pulse role {role!r}")


def pulse_table(pulse: PulsePair, num: int = 801) -> np.ndarray:
    """Sampled (t, Re g_sender, Im g_sender, Re g_receiver, Im g_receiver)."""
    t = np.linspace(*pulse.window, num)
    gs = emission_pulse(t, pulse, "sender").astype(complex)
    gr = emission_pulse(t, pulse, "receiver").astype(complex)
    return np.column_stack([t, gs.real, gs.imag, gr.real, gr.imag])


# ---------------------------------------------------------------------------
# Two-GUE amplitude equations
# ---------------------------------------------------------------------------


@dataclass
class EmissionSolution:
    times: np.ndarray
    amplitudes: np.ndarray  # columns: sender cavity, sender resonator, receiver resonator, receiver cavity
    emitted_waveform: np.ndarray
    gamma: float
    phi: float

    @property
    def final_receiver_population(self) -> float:
        return float(abs(self.amplitudes[-1, 3]) ** 2)

    @property
    def dark_state_residual(self) -> np.ndarray:
        """sqrt(gamma) |alpha_Rbt - i e^{-i phi} alpha_Rct| over time."""
        a = self.amplitudes
        return np.sqrt(self.gamma) * np.abs(a[:, 1] - 1j * np.exp(-1j * self.phi) * a[:, 2])

    @property
    def leakage(self) -> float:
        """Norm lost to the waveguide by the end of the window."""
        return float(1 - np.sum(np.abs(self.amplitudes[-1]) ** 2))


class CutoffConvergenceWarning(RuntimeWarning):
    pass


class PulseDesignError(RuntimeError):
    pass


def solve_emission_amplitudes(
    chain: GueChain | float,
    pulse: PulsePair,
    phi: float = np.pi / 2,
    num_points: int = 2001,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    check: bool = True,
) -> EmissionSolution:
    """Integrate the single-excitation amplitudes for a sender-receiver pair.

    The emitted right-moving field is sqrt(2 gamma) times the sender
    resonator amplitude.
    """
    gamma = chain if np.isscalar(chain) else float(chain.gamma_per_resonator[0, 0])
    e_phi = np.exp(1j * phi)

    def rhs(t, y):
        gb = complex(emission_pulse(t, pulse, "sender"))
        gc = complex(emission_pulse(t, pulse, "receiver"))
        a_b, a_bt, a_ct, a_c = y
        return -1j * np.array([
            np.conj(gb) * a_bt,
            -1j * gamma * a_bt + gb * a_b,
            -1j * gamma * a_ct + gc * a_c + 2 * gamma * e_phi * a_bt,
            np.conj(gc) * a_ct,
        ])

    t = np.linspace(*pulse.window, num_points)
    sol = solve_ivp(rhs, pulse.window, np.array([1, 0, 0, 0], dtype=complex), method="DOP853",
                    t_eval=t, rtol=rtol, atol=atol)
    if not sol.success:
        raise PulseDesignError(sol.message)
    amps = sol.y.T
    out = EmissionSolution(sol.t, amps, np.sqrt(2 * gamma) * amps[:, 1], gamma, phi)
    if check and abs(1 - abs(amps[-1, 3])) > 0.05:
        raise PulseDesignError(f"receiver amplitude {abs(amps[-1, 3]):.3f} misses the target")
    return out


# ---------------------------------------------------------------------------
# Three-GUE cascaded master equation
# ---------------------------------------------------------------------------


@dataclass
class CascadedModel:
    basis: FockBasis
    hamiltonian: TimeDependentHamiltonian
    L_right: sp.csr_matrix
    L_left: sp.csr_matrix
    local: CollapseSet
    chain: GueChain

    def collapses(self) -> list[sp.csr_matrix]:
        return [self.L_right, self.L_left] + self.local.jump_operators()

    def nonhermitian_hamiltonian(self, t: float) -> sp.csr_matrix:
        """H_eff - i/2 (L_R^dag L_R + L_L^dag L_L), for trajectory diagnostics."""
        H = self.hamiltonian.at(t)
        for L in (self.L_right, self.L_left):
            H = H - 0.5j * (L.conj().T @ L)
        return H.tocsr()


def collective_operators(basis: FockBasis, chain: GueChain):
    """Per-GUE right and left emission operators, phases referenced to GUE 0."""
    R, L = [], []
    for k in range(chain.num_gues):
        m1 = mode_operator(basis, mode_index(k, 0), "annihilate")
        m2 = mode_operator(basis, mode_index(k, 1), "annihilate")
        g1, g2 = np.sqrt(chain.gamma_per_resonator[k])
        ph = chain.origin_phase(k)
        d = chain.intra_gue_phase
        R.append((np.exp(-1j * ph) * (g1 * m1 + np.exp(-1j * d) * g2 * m2)).tocsr())
        L.append((np.exp(1j * ph) * (g1 * m1 + np.exp(1j * d) * g2 * m2)).tocsr())
    return R, L


def build_cascaded_model(
    chain: GueChain,
    pulse: PulsePair,
    params: ParameterSet,
    global_cutoff: int = 2,
    sender: int = 1,
) -> CascadedModel:
    """Effective master equation for GUEs sharing one waveguide.

    The waveguide is eliminated: emission is described by the collective
    right and left jump operators, and the coherent part of the exchange by
    interference terms between ordered pairs of GUEs. The sender GUE is
    driven with the emission pulse and every other GUE with the absorption
    pulse.
    """
    n = chain.num_modes
    if not 0 <= sender < chain.num_gues:
        raise ValueError("sender index out of range")
    basis = build_basis(n, global_cutoff, global_cutoff)
    ops = [mode_operator(basis, m, "annihilate") for m in range(n)]
    dag = lambda A: A.conj().T

    H0 = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for k in range(chain.num_gues):
        r1, r2 = ops[mode_index(k, 0)], ops[mode_index(k, 1)]
        g1, g2 = chain.gamma_per_resonator[k]
        hop = dag(r1) @ r2
        exchange = chain.J(k) + np.sqrt(g1 * g2) * np.sin(chain.intra_gue_phase)
        H0 = H0 + exchange * (hop + dag(hop))

    R, L = collective_operators(basis, chain)
    cross = sp.csr_matrix((basis.dim, basis.dim), dtype=complex)
    for up, down in itertools.combinations(range(chain.num_gues), 2):
        # right-movers travel from lower to higher index, left-movers the reverse
        cross = cross + dag(R[down]) @ R[up] + dag(L[up]) @ L[down]
    H0 = (H0 - 0.5j * (cross - dag(cross))).tocsr()

    terms = []
    for k in range(chain.num_gues):
        drive = dag(ops[mode_index(k, 0)]) @ ops[mode_index(k, 2)] + dag(ops[mode_index(k, 1)]) @ ops[mode_index(k, 3)]
        drive = (drive + dag(drive)).tocsr()
        role = "sender" if k == sender else "receiver"
        terms.append((drive, lambda t, role=role: float(emission_pulse(t, pulse, role))))

    H = TimeDependentHamiltonian(H0, terms, -pulse.t_final, pulse.t_final)
    roles = []
    for m in range(n):
        roles.append("transfer_resonator" if m % 4 in (0, 1) else "data_cavity")
    local = collapse_operators(basis, roles, params, include_transmon=False)
    return CascadedModel(basis, H, sum(R).tocsr(), sum(L).tocsr(), local, chain)


# ---------------------------------------------------------------------------
# State transfer
# ---------------------------------------------------------------------------


def psi_right(basis: FockBasis, gue: int) -> np.ndarray:
    """Right-emitting single-photon state (|cav3> + i|cav4>)/sqrt2 of one GUE."""
    return _pair_state(basis, gue, 1j)


def psi_left(basis: FockBasis, gue: int) -> np.ndarray:
    return _pair_state(basis, gue, -1j)


def _pair_state(basis: FockBasis, gue: int, c: complex) -> np.ndarray:
    n3 = [0] * basis.num_modes
    n4 = [0] * basis.num_modes
    n3[mode_index(gue, 2)] = 1
    n4[mode_index(gue, 3)] = 1
    return (basis.ket(n3) + c * basis.ket(n4)) / np.sqrt(2)


def vacuum(basis: FockBasis) -> np.ndarray:
    return basis.ket([0] * basis.num_modes)


def superposition_ensemble(d: int) -> list[np.ndarray]:
    """Basis states followed by (i+j)/sqrt2 and (i+ij)/sqrt2 for every pair."""
    eye = np.eye(d, dtype=complex)
    out = [eye[k] for k in range(d)]
    for i, j in itertools.combinations(range(d), 2):
        out.append((eye[i] + eye[j]) / np.sqrt(2))
        out.append((eye[i] + 1j * eye[j]) / np.sqrt(2))
    return out


@dataclass
class SingleRailChannel:
    """Transfer map on span{vacuum, psi_R in sender, psi_L in sender}.

    ``outputs[i, j]`` is the receiver-cavity image of |i><j|.
    """

    outputs: np.ndarray  # (3, 3, d_out, d_out)
    targets: np.ndarray  # (3, d_out) ideal receiver states
    out_basis: FockBasis
    populations: dict[str, np.ndarray] = field(default_factory=dict)
    times: np.ndarray | None = None

    def apply(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs, dtype=complex)
        return np.einsum("i,j,ijab->ab", c, c.conj(), self.outputs)


@dataclass
class TransferOutcome:
    F_st: float
    P_st: float
    dark_state_leakage: float = 0.0
    population_trajectories: dict[str, np.ndarray] = field(default_factory=dict)
    times: np.ndarray | None = None


def _receiver_modes(chain: GueChain, sender: int) -> list[int]:
    modes = []
    for k in range(chain.num_gues):
        if k != sender:
            modes += [mode_index(k, 2), mode_index(k, 3)]
    return modes


def propagate_single_rail(
    chain: GueChain,
    pulse: PulsePair,
    params: ParameterSet,
    global_cutoff: int = 2,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    record_times: Sequence[float] | None = None,
    target_phases: tuple[float, float] | None = None,
) -> SingleRailChannel:
    """Run the cascaded master equation on all nine input operators.

    Target phases of the transferred right- and left-moving states default
    to those of a decoherence-free run of the same pulses.
    """
    if chain.num_gues != 3:
        raise ValueError("single-rail transfer uses the three-GUE chain")
    sender = 1
    model = build_cascaded_model(chain, pulse, params, global_cutoff, sender)
    b = model.basis
    kets = [vacuum(b), psi_right(b, sender), psi_left(b, sender)]
    rho0 = np.array([np.outer(kets[i], kets[j].conj()) for i in range(3) for j in range(3)])
    times = None if record_times is None else np.asarray(record_times, dtype=float)
    if times is not None and not np.isclose(times[-1], pulse.t_final):
        times = np.append(times, pulse.t_final)
    charge = b.occupations().sum(axis=1)
    traj = lindblad_evolve(model.hamiltonian, model.collapses(), rho0, times, rtol=rtol, atol=atol, charge=charge)
    keep = _receiver_modes(chain, sender)
    reduced, out_basis = partial_trace(traj.final, b, keep)
    outputs = reduced.reshape(3, 3, out_basis.dim, out_basis.dim)

    pops = {}
    if times is not None:
        occ = b.occupations()
        diag = np.real(np.diagonal(traj.states[:, 4], axis1=-2, axis2=-1))  # psi_R input
        for m in range(b.num_modes):
            k, slot = divmod(m, 4)
            pops[f"{GUE_LABELS[k]}{slot + 1}"] = diag @ occ[:, m]

    if target_phases is None:
        if _is_noiseless(params):
            reference = outputs[:, 0]
        else:
            ideal = build_cascaded_model(chain, pulse, params.noiseless(), global_cutoff, sender)
            coh = np.array([np.outer(k, kets[0].conj()) for k in kets[1:]])
            final = lindblad_evolve(ideal.hamiltonian, ideal.collapses(), coh, rtol=rtol, atol=atol,
                                    charge=charge).final
            reference = np.concatenate([outputs[:1, 0], partial_trace(final, b, keep)[0]])
        # phase of the transferred photon relative to the vacuum component
        raw = _targets(out_basis, chain, sender, (0.0, 0.0))
        target_phases = tuple(float(np.angle(raw[k].conj() @ reference[k] @ raw[0])) for k in (1, 2))
    ch = SingleRailChannel(outputs, _targets(out_basis, chain, sender, target_phases), out_basis, pops,
                           None if times is None else traj.times)
    ch.target_phases = target_phases
    return ch


def _is_noiseless(params: ParameterSet) -> bool:
    return all(math.isinf(getattr(params, f)) for f in
               ("T1_cavity", "Tphi_cavity", "T1_transfer_nonradiative", "Tphi_transfer"))


def _targets(out_basis: FockBasis, chain: GueChain, sender: int, phases) -> np.ndarray:
    # receiver modes in the reduced basis: (a3, a4, c3, c4)
    vac = out_basis.ket([0, 0, 0, 0])
    right = (out_basis.ket([0, 0, 1, 0]) + 1j * out_basis.ket([0, 0, 0, 1])) / np.sqrt(2)
    left = (out_basis.ket([1, 0, 0, 0]) - 1j * out_basis.ket([0, 1, 0, 0])) / np.sqrt(2)
    return np.array([vac, np.exp(1j * phases[0]) * right, np.exp(1j * phases[1]) * left])


def single_rail_outcome(ch: SingleRailChannel) -> TransferOutcome:
    """Average of <target|E(rho)|target> over basis states and X, Y superpositions."""
    fids = []
    for c in superposition_ensemble(3):
        rho = ch.apply(c)
        t = c @ ch.targets
        fids.append(float(np.real(t.conj() @ rho @ t)))
    return TransferOutcome(float(np.mean(fids)), 1.0, _photon_loss(ch), ch.populations, ch.times)


def _photon_loss(ch: SingleRailChannel) -> float:
    """Probability that the right-moving photon is missing from the receivers."""
    occ = ch.out_basis.occupations().sum(axis=1)
    p = np.real(np.diagonal(ch.outputs[1, 1]))
    return float(1 - p @ occ)


def dual_rail_outcome(ch: SingleRailChannel) -> TransferOutcome:
    """Two independent single-rail transfers read in the dual-rail codespace.

    Logical states are {R0, L0, 0R, 0L}: a right- or left-moving photon in
    the first or second rail and vacuum in the other. The kept outcome
    projects onto exactly one photon in the receivers of both rails.
    """
    d1 = ch.out_basis.dim
    occ = ch.out_basis.occupations().sum(axis=1)
    n_total = (occ[:, None] + occ[None, :]).reshape(-1)
    keep = n_total == 1
    codes = [(1, 0), (2, 0), (0, 1), (0, 2)]  # (rail-1 input, rail-2 input)
    t1 = ch.targets
    targets = [np.kron(t1[i], t1[j]) for i, j in codes]

    num, kept_total = 0.0, 0.0
    ensemble = superposition_ensemble(4)
    for c in ensemble:
        rho = np.zeros((d1 * d1, d1 * d1), dtype=complex)
        for x, (i1, i2) in enumerate(codes):
            for y, (j1, j2) in enumerate(codes):
                w = c[x] * np.conj(c[y])
                if w == 0:
                    continue
                rho += w * np.kron(ch.outputs[i1, j1], ch.outputs[i2, j2])
        rho_k = rho[np.ix_(keep, keep)]
        t = sum(c[x] * targets[x] for x in range(4))[keep]
        num += float(np.real(t.conj() @ rho_k @ t))
        kept_total += float(np.real(np.trace(rho_k)))
    F = num / kept_total
    P = kept_total / len(ensemble)
    return TransferOutcome(F, P, _photon_loss(ch), ch.populations, ch.times)


def simulate_state_transfer(
    chain: GueChain,
    pulses: PulsePair,
    params: ParameterSet,
    rail: str = "single",
    input_state: np.ndarray | None = None,
    global_cutoff: int = 2,
    convergence_tol: float | None = None,
    **kwargs,
) -> TransferOutcome:
    """Transfer one input (or the averaged ensemble when ``input_state`` is None).

    Single-rail inputs are coefficient vectors over (vacuum, psi_R, psi_L);
    dual-rail inputs are coefficient vectors over (R0, L0, 0R, 0L).
    With ``convergence_tol`` set, the run is repeated one cutoff lower and a
    CutoffConvergenceWarning is issued when 1 - F_st moves by more than that
    fraction of itself.
    """
    if convergence_tol is not None and global_cutoff > 1:
        runs = {}

        def infidelity(k):
            runs[k] = simulate_state_transfer(chain, pulses, params, rail, input_state, k, **kwargs)
            return 1 - runs[k].F_st

        ok, low, high = check_cutoff_convergence(infidelity, global_cutoff - 1, convergence_tol)
        if not ok:
            warnings.warn(f"1 - F_st moved from {low:.3g} to {high:.3g} between global cutoffs "
                          f"{global_cutoff - 1} and {global_cutoff}", CutoffConvergenceWarning, stacklevel=2)
        return runs[global_cutoff]
    ch = propagate_single_rail(chain, pulses, params, global_cutoff, **kwargs)
    if input_state is None:
        return single_rail_outcome(ch) if rail == "single" else dual_rail_outcome(ch)
    c = np.asarray(input_state, dtype=complex)
    c = c / np.linalg.norm(c)
    if rail == "single":
        rho = ch.apply(c)
        t = c @ ch.targets
        return TransferOutcome(float(np.real(t.conj() @ rho @ t)), 1.0, _photon_loss(ch), ch.populations, ch.times)
    if rail == "dual":
        sub = _dual_rail_single_state(ch, c)
        return sub
    raise ValueError("rail must be 'single' or 'dual'")


def _dual_rail_single_state(ch: SingleRailChannel, c: np.ndarray) -> TransferOutcome:
    d1 = ch.out_basis.dim
    occ = ch.out_basis.occupations().sum(axis=1)
    keep = ((occ[:, None] + occ[None, :]).reshape(-1)) == 1
    codes = [(1, 0), (2, 0), (0, 1), (0, 2)]
    rho = np.zeros((d1 * d1, d1 * d1), dtype=complex)
    for x, (i1, i2) in enumerate(codes):
        for y, (j1, j2) in enumerate(codes):
            rho += c[x] * np.conj(c[y]) * np.kron(ch.outputs[i1, j1], ch.outputs[i2, j2])
    t = sum(c[x] * np.kron(ch.targets[i], ch.targets[j]) for x, (i, j) in enumerate(codes))[keep]
    rho_k = rho[np.ix_(keep, keep)]
    P = float(np.real(np.trace(rho_k)))
    return TransferOutcome(float(np.real(t.conj() @ rho_k @ t)) / P, P, _photon_loss(ch))


def average_transfer_fidelity(
    chain: GueChain,
    pulses: PulsePair,
    params: ParameterSet,
    rail: str = "single",
    global_cutoff: int = 2,
    **kwargs,
) -> TransferOutcome:
    return simulate_state_transfer(chain, pulses, params, rail, None, global_cutoff, **kwargs)


def transfer_sweep(
    parameter_name: str,
    values: Sequence[float],
    base: ParameterSet,
    chain: GueChain | None = None,
    pulses: PulsePair | None = None,
    global_cutoff: int = 2,
    **kwargs,
) -> list[dict]:
    """Sweep one coherence time with the others held at ``base``.

    Returns rows with single-rail infidelity and dual-rail post-selected
    infidelity and failure probability.
    """
    chain = GueChain.symmetric(base.gamma) if chain is None else chain
    pulses = PulsePair.from_params(base) if pulses is None else pulses
    ideal = propagate_single_rail(chain, pulses, base.noiseless(), global_cutoff, **kwargs)
    rows = []
    for v in values:
        p = base.replace(**{parameter_name: float(v)})
        ch = propagate_single_rail(chain, pulses, p, global_cutoff, target_phases=ideal.target_phases, **kwargs)
        sr, dr = single_rail_outcome(ch), dual_rail_outcome(ch)
        rows.append(dict(parameter=parameter_name, value=float(v), sr_infidelity=1 - sr.F_st,
                         dr_infidelity=1 - dr.F_st, dr_failure=1 - dr.P_st))
    return rows
