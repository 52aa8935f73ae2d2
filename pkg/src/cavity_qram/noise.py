"""Coherence parameters, jump operators and a Lindblad integrator.

Times are in microseconds and rates in inverse microseconds. A lifetime of
``inf`` disables the corresponding channel.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import solve_ivp

from .fock import FockBasis, ancilla_operator, mode_operator
from .gates import GateSchedule

ROLES = ("data_cavity", "transfer_resonator")


@dataclass(frozen=True)
class ParameterSet:
    """Coherence times and drive rates.

    Attributes
    ----------
    T1_cavity, Tphi_cavity : float
        Data-cavity energy relaxation and pure dephasing times (us).
    T1_transmon_ge, Tphi_transmon_ee : float
        Transmon g-e relaxation and e-level dephasing times (us).
    n_th : float
        Thermal occupation of every bosonic mode.
    chi_over_2pi : float
        Dispersive shift in MHz.
    T1_transfer_nonradiative, Tphi_transfer : float
        Transfer-resonator intrinsic relaxation and dephasing times (us).
    gamma_over_2pi, xi_over_2pi : float
        Waveguide decay rate and pulse bandwidth in MHz.
    lambda_b, lambda_c : float
        Sender and receiver pulse scale factors.
    """

    T1_cavity: float
    Tphi_cavity: float
    T1_transmon_ge: float
    Tphi_transmon_ee: float
    n_th: float = 0.01
    chi_over_2pi: float = 2.0
    T1_transfer_nonradiative: float = 200.0
    Tphi_transfer: float = 200.0
    gamma_over_2pi: float = 20.0
    xi_over_2pi: float = 0.95
    lambda_b: float = 1.018
    lambda_c: float = 1.017
    name: str = "custom"

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name in ("name", "n_th"):
                continue
            v = getattr(self, f.name)
            if not (v > 0):
                raise ValueError(f"{f.name} must be positive, got {v}")
        if self.n_th < 0:
            raise ValueError("n_th must be non-negative")

    @property
    def chi(self) -> float:
        return 2 * np.pi * self.chi_over_2pi

    @property
    def gamma(self) -> float:
        return 2 * np.pi * self.gamma_over_2pi

    @property
    def xi(self) -> float:
        return 2 * np.pi * self.xi_over_2pi

    @property
    def t_cz(self) -> float:
        return 4 * np.pi / self.chi

    def replace(self, **changes) -> "ParameterSet":
        return dataclasses.replace(self, **changes)

    def noiseless(self) -> "ParameterSet":
        inf = math.inf
        return self.replace(
            T1_cavity=inf, Tphi_cavity=inf, T1_transmon_ge=inf, Tphi_transmon_ee=inf,
            T1_transfer_nonradiative=inf, Tphi_transfer=inf, n_th=0.0,
        )

    def to_dict(self) -> dict:
        return {k: (str(v) if isinstance(v, float) and math.isinf(v) else v)
                for k, v in dataclasses.asdict(self).items()}

    @classmethod
    def from_dict(cls, data: dict) -> "ParameterSet":
        if "preset" in data:
            base = preset(data["preset"])
            data = {k: v for k, v in data.items() if k != "preset"}
            return base.replace(**{k: _as_float(k, v) for k, v in data.items()})
        return cls(**{k: _as_float(k, v) for k, v in data.items()})

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ParameterSet":
        return cls.from_dict(json.loads(text))


def _as_float(key, value):
    if key == "name":
        return value
    return float(value)


_PRESETS = {
    "PS1": dict(T1_cavity=600.0, Tphi_cavity=5000.0, T1_transmon_ge=200.0, Tphi_transmon_ee=400.0,
                T1_transfer_nonradiative=100.0, Tphi_transfer=100.0),
    "PS2": dict(T1_cavity=25000.0, Tphi_cavity=106000.0, T1_transmon_ge=500.0, Tphi_transmon_ee=900.0,
                T1_transfer_nonradiative=200.0, Tphi_transfer=200.0),
    # transfer-resonator times are only tabulated for the first two sets
    "PS3": dict(T1_cavity=25000.0, Tphi_cavity=106000.0, T1_transmon_ge=2000.0, Tphi_transmon_ee=4000.0,
                T1_transfer_nonradiative=200.0, Tphi_transfer=200.0),
}

PRESET_NAMES = tuple(_PRESETS)


def preset(name: str) -> ParameterSet:
    """Named coherence-parameter preset (PS1, PS2 or PS3)."""
    try:
        values = _PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {PRESET_NAMES}") from None
    return ParameterSet(name=name, **values)


# ---------------------------------------------------------------------------
# Collapse operators
# ---------------------------------------------------------------------------


@dataclass
class CollapseSet:
    """Jump operators with their rates; the dissipator uses sqrt(rate)*op."""

    operators: list[sp.csr_matrix] = field(default_factory=list)
    rates: list[float] = field(default_factory=list)
    labels: list[str] = field(default_factory=list)

    def add(self, op, rate: float, label: str = "") -> None:
        if rate < 0:
            raise ValueError("collapse rate must be non-negative")
        if rate == 0:
            return
        self.operators.append(sp.csr_matrix(op))
        self.rates.append(float(rate))
        self.labels.append(label)

    def __len__(self) -> int:
        return len(self.operators)

    def __add__(self, other: "CollapseSet") -> "CollapseSet":
        return CollapseSet(self.operators + other.operators, self.rates + other.rates, self.labels + other.labels)

    def jump_operators(self) -> list[sp.csr_matrix]:
        return [np.sqrt(r) * op for op, r in zip(self.operators, self.rates)]


def _rate(T: float) -> float:
    return 0.0 if math.isinf(T) else 1.0 / T


def collapse_operators(
    basis: FockBasis,
    mode_roles: Sequence[str | None],
    params: ParameterSet,
    include_transmon: bool | None = None,
) -> CollapseSet:
    """Table-style jump operators for every mode and the transmon.

    Each mode gets a thermal decay pair (a at (1+n_th)/T1, a^dag at n_th/T1)
    and number-operator dephasing at 1/Tphi. The transmon gets |g><e|,
    |e><f| at twice that rate, |e><e| and |f><f| at four times that rate.
    A role of ``None`` marks a mode with no local noise.
    """
    if len(mode_roles) != basis.num_modes:
        raise ValueError("one role per mode is required")
    cs = CollapseSet()
    for m, role in enumerate(mode_roles):
        if role is None:
            continue
        if role == "data_cavity":
            T1, Tphi = params.T1_cavity, params.Tphi_cavity
        elif role == "transfer_resonator":
            T1, Tphi = params.T1_transfer_nonradiative, params.Tphi_transfer
        else:
            raise ValueError(f"unknown mode role {role!r}")
        a = mode_operator(basis, m, "annihilate")
        g1 = _rate(T1)
        cs.add(a, (1 + params.n_th) * g1, f"decay[{m}]")
        cs.add(a.conj().T, params.n_th * g1, f"heat[{m}]")
        cs.add(mode_operator(basis, m, "number"), _rate(Tphi), f"dephase[{m}]")
    if include_transmon is None:
        include_transmon = basis.has_ancilla
    if include_transmon:
        g1 = _rate(params.T1_transmon_ge)
        gphi = _rate(params.Tphi_transmon_ee)
        cs.add(ancilla_operator(basis, "lower_ge"), g1, "transmon ge decay")
        cs.add(ancilla_operator(basis, "lower_ef"), 2 * g1, "transmon ef decay")
        cs.add(ancilla_operator(basis, "proj_e"), gphi, "transmon e dephase")
        cs.add(ancilla_operator(basis, "proj_f"), 4 * gphi, "transmon f dephase")
    return cs


# ---------------------------------------------------------------------------
# Liouvillian construction (row-major vectorization)
# ---------------------------------------------------------------------------


def commutator_superop(A) -> sp.csr_matrix:
    """Superoperator of rho -> -i (A rho - rho A)."""
    A = sp.csr_matrix(A)
    I = sp.identity(A.shape[0], dtype=complex, format="csr")
    return (-1j * (sp.kron(A, I) - sp.kron(I, A.T))).tocsr()


def dissipator_superop(L) -> sp.csr_matrix:
    L = sp.csr_matrix(L)
    I = sp.identity(L.shape[0], dtype=complex, format="csr")
    LdL = (L.conj().T @ L).tocsr()
    return (sp.kron(L, L.conj()) - 0.5 * (sp.kron(LdL, I) + sp.kron(I, LdL.T))).tocsr()


def liouvillian(H, collapses: CollapseSet | Sequence = ()) -> sp.csr_matrix:
    jumps = collapses.jump_operators() if isinstance(collapses, CollapseSet) else list(collapses)
    out = commutator_superop(H)
    for L in jumps:
        out = out + dissipator_superop(L)
    return out.tocsr()


@dataclass
class TimeDependentHamiltonian:
    """H(t) = H0 + sum_k f_k(t) H_k over the interval [t_start, t_end].

    Each ``H_k`` may be non-Hermitian as long as the total is Hermitian, so a
    complex coupling g(t) A + conj(g(t)) A^dag is entered as two terms.
    """

    H0: sp.csr_matrix
    terms: list[tuple[sp.csr_matrix, Callable[[float], complex]]]
    t_start: float
    t_end: float

    def at(self, t: float) -> sp.csr_matrix:
        H = sp.csr_matrix(self.H0, dtype=complex)
        for Hk, fk in self.terms:
            H = H + fk(t) * Hk
        return H


class IntegrationError(RuntimeError):
    """Raised when the adaptive integrator fails; carries the failure time."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (at t = {time:.6g} us)")
        self.time = time


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), batch, dim, dim)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _integrate(rhs, y0, t0, t1, t_eval, rtol, atol, method):
    last = [t0]

    def tracked(t, y):
        last[0] = t
        return rhs(t, y)

    sol = solve_ivp(tracked, (t0, t1), y0, method=method, t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise IntegrationError(sol.message, float(last[0]))
    return sol


def _charge_blocks(charge, batch, superops):
    """Group batch members by charge difference, or None when the split is not exact."""
    dim = batch.shape[1]
    diff = (charge[:, None] - charge[None, :]).reshape(-1)
    for S in superops:
        S = S.tocoo()
        if np.any(diff[S.row] != diff[S.col]):
            return None
    groups: dict[float, list[int]] = {}
    for k, X in enumerate(batch):
        support = np.unique(diff[np.flatnonzero(X.reshape(-1))])
        if support.size > 1:
            return None
        groups.setdefault(float(support[0]) if support.size else 0.0, []).append(k)
    return [(np.flatnonzero(diff == c), members) for c, members in groups.items()]


def _evolve_blocks(blocks, batch, L0, Lk, t0, t1, times, rtol, atol, method) -> Trajectory:
    nb, dim = batch.shape[0], batch.shape[1]
    states = np.zeros((len(times), nb, dim * dim), dtype=complex)
    for idx, members in blocks:
        A0 = L0[idx][:, idx]
        Ak = [(S[idx][:, idx], fk) for S, fk in Lk]
        m = len(members)

        def rhs(t, y, A0=A0, Ak=Ak, m=m):
            Y = y.reshape(-1, m)
            out = A0 @ Y
            for S, fk in Ak:
                out += fk(t) * (S @ Y)
            return out.reshape(-1)

        y0 = batch[members].reshape(m, dim * dim)[:, idx].T.reshape(-1)
        sol = _integrate(rhs, y0, t0, t1, times, rtol, atol, method)
        for k in range(sol.y.shape[1]):
            states[k][np.ix_(members, idx)] = sol.y[:, k].reshape(-1, m).T
    return Trajectory(np.asarray(times), states.reshape(len(times), nb, dim, dim))


def lindblad_evolve(
    dynamics,
    collapses: CollapseSet | Sequence,
    rho0: np.ndarray,
    output_times: Sequence[float] | None = None,
    rtol: float = 1e-8,
    atol: float = 1e-10,
    method: str = "DOP853",
    charge: np.ndarray | None = None,
) -> Trajectory:
    """Integrate d rho/dt = -i[H(t), rho] + sum_k D[L_k] rho.

    Parameters
    ----------
    dynamics : GateSchedule, TimeDependentHamiltonian or (H, duration)
        Source of the Hamiltonian. Instant schedule segments apply U rho U^dag.
    collapses : CollapseSet or list of jump operators
        Jump operators already include sqrt(rate) when given as a list.
    rho0 : ndarray
        One density matrix (dim, dim) or a batch (batch, dim, dim); the batch
        is integrated as one vector.
    output_times : sequence, optional
        Times at which to record the state (only for a single Hamiltonian
        interval). Defaults to the final time.
    charge : ndarray, optional
        Excitation number of each basis state. When every generator maps
        |i><j| onto elements of equal charge difference and every input sits
        in one such block, each block is integrated on its own support.
        Falls back to the full space otherwise. Hamiltonian intervals only.

    Returns
    -------
    Trajectory
        States are always batched, shape (n_times, batch, dim, dim).
    """
    rho0 = np.asarray(rho0, dtype=complex)
    single = rho0.ndim == 2
    batch = rho0[None] if single else rho0
    nb, dim = batch.shape[0], batch.shape[1]
    jumps = collapses.jump_operators() if isinstance(collapses, CollapseSet) else list(collapses)
    diss = sp.csr_matrix((dim * dim, dim * dim), dtype=complex)
    for L in jumps:
        diss = diss + dissipator_superop(L)

    def to_y(X):
        return X.reshape(nb, dim * dim).T.reshape(-1)

    def from_y(y):
        return y.reshape(dim * dim, nb).T.reshape(nb, dim, dim)

    if isinstance(dynamics, tuple):
        H, duration = dynamics
        dynamics = TimeDependentHamiltonian(sp.csr_matrix(H), [], 0.0, float(duration))

    if isinstance(dynamics, TimeDependentHamiltonian):
        L0 = (commutator_superop(dynamics.H0) + diss).tocsr()
        Lk = [(commutator_superop(Hk), fk) for Hk, fk in dynamics.terms]

        def rhs(t, y):
            Y = y.reshape(dim * dim, nb)
            out = L0 @ Y
            for S, fk in Lk:
                out += fk(t) * (S @ Y)
            return out.reshape(-1)

        t0, t1 = dynamics.t_start, dynamics.t_end
        times = np.array([t1] if output_times is None else output_times, dtype=float)
        if t1 == t0:
            return Trajectory(times, np.repeat(batch[None], len(times), axis=0))
        if charge is not None:
            blocks = _charge_blocks(np.asarray(charge), batch, [L0] + [S for S, _ in Lk])
            if blocks is not None:
                return _evolve_blocks(blocks, batch, L0, Lk, t0, t1, times, rtol, atol, method)
        sol = _integrate(rhs, to_y(batch), t0, t1, times, rtol, atol, method)
        states = np.stack([from_y(sol.y[:, k]) for k in range(sol.y.shape[1])])
        return Trajectory(sol.t, states)

    if not isinstance(dynamics, GateSchedule):
        raise TypeError("dynamics must be a GateSchedule, TimeDependentHamiltonian or (H, duration)")
    if output_times is not None:
        raise ValueError("output_times is only supported for a single Hamiltonian interval")
    X = batch.copy()
    t = 0.0
    for seg in dynamics.segments:
        if seg.instantaneous:
            U = seg.unitary.toarray()
            X = U @ X @ U.conj().T
            continue
        Ls = (commutator_superop(seg.hamiltonian) + diss).tocsr()
        rhs = lambda _t, y, Ls=Ls: (Ls @ y.reshape(dim * dim, nb)).reshape(-1)
        try:
            sol = _integrate(rhs, to_y(X), 0.0, seg.duration, [seg.duration], rtol, atol, method)
        except IntegrationError as exc:
            raise IntegrationError(f"segment {seg.label!r} failed", t + exc.time) from exc
        X = from_y(sol.y[:, -1])
        t += seg.duration
    return Trajectory(np.array([t]), X[None])
