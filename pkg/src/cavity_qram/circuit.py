"""Bucket-brigade query circuit for the single-rail CSWAP tree.

Hardware map: address cavities ``addr0..addr{n-1}`` and ``bus`` feed the
top input ``I0_0``. Router ``ij`` (layer i, position j) owns a router cavity
``Ri_j`` and an input cavity ``Ii_j``; the inputs of router ``ij``'s children
``I{i+1}_{2j}`` and ``I{i+1}_{2j+1}`` double as its output ports. Bottom
routers have no outputs: the data copy acts between the bus, parked in the
bottom input cavity, and the router cavity.

Gates are simulated as ideal analytic unitaries on cavities truncated to
one photon each.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .fock import build_basis
from .gates import cswap_unitary, cz_unitary, data_copy_gates

MAX_SIM_QUBITS = 3
CZ_CLASS = ("C0SWAP", "C1SWAP", "CZ")


@dataclass(frozen=True)
class Gate:
    """One circuit element.

    ``timestep`` is the CZ layer the gate belongs to; zero-duration SWAPs
    carry the layer they precede or follow. ``stage`` labels the qubit being
    routed (``addr{k}`` or ``bus``), or ``data`` for the copy layer.
    """

    name: str
    operands: tuple[str, ...]
    timestep: int
    stage: str
    direction: str = "in"

    @property
    def is_cz_class(self) -> bool:
        return self.name in CZ_CLASS

    def as_dict(self) -> dict:
        return dict(name=self.name, operands=list(self.operands), timestep=self.timestep,
                    stage=self.stage, direction=self.direction)


def router_name(layer: int, pos: int) -> str:
    return f"R{layer}_{pos}"


def input_name(layer: int, pos: int) -> str:
    return f"I{layer}_{pos}"


def hardware_cavities(n: int) -> list[str]:
    names = [f"addr{k}" for k in range(n)] + ["bus"]
    for layer in range(n):
        for pos in range(2**layer):
            names += [router_name(layer, pos), input_name(layer, pos)]
    return names


def hardware_edges(n: int) -> set[frozenset]:
    """Pairs of cavities joined by a beamsplitter or a shared transmon."""
    edges = {frozenset((f"addr{k}", "I0_0")) for k in range(n)}
    edges.add(frozenset(("bus", "I0_0")))
    for layer in range(n):
        for pos in range(2**layer):
            edges.add(frozenset((router_name(layer, pos), input_name(layer, pos))))
            if layer + 1 < n:
                for child in (2 * pos, 2 * pos + 1):
                    edges.add(frozenset((input_name(layer, pos), input_name(layer + 1, child))))
    return edges


def unit_of(k: int, layer: int) -> int:
    """Routing unit in which qubit k (bus = n) crosses ``layer``.

    Qubit 1 crosses the top router first; every later qubit enters as soon
    as its predecessor has cleared the input one layer further down.
    """
    if k == 1:
        return 1 + layer
    return 2 * k - 2 + layer


@dataclass
class QramCircuit:
    n: int
    data: tuple[int, ...]
    cavities: list[str]
    gates: list[Gate] = field(default_factory=list)

    @property
    def N(self) -> int:
        return 2**self.n

    @property
    def route_gates(self) -> list[Gate]:
        return [g for g in self.gates if g.direction == "in"]

    @property
    def cz_count(self) -> int:
        return sum(g.is_cz_class for g in self.gates)

    @property
    def timestep_span(self) -> int:
        return max(g.timestep for g in self.gates if g.is_cz_class)

    def counts_by_class(self) -> dict[str, int]:
        out = {"setting": 0, "routing": 0, "data_copy": 0}
        for g in self.gates:
            if g.stage == "data":
                out["data_copy"] += g.is_cz_class
            elif g.name == "SWAP":
                out["setting"] += 1
            else:
                out["routing"] += 1
        return out

    def check_adjacency(self) -> bool:
        edges = hardware_edges(self.n)
        for g in self.gates:
            ops = g.operands
            if g.name in ("C0SWAP", "C1SWAP"):
                pairs = [(ops[0], ops[1]), (ops[1], ops[2])]
            elif len(ops) == 2:
                pairs = [ops]
            else:
                continue
            if any(frozenset(p) not in edges for p in pairs):
                return False
        return True

    def check_schedule(self) -> bool:
        """No cavity takes part in two CZ-class gates of the same timestep."""
        seen: dict[int, set] = {}
        for g in self.gates:
            if not g.is_cz_class:
                continue
            used = seen.setdefault(g.timestep, set())
            if used.intersection(g.operands):
                return False
            used.update(g.operands)
        return True

    def to_json(self) -> str:
        return json.dumps(dict(n=self.n, data=list(self.data), cavities=self.cavities,
                               gates=[g.as_dict() for g in self.gates]), indent=1)


def _route_in(n: int) -> list[Gate]:
    events = []  # (unit, order, Gate)

    def add(unit, order, gate):
        events.append((unit, order, len(events), gate))

    add(0, 0, Gate("SWAP", ("addr0", "I0_0"), 1, "addr0"))
    add(0, 3, Gate("SWAP", ("I0_0", "R0_0"), 1, "addr0"))
    for k in range(1, n + 1):
        stage = "bus" if k == n else f"addr{k}"
        src = "bus" if k == n else f"addr{k}"
        first = unit_of(k, 0)
        add(first, 0, Gate("SWAP", (src, "I0_0"), 2 * first - 1, stage))
        last_layer = k - 1 if k < n else n - 2
        for layer in range(last_layer + 1):
            u = unit_of(k, layer)
            for variant, order, ts in (("C0", 1, 2 * u - 1), ("C1", 2, 2 * u)):
                for pos in range(2**layer):
                    child = 2 * pos + (0 if variant == "C0" else 1)
                    add(u, order, Gate(f"{variant}SWAP", (router_name(layer, pos), input_name(layer, pos),
                                                           input_name(layer + 1, child)), ts, stage))
        if k < n:
            u = unit_of(k, k - 1)
            for pos in range(2**k):
                add(u, 3, Gate("SWAP", (input_name(k, pos), router_name(k, pos)), 2 * u, stage))
    events.sort(key=lambda e: e[:3])
    return [e[3] for e in events]


def build_qram_circuit(n: int, data: Sequence[int] | None = None) -> QramCircuit:
    """Gate list of U_route^dag U_data U_route with pipelined timesteps."""
    if n < 2:
        raise ValueError("need n >= 2 address qubits")
    N = 2**n
    data = tuple(int(d) for d in (data if data is not None else [1] * N))
    if len(data) != N or any(d not in (0, 1) for d in data):
        raise ValueError(f"data must be {N} classical bits")
    route = _route_in(n)
    t_in = max(g.timestep for g in route if g.is_cz_class)

    copy = []
    bottom = n - 1
    for variant, ts in (("C0Z", t_in + 1), ("C1Z", t_in + 2)):
        for pos in range(2 ** bottom):
            bit = data[2 * pos + (0 if variant == "C0Z" else 1)]
            for name in data_copy_gates(variant, bit):
                ops = (router_name(bottom, pos), input_name(bottom, pos)) if name == "CZ" else (input_name(bottom, pos),)
                copy.append(Gate(name, ops, ts, "data", "data"))

    mirror = 2 * t_in + 3
    back = [Gate(g.name, g.operands, mirror - g.timestep, g.stage, "out") for g in reversed(route)]
    return QramCircuit(n, data, hardware_cavities(n), route + copy + back)


# ---------------------------------------------------------------------------
# Oracle
# ---------------------------------------------------------------------------


def bus_state(bit: int) -> np.ndarray:
    """(|0> + (-1)^bit |1>)/sqrt 2."""
    return np.array([1.0, (-1.0) ** bit]) / np.sqrt(2)


def oracle_state(address_amplitudes: Sequence[complex], data: Sequence[int], circuit: QramCircuit | None = None):
    """sum_i alpha_i |i> |b_{D_i}> with the tree in vacuum.

    Without a circuit the result is a (2^n, 2) array over (address, bus);
    with one it is the full statevector on the circuit's cavities.
    """
    alpha = np.asarray(address_amplitudes, dtype=complex)
    N = len(alpha)
    n = int(round(np.log2(N)))
    if 2**n != N or len(data) != N:
        raise ValueError("need 2^n amplitudes and 2^n data bits")
    if not np.isclose(np.vdot(alpha, alpha).real, 1.0, atol=1e-10):
        raise ValueError("address amplitudes must be normalized")
    small = np.array([a * bus_state(d) for a, d in zip(alpha, data)])
    if circuit is None:
        return small
    psi = np.zeros((2,) * len(circuit.cavities), dtype=complex)
    idx = [0] * len(circuit.cavities)
    for i in range(N):
        bits = [(i >> (n - 1 - k)) & 1 for k in range(n)]
        for b in (0, 1):
            idx[:n] = bits
            idx[n] = b
            psi[tuple(idx)] = small[i, b]
    return psi


# ---------------------------------------------------------------------------
# Statevector simulation
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _local_unitary(name: str) -> np.ndarray:
    """Gate matrix on cavities truncated to one photon, from the two-photon build."""
    if name in ("C0SWAP", "C1SWAP"):
        basis = build_basis(3, 2)
        U = cswap_unitary(basis, 0, 1, 2, name[:2]).toarray()
        keep = [basis.index((a, b, c)) for a in (0, 1) for b in (0, 1) for c in (0, 1)]
    elif name == "CZ":
        basis = build_basis(2, 2)
        U = cz_unitary(basis, 0, 1).toarray()
        keep = [basis.index((a, b)) for a in (0, 1) for b in (0, 1)]
    elif name == "SWAP":
        return np.eye(4)[[0, 2, 1, 3]].astype(complex)
    elif name == "Z":
        return np.diag([1.0, -1.0]).astype(complex)
    else:
        raise ValueError(f"unknown gate {name!r}")
    return U[np.ix_(keep, keep)]


def _apply(psi: np.ndarray, U: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    Ut = U.reshape((2,) * (2 * k))
    out = np.tensordot(Ut, psi, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


@dataclass
class QueryOutcome:
    state: np.ndarray
    fidelity: float
    tree_vacuum_residual: float
    leakage: float
    norm: float


def run_gates(circuit: QramCircuit, psi: np.ndarray, gates: Sequence[Gate] | None = None) -> tuple[np.ndarray, float]:
    """Apply gates in list order; returns the state and the norm lost above one photon."""
    where = {c: i for i, c in enumerate(circuit.cavities)}
    gates = circuit.gates if gates is None else gates
    norm0 = np.vdot(psi, psi).real
    for g in gates:
        U = _local_unitary(g.name)
        if g.direction == "out":
            U = U.conj().T
        psi = _apply(psi, U, [where[c] for c in g.operands])
    return psi, float(norm0 - np.vdot(psi, psi).real)


def initial_state(circuit: QramCircuit, address_amplitudes: Sequence[complex],
                  occupied: Sequence[str] = ()) -> np.ndarray:
    """Addresses in the given superposition, bus in |+>, tree in vacuum.

    Cavities named in ``occupied`` start with one photon instead.
    """
    oracle_input = oracle_state(address_amplitudes, [0] * circuit.N, circuit)
    if not occupied:
        return oracle_input
    where = {c: i for i, c in enumerate(circuit.cavities)}
    flip = np.array([[0, 0], [1, 0]], dtype=complex)  # |0> -> |1>
    psi = oracle_input
    for c in occupied:
        psi = _apply(psi, flip, [where[c]])
    return psi


def simulate_ideal_query(
    circuit: QramCircuit,
    address_amplitudes: Sequence[complex],
    occupied: Sequence[str] = (),
    leakage_tol: float = 1e-10,
    raise_on_leakage: bool = True,
) -> QueryOutcome:
    if circuit.n > MAX_SIM_QUBITS:
        raise ValueError(f"statevector simulation supports n <= {MAX_SIM_QUBITS}")
    psi0 = initial_state(circuit, address_amplitudes, occupied)
    psi, leak = run_gates(circuit, psi0)
    if leak > leakage_tol and raise_on_leakage:
        raise RuntimeError(f"population {leak:.3g} left the one-photon-per-cavity space")
    target = oracle_state(address_amplitudes, circuit.data, circuit)
    fid = float(abs(np.vdot(target, psi)) ** 2)
    n_reg = circuit.n + 1
    flat = psi.reshape(2**n_reg, -1)
    residual = float(np.vdot(psi, psi).real - np.vdot(flat[:, 0], flat[:, 0]).real)
    return QueryOutcome(psi, fid, residual, leak, float(np.vdot(psi, psi).real))


def count_validation(n_values: Sequence[int] = range(2, 13)) -> list[dict]:
    """Builder counts against the closed forms; raises on any mismatch."""
    from .query import ArchitectureSpec, resources

    rows = []
    for n in n_values:
        c = build_qram_circuit(n)
        r = resources(ArchitectureSpec("CSWAP", "single", n))
        row = dict(n=n, gates_built=c.cz_count, gates_formula=r.N_gates,
                   timesteps_built=c.timestep_span, timesteps_formula=r.N_ts)
        if row["gates_built"] != row["gates_formula"] or row["timesteps_built"] != row["timesteps_formula"]:
            raise AssertionError(f"count mismatch at n={n}: {row}")
        rows.append(row)
    return rows
