"""Truncated multimode Fock spaces with an optional three-level ancilla.

Operators are stored as ``scipy.sparse`` CSR matrices and states as dense
numpy arrays. Density matrices are vectorized row-major, so that
``vec(A @ rho @ B) == kron(A, B.T) @ vec(rho)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg

ANCILLA_LABELS = ("g", "e", "f")


@dataclass(frozen=True)
class FockBasis:
    """Ordered basis of admissible occupation tuples.

    Attributes
    ----------
    num_modes : int
        Number of bosonic modes.
    per_mode_cutoff : tuple of int
        Maximum photon number of each mode (inclusive).
    global_cutoff : int or None
        Maximum total photon number across all modes.
    ancilla_levels : int
        0 for no ancilla, 3 for a g/e/f transmon.
    state_list : tuple of tuple
        Occupation tuples in lexicographic order. When an ancilla is present
        the first entry of each tuple is the ancilla level (0=g, 1=e, 2=f).
    index_map : dict
        Inverse of ``state_list``.
    """

    num_modes: int
    per_mode_cutoff: tuple[int, ...]
    global_cutoff: int | None
    ancilla_levels: int
    state_list: tuple[tuple[int, ...], ...] = field(repr=False)
    index_map: dict[tuple[int, ...], int] = field(repr=False, compare=False)

    @property
    def dim(self) -> int:
        return len(self.state_list)

    @property
    def has_ancilla(self) -> bool:
        return self.ancilla_levels == 3

    @property
    def mode_offset(self) -> int:
        return 1 if self.has_ancilla else 0

    @property
    def mode_dim(self) -> int:
        """Dimension of the mode sector alone."""
        return self.dim // (3 if self.has_ancilla else 1)

    def occupations(self) -> np.ndarray:
        """(dim, num_modes) integer array of photon numbers."""
        arr = np.array(self.state_list, dtype=int).reshape(self.dim, -1)
        return arr[:, self.mode_offset:]

    def ancilla_column(self) -> np.ndarray:
        if not self.has_ancilla:
            raise ValueError("basis has no ancilla")
        return np.array([s[0] for s in self.state_list], dtype=int)

    def index(self, occupation: Sequence[int], ancilla: int | None = None) -> int:
        key = tuple(occupation)
        if self.has_ancilla:
            if ancilla is None:
                raise ValueError("ancilla level required")
            key = (ancilla,) + key
        return self.index_map[key]

    def ket(self, occupation: Sequence[int], ancilla: int | None = None) -> np.ndarray:
        psi = np.zeros(self.dim, dtype=complex)
        psi[self.index(occupation, ancilla)] = 1.0
        return psi

    def identity(self) -> sp.csr_matrix:
        return sp.identity(self.dim, dtype=complex, format="csr")


def _admissible(cutoffs: Sequence[int], budget: int | None) -> Iterator[tuple[int, ...]]:
    # Lexicographic enumeration with pruning on the remaining global budget.
    if not cutoffs:
        yield ()
        return
    top = cutoffs[0] if budget is None else min(cutoffs[0], budget)
    for n in range(top + 1):
        rest = None if budget is None else budget - n
        for tail in _admissible(cutoffs[1:], rest):
            yield (n,) + tail


def build_basis(
    num_modes: int,
    per_mode_cutoff: int | Sequence[int],
    global_cutoff: int | None = None,
    ancilla_levels: int = 0,
) -> FockBasis:
    """Build a truncated Fock basis.

    Parameters
    ----------
    num_modes : int
        Number of modes, at least 1.
    per_mode_cutoff : int or sequence of int
        Inclusive photon-number cutoff, shared or per mode.
    global_cutoff : int, optional
        Inclusive cutoff on the total photon number.
    ancilla_levels : {0, 3}
        Attach a g/e/f transmon as the leading tensor factor.
    """
    if num_modes < 1:
        raise ValueError("num_modes must be >= 1")
    if np.isscalar(per_mode_cutoff):
        cutoffs = (int(per_mode_cutoff),) * num_modes
    else:
        cutoffs = tuple(int(c) for c in per_mode_cutoff)
        if len(cutoffs) != num_modes:
            raise ValueError("per_mode_cutoff length must equal num_modes")
    if any(c < 0 for c in cutoffs) or (global_cutoff is not None and global_cutoff < 0):
        raise ValueError("cutoffs must be non-negative")
    if ancilla_levels not in (0, 3):
        raise ValueError("ancilla_levels must be 0 or 3")

    modes = list(_admissible(cutoffs, global_cutoff))
    if ancilla_levels:
        states = [(k,) + m for k in range(ancilla_levels) for m in modes]
    else:
        states = modes
    if not states:
        raise ValueError("cutoffs admit no basis states")
    return FockBasis(
        num_modes=num_modes,
        per_mode_cutoff=cutoffs,
        global_cutoff=global_cutoff,
        ancilla_levels=ancilla_levels,
        state_list=tuple(states),
        index_map={s: i for i, s in enumerate(states)},
    )


def mode_operator(basis: FockBasis, mode_index: int, kind: str) -> sp.csr_matrix:
    """Annihilation, creation or number operator of one mode.

    Creation past a cutoff maps to zero; it is the adjoint of annihilation
    within the truncated space.
    """
    if not 0 <= mode_index < basis.num_modes:
        raise IndexError(f"mode {mode_index} out of range")
    col = basis.mode_offset + mode_index
    occ = np.array([s[col] for s in basis.state_list])
    if kind == "number":
        return sp.diags(occ.astype(complex), format="csr")
    rows, cols, vals = [], [], []
    for j, state in enumerate(basis.state_list):
        n = state[col]
        if n == 0:
            continue
        target = state[:col] + (n - 1,) + state[col + 1:]
        rows.append(basis.index_map[target])
        cols.append(j)
        vals.append(np.sqrt(n))
    a = sp.csr_matrix((np.array(vals, dtype=complex), (rows, cols)), shape=(basis.dim, basis.dim))
    if kind == "annihilate":
        return a
    if kind == "create":
        return a.conj().T.tocsr()
    raise ValueError(f"unknown mode operator kind {kind!r}")


def total_number(basis: FockBasis, modes: Sequence[int] | None = None) -> sp.csr_matrix:
    occ = basis.occupations()
    cols = range(basis.num_modes) if modes is None else modes
    return sp.diags(occ[:, list(cols)].sum(axis=1).astype(complex), format="csr")


# 3x3 ancilla matrices in the (g, e, f) ordering. Pauli matrices live on g/f.
def _gf_pauli(axis: str) -> np.ndarray:
    m = np.zeros((3, 3), dtype=complex)
    if axis == "x":
        m[0, 2] = m[2, 0] = 1
    elif axis == "y":
        m[0, 2], m[2, 0] = -1j, 1j
    elif axis == "z":
        m[0, 0], m[2, 2] = 1, -1
    else:
        raise ValueError(f"unknown axis {axis!r}")
    return m


def ancilla_matrix(kind: str, axis: str | None = None, angle: float | None = None) -> np.ndarray:
    """3x3 matrix of an ancilla operator in the (g, e, f) ordering."""
    m = np.zeros((3, 3), dtype=complex)
    if kind == "sigma_z_gf":
        return _gf_pauli("z")
    if kind == "lower_ge":
        m[0, 1] = 1
    elif kind == "lower_ef":
        m[1, 2] = 1
    elif kind in ("proj_g", "proj_e", "proj_f"):
        k = ANCILLA_LABELS.index(kind[-1])
        m[k, k] = 1
    elif kind == "hadamard_gf":
        m = (_gf_pauli("x") + _gf_pauli("z")) / np.sqrt(2)
        m[1, 1] = 1
    elif kind == "rotation":
        if axis is None or angle is None:
            raise ValueError("rotation needs axis and angle")
        # exp(-i angle/2 sigma) on g/f, identity on e
        s = _gf_pauli(axis)
        m = np.cos(angle / 2) * np.diag([1, 0, 1]).astype(complex) - 1j * np.sin(angle / 2) * s
        m[1, 1] = 1
    else:
        raise ValueError(f"unknown ancilla operator kind {kind!r}")
    return m


def ancilla_operator(
    basis: FockBasis, kind: str, axis: str | None = None, angle: float | None = None
) -> sp.csr_matrix:
    """Ancilla operator acting as identity on the mode sector."""
    if not basis.has_ancilla:
        raise ValueError("basis has no ancilla")
    small = sp.csr_matrix(ancilla_matrix(kind, axis, angle))
    return sp.kron(small, sp.identity(basis.mode_dim, dtype=complex), format="csr")


def is_hermitian(op, atol: float = 1e-12) -> bool:
    diff = op - op.conj().T
    if sp.issparse(diff):
        return diff.count_nonzero() == 0 or abs(diff).max() <= atol
    return bool(np.max(np.abs(diff), initial=0.0) <= atol)


def propagator(H, t: float) -> np.ndarray:
    """Dense exp(-i H t) for Hermitian H via eigendecomposition."""
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    if not is_hermitian(Hd, atol=1e-10 * max(1.0, np.abs(Hd).max(initial=0.0))):
        raise ValueError("Hamiltonian is not Hermitian")
    w, v = scipy.linalg.eigh(Hd)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def evolve_unitary(H, t: float, state: np.ndarray, dense_limit: int = 512) -> np.ndarray:
    """Apply exp(-i H t) to a state vector or density matrix."""
    if not is_hermitian(H, atol=1e-10):
        raise ValueError("Hamiltonian is not Hermitian")
    state = np.asarray(state, dtype=complex)
    dim = H.shape[0]
    if dim <= dense_limit:
        U = propagator(H, t)
        return U @ state if state.ndim == 1 else U @ state @ U.conj().T
    A = -1j * t * sp.csr_matrix(H)
    if state.ndim == 1:
        return scipy.sparse.linalg.expm_multiply(A, state)
    left = scipy.sparse.linalg.expm_multiply(A, state)
    return scipy.sparse.linalg.expm_multiply(A, left.conj().T).conj().T


def ket_to_dm(psi: np.ndarray) -> np.ndarray:
    return np.outer(psi, psi.conj())


def reduced_basis(basis: FockBasis, keep_modes: Sequence[int], keep_ancilla: bool = False) -> FockBasis:
    cutoffs = [basis.per_mode_cutoff[m] for m in keep_modes]
    return build_basis(
        len(keep_modes) if keep_modes else 1,
        cutoffs if keep_modes else [0],
        basis.global_cutoff,
        3 if keep_ancilla and basis.has_ancilla else 0,
    )


def _trace_groups(basis: FockBasis, keep_modes: Sequence[int], keep_ancilla: bool):
    small = reduced_basis(basis, keep_modes, keep_ancilla)
    off = basis.mode_offset
    kept_cols = ([0] if keep_ancilla and basis.has_ancilla else []) + [off + m for m in keep_modes]
    traced_cols = [c for c in range(len(basis.state_list[0])) if c not in kept_cols]
    groups: dict[tuple[int, ...], tuple[list[int], list[int]]] = {}
    for i, s in enumerate(basis.state_list):
        kept = tuple(s[c] for c in kept_cols) if kept_cols else (0,)
        tkey = tuple(s[c] for c in traced_cols)
        full_idx, small_idx = groups.setdefault(tkey, ([], []))
        full_idx.append(i)
        small_idx.append(small.index_map[kept])
    return small, [(np.array(a), np.array(b)) for a, b in groups.values()]


def partial_trace(
    rho: np.ndarray,
    basis: FockBasis,
    keep_modes: Sequence[int],
    keep_ancilla: bool = False,
) -> tuple[np.ndarray, FockBasis]:
    """Trace out every mode not in ``keep_modes`` (and the ancilla unless kept).

    Returns the reduced density matrix and its basis. Works for a stack of
    matrices with shape (..., dim, dim).
    """
    rho = np.asarray(rho)
    small, groups = _trace_groups(basis, list(keep_modes), keep_ancilla)
    out = np.zeros(rho.shape[:-2] + (small.dim, small.dim), dtype=complex)
    for full_idx, small_idx in groups:
        block = rho[..., full_idx[:, None], full_idx[None, :]]
        out[..., small_idx[:, None], small_idx[None, :]] += block
    return out, small


def partial_trace_matrix(basis: FockBasis, keep_modes: Sequence[int], keep_ancilla: bool = False):
    """Sparse map from vec(rho) to vec(Tr_rest rho), row-major vectorization."""
    small, groups = _trace_groups(basis, list(keep_modes), keep_ancilla)
    rows, cols = [], []
    D = basis.dim
    for full_idx, small_idx in groups:
        fi, fj = np.meshgrid(full_idx, full_idx, indexing="ij")
        si, sj = np.meshgrid(small_idx, small_idx, indexing="ij")
        rows.append((si * small.dim + sj).ravel())
        cols.append((fi * D + fj).ravel())
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    T = sp.csr_matrix((np.ones(rows.size, dtype=complex), (rows, cols)), shape=(small.dim**2, D * D))
    return T, small


@dataclass
class SuperOperator:
    """Linear map on row-major vectorized density matrices.

    Attributes
    ----------
    matrix : ndarray
        Shape (prod(out_dims)**2, prod(in_dims)**2).
    in_dims, out_dims : tuple of int
        Subsystem dimensions of the input and output spaces.
    """

    matrix: np.ndarray
    in_dims: tuple[int, ...]
    out_dims: tuple[int, ...]

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        self.in_dims = tuple(self.in_dims)
        self.out_dims = tuple(self.out_dims)
        din, dout = int(np.prod(self.in_dims)), int(np.prod(self.out_dims))
        if self.matrix.shape != (dout * dout, din * din):
            raise ValueError("superoperator shape does not match its dims")

    @property
    def d_in(self) -> int:
        return int(np.prod(self.in_dims))

    @property
    def d_out(self) -> int:
        return int(np.prod(self.out_dims))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return (self.matrix @ np.asarray(rho).reshape(-1)).reshape(self.d_out, self.d_out)

    def choi(self) -> np.ndarray:
        """Choi matrix sum_ij |i><j| (x) E(|i><j|), indices (in, out)."""
        d_in, d_out = self.d_in, self.d_out
        t = self.matrix.reshape(d_out, d_out, d_in, d_in)
        return t.transpose(2, 0, 3, 1).reshape(d_in * d_out, d_in * d_out)

    def is_completely_positive(self, atol: float = 1e-9) -> bool:
        J = self.choi()
        J = (J + J.conj().T) / 2
        return bool(np.linalg.eigvalsh(J).min() >= -atol)

    def compose(self, other: "SuperOperator") -> "SuperOperator":
        """self after other."""
        if other.out_dims != self.in_dims:
            raise ValueError("dimension mismatch in composition")
        return SuperOperator(self.matrix @ other.matrix, other.in_dims, self.out_dims)

    @classmethod
    def from_unitary(cls, U, dims: Sequence[int] | None = None) -> "SuperOperator":
        U = U.toarray() if sp.issparse(U) else np.asarray(U)
        dims = (U.shape[0],) if dims is None else tuple(dims)
        return cls(np.kron(U, U.conj()), dims, dims)

    @classmethod
    def identity(cls, dims: Sequence[int]) -> "SuperOperator":
        d = int(np.prod(dims))
        return cls(np.eye(d * d, dtype=complex), dims, dims)


def _permute_superop(S: SuperOperator, perm: Sequence[int]) -> SuperOperator:
    # Reorder subsystems: new subsystem k is old subsystem perm[k].
    perm = list(perm)
    if sorted(perm) != list(range(len(S.in_dims))) or len(S.in_dims) != len(S.out_dims):
        raise ValueError("invalid wire permutation")
    n = len(perm)
    dims_in, dims_out = S.in_dims, S.out_dims
    t = S.matrix.reshape(dims_out + dims_out + dims_in + dims_in)
    axes = (
        perm
        + [n + p for p in perm]
        + [2 * n + p for p in perm]
        + [3 * n + p for p in perm]
    )
    t = t.transpose(axes)
    new_in = tuple(dims_in[p] for p in perm)
    new_out = tuple(dims_out[p] for p in perm)
    d_in, d_out = int(np.prod(new_in)), int(np.prod(new_out))
    return SuperOperator(t.reshape(d_out * d_out, d_in * d_in), new_in, new_out)


def tensor_superoperators(
    E1: SuperOperator, E2: SuperOperator, wire_permutation: Sequence[int] | None = None
) -> SuperOperator:
    """E1 (x) E2 on the joint space, optionally reordering subsystems.

    ``wire_permutation[k]`` names which subsystem of the plain tensor product
    becomes subsystem ``k`` of the result.
    """
    a_in, a_out = E1.d_in, E1.d_out
    b_in, b_out = E2.d_in, E2.d_out
    t1 = E1.matrix.reshape(a_out, a_out, a_in, a_in)
    t2 = E2.matrix.reshape(b_out, b_out, b_in, b_in)
    t = np.einsum("ijkl,mnop->imjnkolp", t1, t2)
    joint = SuperOperator(
        t.reshape((a_out * b_out) ** 2, (a_in * b_in) ** 2),
        E1.in_dims + E2.in_dims,
        E1.out_dims + E2.out_dims,
    )
    if wire_permutation is None:
        return joint
    return _permute_superop(joint, wire_permutation)


def check_cutoff_convergence(
    compute: Callable[[int], float], cutoff: int, tol: float, relative: bool = True
) -> tuple[bool, float, float]:
    """Evaluate ``compute`` at cutoff k and k+1 and compare the results.

    Returns (agreed, value_k, value_k_plus_1). With ``relative`` the
    difference is measured against the larger magnitude.
    """
    a, b = float(compute(cutoff)), float(compute(cutoff + 1))
    diff = abs(a - b)
    if relative:
        diff /= max(abs(a), abs(b), np.finfo(float).tiny)
    return diff <= tol, a, b
