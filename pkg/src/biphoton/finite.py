"""Hard-core two-excitation sector of a finite qubit array."""
from __future__ import annotations

import dataclasses
import functools
import itertools
import logging

import numpy as np
import scipy.sparse

from .eig_engine import EigResult, eig_dense
from .lattice import QubitArray, coupling_kernel

logger = logging.getLogger(__name__)

DEFAULT_TILT = 0.5
ORACLE_MAX_QUBITS = 8


@dataclasses.dataclass(frozen=True)
class PairBasis:
    """Lexicographically ordered pairs ``(j, l)``, ``1 <= j < l <= N``."""

    n: int
    j: np.ndarray
    l: np.ndarray

    @property
    def size(self) -> int:
        return len(self.j)

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return list(zip(self.j.tolist(), self.l.tolist()))

    def index(self, j, l):
        """Row index of pair ``(min(j,l), max(j,l))``; vectorized."""
        j = np.asarray(j)
        l = np.asarray(l)
        a = np.minimum(j, l)
        b = np.maximum(j, l)
        return (a - 1) * (2 * self.n - a) // 2 + (b - a - 1)

    def index_of(self, j: int, l: int) -> int:
        if j == l or not (1 <= j <= self.n and 1 <= l <= self.n):
            raise KeyError((j, l))
        return int(self.index(j, l))


@functools.lru_cache(maxsize=16)
def pair_basis(n: int) -> PairBasis:
    if n < 2:
        raise ValueError("a pair basis needs at least two sites")
    j, l = np.triu_indices(n, k=1)
    j = (j + 1).astype(np.int64)
    l = (l + 1).astype(np.int64)
    j.setflags(write=False)
    l.setflags(write=False)
    return PairBasis(n, j, l)


def _pair_hamiltonian_coo(array: QubitArray):
    n = array.n
    if n < 4:
        raise ValueError(f"two-excitation computations need N >= 4, got {n}")
    basis = pair_basis(n)
    z = array.positions
    cols = np.arange(basis.size)
    k = np.arange(1, n + 1)
    rows_all, cols_all, vals_all = [], [], []
    # One excitation hops from `mover` to k while `spectator` stays put.
    for mover, spectator in ((basis.j, basis.l), (basis.l, basis.j)):
        kk = np.broadcast_to(k, (basis.size, n))
        ok = (kk != mover[:, None]) & (kk != spectator[:, None])
        src = np.broadcast_to(cols[:, None], kk.shape)[ok]
        spec = np.broadcast_to(spectator[:, None], kk.shape)[ok]
        mov = np.broadcast_to(mover[:, None], kk.shape)[ok]
        dest = kk[ok]
        rows_all.append(basis.index(dest, spec))
        cols_all.append(src)
        vals_all.append(coupling_kernel(array.params, z[dest - 1], z[mov - 1]))
    rows_all.append(cols)
    cols_all.append(cols)
    vals_all.append(np.full(basis.size, 2 * coupling_kernel(array.params, 0.0, 0.0)))
    return (
        np.concatenate(rows_all),
        np.concatenate(cols_all),
        np.concatenate(vals_all),
        basis.size,
    )


def build_pair_hamiltonian(array: QubitArray, *, sparse: bool = False):
    """Two-excitation Hamiltonian in the hard-core pair basis.

    Doubly occupied intermediate states are excluded by the basis itself, so
    every off-diagonal element is a single hop of one excitation. The result
    is complex symmetric; the dense form is Fortran-ordered.
    """
    rows, cols, vals, dim = _pair_hamiltonian_coo(array)
    if sparse:
        return scipy.sparse.csr_matrix((vals, (rows, cols)), shape=(dim, dim))
    h = np.zeros((dim, dim), dtype=complex, order="F")
    # (row, col) pairs are unique, so plain fancy assignment is exact.
    h[rows, cols] = vals
    return h


@dataclasses.dataclass
class TwoExSpectrum:
    """Eigen-decomposition of the pair Hamiltonian.

    ``pair_energies`` are the eigenvalues ``eps`` of the two-excitation
    problem; ``per_excitation_energies = eps / 2`` is the convention shared
    with the Bloch bands.
    """

    array: QubitArray
    eig: EigResult

    @property
    def basis(self) -> PairBasis:
        return pair_basis(self.array.n)

    @property
    def pair_energies(self) -> np.ndarray:
        return self.eig.values

    @property
    def per_excitation_energies(self) -> np.ndarray:
        return self.eig.values / 2

    @property
    def decay_rates(self) -> np.ndarray:
        return -self.eig.values.imag

    @property
    def amplitudes(self) -> np.ndarray:
        if self.eig.right_vectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        return self.eig.right_vectors

    def tilted_degrees(self, g: float = DEFAULT_TILT) -> np.ndarray:
        return tilted_degree(self.amplitudes, self.array.n, g)

    def bound_weights(self, delta0: int) -> np.ndarray:
        return bound_weight(self.amplitudes, self.array.n, delta0)


def solve_two_excitation(array: QubitArray, *, vectors: bool = True, check: bool = True) -> TwoExSpectrum:
    """Build and fully diagonalize the pair Hamiltonian.

    Peak memory is about two dense ``N(N-1)/2``-square complex matrices when
    eigenvectors are requested: the LAPACK works in place and residuals are
    checked against a sparse copy.
    """
    h = build_pair_hamiltonian(array)
    op = build_pair_hamiltonian(array, sparse=True) if vectors else None
    logger.info("diagonalizing pair Hamiltonian, dimension %d", h.shape[0])
    eig = eig_dense(h, vectors=vectors, overwrite_a=True, residual_operator=op, check=check)
    del h
    return TwoExSpectrum(array, eig)


def _as_columns(state):
    psi = np.asarray(state)
    return psi[:, None] if psi.ndim == 1 else psi


def _weighted_column_sums(state, weights, block: int = 256):
    """``weights @ |psi|^2`` column by column, in blocks to bound memory."""
    psi = _as_columns(state)
    out = np.empty((weights.shape[0], psi.shape[1]))
    for s in range(0, psi.shape[1], block):
        chunk = psi[:, s:s + block]
        out[:, s:s + block] = weights @ (chunk.real ** 2 + chunk.imag ** 2)
    return out


def tilted_degree(state, n_qubits: int, g: float = DEFAULT_TILT):
    """``T = sum_{j<l} g (j + l - (N+1)) |psi_jl|^2``.

    ``state`` is one amplitude vector or a matrix of column states; returns a
    float or an array accordingly.
    """
    basis = pair_basis(n_qubits)
    w = g * (basis.j + basis.l - (n_qubits + 1)).astype(float)
    t = _weighted_column_sums(state, w[None, :])[0]
    return float(t[0]) if np.ndim(state) == 1 else t


def bound_weight(state, n_qubits: int, delta0: int):
    """Probability that the two excitations are at most ``delta0`` sites apart."""
    if delta0 < 1:
        raise ValueError("delta0 >= 1 required")
    basis = pair_basis(n_qubits)
    near = ((basis.l - basis.j) <= delta0).astype(float)
    p = _weighted_column_sums(state, near[None, :])[0]
    return float(p[0]) if np.ndim(state) == 1 else p


def column_norms(state) -> np.ndarray:
    """Euclidean norm of every column, computed blockwise."""
    psi = _as_columns(state)
    return np.sqrt(_weighted_column_sums(psi, np.ones((1, psi.shape[0])))[0])


def joint_probability(state, n_qubits: int) -> np.ndarray:
    """Symmetric N x N map of ``|psi_jl|^2``; the diagonal is zero."""
    basis = pair_basis(n_qubits)
    p = np.abs(np.asarray(state)) ** 2
    out = np.zeros((n_qubits, n_qubits))
    out[basis.j - 1, basis.l - 1] = p
    out[basis.l - 1, basis.j - 1] = p
    return out


def inversion_permutation(n_qubits: int) -> np.ndarray:
    """Index map of the relabeling ``(j, l) -> (N+1-l, N+1-j)``."""
    basis = pair_basis(n_qubits)
    return basis.index(n_qubits + 1 - basis.l, n_qubits + 1 - basis.j)


def inversion_defect(h) -> float:
    """``max |P H P^T - H|`` for the mirror relabeling ``P`` of the pair basis."""
    dim = h.shape[0]
    n = int(round((1 + np.sqrt(1 + 8 * dim)) / 2))
    perm = inversion_permutation(n)
    if scipy.sparse.issparse(h):
        d = h[perm][:, perm] - h
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.abs(h[np.ix_(perm, perm)] - h).max())


def parity_sectors(h, n_qubits: int):
    """Project ``h`` onto the even and odd mirror sectors.

    Returns the two reduced matrices. Pairs mapped onto themselves,
    ``(j, N+1-j)``, belong to the even sector only. If ``h`` commutes with
    the mirror relabeling, the union of the sector spectra is the spectrum
    of ``h``.
    """
    h = h.toarray() if scipy.sparse.issparse(h) else np.asarray(h)
    perm = inversion_permutation(n_qubits)
    idx = np.arange(len(perm))
    fixed = idx[perm == idx]
    rep = idx[idx < perm]
    partner = perm[rep]
    dim = len(idx)
    out = []
    for sign in (1.0, -1.0):
        cols = len(rep) + (len(fixed) if sign > 0 else 0)
        q = np.zeros((dim, cols))
        q[rep, np.arange(len(rep))] = 1 / np.sqrt(2)
        q[partner, np.arange(len(rep))] = sign / np.sqrt(2)
        if sign > 0:
            q[fixed, len(rep) + np.arange(len(fixed))] = 1.0
        out.append(q.T @ h @ q)
    return tuple(out)


def _fock_basis(n: int):
    states = []
    for a, b in itertools.combinations_with_replacement(range(n), 2):
        occ = [0] * n
        occ[a] += 1
        occ[b] += 1
        states.append(tuple(occ))
    return states


def bosonic_hamiltonian(array: QubitArray, chi: float) -> np.ndarray:
    """Two-boson Hamiltonian with on-site interaction, including double occupancy.

    Built directly from the second-quantized form, with bosonic matrix
    elements ``sqrt(n_b) sqrt(n_a + 1)`` for ``b_a^dagger b_b``.
    """
    n = array.n
    if n > ORACLE_MAX_QUBITS:
        raise ValueError(f"bosonic oracle is limited to N <= {ORACLE_MAX_QUBITS}")
    states = _fock_basis(n)
    index = {s: i for i, s in enumerate(states)}
    z = array.positions
    h = np.zeros((len(states), len(states)), dtype=complex)
    for col, occ in enumerate(states):
        for b in range(n):
            if occ[b] == 0:
                continue
            for a in range(n):
                new = list(occ)
                amp = np.sqrt(new[b])
                new[b] -= 1
                amp *= np.sqrt(new[a] + 1)
                new[a] += 1
                h[index[tuple(new)], col] += amp * coupling_kernel(array.params, z[a], z[b])
        h[col, col] += chi / 2 * sum(m * (m - 1) for m in occ)
    return h


def bosonic_oracle_spectrum(array: QubitArray, chi: float) -> np.ndarray:
    """Eigenvalues of :func:`bosonic_hamiltonian`, sorted by (Re, Im)."""
    return eig_dense(bosonic_hamiltonian(array, chi), vectors=False).values
