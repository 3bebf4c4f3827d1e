"""Two-segment (interface) arrays: long-lived states, the antisymmetric
product ansatz, and critical modulation phases of uniform arrays."""
from __future__ import annotations

import dataclasses
import math

import numpy as np
from scipy.optimize import brentq

from .bloch import BOUND_WINDOW
from .eig_engine import EigResult, eig_dense
from .finite import TwoExSpectrum, pair_basis
from .lattice import PERIOD, ModelParams, QubitArray, build_uniform, single_excitation_hamiltonian

LONG_LIVED_GAMMA = 1e-6
EDGE_BOUND_WEIGHT = 0.5
EDGE_DELTA0 = 5


def single_excitation_spectrum(array: QubitArray) -> EigResult:
    """Eigenpairs of ``H1``, ordered from most to least subradiant."""
    res = eig_dense(single_excitation_hamiltonian(array))
    order = np.argsort(-res.values.imag, kind="stable")
    return EigResult(res.values[order], res.right_vectors[:, order], res.residuals[order], res.matrix_norm)


def left_segment_state(params: ModelParams) -> np.ndarray:
    """Most subradiant single-excitation state of the standalone left half.

    The left segment (``j <= N/2``, modulation phase 0) is diagonalized on
    its own and the state is padded with zeros to ``N`` sites.
    """
    n = params.n_qubits
    left = build_uniform(params.replace(n_qubits=n // 2, phi0=0.0))
    f = np.zeros(n, dtype=complex)
    f[: n // 2] = single_excitation_spectrum(left).right_vectors[:, 0]
    return f


@dataclasses.dataclass(frozen=True)
class AnsatzState:
    c: np.ndarray
    f: np.ndarray
    psi: np.ndarray

    @property
    def n(self) -> int:
        return len(self.c)

    def antisymmetric_form(self) -> np.ndarray:
        """Full ``A(j, l) = c_j f_l - c_l f_j`` before normalization."""
        return np.outer(self.c, self.f) - np.outer(self.f, self.c)


def build_ansatz(c, f, *, sign: int = -1) -> AnsatzState:
    """Pair amplitudes ``psi_jl ~ c_j f_l - c_l f_j`` (``j < l``), unit norm.

    ``sign=+1`` gives the symmetric combination ``c_j f_l + c_l f_j``, used
    only as a comparison.
    """
    c = np.asarray(c, dtype=complex)
    f = np.asarray(f, dtype=complex)
    if c.shape != f.shape or c.ndim != 1:
        raise ValueError("c and f must be vectors of equal length")
    basis = pair_basis(len(c))
    psi = c[basis.j - 1] * f[basis.l - 1] + sign * c[basis.l - 1] * f[basis.j - 1]
    norm = np.linalg.norm(psi)
    if norm < 1e-12 * max(np.linalg.norm(c) * np.linalg.norm(f), 1e-300):
        raise ValueError("ansatz vanishes: c and f are parallel")
    return AnsatzState(c, f, psi / norm)


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    """``|<a|b>|^2`` for normalized vectors."""
    return float(abs(np.vdot(a, b)) ** 2 / (np.vdot(a, a).real * np.vdot(b, b).real))


def interface_ansatz(array: QubitArray) -> AnsatzState:
    """Antisymmetrized product of the single-excitation interface state and
    the most subradiant left-segment state."""
    c = single_excitation_spectrum(array).right_vectors[:, 0]
    return build_ansatz(c, left_segment_state(array.params))


@dataclasses.dataclass
class InterfaceStates:
    """Indices into a :class:`TwoExSpectrum` grouped by character."""

    most_subradiant: int
    long_lived: np.ndarray
    bound_edge: np.ndarray
    decay_rates: np.ndarray
    tilted: np.ndarray
    bound_weight: np.ndarray

    def summary(self, spectrum: TwoExSpectrum, indices) -> list[dict]:
        e = spectrum.per_excitation_energies
        return [{"index": int(i), "ReE": float(e[i].real), "ImE": float(e[i].imag),
                 "Gamma": float(self.decay_rates[i]), "T": float(self.tilted[i]),
                 "bound_weight": float(self.bound_weight[i])} for i in indices]


def find_interface_states(
    spectrum: TwoExSpectrum,
    *,
    gamma_max: float = LONG_LIVED_GAMMA,
    edge_weight: float = EDGE_BOUND_WEIGHT,
    delta0: int = EDGE_DELTA0,
    g: float = 0.5,
    window: tuple[float, float] = BOUND_WINDOW,
) -> InterfaceStates:
    """Classify states of an interface-array spectrum.

    * most subradiant: smallest decay rate ``Gamma = -Im eps``;
    * long-lived: ``Gamma < gamma_max``;
    * bound-edge: per-excitation ``Re E`` inside the bound-band ``window``,
      bound weight within ``delta0`` above ``edge_weight`` and ``|T| > N/4``,
      i.e. a tightly bound pair sitting at one end.
    """
    n = spectrum.array.n
    gamma = spectrum.decay_rates
    t = spectrum.tilted_degrees(g)
    w = spectrum.bound_weights(delta0)
    e = spectrum.per_excitation_energies.real
    in_window = (e > window[0]) & (e < window[1])
    edge = np.where(in_window & (w > edge_weight) & (np.abs(t) > n / 4))[0]
    return InterfaceStates(int(np.argmin(gamma)), np.where(gamma < gamma_max)[0], edge, gamma, t, w)


def _edge_equation(n: int, j: int):
    w = 2 * math.pi / PERIOD

    def h(a):
        return ((math.cos(w * (j + 1) + a) - math.cos(w * j + a))
                - (math.cos(w * (n + 1 - j) + a) - math.cos(w * (n - j) + a)))
    return h


def critical_phases(n: int, samples: int = 720, tol: float = 1e-12) -> list[float]:
    """Modulation phases in ``[0, 2pi)`` at which a uniform array of ``n``
    qubits is mirror symmetric.

    Mirror symmetry requires the spacing ``z_{j+1} - z_j`` to equal
    ``z_{n+1-j} - z_{n-j}`` for every ``j``; by period 3 this is three
    sinusoidal equations in ``phi0``. Roots of the first nontrivial one are
    bracketed on a grid, refined with Brent's method, and kept if all three
    equations hold.
    """
    eqs = [_edge_equation(n, j) for j in range(PERIOD)]
    grid = np.linspace(0.0, 2 * math.pi, samples + 1)
    active = [h for h in eqs if max(abs(h(a)) for a in grid[:8]) > 1e-9]
    if not active:
        return [float(a) for a in grid[:-1]]
    h = active[0]
    vals = np.array([h(a) for a in grid])
    roots = []
    for a, b, fa, fb in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(h, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    out = sorted({round(r % (2 * math.pi), 13) for r in roots if all(abs(e(r)) < 1e-9 for e in eqs)})
    return [float(r) for r in out]
