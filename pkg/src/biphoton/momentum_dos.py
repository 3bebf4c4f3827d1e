"""Center-of-mass Fourier analysis of finite-array pair states and the
wave-vector-resolved density of states."""
from __future__ import annotations

import dataclasses

import numpy as np

from .bloch import ZONE_EDGE
from .finite import TwoExSpectrum, pair_basis
from .lattice import PERIOD, QubitArray

DEFAULT_K_POINTS = 201


def _pair_indices(n_qubits: int, s: int, n: int, cells: np.ndarray, strict: bool):
    right = PERIOD * cells + n
    left = right - s
    inside = (left >= 1) & (right <= n_qubits)
    if strict and not inside.all():
        raise IndexError(f"pairs (3m+{n}-{s}, 3m+{n}) leave the array for some m in the cell range")
    return left[inside], right[inside]


def com_fourier(state, array: QubitArray, s: int, n: int, K, *, m_cells: int,
                first_cell: int = 0, strict: bool = True):
    """``Psi_{s,n}(K) = sum_m psi_{3m+n-s, 3m+n} exp(iK (z_{3m+n} + z_{3m+n-s}) / 2)``.

    The sum runs over ``m = first_cell .. first_cell + m_cells - 1``. With
    ``strict=False`` pairs falling outside the array contribute zero
    amplitude instead of raising ``IndexError``.
    """
    if s < 1 or n not in (1, 2, 3):
        raise ValueError("need s >= 1 and n in {1, 2, 3}")
    cells = np.arange(first_cell, first_cell + m_cells)
    left, right = _pair_indices(array.n, s, n, cells, strict)
    psi = np.asarray(state)
    basis = pair_basis(array.n)
    amp = psi[basis.index(left, right)]
    z = array.positions
    K = np.asarray(K, dtype=float)
    phase = np.exp(0.5j * np.multiply.outer(K, z[right - 1] + z[left - 1]))
    return phase @ amp


@dataclasses.dataclass
class DosGrid:
    E_axis: np.ndarray
    K_axis: np.ndarray
    F: np.ndarray  # shape (len(E_axis), len(K_axis))
    sigma: float
    s_max: int
    m_cells: int
    first_cell: int = 0

    def ridge(self) -> np.ndarray:
        """Energy of the maximum of ``F`` at each ``K``."""
        return self.E_axis[np.argmax(self.F, axis=0)]


def fourier_weights(amplitudes: np.ndarray, array: QubitArray, K_axis: np.ndarray, *,
                    s_max: int, m_cells: int, first_cell: int = 0) -> np.ndarray:
    """``sum_{s<=s_max, n} |Psi_{s,n}(K)|^2`` for each column state, shape ``(len(K), n_states)``."""
    amps = np.asarray(amplitudes)
    if amps.ndim == 1:
        amps = amps[:, None]
    basis = pair_basis(array.n)
    z = array.positions
    cells = np.arange(first_cell, first_cell + m_cells)
    out = np.zeros((len(K_axis), amps.shape[1]))
    for s in range(1, s_max + 1):
        for n in range(1, PERIOD + 1):
            left, right = _pair_indices(array.n, s, n, cells, strict=False)
            if len(left) == 0:
                continue
            phase = np.exp(0.5j * np.multiply.outer(K_axis, z[right - 1] + z[left - 1]))
            psi_k = phase @ amps[basis.index(left, right)]
            out += psi_k.real ** 2 + psi_k.imag ** 2
    return out


def dos(spectrum: TwoExSpectrum, *, sigma: float, s_max: int = 10, m_cells: int = 50,
        first_cell: int = 0, E_axis=None, K_axis=None, states=None) -> DosGrid:
    """Gaussian-broadened, wave-vector-resolved density of states.

    ``F(E, K) = sum_v exp(-(E - Re E_v)^2 / 2 sigma^2) sum_{s,n} |Psi_{s,n}^{(v)}(K)|^2``
    with ``E_v = eps_v / 2``. ``states`` restricts the sum (indices into the
    spectrum); by default every state within ``10 sigma`` of the energy axis
    is used. Pairs that fall outside the array are skipped.
    """
    if sigma <= 0:
        raise ValueError("sigma > 0 required")
    energies = spectrum.per_excitation_energies.real
    if K_axis is None:
        K_axis = np.linspace(-ZONE_EDGE, ZONE_EDGE, DEFAULT_K_POINTS)
    idx = np.arange(len(energies)) if states is None else np.asarray(states)
    if E_axis is None:
        lo, hi = energies[idx].min() - 10 * sigma, energies[idx].max() + 10 * sigma
        E_axis = np.arange(lo, hi + sigma / 4, sigma / 2)
    E_axis = np.asarray(E_axis, dtype=float)
    K_axis = np.asarray(K_axis, dtype=float)
    near = (energies[idx] > E_axis[0] - 10 * sigma) & (energies[idx] < E_axis[-1] + 10 * sigma)
    idx = idx[near]
    w = fourier_weights(spectrum.amplitudes[:, idx], spectrum.array, K_axis,
                        s_max=s_max, m_cells=m_cells, first_cell=first_cell)
    gauss = np.exp(-((E_axis[:, None] - energies[idx][None, :]) ** 2) / (2 * sigma ** 2))
    return DosGrid(E_axis, K_axis, gauss @ w.T, sigma, s_max, m_cells, first_cell)
