"""Qubit geometries and the waveguide-mediated coupling kernel.

Positions are measured in units of the mean spacing ``d`` and qubits are
labelled from 1, so that the unit cell ``(m, n)`` holds site ``j = 3m + n``
with ``n in {1, 2, 3}``.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Literal

import numpy as np

PERIOD = 3

GeometryKind = Literal["uniform", "interface"]


@dataclasses.dataclass(frozen=True)
class ModelParams:
    """Physical and numerical parameters of the modulated array.

    Attributes:
        gamma0: single-qubit radiative rate, the unit of energy.
        phi: waveguide phase per spacing, ``omega_0 d / c``.
        delta: modulation amplitude in units of ``d``.
        phi0: modulation phase; stored reduced to ``[0, 2 pi)``.
        beta: modulation period. Only 3 is supported.
        n_qubits: number of qubits in a finite array.
        trunc: relative-distance truncation ``L`` of the Bloch problem.
    """

    gamma0: float = 1.0
    phi: float = 0.3
    delta: float = 0.1
    phi0: float = 0.0
    beta: int = PERIOD
    n_qubits: int = 100
    trunc: int = 70

    def __post_init__(self):
        object.__setattr__(self, "phi0", float(self.phi0) % (2 * math.pi))
        problems = self.violations()
        if problems:
            raise ValueError("; ".join(problems))

    def violations(self) -> list[str]:
        out = []
        if not self.gamma0 > 0:
            out.append("gamma0 > 0 required")
        if self.beta != PERIOD:
            out.append("beta = 3 required")
        if not self.delta < 0.5:
            out.append("delta < 0.5 required")
        if not self.delta >= 0:
            out.append("delta ≥ 0 required")
        if self.n_qubits < 1:
            out.append("n_qubits ≥ 1 required")
        if self.trunc < 1:
            out.append("trunc ≥ 1 required")
        if not all(math.isfinite(x) for x in (self.gamma0, self.phi, self.delta, self.phi0)):
            out.append("parameters must be finite")
        return out

    def replace(self, **changes) -> "ModelParams":
        return dataclasses.replace(self, **changes)


def position(j, delta: float, phi0: float):
    """Modulated coordinate ``j + delta cos(2 pi j / 3 + phi0)`` for any integer ``j``."""
    j = np.asarray(j)
    return j + delta * np.cos(2 * np.pi * j / PERIOD + phi0)


@dataclasses.dataclass(frozen=True)
class QubitArray:
    positions: np.ndarray
    geometry_kind: GeometryKind
    params: ModelParams

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if np.any(np.diff(pos) <= 0):
            raise ValueError("qubit positions must be strictly increasing")

    @property
    def n(self) -> int:
        return len(self.positions)

    def z(self, j: int) -> float:
        """Position of qubit ``j`` (1-based)."""
        return float(self.positions[j - 1])


def build_uniform(params: ModelParams) -> QubitArray:
    """Array with a single modulation phase ``phi0`` over all ``N`` sites."""
    if params.delta >= 0.5:
        raise ValueError("delta < 0.5 required")
    j = np.arange(1, params.n_qubits + 1)
    return QubitArray(position(j, params.delta, params.phi0), "uniform", params)


def build_interface(params: ModelParams) -> QubitArray:
    """Two segments with modulation phases 0 (left half) and pi (right half).

    ``params.phi0`` is ignored. The interface sits between sites ``N/2`` and
    ``N/2 + 1``.
    """
    n = params.n_qubits
    if n % 2:
        raise ValueError(f"interface geometry needs an even number of qubits, got {n}")
    if params.delta >= 0.5:
        raise ValueError("delta < 0.5 required")
    j = np.arange(1, n + 1)
    phase = np.where(j <= n // 2, 0.0, np.pi)
    pos = j + params.delta * np.cos(2 * np.pi * j / PERIOD + phase)
    return QubitArray(pos, "interface", params)


def coupling_kernel(params: ModelParams, z_a, z_b):
    """Photon-mediated amplitude ``-i gamma0 exp(i phi |z_a - z_b|)``.

    Broadcasts over array arguments.
    """
    dist = np.abs(np.asarray(z_a) - np.asarray(z_b))
    return -1j * params.gamma0 * np.exp(1j * params.phi * dist)


def single_excitation_hamiltonian(array: QubitArray) -> np.ndarray:
    """N x N matrix ``H1[j, l] = coupling_kernel(z_j, z_l)``."""
    z = array.positions
    return coupling_kernel(array.params, z[:, None], z[None, :])
