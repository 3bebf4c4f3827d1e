"""Center-of-mass Bloch problem for bound excitation pairs in the infinite array.

The pair basis state ``|K, Delta, n>`` places the first excitation on
sublattice ``n`` and the second ``Delta`` sites to its right, with the Bloch
phase ``exp(i K (z_a + z_b) / 2)`` taken at the actual (modulated) positions.
Per-excitation band energies ``E`` satisfy ``-i gamma0 M u = 2 E u``.
"""
from __future__ import annotations

import dataclasses
import math

import numpy as np

from .eig_engine import EigResult, eig_dense
from .lattice import PERIOD, ModelParams, position

ZONE_EDGE = math.pi / PERIOD
ZONE_WIDTH = 2 * math.pi / PERIOD
DEFAULT_DELTA0 = 5
DEFAULT_P_TH = 0.25
# Real-energy window holding the three bound bands at the reference
# parameters; other states with large short-distance weight lie outside it.
BOUND_WINDOW = (1.0, 4.0)
MIN_TRUNC = 10
RESONANCE_TOL = 1e-9


class ResonanceError(ValueError):
    """Wave vector too close to the guided-mode resonance of the lattice sum."""


def selector_f(x):
    """1 where ``x`` is divisible by 3 (mathematical modulus), else 0."""
    return (np.mod(np.asarray(x), PERIOD) == 0).astype(int)


def _pair_grid(trunc: int):
    d = np.repeat(np.arange(1, trunc + 1), PERIOD)
    n = np.tile(np.arange(1, PERIOD + 1), trunc)
    return d, n


def pair_position_sums(trunc: int, delta: float, phi0: float) -> np.ndarray:
    """``z_n + z_{n+Delta}`` for every basis row ``(Delta, n)``."""
    d, n = _pair_grid(trunc)
    return position(n, delta, phi0) + position(n + d, delta, phi0)


def integer_pair_sums(trunc: int) -> np.ndarray:
    """Unmodulated counterpart of :func:`pair_position_sums`, ``2n + Delta``."""
    d, n = _pair_grid(trunc)
    return (2 * n + d).astype(float)


@dataclasses.dataclass(frozen=True)
class BlochBlock:
    K: float
    phi0: float
    trunc: int
    params: ModelParams
    matrix: np.ndarray

    @staticmethod
    def index_of(delta: int, n: int) -> int:
        return (delta - 1) * PERIOD + (n - 1)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def build_bloch_matrix(params: ModelParams, K: float, phi0: float | None = None,
                       *, trunc: int | None = None, check_zone: bool = True) -> BlochBlock:
    """Assemble the ``3L x 3L`` matrix ``M(K, phi0)``.

    Each column ``(Delta, n)`` collects the four single-hop processes that
    take the pair ``(n, n + Delta)`` to a pair at distance ``Delta'``: the
    right excitation hops right or left of the left one, or the left
    excitation hops past or toward the right one. Rows beyond the truncation
    are dropped.
    """
    phi0 = params.phi0 if phi0 is None else float(phi0)
    L = params.trunc if trunc is None else trunc
    if L < MIN_TRUNC:
        raise ValueError(f"trunc >= {MIN_TRUNC} required, got {L}")
    if check_zone and abs(K) > ZONE_EDGE + 1e-9:
        raise ValueError(f"K = {K} outside the reduced zone [-pi/3, pi/3]")

    dp = np.arange(1, L + 1)[:, None, None, None]
    n_p = np.arange(1, PERIOD + 1)[None, :, None, None]
    d = np.arange(1, L + 1)[None, None, :, None]
    n = np.arange(1, PERIOD + 1)[None, None, None, :]

    def z(j):
        return position(j, params.delta, phi0)

    def hop(src, dst, sel):
        dz = z(src) - z(dst)
        return np.exp(0.5j * K * dz + 1j * params.phi * np.abs(dz)) * selector_f(sel)

    m = (hop(n + d, n + dp, n - n_p)
         + hop(n, n + d + dp, n + d - n_p)
         + hop(n + d, n - dp, n_p + dp - n)
         + hop(n, n + d - dp, n + d - dp - n_p))
    return BlochBlock(K=float(K), phi0=phi0 % (2 * math.pi), trunc=L, params=params,
                      matrix=m.reshape(PERIOD * L, PERIOD * L))


@dataclasses.dataclass(frozen=True)
class BandPoint:
    K: float
    phi0: float
    band_index: int
    energy: complex
    bound_probability: float
    vector: np.ndarray


@dataclasses.dataclass
class BandSpectrum:
    """All ``3L`` eigenpairs of one Bloch block, sorted by (Re E, Im E)."""

    block: BlochBlock
    energies: np.ndarray
    vectors: np.ndarray
    bound_probability: np.ndarray
    delta0: int

    @property
    def points(self) -> list[BandPoint]:
        b = self.block
        return [BandPoint(b.K, b.phi0, m, complex(self.energies[m]),
                          float(self.bound_probability[m]), self.vectors[:, m])
                for m in range(len(self.energies))]


def bound_probability(vectors: np.ndarray, delta0: int) -> np.ndarray:
    """Weight on relative distances ``Delta <= delta0``, all three sublattices."""
    v = np.asarray(vectors)
    rows = PERIOD * delta0
    w = np.abs(v[:rows]) ** 2
    norm = (np.abs(v) ** 2).sum(axis=0)
    return w.sum(axis=0) / norm


def band_solve(block: BlochBlock, delta0: int = DEFAULT_DELTA0) -> BandSpectrum:
    if delta0 < 1:
        raise ValueError("delta0 >= 1 required")
    res: EigResult = eig_dense(-1j * block.params.gamma0 * block.matrix)
    energies = res.values / 2
    return BandSpectrum(block, energies, res.right_vectors,
                        bound_probability(res.right_vectors, delta0), delta0)


def bound_band_indices(spec: BandSpectrum, p_th: float = DEFAULT_P_TH,
                       window: tuple[float, float] = BOUND_WINDOW) -> np.ndarray:
    """Indices of states with ``P > p_th`` and ``Re E`` inside ``window``, by ascending ``Re E``."""
    e = spec.energies.real
    idx = np.where((spec.bound_probability > p_th) & (e > window[0]) & (e < window[1]))[0]
    return idx[np.argsort(e[idx], kind="stable")]


def decay_profile(vector: np.ndarray) -> np.ndarray:
    """``sum_n |u_{Delta,n}|^2`` as a function of ``Delta = 1..L``."""
    p = np.abs(np.asarray(vector)) ** 2
    return p.reshape(-1, PERIOD).sum(axis=1) / p.sum()


def exponential_decay_fit(vector: np.ndarray, delta_max: int | None = None):
    """Log-linear fit of the tail weight ``sum_{Delta' >= Delta} |u|^2``.

    The bound-state amplitude oscillates under an exponential envelope; the
    cumulative tail removes the nodes while keeping the envelope's decay
    constant. Returns ``(slope, r_squared)`` with slope in units of
    ``1/Delta``; fits ``Delta = 1..delta_max`` (default ``L // 2``).
    """
    prof = decay_profile(vector)
    tail = np.cumsum(prof[::-1])[::-1]
    dmax = len(prof) // 2 if delta_max is None else delta_max
    x = np.arange(1, dmax + 1, dtype=float)
    y = np.log(tail[:dmax])
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss_res = float(((y - fit) ** 2).sum())
    ss_tot = float(((y - y.mean()) ** 2).sum())
    return float(slope), 1.0 - ss_res / ss_tot


def _geometric(r: complex) -> complex:
    if abs(r - 1) < RESONANCE_TOL:
        raise ResonanceError("lattice sum is resonant with the guided mode")
    return r / (1 - r)


def single_excitation_bloch(params: ModelParams, k: float, phi0: float | None = None) -> np.ndarray:
    """3 x 3 single-excitation Bloch Hamiltonian summed over all cell images.

    The one-sided lattice sums ``sum_{m>=1} r^m`` use the closed form
    ``r / (1 - r)`` with ``r = exp(3i(phi +- k))``.
    """
    phi0 = params.phi0 if phi0 is None else phi0
    z = position(np.arange(1, PERIOD + 1), params.delta, phi0)
    dz = z[None, :] - z[:, None]  # z_n - z_n', rows n'
    phi = params.phi
    right = _geometric(np.exp(3j * (phi + k)))
    left = _geometric(np.exp(3j * (phi - k)))
    h = (np.exp(1j * phi * np.abs(dz) + 1j * k * dz)
         + np.exp(1j * (phi + k) * dz) * right
         + np.exp(-1j * (phi - k) * dz) * left)
    return -1j * params.gamma0 * h


def single_excitation_dispersion(params: ModelParams, k: float, phi0: float | None = None) -> np.ndarray:
    """Three branch energies at wave vector ``k``, sorted by real part."""
    if abs(k) > ZONE_EDGE + 1e-9:
        raise ValueError(f"k = {k} outside the reduced zone")
    w = np.linalg.eigvals(single_excitation_bloch(params, k, phi0))
    return w[np.lexsort((w.imag, w.real))]


def fold(k):
    """Map wave vectors into ``[-pi/3, pi/3)``."""
    return np.mod(np.asarray(k) + ZONE_EDGE, ZONE_WIDTH) - ZONE_EDGE


def scattering_energy(params: ModelParams, K: float, kappa: float, phi0: float | None = None) -> np.ndarray:
    """Free-pair estimate ``[eps_{(K+kappa)/2} + eps_{(K-kappa)/2}] / 2``.

    Returns the 3 x 3 array over branch pairs ``(a, b)``; entry ``[a, b]``
    combines branch ``a`` at ``(K + kappa)/2`` with branch ``b`` at
    ``(K - kappa)/2``.
    """
    e1 = single_excitation_dispersion(params, float(fold((K + kappa) / 2)), phi0)
    e2 = single_excitation_dispersion(params, float(fold((K - kappa) / 2)), phi0)
    return (e1[:, None] + e2[None, :]) / 2


def scattering_continuum(params: ModelParams, K: float, n_kappa: int = 721, phi0: float | None = None) -> np.ndarray:
    """Scattering estimates over ``kappa in [-2pi/3, 2pi/3]``, shape ``(n_kappa, 9)``.

    Resonant samples are skipped.
    """
    out = []
    for kappa in np.linspace(-ZONE_WIDTH, ZONE_WIDTH, n_kappa):
        try:
            out.append(scattering_energy(params, K, kappa, phi0).ravel())
        except ResonanceError:
            continue
    return np.array(out)
