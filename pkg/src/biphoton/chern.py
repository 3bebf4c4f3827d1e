"""Chern numbers of the bound-pair bands over the (K, phi0) torus.

Two estimates are produced for each band:

* ``link_chern`` -- the plaquette (link-variable) flux sum. Vectors are
  expressed in the integer-position frame, where ``u(K + 2pi/3)`` differs
  from ``u(K)`` only by a phi0-independent diagonal phase, so the torus
  closes and the sum is an exact integer.
* ``continuum_chern`` -- the Berry curvature of the native eigenvectors
  integrated over the grid. The native basis carries Bloch
  phases at the modulated positions, so this estimate is not quantized and
  differs from the integer by a boundary term of order ``delta``.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .bloch import (
    BOUND_WINDOW,
    DEFAULT_DELTA0,
    DEFAULT_P_TH,
    ZONE_EDGE,
    ZONE_WIDTH,
    band_solve,
    build_bloch_matrix,
    integer_pair_sums,
    pair_position_sums,
)
from .lattice import ModelParams

logger = logging.getLogger(__name__)

DEFAULT_WINDOW = BOUND_WINDOW
DEFAULT_GRID = 48
LINK_TOL = 1e-12
N_BANDS = 3
BAND_NAMES = ("bottom", "middle", "top")


class BandTrackingError(RuntimeError):
    """Bound bands could not be identified or followed across the grid."""


def k_axis(n_k: int) -> np.ndarray:
    return -ZONE_EDGE + ZONE_WIDTH * np.arange(n_k) / n_k


def phi_axis(n_phi: int) -> np.ndarray:
    return 2 * math.pi * np.arange(n_phi) / n_phi


@dataclasses.dataclass
class GridPoint:
    """Bound-state candidates of one Bloch block (energy-window filtered)."""

    energies: np.ndarray
    bound_probability: np.ndarray
    vectors: np.ndarray


@dataclasses.dataclass
class BandGrid:
    params: ModelParams
    Ks: np.ndarray
    phis: np.ndarray
    delta0: int
    window: tuple[float, float]
    points: list[list[GridPoint]]

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.Ks), len(self.phis)


def _solve_point(args):
    params, K, phi0, delta0, window, store_threshold = args
    spec = band_solve(build_bloch_matrix(params, K, phi0), delta0)
    e = spec.energies
    keep = (spec.bound_probability > store_threshold) & (e.real > window[0]) & (e.real < window[1])
    return GridPoint(e[keep], spec.bound_probability[keep], spec.vectors[:, keep].copy())


def compute_band_grid(
    params: ModelParams,
    n_k: int = DEFAULT_GRID,
    n_phi: int = DEFAULT_GRID,
    *,
    delta0: int = DEFAULT_DELTA0,
    window: tuple[float, float] = DEFAULT_WINDOW,
    store_threshold: float = 0.1,
    workers: int = 1,
) -> BandGrid:
    """Diagonalize ``M(K, phi0)`` on a uniform torus grid.

    Only eigenpairs with ``Re E`` inside ``window`` and bound probability
    above ``store_threshold`` are kept. Grid points are independent; with
    ``workers > 1`` they are distributed over processes and merged in grid
    order.
    """
    Ks, phis = k_axis(n_k), phi_axis(n_phi)
    tasks = [(params, K, p, delta0, window, store_threshold) for K in Ks for p in phis]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            flat = list(pool.map(_solve_point, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    else:
        flat = [_solve_point(t) for t in tasks]
    points = [flat[i * n_phi:(i + 1) * n_phi] for i in range(n_k)]
    return BandGrid(params, Ks, phis, delta0, tuple(window), points)


@dataclasses.dataclass
class BandSurface:
    """One bound band sampled on the torus grid.

    ``vectors`` are in the integer-position frame (see :func:`to_periodic_frame`).
    Points where the band is not identifiable (``mask`` false) hold a copy of
    the nearest identified state along K in the same phi0 row; ``filled``
    marks them. ``branch`` is +1/-1 for the K > 0 / K < 0 pieces of the
    bottom band and 0 elsewhere.
    """

    band: int
    params: ModelParams
    Ks: np.ndarray
    phis: np.ndarray
    energies: np.ndarray
    bound_probability: np.ndarray
    vectors: np.ndarray
    mask: np.ndarray
    filled: np.ndarray
    branch: np.ndarray
    p_th: float

    @property
    def name(self) -> str:
        return BAND_NAMES[self.band]

    @property
    def trunc(self) -> int:
        return self.vectors.shape[-1] // 3


def _frame_phase(params: ModelParams, trunc: int, K: float, phi0: float) -> np.ndarray:
    return np.exp(0.5j * K * (pair_position_sums(trunc, params.delta, phi0) - integer_pair_sums(trunc)))


def to_periodic_frame(params: ModelParams, K: float, phi0: float, u: np.ndarray) -> np.ndarray:
    """Re-express a native Bloch vector with Bloch phases at integer positions."""
    return _frame_phase(params, len(u) // 3, K, phi0) * u


def to_native_frame(params: ModelParams, K: float, phi0: float, u: np.ndarray) -> np.ndarray:
    return np.conj(_frame_phase(params, len(u) // 3, K, phi0)) * u


def select_bound_bands(grid: BandGrid, p_th: float = DEFAULT_P_TH) -> list[BandSurface]:
    """Assign bound candidates (``P > p_th``) to the bottom/middle/top surfaces.

    Candidates are ranked by ``Re E`` and assigned from the top down, since
    the upper two bands are present everywhere while the bottom band
    dissolves into the continuum around ``K = 0``. A fourth candidate, if
    any, is ignored; more than four is treated as a misconfigured threshold.
    """
    n_k, n_phi = grid.shape
    first = next(gp.vectors for row in grid.points for gp in row if gp.vectors.shape[1])
    dim = first.shape[0]
    energies = np.full((N_BANDS, n_k, n_phi), np.nan + 0j)
    prob = np.zeros((N_BANDS, n_k, n_phi))
    vecs = np.zeros((N_BANDS, n_k, n_phi, dim), dtype=complex)
    mask = np.zeros((N_BANDS, n_k, n_phi), dtype=bool)
    for i, K in enumerate(grid.Ks):
        for j, phi0 in enumerate(grid.phis):
            gp = grid.points[i][j]
            cand = np.where(gp.bound_probability > p_th)[0]
            if len(cand) > N_BANDS + 1:
                raise BandTrackingError(
                    f"{len(cand)} bound candidates at K={K:.4f}, phi0={phi0:.4f}; check P_th")
            cand = cand[np.argsort(-gp.energies[cand].real)][:N_BANDS]
            for rank, c in enumerate(cand):
                b = N_BANDS - 1 - rank
                energies[b, i, j] = gp.energies[c]
                prob[b, i, j] = gp.bound_probability[c]
                vecs[b, i, j] = to_periodic_frame(grid.params, K, phi0, gp.vectors[:, c])
                mask[b, i, j] = True

    surfaces = []
    for b in range(N_BANDS):
        if not mask[b].any(axis=0).all():
            raise BandTrackingError(f"{BAND_NAMES[b]} band missing for a whole phi0 row")
        filled = ~mask[b]
        _fill_along_k(vecs[b], mask[b])
        branch = np.zeros((n_k, n_phi), dtype=int)
        if b == 0:
            branch[:] = np.where(grid.Ks[:, None] > 0, 1, -1)
            branch[filled] = 0
        surfaces.append(BandSurface(b, grid.params, grid.Ks.copy(), grid.phis.copy(), energies[b],
                                    prob[b], vecs[b], mask[b], filled, branch, p_th))
    return surfaces


def _fill_along_k(vecs: np.ndarray, mask: np.ndarray) -> None:
    n_k = mask.shape[0]
    for j in range(mask.shape[1]):
        have = np.where(mask[:, j])[0]
        for i in np.where(~mask[:, j])[0]:
            # Nearest in K without crossing the zone boundary, so no gluing phase is needed.
            src = have[np.argmin(np.abs(have - i))]
            vecs[i, j] = vecs[src, j]
    assert mask.shape[0] == n_k


@dataclasses.dataclass
class ChernResult:
    band: int
    link_chern: int
    continuum_chern: float
    grid_resolution: tuple[int, int]
    trunc: int
    p_th: float
    filled_points: int
    link_flux_sum: float

    def as_dict(self) -> dict:
        return {
            "band": self.band,
            "link_chern": self.link_chern,
            "continuum_chern": self.continuum_chern,
            "grid": list(self.grid_resolution),
            "L": self.trunc,
            "P_th": self.p_th,
            "filled_points": self.filled_points,
        }


def _wrap_phase(trunc: int) -> np.ndarray:
    # u(K + 2pi/3) = exp(-i (2pi/3) S_int / 2) u(K) in the integer-position frame.
    return np.exp(-0.5j * ZONE_WIDTH * integer_pair_sums(trunc))


def _overlaps(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.einsum("...d,...d->...", a.conj(), b)


def plaquette_flux(surface: BandSurface) -> np.ndarray:
    """Berry flux through each grid plaquette, K outer and phi0 inner.

    Raises :class:`BandTrackingError` if any link overlap vanishes.
    """
    v = surface.vectors
    next_k = np.roll(v, -1, axis=0)
    next_k[-1] = v[0] * _wrap_phase(surface.trunc)
    link_k = _overlaps(v, next_k)
    link_p = _overlaps(v, np.roll(v, -1, axis=1))
    smallest = min(np.abs(link_k).min(), np.abs(link_p).min())
    if smallest < LINK_TOL:
        raise BandTrackingError(f"vanishing link overlap {smallest:.2e}")
    link_k = link_k / np.abs(link_k)
    link_p = link_p / np.abs(link_p)
    # Gluing phases cancel in the phi0 links at the wrapped column.
    w = link_k * np.roll(link_p, -1, axis=0) * np.conj(np.roll(link_k, -1, axis=1)) * np.conj(link_p)
    return np.angle(w)


def chern_link(surface: BandSurface) -> ChernResult:
    flux = plaquette_flux(surface)
    total = float(flux.sum()) / (2 * math.pi)
    c = int(round(total))
    if abs(total - c) > 1e-6:
        raise BandTrackingError(f"link flux sum {total} is not an integer")
    return ChernResult(surface.band, c, chern_continuum(surface), surface.mask.shape,
                       surface.trunc, surface.p_th, int(surface.filled.sum()), total)


def _native_vectors(surface: BandSurface) -> np.ndarray:
    native = np.empty_like(surface.vectors)
    for i, K in enumerate(surface.Ks):
        for j, p in enumerate(surface.phis):
            native[i, j] = to_native_frame(surface.params, K, p, surface.vectors[i, j])
    return native


def berry_curvature(surface: BandSurface) -> np.ndarray:
    """Berry curvature of the native eigenvectors, ``F(K, phi0)``.

    Each value is the plaquette phase of the native vectors divided by the
    plaquette area ``dK dphi0``, which is the gauge-invariant discretization
    of ``i(<d_phi u | d_K u> - <d_K u | d_phi u>)``. At the zone boundary
    the native gluing ``u(K + 2pi/3) = exp(-i (2pi/3) S / 2) u(K)`` is used,
    with ``S`` the modulated pair-position sums.
    """
    params = surface.params
    native = _native_vectors(surface)
    wrap = np.stack([np.exp(-0.5j * ZONE_WIDTH * pair_position_sums(surface.trunc, params.delta, p))
                     for p in surface.phis])
    next_k = np.roll(native, -1, axis=0)
    next_k[-1] = native[0] * wrap
    link_k = _overlaps(native, next_k)
    link_p = _overlaps(native, np.roll(native, -1, axis=1))
    link_k = link_k / np.abs(link_k)
    link_p = link_p / np.abs(link_p)
    # The phi0 links of the wrapped row need the gluing phase on both ends.
    link_p_next = np.roll(link_p, -1, axis=0)
    link_p_next[-1] = _overlaps(native[0] * wrap, np.roll(native[0] * wrap, -1, axis=0))
    link_p_next[-1] /= np.abs(link_p_next[-1])
    w = link_k * link_p_next * np.conj(np.roll(link_k, -1, axis=1)) * np.conj(link_p)
    dk = ZONE_WIDTH / len(surface.Ks)
    dp = 2 * math.pi / len(surface.phis)
    return np.angle(w) / (dk * dp)


def chern_continuum(surface: BandSurface) -> float:
    """Integrate :func:`berry_curvature` over the grid (periodic trapezoid rule).

    For the bottom band only identified points contribute, i.e. the
    curvature of its two branches is summed.
    """
    f = berry_curvature(surface)
    dk = ZONE_WIDTH / len(surface.Ks)
    dp = 2 * math.pi / len(surface.phis)
    weight = surface.mask if surface.filled.any() else np.ones_like(surface.mask)
    return float((f * weight).sum() * dk * dp / (2 * math.pi))


def chern_numbers(params: ModelParams, n_k: int = DEFAULT_GRID, n_phi: int = DEFAULT_GRID,
                  *, p_th: float = DEFAULT_P_TH, delta0: int = DEFAULT_DELTA0,
                  window: tuple[float, float] = DEFAULT_WINDOW, workers: int = 1) -> list[ChernResult]:
    grid = compute_band_grid(params, n_k, n_phi, delta0=delta0, window=window, workers=workers)
    return [chern_link(s) for s in select_bound_bands(grid, p_th)]
