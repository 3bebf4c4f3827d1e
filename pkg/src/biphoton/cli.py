"""Command-line driver: configuration, validation and experiment runners.

Usage::

    biphoton <experiment> --config run.cfg [--out DIR] [--workers N]

The config file is flat ``key = value`` text; ``#`` starts a comment and
lists are comma separated. See :data:`FIELDS` for the keys.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import export
from .bloch import (
    BOUND_WINDOW,
    DEFAULT_P_TH,
    MIN_TRUNC,
    ZONE_EDGE,
    ResonanceError,
    band_solve,
    bound_band_indices,
    build_bloch_matrix,
)
from .chern import BAND_NAMES, BandTrackingError, berry_curvature, chern_link, compute_band_grid, select_bound_bands
from .eig_engine import EigenSolverError
from .finite import solve_two_excitation
from .interface import critical_phases, find_interface_states, fidelity, interface_ansatz
from .lattice import ModelParams, build_interface, build_uniform
from .momentum_dos import dos

logger = logging.getLogger(__name__)

EXPERIMENTS = ("bands", "chern", "finite", "dos", "interface", "critical-phase")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


@dataclasses.dataclass
class RunConfig:
    experiment: str = ""
    # model
    gamma0: float = 1.0
    phi: float = 0.3
    delta: float = 0.1
    phi0: float = 0.0
    beta: int = 3
    n_qubits: int = 100
    trunc: int = 70
    # bands / chern
    k_points: int = 61
    n_k: int = 48
    n_phi: int = 48
    p_th: float = DEFAULT_P_TH
    delta0: int = 5
    window_min: float = BOUND_WINDOW[0]
    window_max: float = BOUND_WINDOW[1]
    # finite / interface
    geometry: str = "uniform"
    phi0_list: list = dataclasses.field(default_factory=list)
    n_list: list = dataclasses.field(default_factory=list)
    tilt_g: float = 0.5
    gamma_max: float = 1e-6
    edge_weight: float = 0.5
    # dos
    sigma: float = 1e-3
    s_max: int = 10
    m_cells: int = 50
    first_cell: int = 0
    e_min: float | None = None
    e_max: float | None = None
    # execution
    out: str = "."
    workers: int = 1

    def model(self, **changes) -> ModelParams:
        base = dict(gamma0=self.gamma0, phi=self.phi, delta=self.delta, phi0=self.phi0,
                    beta=self.beta, n_qubits=self.n_qubits, trunc=self.trunc)
        base.update(changes)
        return ModelParams(**base)


FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_LIST_TYPES = {"phi0_list": float, "n_list": int}
_OPTIONAL_FLOATS = {"e_min", "e_max"}


def _field_type(name):
    if name in _OPTIONAL_FLOATS:
        return float
    return type(FIELDS[name].default)


def parse_config(text: str) -> RunConfig:
    """Parse flat ``key = value`` text. Unknown keys raise ``ValueError``."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in FIELDS:
            raise ValueError(f"line {lineno}: unknown key {key!r}")
        if key in _LIST_TYPES:
            values[key] = [_LIST_TYPES[key](v) for v in val.split(",") if v.strip()]
        else:
            typ = _field_type(key)
            try:
                values[key] = typ(val)
            except ValueError as exc:
                raise ValueError(f"line {lineno}: bad value for {key}: {val!r}") from exc
    return RunConfig(**values)


def _emit_value(v) -> str:
    if isinstance(v, list):
        return ", ".join(_emit_value(x) for x in v)
    if isinstance(v, float):
        return export.fmt_float(v)
    return str(v)


def emit_config(cfg: RunConfig) -> str:
    return "".join(f"{k} = {_emit_value(getattr(cfg, k))}\n" for k in FIELDS if getattr(cfg, k) is not None)


def validate(cfg: RunConfig) -> list[str]:
    """All precondition violations of ``cfg``; empty when it can run."""
    out = []
    if cfg.experiment not in EXPERIMENTS:
        out.append(f"experiment must be one of {', '.join(EXPERIMENTS)}")
    if not cfg.gamma0 > 0:
        out.append("gamma0 > 0 required")
    if cfg.beta != 3:
        out.append("beta = 3 required")
    if not cfg.delta < 0.5:
        out.append("delta < 0.5 required")
    if not cfg.delta >= 0:
        out.append("delta ≥ 0 required")
    if cfg.trunc < MIN_TRUNC:
        out.append(f"trunc ≥ {MIN_TRUNC} required")
    sizes = cfg.n_list or [cfg.n_qubits]
    if any(n < 4 for n in sizes):
        out.append("n_qubits ≥ 4 required")
    if cfg.geometry not in ("uniform", "interface"):
        out.append("geometry must be uniform or interface")
    if (cfg.experiment == "interface" or cfg.geometry == "interface") and any(n % 2 for n in sizes):
        out.append("even n_qubits required for the interface geometry")
    for name in ("k_points", "n_k", "n_phi", "delta0", "s_max", "m_cells", "workers"):
        if getattr(cfg, name) < 1:
            out.append(f"{name} ≥ 1 required")
    if cfg.k_points < 2:
        out.append("k_points ≥ 2 required")
    if cfg.first_cell < 0:
        out.append("first_cell ≥ 0 required")
    if not 0 < cfg.p_th < 1:
        out.append("0 < p_th < 1 required")
    if not cfg.window_min < cfg.window_max:
        out.append("window_min < window_max required")
    if not cfg.sigma > 0:
        out.append("sigma > 0 required")
    if not cfg.gamma_max > 0:
        out.append("gamma_max > 0 required")
    if cfg.e_min is not None and cfg.e_max is not None and not cfg.e_min < cfg.e_max:
        out.append("e_min < e_max required")
    nums = [cfg.gamma0, cfg.phi, cfg.delta, cfg.phi0, cfg.tilt_g, *cfg.phi0_list]
    if not all(math.isfinite(x) for x in nums):
        out.append("parameters must be finite")
    return out


def _params_dict(p: ModelParams) -> dict:
    return dataclasses.asdict(p)


# ---------------------------------------------------------------- experiments

def run_bands(cfg: RunConfig, out: Path) -> list[Path]:
    params = cfg.model()
    window = (cfg.window_min, cfg.window_max)
    rows, bound_rows = [], []
    for K in np.linspace(-ZONE_EDGE, ZONE_EDGE, cfg.k_points):
        spec = band_solve(build_bloch_matrix(params, K), cfg.delta0)
        for m, (e, p) in enumerate(zip(spec.energies, spec.bound_probability)):
            rows.append((K, params.phi0, m, e.real, e.imag, p))
        idx = bound_band_indices(spec, cfg.p_th, window)[::-1][:3]
        for rank, m in enumerate(idx):
            e = spec.energies[m]
            bound_rows.append((K, params.phi0, BAND_NAMES[2 - rank], m, e.real, e.imag,
                               spec.bound_probability[m]))
    head = ["K", "phi0", "band_index", "ReE", "ImE", "P_bound"]
    summary = {}
    for name in BAND_NAMES:
        e = [r[4] for r in bound_rows if r[2] == name]
        summary[name] = {"k_points_present": len(e), "ReE_min": min(e) if e else None,
                         "ReE_max": max(e) if e else None}
    return [export.write_csv(out / "bands.csv", head, rows),
            export.write_csv(out / "bound_bands.csv", ["K", "phi0", "band", *head[2:]], bound_rows),
            export.write_json(out / "bands.json", {"params": _params_dict(params), "delta0": cfg.delta0,
                                                   "P_th": cfg.p_th, "window": list(window),
                                                   "energy": "E = eigenvalue(-i gamma0 M) / 2",
                                                   "bound_bands": summary})]


def run_chern(cfg: RunConfig, out: Path) -> list[Path]:
    params = cfg.model()
    grid = compute_band_grid(params, cfg.n_k, cfg.n_phi, delta0=cfg.delta0,
                             window=(cfg.window_min, cfg.window_max), workers=cfg.workers)
    surfaces = select_bound_bands(grid, cfg.p_th)
    results = [chern_link(s).as_dict() for s in surfaces]
    curv = [berry_curvature(s) for s in surfaces]
    rows = [(K, p, *(c[i, j] for c in curv)) for i, K in enumerate(grid.Ks) for j, p in enumerate(grid.phis)]
    return [export.write_json(out / "chern.json", {"params": _params_dict(params), "bands": results}),
            export.write_csv(out / "curvature.csv", ["K", "phi0", *(f"F_{n}" for n in BAND_NAMES)], rows)]


def _array(params: ModelParams, geometry: str):
    return build_interface(params) if geometry == "interface" else build_uniform(params)


def run_finite(cfg: RunConfig, out: Path) -> list[Path]:
    rows = []
    phases = cfg.phi0_list or [cfg.phi0]
    for phi0 in phases:
        spec = solve_two_excitation(_array(cfg.model(phi0=phi0), cfg.geometry))
        eps = spec.pair_energies
        t = spec.tilted_degrees(cfg.tilt_g)
        w = spec.bound_weights(cfg.delta0)
        rows.extend((phi0, v, eps[v].real, eps[v].imag, spec.decay_rates[v], t[v], w[v]) for v in range(len(eps)))
        del spec
    meta = {"params": _params_dict(cfg.model()), "geometry": cfg.geometry, "phi0_list": phases,
            "g": cfg.tilt_g, "delta0": cfg.delta0,
            "energy": "eps is the pair eigenvalue; per-excitation E = eps / 2"}
    return [export.write_csv(out / "finite.csv", ["phi0", "state_index", "Re_eps", "Im_eps", "Gamma", "T",
                                                  "bound_weight"], rows),
            export.write_json(out / "finite.json", meta)]


def run_dos(cfg: RunConfig, out: Path) -> list[Path]:
    params = cfg.model()
    spec = solve_two_excitation(_array(params, cfg.geometry))
    lo = cfg.window_min if cfg.e_min is None else cfg.e_min
    hi = cfg.window_max if cfg.e_max is None else cfg.e_max
    E_axis = np.arange(lo, hi + cfg.sigma / 4, cfg.sigma / 2)
    grid = dos(spec, sigma=cfg.sigma, s_max=cfg.s_max, m_cells=cfg.m_cells, first_cell=cfg.first_cell,
               E_axis=E_axis)
    meta = {"params": _params_dict(params), "sigma": cfg.sigma, "s_max": cfg.s_max, "M": cfg.m_cells,
            "first_cell": cfg.first_cell, "E_step": cfg.sigma / 2, "K_points": len(grid.K_axis),
            "ridge": [[k, e] for k, e in zip(grid.K_axis, grid.ridge())]}
    return [export.write_matrix_csv(out / "dos.csv", grid.E_axis, grid.K_axis, grid.F),
            export.write_json(out / "dos.json", meta)]


def run_interface(cfg: RunConfig, out: Path) -> list[Path]:
    reports = []
    for n in cfg.n_list or [cfg.n_qubits]:
        params = cfg.model(n_qubits=n)
        array = build_interface(params)
        spec = solve_two_excitation(array)
        found = find_interface_states(spec, gamma_max=cfg.gamma_max, edge_weight=cfg.edge_weight,
                                      delta0=cfg.delta0, g=cfg.tilt_g, window=(cfg.window_min, cfg.window_max))
        ansatz = interface_ansatz(array).psi
        picked = {"most_subradiant": [found.most_subradiant], "long_lived": found.long_lived,
                  "bound_edge": found.bound_edge}
        states = {}
        for label, idx in picked.items():
            rows = found.summary(spec, idx)
            for r in rows:
                r["fidelity_vs_ansatz"] = fidelity(ansatz, spec.amplitudes[:, r["index"]])
            states[label] = rows
        reports.append({"N": n, "params": _params_dict(params), "interface_states": states,
                        "critical_phases": critical_phases(n)})
        del spec
    return [export.write_json(out / "interface.json", {"runs": reports})]


def run_critical_phase(cfg: RunConfig, out: Path) -> list[Path]:
    from .finite import build_pair_hamiltonian, inversion_defect

    sizes = cfg.n_list or [cfg.n_qubits]
    runs = []
    for n in sizes:
        roots = critical_phases(n)
        defects = [inversion_defect(build_pair_hamiltonian(build_uniform(cfg.model(n_qubits=n, phi0=r)),
                                                           sparse=True)) for r in roots]
        runs.append({"N": n, "critical_phases": roots, "phi0_over_2pi": [r / (2 * math.pi) for r in roots],
                     "inversion_defect": defects})
    return [export.write_json(out / "critical_phase.json", {"runs": runs})]


RUNNERS = {"bands": run_bands, "chern": run_chern, "finite": run_finite, "dos": run_dos,
           "interface": run_interface, "critical-phase": run_critical_phase}


def run(cfg: RunConfig) -> int:
    """Validate and execute one experiment; returns the process exit code."""
    problems = validate(cfg)
    if problems:
        for p in problems:
            logger.error("config: %s", p)
        return EXIT_CONFIG
    out = Path(cfg.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        logger.error("cannot create output directory: %s", exc)
        return EXIT_IO
    try:
        files = RUNNERS[cfg.experiment](cfg, out)
    except (EigenSolverError, BandTrackingError, ResonanceError, np.linalg.LinAlgError) as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER
    except OSError as exc:
        logger.error("I/O failure: %s", exc)
        return EXIT_IO
    for f in files:
        logger.info("wrote %s", f)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="biphoton", description=__doc__.splitlines()[0])
    ap.add_argument("experiment", nargs="?", default=None, help=" | ".join(EXPERIMENTS))
    ap.add_argument("--config", type=Path, help="flat key = value config file")
    ap.add_argument("--out", help="output directory (overrides config)")
    ap.add_argument("--workers", type=int, help="worker processes for grid sweeps")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config.read_text()) if args.config else RunConfig()
    except OSError as exc:
        logger.error("cannot read config: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        logger.error("config: %s", exc)
        return EXIT_CONFIG
    if args.experiment:
        cfg.experiment = args.experiment
    if args.out:
        cfg.out = args.out
    if args.workers is not None:
        cfg.workers = args.workers
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
