"""Experiment runners: config in, CSV rows plus a JSON sidecar out."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, derived_constants
from .dyson import (AnharmonicPotential, DysonConfig, PerturbationRegion, convergence_experiment,
                    dyson_evolve)
from .harmonic import Propagator, dispersion, symplectic_form
from .lattice import SiteField, delta_field, dual_grid
from .lightcone import fit_velocity, lightcone_scan
from .oracle import (OracleConfig, block_norm, oracle_commutator_norm, oracle_heisenberg,
                     oracle_weyl_matrix, weyl_sum_matrix)
from .weyl import commutator_norm_harmonic, sum_norm_bound

log = logging.getLogger(__name__)

SCHEMAS = {
    "lightcone": ("t", "d", "lhs", "rhs", "ratio"),
    "dyson": ("t", "order", "terms", "norm_bound", "oracle_err"),
    "converge": ("sep", "bound"),
    "oracle": ("case", "analytic", "oracle", "abs_err", "cutoff"),
}


def schema(kind: str, nu: int = 1) -> tuple:
    if kind == "dispersion":
        return ("k", "gamma") if nu == 1 else tuple(f"k{j + 1}" for j in range(nu)) + ("gamma",)
    return SCHEMAS[kind]


@dataclass
class ResultRecord:
    kind: str
    values: dict


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def emit_csv(records, path, columns=None, kind=None, nu=1):
    """Header row plus one row per record; floats with 17 significant digits.

    The header comes from ``columns`` or else from the schema of ``kind`` (or of
    the records' own kind), so an empty record list still yields a header.
    """
    records = list(records)
    kinds = {r.kind for r in records}
    if len(kinds) > 1:
        raise ValueError(f"records of mixed kinds {sorted(kinds)}")
    if columns is None:
        kind = kind or (records[0].kind if records else None)
        if kind is None:
            raise ValueError("empty record list needs columns or kind")
        if records and kind == "dispersion":
            nu = len(records[0].values) - 1
        columns = schema(kind, nu)
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for r in records:
            writer.writerow([_fmt(r.values.get(c)) for c in columns])


# -- runners ---------------------------------------------------------------


def _potential(cfg):
    return AnharmonicPotential(tuple(tuple(a) for a in cfg.atoms))


def _source(cfg, torus):
    return delta_field(cfg.source_point, torus) * cfg.amplitude


def _seeded(shape, seed):
    if isinstance(shape, dict) and shape.get("shape") == "random" and "seed" not in shape:
        return {**shape, "seed": seed}
    return shape


def _run_dispersion(cfg, emit, summary):
    params = cfg.params
    for k in dual_grid(cfg.torus):
        row = dict(zip(schema("dispersion", cfg.nu), list(k)))
        row["gamma"] = dispersion(k, params)
        emit(row)


def _run_lightcone(cfg, emit, summary, workers):
    records = lightcone_scan(cfg.params, cfg.torus, cfg.t_grid, cfg.d_grid,
                             _seeded(cfg.f_shape, cfg.seed), _seeded(cfg.g_shape, cfg.seed),
                             decay_rate=cfg.decay_rate, margin=cfg.margin, workers=workers)
    for r in records:
        emit({"t": r.t, "d": r.d, "lhs": r.lhs, "rhs": r.rhs, "ratio": r.ratio})
    summary["prefactor"] = records[0].prefactor
    try:
        summary["fitted_velocity"] = fit_velocity(records, cfg.threshold)
    except Exception as exc:  # a fit is a summary, never a reason to fail the run
        summary["fitted_velocity"] = None
        log.info("velocity fit skipped: %s", exc)


def _dyson_oracle_config(cfg, torus):
    n = cfg.oracle_sites if cfg.oracle_sites is not None else torus.num_sites
    pot_sites = tuple(sorted(int(np.ravel_multi_index(torus.index(x), torus.shape)) for x in cfg.region))
    return OracleConfig(n, cfg.params, cfg.dyson_cutoff, _potential(cfg), pot_sites)


def _run_dyson(cfg, emit, summary):
    torus = cfg.torus
    prop = Propagator(cfg.params, torus)
    V = _potential(cfg)
    region = PerturbationRegion(torus, frozenset(cfg.region))
    f = _source(cfg, torus)
    ocfg = _dyson_oracle_config(cfg, torus) if cfg.dyson_oracle else None
    for t in cfg.t_grid:
        exact = oracle_heisenberg(oracle_weyl_matrix(f, ocfg), t, ocfg) if ocfg else None
        for n in range(cfg.order + 1):
            dc = DysonConfig(n, cfg.quad_points, cfg.merge_tol, cfg.quadrature)
            s = dyson_evolve(f, t, V, region, prop, dc)
            err = block_norm(weyl_sum_matrix(s, ocfg) - exact, ocfg) if ocfg else None
            emit({"t": t, "order": n, "terms": len(s), "norm_bound": sum_norm_bound(s), "oracle_err": err})


def _run_converge(cfg, emit, summary):
    torus = cfg.torus
    prop = Propagator(cfg.params, torus)
    regions = [PerturbationRegion.box(torus, r) for r in cfg.radii]
    f = _source(cfg, torus)
    for t in cfg.t_grid:
        for sep, bound in convergence_experiment(f, t, _potential(cfg), regions, prop,
                                                 cfg.converge_quad_points, cfg.converge_margin):
            emit({"sep": sep, "bound": bound})


def _wrap(angle):
    return (angle + math.pi) % (2 * math.pi) - math.pi


def _run_oracle(cfg, emit, summary):
    torus = cfg.torus
    prop = Propagator(cfg.params, torus)
    f, g = delta_field(0, torus), delta_field(1, torus)
    cutoffs = (cfg.cutoff, cfg.cutoff - cfg.cutoff_step)
    for t in cfg.t_grid:
        analytic = commutator_norm_harmonic(f, g, t, prop)
        for c in cutoffs:
            measured = oracle_commutator_norm(f, g, t, OracleConfig(2, cfg.params, c), cfg.keep)
            emit({"case": f"commutator t={t:g}", "analytic": analytic, "oracle": measured,
                  "abs_err": abs(analytic - measured), "cutoff": c})
    rng = np.random.default_rng(cfg.seed)
    for i in range(cfg.pairs):
        a, b = (rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(2))
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        fa, fb = SiteField(torus, a), SiteField(torus, b)
        sigma = symplectic_form(fa, fb)
        for c in cutoffs:
            ocfg = OracleConfig(2, cfg.params, c)
            lhs = oracle_weyl_matrix(a, ocfg) @ oracle_weyl_matrix(b, ocfg)
            rhs = oracle_weyl_matrix(a + b, ocfg)
            phase = float(np.angle(lhs[0, 0] / rhs[0, 0]))
            resid = block_norm(lhs - np.exp(1j * sigma) * rhs, ocfg, cfg.keep)
            emit({"case": f"product[{i}] residual={resid:.3e}", "analytic": sigma, "oracle": phase,
                  "abs_err": abs(_wrap(phase - sigma)), "cutoff": c})


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int = 1):
    """Run ``cfg``, writing ``<kind>.csv`` and ``<kind>.json`` into ``out_dir``.

    Returns (records, status) with status 0 on success.  On failure the rows
    computed so far are flushed with a trailing FAILED marker row and the error
    is re-raised.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    columns = schema(cfg.kind, cfg.nu)
    records: list = []
    summary: dict = {}
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()

    def emit(row):
        records.append(ResultRecord(cfg.kind, row))

    status, error = 0, None
    try:
        if cfg.kind == "lightcone":
            _run_lightcone(cfg, emit, summary, workers)
        else:
            {"dispersion": _run_dispersion, "dyson": _run_dyson, "converge": _run_converge,
             "oracle": _run_oracle}[cfg.kind](cfg, emit, summary)
    except Exception as exc:
        status, error = 1, exc
    rows = list(records)
    if error is not None:
        rows.append(ResultRecord(cfg.kind, {columns[0]: "FAILED"}))
    emit_csv(rows, out_dir / f"{cfg.kind}.csv", columns)
    sidecar = {
        "config": cfg.to_dict(),
        "constants": derived_constants(cfg),
        "summary": summary,
        "version": __version__,
        "started_at": started,
        "wall_time_s": time.perf_counter() - t0,
        "status": "ok" if error is None else f"failed: {type(error).__name__}: {error}",
        "rows": len(records),
    }
    (out_dir / f"{cfg.kind}.json").write_text(json.dumps(sidecar, indent=2, default=_json_default) + "\n",
                                              encoding="utf-8")
    if error is not None:
        raise error
    return records, status


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, tuple):
        return list(x)
    raise TypeError(f"not JSON serializable: {type(x).__name__}")
