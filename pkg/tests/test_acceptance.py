"""Acceptance gate: each criterion at its stated tolerance and runtime budget.

Every test prints (and registers for the terminal summary) one line
``[criterion N] PASS|FAIL ...``.  Run just this gate with

    pytest tests/test_acceptance.py -v
"""
import json
import math
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from lrlat import (AnharmonicPotential, DysonConfig, HarmonicParams, OracleConfig, PerturbationRegion,
                   Propagator, SiteField, Torus, commutator_norm_harmonic, convergence_experiment,
                   delta_field, dump_config, dyson_evolve, lightcone_scan, lr_velocity, oracle_commutator_norm,
                   oracle_weyl_matrix, parse_config, symplectic_form, volume_difference_bound)
from lrlat.cli import main
from lrlat.lightcone import fit_decay_rate, fit_velocity
from lrlat.oracle import block_norm, heisenberg_block, oracle_heisenberg, weyl_sum_matrix

V = AnharmonicPotential(((0.1, 1.0),))


def report(n, ok, detail, elapsed, budget=None):
    within = budget is None or elapsed < budget
    status = "PASS" if ok and within else "FAIL"
    timing = f"{elapsed:.2f}s" + (f" (budget {budget:g}s)" if budget else "")
    line = f"[criterion {n}] {status} {detail}; runtime {timing}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line
    assert within, line


def test_criterion_1_exact_formula_vs_brute_force():
    t0 = time.perf_counter()
    p = HarmonicParams(1.0, 0.5)
    torus = Torus(1, 2)
    prop = Propagator(p, torus)
    f, g = delta_field(0, torus), delta_field(1, torus)
    errs, changes = [], []
    for t in (0.25, 0.5, 1.0):
        exact = commutator_norm_harmonic(f, g, t, prop)
        hi = oracle_commutator_norm(f, g, t, OracleConfig(2, p, 40))
        lo = oracle_commutator_norm(f, g, t, OracleConfig(2, p, 32))
        errs.append(abs(exact - hi))
        changes.append(abs(hi - lo))
    # converged means the cutoff 32 -> 40 change is below 10% of the tolerance
    ok = max(errs) <= 1e-4 and max(changes) <= 1e-5
    report(1, ok, f"max |analytic - oracle| = {max(errs):.2e} (tol 1e-4), "
                  f"cutoff 32->40 change {max(changes):.2e}", time.perf_counter() - t0, 10)


def test_criterion_2_propagator_laws():
    t0 = time.perf_counter()
    torus = Torus(1, 128)
    prop = Propagator(HarmonicParams(1.0, 1.0), torus)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(5):
        f, g = (SiteField(torus, rng.normal(size=128) + 1j * rng.normal(size=128)) for _ in range(2))
        s, u = rng.uniform(-2, 2, size=2)
        r = rng.normal()
        worst = max(worst,
                    np.abs(prop.evolve(f, 0.0).values - f.values).max(),
                    np.abs(prop.evolve(prop.evolve(f, s), u).values - prop.evolve(f, s + u).values).max(),
                    np.abs(prop.evolve(f * r + g, u).values
                           - (r * prop.evolve(f, u).values + prop.evolve(g, u).values)).max(),
                    abs(symplectic_form(prop.evolve(f, u), prop.evolve(g, u)) - symplectic_form(f, g)))
    report(2, worst <= 1e-10, f"max identity/group/linearity/symplectic defect = {worst:.2e} (tol 1e-10)",
           time.perf_counter() - t0, 5)


def test_criterion_3_spectral_vs_direct():
    t0 = time.perf_counter()
    rng = np.random.default_rng(3)
    worst = 0.0
    for nu, L in [(1, 2), (1, 8), (1, 16), (1, 32), (2, 8)]:
        torus = Torus(nu, L)
        prop = Propagator(HarmonicParams(0.8, 0.7, nu), torus)
        f = SiteField(torus, rng.normal(size=torus.shape) + 1j * rng.normal(size=torus.shape))
        for t in (0.1, 0.75, 2.0):
            kf, kd = prop.kernels(t), prop.kernels_direct(t)
            worst = max(worst, np.abs(kf.h1.values - kd.h1.values).max(),
                        np.abs(kf.h2.values - kd.h2.values).max(),
                        np.abs(prop.evolve(f, t, "fft").values - prop.evolve(f, t, "direct").values).max())
    report(3, worst <= 1e-10, f"max |fft - direct| = {worst:.2e} (tol 1e-10)", time.perf_counter() - t0, 5)


def test_criterion_4_light_cone():
    t0 = time.perf_counter()
    p = HarmonicParams(1.0, 1.0)
    v = lr_velocity(p)
    ts = np.round(np.arange(0.0, 1.0001, 0.05), 10)
    recs = lightcone_scan(p, Torus(1, 256), ts, range(0, 61))
    C = recs[0].prefactor
    dominated = all(r.lhs <= C * math.exp(-2 * (r.d - v * abs(r.t))) * (1 + 1e-12) for r in recs)
    vfit = fit_velocity(recs)
    vt = math.ceil(v * 0.5)
    rate = fit_decay_rate(recs, 0.5, window=(vt + 5, vt + 25))
    ok = dominated and vfit <= v and rate <= -2
    report(4, ok, f"(a) domination with C={C:.3e}: {dominated}; (b) fitted v={vfit:.3f} <= {v:.3f}; "
                  f"(c) decay rate {rate:.2f} <= -2", time.perf_counter() - t0, 60)


def test_criterion_5_dyson_vs_oracle():
    t0 = time.perf_counter()
    # one oscillator: a 2-site torus with lambda = 0 and the perturbation on site 0 only
    torus = Torus(1, 2)
    p = HarmonicParams(1.0, 0.0)
    prop = Propagator(p, torus)
    f = delta_field(0, torus) * ((1 + 1j) / math.sqrt(2))
    region = PerturbationRegion(torus, frozenset({0}))
    errs, changes = {}, []
    for t in (0.25, 0.125):
        s = dyson_evolve(f, t, V, region, prop, DysonConfig(2))
        e = []
        for cutoff in (40, 32):
            # same block (occupations below 8) at both cutoffs, so the change isolates truncation error
            cfg = OracleConfig(1, p, cutoff, V, (0,))
            exact = oracle_heisenberg(oracle_weyl_matrix(f, cfg), t, cfg)
            e.append(block_norm(weyl_sum_matrix(s, cfg) - exact, cfg, keep=8 / cutoff))
        errs[t] = e[0]
        changes.append(abs(e[0] - e[1]))
    ratio = errs[0.25] / errs[0.125]
    ok = errs[0.25] <= 5e-4 and 5 <= ratio <= 12 and max(changes) <= 0.1 * errs[0.125]
    report(5, ok, f"order-2 error {errs[0.25]:.3e} at t=0.25 (tol 5e-4), ratio vs t=0.125 = {ratio:.2f} "
                  f"(need [5, 12])", time.perf_counter() - t0, 30)


def test_criterion_6_volume_convergence():
    t0 = time.perf_counter()
    torus = Torus(1, 64)
    prop = Propagator(HarmonicParams(1.0, 1.0), torus)
    regions = [PerturbationRegion.box(torus, r) for r in (4, 8, 16, 24)]
    rows = convergence_experiment(delta_field(0, torus), 0.5, V, regions, prop)
    seps = np.array([r[0] for r in rows], dtype=float)
    bounds = np.array([r[1] for r in rows])
    decreasing = bool(np.all(np.diff(bounds) < 0)) and bool(np.all(np.diff(seps) > 0))
    slope = float(np.polyfit(seps, np.log(bounds), 1)[0])

    # 2-site oracle: region {0} inside {0, 1}
    p = HarmonicParams(1.0, 1.0)
    t2 = Torus(1, 2)
    f = delta_field(0, t2)
    bound = volume_difference_bound(f, 0.5, PerturbationRegion(t2, frozenset({0})),
                                    PerturbationRegion(t2, frozenset({0, 1})), V, Propagator(p, t2))
    diffs = []
    for cutoff in (32, 40):
        cm, cn = OracleConfig(2, p, cutoff, V, (0,)), OracleConfig(2, p, cutoff, V, (0, 1))
        W = oracle_weyl_matrix(f, cm)
        diffs.append(np.linalg.norm(heisenberg_block(W, 0.5, cn) - heisenberg_block(W, 0.5, cm), 2))
    dominates = bound >= max(diffs)
    ok = decreasing and slope <= -1 and dominates
    report(6, ok, f"bounds {', '.join(f'{b:.2e}' for b in bounds)} strictly decreasing: {decreasing}; "
                  f"log-slope {slope:.2f} <= -1; 2-site bound {bound:.3e} >= oracle {max(diffs):.3e}",
           time.perf_counter() - t0, 60)


def test_criterion_7_weyl_product_rule():
    t0 = time.perf_counter()
    cfg = OracleConfig(2, HarmonicParams(1.0, 0.0), 40)
    torus = Torus(1, 2)
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        a, b = (rng.normal(size=2) + 1j * rng.normal(size=2) for _ in range(2))
        a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
        sigma = symplectic_form(SiteField(torus, a), SiteField(torus, b))
        lhs = oracle_weyl_matrix(a, cfg) @ oracle_weyl_matrix(b, cfg)
        worst = max(worst, block_norm(lhs - np.exp(1j * sigma) * oracle_weyl_matrix(a + b, cfg), cfg))
    report(7, worst <= 1e-6, f"max ||W(f)W(g) - e^(i sigma) W(f+g)|| = {worst:.2e} over 20 pairs (tol 1e-6)",
           time.perf_counter() - t0, 30)


def test_criterion_8_determinism_and_round_trip(tmp_path):
    t0 = time.perf_counter()
    text = ("kind: lightcone\nseed: 11\nmodel: {nu: 1, L: 256, omega: 1.0, lambda: 1.0}\n"
            "grid: {t: [0, 0.25, 0.5], d: \"1..60\"}\nlightcone: {f: {shape: random, radius: 2}}\n")
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(text)
    codes = [main(["lr-scan", "--config", str(cfg_path), "--out", str(tmp_path / d), "--threads", n])
             for d, n in (("a", "1"), ("b", "4"))]
    same = (tmp_path / "a" / "lightcone.csv").read_bytes() == (tmp_path / "b" / "lightcone.csv").read_bytes()
    cfg = parse_config(text)
    echo = json.loads((tmp_path / "a" / "lightcone.json").read_text())["config"]
    round_trip = parse_config(dump_config(cfg)) == cfg and parse_config(json.dumps(echo)) == cfg
    ok = codes == [0, 0] and same and round_trip
    report(8, ok, f"exit codes {codes}; byte-identical CSV: {same}; config echo round-trips: {round_trip}",
           time.perf_counter() - t0)


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-s"]))
