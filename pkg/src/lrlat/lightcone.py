"""
Light-cone scans for the harmonic lattice.

For a grid of times t and separations d, the exact commutator norm
``||[tau_t(W(f)), W(g_d)]||`` is compared against the Lieb-Robinson form
``C sum_{x,y} |f(x)| |g(y)| exp(-a (d(x,y) - v|t|))`` with v = 6 sqrt(omega^2 + 4 nu lambda).
The prefactor C is calibrated from the scan itself.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, FitError, WraparoundError
from .harmonic import HarmonicParams, Propagator, lr_velocity, symplectic_form
from .lattice import SiteField, Torus

FRONT_THRESHOLD = 1e-6
UNDERFLOW_FLOOR = 1e-280
DEFAULT_MARGIN = 5


@dataclass(frozen=True)
class LRBoundParams:
    decay_rate: float
    velocity: float
    prefactor: float = 1.0

    def __post_init__(self):
        if not self.decay_rate > 0:
            raise DomainError(f"decay rate must be positive, got {self.decay_rate}")
        if not self.velocity >= 0:
            raise DomainError(f"velocity must be nonnegative, got {self.velocity}")
        if not self.prefactor > 0:
            raise DomainError(f"prefactor must be positive, got {self.prefactor}")

    @classmethod
    def from_params(cls, params: HarmonicParams, prefactor: float = 1.0, decay_rate: float = 2.0):
        return cls(decay_rate, lr_velocity(params), prefactor)


@dataclass(frozen=True)
class ScanRecord:
    d: int
    t: float
    lhs: float
    rhs: float
    velocity: float
    decay_rate: float
    prefactor: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.rhs


def bound_rhs(f: SiteField, g: SiteField, t: float, bp: LRBoundParams) -> float:
    if f.torus != g.torus:
        raise DomainError("f and g live on different tori")
    if not f.support or not g.support:
        raise DomainError("bound needs nonzero f and g")
    torus = f.torus
    dist = torus.distance_from_origin
    axes = tuple(range(torus.nu))
    absg = np.abs(g.values)
    total = 0.0
    for x in f.support:
        d_x = np.roll(dist, torus.normalize(x), axis=axes)   # d(x, y) for every y
        total += abs(f[x]) * float((absg * np.exp(-bp.decay_rate * (d_x - bp.velocity * abs(t)))).sum())
    return bp.prefactor * total


def make_field(shape, torus: Torus, center=0) -> SiteField:
    """Field profiles for scans.

    ``shape`` is ``"delta"`` or a dict with ``shape`` in {delta, gaussian, random}
    and optional ``radius`` (sites), ``width`` and ``seed``.  Gaussians have unit
    peak; random profiles are complex normal, l2-normalized.
    """
    spec = {"shape": shape} if isinstance(shape, str) else dict(shape)
    kind = spec.get("shape", "delta")
    c = torus.normalize(center)
    if kind == "delta":
        return SiteField.from_sites(torus, {c if torus.nu > 1 else c[0]: 1.0})
    radius = int(spec.get("radius", 2))
    offsets = np.stack([a.ravel() for a in np.indices((2 * radius + 1,) * torus.nu)], -1) - radius
    sites = [tuple((ci + oi + torus.side // 2 - 1) % torus.side - torus.side // 2 + 1 for ci, oi in zip(c, o))
             for o in offsets]
    if kind == "gaussian":
        width = float(spec.get("width", 1.0))
        amps = np.exp(-(offsets ** 2).sum(axis=1) / (2 * width ** 2))
    elif kind == "random":
        rng = np.random.default_rng(spec.get("seed", 0))
        amps = rng.normal(size=len(offsets)) + 1j * rng.normal(size=len(offsets))
        amps = amps / np.linalg.norm(amps)
    else:
        raise DomainError(f"unknown field shape {kind!r}")
    if torus.nu == 1:
        sites = [s[0] for s in sites]
    return SiteField.from_sites(torus, dict(zip(sites, amps)))


def shape_radius(shape) -> int:
    if isinstance(shape, str) or dict(shape).get("shape", "delta") == "delta":
        return 0
    return int(dict(shape).get("radius", 2))


def check_scan_window(params: HarmonicParams, torus: Torus, t_grid, d_grid, f_shape="delta",
                      g_shape="delta", margin: int = DEFAULT_MARGIN):
    """Raise WraparoundError when max d + ceil(v max|t|) (+ profile radii) > L/2 - margin."""
    v = lr_velocity(params)
    reach = max(abs(int(d)) for d in d_grid) + math.ceil(v * max(abs(float(t)) for t in t_grid))
    reach += shape_radius(f_shape) + shape_radius(g_shape)
    limit = torus.side // 2 - margin
    if reach > limit:
        raise WraparoundError(
            f"scan reaches d + ceil(v t) = {reach} > L/2 - margin = {limit}; enlarge L or shrink the grids")


def lightcone_scan(params: HarmonicParams, torus: Torus, t_grid, d_grid, f_shape="delta", g_shape="delta",
                   *, decay_rate: float = 2.0, prefactor: Optional[float] = None, margin: int = DEFAULT_MARGIN,
                   direction: int = 1, method: str = "series", workers: int = 1) -> list:
    """Scan ||[tau_t(W(f)), W(g_d)]|| over ``t_grid`` x ``d_grid``.

    f sits at the origin and g at ``direction * d`` along the first axis.  With
    ``prefactor=None`` the bound's C is the smallest constant dominating every
    scanned point.  Records are sorted by (t, d).
    """
    t_grid = [float(t) for t in t_grid]
    d_grid = [int(d) for d in d_grid]
    if not t_grid or not d_grid:
        raise DomainError("empty scan grid")
    check_scan_window(params, torus, t_grid, d_grid, f_shape, g_shape, margin)
    prop = Propagator(params, torus)
    origin = (0,) * torus.nu
    f = make_field(f_shape, torus, origin)
    gs = {d: make_field(g_shape, torus, (direction * d,) + origin[1:]) for d in d_grid}
    unit = LRBoundParams(decay_rate, lr_velocity(params), 1.0)

    def row(t):
        F = prop.evolve(f, t, method)
        return [(d, t, 2.0 * abs(math.sin(symplectic_form(F, gs[d]))), bound_rhs(f, gs[d], t, unit))
                for d in d_grid]

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, t_grid))
    else:
        rows = [row(t) for t in t_grid]
    raw = [r for chunk in rows for r in chunk]
    if prefactor is None:
        prefactor = calibrate_prefactor([(lhs, base) for _, _, lhs, base in raw])
    records = [ScanRecord(d, t, lhs, prefactor * base, unit.velocity, decay_rate, prefactor) for d, t, lhs, base in raw]
    records.sort(key=lambda r: (r.t, r.d))
    return records


def calibrate_prefactor(pairs) -> float:
    """Smallest C with lhs <= C * base for every (lhs, base) pair; 1 if all lhs vanish."""
    c = max((lhs / base for lhs, base in pairs if lhs > 0), default=0.0)
    return c if c > 0 else 1.0


def _by_time(records):
    out = {}
    for r in records:
        out.setdefault(r.t, []).append(r)
    return out


def fit_velocity(records, threshold: float = FRONT_THRESHOLD) -> float:
    """Least-squares slope of the front d*(t) = max{d : lhs >= threshold} (0 if none) against t."""
    groups = _by_time(records)
    distances = {r.d for r in records}
    if len(groups) < 3 or len(distances) < 5:
        raise FitError(f"need >= 3 times and >= 5 distances, got {len(groups)} and {len(distances)}")
    if not any(r.lhs >= threshold for r in records):
        raise FitError(f"degenerate front: no commutator norm reaches {threshold:g}")
    ts = sorted(groups)
    fronts = [max((r.d for r in groups[t] if r.lhs >= threshold), default=0) for t in ts]
    return float(np.polyfit(ts, fronts, 1)[0])


def fit_decay_rate(records, t: float, window=None, floor: float = UNDERFLOW_FLOOR) -> float:
    """Slope of ln(lhs) against d at time ``t`` (negative for decay).

    ``window`` is an inclusive (d_min, d_max); by default all d > v|t|.  Points at
    or below ``floor`` (including exact zeros) are dropped.
    """
    rows = [r for r in records if math.isclose(r.t, t, rel_tol=0, abs_tol=1e-12)]
    if window is None:
        rows = [r for r in rows if r.d > r.velocity * abs(t)]
    else:
        rows = [r for r in rows if window[0] <= r.d <= window[1]]
    usable = [r for r in rows if r.lhs > floor]
    if len(usable) < 5:
        raise FitError(f"decay window at t={t} has {len(usable)} usable points above {floor:g}, need 5")
    d = np.array([r.d for r in usable], dtype=float)
    return float(np.polyfit(d, np.log([r.lhs for r in usable]), 1)[0])


def onset_times(records, threshold: float = FRONT_THRESHOLD) -> dict:
    """First scanned time at which lhs >= threshold, per distance (inf if never)."""
    out = {}
    for r in sorted(records, key=lambda r: r.t):
        if r.lhs >= threshold and r.d not in out:
            out[r.d] = r.t
    return {d: out.get(d, math.inf) for d in sorted({r.d for r in records})}
