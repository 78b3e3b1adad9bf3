"""
Experiment configuration files.

Configs are YAML documents (JSON is accepted too, being a YAML subset).  The
grammar, with defaults::

    kind: lightcone            # dispersion | lightcone | dyson | converge | oracle
    seed: 0
    model:     {nu: 1, L: 64, omega: 1.0, lambda: 1.0}
    potential: {atoms: [[0.1, 1.0]]}          # V(q) = sum kappa cos(mu q), pairs [kappa, mu]
    grid:      {t: [0.0], d: "0..10"}          # d is a list of ints or "a..b" (inclusive)
    source:    {site: null, amplitude: [1.0, 0.0]}  # f = amplitude * delta_site; null = origin
    lightcone: {decay_rate: 2.0, threshold: 1.0e-6, margin: 5, f: delta, g: delta}
    dyson:     {order: 2, quad_points: 16, merge_tol: 1.0e-12, quadrature: gauss,
                region: [0], oracle: false, oracle_sites: null, cutoff: 40}
    converge:  {radii: [4, 8, 16], quad_points: 32, margin: 5}
    oracle:    {cutoff: 40, cutoff_step: 8, pairs: 20, keep: 0.2}

``lightcone.f`` / ``lightcone.g`` take ``delta`` or a mapping such as
``{shape: gaussian, radius: 2, width: 1.0}`` or ``{shape: random, radius: 2}``
(random shapes draw from ``seed``).  The time grid ``grid.t`` drives every
time-dependent kind; ``converge`` uses each of its times.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import yaml

from .dyson import MAX_ORDER, AnharmonicPotential, potential_fourier_norms
from .errors import ConfigError, LrlatError
from .harmonic import HarmonicParams, lr_velocity
from .lattice import Torus
from .lightcone import check_scan_window

KINDS = ("dispersion", "lightcone", "dyson", "converge", "oracle")


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (``1e-6``) as floats."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                |[-+]?\.(?:inf|Inf|INF)
                |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."))


def load_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


@dataclass
class ExperimentConfig:
    kind: str = "lightcone"
    seed: int = 0
    nu: int = 1
    L: int = 64
    omega: float = 1.0
    lam: float = 1.0
    atoms: list = field(default_factory=lambda: [[0.1, 1.0]])
    t_grid: list = field(default_factory=lambda: [0.0])
    d_grid: list = field(default_factory=lambda: list(range(11)))
    source_site: object = None
    source_amplitude: list = field(default_factory=lambda: [1.0, 0.0])
    decay_rate: float = 2.0
    threshold: float = 1e-6
    margin: int = 5
    f_shape: object = "delta"
    g_shape: object = "delta"
    order: int = 2
    quad_points: int = 16
    merge_tol: float = 1e-12
    quadrature: str = "gauss"
    region: list = field(default_factory=lambda: [0])
    dyson_oracle: bool = False
    oracle_sites: object = None
    dyson_cutoff: int = 40
    radii: list = field(default_factory=lambda: [4, 8, 16])
    converge_quad_points: int = 32
    converge_margin: int = 5
    cutoff: int = 40
    cutoff_step: int = 8
    pairs: int = 20
    keep: float = 0.2

    # -- derived objects -------------------------------------------------

    @property
    def torus(self) -> Torus:
        return Torus(self.nu, self.L)

    @property
    def source_point(self):
        if self.source_site is None:
            return (0,) * self.nu if self.nu > 1 else 0
        return self.source_site

    @property
    def params(self) -> HarmonicParams:
        return HarmonicParams(self.omega, self.lam, self.nu)

    @property
    def amplitude(self) -> complex:
        return complex(self.source_amplitude[0], self.source_amplitude[1])

    def to_dict(self) -> dict:
        """Nested form; ``parse_config(yaml.safe_dump(cfg.to_dict()))`` rebuilds ``cfg``."""
        out = {"kind": self.kind, "seed": self.seed}
        for section, keys in _SECTIONS.items():
            out[section] = {key: _plain(getattr(self, attr)) for key, attr in keys.items()}
        return out


_SECTIONS = {
    "model": {"nu": "nu", "L": "L", "omega": "omega", "lambda": "lam"},
    "potential": {"atoms": "atoms"},
    "grid": {"t": "t_grid", "d": "d_grid"},
    "source": {"site": "source_site", "amplitude": "source_amplitude"},
    "lightcone": {"decay_rate": "decay_rate", "threshold": "threshold", "margin": "margin",
                  "f": "f_shape", "g": "g_shape"},
    "dyson": {"order": "order", "quad_points": "quad_points", "merge_tol": "merge_tol",
              "quadrature": "quadrature", "region": "region", "oracle": "dyson_oracle",
              "oracle_sites": "oracle_sites", "cutoff": "dyson_cutoff"},
    "converge": {"radii": "radii", "quad_points": "converge_quad_points", "margin": "converge_margin"},
    "oracle": {"cutoff": "cutoff", "cutoff_step": "cutoff_step", "pairs": "pairs", "keep": "keep"},
}
_TOP = {"kind", "seed"} | set(_SECTIONS)


def _plain(value):
    if isinstance(value, tuple):
        return [_plain(v) for v in value]
    if isinstance(value, list):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    return value


def _parse_range(value, where, problems):
    if isinstance(value, str):
        try:
            a, b = (int(s) for s in value.split(".."))
        except ValueError:
            problems.append(f"{where}: expected 'a..b' or a list of ints, got {value!r}")
            return None
        return list(range(a, b + 1))
    if isinstance(value, list) and all(isinstance(v, int) and not isinstance(v, bool) for v in value):
        return list(value)
    problems.append(f"{where}: expected 'a..b' or a list of ints, got {value!r}")
    return None


def _site(value):
    return tuple(value) if isinstance(value, list) else value


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate; raises ConfigError listing every violation found."""
    try:
        raw = load_yaml(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from None
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping at top level")
    problems = []
    cfg = ExperimentConfig()
    for key in raw:
        if key not in _TOP:
            problems.append(f"unknown key {key!r}")
    for key in ("kind", "seed"):
        if key in raw:
            setattr(cfg, key, raw[key])
    for section, keys in _SECTIONS.items():
        body = raw.get(section)
        if body is None:
            continue
        if not isinstance(body, dict):
            problems.append(f"section {section!r} must be a mapping")
            continue
        for key, value in body.items():
            if key not in keys:
                problems.append(f"unknown key {section}.{key!r}")
                continue
            setattr(cfg, keys[key], value)
    if isinstance(cfg.d_grid, (str, list)):
        d = _parse_range(cfg.d_grid, "grid.d", problems)
        cfg.d_grid = d if d is not None else cfg.d_grid
    else:
        problems.append(f"grid.d: expected 'a..b' or a list of ints, got {cfg.d_grid!r}")
    cfg.source_site = _site(cfg.source_site)
    if isinstance(cfg.region, list):
        cfg.region = [_site(x) for x in cfg.region]
    problems.extend(validate(cfg))
    if problems:
        raise ConfigError(problems)
    return cfg


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x):
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


def validate(cfg: ExperimentConfig) -> list:
    """Every guard violation in ``cfg`` (empty list when valid)."""
    p = []
    if cfg.kind not in KINDS:
        p.append(f"kind must be one of {KINDS}, got {cfg.kind!r}")
    if not _is_int(cfg.seed):
        p.append(f"seed must be an integer, got {cfg.seed!r}")
    if not _is_int(cfg.nu) or cfg.nu < 1:
        p.append(f"model.nu must be a positive integer, got {cfg.nu!r}")
    if not _is_int(cfg.L) or cfg.L < 2:
        p.append(f"model.L must be an integer >= 2, got {cfg.L!r}")
    elif cfg.L % 2:
        p.append(f"model.L must be even (geometry guard), got L={cfg.L}")
    if not _is_num(cfg.omega) or cfg.omega < 0:
        p.append(f"model.omega must be a finite number >= 0, got {cfg.omega!r}")
    elif cfg.omega == 0:
        p.append("model.omega = 0 violates the singular-mode guard (gamma(0) = 0); use omega > 0")
    if not _is_num(cfg.lam) or cfg.lam < 0:
        p.append(f"model.lambda must be a finite number >= 0, got {cfg.lam!r}")
    if not isinstance(cfg.atoms, list) or not all(
            isinstance(a, list) and len(a) == 2 and _is_num(a[0]) and _is_num(a[1]) and a[1] > 0
            for a in cfg.atoms):
        p.append(f"potential.atoms must be a list of [kappa, mu] pairs with mu > 0, got {cfg.atoms!r}")
    if not isinstance(cfg.t_grid, list) or not cfg.t_grid or not all(_is_num(t) for t in cfg.t_grid):
        p.append(f"grid.t must be a nonempty list of numbers, got {cfg.t_grid!r}")
    if not (isinstance(cfg.source_amplitude, list) and len(cfg.source_amplitude) == 2
            and all(_is_num(x) for x in cfg.source_amplitude)):
        p.append(f"source.amplitude must be [re, im], got {cfg.source_amplitude!r}")
    if p:
        return p

    torus, params = cfg.torus, cfg.params
    try:
        torus.normalize(cfg.source_point)
    except (LrlatError, TypeError) as exc:
        p.append(f"source.site: {exc}")

    if cfg.kind == "lightcone":
        if not isinstance(cfg.d_grid, list) or not cfg.d_grid or any(d < 0 for d in cfg.d_grid):
            p.append("grid.d must be a nonempty list of nonnegative ints")
        if not _is_num(cfg.threshold) or cfg.threshold <= 0:
            p.append(f"lightcone.threshold must be positive, got {cfg.threshold!r}")
        if not _is_num(cfg.decay_rate) or cfg.decay_rate <= 0:
            p.append(f"lightcone.decay_rate must be positive, got {cfg.decay_rate!r}")
        if not _is_int(cfg.margin) or cfg.margin < 0:
            p.append(f"lightcone.margin must be a nonnegative int, got {cfg.margin!r}")
        if not p:
            try:
                check_scan_window(params, torus, cfg.t_grid, cfg.d_grid, cfg.f_shape, cfg.g_shape, cfg.margin)
            except ConfigError as exc:
                p.append(f"wraparound guard: {exc}")
            except (LrlatError, TypeError, ValueError) as exc:
                p.append(f"lightcone field shapes: {exc}")

    if cfg.kind == "dyson":
        if not _is_int(cfg.order) or not 0 <= cfg.order <= MAX_ORDER:
            p.append(f"dyson.order must be an integer in 0..{MAX_ORDER}, got {cfg.order!r}")
        if not _is_int(cfg.quad_points) or cfg.quad_points < 2:
            p.append(f"dyson.quad_points must be an integer >= 2, got {cfg.quad_points!r}")
        if cfg.quadrature not in ("gauss", "trapezoid"):
            p.append(f"dyson.quadrature must be gauss or trapezoid, got {cfg.quadrature!r}")
        if not _is_num(cfg.merge_tol) or cfg.merge_tol < 0:
            p.append(f"dyson.merge_tol must be >= 0, got {cfg.merge_tol!r}")
        if not isinstance(cfg.region, list):
            p.append(f"dyson.region must be a list of sites, got {cfg.region!r}")
        else:
            for x in cfg.region:
                try:
                    torus.normalize(x)
                except (LrlatError, TypeError) as exc:
                    p.append(f"dyson.region: {exc}")
        if cfg.dyson_oracle:
            p.extend(_oracle_site_problems(cfg, torus))

    if cfg.kind == "converge":
        r = cfg.radii
        if not (isinstance(r, list) and len(r) >= 2 and all(_is_int(x) and x >= 0 for x in r)):
            p.append(f"converge.radii must list >= 2 nonnegative ints, got {r!r}")
        elif any(b <= a for a, b in zip(r, r[1:])):
            p.append(f"converge.radii must be strictly increasing, got {r!r}")
        elif max(r) > cfg.L // 2 - cfg.converge_margin:
            p.append(f"wraparound guard: region radius {max(r)} > L/2 - margin = {cfg.L // 2 - cfg.converge_margin}")
        if not _is_int(cfg.converge_quad_points) or cfg.converge_quad_points < 1:
            p.append(f"converge.quad_points must be a positive int, got {cfg.converge_quad_points!r}")

    if cfg.kind == "oracle":
        if cfg.nu != 1 or cfg.L != 2:
            p.append(f"oracle-check runs on the 2-site torus: need nu=1, L=2 (got nu={cfg.nu}, L={cfg.L})")
        if not _is_int(cfg.cutoff) or not _is_int(cfg.cutoff_step) or cfg.cutoff - cfg.cutoff_step < 2:
            p.append(f"oracle.cutoff - oracle.cutoff_step must be >= 2, got {cfg.cutoff!r}, {cfg.cutoff_step!r}")
        elif cfg.cutoff ** 2 > 100_000:
            p.append(f"oracle dimension guard: cutoff^2 = {cfg.cutoff ** 2} > 100000")
        if not _is_int(cfg.pairs) or cfg.pairs < 0:
            p.append(f"oracle.pairs must be a nonnegative int, got {cfg.pairs!r}")
        if not _is_num(cfg.keep) or not 0 < cfg.keep <= 0.8:
            p.append(f"oracle.keep must lie in (0, 0.8], got {cfg.keep!r}")
    return p


def _oracle_site_problems(cfg, torus):
    p = []
    n = cfg.oracle_sites if cfg.oracle_sites is not None else torus.num_sites
    if not _is_int(n) or not 1 <= n <= 3:
        return [f"dyson.oracle_sites must be 1..3 (torus has {torus.num_sites} sites), got {n!r}"]
    if n < torus.num_sites and cfg.lam != 0:
        p.append("dyson oracle on fewer sites than the torus requires lambda = 0 (decoupled sites)")
    used = [torus.index(x) for x in cfg.region] + [torus.index(cfg.source_point)]
    flat = [int(sum(i * torus.side ** (torus.nu - 1 - a) for a, i in enumerate(ix))) for ix in used]
    if any(i >= n for i in flat):
        p.append(f"dyson oracle: source or region sites fall outside the first {n} oracle site(s)")
    if not _is_int(cfg.dyson_cutoff) or cfg.dyson_cutoff < 2 or cfg.dyson_cutoff ** n > 100_000:
        p.append(f"dyson.cutoff must be >= 2 with cutoff^sites <= 100000, got {cfg.dyson_cutoff!r}")
    return p


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=False)


def derived_constants(cfg: ExperimentConfig) -> dict:
    k1, k2 = potential_fourier_norms(AnharmonicPotential(tuple(tuple(a) for a in cfg.atoms)))
    return {"lr_velocity": lr_velocity(cfg.params), "k_norm": k1, "k2_norm": k2}

