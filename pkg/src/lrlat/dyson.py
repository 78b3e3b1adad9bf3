"""
On-site anharmonic perturbations P = sum_{z in region} V(q_z) of the harmonic lattice.

V is a finite cosine series, V(q) = sum_j kappa_j cos(mu_j q), so that
V(q_z) = sum_j (kappa_j / 2) (W(mu_j delta_z) + W(-mu_j delta_z)) exactly.  Every
nested commutator in the Dyson series of a Weyl operator then collapses to a
single Weyl operator with a scalar prefactor, and the truncated series is a
finite WeylSum up to quadrature of the time simplex.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import ConfigError, DomainError, WraparoundError
from .harmonic import Propagator
from .lattice import SiteField, Torus, delta_field, periodic_distance
from .weyl import WeylSum, WeylTerm

log = logging.getLogger(__name__)

MAX_ORDER = 3
MAX_LABEL_ENTRIES = 50_000_000


@dataclass(frozen=True)
class AnharmonicPotential:
    """V(q) = sum_j kappa_j cos(mu_j q), stored as ``((kappa_j, mu_j), ...)``."""

    atoms: tuple = ()

    def __post_init__(self):
        atoms = tuple((float(k), float(m)) for k, m in self.atoms)
        for k, m in atoms:
            if not (math.isfinite(k) and math.isfinite(m)) or m <= 0:
                raise DomainError(f"atom (kappa={k}, mu={m}) needs finite kappa and mu > 0")
        object.__setattr__(self, "atoms", atoms)

    def __call__(self, q):
        q = np.asarray(q, dtype=float)
        return sum((k * np.cos(m * q) for k, m in self.atoms), np.zeros_like(q))

    @property
    def sup_norm_bound(self) -> float:
        return sum(abs(k) for k, _ in self.atoms)


@dataclass(frozen=True)
class PerturbationRegion:
    torus: Torus
    sites: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "sites", frozenset(self.torus.site(self.torus.index(x)) for x in self.sites))

    @classmethod
    def box(cls, torus: Torus, radius: int, center=None) -> "PerturbationRegion":
        """Sites within l-infinity distance ``radius`` of ``center`` (default origin), e.g. [-r, r] for nu=1."""
        c = torus.normalize((0,) * torus.nu if center is None else center)
        L = torus.side
        if 2 * radius + 1 > L:
            raise DomainError(f"box of radius {radius} does not fit on L={L}")
        sites = []
        for x in torus.sites():
            xt = torus.normalize(x)
            if all(min((a - b) % L, (b - a) % L) <= radius for a, b in zip(xt, c)):
                sites.append(x)
        return cls(torus, frozenset(sites))

    def __len__(self):
        return len(self.sites)

    def __le__(self, other: "PerturbationRegion"):
        return self.torus == other.torus and self.sites <= other.sites

    def __lt__(self, other: "PerturbationRegion"):
        return self.torus == other.torus and self.sites < other.sites


@dataclass(frozen=True)
class DysonConfig:
    order: int = 2
    quad_points: int = 16
    merge_tol: float = 1e-12
    quadrature: str = "gauss"

    def __post_init__(self):
        problems = []
        if int(self.order) != self.order or not 0 <= self.order <= MAX_ORDER:
            problems.append(f"dyson order must be an integer in 0..{MAX_ORDER}, got {self.order}")
        if int(self.quad_points) != self.quad_points or self.quad_points < 2:
            problems.append(f"quad_points must be an integer >= 2, got {self.quad_points}")
        if self.quadrature not in ("gauss", "trapezoid"):
            problems.append(f"quadrature must be 'gauss' or 'trapezoid', got {self.quadrature!r}")
        if not self.merge_tol >= 0:
            problems.append(f"merge_tol must be >= 0, got {self.merge_tol}")
        if problems:
            raise ConfigError(problems)


def potential_fourier_norms(V: AnharmonicPotential) -> tuple:
    """(||k V^||_1, ||k^2 V^||_1) for the atomic Fourier measure of V."""
    return (sum(abs(k) * m for k, m in V.atoms), sum(abs(k) * m * m for k, m in V.atoms))


def perturbation_as_weyl(V: AnharmonicPotential, z, torus: Torus) -> WeylSum:
    """V(q_z) = sum_j (kappa_j / 2) (W(mu_j delta_z) + W(-mu_j delta_z))."""
    d = delta_field(z, torus)
    out = WeylSum(torus)
    for k, m in V.atoms:
        out.add(WeylTerm(k / 2, d * m))
        out.add(WeylTerm(k / 2, d * (-m)))
    return out


def _simplex_rule(n: int, kind: str):
    """Nodes and weights on [-1, 1] -> returned on [0, 1]."""
    if kind == "gauss":
        x, w = leggauss(n)
        return (x + 1) / 2, w / 2
    x = np.linspace(0.0, 1.0, n)
    w = np.full(n, 1.0 / (n - 1))
    w[0] = w[-1] = 0.5 / (n - 1)
    return x, w


def dyson_evolve(f: SiteField, t: float, V: AnharmonicPotential, region: PerturbationRegion,
                 prop: Propagator, cfg: DysonConfig = DysonConfig()) -> WeylSum:
    """Order-``cfg.order`` truncation of the perturbed Heisenberg evolution of W(f).

    The order-n term is

        i^n int_{0 <= s_1 <= ... <= s_n <= t} [tau_{s_1}(P), [tau_{s_2}(P), ... [tau_{s_n}(P), tau_t(W(f))]]]

    with the latest time innermost, as produced by iterating Duhamel's formula.
    The simplex is integrated by iterated quadrature from the inside out: s_n on
    [0, t], then s_{n-1} on [0, s_n], and so on.  Each branch (site, atom, sign)
    contributes the factor (kappa/2) * 2i sin sigma(insertion, label) and shifts
    the label by the insertion s*mu*T_u delta_z.
    """
    torus = prop.torus
    if f.torus != torus or region.torus != torus:
        raise DomainError("field, region and propagator must share a torus")
    head = prop.evolve(f, t)
    result = WeylSum(torus, [WeylTerm(1.0, head)], merge_tol=cfg.merge_tol)
    atoms = [(k, m) for k, m in V.atoms if k != 0]
    if cfg.order == 0 or t == 0 or not region.sites or not atoms:
        return result

    n_sites = torus.num_sites
    branches = [(z, k, m * s) for z in sorted(region.sites, key=str) for k, m in atoms for s in (1, -1)]
    shifts = [torus.normalize(z) for z, _, _ in branches]
    amps = np.array([k / 2 for _, k, _ in branches])
    mus = np.array([m for _, _, m in branches])
    B = len(branches)
    xq, wq = _simplex_rule(cfg.quad_points, cfg.quadrature)
    delta0 = delta_field(0 if torus.nu == 1 else (0,) * torus.nu, torus)
    cache = {}

    def insertions(u):
        """T_u delta_z for every branch site, shape (B, n_sites), unscaled by mu."""
        if u not in cache:
            base = prop.evolve(delta0, u).values
            cache[u] = np.stack([np.roll(base, s, axis=tuple(range(torus.nu))).ravel() for s in shifts])
        return cache[u]

    coeffs = np.ones(1, dtype=complex)
    labels = head.values.ravel()[None, :]
    uppers = np.array([float(t)])
    for n in range(1, cfg.order + 1):
        M, Q = len(coeffs), len(xq)
        if M * Q * B * n_sites > MAX_LABEL_ENTRIES:
            raise ConfigError(f"Dyson order {n} needs {M * Q * B} labels on {n_sites} sites; "
                              f"reduce order, quad_points or region size")
        uniq, inv = np.unique(uppers, return_inverse=True)
        nodes = uniq[:, None] * xq[None, :]                         # (U, Q)
        weights = uniq[:, None] * wq[None, :]
        ins = np.stack([np.stack([insertions(float(u)) for u in row]) for row in nodes])  # (U, Q, B, N)
        ins = ins * mus[None, None, :, None]
        ins = ins[inv]                                                # (M, Q, B, N)
        sig = 0.5 * np.imag(np.einsum("mqbn,mn->mqb", ins, labels.conj()))
        factor = 1j * weights[inv][:, :, None] * amps[None, None, :] * 2j * np.sin(sig)
        coeffs = (coeffs[:, None, None] * factor).reshape(-1)
        labels = (labels[:, None, None, :] + ins).reshape(-1, n_sites)
        uppers = np.broadcast_to(nodes[inv][:, :, None], (M, Q, B)).reshape(-1)
        keep = coeffs != 0
        coeffs, labels, uppers = coeffs[keep], labels[keep], uppers[keep]
        if not len(coeffs):
            break
        log.debug("dyson order %d: %d branch terms", n, len(coeffs))
        for c, lab in zip(coeffs, labels):
            result.add(WeylTerm(complex(c), SiteField(torus, lab.reshape(torus.shape))))
    return result


def _composite_gauss(t: float, panels: int, per_panel: int = 8):
    x, w = leggauss(per_panel)
    edges = np.linspace(0.0, t, panels + 1)
    h = np.diff(edges)
    nodes = (edges[:-1, None] + h[:, None] * (x[None, :] + 1) / 2).ravel()
    weights = (h[:, None] * w[None, :] / 2).ravel()
    return nodes, weights


def commutator_bound_integrand(f: SiteField, times, sites, V: AnharmonicPotential, prop: Propagator,
                               method: str = "series") -> np.ndarray:
    """sum_z ||[V(q_z), W(T_u f)]|| bounded term by term, for each u in ``times``.

    ||[W(s mu delta_z), W(F)]|| = 2 |sin(s mu sigma(delta_z, F))| and both signs
    carry weight |kappa|/2, so each atom contributes 2 |kappa| |sin(mu sigma)|.
    """
    torus = prop.torus
    idx = tuple(np.array([torus.index(z)[a] for z in sites]) for a in range(torus.nu))
    out = np.zeros(len(times))
    for i, F in enumerate(prop.evolve_path(f, times, method)):
        sig = -0.5 * F.values[idx].imag                               # sigma(delta_z, F)
        out[i] = sum(2 * abs(k) * np.abs(np.sin(m * sig)).sum() for k, m in V.atoms)
    return out


def volume_difference_bound(f: SiteField, t: float, region_m: PerturbationRegion,
                            region_n: PerturbationRegion, V: AnharmonicPotential, prop: Propagator,
                            quad_points: int = 32, method: str = "series") -> float:
    """Upper bound on ||tau_t^{n}(W(f)) - tau_t^{m}(W(f))|| for nested regions m within n.

    sum_{z in n \\ m} int_0^{|t|} ||[V(q_z), tau_u(W(f))]|| du with the harmonic
    dynamics inside the commutator and composite Gauss-Legendre in time
    (``quad_points`` panels of 8 nodes).
    """
    if not region_m <= region_n:
        raise DomainError("region_m must be contained in region_n")
    diff = sorted(region_n.sites - region_m.sites, key=str)
    if not diff or t == 0 or not V.atoms:
        return 0.0
    nodes, weights = _composite_gauss(abs(t), quad_points)
    return float(weights @ commutator_bound_integrand(f, nodes, diff, V, prop, method))


def check_margin(region: PerturbationRegion, margin: int):
    """Reject regions reaching within ``margin`` sites of the torus seam."""
    limit = region.torus.side // 2 - margin
    far = [x for x in region.sites if max(abs(c) for c in region.torus.normalize(x)) > limit]
    if far:
        raise WraparoundError(f"region reaches |x| > L/2 - margin = {limit} (e.g. site {far[0]})")


def convergence_experiment(f: SiteField, t: float, V: AnharmonicPotential, regions, prop: Propagator,
                           quad_points: int = 32, margin: int = 5, method: str = "series") -> list:
    """(separation, bound) for each consecutive pair of a strictly increasing region sequence.

    The separation is the distance from supp f to the newly added sites.
    """
    regions = list(regions)
    if len(regions) < 2:
        raise ConfigError("need at least two regions")
    for a, b in zip(regions, regions[1:]):
        if not a < b:
            raise ConfigError("region sequence must be strictly increasing")
    for r in regions:
        check_margin(r, margin)
    torus = prop.torus
    out = []
    for a, b in zip(regions, regions[1:]):
        sep = min(periodic_distance(x, z, torus) for x in f.support for z in b.sites - a.sites)
        out.append((sep, volume_difference_bound(f, t, a, b, V, prop, quad_points, method)))
    bounds = [bd for _, bd in out]
    if any(y >= x for x, y in zip(bounds, bounds[1:])):
        log.warning("volume-difference bounds are not strictly decreasing: %s", bounds)
    return out
