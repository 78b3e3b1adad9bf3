"""
Dense-matrix brute force for one to three oscillators in a truncated number basis.

Everything is built from first principles: ladder matrices of the omega=1
reference oscillator, the Hamiltonian as tensor-product sums, and matrix
functions through Hermitian eigendecompositions.  The oscillators sit on a ring
with bonds (x, x+1 mod n), which for n=2 counts the bond twice and so reproduces
the L=2 torus exactly.

Truncation corrupts the top of the number basis.  Norms are therefore taken on
the block where every site has occupation below ``keep * cutoff``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .dyson import AnharmonicPotential
from .errors import ConfigError, DomainError
from .harmonic import HarmonicParams
from .lattice import SiteField
from .weyl import WeylSum

MAX_DIM = 100_000
DEFAULT_KEEP = 0.2


@dataclass(frozen=True)
class OracleConfig:
    sites: int
    params: HarmonicParams
    cutoff: int = 40
    potential: Optional[AnharmonicPotential] = None
    potential_sites: Optional[tuple] = None  # None: potential on every site

    def __post_init__(self):
        if self.sites not in (1, 2, 3):
            raise ConfigError(f"oracle supports 1-3 sites, got {self.sites}")
        if self.cutoff < 2:
            raise ConfigError(f"cutoff must be >= 2, got {self.cutoff}")
        if self.cutoff ** self.sites > MAX_DIM:
            raise ConfigError(f"dimension {self.cutoff}^{self.sites} exceeds the guard {MAX_DIM}")
        if self.potential_sites is not None:
            bad = [s for s in self.potential_sites if not 0 <= s < self.sites]
            if bad:
                raise ConfigError(f"potential sites {bad} outside 0..{self.sites - 1}")

    @property
    def dim(self) -> int:
        return self.cutoff ** self.sites

    def with_cutoff(self, cutoff: int) -> "OracleConfig":
        return OracleConfig(self.sites, self.params, cutoff, self.potential, self.potential_sites)


def build_site_operators(cutoff: int):
    """Q, P, A, A^dagger in the number basis, with A|n> = sqrt(n)|n-1>."""
    if cutoff < 2:
        raise ConfigError(f"cutoff must be >= 2, got {cutoff}")
    A = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), 1).astype(complex)
    Adag = A.conj().T
    Q = (A + Adag) / np.sqrt(2)
    P = (A - Adag) / (1j * np.sqrt(2))
    return Q, P, A, Adag


def hermitian_function(G: np.ndarray, fn) -> np.ndarray:
    """fn(G) for Hermitian G via its eigendecomposition."""
    w, v = np.linalg.eigh(G)
    return (v * fn(w)) @ v.conj().T


def _embed(op: np.ndarray, site: int, cfg: OracleConfig) -> np.ndarray:
    eye = np.eye(cfg.cutoff)
    out = np.ones((1, 1))
    for x in range(cfg.sites):
        out = np.kron(out, op if x == site else eye)
    return out


def build_hamiltonian(cfg: OracleConfig) -> np.ndarray:
    """sum_x p_x^2 + omega^2 q_x^2 + V(q_x) + lambda sum_x (q_x - q_{x+1})^2 on the ring."""
    Q, P, _, _ = build_site_operators(cfg.cutoff)
    p = cfg.params
    Qs = [_embed(Q, x, cfg) for x in range(cfg.sites)]
    H = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    on_site = P @ P + p.omega ** 2 * (Q @ Q)
    for x in range(cfg.sites):
        H += _embed(on_site, x, cfg)
    if p.lam:
        for x in range(cfg.sites):
            diff = Qs[x] - Qs[(x + 1) % cfg.sites]
            H += p.lam * (diff @ diff)
    if cfg.potential is not None and cfg.potential.atoms:
        V = hermitian_function(Q, cfg.potential)
        where = range(cfg.sites) if cfg.potential_sites is None else cfg.potential_sites
        for x in where:
            H += _embed(V, x, cfg)
    return H


@lru_cache(maxsize=16)
def _eigensystem(cfg: OracleConfig):
    H = build_hamiltonian(cfg)
    if not np.any(H.imag):
        H = H.real   # p^2 is real in the number basis, so H is real symmetric; halves the work
    return np.linalg.eigh(H)


def _label_vector(f, cfg: OracleConfig) -> np.ndarray:
    vals = np.asarray(f.values if isinstance(f, SiteField) else f, dtype=complex).ravel()
    if np.any(vals[cfg.sites:] != 0):
        raise DomainError(f"label supported outside the {cfg.sites} oracle site(s)")
    out = np.zeros(cfg.sites, dtype=complex)
    n = min(len(vals), cfg.sites)
    out[:n] = vals[:n]
    return out


def weyl_generator(f, cfg: OracleConfig) -> np.ndarray:
    """(1/sqrt 2)(a(f) + a*(f)) = sum_x Re f(x) q_x + Im f(x) p_x, as a full matrix."""
    _, _, A, Adag = build_site_operators(cfg.cutoff)
    vec = _label_vector(f, cfg)
    G = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for x, fx in enumerate(vec):
        G += _embed(np.conj(fx) * A + fx * Adag, x, cfg)
    return G / np.sqrt(2)


def oracle_weyl_matrix(f, cfg: OracleConfig) -> np.ndarray:
    """W(f) = exp(i (a(f) + a*(f)) / sqrt 2).

    The single-site generators commute, so the exponential factorizes into a
    Kronecker product of cutoff x cutoff exponentials.
    """
    _, _, A, Adag = build_site_operators(cfg.cutoff)
    vec = _label_vector(f, cfg)
    out = np.ones((1, 1), dtype=complex)
    for fx in vec:
        g = (np.conj(fx) * A + fx * Adag) / np.sqrt(2)
        out = np.kron(out, hermitian_function(g, lambda w: np.exp(1j * w)))
    return out


def oracle_propagator(t: float, cfg: OracleConfig) -> np.ndarray:
    """exp(-i t H)."""
    w, v = _eigensystem(cfg)
    return (v * np.exp(-1j * w * t)) @ v.conj().T


def oracle_heisenberg(M: np.ndarray, t: float, cfg: OracleConfig) -> np.ndarray:
    """e^{itH} M e^{-itH}."""
    U = oracle_propagator(t, cfg)
    return U.conj().T @ M @ U


def heisenberg_rows(M: np.ndarray, t: float, cfg: OracleConfig, rows) -> np.ndarray:
    """Rows ``rows`` of e^{itH} M e^{-itH}, at O(len(rows) * dim^2) cost."""
    w, v = _eigensystem(cfg)
    ph = np.exp(1j * w * t)
    X = (v[rows, :] * ph) @ v.conj().T          # rows of e^{itH}
    return (((X @ M) @ v) * ph.conj()) @ v.conj().T


def heisenberg_block(M: np.ndarray, t: float, cfg: OracleConfig, keep: float = DEFAULT_KEEP) -> np.ndarray:
    """Low block of e^{itH} M e^{-itH}."""
    idx = low_block(cfg, keep)
    return heisenberg_rows(M, t, cfg, idx)[:, idx]


def low_block(cfg: OracleConfig, keep: float = DEFAULT_KEEP) -> np.ndarray:
    """Indices of basis states with every occupation below ``keep * cutoff``."""
    nmax = max(1, int(keep * cfg.cutoff))
    occ = np.indices((cfg.cutoff,) * cfg.sites).reshape(cfg.sites, -1)
    return np.flatnonzero(np.all(occ < nmax, axis=0))


def block_norm(M: np.ndarray, cfg: OracleConfig, keep: float = DEFAULT_KEEP) -> float:
    idx = low_block(cfg, keep)
    return float(np.linalg.norm(M[np.ix_(idx, idx)], 2))


def oracle_commutator_norm(f, g, t: float, cfg: OracleConfig, keep: float = DEFAULT_KEEP) -> float:
    """|| [e^{itH} W(f) e^{-itH}, W(g)] ||, measured on the low-occupation block.

    Only the rows and columns of the evolved W(f) that reach the block are formed.
    """
    idx = low_block(cfg, keep)
    W = oracle_weyl_matrix(f, cfg)
    B = oracle_weyl_matrix(g, cfg)
    rows = heisenberg_rows(W, t, cfg, idx)                          # A[idx, :]
    cols = heisenberg_rows(W.conj().T, t, cfg, idx).conj().T        # A[:, idx], since A^dag = tau(W^dag)
    C = rows @ B[:, idx] - B[idx, :] @ cols
    return float(np.linalg.norm(C, 2))


def weyl_sum_matrix(s: WeylSum, cfg: OracleConfig) -> np.ndarray:
    """sum_j c_j W(f_j) as a dense matrix."""
    out = np.zeros((cfg.dim, cfg.dim), dtype=complex)
    for term in s:
        out += term.coeff * oracle_weyl_matrix(term.label, cfg)
    return out


def cutoff_study(fn, cfg: OracleConfig, step: int = 8):
    """Evaluate ``fn(cfg)`` at ``cutoff`` and ``cutoff - step``; returns (value, change)."""
    hi = fn(cfg)
    lo = fn(cfg.with_cutoff(cfg.cutoff - step))
    return hi, abs(hi - lo)
