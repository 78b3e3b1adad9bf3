"""Weyl operators W(f) as (coefficient, label) pairs and finite sums of them."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import DomainError
from .harmonic import Propagator, symplectic_form
from .lattice import SiteField, Torus


@dataclass(frozen=True)
class WeylTerm:
    """``coeff * W(label)``.  W is unitary, so the operator norm is ``abs(coeff)``."""

    coeff: complex
    label: SiteField

    @property
    def torus(self) -> Torus:
        return self.label.torus

    def norm(self) -> float:
        return abs(self.coeff)

    def scaled(self, c: complex) -> "WeylTerm":
        return WeylTerm(self.coeff * c, self.label)


def weyl_product(a: WeylTerm, b: WeylTerm) -> WeylTerm:
    """W(f) W(g) = exp(i sigma(f, g)) W(f + g)."""
    phase = cmath.exp(1j * symplectic_form(a.label, b.label))
    return WeylTerm(a.coeff * b.coeff * phase, a.label + b.label)


def weyl_commutator(a: WeylTerm, b: WeylTerm) -> WeylTerm:
    """[W(f), W(g)] = 2i sin(sigma(f, g)) W(f + g)."""
    s = symplectic_form(a.label, b.label)
    return WeylTerm(2j * a.coeff * b.coeff * math.sin(s), a.label + b.label)


def heisenberg_evolve(a: WeylTerm, t: float, prop: Propagator, method: str = "fft") -> WeylTerm:
    """tau_t(W(f)) = W(T_t f); the coefficient is untouched."""
    if a.torus != prop.torus:
        raise DomainError(f"term lives on {a.torus}, propagator on {prop.torus}")
    return WeylTerm(a.coeff, prop.evolve(a.label, t, method))


def commutator_norm_harmonic(f: SiteField, g: SiteField, t: float, prop: Propagator,
                             method: str = "fft") -> float:
    """Exact operator norm of [tau_t(W(f)), W(g)], namely 2 |sin sigma(T_t f, g)|."""
    if f.torus != prop.torus or g.torus != prop.torus:
        raise DomainError("fields and propagator must share a torus")
    return 2.0 * abs(math.sin(symplectic_form(prop.evolve(f, t, method), g)))


def _label_key(values: np.ndarray, tol: float | None) -> bytes:
    if tol:
        q = np.round(np.concatenate([values.real.ravel(), values.imag.ravel()]) / tol)
        return (q + 0.0).astype(np.int64).tobytes()
    return (values + 0.0).tobytes()  # +0.0 folds -0.0 into 0.0


class WeylSum:
    """A finite linear combination of Weyl operators on one torus.

    Terms are kept in a dict keyed by the label's bytes, so equal labels merge on
    insertion.  With ``merge_tol`` set, labels agreeing to within that grid are
    merged as well (the first label seen is kept).
    """

    def __init__(self, torus: Torus, terms: Iterable[WeylTerm] = (), merge_tol: float | None = None):
        self.torus = torus
        self.merge_tol = merge_tol
        self._terms: dict = {}
        for term in terms:
            self.add(term)

    def add(self, term: WeylTerm):
        if term.torus != self.torus:
            raise DomainError(f"term lives on {term.torus}, sum on {self.torus}")
        key = _label_key(term.label.values, self.merge_tol)
        old = self._terms.get(key)
        if old is not None:
            term = WeylTerm(old.coeff + term.coeff, old.label)
        if term.coeff == 0:
            self._terms.pop(key, None)
        else:
            self._terms[key] = term

    @classmethod
    def from_arrays(cls, torus: Torus, coeffs, labels, merge_tol: float | None = None) -> "WeylSum":
        """Build from ``coeffs`` of shape (M,) and ``labels`` of shape (M, *torus.shape)."""
        out = cls(torus, merge_tol=merge_tol)
        for c, lab in zip(coeffs, labels):
            out.add(WeylTerm(complex(c), SiteField(torus, lab)))
        return out

    @property
    def terms(self) -> list:
        return list(self._terms.values())

    def __len__(self):
        return len(self._terms)

    def __iter__(self):
        return iter(self._terms.values())

    def __add__(self, other: "WeylSum") -> "WeylSum":
        out = WeylSum(self.torus, self, merge_tol=self.merge_tol)
        for term in other:
            out.add(term)
        return out

    def __sub__(self, other: "WeylSum") -> "WeylSum":
        out = WeylSum(self.torus, self, merge_tol=self.merge_tol)
        for term in other:
            out.add(term.scaled(-1))
        return out

    def __repr__(self):
        return f"WeylSum({len(self)} terms, norm_bound={sum_norm_bound(self):.6g})"


def sum_norm_bound(s: WeylSum) -> float:
    """Triangle-inequality bound sum |coeff| on the operator norm."""
    return float(sum(abs(t.coeff) for t in s))
