"""
Periodic hypercubic tori and complex fields living on them.

Coordinates along each axis run over ``-L/2+1, ..., L/2``.  Field values are
stored densely in an array of shape ``(L,)*nu`` indexed by ``coordinate mod L``,
which is the natural ordering of ``numpy.fft``.  For ``nu == 1`` sites are plain
ints, otherwise tuples of ints.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Union

import numpy as np

from .errors import DomainError

Site = Union[int, tuple]


@dataclass(frozen=True)
class Torus:
    """The torus Lambda_L = (Z / L Z)^nu with even side length L."""

    nu: int
    side: int

    def __post_init__(self):
        if int(self.nu) != self.nu or self.nu < 1:
            raise DomainError(f"dimension nu must be a positive integer, got {self.nu!r}")
        if int(self.side) != self.side or self.side < 2:
            raise DomainError(f"side L must be an integer >= 2, got {self.side!r}")
        if self.side % 2:
            raise DomainError(f"side L must be even, got L={self.side}")

    @property
    def shape(self) -> tuple:
        return (self.side,) * self.nu

    @property
    def num_sites(self) -> int:
        return self.side ** self.nu

    @property
    def coord_range(self) -> range:
        return range(-self.side // 2 + 1, self.side // 2 + 1)

    def normalize(self, x: Site) -> tuple:
        """Return ``x`` as a centered coordinate tuple, checking it lies on the torus.

        Coordinates may be given centered, in {-L/2+1, ..., L/2}, or as array
        positions in {0, ..., L-1}; anything else is rejected.
        """
        if isinstance(x, (int, np.integer)):
            x = (int(x),)
        x = tuple(int(c) for c in x)
        if len(x) != self.nu:
            raise DomainError(f"site {x} has {len(x)} coordinates, torus has nu={self.nu}")
        lo, hi, half = self.coord_range.start, self.side - 1, self.side // 2
        for c in x:
            if not lo <= c <= hi:
                raise DomainError(f"site {x} out of range [{lo}, {hi}] for L={self.side}")
        return tuple(c - self.side if c > half else c for c in x)

    def index(self, x: Site) -> tuple:
        """Array index of site ``x``."""
        return tuple(c % self.side for c in self.normalize(x))

    def site(self, index) -> Site:
        """Inverse of :meth:`index`."""
        half = self.side // 2
        coords = tuple(int(i) if i <= half else int(i) - self.side for i in index)
        return coords[0] if self.nu == 1 else coords

    def sites(self) -> Iterable[Site]:
        for c in itertools.product(self.coord_range, repeat=self.nu):
            yield c[0] if self.nu == 1 else c

    @cached_property
    def coordinate_arrays(self) -> tuple:
        """Per-axis coordinate of every array slot, each of shape ``self.shape``."""
        half = self.side // 2
        axis = np.array([i if i <= half else i - self.side for i in range(self.side)])
        return tuple(np.meshgrid(*([axis] * self.nu), indexing="ij"))

    @cached_property
    def distance_from_origin(self) -> np.ndarray:
        """Periodic l1 distance of every array slot from the origin."""
        return sum(np.abs(c) for c in self.coordinate_arrays)


def periodic_distance(x: Site, y: Site, torus: Torus) -> int:
    """Graph (l1) distance on the torus with wraparound along each axis."""
    x, y = torus.normalize(x), torus.normalize(y)
    L = torus.side
    total = 0
    for a, b in zip(x, y):
        arc = (a - b) % L
        total += min(arc, L - arc)
    return total


def dual_grid(torus: Torus) -> np.ndarray:
    """Momenta ``2 pi n / L``, ``n`` in the coordinate range, as an ``(L**nu, nu)`` array."""
    axis = 2 * np.pi * np.array(torus.coord_range) / torus.side
    grids = np.meshgrid(*([axis] * torus.nu), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=-1)


def fft_momenta(torus: Torus) -> tuple:
    """Per-axis momentum of every slot in ``numpy.fft`` ordering."""
    axis = 2 * np.pi * np.fft.fftfreq(torus.side)
    return tuple(np.meshgrid(*([axis] * torus.nu), indexing="ij"))


class SiteField:
    """A complex amplitude on each site of a torus.

    Instances are immutable: the value array is copied and flagged read-only.
    """

    __slots__ = ("torus", "values", "_support")

    def __init__(self, torus: Torus, values):
        values = np.array(values, dtype=complex)
        if values.shape != torus.shape:
            raise DomainError(f"values have shape {values.shape}, torus needs {torus.shape}")
        values.setflags(write=False)
        self.torus = torus
        self.values = values
        self._support = None

    @classmethod
    def zeros(cls, torus: Torus) -> "SiteField":
        return cls(torus, np.zeros(torus.shape, dtype=complex))

    @classmethod
    def from_sites(cls, torus: Torus, amplitudes: Mapping) -> "SiteField":
        """Build a field from a ``{site: amplitude}`` mapping."""
        values = np.zeros(torus.shape, dtype=complex)
        for x, a in amplitudes.items():
            values[torus.index(x)] += a
        return cls(torus, values)

    @property
    def support(self) -> frozenset:
        if self._support is None:
            self._support = frozenset(self.torus.site(ix) for ix in zip(*np.nonzero(self.values)))
        return self._support

    def __getitem__(self, x: Site) -> complex:
        return complex(self.values[self.torus.index(x)])

    def _check(self, other: "SiteField"):
        if not isinstance(other, SiteField):
            return NotImplemented
        if other.torus != self.torus:
            raise DomainError(f"torus mismatch: {self.torus} vs {other.torus}")
        return None

    def __add__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SiteField(self.torus, self.values + other.values)

    def __sub__(self, other):
        if self._check(other) is NotImplemented:
            return NotImplemented
        return SiteField(self.torus, self.values - other.values)

    def __neg__(self):
        return SiteField(self.torus, -self.values)

    def __mul__(self, scalar):
        if not np.isscalar(scalar):
            return NotImplemented
        return SiteField(self.torus, self.values * scalar)

    __rmul__ = __mul__

    def conj(self) -> "SiteField":
        return SiteField(self.torus, self.values.conj())

    def shifted(self, by: Site) -> "SiteField":
        """Translate the field by ``by`` (periodically)."""
        shift = self.torus.normalize(by)
        return SiteField(self.torus, np.roll(self.values, shift, axis=tuple(range(self.torus.nu))))

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum())

    def l2_norm(self) -> float:
        return float(np.sqrt((np.abs(self.values) ** 2).sum()))

    def __eq__(self, other):
        if not isinstance(other, SiteField):
            return NotImplemented
        return self.torus == other.torus and np.array_equal(self.values, other.values)

    def __hash__(self):
        return hash((self.torus, self.values.tobytes()))

    def __repr__(self):
        items = ", ".join(f"{x}: {self[x]:.6g}" for x in sorted(self.support, key=str)[:6])
        more = "" if len(self.support) <= 6 else ", ..."
        return f"SiteField(nu={self.torus.nu}, L={self.torus.side}, {{{items}{more}}})"


def delta_field(x: Site, torus: Torus) -> SiteField:
    """The field equal to 1 at ``x`` and 0 elsewhere."""
    return SiteField.from_sites(torus, {x: 1.0})
