"""Truncated multivariate Taylor arithmetic (jets) and a first-order dual layer.

A :class:`Jet` stores the Taylor coefficients of a smooth function around a
base point, for all multi-indices of total degree <= ``order`` in ``dim``
variables.  Arithmetic on jets is exact truncation: the coefficients of a
sum/product/quotient/composition are exactly the Taylor coefficients of the
corresponding function, truncated at ``order``.  Partial derivatives of the
represented function are read off with :meth:`Jet.extract`, which multiplies
the stored coefficient by the factorial of the multi-index.

Coefficient layout
------------------
Multi-indices are enumerated in graded lexicographic order: ascending total
degree, and within one degree ascending lexicographic order of the exponent
tuple.  For ``dim=2, order=2`` the order is::

    (0,0), (0,1), (1,0), (0,2), (1,1), (2,0)

The enumeration of order ``m-1`` is a prefix of the enumeration of order
``m``, so truncation is a slice.  The layout is fixed; it is part of the
on-disk/test surface and must not change.

Storage is dense (one float per multi-index).  The intended regime is
``dim <= 8`` and ``order <= 6``; larger signatures work but tables grow
combinatorially.

Jets of different ``(dim, order)`` signatures never combine silently:
mixing them raises :class:`~finslerkit.errors.SignatureError`.  Use
:meth:`Jet.truncated` to align orders deliberately.

:class:`DualLayer` wraps a (value, tangent) pair of jets and propagates one
extra directional derivative through any computation written against the
shared scalar interface (operators plus ``sqrt/ln/exp/powc/d/truncated``).
It nests: the components may themselves be duals.
"""

from __future__ import annotations

import math
import numbers
from itertools import combinations

import numpy as np

from .errors import (
    BranchError,
    DimensionError,
    DomainError,
    OrderError,
    PoleError,
    SignatureError,
)

__all__ = ["Jet", "DualLayer", "JetSpace", "jet_space", "seed_phase_point", "seed_dual_phase_point"]


def _compositions(total: int, parts: int):
    """Yield exponent tuples of length ``parts`` summing to ``total``,
    in ascending lexicographic order."""
    # Stars and bars: combinations choose bar positions; ascending lex in the
    # exponent tuple corresponds to ascending combinations here.
    for bars in combinations(range(total + parts - 1), parts - 1):
        prev = -1
        exps = []
        for b in bars:
            exps.append(b - prev - 1)
            prev = b
        exps.append(total + parts - 2 - prev)
        yield tuple(exps)


class JetSpace:
    """Shared tables for one ``(dim, order)`` signature.

    Instances are interned: :func:`jet_space` returns the same object for
    the same signature, so identity comparison is a valid signature check.
    """

    def __init__(self, dim: int, order: int):
        if dim < 1:
            raise DimensionError(f"jet dimension must be >= 1, got {dim}")
        if order < 0:
            raise OrderError(f"jet order must be >= 0, got {order}")
        self.dim = dim
        self.order = order
        exps = []
        self.degree_end = []  # degree_end[d] = number of indices with degree <= d
        for d in range(order + 1):
            exps.extend(_compositions(d, dim))
            self.degree_end.append(len(exps))
        self.exponents = np.array(exps, dtype=np.int64)
        self.size = len(exps)
        self.index_of = {e: i for i, e in enumerate(exps)}
        self.degrees = self.exponents.sum(axis=1)
        # Mixed-radix keys for vectorized product-index lookup.
        radix = order + 1
        self._powers = radix ** np.arange(dim, dtype=np.int64)
        keys = self.exponents @ self._powers
        self._key_sort = np.argsort(keys)
        self._sorted_keys = keys[self._key_sort]
        self._keys = keys
        # extract(): d^|a| f / dx^a = coeff[a] * a!
        self.factorials = np.array(
            [math.prod(math.factorial(int(e)) for e in ex) for ex in exps], dtype=np.float64
        )
        self._mult = None
        self._diff = {}

    def _mult_table(self):
        """(ia, ib, io) index triples covering every coefficient product
        that lands at total degree <= order."""
        if self._mult is None:
            ia_parts, ib_parts = [], []
            for i in range(self.size):
                room = self.order - int(self.degrees[i])
                nb = self.degree_end[room]
                ia_parts.append(np.full(nb, i, dtype=np.int64))
                ib_parts.append(np.arange(nb, dtype=np.int64))
            ia = np.concatenate(ia_parts)
            ib = np.concatenate(ib_parts)
            out_keys = self._keys[ia] + self._keys[ib]
            pos = np.searchsorted(self._sorted_keys, out_keys)
            io = self._key_sort[pos]
            self._mult = (ia, ib, io)
        return self._mult

    def _diff_table(self, var: int):
        """(dst, src, factor) arrays mapping coefficients of f to
        coefficients of df/dx_var in the (dim, order-1) space."""
        if var not in self._diff:
            lower = jet_space(self.dim, self.order - 1)
            dst = np.arange(lower.size, dtype=np.int64)
            shifted = lower.exponents.copy()
            shifted[:, var] += 1
            src = np.array([self.index_of[tuple(e)] for e in map(tuple, shifted)], dtype=np.int64)
            fac = (lower.exponents[:, var] + 1).astype(np.float64)
            self._diff[var] = (dst, src, fac)
        return self._diff[var]


_SPACES: dict[tuple[int, int], JetSpace] = {}


def jet_space(dim: int, order: int) -> JetSpace:
    """Interned :class:`JetSpace` for the signature ``(dim, order)``."""
    key = (dim, order)
    space = _SPACES.get(key)
    if space is None:
        space = _SPACES[key] = JetSpace(dim, order)
    return space


def _ipow(base, n: int):
    """Integer power by repeated squaring; works for any scalar type here.

    Exact for negative value parts (no branch functions involved) when
    ``n >= 0``; negative ``n`` goes through the reciprocal.
    """
    if n < 0:
        return _ipow(base, -n).recip()
    if n == 0:
        return base.const(1.0)
    acc = None
    square = base
    while n:
        if n & 1:
            acc = square if acc is None else acc * square
        square = square * square
        n >>= 1
    return acc


class Jet:
    """Dense truncated Taylor expansion; see the module docstring."""

    __slots__ = ("space", "coeffs")

    def __init__(self, space: JetSpace, coeffs: np.ndarray):
        self.space = space
        self.coeffs = coeffs

    # -- construction -------------------------------------------------

    @classmethod
    def constant(cls, space: JetSpace, value: float) -> "Jet":
        c = np.zeros(space.size)
        c[0] = value
        return cls(space, c)

    @classmethod
    def variable(cls, space: JetSpace, var: int, value: float) -> "Jet":
        """The coordinate function ``x_var`` expanded around ``value``."""
        if not 0 <= var < space.dim:
            raise DimensionError(f"variable index {var} out of range for dim {space.dim}")
        if space.order < 1:
            raise OrderError("seeding a variable requires order >= 1")
        c = np.zeros(space.size)
        c[0] = value
        unit = tuple(1 if k == var else 0 for k in range(space.dim))
        c[space.index_of[unit]] = 1.0
        return cls(space, c)

    def const(self, value: float) -> "Jet":
        """Constant jet with this jet's signature."""
        return Jet.constant(self.space, value)

    # -- inspection ---------------------------------------------------

    @property
    def order(self) -> int:
        return self.space.order

    @property
    def dim(self) -> int:
        return self.space.dim

    @property
    def value(self) -> float:
        """Value part (coefficient of the empty multi-index)."""
        return float(self.coeffs[0])

    # ``num`` is the shared "plain number for control flow" accessor of the
    # scalar interface; for duals it recurses into the value component.
    num = value

    def extract(self, index) -> float:
        """Partial derivative d^|index| f / dx^index at the base point."""
        index = tuple(int(i) for i in index)
        if len(index) != self.space.dim:
            raise DimensionError(
                f"multi-index length {len(index)} != jet dimension {self.space.dim}"
            )
        if any(i < 0 for i in index):
            raise OrderError("multi-index entries must be >= 0")
        if sum(index) > self.space.order:
            raise OrderError(
                f"requested total order {sum(index)} exceeds jet order {self.space.order}"
            )
        pos = self.space.index_of[index]
        return float(self.coeffs[pos] * self.space.factorials[pos])

    def __repr__(self):
        return f"Jet(dim={self.space.dim}, order={self.space.order}, value={self.value!r})"

    # -- signature handling -------------------------------------------

    def _peer(self, other) -> "Jet":
        if other.space is not self.space:
            raise SignatureError(
                f"cannot combine jets with signatures "
                f"(dim={self.space.dim}, order={self.space.order}) and "
                f"(dim={other.space.dim}, order={other.space.order}); "
                "use truncated() to align orders explicitly"
            )
        return other

    def truncated(self, order: int) -> "Jet":
        """Copy truncated to a lower (or equal) order."""
        if order == self.space.order:
            return self
        if order > self.space.order:
            raise OrderError(f"cannot extend jet of order {self.space.order} to {order}")
        lower = jet_space(self.space.dim, order)
        return Jet(lower, self.coeffs[: lower.size].copy())

    # -- arithmetic ----------------------------------------------------

    def __neg__(self):
        return Jet(self.space, -self.coeffs)

    def __add__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.coeffs + self._peer(other).coeffs)
        if isinstance(other, numbers.Real):
            c = self.coeffs.copy()
            c[0] += other
            return Jet(self.space, c)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, Jet):
            return Jet(self.space, self.coeffs - self._peer(other).coeffs)
        if isinstance(other, numbers.Real):
            c = self.coeffs.copy()
            c[0] -= other
            return Jet(self.space, c)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            c = -self.coeffs
            c[0] += other
            return Jet(self.space, c)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, Jet):
            ia, ib, io = self.space._mult_table()
            self._peer(other)
            prod = np.bincount(io, weights=self.coeffs[ia] * other.coeffs[ib], minlength=self.space.size)
            return Jet(self.space, prod)
        if isinstance(other, numbers.Real):
            return Jet(self.space, self.coeffs * float(other))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Jet):
            return self * self._peer(other).recip()
        if isinstance(other, numbers.Real):
            return Jet(self.space, self.coeffs / float(other))
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return self.recip() * float(other)
        return NotImplemented

    def __pow__(self, n):
        if isinstance(n, numbers.Integral):
            return _ipow(self, int(n))
        return NotImplemented

    # -- analytic functions via series composition ---------------------

    def _compose(self, outer: np.ndarray) -> "Jet":
        """Horner evaluation of sum_k outer[k] * (self - value)**k."""
        u = Jet(self.space, self.coeffs.copy())
        u.coeffs[0] = 0.0
        acc = self.const(float(outer[-1]))
        for k in range(len(outer) - 2, -1, -1):
            acc = acc * u + float(outer[k])
        return acc

    def recip(self) -> "Jet":
        b0 = self.value
        if b0 == 0.0:
            raise PoleError("division by a jet with zero value part")
        m = self.space.order
        outer = np.array([(-1.0) ** k / b0 ** (k + 1) for k in range(m + 1)])
        return self._compose(outer)

    def sqrt(self) -> "Jet":
        b0 = self.value
        if b0 <= 0.0:
            raise BranchError(f"sqrt of a jet with non-positive value part {b0!r}")
        return self.powc(0.5)

    def ln(self) -> "Jet":
        b0 = self.value
        if b0 <= 0.0:
            raise BranchError(f"ln of a jet with non-positive value part {b0!r}")
        m = self.space.order
        outer = np.empty(m + 1)
        outer[0] = math.log(b0)
        for k in range(1, m + 1):
            outer[k] = (-1.0) ** (k + 1) / (k * b0**k)
        return self._compose(outer)

    def exp(self) -> "Jet":
        e0 = math.exp(self.value)
        m = self.space.order
        outer = np.array([e0 / math.factorial(k) for k in range(m + 1)])
        return self._compose(outer)

    def powc(self, alpha: float) -> "Jet":
        """Real power with constant exponent; requires a positive value part."""
        b0 = self.value
        if b0 <= 0.0:
            raise BranchError(f"power {alpha!r} of a jet with non-positive value part {b0!r}")
        m = self.space.order
        outer = np.empty(m + 1)
        binom = 1.0
        for k in range(m + 1):
            outer[k] = binom * b0 ** (alpha - k)
            binom *= (alpha - k) / (k + 1)
        return self._compose(outer)

    # -- calculus -------------------------------------------------------

    def d(self, var: int) -> "Jet":
        """Partial derivative with respect to variable ``var``.

        The result is a jet of order ``order - 1``: the top-degree
        information is genuinely consumed by differentiation.
        """
        if self.space.order < 1:
            raise OrderError("cannot differentiate a jet of order 0")
        if not 0 <= var < self.space.dim:
            raise DimensionError(f"variable index {var} out of range for dim {self.space.dim}")
        dst, src, fac = self.space._diff_table(var)
        lower = jet_space(self.space.dim, self.space.order - 1)
        out = np.empty(lower.size)
        out[dst] = self.coeffs[src] * fac
        return Jet(lower, out)


class DualLayer:
    """(value, tangent) pair propagating one extra directional derivative.

    Components are jets (or nested duals) of identical signature.  Running
    a computation on duals whose tangents are seeded with d/ds of the
    inputs yields the directional derivative of every output along s.
    """

    __slots__ = ("value", "tangent")

    def __init__(self, value, tangent):
        self.value = value
        self.tangent = tangent

    @property
    def order(self) -> int:
        return self.value.order

    @property
    def num(self) -> float:
        return self.value.num

    def const(self, v: float) -> "DualLayer":
        return DualLayer(self.value.const(v), self.tangent.const(0.0))

    def truncated(self, order: int) -> "DualLayer":
        return DualLayer(self.value.truncated(order), self.tangent.truncated(order))

    def __repr__(self):
        return f"DualLayer(value={self.value!r})"

    def __neg__(self):
        return DualLayer(-self.value, -self.tangent)

    def __add__(self, other):
        if isinstance(other, DualLayer):
            return DualLayer(self.value + other.value, self.tangent + other.tangent)
        if isinstance(other, numbers.Real):
            return DualLayer(self.value + other, self.tangent)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, DualLayer):
            return DualLayer(self.value - other.value, self.tangent - other.tangent)
        if isinstance(other, numbers.Real):
            return DualLayer(self.value - other, self.tangent)
        return NotImplemented

    def __rsub__(self, other):
        if isinstance(other, numbers.Real):
            return DualLayer(other - self.value, -self.tangent)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, DualLayer):
            return DualLayer(
                self.value * other.value,
                self.tangent * other.value + self.value * other.tangent,
            )
        if isinstance(other, numbers.Real):
            return DualLayer(self.value * other, self.tangent * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, DualLayer):
            return self * other.recip()
        if isinstance(other, numbers.Real):
            return DualLayer(self.value / other, self.tangent / other)
        return NotImplemented

    def __rtruediv__(self, other):
        if isinstance(other, numbers.Real):
            return self.recip() * float(other)
        return NotImplemented

    def __pow__(self, n):
        if isinstance(n, numbers.Integral):
            return _ipow(self, int(n))
        return NotImplemented

    def recip(self) -> "DualLayer":
        r = self.value.recip()
        return DualLayer(r, -(self.tangent * r) * r)

    def sqrt(self) -> "DualLayer":
        s = self.value.sqrt()
        return DualLayer(s, self.tangent / (s * 2.0))

    def ln(self) -> "DualLayer":
        return DualLayer(self.value.ln(), self.tangent / self.value)

    def exp(self) -> "DualLayer":
        e = self.value.exp()
        return DualLayer(e, self.tangent * e)

    def powc(self, alpha: float) -> "DualLayer":
        return DualLayer(self.value.powc(alpha), self.tangent * self.value.powc(alpha - 1.0) * alpha)

    def d(self, var: int) -> "DualLayer":
        # d/ds commutes with coordinate partials, so componentwise is exact.
        return DualLayer(self.value.d(var), self.tangent.d(var))


def _check_phase(x, y):
    x = [float(v) for v in x]
    y = [float(v) for v in y]
    if len(x) != len(y):
        raise DimensionError(f"x has length {len(x)} but y has length {len(y)}")
    if not x:
        raise DimensionError("empty phase point")
    if all(v == 0.0 for v in y):
        raise DomainError("y must be a nonzero vector")
    return x, y


def seed_phase_point(point, order: int):
    """Coordinate jets for a phase point.

    ``point`` is anything with ``x`` and ``y`` sequences of equal length n
    (or a pair of sequences).  Returns ``2n`` jets over the shared space of
    dimension ``2n``: variables ``0..n-1`` are positions, ``n..2n-1`` are
    fiber coordinates.  The zero vector ``y`` is rejected: every metric
    here is fiberwise singular at the origin.
    """
    if hasattr(point, "x"):
        x, y = point.x, point.y
    else:
        x, y = point
    x, y = _check_phase(x, y)
    if order < 1:
        raise OrderError("seeding a phase point requires order >= 1")
    n = len(x)
    space = jet_space(2 * n, order)
    seeds = [Jet.variable(space, k, v) for k, v in enumerate(x)]
    seeds += [Jet.variable(space, n + k, v) for k, v in enumerate(y)]
    return seeds


def seed_dual_phase_point(point, order: int, direction: int):
    """Dual-valued coordinate seeds whose tangent is d/d(variable ``direction``).

    Running any scalar computation on these seeds produces, in the tangent
    component, the partial derivative of the result with respect to phase
    variable ``direction`` (0..n-1 positions, n..2n-1 fiber), in addition to
    whatever jet orders the value component carries.
    """
    base = seed_phase_point(point, order)
    if not 0 <= direction < len(base):
        raise DimensionError(f"direction {direction} out of range for {len(base)} phase variables")
    duals = []
    for k, jet in enumerate(base):
        duals.append(DualLayer(jet, jet.const(1.0 if k == direction else 0.0)))
    return duals
