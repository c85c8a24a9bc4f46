"""Exact arithmetic foundation.

Two layers:

* :class:`PolyX` -- sparse polynomials in the base coordinates x^1..x^d with
  rational coefficients.  Never truncated; the recursions used downstream
  only ever produce finite x-degree.

* :class:`FormJet` -- the working carrier for everything form-valued: a
  bigraded exterior form (dx-degree, dy-degree) whose coefficients are
  polynomial in x and polynomial of degree <= N in the fiber coordinates y.
  The dx^i and dy^i are mutually anticommuting odd generators; y^i and x^i
  are even.

All coefficients are :class:`fractions.Fraction`; there is no floating point
anywhere, so every identity check below is a decision, not an approximation.

Conventions fixed here (and relied on everywhere else):

* Exterior monomials are kept in the canonical order
  dx^1 < dx^2 < ... < dx^d < dy^1 < ... < dy^d, encoded as bitmasks.
* The product truncates y-degree at the jet order N (an honest quotient
  algebra).  Linear operators built later (in particular the contracting
  homotopy for the fiberwise de Rham differential) may legitimately create
  y-degree N+1 terms; the carrier tolerates them, the product kills them.
* Term order for iteration/printing: graded-lexicographic on the y-exponent
  (earlier coordinates first), then dx mask, then dy mask.
"""
from __future__ import annotations

from fractions import Fraction
from math import comb
from typing import Iterable, Iterator, Sequence

__all__ = [
    "PolyX",
    "FormJet",
    "koszul_sign",
    "monomial_basis",
    "grlex_key",
]

Exponents = tuple[int, ...]
FormKey = tuple[Exponents, int, int]  # (y exponents, dx mask, dy mask)

ZERO = Fraction(0)
ONE = Fraction(1)


def grlex_key(exps: Exponents) -> tuple[int, Exponents]:
    """Sort key for graded-lexicographic order with y^1 before y^2."""
    return (sum(exps), tuple(reversed(exps)))


def monomial_basis(d: int, order: int, include_constant: bool = True) -> list[Exponents]:
    """All y-exponent tuples of total degree <= order, in graded-lex order.

    >>> monomial_basis(1, 2)
    [(0,), (1,), (2,)]
    >>> monomial_basis(2, 1, include_constant=False)
    [(1, 0), (0, 1)]
    """
    if d < 1 or order < 0:
        raise ValueError("need d >= 1 and order >= 0")
    out: list[Exponents] = []

    def rec(prefix: list[int], remaining: int, budget: int) -> None:
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for e in range(budget + 1):
            rec(prefix + [e], remaining - 1, budget - e)

    rec([], d, order)
    out.sort(key=grlex_key)
    if not include_constant:
        out = [e for e in out if any(e)]
    return out


def koszul_sign(degrees: Sequence[int], permutation: Sequence[int]) -> Fraction:
    """Sign of reordering graded factors.

    ``permutation[i]`` is the original position of the factor that ends up in
    position ``i``.  The sign is the product of (-1)^{deg_a * deg_b} over all
    pairs that swap their relative order.

    >>> koszul_sign([1, 1], [1, 0])
    Fraction(-1, 1)
    >>> koszul_sign([1, 2], [1, 0])
    Fraction(1, 1)
    """
    n = len(degrees)
    if sorted(permutation) != list(range(n)):
        raise ValueError("not a permutation of the factor positions")
    sign = 1
    for i in range(n):
        for j in range(i + 1, n):
            if permutation[i] > permutation[j]:
                if degrees[permutation[i]] % 2 and degrees[permutation[j]] % 2:
                    sign = -sign
    return Fraction(sign)


def _mask_merge(m1: int, m2: int) -> tuple[int, int] | None:
    """Concatenate two canonical exterior words; None if a generator repeats.

    Returns (sign, merged mask).  The sign counts the transpositions needed
    to sort the concatenation: each generator of m2 crosses the generators of
    m1 with a higher bit index.
    """
    if m1 & m2:
        return None
    sign = 1
    b = m2
    while b:
        low = b & -b
        above = m1 >> (low.bit_length())
        if bin(above).count("1") % 2:
            sign = -sign
        b ^= low
    return sign, m1 | m2


class PolyX:
    """Sparse polynomial in x^1..x^d over the rationals."""

    __slots__ = ("dim", "terms")

    def __init__(self, dim: int, terms: dict[Exponents, Fraction] | None = None):
        self.dim = dim
        self.terms: dict[Exponents, Fraction] = {}
        if terms:
            for e, c in terms.items():
                if len(e) != dim:
                    raise ValueError(f"exponent tuple {e} has wrong length for d={dim}")
                if c:
                    self.terms[e] = Fraction(c)

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, dim: int) -> PolyX:
        return cls(dim)

    @classmethod
    def constant(cls, dim: int, value) -> PolyX:
        return cls(dim, {(0,) * dim: Fraction(value)})

    @classmethod
    def coordinate(cls, dim: int, i: int) -> PolyX:
        """The polynomial x^{i+1} (0-based index i)."""
        e = [0] * dim
        e[i] = 1
        return cls(dim, {tuple(e): ONE})

    # -- ring operations ---------------------------------------------------
    def __add__(self, other: PolyX) -> PolyX:
        out = dict(self.terms)
        for e, c in other.terms.items():
            c2 = out.get(e, ZERO) + c
            if c2:
                out[e] = c2
            else:
                out.pop(e, None)
        return PolyX(self.dim, out)

    def __neg__(self) -> PolyX:
        return PolyX(self.dim, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other: PolyX) -> PolyX:
        return self + (-other)

    def __mul__(self, other) -> PolyX:
        if isinstance(other, PolyX):
            out: dict[Exponents, Fraction] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    c = out.get(e, ZERO) + c1 * c2
                    if c:
                        out[e] = c
                    else:
                        out.pop(e, None)
            return PolyX(self.dim, out)
        s = Fraction(other)
        return PolyX(self.dim, {e: c * s for e, c in self.terms.items()})

    __rmul__ = __mul__

    def diff(self, i: int) -> PolyX:
        """Partial derivative with respect to x^{i+1}."""
        out: dict[Exponents, Fraction] = {}
        for e, c in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                out[tuple(e2)] = c * e[i]
        return PolyX(self.dim, out)

    # -- structure ---------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(e) for e in self.terms), default=0)

    def __eq__(self, other) -> bool:
        return isinstance(other, PolyX) and self.dim == other.dim and self.terms == other.terms

    def __hash__(self):
        return hash((self.dim, tuple(sorted(self.terms.items(), key=lambda t: grlex_key(t[0])))))

    def sorted_terms(self) -> list[tuple[Exponents, Fraction]]:
        return sorted(self.terms.items(), key=lambda t: grlex_key(t[0]))

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        bits = []
        for e, c in self.sorted_terms():
            mono = "*".join(f"x{i + 1}^{p}" if p > 1 else f"x{i + 1}"
                            for i, p in enumerate(e) if p)
            bits.append(f"{c}" + (f"*{mono}" if mono else ""))
        return " + ".join(bits)


def _fmt_mask(mask: int, letter: str) -> str:
    out = []
    b = 0
    while mask >> b:
        if (mask >> b) & 1:
            out.append(f"{letter}{b + 1}")
        b += 1
    return " ".join(out)


class FormJet:
    """Bigraded exterior form with truncated-jet coefficients.

    ``terms`` maps (y exponents, dx mask, dy mask) to a :class:`PolyX`.
    ``order`` is the jet truncation: the *product* discards y-degree > order.
    """

    __slots__ = ("dim", "order", "terms")

    def __init__(self, dim: int, order: int,
                 terms: dict[FormKey, PolyX] | None = None):
        if dim < 1 or order < 1:
            raise ValueError("need dim >= 1 and order >= 1")
        self.dim = dim
        self.order = order
        self.terms: dict[FormKey, PolyX] = {}
        if terms:
            for key, p in terms.items():
                exps, dxm, dym = key
                if len(exps) != dim:
                    raise ValueError(f"y-exponents {exps} wrong length for d={dim}")
                if dxm >> dim or dym >> dim:
                    raise ValueError("form mask out of range")
                if not p.is_zero():
                    self.terms[key] = p

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, dim: int, order: int) -> FormJet:
        return cls(dim, order)

    @classmethod
    def one(cls, dim: int, order: int) -> FormJet:
        return cls.scalar(dim, order, 1)

    @classmethod
    def scalar(cls, dim: int, order: int, value) -> FormJet:
        c = Fraction(value)
        if not c:
            return cls(dim, order)
        return cls(dim, order, {((0,) * dim, 0, 0): PolyX.constant(dim, c)})

    @classmethod
    def from_poly(cls, p: PolyX, order: int) -> FormJet:
        return cls(p.dim, order, {((0,) * p.dim, 0, 0): p})

    @classmethod
    def y(cls, dim: int, order: int, i: int) -> FormJet:
        e = [0] * dim
        e[i] = 1
        return cls(dim, order, {(tuple(e), 0, 0): PolyX.constant(dim, 1)})

    @classmethod
    def y_monomial(cls, dim: int, order: int, exps: Exponents,
                   coeff: PolyX | None = None) -> FormJet:
        if coeff is None:
            coeff = PolyX.constant(dim, 1)
        return cls(dim, order, {(tuple(exps), 0, 0): coeff})

    @classmethod
    def dx(cls, dim: int, order: int, i: int) -> FormJet:
        return cls(dim, order, {((0,) * dim, 1 << i, 0): PolyX.constant(dim, 1)})

    @classmethod
    def dy(cls, dim: int, order: int, i: int) -> FormJet:
        return cls(dim, order, {((0,) * dim, 0, 1 << i): PolyX.constant(dim, 1)})

    @classmethod
    def monomial(cls, dim: int, order: int, exps: Exponents, dxm: int, dym: int,
                 coeff: PolyX | Fraction | int = 1) -> FormJet:
        p = coeff if isinstance(coeff, PolyX) else PolyX.constant(dim, coeff)
        return cls(dim, order, {(tuple(exps), dxm, dym): p})

    # -- compatibility -----------------------------------------------------
    def _check(self, other: FormJet) -> None:
        if self.dim != other.dim or self.order != other.order:
            raise ValueError(
                f"incompatible carriers: (d={self.dim}, N={self.order}) vs "
                f"(d={other.dim}, N={other.order})")

    # -- linear structure ----------------------------------------------------
    def __add__(self, other: FormJet) -> FormJet:
        self._check(other)
        out = dict(self.terms)
        for key, p in other.terms.items():
            q = out.get(key)
            s = p if q is None else q + p
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
        return FormJet(self.dim, self.order, out)

    def __neg__(self) -> FormJet:
        return FormJet(self.dim, self.order, {k: -p for k, p in self.terms.items()})

    def __sub__(self, other: FormJet) -> FormJet:
        return self + (-other)

    def scale(self, s) -> FormJet:
        if isinstance(s, PolyX):
            return FormJet(self.dim, self.order,
                           {k: p * s for k, p in self.terms.items()})
        c = Fraction(s)
        if not c:
            return FormJet.zero(self.dim, self.order)
        return FormJet(self.dim, self.order, {k: p * c for k, p in self.terms.items()})

    # -- graded product ------------------------------------------------------
    def __mul__(self, other: FormJet) -> FormJet:
        """Graded product; y-degree > order is discarded (quotient algebra)."""
        self._check(other)
        d, n = self.dim, self.order
        out: dict[FormKey, PolyX] = {}
        for (e1, dx1, dy1), p1 in self.terms.items():
            for (e2, dx2, dy2), p2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                if sum(e) > n:
                    continue
                m1 = dx1 | (dy1 << d)
                m2 = dx2 | (dy2 << d)
                merged = _mask_merge(m1, m2)
                if merged is None:
                    continue
                sign, mm = merged
                key = (e, mm & ((1 << d) - 1), mm >> d)
                p = p1 * p2
                if sign < 0:
                    p = -p
                q = out.get(key)
                s = p if q is None else q + p
                if s.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = s
        return FormJet(d, n, out)

    # -- derivations ---------------------------------------------------------
    def diff_x(self, i: int) -> FormJet:
        """d/dx^{i+1} on the coefficients (even operator)."""
        out = {}
        for key, p in self.terms.items():
            q = p.diff(i)
            if not q.is_zero():
                out[key] = q
        return FormJet(self.dim, self.order, out)

    def diff_y(self, i: int) -> FormJet:
        """d/dy^{i+1}; even operator on the jet part."""
        out: dict[FormKey, PolyX] = {}
        for (e, dxm, dym), p in self.terms.items():
            if e[i]:
                e2 = list(e)
                e2[i] -= 1
                key = (tuple(e2), dxm, dym)
                q = p * e[i]
                r = out.get(key)
                s = q if r is None else r + q
                if s.is_zero():
                    out.pop(key, None)
                else:
                    out[key] = s
        return FormJet(self.dim, self.order, out)

    def contract_dy(self, i: int) -> FormJet:
        """Left derivative with respect to dy^{i+1} (odd operator)."""
        out = {}
        bit = 1 << i
        for (e, dxm, dym), p in self.terms.items():
            if not (dym & bit):
                continue
            crossings = bin(dxm).count("1") + bin(dym & (bit - 1)).count("1")
            q = -p if crossings % 2 else p
            out[(e, dxm, dym ^ bit)] = q
        return FormJet(self.dim, self.order, out)

    # -- slicing and degrees -------------------------------------------------
    def y_slice_max(self, max_degree: int) -> FormJet:
        """Keep only terms of y-degree <= max_degree."""
        return FormJet(self.dim, self.order,
                       {k: p for k, p in self.terms.items() if sum(k[0]) <= max_degree})

    def y_component(self, degree: int) -> FormJet:
        return FormJet(self.dim, self.order,
                       {k: p for k, p in self.terms.items() if sum(k[0]) == degree})

    def truncate(self) -> FormJet:
        """Canonical representative: drop y-degree > order."""
        return self.y_slice_max(self.order)

    def max_y_degree(self) -> int:
        return max((sum(k[0]) for k in self.terms), default=0)

    def form_degrees(self) -> set[tuple[int, int]]:
        """Set of (dx-degree, dy-degree) pairs present."""
        return {(bin(dxm).count("1"), bin(dym).count("1"))
                for (_, dxm, dym) in self.terms}

    def total_form_degree(self) -> int:
        """Common dx+dy degree; raises if the element is not homogeneous."""
        degs = {a + b for a, b in self.form_degrees()}
        if not degs:
            return 0
        if len(degs) > 1:
            raise ValueError(f"inhomogeneous form degrees {degs}")
        return degs.pop()

    # -- structure -----------------------------------------------------------
    def is_zero(self) -> bool:
        return not self.terms

    def __eq__(self, other) -> bool:
        return (isinstance(other, FormJet) and self.dim == other.dim
                and self.order == other.order and self.terms == other.terms)

    def __hash__(self):
        return hash((self.dim, self.order,
                     tuple(sorted((k, hash(p)) for k, p in self.terms.items()))))

    def sorted_terms(self) -> list[tuple[FormKey, PolyX]]:
        return sorted(self.terms.items(),
                      key=lambda t: (grlex_key(t[0][0]), t[0][1], t[0][2]))

    def first_term_repr(self) -> str | None:
        items = self.sorted_terms()
        if not items:
            return None
        (e, dxm, dym), p = items[0]
        return _fmt_term(e, dxm, dym, p)

    def __repr__(self) -> str:
        if not self.terms:
            return "0"
        return " + ".join(_fmt_term(e, dxm, dym, p)
                          for (e, dxm, dym), p in self.sorted_terms())


def _fmt_term(e: Exponents, dxm: int, dym: int, p: PolyX) -> str:
    mono = " ".join(f"y{i + 1}^{k}" if k > 1 else f"y{i + 1}"
                    for i, k in enumerate(e) if k)
    parts = [s for s in (f"({p})", mono, _fmt_mask(dxm, "dx"), _fmt_mask(dym, "dy")) if s]
    return " ".join(parts)


def basis_forms(d: int, order: int, max_y: int | None = None) -> Iterator[FormJet]:
    """All monomial basis forms y^a dx^S dy^T with y-degree <= max_y."""
    cap = order if max_y is None else max_y
    for exps in monomial_basis(d, cap):
        for dxm in range(1 << d):
            for dym in range(1 << d):
                yield FormJet.monomial(d, order, exps, dxm, dym)


def binomial_dimension(d: int, order: int) -> int:
    """Number of y-monomials of degree <= order (C(order + d, d))."""
    return comb(order + d, d)
