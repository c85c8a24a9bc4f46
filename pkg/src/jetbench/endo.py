"""Matrix-valued jets and the twisted flat differential.

``EndJet`` is an r x r matrix of form jets; the product is the matrix
product with the graded entry product, so Koszul signs ride along with the
entries.  The connection one-form ``gamma`` solving

    gamma = base_form + delta_inv(nabla gamma + A(gamma) + (1/2)[gamma, gamma])

(yielded by iterating in y-degree) satisfies the Maurer-Cartan identity
D gamma + (1/2)[gamma, gamma] = 0 through y-degree N_rep, which makes
D + [gamma, .] square to zero there.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from .exactcore import FormJet, PolyX
from .fedosov import FedosovOperator, delta_inv, nabla

__all__ = [
    "EndJet",
    "ConnectionForm",
    "GammaForm",
    "build_gamma",
    "maurer_cartan_residual",
    "twisted_differential",
    "gauge_shift",
    "end_commutator",
    "fedosov_on_end",
]


class EndJet:
    """Square matrix of form jets sharing one carrier."""

    __slots__ = ("rank", "dim", "order", "entries")

    def __init__(self, rank: int, entries: tuple[tuple[FormJet, ...], ...]):
        if rank < 1 or len(entries) != rank or any(len(r) != rank for r in entries):
            raise ValueError("entries must be an r x r grid")
        first = entries[0][0]
        for row in entries:
            for e in row:
                if e.dim != first.dim or e.order != first.order:
                    raise ValueError("entries live in different carriers")
        self.rank = rank
        self.dim = first.dim
        self.order = first.order
        self.entries = entries

    # -- constructors ------------------------------------------------------
    @classmethod
    def zero(cls, rank: int, dim: int, order: int) -> EndJet:
        z = FormJet.zero(dim, order)
        return cls(rank, tuple(tuple(z for _ in range(rank)) for _ in range(rank)))

    @classmethod
    def identity(cls, rank: int, dim: int, order: int) -> EndJet:
        one = FormJet.one(dim, order)
        z = FormJet.zero(dim, order)
        return cls(rank, tuple(tuple(one if i == j else z for j in range(rank))
                               for i in range(rank)))

    @classmethod
    def scalar(cls, rank: int, u: FormJet) -> EndJet:
        z = FormJet.zero(u.dim, u.order)
        return cls(rank, tuple(tuple(u if i == j else z for j in range(rank))
                               for i in range(rank)))

    @classmethod
    def unit_entry(cls, rank: int, a: int, b: int, u: FormJet) -> EndJet:
        """u placed at entry (a, b), zero elsewhere."""
        z = FormJet.zero(u.dim, u.order)
        return cls(rank, tuple(tuple(u if (i, j) == (a, b) else z
                                     for j in range(rank)) for i in range(rank)))

    # -- algebra -------------------------------------------------------------
    def _check(self, other: EndJet) -> None:
        if (self.rank, self.dim, self.order) != (other.rank, other.dim, other.order):
            raise ValueError("incompatible matrix carriers")

    def __add__(self, other: EndJet) -> EndJet:
        self._check(other)
        return EndJet(self.rank, tuple(
            tuple(a + b for a, b in zip(r1, r2))
            for r1, r2 in zip(self.entries, other.entries)))

    def __neg__(self) -> EndJet:
        return EndJet(self.rank, tuple(tuple(-a for a in r) for r in self.entries))

    def __sub__(self, other: EndJet) -> EndJet:
        return self + (-other)

    def scale(self, s) -> EndJet:
        return EndJet(self.rank, tuple(tuple(a.scale(s) for a in r)
                                       for r in self.entries))

    def __mul__(self, other: EndJet) -> EndJet:
        self._check(other)
        r = self.rank
        z = FormJet.zero(self.dim, self.order)
        rows = []
        for i in range(r):
            row = []
            for j in range(r):
                acc = z
                for k in range(r):
                    a = self.entries[i][k]
                    b = other.entries[k][j]
                    if a.is_zero() or b.is_zero():
                        continue
                    acc = acc + a * b
                row.append(acc)
            rows.append(tuple(row))
        return EndJet(r, tuple(rows))

    def map(self, f: Callable[[FormJet], FormJet]) -> EndJet:
        return EndJet(self.rank, tuple(tuple(f(a) for a in r) for r in self.entries))

    # -- structure -----------------------------------------------------------
    def is_zero(self) -> bool:
        return all(a.is_zero() for r in self.entries for a in r)

    def __eq__(self, other) -> bool:
        return (isinstance(other, EndJet) and self.rank == other.rank
                and self.entries == other.entries)

    def __hash__(self):
        return hash((self.rank, self.entries))

    def y_slice_max(self, m: int) -> EndJet:
        return self.map(lambda a: a.y_slice_max(m))

    def total_form_degree(self) -> int:
        degs = set()
        for r in self.entries:
            for a in r:
                if not a.is_zero():
                    degs.add(a.total_form_degree())
        if not degs:
            return 0
        if len(degs) > 1:
            raise ValueError(f"inhomogeneous matrix form degrees {degs}")
        return degs.pop()

    def max_y_degree(self) -> int:
        return max((a.max_y_degree() for r in self.entries for a in r
                    if not a.is_zero()), default=0)

    def first_term_repr(self) -> str | None:
        for i, row in enumerate(self.entries):
            for j, a in enumerate(row):
                s = a.first_term_repr()
                if s is not None:
                    return f"E[{i + 1},{j + 1}] {s}"
        return None

    def __repr__(self) -> str:
        if self.is_zero():
            return "0"
        bits = []
        for i, row in enumerate(self.entries):
            for j, a in enumerate(row):
                if not a.is_zero():
                    bits.append(f"E[{i + 1},{j + 1}]({a})")
        return " + ".join(bits)


def end_commutator(u: EndJet, v: EndJet) -> EndJet:
    """Graded commutator u v - (-1)^{|u||v|} v u in total form degree."""
    du = u.total_form_degree()
    dv = v.total_form_degree()
    sign = -1 if (du % 2) and (dv % 2) else 1
    return u * v - (v * u).scale(sign)


class ConnectionForm:
    """y-independent one-form with matrix coefficients: sum_i K_i(x) dy^i."""

    def __init__(self, rank: int, dim: int,
                 coeffs: dict[int, tuple[tuple[PolyX, ...], ...]] | None = None):
        self.rank = rank
        self.dim = dim
        self.coeffs: dict[int, tuple[tuple[PolyX, ...], ...]] = {}
        if coeffs:
            for i, mat in coeffs.items():
                if not 0 <= i < dim:
                    raise ValueError(f"direction index {i} out of range")
                if len(mat) != rank or any(len(r) != rank for r in mat):
                    raise ValueError("coefficient matrix has wrong shape")
                if any(not p.is_zero() for r in mat for p in r):
                    self.coeffs[i] = mat

    @classmethod
    def zero(cls, rank: int, dim: int) -> ConnectionForm:
        return cls(rank, dim)

    def as_end_jet(self, order: int) -> EndJet:
        out = EndJet.zero(self.rank, self.dim, order)
        for i, mat in self.coeffs.items():
            dyi = FormJet.dy(self.dim, order, i)
            rows = tuple(
                tuple(dyi.scale(p) if not p.is_zero() else FormJet.zero(self.dim, order)
                      for p in row)
                for row in mat)
            out = out + EndJet(self.rank, rows)
        return out

    def is_zero(self) -> bool:
        return not self.coeffs


@dataclass(frozen=True)
class GammaForm:
    """Connection one-form on the matrix carrier solving the flatness
    fixed point; ``form`` is the full one-form (y-degree-0 part = base)."""

    form: EndJet
    base: EndJet
    fedosov: FedosovOperator

    @property
    def rank(self) -> int:
        return self.form.rank

    def tail(self) -> EndJet:
        """The y-degree >= 1 part produced by the iteration."""
        return self.form - self.base


def fedosov_on_end(F: FedosovOperator, u: EndJet) -> EndJet:
    """Entrywise flat differential."""
    return u.map(F.apply)


def build_gamma(F: FedosovOperator, base_form: ConnectionForm) -> GammaForm:
    """Iterate  gamma <- base + delta_inv(nabla gamma + A(gamma)
    + (1/2)[gamma, gamma])  in y-degree; one pass settles one degree."""
    order = F.order
    base = base_form.as_end_jet(order)
    gamma = base
    for _ in range(order + 1):
        sq = (gamma * gamma)  # (1/2)[gamma, gamma] for an odd one-form
        rhs = (gamma.map(lambda c: nabla(F.christoffel, c))
               + gamma.map(F.correction.apply) + sq)
        new = base + rhs.map(delta_inv).map(lambda c: c.y_slice_max(order))
        if new == gamma:
            break
        gamma = new
    return GammaForm(gamma, base, F)


def maurer_cartan_residual(gamma: GammaForm) -> EndJet:
    """D gamma + (1/2)[gamma, gamma], restricted to y-degree <= N_rep."""
    F = gamma.fedosov
    g = gamma.form
    full = fedosov_on_end(F, g) + g * g
    return full.y_slice_max(F.report_order)


def twisted_differential(gamma: GammaForm, u: EndJet) -> EndJet:
    """D u + [gamma, u] on matrix jets."""
    return fedosov_on_end(gamma.fedosov, u) + end_commutator(gamma.form, u)


def gauge_shift(gamma: GammaForm, shift: ConnectionForm) -> GammaForm:
    """Replace gamma by gamma + shift for a y-independent one-form shift."""
    if shift.rank != gamma.rank or shift.dim != gamma.form.dim:
        raise ValueError("shift shape mismatch")
    delta_end = shift.as_end_jet(gamma.form.order)
    if delta_end.max_y_degree() > 0:
        raise ValueError("gauge shift must not involve fiber coordinates")
    return GammaForm(gamma.form + delta_end, gamma.base + delta_end, gamma.fedosov)
