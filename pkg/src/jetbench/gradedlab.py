"""Finite-dimensional graded associative algebras and the exponential
conjugation identities.

The two statements verified here, for elements of a graded associative
algebra with a nilpotent degree-0 element ``a`` and degree-1 elements
``b``, ``c``, ``d``:

* If  [d,a] = b - c/2,  [b,a] = c,  [c,a] = 0,  then
  d exp(a) = exp(a) (d + b).

* exp(a) d = (d + b) exp(a)  holds if and only if
  [a,d] = b + sum_k alpha_k (ad_a)^k b,  where 1 + sum alpha_k x^k is the
  Taylor series of x/(e^x - 1).

Everything is exact over the rationals; series in ad_a terminate because a
is nilpotent.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from math import factorial

__all__ = [
    "GradedAlgebra",
    "GradedElement",
    "todd_coefficients",
    "exp_series_coefficients",
    "apply_ad_series",
    "exp_nilpotent",
    "graded_commutator",
    "check_lemma_relations",
    "check_lemma1",
    "check_prop1_forward",
    "check_prop1_reverse",
    "random_nilpotent_instance",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class GradedAlgebra:
    """Graded associative algebra given by structure constants.

    ``degrees[i]`` is the degree of basis element e_i and
    ``product[i][j]`` is the coefficient vector of e_i * e_j.
    Construction checks that the product respects the grading and is
    associative on all basis triples.
    """

    def __init__(self, degrees: list[int],
                 product: dict[tuple[int, int], dict[int, Fraction]]):
        self.n = len(degrees)
        self.degrees = list(degrees)
        self.product: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (i, j), vec in product.items():
            clean = {k: Fraction(c) for k, c in vec.items() if c}
            if clean:
                self.product[(i, j)] = clean
        self._audit()

    def _audit(self) -> None:
        for (i, j), vec in self.product.items():
            want = self.degrees[i] + self.degrees[j]
            for k in vec:
                if self.degrees[k] != want:
                    raise ValueError(
                        f"product e_{i} e_{j} hits e_{k} of degree "
                        f"{self.degrees[k]}, expected {want}")
        for i in range(self.n):
            for j in range(self.n):
                for k in range(self.n):
                    left = self._mul_vec(self._basis_mul(i, j), k)
                    right = self._vec_mul(i, self._basis_mul(j, k))
                    if left != right:
                        raise ValueError(f"not associative at triple ({i},{j},{k})")

    def _basis_mul(self, i: int, j: int) -> dict[int, Fraction]:
        return self.product.get((i, j), {})

    def _mul_vec(self, vec: dict[int, Fraction], k: int) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for m, c in vec.items():
            for r, c2 in self._basis_mul(m, k).items():
                s = out.get(r, ZERO) + c * c2
                if s:
                    out[r] = s
                else:
                    out.pop(r, None)
        return out

    def _vec_mul(self, i: int, vec: dict[int, Fraction]) -> dict[int, Fraction]:
        out: dict[int, Fraction] = {}
        for m, c in vec.items():
            for r, c2 in self._basis_mul(i, m).items():
                s = out.get(r, ZERO) + c * c2
                if s:
                    out[r] = s
                else:
                    out.pop(r, None)
        return out

    # -- element factory -----------------------------------------------------
    def zero(self) -> GradedElement:
        return GradedElement(self, {})

    def unit_like(self, coeffs: dict[int, Fraction]) -> GradedElement:
        return GradedElement(self, coeffs)

    def basis(self, i: int) -> GradedElement:
        return GradedElement(self, {i: ONE})

    @classmethod
    def matrix_algebra(cls, weights: list[int]) -> GradedAlgebra:
        """Full matrix algebra Mat_s graded by deg E_ij = w_j - w_i."""
        s = len(weights)
        degrees = []
        index = {}
        for i in range(s):
            for j in range(s):
                index[(i, j)] = len(degrees)
                degrees.append(weights[j] - weights[i])
        product: dict[tuple[int, int], dict[int, Fraction]] = {}
        for (i, j), a in index.items():
            for (k, l), b in index.items():
                if j == k:
                    product[(a, b)] = {index[(i, l)]: ONE}
        alg = cls(degrees, product)
        alg._mat_index = index  # type: ignore[attr-defined]
        alg._mat_size = s  # type: ignore[attr-defined]
        alg._unit = GradedElement(alg, {index[(i, i)]: ONE for i in range(s)})  # type: ignore[attr-defined]
        return alg

    @classmethod
    def strict_upper_algebra(cls, weights: list[int]) -> GradedAlgebra:
        """Unit plus the strictly upper-triangular matrix units E_ij (i < j)
        of Mat_s, graded by deg E_ij = w_j - w_i.  Small basis: 1 + s(s-1)/2.
        """
        s = len(weights)
        degrees = [0]
        index = {}
        for i in range(s):
            for j in range(i + 1, s):
                index[(i, j)] = len(degrees)
                degrees.append(weights[j] - weights[i])
        product: dict[tuple[int, int], dict[int, Fraction]] = {}
        n = len(degrees)
        for k in range(n):
            product[(0, k)] = {k: ONE}
            product[(k, 0)] = {k: ONE}
        for (i, j), a in index.items():
            for (k, l), b in index.items():
                if j == k:
                    product[(a, b)] = {index[(i, l)]: ONE}
        alg = cls(degrees, product)
        alg._mat_index = index  # type: ignore[attr-defined]
        alg._mat_size = s  # type: ignore[attr-defined]
        alg._unit = GradedElement(alg, {0: ONE})  # type: ignore[attr-defined]
        return alg


@dataclass(frozen=True)
class GradedElement:
    algebra: GradedAlgebra
    coeffs: dict[int, Fraction]

    def __post_init__(self):
        object.__setattr__(self, "coeffs",
                           {k: Fraction(c) for k, c in self.coeffs.items() if c})

    def degree(self) -> int | None:
        """Degree of a homogeneous element; None for zero."""
        degs = {self.algebra.degrees[k] for k in self.coeffs}
        if not degs:
            return None
        if len(degs) > 1:
            raise ValueError(f"inhomogeneous element of degrees {degs}")
        return degs.pop()

    def is_zero(self) -> bool:
        return not self.coeffs

    def __add__(self, other: GradedElement) -> GradedElement:
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            s = out.get(k, ZERO) + c
            if s:
                out[k] = s
            else:
                out.pop(k, None)
        return GradedElement(self.algebra, out)

    def __neg__(self) -> GradedElement:
        return GradedElement(self.algebra, {k: -c for k, c in self.coeffs.items()})

    def __sub__(self, other: GradedElement) -> GradedElement:
        return self + (-other)

    def scale(self, s) -> GradedElement:
        c = Fraction(s)
        return GradedElement(self.algebra, {k: v * c for k, v in self.coeffs.items()})

    def __mul__(self, other: GradedElement) -> GradedElement:
        alg = self.algebra
        out: dict[int, Fraction] = {}
        for i, c1 in self.coeffs.items():
            for j, c2 in other.coeffs.items():
                for k, c in alg._basis_mul(i, j).items():
                    s = out.get(k, ZERO) + c1 * c2 * c
                    if s:
                        out[k] = s
                    else:
                        out.pop(k, None)
        return GradedElement(alg, out)

    def __repr__(self) -> str:
        if not self.coeffs:
            return "0"
        return " + ".join(f"{c}*e{k}" for k, c in sorted(self.coeffs.items()))


def graded_commutator(u: GradedElement, v: GradedElement) -> GradedElement:
    """[u, v] = u v - (-1)^{|u||v|} v u for homogeneous u, v."""
    du = u.degree()
    dv = v.degree()
    if du is None or dv is None:
        return u.algebra.zero() if du is None else v.algebra.zero()
    sign = -1 if (du % 2) and (dv % 2) else 1
    return u * v - (v * u).scale(sign)


def exp_nilpotent(a: GradedElement) -> GradedElement:
    """exp(a) = sum a^k / k! for nilpotent degree-0 a; exact."""
    if not a.is_zero() and a.degree() != 0:
        raise ValueError("exp is defined here for degree-0 elements only")
    alg = a.algebra
    # unit of the algebra: needed explicitly
    unit = _find_unit(alg)
    out = unit
    power = unit
    k = 0
    while True:
        k += 1
        power = power * a
        if power.is_zero():
            return out
        if k > alg.n + 1:
            raise ValueError("element does not appear to be nilpotent")
        out = out + power.scale(Fraction(1, factorial(k)))


def _find_unit(alg: GradedAlgebra) -> GradedElement:
    """The two-sided unit, cached on the algebra (matrix algebras have one)."""
    cached = getattr(alg, "_unit", None)
    if cached is not None:
        return cached
    idx = getattr(alg, "_mat_index", None)
    if idx is None:
        raise ValueError("algebra has no registered unit")
    s = alg._mat_size  # type: ignore[attr-defined]
    unit = GradedElement(alg, {idx[(i, i)]: ONE for i in range(s)})
    alg._unit = unit  # type: ignore[attr-defined]
    return unit


def todd_coefficients(count: int) -> tuple[Fraction, ...]:
    """Coefficients alpha_1..alpha_count of x/(e^x - 1) = 1 + sum alpha_k x^k.

    Computed by exact power-series inversion of (e^x - 1)/x.
    """
    if count < 1:
        raise ValueError("need count >= 1")
    g = [Fraction(1, factorial(k + 1)) for k in range(count + 1)]  # (e^x-1)/x
    f = [ONE] + [ZERO] * count
    for m in range(1, count + 1):
        acc = ZERO
        for i in range(1, m + 1):
            acc += g[i] * f[m - i]
        f[m] = -acc
    return tuple(f[1:])


def exp_series_coefficients(count: int) -> tuple[Fraction, ...]:
    """Coefficients g_1..g_count of (e^x - 1)/x = 1 + sum g_k x^k."""
    return tuple(Fraction(1, factorial(k + 1)) for k in range(1, count + 1))


def _ad(a: GradedElement, x: GradedElement) -> GradedElement:
    return graded_commutator(a, x)


def apply_ad_series(coeffs, a: GradedElement, b: GradedElement) -> GradedElement:
    """b + sum_k coeffs[k-1] * ad_a^k(b); requires the series to outlast ad_a.

    Raises if ad_a^k(b) is still nonzero when the coefficients run out.
    """
    out = b
    term = b
    for k, c in enumerate(coeffs, start=1):
        term = _ad(a, term)
        if term.is_zero():
            return out
        out = out + term.scale(c)
    if not _ad(a, term).is_zero():
        raise ValueError("series too short for the nilpotency order of ad_a")
    return out


def ad_nilpotency_order(a: GradedElement, b: GradedElement, cap: int = 64) -> int:
    """Smallest m with ad_a^m(b) = 0."""
    term = b
    for m in range(cap):
        if term.is_zero():
            return m
        term = _ad(a, term)
    raise ValueError("ad_a does not annihilate b within the cap")


def check_lemma_relations(a, b, c, d) -> list[str]:
    """Return the list of violated hypotheses (empty when all hold)."""
    bad = []
    if not a.is_zero() and a.degree() != 0:
        bad.append("deg a != 0")
    for name, el in (("b", b), ("c", c), ("d", d)):
        if not el.is_zero() and el.degree() != 1:
            bad.append(f"deg {name} != 1")
    if not (graded_commutator(d, a) - (b - c.scale(Fraction(1, 2)))).is_zero():
        bad.append("[d,a] != b - c/2")
    if not (graded_commutator(b, a) - c).is_zero():
        bad.append("[b,a] != c")
    if not graded_commutator(c, a).is_zero():
        bad.append("[c,a] != 0")
    return bad


def check_lemma1(a, b, c, d) -> GradedElement:
    """Residual d exp(a) - exp(a)(d + b); zero whenever the relations hold."""
    bad = check_lemma_relations(a, b, c, d)
    if bad:
        raise ValueError("hypotheses violated: " + "; ".join(bad))
    e = exp_nilpotent(a)
    return d * e - e * (d + b)


def check_prop1_forward(a: GradedElement, d: GradedElement) -> GradedElement:
    """Build b := g(ad_a)([a,d]) with g(x) = (e^x-1)/x; return the residual
    exp(a) d - (d + b) exp(a)."""
    if not a.is_zero() and a.degree() != 0:
        raise ValueError("deg a != 0")
    if not d.is_zero() and d.degree() != 1:
        raise ValueError("deg d != 1")
    ad = graded_commutator(a, d)
    order = ad_nilpotency_order(a, ad)
    g = exp_series_coefficients(max(order, 1))
    b = apply_ad_series(g, a, ad)
    e = exp_nilpotent(a)
    return e * d - (d + b) * e


def check_prop1_reverse(a: GradedElement, d: GradedElement) -> GradedElement:
    """Build b := exp(a) d exp(-a) - d; return the residual
    [a,d] - (b + sum alpha_k ad_a^k b)."""
    if not a.is_zero() and a.degree() != 0:
        raise ValueError("deg a != 0")
    if not d.is_zero() and d.degree() != 1:
        raise ValueError("deg d != 1")
    e = exp_nilpotent(a)
    einv = exp_nilpotent(-a)
    b = e * d * einv - d
    order = ad_nilpotency_order(a, b)
    alphas = todd_coefficients(max(order, 1))
    return graded_commutator(a, d) - apply_ad_series(alphas, a, b)


def conjugation_b(a: GradedElement, d: GradedElement) -> GradedElement:
    """The unique b with exp(a) d = (d+b) exp(a): exp(a) d exp(-a) - d."""
    e = exp_nilpotent(a)
    return e * d * exp_nilpotent(-a) - d


def random_nilpotent_instance(seed: int, size: int, nilpotency_bound: int = 3
                              ) -> tuple[GradedAlgebra, GradedElement, GradedElement]:
    """Deterministic test instance: a graded algebra of block upper-triangular
    shape with a degree-0 nilpotent ``a`` satisfying ad_a^bound = 0 and a
    degree-1 element ``d``.

    The carrier is the strictly upper-triangular algebra of Mat_size plus a
    unit (basis 1 + size(size-1)/2), graded by a 0/1 weight vector.  ``a``
    lives on level -> level+1 pairs inside the degree-0 blocks, which bounds
    its nilpotency order by ceil((bound+1)/2) and hence ad_a^bound = 0.
    """
    if size < 2:
        raise ValueError("size >= 2 required")
    rng = random.Random(seed)
    cut = rng.randrange(1, size)
    weights = [0] * cut + [1] * (size - cut)
    alg = GradedAlgebra.strict_upper_algebra(weights)
    idx = alg._mat_index  # type: ignore[attr-defined]

    depth = max(1, (nilpotency_bound + 1) // 2)
    coeffs: dict[int, Fraction] = {}
    for block in (list(range(cut)), list(range(cut, size))):
        if len(block) < 2:
            continue
        levels = {pos: (t * depth) // len(block) for t, pos in enumerate(block)}
        for i in block:
            for j in block:
                if i < j and levels[j] == levels[i] + 1 and rng.random() < 0.85:
                    coeffs[idx[(i, j)]] = Fraction(rng.randint(-3, 3) or 1)
    a = GradedElement(alg, coeffs)

    dcoeffs: dict[int, Fraction] = {}
    for i in range(cut):
        for j in range(cut, size):
            if rng.random() < 0.85:
                dcoeffs[idx[(i, j)]] = Fraction(rng.randint(-3, 3) or 1)
    d = GradedElement(alg, dcoeffs)
    return alg, a, d
