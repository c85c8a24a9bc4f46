"""Fedosov calculus on the truncated jet algebra.

Operators on :class:`~jetbench.exactcore.FormJet`:

* ``delta``      -- the fiberwise de Rham differential dy^i d/dy^i,
* ``delta_inv``  -- its contracting homotopy (y^k against dy^k, weighted by
                    1/(y-degree + dy-degree)),
* ``sigma``      -- projection onto the y-degree-0, dy-degree-0 part,
* ``nabla``      -- a torsion-free connection dy^i d/dx^i - dy^i G^k_ij y^j d/dy^k,
* ``curvature``  -- the fiberwise vector-field-valued 2-form R with
                    nabla o nabla = (action of R),
* ``solve_correction`` -- the recursion producing the y-degree >= 2 correction
                    A that makes D = nabla - delta + A square to zero,
* ``solve_correction_linear`` -- an independent degree-by-degree linear-solve
                    oracle for the same A (generic Gaussian elimination; no
                    use of the homotopy's closed form).

The homotopy identity u = sigma(u) + delta(delta_inv u) + delta_inv(delta u)
holds exactly on every monomial; ``delta_inv`` may create y-degree N+1 terms
on top-degree input, which the carrier tolerates (the product truncates, the
homotopy does not).

Derivation identities involving D hold on y-degree <= N_rep (default N - 2):
the recursion determines A so that D*D vanishes there, and each identity
composes at most two truncating stages.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from .exactcore import FormJet, PolyX, monomial_basis

__all__ = [
    "ChristoffelData",
    "FiberVectorFieldForm",
    "FedosovOperator",
    "delta",
    "delta_inv",
    "sigma",
    "nabla",
    "curvature",
    "solve_correction",
    "solve_correction_linear",
    "build_fedosov",
]

ZERO = Fraction(0)
ONE = Fraction(1)


class ChristoffelData:
    """Christoffel symbols G^k_ij(x) of a torsion-free connection.

    Entries are PolyX, symmetric in the lower pair (i, j); missing entries
    are zero.  Indices are 0-based.
    """

    def __init__(self, dim: int, entries: dict[tuple[int, int, int], PolyX] | None = None):
        self.dim = dim
        self.entries: dict[tuple[int, int, int], PolyX] = {}
        if entries:
            for (k, i, j), p in entries.items():
                if not all(0 <= t < dim for t in (k, i, j)):
                    raise ValueError(f"index out of range in ({k},{i},{j})")
                if p.is_zero():
                    continue
                mirror = self.entries.get((k, j, i))
                if mirror is not None and mirror != p:
                    raise ValueError(
                        f"asymmetric Christoffel data at ({k},{i},{j})")
                self.entries[(k, i, j)] = p
                self.entries[(k, j, i)] = p

    @classmethod
    def flat(cls, dim: int) -> ChristoffelData:
        return cls(dim)

    def get(self, k: int, i: int, j: int) -> PolyX:
        return self.entries.get((k, i, j), PolyX.zero(self.dim))

    def is_flat(self) -> bool:
        return not self.entries

    def items(self):
        return self.entries.items()


def delta(u: FormJet) -> FormJet:
    """dy^i d/dy^i: lowers y-degree, raises dy-degree."""
    out = FormJet.zero(u.dim, u.order)
    for i in range(u.dim):
        dui = u.diff_y(i)
        if not dui.is_zero():
            out = out + FormJet.dy(u.dim, u.order, i) * dui
    return out


def delta_inv(u: FormJet) -> FormJet:
    """Contracting homotopy for delta.

    On a monomial of y-degree p and dy-degree q > 0 it contracts each dy^k
    into y^k (left derivative) and scales by 1/(p+q); it kills dy-degree-0
    terms.  Exact: no truncation, so the homotopy identity holds on the
    whole basis including top y-degree.
    """
    d, n = u.dim, u.order
    out: dict = {}
    for (e, dxm, dym), poly in u.terms.items():
        q = bin(dym).count("1")
        if q == 0:
            continue
        p = sum(e)
        w = Fraction(1, p + q)
        b = dym
        while b:
            low = b & -b
            k = low.bit_length() - 1
            b ^= low
            crossings = bin(dxm).count("1") + bin(dym & (low - 1)).count("1")
            sign = -w if crossings % 2 else w
            e2 = list(e)
            e2[k] += 1
            key = (tuple(e2), dxm, dym ^ low)
            q2 = poly * sign
            prev = out.get(key)
            s = q2 if prev is None else prev + q2
            if s.is_zero():
                out.pop(key, None)
            else:
                out[key] = s
    return FormJet(d, n, out)


def sigma(u: FormJet) -> FormJet:
    """Projection onto terms with y-degree 0 and dy-degree 0."""
    return FormJet(u.dim, u.order,
                   {k: p for k, p in u.terms.items()
                    if not any(k[0]) and k[2] == 0})


def nabla(gamma: ChristoffelData, u: FormJet) -> FormJet:
    """dy^i d/dx^i - dy^i G^k_ij y^j d/dy^k, truncated at the jet order."""
    d, n = u.dim, u.order
    out = FormJet.zero(d, n)
    for i in range(d):
        dui = u.diff_x(i)
        if not dui.is_zero():
            out = out + FormJet.dy(d, n, i) * dui
    for (k, i, j), g in gamma.items():
        duk = u.diff_y(k)
        if duk.is_zero():
            continue
        e = [0] * d
        e[j] = 1
        factor = FormJet(d, n, {(tuple(e), 0, 1 << i): -g})
        out = out + factor * duk
    return out


@dataclass(frozen=True)
class FiberVectorFieldForm:
    """Form-valued fiberwise vector field: component[j] is the coefficient
    FormJet of d/dy^{j+1}."""

    dim: int
    order: int
    components: tuple[FormJet, ...]

    def __post_init__(self):
        if len(self.components) != self.dim:
            raise ValueError("one component per fiber direction required")

    @classmethod
    def zero(cls, dim: int, order: int) -> FiberVectorFieldForm:
        return cls(dim, order, tuple(FormJet.zero(dim, order) for _ in range(dim)))

    def apply(self, u: FormJet) -> FormJet:
        """Action as a derivation: sum_j component[j] * du/dy^j."""
        out = FormJet.zero(self.dim, self.order)
        for j, comp in enumerate(self.components):
            if comp.is_zero():
                continue
            duj = u.diff_y(j)
            if not duj.is_zero():
                out = out + comp * duj
        return out

    def __add__(self, other: FiberVectorFieldForm) -> FiberVectorFieldForm:
        return FiberVectorFieldForm(
            self.dim, self.order,
            tuple(a + b for a, b in zip(self.components, other.components)))

    def __sub__(self, other: FiberVectorFieldForm) -> FiberVectorFieldForm:
        return FiberVectorFieldForm(
            self.dim, self.order,
            tuple(a - b for a, b in zip(self.components, other.components)))

    def map(self, f: Callable[[FormJet], FormJet]) -> FiberVectorFieldForm:
        return FiberVectorFieldForm(self.dim, self.order,
                                    tuple(f(c) for c in self.components))

    def y_slice_max(self, m: int) -> FiberVectorFieldForm:
        return self.map(lambda c: c.y_slice_max(m))

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.components)

    def max_y_degree(self) -> int:
        return max((c.max_y_degree() for c in self.components if not c.is_zero()),
                   default=0)


def _gamma_hat(gamma: ChristoffelData, order: int) -> FiberVectorFieldForm:
    """The connection part as a vector-field form: component k is
    dy^i G^k_ij y^j."""
    d = gamma.dim
    comps = [FormJet.zero(d, order) for _ in range(d)]
    for (k, i, j), g in gamma.items():
        e = [0] * d
        e[j] = 1
        comps[k] = comps[k] + FormJet(d, order, {(tuple(e), 0, 1 << i): g})
    return FiberVectorFieldForm(d, order, tuple(comps))


def vf_d_base(v: FiberVectorFieldForm) -> FiberVectorFieldForm:
    """Componentwise dy^i d/dx^i."""
    d, n = v.dim, v.order

    def dbase(c: FormJet) -> FormJet:
        out = FormJet.zero(d, n)
        for i in range(d):
            ci = c.diff_x(i)
            if not ci.is_zero():
                out = out + FormJet.dy(d, n, i) * ci
        return out

    return v.map(dbase)


def vf_bracket(v: FiberVectorFieldForm, w: FiberVectorFieldForm,
               sign: int) -> FiberVectorFieldForm:
    """[v, w]^j = sum_k v^k d(w^j)/dy^k - sign * w^k d(v^j)/dy^k.

    ``sign`` is (-1)^{|v||w|} for the graded commutator of the derivations.
    """
    d, n = v.dim, v.order
    comps = []
    for j in range(d):
        acc = FormJet.zero(d, n)
        for k in range(d):
            if not v.components[k].is_zero():
                t = w.components[j].diff_y(k)
                if not t.is_zero():
                    acc = acc + v.components[k] * t
            if not w.components[k].is_zero():
                t = v.components[j].diff_y(k)
                if not t.is_zero():
                    acc = acc - (w.components[k] * t).scale(sign)
        comps.append(acc)
    return FiberVectorFieldForm(d, n, tuple(comps))


def vf_nabla(gamma: ChristoffelData, v: FiberVectorFieldForm) -> FiberVectorFieldForm:
    """Covariant derivative on vector-field forms:
    d_base(v) - [gamma_hat, v] (both arguments odd here)."""
    gh = _gamma_hat(gamma, v.order)
    return vf_d_base(v) - vf_bracket(gh, v, -1)


def vf_delta(v: FiberVectorFieldForm) -> FiberVectorFieldForm:
    return v.map(delta)


def vf_delta_inv(v: FiberVectorFieldForm) -> FiberVectorFieldForm:
    return v.map(delta_inv)


def curvature(gamma: ChristoffelData) -> FiberVectorFieldForm:
    """The dy-2-form-valued fiberwise vector field R with nabla^2 = R-action.

    Component k:  sum_{a<b, j} (d_a G^k_bj - d_b G^k_aj
                                + G^m_aj G^k_bm - G^m_bj G^k_am) y^j dy^a dy^b
    with the overall orientation pinned by the executable contract
    nabla(nabla(u)) = R.apply(u).
    """
    d = gamma.dim
    order_probe = 2  # any order; components have y-degree exactly 1
    return _curvature_at(gamma, order_probe)


def _curvature_at(gamma: ChristoffelData, order: int) -> FiberVectorFieldForm:
    d = gamma.dim
    comps = [FormJet.zero(d, order) for _ in range(d)]
    for k in range(d):
        acc = FormJet.zero(d, order)
        for a in range(d):
            for b in range(a + 1, d):
                for j in range(d):
                    coeff = (-gamma.get(k, b, j).diff(a)
                             + gamma.get(k, a, j).diff(b))
                    for m in range(d):
                        coeff = coeff + gamma.get(m, a, j) * gamma.get(k, b, m)
                        coeff = coeff - gamma.get(m, b, j) * gamma.get(k, a, m)
                    if coeff.is_zero():
                        continue
                    e = [0] * d
                    e[j] = 1
                    acc = acc + FormJet(d, order,
                                        {(tuple(e), 0, (1 << a) | (1 << b)): coeff})
        comps[k] = acc
    return FiberVectorFieldForm(d, order, tuple(comps))


def flatness_defect(gamma: ChristoffelData, corr: FiberVectorFieldForm
                    ) -> FiberVectorFieldForm:
    """R + nabla(A) - delta(A) + (1/2)[A, A] as a vector-field form.

    D*D equals the action of this defect; the recursion drives its components
    to zero through y-degree N-1.
    """
    r = _curvature_at(gamma, corr.order)
    half_sq = vf_bracket(corr, corr, -1).map(lambda c: c.scale(Fraction(1, 2)))
    return r + vf_nabla(gamma, corr) - vf_delta(corr) + half_sq


def solve_correction(gamma: ChristoffelData, order: int) -> FiberVectorFieldForm:
    """Fixed point of  A <- delta_inv(R + nabla(A) + (1/2)[A,A])  in y-degree.

    Components of A have y-degree >= 2 and dy-degree 1, and delta_inv(A) = 0.
    Each pass determines one more y-degree; degree m is stable after pass
    m - 1, so `order` passes suffice.
    """
    if order < 2:
        raise ValueError("jet order must be >= 2 for the correction")
    d = gamma.dim
    r = _curvature_at(gamma, order)
    corr = FiberVectorFieldForm.zero(d, order)
    for _ in range(order):
        half_sq = vf_bracket(corr, corr, -1).map(lambda c: c.scale(Fraction(1, 2)))
        rhs = r + vf_nabla(gamma, corr) + half_sq
        new = vf_delta_inv(rhs).map(lambda c: c.y_slice_max(order))
        if new.components == corr.components:
            break
        corr = new
    return corr


# ----------------------------------------------------------------------
# independent oracle: degree-by-degree linear solve
# ----------------------------------------------------------------------

def _gauss_solve(rows: list[tuple[dict[int, Fraction], Fraction]],
                 nvars: int) -> list[Fraction]:
    """Solve a consistent exact linear system with a unique solution.

    rows: (sparse coefficient map, rhs).  Raises on inconsistency or
    underdetermined variables.
    """
    mat = [(dict(r), Fraction(q)) for r, q in rows]
    pivots: dict[int, tuple[dict[int, Fraction], Fraction]] = {}
    for row, rhs in mat:
        row = dict(row)
        while True:
            row = {c: v for c, v in row.items() if v}
            if not row:
                if rhs:
                    raise ValueError("inconsistent linear system")
                break
            piv = min(row)
            if piv in pivots:
                prow, prhs = pivots[piv]
                f = row[piv]
                for c, v in prow.items():
                    row[c] = row.get(c, ZERO) - f * v
                rhs = rhs - f * prhs
            else:
                f = row[piv]
                row = {c: v / f for c, v in row.items()}
                rhs = rhs / f
                pivots[piv] = (row, rhs)
                break
    sol = [ZERO] * nvars
    for piv in sorted(pivots, reverse=True):
        row, rhs = pivots[piv]
        acc = rhs
        for c, v in row.items():
            if c != piv:
                acc -= v * sol[c]
        sol[piv] = acc
    missing = [v for v in range(nvars) if v not in pivots]
    if missing:
        raise ValueError(f"underdetermined variables {missing}")
    return sol


def solve_correction_linear(gamma: ChristoffelData, order: int
                            ) -> FiberVectorFieldForm:
    """Degree-by-degree linear-solve oracle for the flatness correction.

    For each y-degree m >= 2, solves
        delta(A_m) = [R + nabla(A_{<m}) + (1/2)[A_{<m}, A_{<m}]]_{m-1},
        delta_inv(A_m) = 0
    for the unknown rational coefficients of A_m by Gaussian elimination,
    per x-monomial slice (delta and delta_inv are PolyX-linear).  Never uses
    the closed-form homotopy to construct the solution.
    """
    if order < 2:
        raise ValueError("jet order must be >= 2 for the correction")
    d = gamma.dim
    r = _curvature_at(gamma, order)
    corr = FiberVectorFieldForm.zero(d, order)

    for m in range(2, order + 1):
        half_sq = vf_bracket(corr, corr, -1).map(lambda c: c.scale(Fraction(1, 2)))
        rhs_vf = (r + vf_nabla(gamma, corr) + half_sq).map(
            lambda c: c.y_component(m - 1))

        # unknowns: coefficient of x^mu y^alpha dy^i in component j
        ys = monomial_basis(d, m)
        ys = [e for e in ys if sum(e) == m]
        xmus = sorted({mu for comp in rhs_vf.components
                       for p in comp.terms.values() for mu in p.terms},
                      key=lambda t: (sum(t), t))
        if not xmus:
            xmus = [(0,) * d]
        var_index: dict[tuple[int, tuple[int, ...], int, tuple[int, ...]], int] = {}
        for j in range(d):
            for alpha in ys:
                for i in range(d):
                    for mu in xmus:
                        var_index[(j, alpha, i, mu)] = len(var_index)

        rows: list[tuple[dict[int, Fraction], Fraction]] = []

        # delta(A_m)^j = rhs^j: match coefficients of x^mu y^beta dy^a dy^b
        for j in range(d):
            targets: dict[tuple[tuple[int, ...], int, tuple[int, ...]], Fraction] = {}
            comp = rhs_vf.components[j]
            for (e, dxm, dym), p in comp.terms.items():
                if dxm:
                    raise ValueError("unexpected dx content in flatness data")
                for mu, c in p.terms.items():
                    targets[(e, dym, mu)] = c
            # delta of unknown monomial y^alpha dy^i: sum_k alpha_k
            #   (sign) y^{alpha - e_k} dy^k dy^i
            coeffs: dict[tuple[tuple[int, ...], int, tuple[int, ...]],
                         dict[int, Fraction]] = {}
            for alpha in ys:
                for i in range(d):
                    for mu in xmus:
                        var = var_index[(j, alpha, i, mu)]
                        for k in range(d):
                            if not alpha[k] or k == i:
                                continue
                            beta = list(alpha)
                            beta[k] -= 1
                            dym = (1 << k) | (1 << i)
                            # dy^k * dy^i in canonical order: sign -1 if k > i
                            sign = ONE if k < i else -ONE
                            key = (tuple(beta), dym, mu)
                            c = coeffs.setdefault(key, {})
                            c[var] = c.get(var, ZERO) + sign * alpha[k]
            keys = set(coeffs) | set(targets)
            for key in sorted(keys):
                rows.append((coeffs.get(key, {}), targets.get(key, ZERO)))

        # normalization delta_inv(A_m) = 0:
        #   y^alpha dy^i -> y^{alpha+e_i} / (m+1); one row per (j, gamma, mu)
        for j in range(d):
            norm: dict[tuple[tuple[int, ...], tuple[int, ...]], dict[int, Fraction]] = {}
            for alpha in ys:
                for i in range(d):
                    g = list(alpha)
                    g[i] += 1
                    for mu in xmus:
                        var = var_index[(j, alpha, i, mu)]
                        c = norm.setdefault((tuple(g), mu), {})
                        c[var] = c.get(var, ZERO) + ONE
            for key in sorted(norm):
                rows.append((norm[key], ZERO))

        sol = _gauss_solve(rows, len(var_index))
        comps = list(corr.components)
        for (j, alpha, i, mu), var in var_index.items():
            v = sol[var]
            if v:
                comps[j] = comps[j] + FormJet(
                    d, order, {(alpha, 0, 1 << i): PolyX(d, {mu: v})})
        corr = FiberVectorFieldForm(d, order, tuple(comps))
    return corr


@dataclass(frozen=True)
class FedosovOperator:
    """The flat differential D = nabla - delta + A on form jets."""

    christoffel: ChristoffelData
    correction: FiberVectorFieldForm
    order: int
    report_order: int

    def apply(self, u: FormJet) -> FormJet:
        if u.order != self.order:
            raise ValueError("jet order mismatch")
        return (nabla(self.christoffel, u) - delta(u)
                + self.correction.apply(u))

    def pieces(self) -> list[tuple[FormJet, tuple[int, ...] | None, str, int]]:
        """Decomposition D = sum omega * (y^beta d/dt) used to extend D to
        chains and cochains.

        Each entry is (omega, beta, kind, index): omega is an odd pullable
        coefficient of y-degree 0, and the operator part is
        y^beta d/dy^index (kind 'y') or d/dx^index (kind 'x', beta None).
        """
        d, n = self.christoffel.dim, self.order
        out: list[tuple[FormJet, tuple[int, ...] | None, str, int]] = []
        for i in range(d):
            out.append((FormJet.dy(d, n, i), None, "x", i))
        for (k, i, j), g in self.christoffel.items():
            e = [0] * d
            e[j] = 1
            out.append((FormJet(d, n, {((0,) * d, 0, 1 << i): -g}),
                        tuple(e), "y", k))
        for i in range(d):
            out.append((FormJet.dy(d, n, i).scale(-1), (0,) * d, "y", i))
        for j, comp in enumerate(self.correction.components):
            for (e, dxm, dym), p in comp.terms.items():
                out.append((FormJet(d, n, {((0,) * d, dxm, dym): p}),
                            e, "y", j))
        return out


def build_fedosov(gamma: ChristoffelData, order: int,
                  report_order: int | None = None,
                  use_linear_oracle: bool = False) -> FedosovOperator:
    """Construct the flat differential at the given jet order."""
    if report_order is None:
        report_order = max(order - 2, 1)
    if not 1 <= report_order <= order - 1:
        raise ValueError("need 1 <= report_order <= order - 1")
    solver = solve_correction_linear if use_linear_oracle else solve_correction
    corr = solver(gamma, order)
    return FedosovOperator(gamma, corr, order, report_order)
