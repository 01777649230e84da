"""Vector fields, differential forms, and exact linear algebra over the
rational function field on a single global chart.

Rank semantics are generic: a rank is computed over the field of rational
functions, i.e. off the measure-zero locus where pivots vanish.  Pivoting
always selects the first entry that is not identically zero, so every
derived basis is deterministic, and the reduced echelon basis of a span is
canonical (two equal spans reduce to the identical basis).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import ChartMismatch
from .exprs import ONE, ZERO, Scalar


@dataclass(frozen=True)
class Chart:
    """Ordered coordinate names; the order defines coefficient indexing."""

    names: tuple

    def __post_init__(self):
        if len(set(self.names)) != len(self.names):
            raise ValueError(f"duplicate chart variables: {self.names}")

    @property
    def dim(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def __str__(self) -> str:
        return "(" + ", ".join(self.names) + ")"


def _require_same_chart(a, b):
    if a.chart != b.chart:
        raise ChartMismatch(f"charts differ: {a.chart} vs {b.chart}")


class VectorField:
    """Coordinate-indexed coefficients along the partial derivatives."""

    __slots__ = ("chart", "coeffs")

    def __init__(self, chart: Chart, coeffs: Sequence[Scalar]):
        if len(coeffs) != chart.dim:
            raise ValueError("coefficient count does not match chart dimension")
        self.chart = chart
        self.coeffs = tuple(Scalar.of(c) for c in coeffs)

    @classmethod
    def unit(cls, chart: Chart, name: str) -> "VectorField":
        i = chart.index(name)
        return cls(chart, [ONE if j == i else ZERO for j in range(chart.dim)])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, VectorField)
                and self.chart == other.chart and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.chart, self.coeffs))

    def __str__(self) -> str:
        return _combo_str(self.chart, self.coeffs, "d/d")

    __repr__ = __str__


class OneForm:
    """Coordinate-indexed coefficients along the coordinate differentials."""

    __slots__ = ("chart", "coeffs")

    def __init__(self, chart: Chart, coeffs: Sequence[Scalar]):
        if len(coeffs) != chart.dim:
            raise ValueError("coefficient count does not match chart dimension")
        self.chart = chart
        self.coeffs = tuple(Scalar.of(c) for c in coeffs)

    @classmethod
    def unit(cls, chart: Chart, name: str) -> "OneForm":
        i = chart.index(name)
        return cls(chart, [ONE if j == i else ZERO for j in range(chart.dim)])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __eq__(self, other) -> bool:
        return (isinstance(other, OneForm)
                and self.chart == other.chart and self.coeffs == other.coeffs)

    def __hash__(self):
        return hash((self.chart, self.coeffs))

    def __str__(self) -> str:
        return _combo_str(self.chart, self.coeffs, "d")

    __repr__ = __str__


class TwoForm:
    """Antisymmetric matrix of coefficients; entry(i, j) is the component
    on dx^i wedge dx^j for i < j."""

    __slots__ = ("chart", "upper")

    def __init__(self, chart: Chart, upper: dict):
        self.chart = chart
        self.upper = {k: v for k, v in upper.items() if not v.is_zero()}

    def entry(self, i: int, j: int) -> Scalar:
        if i == j:
            return ZERO
        if i < j:
            return self.upper.get((i, j), ZERO)
        return -self.upper.get((j, i), ZERO)

    def is_zero(self) -> bool:
        return not self.upper

    def __str__(self) -> str:
        if not self.upper:
            return "0"
        names = self.chart.names
        parts = []
        for (i, j) in sorted(self.upper):
            parts.append(f"{_coeff_str(self.upper[(i, j)])}"
                         f"d{names[i]}^d{names[j]}")
        return " + ".join(parts)

    __repr__ = __str__


def _coeff_str(c: Scalar) -> str:
    if c == ONE:
        return ""
    if c == Scalar(-1):
        return "-"
    s = str(c)
    if " " in s or "/" in s or s.startswith("-"):
        s = f"({s})"
    return s + "*"


def _combo_str(chart: Chart, coeffs, prefix: str) -> str:
    parts = []
    for name, c in zip(chart.names, coeffs):
        if c.is_zero():
            continue
        parts.append(f"{_coeff_str(c)}{prefix}{name}")
    return " + ".join(parts) if parts else "0"


# ---------------------------------------------------- exact linear algebra

def rref(rows: Iterable[Sequence[Scalar]]) -> tuple:
    """Reduced row echelon form over the rational function field.

    Returns (reduced_rows, pivot_columns).  Zero rows are dropped.  The
    pivot in each column is the first row whose entry is not identically
    zero; pivots are normalized to 1 and cleared above and below, so the
    result is the canonical basis of the row span.
    """
    work = [list(r) for r in rows]
    if not work:
        return [], []
    ncols = len(work[0])
    pivots = []
    prow = 0
    for col in range(ncols):
        sel = None
        for r in range(prow, len(work)):
            if not work[r][col].is_zero():
                sel = r
                break
        if sel is None:
            continue
        work[prow], work[sel] = work[sel], work[prow]
        piv = work[prow][col]
        if piv != ONE:
            work[prow] = [c / piv for c in work[prow]]
        for r in range(len(work)):
            if r == prow:
                continue
            factor = work[r][col]
            if factor.is_zero():
                continue
            work[r] = [a - factor * b for a, b in zip(work[r], work[prow])]
        pivots.append(col)
        prow += 1
        if prow == len(work):
            break
    return work[:prow], pivots


def generic_rank(rows: Iterable[Sequence[Scalar]]) -> int:
    """Rank over the field of rational functions."""
    return len(rref(rows)[0])


def nullspace(rows: Iterable[Sequence[Scalar]]) -> list:
    """Basis of the right kernel, one vector per free column, ordered by
    free column index."""
    work = [list(r) for r in rows]
    if not work:
        return []
    ncols = len(work[0])
    red, pivots = rref(work)
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free:
        vec = [ZERO] * ncols
        vec[fc] = ONE
        for prow, pcol in enumerate(pivots):
            vec[pcol] = -red[prow][fc]
        basis.append(vec)
    return basis


# ---------------------------------------------------------- span carriers

class Distribution:
    """Span of vector fields with a generically independent basis."""

    __slots__ = ("chart", "basis")

    def __init__(self, chart: Chart, basis: Sequence[VectorField]):
        basis = list(basis)
        for v in basis:
            if v.chart != chart:
                raise ChartMismatch("basis field on a different chart")
        if basis and generic_rank([v.coeffs for v in basis]) != len(basis):
            raise ValueError("basis fields are generically dependent")
        self.chart = chart
        self.basis = tuple(basis)

    @classmethod
    def span(cls, chart: Chart, fields: Sequence[VectorField]) -> "Distribution":
        """Reduce an arbitrary generating set to the canonical basis."""
        rows, _ = rref([v.coeffs for v in fields])
        return cls(chart, [VectorField(chart, r) for r in rows])

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, v: VectorField) -> bool:
        _require_same_chart(self, v)
        if v.is_zero():
            return True
        if not self.basis:
            return False
        rows = [w.coeffs for w in self.basis]
        return generic_rank(list(rows) + [v.coeffs]) == len(self.basis)

    def __str__(self) -> str:
        return "span{" + ", ".join(str(v) for v in self.basis) + "}"

    __repr__ = __str__


class Codistribution:
    """Span of 1-forms with a generically independent basis."""

    __slots__ = ("chart", "basis")

    def __init__(self, chart: Chart, basis: Sequence[OneForm]):
        basis = list(basis)
        for w in basis:
            if w.chart != chart:
                raise ChartMismatch("basis form on a different chart")
        if basis and generic_rank([w.coeffs for w in basis]) != len(basis):
            raise ValueError("basis forms are generically dependent")
        self.chart = chart
        self.basis = tuple(basis)

    @classmethod
    def span(cls, chart: Chart, forms: Sequence[OneForm]) -> "Codistribution":
        rows, _ = rref([w.coeffs for w in forms])
        return cls(chart, [OneForm(chart, r) for r in rows])

    @property
    def dim(self) -> int:
        return len(self.basis)

    def contains(self, w: OneForm) -> bool:
        _require_same_chart(self, w)
        if w.is_zero():
            return True
        if not self.basis:
            return False
        rows = [f.coeffs for f in self.basis]
        return generic_rank(list(rows) + [w.coeffs]) == len(self.basis)

    def __str__(self) -> str:
        return "span{" + ", ".join(str(w) for w in self.basis) + "}"

    __repr__ = __str__


def same_span(a, b) -> bool:
    """Span equality by mutual membership: the comparison contract for all
    golden values (elimination order legitimately changes printed bases)."""
    if a.chart != b.chart:
        raise ChartMismatch(f"charts differ: {a.chart} vs {b.chart}")
    if a.dim != b.dim:
        return False
    rows = [v.coeffs for v in a.basis] + [v.coeffs for v in b.basis]
    return generic_rank(rows) == a.dim


# ------------------------------------------------------- Cartan calculus

def lie_bracket(v: VectorField, w: VectorField) -> VectorField:
    """[v, w]^i = sum_j (v^j d_j w^i - w^j d_j v^i)."""
    _require_same_chart(v, w)
    names = v.chart.names
    out = []
    for i in range(len(names)):
        total = ZERO
        for j, nj in enumerate(names):
            if not v.coeffs[j].is_zero():
                total = total + v.coeffs[j] * w.coeffs[i].diff(nj)
            if not w.coeffs[j].is_zero():
                total = total - w.coeffs[j] * v.coeffs[i].diff(nj)
        out.append(total)
    return VectorField(v.chart, out)


def d_scalar(chart: Chart, g: Scalar) -> OneForm:
    """Differential of a function: the 1-form of its partials."""
    return OneForm(chart, [g.diff(n) for n in chart.names])


def exterior_derivative(w: OneForm) -> TwoForm:
    """(dw)_{ij} = d_i w_j - d_j w_i."""
    names = w.chart.names
    upper = {}
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            c = w.coeffs[j].diff(names[i]) - w.coeffs[i].diff(names[j])
            if not c.is_zero():
                upper[(i, j)] = c
    return TwoForm(w.chart, upper)


def interior_product(v: VectorField, w: OneForm) -> Scalar:
    """v contracted with a 1-form: sum_i v^i w_i."""
    _require_same_chart(v, w)
    total = ZERO
    for a, b in zip(v.coeffs, w.coeffs):
        if not (a.is_zero() or b.is_zero()):
            total = total + a * b
    return total


def interior_product2(v: VectorField, omega: TwoForm) -> OneForm:
    """v contracted with a 2-form: (v . W)_j = sum_i v^i W_{ij}."""
    _require_same_chart(v, omega)
    n = v.chart.dim
    out = [ZERO] * n
    for (i, j), c in omega.upper.items():
        if not v.coeffs[i].is_zero():
            out[j] = out[j] + v.coeffs[i] * c
        if not v.coeffs[j].is_zero():
            out[i] = out[i] - v.coeffs[j] * c
    return OneForm(v.chart, out)


def lie_derivative(v: VectorField, w: OneForm) -> OneForm:
    """Cartan formula: L_v w = v . dw + d(v . w)."""
    _require_same_chart(v, w)
    first = interior_product2(v, exterior_derivative(w))
    second = d_scalar(w.chart, interior_product(v, w))
    return OneForm(w.chart, [a + b for a, b in zip(first.coeffs, second.coeffs)])


# ------------------------------------------------------------ annihilators

def annihilator(space):
    """Annihilator of a distribution (a codistribution) or of a
    codistribution (a distribution); kernel of the coefficient matrix."""
    chart = space.chart
    rows = [b.coeffs for b in space.basis]
    if not rows:
        if isinstance(space, Distribution):
            return Codistribution(chart, [OneForm.unit(chart, n)
                                          for n in chart.names])
        return Distribution(chart, [VectorField.unit(chart, n)
                                    for n in chart.names])
    kernel = nullspace(rows)
    if isinstance(space, Distribution):
        return Codistribution.span(chart, [OneForm(chart, k) for k in kernel])
    return Distribution.span(chart, [VectorField(chart, k) for k in kernel])


def intersect(p: Codistribution, q: Codistribution) -> Codistribution:
    """Forms expressible with rational-function coefficients in both bases,
    found by solving the stacked linear system over the function field."""
    if p.chart != q.chart:
        raise ChartMismatch(f"charts differ: {p.chart} vs {q.chart}")
    chart = p.chart
    if not p.basis or not q.basis:
        return Codistribution(chart, [])
    np_, nq = len(p.basis), len(q.basis)
    # Columns: coefficients a of p-basis and b of q-basis with
    # sum a_i p_i - sum b_j q_j = 0, one row per chart coordinate.
    rows = []
    for c in range(chart.dim):
        row = [p.basis[i].coeffs[c] for i in range(np_)]
        row += [-q.basis[j].coeffs[c] for j in range(nq)]
        rows.append(row)
    forms = []
    for vec in nullspace(rows):
        coeffs = [ZERO] * chart.dim
        for i in range(np_):
            if not vec[i].is_zero():
                for c in range(chart.dim):
                    coeffs[c] = coeffs[c] + vec[i] * p.basis[i].coeffs[c]
        forms.append(OneForm(chart, coeffs))
    return Codistribution.span(chart, forms)


def sum_codistributions(p: Codistribution, q: Codistribution) -> Codistribution:
    if p.chart != q.chart:
        raise ChartMismatch(f"charts differ: {p.chart} vs {q.chart}")
    return Codistribution.span(p.chart, list(p.basis) + list(q.basis))


def invariant_closure(p0: Codistribution, d: Distribution) -> Codistribution:
    """Smallest codistribution containing p0 and closed under Lie
    derivatives along every field of d.  Terminates because the rank can
    grow at most chart-dimension times."""
    if p0.chart != d.chart:
        raise ChartMismatch(f"charts differ: {p0.chart} vs {d.chart}")
    current = Codistribution.span(p0.chart, list(p0.basis))
    while True:
        added = False
        for v in d.basis:
            for w in list(current.basis):
                lw = lie_derivative(v, w)
                if not current.contains(lw):
                    current = Codistribution.span(
                        current.chart, list(current.basis) + [lw])
                    added = True
        if not added:
            return current


# ------------------------------------------------- involutivity, Frobenius

def is_involutive(d: Distribution) -> bool:
    """All pairwise Lie brackets of basis fields remain in the span."""
    for i in range(len(d.basis)):
        for j in range(i + 1, len(d.basis)):
            if not d.contains(lie_bracket(d.basis[i], d.basis[j])):
                return False
    return True


def is_integrable(p: Codistribution) -> bool:
    """Frobenius condition, evaluated as the residual of dw modulo the
    ideal of the basis: dw restricted to the annihilator distribution must
    vanish for every basis form w."""
    if not p.basis:
        return True
    ann = annihilator(p)
    for w in p.basis:
        dw = exterior_derivative(w)
        if dw.is_zero():
            continue
        for a in range(len(ann.basis)):
            half = interior_product2(ann.basis[a], dw)
            for b in range(a + 1, len(ann.basis)):
                if not interior_product(ann.basis[b], half).is_zero():
                    return False
    return True
