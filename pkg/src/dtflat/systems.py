"""Discrete-time system model and coordinate machinery: submersivity,
adapted charts, forward and backward shifts, and transport of fields and
forms between the original and the adapted chart.

The adapted chart takes the images of the state map as its first block of
coordinates and a selection of m existing coordinates as the second block.
In that chart projectability and backward shifts become renamings, which
keeps both forward-flatness tests exact.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .errors import (
    EquilibriumMismatch,
    EvalSingular,
    HintInvalid,
    InversionFailed,
    NotProjectable,
    NotShiftable,
    SubmersivityFailed,
    UnsupportedShift,
)
from .exprs import ONE, ZERO, Scalar
from .geometry import (
    Chart,
    Codistribution,
    Distribution,
    OneForm,
    VectorField,
    generic_rank,
    rref,
)


@dataclass(frozen=True)
class AdaptedChartHint:
    """Optional user guidance for the adapted chart: which m coordinates to
    keep, and optionally the full inverse map (verified before use)."""

    h_vars: tuple = ()
    inverse: Mapping[str, Scalar] | None = None


class DiscreteSystem:
    """x+ = f(x, u) with generic submersivity and an exact equilibrium.

    equilibrium may be None for systems derived internally by coordinate
    transformations, whose dynamics can be singular at the original point;
    every analysis step is generic and never evaluates there.
    """

    def __init__(self, state_names: Sequence[str], input_names: Sequence[str],
                 f: Sequence[Scalar], equilibrium: Mapping[str, Fraction] | None,
                 name: str = "", hints: AdaptedChartHint | None = None):
        self.name = name
        self.state_names = tuple(state_names)
        self.input_names = tuple(input_names)
        self.n = len(self.state_names)
        self.m = len(self.input_names)
        if len(f) != self.n:
            raise ValueError("need one update expression per state")
        self.f = tuple(Scalar.of(g) for g in f)
        self.hints = hints
        self.warnings: list = []

        self.chart = Chart(self.state_names + self.input_names)
        reserved = ({f"th{i}" for i in range(1, self.n + 1)}
                    | {f"xi{j}" for j in range(1, self.m + 1)}
                    | {f"xp{i}" for i in range(1, self.n + 1)})
        clash = reserved & set(self.chart.names)
        if clash:
            raise ValueError(
                f"variable names {sorted(clash)} collide with generated "
                f"chart names (th*/xi*/xp* are reserved)")
        declared = set(self.chart.names)
        for g in self.f:
            extra = g.vars() - declared
            if extra:
                raise ValueError(f"undeclared variables in dynamics: {sorted(extra)}")

        self.chart_plus = Chart(tuple(f"xp{i}" for i in range(1, self.n + 1)))
        self.chart_adapted = Chart(
            tuple(f"th{i}" for i in range(1, self.n + 1))
            + tuple(f"xi{j}" for j in range(1, self.m + 1)))

        self.jacobian = [[g.diff(v) for v in self.chart.names] for g in self.f]
        if generic_rank(self.jacobian) != self.n:
            raise SubmersivityFailed(
                f"rank of the update-map Jacobian is "
                f"{generic_rank(self.jacobian)} < n = {self.n}; the system "
                f"is not submersive")

        if equilibrium is None:
            self.equilibrium = None
        else:
            self.equilibrium = {v: Fraction(equilibrium[v])
                                for v in self.chart.names}
            for name_i, g in zip(self.state_names, self.f):
                try:
                    value = g.eval_at(self.equilibrium)
                except EvalSingular:
                    raise EquilibriumMismatch(
                        f"the update of {name_i} is singular at the declared "
                        f"equilibrium") from None
                if value != self.equilibrium[name_i]:
                    raise EquilibriumMismatch(
                        f"f does not fix the equilibrium: component {name_i}")
            point_rank = _rank_at_point(self.jacobian, self.equilibrium)
            if point_rank is not None and point_rank != self.n:
                self.warnings.append(
                    f"submersivity holds generically but the Jacobian rank "
                    f"drops to {point_rank} at the equilibrium; proceeding "
                    f"with generic ranks")

    def state_index(self, name: str) -> int:
        return self.state_names.index(name)

    def __str__(self) -> str:
        rows = ", ".join(f"{x}+ = {g}" for x, g in zip(self.state_names, self.f))
        return f"DiscreteSystem(n={self.n}, m={self.m}: {rows})"


def _rank_at_point(matrix, point) -> int | None:
    """Rank of a Scalar matrix evaluated at an exact point, or None when
    some entry is singular there."""
    try:
        rows = [[Scalar(c.eval_at(point)) for c in row] for row in matrix]
    except Exception:
        return None
    return generic_rank(rows)


def check_submersive(sys: DiscreteSystem) -> bool:
    return generic_rank(sys.jacobian) == sys.n


class AdaptedChart:
    """Invertible chart (th1..thn, xi1..xim) with th = f(x, u) and xi a
    selection of m original coordinates."""

    def __init__(self, sys: DiscreteSystem, h_names: tuple,
                 inverse: Mapping[str, Scalar]):
        self.sys = sys
        self.h_names = h_names
        self.chart = sys.chart_adapted
        # forward map: each adapted coordinate as a function on (x, u)
        self.forward = {}
        for i, g in enumerate(sys.f, start=1):
            self.forward[f"th{i}"] = g
        for j, h in enumerate(h_names, start=1):
            self.forward[f"xi{j}"] = Scalar.var(h)
        # inverse map: each original coordinate as a function on (th, xi)
        self.inverse = dict(inverse)
        self._jac_forward = [
            [self.forward[a].diff(b) for b in sys.chart.names]
            for a in self.chart.names]
        self._jac_inverse = [
            [self.inverse[b].diff(a) for a in self.chart.names]
            for b in sys.chart.names]

    # ------------------------------------------------------------ scalars

    def scalar_to_adapted(self, g: Scalar) -> Scalar:
        return g.subs(self.inverse)

    def scalar_from_adapted(self, g: Scalar) -> Scalar:
        return g.subs(self.forward)

    # ------------------------------------------------------------- fields

    def field_to_adapted(self, v: VectorField) -> VectorField:
        if v.chart != self.sys.chart:
            raise ValueError("field is not on the system chart")
        out = []
        for a in range(self.chart.dim):
            total = ZERO
            for b in range(self.sys.chart.dim):
                if not v.coeffs[b].is_zero():
                    total = total + v.coeffs[b] * self._jac_forward[a][b]
            out.append(self.scalar_to_adapted(total))
        return VectorField(self.chart, out)

    def field_from_adapted(self, v: VectorField) -> VectorField:
        if v.chart != self.chart:
            raise ValueError("field is not on the adapted chart")
        out = []
        for b in range(self.sys.chart.dim):
            total = ZERO
            for a in range(self.chart.dim):
                if not v.coeffs[a].is_zero():
                    total = total + v.coeffs[a] * self._jac_inverse[b][a]
            out.append(self.scalar_from_adapted(total))
        return VectorField(self.sys.chart, out)

    # -------------------------------------------------------------- forms

    def form_to_adapted(self, w: OneForm) -> OneForm:
        if w.chart != self.sys.chart:
            raise ValueError("form is not on the system chart")
        out = []
        for a in range(self.chart.dim):
            total = ZERO
            for b in range(self.sys.chart.dim):
                if not w.coeffs[b].is_zero():
                    total = total + self.scalar_to_adapted(w.coeffs[b]) \
                        * self._jac_inverse[b][a]
            out.append(total)
        return OneForm(self.chart, out)

    def form_from_adapted(self, w: OneForm) -> OneForm:
        if w.chart != self.chart:
            raise ValueError("form is not on the adapted chart")
        out = []
        for b in range(self.sys.chart.dim):
            total = ZERO
            for a in range(self.chart.dim):
                if not w.coeffs[a].is_zero():
                    total = total + self.scalar_from_adapted(w.coeffs[a]) \
                        * self._jac_forward[a][b]
            out.append(total)
        return OneForm(self.sys.chart, out)

    # -------------------------------------------------------------- spans

    def to_adapted(self, obj):
        """Change of coordinates into the adapted chart; accepts Scalar,
        VectorField, OneForm, Distribution, Codistribution."""
        return self._transport(obj, True)

    def from_adapted(self, obj):
        return self._transport(obj, False)

    def _transport(self, obj, into: bool):
        if isinstance(obj, Scalar):
            return self.scalar_to_adapted(obj) if into \
                else self.scalar_from_adapted(obj)
        if isinstance(obj, VectorField):
            return self.field_to_adapted(obj) if into \
                else self.field_from_adapted(obj)
        if isinstance(obj, OneForm):
            return self.form_to_adapted(obj) if into \
                else self.form_from_adapted(obj)
        if isinstance(obj, Distribution):
            mapped = [self._transport(v, into) for v in obj.basis]
            out = Distribution.span(mapped[0].chart if mapped else
                                    (self.chart if into else self.sys.chart),
                                    mapped)
            if out.dim != obj.dim:
                raise ValueError("coordinate change did not preserve rank")
            return out
        if isinstance(obj, Codistribution):
            mapped = [self._transport(w, into) for w in obj.basis]
            chart = self.chart if into else self.sys.chart
            out = Codistribution.span(chart, mapped) if mapped \
                else Codistribution(chart, [])
            if out.dim != obj.dim:
                raise ValueError("coordinate change did not preserve rank")
            return out
        raise TypeError(f"cannot transport {type(obj).__name__}")


def build_adapted_chart(sys: DiscreteSystem,
                        hint: AdaptedChartHint | None = None) -> AdaptedChart:
    """Select m coordinates as xi (lowest-index admissible subset first,
    honoring hints) and invert th = f by a greedy pass of single-variable
    linear solves.  Both chart invariants are verified symbolically."""
    hint = hint if hint is not None else sys.hints
    names = sys.chart.names
    if hint is not None and hint.inverse is not None and not hint.h_vars:
        raise HintInvalid("an inverse hint requires the xi selection hint "
                          "(the inverse is expressed in th/xi coordinates)")
    if hint is not None and hint.h_vars:
        missing = set(hint.h_vars) - set(names)
        if missing:
            raise HintInvalid(f"hinted xi variables not declared: {sorted(missing)}")
        if len(hint.h_vars) != sys.m:
            raise HintInvalid(f"need exactly m = {sys.m} xi variables")
        candidates = [tuple(hint.h_vars)]
    else:
        candidates = [tuple(names[i] for i in combo)
                      for combo in itertools.combinations(range(len(names)), sys.m)]

    failures = []
    for h_names in candidates:
        jac = [list(row) for row in sys.jacobian]
        for h in h_names:
            jac.append([ONE if v == h else ZERO for v in names])
        if generic_rank(jac) != sys.n + sys.m:
            failures.append((h_names, "chart Jacobian is generically singular"))
            continue
        if hint is not None and hint.inverse is not None:
            inverse = {k: Scalar.of(v) for k, v in hint.inverse.items()}
            problem = _verify_inverse(sys, h_names, inverse)
            if problem:
                raise HintInvalid(f"hinted inverse fails verification: {problem}")
            return AdaptedChart(sys, h_names, inverse)
        inverse = _invert_greedy(sys, h_names)
        if inverse is None:
            failures.append((h_names, "no triangular linear solve order"))
            continue
        problem = _verify_inverse(sys, h_names, inverse)
        if problem:
            raise InversionFailed(
                f"internal: computed inverse failed verification: {problem}")
        return AdaptedChart(sys, h_names, inverse)

    detail = "; ".join(f"xi={list(h)}: {why}" for h, why in failures[:6])
    raise InversionFailed(
        f"could not build an adapted chart automatically ({detail})",
        hint="provide a chart hint, e.g.: xi = x1, x3")


def triangular_solve(equations, unknowns):
    """Solve expr_i = target_i for the unknowns by a greedy triangular
    pass: repeatedly pick an equation that contains exactly one unsolved
    variable and is linear in it after clearing denominators.

    equations: list of (expr, target) Scalars; targets must be free of the
    unknowns.  Returns {unknown: Scalar} with solutions free of every
    unknown, or None when the greedy pass gets stuck.
    """
    from .exprs import solve_linear_in
    from .errors import CoefficientVanishes, NotLinearInVariable

    work = [[expr, target, False] for expr, target in equations]
    unsolved = list(unknowns)
    solved: dict = {}
    progress = True
    while unsolved and progress:
        progress = False
        for eq in work:
            if eq[2]:
                continue
            expr = eq[0].subs(solved) if solved else eq[0]
            eq[0] = expr
            present = [v for v in unsolved if v in expr.vars()]
            if len(present) != 1:
                continue
            v = present[0]
            try:
                sol = solve_linear_in(expr, eq[1], v)
            except (NotLinearInVariable, CoefficientVanishes):
                continue
            solved[v] = sol
            unsolved.remove(v)
            eq[2] = True
            progress = True
    if unsolved:
        return None
    return solved


def _invert_greedy(sys: DiscreteSystem, h_names: tuple):
    """Adapted-chart inversion: express every original coordinate in
    (th, xi).  Returns the inverse map or None."""
    xi_of = {h: Scalar.var(f"xi{j}") for j, h in enumerate(h_names, start=1)}
    unknowns = [v for v in sys.chart.names if v not in xi_of]
    equations = [(g.subs(xi_of), Scalar.var(f"th{i}"))
                 for i, g in enumerate(sys.f, start=1)]
    solved = triangular_solve(equations, unknowns)
    if solved is None:
        return None
    inverse = dict(solved)
    for h, xi in xi_of.items():
        inverse[h] = xi
    return inverse


def _verify_inverse(sys: DiscreteSystem, h_names: tuple,
                    inverse: Mapping[str, Scalar]) -> str | None:
    """Round trip: substituting th = f(x,u), xi = h(x,u) into the inverse
    must return each original coordinate exactly."""
    forward = {f"th{i}": g for i, g in enumerate(sys.f, start=1)}
    for j, h in enumerate(h_names, start=1):
        forward[f"xi{j}"] = Scalar.var(h)
    for v in sys.chart.names:
        expr = inverse.get(v)
        if expr is None:
            return f"missing inverse expression for {v}"
        extra = expr.vars() - set(sys.chart_adapted.names)
        if extra:
            return f"inverse for {v} mentions {sorted(extra)}"
        if expr.subs(forward) != Scalar.var(v):
            return f"round trip fails for {v}"
    return None


# -------------------------------------------------------------- transport

def pushforward_projectable(v: VectorField, sys: DiscreteSystem) -> VectorField:
    """Drop the xi-components of a projectable field on the adapted chart
    and rename th -> xp; errors if any th-coefficient depends on xi."""
    if v.chart != sys.chart_adapted:
        raise ValueError("field is not on the adapted chart")
    xi_names = sys.chart_adapted.names[sys.n:]
    for i in range(sys.n):
        for xi in xi_names:
            if v.coeffs[i].depends_on(xi):
                raise NotProjectable(
                    f"coefficient of d/dth{i + 1} depends on {xi}")
    ren = {f"th{i}": f"xp{i}" for i in range(1, sys.n + 1)}
    return VectorField(sys.chart_plus,
                       [v.coeffs[i].rename(ren) for i in range(sys.n)])


def pullback_pi(delta: Distribution, sys: DiscreteSystem) -> Distribution:
    """Preimage under the projection x+ = x: rename xp -> x and append the
    input coordinate fields."""
    if delta.chart != sys.chart_plus:
        raise ValueError("distribution is not on the successor chart")
    ren = {f"xp{i}": sys.state_names[i - 1] for i in range(1, sys.n + 1)}
    fields = []
    for v in delta.basis:
        coeffs = [c.rename(ren) for c in v.coeffs] + [ZERO] * sys.m
        fields.append(VectorField(sys.chart, coeffs))
    fields.extend(VectorField.unit(sys.chart, u) for u in sys.input_names)
    return Distribution.span(sys.chart, fields)


def backward_shift_codistribution(pplus: Codistribution,
                                  sys: DiscreteSystem) -> Codistribution:
    """Backward shift of a codistribution inside span{dth} with a
    xi-independent basis: rename th -> x.  The reduced echelon basis is
    canonical, so a xi-free basis exists exactly when that basis is
    xi-free."""
    if pplus.chart != sys.chart_adapted:
        raise ValueError("codistribution is not on the adapted chart")
    if not pplus.basis:
        return Codistribution(sys.chart, [])
    rows, _ = rref([w.coeffs for w in pplus.basis])
    xi_names = sys.chart_adapted.names[sys.n:]
    for row in rows:
        for j in range(sys.n, sys.n + sys.m):
            if not row[j].is_zero():
                raise NotShiftable(
                    "codistribution is not contained in span{dth}")
        for c in row[:sys.n]:
            for xi in xi_names:
                if c.depends_on(xi):
                    raise NotShiftable(
                        f"no xi-free basis: coefficient {c} depends on {xi}")
    ren = {f"th{i}": sys.state_names[i - 1] for i in range(1, sys.n + 1)}
    forms = []
    for row in rows:
        coeffs = [c.rename(ren) for c in row[:sys.n]] + [ZERO] * sys.m
        forms.append(OneForm(sys.chart, coeffs))
    return Codistribution(sys.chart, forms)


def forward_shift(g: Scalar, sys: DiscreteSystem) -> Scalar:
    """One application of the shift operator to a function of the states."""
    bad = g.vars() - set(sys.state_names)
    if bad:
        raise UnsupportedShift(
            f"forward shift is only modeled for state functions; "
            f"{sorted(bad)} are not states")
    return g.subs({x: gi for x, gi in zip(sys.state_names, sys.f)})


def differentials_of_map(sys: DiscreteSystem) -> Codistribution:
    """span{df}: the row space of the update-map Jacobian as 1-forms."""
    forms = [OneForm(sys.chart, row) for row in sys.jacobian]
    return Codistribution.span(sys.chart, forms)
