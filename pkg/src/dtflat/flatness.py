"""Both geometric forward-flatness tests and the machine check that they
annihilate each other.

The distribution test grows a nested sequence of involutive distributions
starting from the input directions; the codistribution test shrinks a
nested sequence of integrable codistributions starting from the state
differentials.  Each iteration of either test also produces a
projectability certificate: the largest projectable subdistribution is the
kernel of the matrix stacking all xi-derivatives of the mixed coefficient
block of a normalized basis, and the same independent derivative rows give
the 1-forms that extend the intersection step of the dual test.  The
verifier pairs the two sequences step by step: interior products must
vanish identically and the dimensions must be complementary.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DualityViolation, InternalInvariantError
from .exprs import ONE, ZERO
from .geometry import (
    Chart,
    Codistribution,
    Distribution,
    OneForm,
    VectorField,
    annihilator,
    generic_rank,
    interior_product,
    intersect,
    invariant_closure,
    is_integrable,
    is_involutive,
    nullspace,
    rref,
    same_span,
    sum_codistributions,
)
from .systems import (
    AdaptedChart,
    DiscreteSystem,
    backward_shift_codistribution,
    build_adapted_chart,
    differentials_of_map,
    pullback_pi,
    pushforward_projectable,
)


# ------------------------------------------------------- normalized bases

@dataclass
class NormalizedBasis:
    """Echelon basis of a distribution on the adapted chart: the first
    fields carry an identity block on their pivot th-columns, the trailing
    fields have xi-components only."""

    fields: list
    theta_pivots: list  # pivot columns among the th-block, ascending
    xi_pivots: list     # pivot columns among the xi-block (chart indices)

    @property
    def dbar(self) -> int:
        return len(self.theta_pivots)


def normalize_distribution_basis(dist: Distribution, n_states: int) -> NormalizedBasis:
    """Gaussian elimination with deterministic pivoting over the function
    field; the span is unchanged and the output is canonical."""
    rows, pivots = rref([v.coeffs for v in dist.basis])
    fields = [VectorField(dist.chart, r) for r in rows]
    theta_pivots = [p for p in pivots if p < n_states]
    xi_pivots = [p for p in pivots if p >= n_states]
    return NormalizedBasis(fields, theta_pivots, xi_pivots)


@dataclass
class ProjectabilityReport:
    """Certificate from one projectable-subdistribution computation.

    mixed_block: non-pivot th-coefficients of the theta-pivot fields, one
      row per non-pivot th-coordinate, one column per theta-pivot field.
    derivative_rows: all xi-derivatives of the mixed block, stacked level
      by level until a level stops adding rank.
    independent_rows: the nonzero derivative rows (first occurrence order).
    rank: generic rank of derivative_rows over the function field.
    kernel_basis: column vectors spanning the kernel; coefficients are
      free of all xi variables.
    """

    dbar: int
    dim: int
    theta_pivots: list
    mixed_block: list
    derivative_rows: list
    independent_rows: list
    rank: int
    kernel_basis: list

    @property
    def projectable_dim(self) -> int:
        return self.dim - self.rank


def _xi_derivative_closure(mixed_block: list, xi_names: tuple) -> tuple:
    """Stack xi-derivative levels of the mixed block until the generic rank
    stops growing; returns (rows, rank)."""
    rows: list = []
    rank = 0
    level = [row for row in mixed_block]
    while True:
        nxt = []
        for xi in xi_names:
            for row in level:
                nxt.append([c.diff(xi) for c in row])
        candidate = rows + [r for r in nxt if any(not c.is_zero() for c in r)]
        new_rank = generic_rank(candidate) if candidate else 0
        if new_rank == rank:
            break
        rows = candidate
        rank = new_rank
        level = nxt
    return rows, rank


def projectability_report(norm: NormalizedBasis, chart: Chart,
                          n_states: int) -> ProjectabilityReport:
    """Build the derivative-row certificate for a normalized basis."""
    xi_names = chart.names[n_states:]
    dbar = norm.dbar
    nonpivot_theta = [i for i in range(n_states) if i not in norm.theta_pivots]
    theta_fields = norm.fields[:dbar]
    mixed_block = [[theta_fields[k].coeffs[i] for k in range(dbar)]
                   for i in nonpivot_theta]
    rows, rank = _xi_derivative_closure(mixed_block, xi_names)
    independent = []
    for row in rows:
        if all(c.is_zero() for c in row):
            continue
        if row not in independent:
            independent.append(row)
    if rows:
        kernel = nullspace(rows)
    else:
        kernel = [[ONE if i == k else ZERO for i in range(dbar)]
                  for k in range(dbar)]
    for vec in kernel:
        for c in vec:
            for xi in xi_names:
                if c.depends_on(xi):
                    raise InternalInvariantError(
                        "kernel of the derivative matrix depends on xi")
    report = ProjectabilityReport(
        dbar=dbar, dim=len(norm.fields), theta_pivots=list(norm.theta_pivots),
        mixed_block=mixed_block, derivative_rows=rows,
        independent_rows=independent, rank=rank, kernel_basis=kernel)
    if report.rank + len(kernel) != dbar:
        raise InternalInvariantError("kernel dimension bookkeeping is off")
    return report


def _projectable_core(dist_adapted: Distribution, chart: AdaptedChart):
    """Largest projectable subdistribution on the adapted chart, plus the
    certificate: kernel combinations of the theta-pivot fields joined with
    the xi-only fields."""
    sys = chart.sys
    norm = normalize_distribution_basis(dist_adapted, sys.n)
    report = projectability_report(norm, sys.chart_adapted, sys.n)
    theta_fields = norm.fields[:norm.dbar]
    fields = []
    for vec in report.kernel_basis:
        coeffs = [ZERO] * sys.chart_adapted.dim
        for k, c in enumerate(vec):
            if c.is_zero():
                continue
            for i in range(sys.chart_adapted.dim):
                coeffs[i] = coeffs[i] + c * theta_fields[k].coeffs[i]
        fields.append(VectorField(sys.chart_adapted, coeffs))
    fields.extend(norm.fields[norm.dbar:])
    dbar_dist = Distribution.span(sys.chart_adapted, fields)
    if dbar_dist.dim != report.projectable_dim:
        raise InternalInvariantError(
            f"projectable dimension {dbar_dist.dim} does not match "
            f"dim - rank = {report.projectable_dim}")
    return dbar_dist, report


def largest_projectable_subdistribution(dist: Distribution,
                                        chart: AdaptedChart):
    """Largest projectable subdistribution of a distribution given on the
    original chart; returns it on the original chart with the certificate."""
    dist_adapted = chart.to_adapted(dist)
    core, report = _projectable_core(dist_adapted, chart)
    back = chart.from_adapted(core)
    for v in back.basis:
        if not dist.contains(v):
            raise InternalInvariantError(
                "projectable subdistribution escaped the input span")
    return back, report


# ------------------------------------------------------ distribution test

@dataclass
class DistributionStep:
    k: int
    E_prev: Distribution          # E_{k-1} on (x, u)
    D: Distribution               # D_{k-1} on (x, u)
    D_adapted: Distribution
    Delta: Distribution           # on the successor chart
    E: Distribution               # E_k on (x, u)
    report: ProjectabilityReport


@dataclass
class DistributionTestResult:
    steps: list
    sequence: list                # E_0 .. E_{kbar-1}
    dims: list
    kbar: int | None
    flat: bool | None
    converged: bool

    @property
    def stop_reason(self) -> str:
        return ("dimension stagnation" if self.converged
                else "iteration budget exhausted")


def distribution_step(sys: DiscreteSystem, chart: AdaptedChart, k: int,
                      E_prev: Distribution) -> DistributionStep:
    E_adapted = chart.to_adapted(E_prev)
    D_adapted, report = _projectable_core(E_adapted, chart)
    D = chart.from_adapted(D_adapted)
    for v in D.basis:
        if not E_prev.contains(v):
            raise InternalInvariantError("D is not inside E")
    images = []
    for v in D_adapted.basis:
        img = pushforward_projectable(v, sys)
        if not img.is_zero():
            images.append(img)
    Delta = Distribution.span(sys.chart_plus, images)
    E = pullback_pi(Delta, sys)
    if not is_involutive(E):
        raise InternalInvariantError(f"E_{k} is not involutive")
    for v in E_prev.basis:
        if not E.contains(v):
            raise InternalInvariantError(f"nesting fails: E_{k-1} not in E_{k}")
    return DistributionStep(k=k, E_prev=E_prev, D=D, D_adapted=D_adapted,
                            Delta=Delta, E=E, report=report)


def run_distribution_test(sys: DiscreteSystem, chart: AdaptedChart | None = None,
                          max_iterations: int | None = None) -> DistributionTestResult:
    """Iterate from span of the input directions until the dimension
    stagnates; flat exactly when the last strictly growing member spans
    everything."""
    if chart is None:
        chart = build_adapted_chart(sys)
    if max_iterations is None:
        max_iterations = sys.n + sys.m + 1
    E = Distribution(sys.chart,
                     [VectorField.unit(sys.chart, u) for u in sys.input_names])
    steps: list = []
    sequence = [E]
    for k in range(1, max_iterations + 1):
        step = distribution_step(sys, chart, k, E)
        steps.append(step)
        if step.E.dim == E.dim:
            dims = [d.dim for d in sequence]
            flat = E.dim == sys.n + sys.m
            return DistributionTestResult(steps=steps, sequence=sequence,
                                          dims=dims, kbar=k, flat=flat,
                                          converged=True)
        E = step.E
        sequence.append(E)
    return DistributionTestResult(steps=steps, sequence=sequence,
                                  dims=[d.dim for d in sequence], kbar=None,
                                  flat=None, converged=False)


# ---------------------------------------------------- codistribution test

@dataclass
class CodistributionStep:
    k: int
    P: Codistribution             # P_k on (x, u)
    intersection: Codistribution  # P_k intersected with span{df}, on (x, u)
    P_adapted: Codistribution
    added_forms: list             # rho-forms on the adapted chart
    Pplus: Codistribution         # P_{k+1}^+ on the adapted chart
    P_next: Codistribution        # P_{k+1} on (x, u)
    report: ProjectabilityReport  # from the annihilator of P_k


@dataclass
class CodistributionTestResult:
    steps: list
    sequence: list                # P_1 .. P_kbar
    dims: list
    kbar: int | None
    flat: bool | None
    converged: bool

    @property
    def stop_reason(self) -> str:
        return ("sequence stagnation" if self.converged
                else "iteration budget exhausted")


def codistribution_step(sys: DiscreteSystem, chart: AdaptedChart, k: int,
                        P: Codistribution,
                        cross_check: bool = True) -> CodistributionStep:
    span_df = differentials_of_map(sys)
    inter = intersect(P, span_df)

    # Adapted-chart route: the annihilator of P_k, normalized, yields the
    # derivative rows whose span extends the intersection to the smallest
    # xi-invariant codistribution.
    P_adapted = chart.to_adapted(P)
    ann = annihilator(P_adapted)
    norm = normalize_distribution_basis(ann, sys.n)
    report = projectability_report(norm, sys.chart_adapted, sys.n)
    theta_units = [OneForm.unit(sys.chart_adapted, f"th{p + 1}")
                   for p in report.theta_pivots]
    added = []
    for row in report.independent_rows:
        coeffs = [ZERO] * sys.chart_adapted.dim
        for col, c in enumerate(row):
            if not c.is_zero():
                pivot_col = report.theta_pivots[col]
                coeffs[pivot_col] = coeffs[pivot_col] - c
        added.append(OneForm(sys.chart_adapted, coeffs))

    span_dtheta = Codistribution(
        sys.chart_adapted,
        [OneForm.unit(sys.chart_adapted, f"th{i}") for i in range(1, sys.n + 1)])
    inter_adapted = intersect(P_adapted, span_dtheta)
    if inter_adapted.dim != inter.dim:
        raise InternalInvariantError(
            "intersection dimensions disagree between charts")
    Pplus = Codistribution.span(sys.chart_adapted,
                                list(inter_adapted.basis) + added)

    if cross_check:
        # Coordinate-free route: smallest codistribution containing the
        # intersection and invariant under the kernel of the update map.
        kernel = annihilator(span_df)
        closure = invariant_closure(inter, kernel)
        if not same_span(chart.to_adapted(closure), Pplus):
            raise InternalInvariantError(
                "adapted-chart closure and coordinate-free closure disagree")

    P_next = backward_shift_codistribution(Pplus, sys)
    if not is_integrable(P_next):
        raise InternalInvariantError(f"P_{k + 1} is not integrable")
    for w in P_next.basis:
        if not P.contains(w):
            raise InternalInvariantError(f"nesting fails: P_{k+1} not in P_{k}")
    return CodistributionStep(k=k, P=P, intersection=inter,
                              P_adapted=P_adapted, added_forms=added,
                              Pplus=Pplus, P_next=P_next, report=report)


def run_codistribution_test(sys: DiscreteSystem, chart: AdaptedChart | None = None,
                            max_iterations: int | None = None,
                            cross_check: bool = True) -> CodistributionTestResult:
    """Iterate from the span of the state differentials until the sequence
    stagnates; flat exactly when it reaches zero."""
    if chart is None:
        chart = build_adapted_chart(sys)
    if max_iterations is None:
        max_iterations = sys.n + sys.m + 1
    P = Codistribution(sys.chart,
                       [OneForm.unit(sys.chart, x) for x in sys.state_names])
    steps: list = []
    sequence = [P]
    for k in range(1, max_iterations + 1):
        step = codistribution_step(sys, chart, k, P, cross_check=cross_check)
        steps.append(step)
        if step.P_next.dim == P.dim and same_span(step.P_next, P):
            dims = [q.dim for q in sequence]
            flat = P.dim == 0
            return CodistributionTestResult(steps=steps, sequence=sequence,
                                            dims=dims, kbar=k, flat=flat,
                                            converged=True)
        P = step.P_next
        sequence.append(P)
    return CodistributionTestResult(steps=steps, sequence=sequence,
                                    dims=[q.dim for q in sequence], kbar=None,
                                    flat=None, converged=False)


# ------------------------------------------------------------ the verdict

@dataclass
class SequenceStep:
    """Merged per-iteration record of both tests."""

    k: int
    E: Distribution               # E_{k-1}
    D: Distribution               # D_{k-1}
    Delta: Distribution
    P: Codistribution             # P_k
    Pplus: Codistribution         # P_{k+1}^+
    dims: dict


@dataclass
class DualityCheck:
    k: int
    pairing_zero: bool
    dims_complementary: bool
    projectable_pairing_zero: bool
    projectable_dims_complementary: bool
    dim_formula_E: bool
    dim_formula_P: bool
    certificates_agree: bool
    E_dim: int
    P_dim: int
    D_dim: int
    sum_dim: int


@dataclass
class DualityReport:
    checks: list
    ok: bool


@dataclass
class FlatnessVerdict:
    flat: bool | None
    kbar: int | None
    witness: str
    duality_ok: bool | None
    reports: list                 # SequenceStep list
    distribution: DistributionTestResult
    codistribution: CodistributionTestResult
    duality: DualityReport | None
    tests_agree: bool | None


def _certificates_agree(a: ProjectabilityReport, b: ProjectabilityReport) -> bool:
    return (a.dbar == b.dbar and a.rank == b.rank
            and a.theta_pivots == b.theta_pivots
            and a.mixed_block == b.mixed_block
            and a.independent_rows == b.independent_rows)


def verify_duality(sys: DiscreteSystem, chart: AdaptedChart,
                   dres: DistributionTestResult,
                   pres: CodistributionTestResult) -> DualityReport:
    """Machine check of the annihilation between the two sequences; any
    failure is raised as an implementation bug, never reported as a
    property of the system."""
    if dres.kbar != pres.kbar:
        raise DualityViolation(
            f"tests stalled at different steps: {dres.kbar} vs {pres.kbar}",
            k=0, check="stagnation")
    checks = []
    n_plus_m = sys.n + sys.m
    for estep, pstep in zip(dres.steps, pres.steps):
        k = estep.k
        # (a) every pairing between E_{k-1} and P_k vanishes identically
        pairing = all(
            interior_product(v, w).is_zero()
            for v in estep.E_prev.basis for w in pstep.P.basis)
        if not pairing:
            raise DualityViolation(
                f"a basis pairing of E_{k-1} with P_{k} is nonzero",
                k=k, check="pairing")
        # (b) complementary dimensions
        dims_ok = estep.E_prev.dim + pstep.P.dim == n_plus_m
        if not dims_ok:
            raise DualityViolation(
                f"dim(E_{k-1}) + dim(P_{k}) = "
                f"{estep.E_prev.dim + pstep.P.dim} != {n_plus_m}",
                k=k, check="dims")
        # (c) the projectable subdistribution annihilates Pplus + P
        pplus_xu = chart.from_adapted(pstep.Pplus)
        union = sum_codistributions(pplus_xu, pstep.P)
        proj_pairing = all(
            interior_product(v, w).is_zero()
            for v in estep.D.basis for w in union.basis)
        if not proj_pairing:
            raise DualityViolation(
                f"a basis pairing of D_{k-1} with P_{k+1}+ + P_{k} is nonzero",
                k=k, check="projectable-pairing")
        proj_dims = estep.D.dim + union.dim == n_plus_m
        if not proj_dims:
            raise DualityViolation(
                f"dim(D_{k-1}) + dim(P_{k+1}+ + P_{k}) = "
                f"{estep.D.dim + union.dim} != {n_plus_m}",
                k=k, check="projectable-dims")
        # (d) dimension formulas against the recorded certificate
        rep = estep.report
        formula_E = estep.E.dim == rep.dbar - rep.rank + sys.m
        if not formula_E:
            raise DualityViolation(
                f"dim(E_{k}) = {estep.E.dim} != dbar - rank + m = "
                f"{rep.dbar - rep.rank + sys.m}", k=k, check="dim-formula-E")
        formula_P = pstep.P_next.dim == sys.n - rep.dbar + rep.rank
        if not formula_P:
            raise DualityViolation(
                f"dim(P_{k+1}) = {pstep.P_next.dim} != n - dbar + rank = "
                f"{sys.n - rep.dbar + rep.rank}", k=k, check="dim-formula-P")
        # the two certificates are computed from dual inputs and must agree
        certs = _certificates_agree(estep.report, pstep.report)
        if not certs:
            raise DualityViolation(
                "projectability certificates of the two tests differ",
                k=k, check="certificates")
        checks.append(DualityCheck(
            k=k, pairing_zero=pairing, dims_complementary=dims_ok,
            projectable_pairing_zero=proj_pairing,
            projectable_dims_complementary=proj_dims,
            dim_formula_E=formula_E, dim_formula_P=formula_P,
            certificates_agree=certs,
            E_dim=estep.E_prev.dim, P_dim=pstep.P.dim, D_dim=estep.D.dim,
            sum_dim=union.dim))
    return DualityReport(checks=checks, ok=True)


def analyze(sys: DiscreteSystem, chart: AdaptedChart | None = None,
            max_iterations: int | None = None, run_distribution: bool = True,
            run_codistribution: bool = True,
            check_duality: bool | None = None) -> FlatnessVerdict:
    """Run the selected tests on one shared adapted chart and assemble the
    combined verdict."""
    if chart is None:
        chart = build_adapted_chart(sys)
    dres = pres = None
    if run_distribution:
        dres = run_distribution_test(sys, chart, max_iterations)
    if run_codistribution:
        pres = run_codistribution_test(sys, chart, max_iterations)
    if check_duality is None:
        check_duality = run_distribution and run_codistribution

    tests_agree = None
    duality = None
    reports: list = []
    if dres is not None and pres is not None:
        if dres.converged and pres.converged:
            tests_agree = (dres.flat == pres.flat and dres.kbar == pres.kbar)
            if not tests_agree:
                raise DualityViolation(
                    f"the two tests disagree: flat={dres.flat}/{pres.flat}, "
                    f"kbar={dres.kbar}/{pres.kbar}", k=0, check="agreement")
        if check_duality and dres.converged and pres.converged:
            duality = verify_duality(sys, chart, dres, pres)
        for estep, pstep in zip(dres.steps, pres.steps):
            reports.append(SequenceStep(
                k=estep.k, E=estep.E_prev, D=estep.D, Delta=estep.Delta,
                P=pstep.P, Pplus=pstep.Pplus,
                dims={"E": estep.E_prev.dim, "D": estep.D.dim,
                      "Delta": estep.Delta.dim, "P": pstep.P.dim}))

    primary = dres if dres is not None else pres
    flat = primary.flat if primary is not None else None
    kbar = primary.kbar if primary is not None else None
    converged = primary.converged if primary is not None else False
    if not converged:
        witness = "not converged within the iteration budget"
        flat = None
        kbar = None
    elif dres is not None and pres is not None:
        witness = (f"both tests stalled at step {kbar}: "
                   f"dim(E_{kbar-1}) = {dres.sequence[-1].dim} and "
                   f"dim(P_{kbar}) = {pres.sequence[-1].dim}")
    elif dres is not None:
        witness = (f"dimension stagnation at step {kbar} with "
                   f"dim(E_{kbar-1}) = {dres.sequence[-1].dim}")
    else:
        witness = (f"sequence stagnation at step {kbar} with "
                   f"dim(P_{kbar}) = {pres.sequence[-1].dim}")
    return FlatnessVerdict(
        flat=flat, kbar=kbar, witness=witness,
        duality_ok=(duality.ok if duality is not None else None),
        reports=reports, distribution=dres, codistribution=pres,
        duality=duality, tests_agree=tests_agree)
