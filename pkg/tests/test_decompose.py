"""First integrals, one decomposition step, and the full cascade."""

import pytest

from corpus import academic4, chain2, integrator1, mk, nonflat2
from dtflat.decompose import (
    CascadeResult,
    FirstIntegralSet,
    TriangularDecomposition,
    decompose_cascade,
    decompose_step,
    find_first_integrals,
)
from dtflat.errors import HintInvalid, IntegralsNotFound, NormalizationFailed
from dtflat.exprs import ZERO, Scalar, parse_scalar
from dtflat.flatness import run_codistribution_test, run_distribution_test
from dtflat.geometry import (
    Codistribution,
    Distribution,
    OneForm,
    VectorField,
    d_scalar,
    generic_rank,
    same_span,
)


def form(chart, *pairs):
    coeffs = [ZERO] * chart.dim
    for name, c in pairs:
        coeffs[chart.index(name)] = Scalar.of(c)
    return OneForm(chart, coeffs)


class TestFirstIntegrals:
    def test_constant_combination(self, acad):
        ch = acad.chart
        p2 = Codistribution(ch, [form(ch, ("x1", 1)), form(ch, ("x3", 1)),
                                 form(ch, ("x2", 1), ("x4", 3))])
        got = find_first_integrals(p2, acad)
        assert {str(g) for g in got.functions} == {"x1", "x3", "x2 + 3*x4"}
        diffs = [d_scalar(ch, g) for g in got.functions]
        assert same_span(Codistribution.span(ch, diffs), p2)

    def test_single_coordinate(self, acad):
        ch = acad.chart
        got = find_first_integrals(
            Codistribution(ch, [form(ch, ("x1", 1))]), acad)
        assert got.method == "coordinate-pick"
        assert [str(g) for g in got.functions] == ["x1"]

    def test_integrating_factor_route(self, acad):
        ch = acad.chart
        p3 = Codistribution(ch, [form(ch, ("x1", parse_scalar("(x3+1)/x1")),
                                      ("x3", 1))])
        got = find_first_integrals(p3, acad)
        assert got.method == "integrating-factor"
        assert len(got.functions) == 1
        g = got.functions[0]
        # the differential spans the target, and the integral is the
        # expected product up to scaling
        assert same_span(Codistribution(ch, [d_scalar(ch, g)]), p3)
        x1x3 = parse_scalar("x1*x3 + x1")
        ratio = g / x1x3
        assert ratio.is_const()

    def test_nonintegrable_rejected(self):
        s = mk(["x", "y", "z"], ["u1"], ["y", "z", "u1"], name="contact")
        ch = s.chart
        w = form(ch, ("x", Scalar.var("y") * -1), ("z", 1))
        with pytest.raises(IntegralsNotFound):
            find_first_integrals(Codistribution(ch, [w]), s)

    def test_input_component_rejected(self, acad):
        ch = acad.chart
        with pytest.raises(ValueError):
            find_first_integrals(
                Codistribution(ch, [form(ch, ("u1", 1))]), acad)

    def test_hints_unused_when_heuristic_succeeds(self):
        s = mk(["x1", "x2"], ["u1"], ["x2", "u1"], name="chain")
        ch = s.chart
        p = Codistribution(ch, [form(ch, ("x1", 1))])
        got = find_first_integrals(p, s, hints=[parse_scalar("x1")])
        assert got.method == "coordinate-pick"

    def test_clearing_denominators_integrates(self):
        # coefficients with different denominators, but clearing them
        # exposes an exact form
        s = mk(["x1", "x2"], ["u1"], ["x2", "u1"], name="chain")
        ch = s.chart
        w = form(ch, ("x1", parse_scalar("1/(x1 + x2)")),
                 ("x2", parse_scalar("1/(x1 + x2 + 1)")))
        got = find_first_integrals(Codistribution(ch, [w]), s)
        assert got.method == "integrating-factor"
        g = got.functions[0]
        assert same_span(Codistribution(ch, [d_scalar(ch, g)]),
                         Codistribution(ch, [w]))

    def test_bad_hint_rejected(self):
        s = mk(["x1", "x2"], ["u1"], ["x2", "u1"], name="chain")
        ch = s.chart
        # closed form whose potential is logarithmic: no rational integral
        w = form(ch, ("x1", parse_scalar("1/x1")), ("x2", 1))
        p = Codistribution(ch, [w])
        with pytest.raises(HintInvalid):
            find_first_integrals(p, s, hints=[parse_scalar("x1*x2")])

    def test_log_type_failure_is_reported(self):
        s = mk(["x1", "x2"], ["u1"], ["x2", "u1"], name="chain")
        ch = s.chart
        w = form(ch, ("x1", parse_scalar("1/x1")), ("x2", 1))
        with pytest.raises(IntegralsNotFound) as err:
            find_first_integrals(Codistribution(ch, [w]), s)
        assert err.value.hint is not None


class TestDecomposeStep:
    def test_academic_step(self, acad):
        step = decompose_step(acad)
        assert step.dims == (3, 1, 1, 1)
        assert {str(g) for g in step.integrals.functions} == \
            {"x1", "x3", "x2 + 3*x4"}
        # normalized equation reads state+ = input, exactly
        nm, g = step.subsystem_f2[step.normalized_indices[0]]
        assert g == Scalar.var("ub1")
        # feedback input rank equals the feedback dimension
        u1_names = [nm for nm, _ in step.input_transform][step.dims[2]:]
        fb = [g for _, g in step.feedback_f1]
        jac = [[g.diff(u) for u in u1_names] for g in fb]
        assert generic_rank(jac) == step.dims[1] == 1
        assert step.straightened_ok is True

    def test_subsystem_free_of_unnormalized_inputs(self, acad):
        step = decompose_step(acad)
        u1_names = [nm for nm, _ in step.input_transform][step.dims[2]:]
        for _, g in step.subsystem_f2:
            for u in u1_names:
                assert not g.depends_on(u)

    def test_transformations_invertible(self, acad):
        step = decompose_step(acad)
        # state round trip
        for nm, g in step.state_transform:
            assert g.subs(step.state_inverse) == Scalar.var(nm)
        # input round trip: express ubar in (xbar, u), then substitute the
        # u-inverse and check identity
        for nm, g in step.input_transform:
            expr = g.subs(step.state_inverse).subs(step.input_inverse)
            assert expr == Scalar.var(nm)

    def test_subsystem_tail_dims(self, acad):
        step = decompose_step(acad)
        sub = step.subsystem
        pres = run_codistribution_test(sub)
        assert pres.dims == [3, 1, 0]
        assert pres.flat is True
        dres = run_distribution_test(sub)
        assert dres.flat is True
        assert dres.kbar == pres.kbar == 3

    def test_one_step_system_is_terminal(self):
        step = decompose_step(integrator1())
        assert step.terminal
        assert step.dims == (0, 1, 0, 1)
        assert step.subsystem is None
        assert [str(g) for _, g in step.feedback_f1] == ["ub1 + xb1"]
        assert step.straightened_ok is True

    def test_chain_step(self):
        step = decompose_step(chain2())
        assert step.dims == (1, 1, 0, 1)
        assert [str(g) for g in step.integrals.functions] == ["x1"]
        # subsystem is driven by the feedback state alone
        assert step.subsystem.input_names == ("xb2",)

    def test_nonflat_rejected(self):
        with pytest.raises(NormalizationFailed):
            decompose_step(nonflat2())

    def test_input_rank_deficiency_rejected(self):
        # two inputs enter only through their sum: rank d_u f = 1 < m
        s = mk(["x1", "x2"], ["u1", "u2"],
               ["x2 + u1 + u2", "u1 + u2"], name="rankdef")
        with pytest.raises(NormalizationFailed):
            decompose_step(s)


class TestProp9:
    def test_forward_direction_on_corpus(self):
        for system in [academic4(), chain2(), integrator1()]:
            step = decompose_step(system)
            assert step.straightened_ok is True, system.name

    def test_reverse_direction_via_reparameterization(self, acad):
        # compose the normalized input transformation with an invertible
        # reparameterization of the normalized block; re-normalizing the
        # chosen equations must again straighten the input directions
        step = decompose_step(acad)
        t = step.transformed
        # new input vb1 = 2*ub1 + xb1^2 (invertible in ub1), vb2 = ub2
        ren = {"ub1": (Scalar.var("vb1") - Scalar.var("xb1") ** 2) / 2,
               "ub2": Scalar.var("vb2")}
        f_re = [g.subs(ren) for g in t.f]
        from dtflat.systems import DiscreteSystem
        s_re = DiscreteSystem(list(t.state_names), ["vb1", "vb2"], f_re,
                              None, name="reparam")
        step2 = decompose_step(s_re, state_prefix="yb", input_prefix="wb")
        assert step2.straightened_ok is True
        nm, g = step2.subsystem_f2[step2.normalized_indices[0]]
        assert g == Scalar.var("wb1")


class TestCascade:
    def test_academic_depth(self, acad):
        cascade = decompose_cascade(acad)
        assert cascade.blocked is None
        assert cascade.depth == 3
        assert cascade.steps[0].dims == (3, 1, 1, 1)
        assert cascade.steps[1].dims[0] == 1
        assert cascade.steps[2].terminal

    def test_academic_mirrors_P_dims(self, acad, acad_verdict):
        cascade = decompose_cascade(acad)
        # depth equals the stall index minus one
        assert cascade.depth == acad_verdict.kbar - 1
        # subsystem state dimensions mirror the codistribution dimensions
        sub_dims = [st.dims[0] for st in cascade.steps]
        assert sub_dims == acad_verdict.codistribution.dims[1:]

    def test_integrator_single_trivial_step(self):
        cascade = decompose_cascade(integrator1())
        assert cascade.depth == 1
        assert cascade.steps[0].terminal

    def test_chain_depth(self):
        cascade = decompose_cascade(chain2())
        assert cascade.depth == 2
        assert cascade.steps[0].dims == (1, 1, 0, 1)
        assert cascade.steps[1].terminal

    def test_second_step_integral_value(self, acad):
        cascade = decompose_cascade(acad)
        integrals = cascade.steps[1].integrals
        assert integrals.method == "integrating-factor"
        g = integrals.functions[0]
        # xb1*(xb3 + 1) in the step-one names
        expected = parse_scalar("xb1*xb3 + xb1")
        assert (g / expected).is_const()

    def test_each_subsystem_flat(self, acad):
        cascade = decompose_cascade(acad)
        for st in cascade.steps[:-1]:
            v = run_distribution_test(st.subsystem)
            assert v.flat is True
