"""System model, adapted charts, shift operators, transport."""

from fractions import Fraction

import pytest

from corpus import mk, nonflat2
from dtflat.errors import (
    EquilibriumMismatch,
    HintInvalid,
    InversionFailed,
    NotProjectable,
    NotShiftable,
    SubmersivityFailed,
    UnsupportedShift,
)
from dtflat.exprs import ONE, ZERO, Scalar, parse_scalar
from dtflat.geometry import (
    Codistribution,
    Distribution,
    OneForm,
    VectorField,
    same_span,
)
from dtflat.systems import (
    AdaptedChartHint,
    DiscreteSystem,
    backward_shift_codistribution,
    build_adapted_chart,
    check_submersive,
    differentials_of_map,
    forward_shift,
    pullback_pi,
    pushforward_projectable,
    triangular_solve,
)


class TestConstruction:
    def test_academic_is_submersive(self, acad):
        assert check_submersive(acad)

    def test_autonomous_submersive(self):
        s = mk(["x1"], ["u1"], ["x1"], name="autonomous")
        assert check_submersive(s)

    def test_rank_deficient_rejected(self):
        with pytest.raises(SubmersivityFailed):
            mk(["x1", "x2", "x3"], ["u1", "u2"], ["u1", "u2", "u1*u2"])

    def test_equilibrium_mismatch(self):
        with pytest.raises(EquilibriumMismatch):
            DiscreteSystem(["x1"], ["u1"], [parse_scalar("x1 + u1 + 1")],
                           {"x1": Fraction(0), "u1": Fraction(0)})

    def test_nonzero_equilibrium(self):
        s = DiscreteSystem(["x1"], ["u1"], [parse_scalar("x1*u1")],
                           {"x1": Fraction(2), "u1": Fraction(1)})
        assert s.equilibrium["x1"] == 2

    def test_reserved_names_rejected(self):
        with pytest.raises(ValueError):
            mk(["th1"], ["u1"], ["th1 + u1"])

    def test_undeclared_variable_rejected(self):
        with pytest.raises(ValueError):
            mk(["x1"], ["u1"], ["x1 + w"])

    def test_point_rank_drop_warns(self):
        # Jacobian rank drops to 0 at the origin but is 1 generically
        s = mk(["x1"], ["u1"], ["x1*u1 + x1*x1"])
        assert any("equilibrium" in w for w in s.warnings)


class TestAdaptedChart:
    def test_academic_selection_and_inverse(self, acad, acad_chart):
        assert acad_chart.h_names == ("x1", "x3")
        th = {f"th{i}": Scalar.var(f"th{i}") for i in range(1, 5)}
        xi1, xi2 = Scalar.var("xi1"), Scalar.var("xi2")
        th1, th2, th3, th4 = (th[f"th{i}"] for i in range(1, 5))
        assert acad_chart.inverse["u2"] == th4 - xi1 * (xi2 + 1)
        assert acad_chart.inverse["u1"] == th3 - 2 * (th4 - xi1 * (xi2 + 1))
        assert acad_chart.inverse["x4"] == th2 + 3 * th4 - xi1 * (xi2 + 1) * th3

    def test_round_trip_exact(self, acad, acad_chart):
        for v in acad.chart.names:
            assert acad_chart.inverse[v].subs(acad_chart.forward) == Scalar.var(v)

    def test_two_state_example(self):
        s = nonflat2()
        chart = build_adapted_chart(s)
        assert chart.h_names == ("x1",)
        # th1 = u1, th2 = x1 + x2*u1, xi1 = x1
        assert chart.inverse["u1"] == Scalar.var("th1")
        assert chart.inverse["x2"] == \
            (Scalar.var("th2") - Scalar.var("xi1")) / Scalar.var("th1")

    def test_spec_example_with_hint(self):
        s = nonflat2()
        chart = build_adapted_chart(s, AdaptedChartHint(h_vars=("x2",)))
        assert chart.inverse["x1"] == \
            Scalar.var("th2") - Scalar.var("xi1") * Scalar.var("th1")
        assert chart.inverse["u1"] == Scalar.var("th1")

    def test_hint_with_explicit_inverse(self):
        s = mk(["x1"], ["u1"], ["x1 + u1"])
        inverse = {"x1": parse_scalar("xi1"), "u1": parse_scalar("th1 - xi1")}
        chart = build_adapted_chart(s, AdaptedChartHint(h_vars=("x1",),
                                                        inverse=inverse))
        assert chart.inverse["u1"] == parse_scalar("th1 - xi1")

    def test_invalid_inverse_hint(self):
        s = mk(["x1"], ["u1"], ["x1 + u1"])
        bad = {"x1": parse_scalar("xi1"), "u1": parse_scalar("th1 + xi1")}
        with pytest.raises(HintInvalid):
            build_adapted_chart(s, AdaptedChartHint(h_vars=("x1",), inverse=bad))

    def test_inversion_failure_reports(self):
        # cubic in whichever coordinate remains unknown: the greedy solver
        # must give up and ask for a hint
        s = mk(["x1"], ["u1"], ["x1^3 + u1^3"])
        with pytest.raises(InversionFailed) as err:
            build_adapted_chart(s)
        assert err.value.hint is not None

    def test_integrator_chart(self):
        s = mk(["x1"], ["u1"], ["u1"])
        chart = build_adapted_chart(s)
        assert chart.h_names == ("x1",)
        assert chart.inverse["u1"] == Scalar.var("th1")


class TestTransport:
    def test_field_round_trip(self, acad, acad_chart):
        v = VectorField(acad.chart, [Scalar.var("x2"), ONE, ZERO,
                                     Scalar.var("u1"), ZERO, ONE])
        back = acad_chart.from_adapted(acad_chart.to_adapted(v))
        assert all((a - b).is_zero() for a, b in zip(back.coeffs, v.coeffs))

    def test_form_round_trip(self, acad, acad_chart):
        w = OneForm(acad.chart, [ONE, Scalar.var("x1"), ZERO, ZERO,
                                 Scalar.var("u2"), ZERO])
        back = acad_chart.from_adapted(acad_chart.to_adapted(w))
        assert all((a - b).is_zero() for a, b in zip(back.coeffs, w.coeffs))

    def test_pairing_preserved(self, acad, acad_chart):
        from dtflat.geometry import interior_product
        v = VectorField(acad.chart, [Scalar.var("x2"), ONE, ZERO,
                                     Scalar.var("u1"), ZERO, ONE])
        w = OneForm(acad.chart, [ONE, Scalar.var("x1"), ZERO, ZERO,
                                 Scalar.var("u2"), ZERO])
        lhs = interior_product(v, w)
        rhs = acad_chart.scalar_from_adapted(
            interior_product(acad_chart.to_adapted(v), acad_chart.to_adapted(w)))
        assert lhs == rhs

    def test_E0_to_adapted_matches_display(self, acad, acad_chart):
        E0 = Distribution(acad.chart, [VectorField.unit(acad.chart, "u1"),
                                       VectorField.unit(acad.chart, "u2")])
        got = acad_chart.to_adapted(E0)
        v1 = VectorField(acad.chart_adapted, [
            ONE, ZERO, parse_scalar("-(th3+1)/th1"),
            parse_scalar("-xi1*(xi2+1)*(th3+1)/(3*th1)"), ZERO, ZERO])
        v2 = VectorField(acad.chart_adapted,
                         [ZERO, ONE, ZERO, parse_scalar("-1/3"), ZERO, ZERO])
        assert same_span(got, Distribution(acad.chart_adapted, [v1, v2]))

    def test_P1_to_adapted_matches_display(self, acad, acad_chart):
        P1 = Codistribution(acad.chart, [OneForm.unit(acad.chart, x)
                                         for x in acad.state_names])
        got = acad_chart.to_adapted(P1)
        ch = acad.chart_adapted
        w1 = OneForm(ch, [parse_scalar("(th3+1)/th1"), ZERO, ONE,
                          ZERO, ZERO, ZERO])
        w2 = OneForm(ch, [parse_scalar("xi1*(xi2+1)*(th3+1)/(3*th1)"),
                          parse_scalar("1/3"), ZERO, ONE, ZERO, ZERO])
        w3 = OneForm.unit(ch, "xi1")
        w4 = OneForm.unit(ch, "xi2")
        assert same_span(got, Codistribution(ch, [w1, w2, w3, w4]))

    def test_scalar_identity_chart(self):
        s = mk(["x1"], ["u1"], ["u1"])
        chart = build_adapted_chart(s)
        g = parse_scalar("x1 + 1")
        assert chart.scalar_from_adapted(chart.scalar_to_adapted(g)) == g


class TestPushPull:
    def test_projectable_pushforward(self, acad):
        ch = acad.chart_adapted
        v = VectorField(ch, [ZERO, Scalar(-3), ZERO, ONE, ZERO, ZERO])
        img = pushforward_projectable(v, acad)
        assert img == VectorField(acad.chart_plus,
                                  [ZERO, Scalar(-3), ZERO, ONE])

    def test_xi_direction_projects_to_zero(self, acad):
        v = VectorField.unit(acad.chart_adapted, "xi1")
        assert pushforward_projectable(v, acad).is_zero()

    def test_not_projectable(self, acad):
        v = VectorField(acad.chart_adapted, [
            ONE, ZERO, parse_scalar("-(th3+1)/th1"),
            parse_scalar("-xi1*(xi2+1)*(th3+1)/(3*th1)"), ZERO, ZERO])
        with pytest.raises(NotProjectable):
            pushforward_projectable(v, acad)

    def test_pullback_adds_inputs(self, acad):
        delta = Distribution(acad.chart_plus, [
            VectorField(acad.chart_plus, [ZERO, Scalar(-3), ZERO, ONE])])
        E1 = pullback_pi(delta, acad)
        expect = Distribution(acad.chart, [
            VectorField(acad.chart, [ZERO, Scalar(-3), ZERO, ONE, ZERO, ZERO]),
            VectorField.unit(acad.chart, "u1"),
            VectorField.unit(acad.chart, "u2")])
        assert same_span(E1, expect)

    def test_pullback_of_zero(self, acad):
        E = pullback_pi(Distribution(acad.chart_plus, []), acad)
        expect = Distribution(acad.chart, [VectorField.unit(acad.chart, u)
                                           for u in acad.input_names])
        assert same_span(E, expect)

    def test_pullback_of_full(self, acad):
        full = Distribution(acad.chart_plus,
                            [VectorField.unit(acad.chart_plus, n)
                             for n in acad.chart_plus.names])
        assert pullback_pi(full, acad).dim == 6

    def test_push_then_pull_preserves_coefficients(self, acad):
        ch = acad.chart_adapted
        v = VectorField(ch, [Scalar.var("th2"), ONE, ZERO, Scalar(2),
                             ZERO, ZERO])
        img = pushforward_projectable(v, acad)
        back = pullback_pi(Distribution(acad.chart_plus, [img]), acad)
        lifted = VectorField(acad.chart,
                             [Scalar.var("x2").rename({"x2": "x2"}), ONE,
                              ZERO, Scalar(2), ZERO, ZERO])
        assert back.contains(lifted)


class TestShifts:
    def test_forward_shift_third_component(self, acad):
        assert forward_shift(Scalar.var("x3"), acad) == parse_scalar("u1 + 2*u2")

    def test_forward_shift_constant(self, acad):
        c = Scalar(Fraction(5, 2))
        assert forward_shift(c, acad) == c

    def test_forward_shift_product_collapses(self, acad):
        g = Scalar.var("x1") * (Scalar.var("x3") + 1)
        assert forward_shift(g, acad) == parse_scalar("x2 + x3 + 3*x4")

    def test_forward_shift_rejects_inputs(self, acad):
        with pytest.raises(UnsupportedShift):
            forward_shift(Scalar.var("u1"), acad)

    def test_backward_shift_known_value(self, acad):
        ch = acad.chart_adapted
        pplus = Codistribution(ch, [
            OneForm.unit(ch, "th1"), OneForm.unit(ch, "th3"),
            OneForm(ch, [ZERO, ONE, ZERO, Scalar(3), ZERO, ZERO])])
        P2 = backward_shift_codistribution(pplus, acad)
        expect = Codistribution(acad.chart, [
            OneForm.unit(acad.chart, "x1"), OneForm.unit(acad.chart, "x3"),
            OneForm(acad.chart, [ZERO, ONE, ZERO, Scalar(3), ZERO, ZERO])])
        assert same_span(P2, expect)

    def test_backward_shift_of_zero(self, acad):
        P = backward_shift_codistribution(
            Codistribution(acad.chart_adapted, []), acad)
        assert P.dim == 0

    def test_backward_shift_xi_dependence_rejected(self, acad):
        ch = acad.chart_adapted
        w = OneForm(ch, [ONE, Scalar.var("xi1"), ZERO, ZERO, ZERO, ZERO])
        with pytest.raises(NotShiftable):
            backward_shift_codistribution(Codistribution(ch, [w]), acad)

    def test_backward_shift_dxi_rejected(self, acad):
        ch = acad.chart_adapted
        w = OneForm(ch, [ONE, ZERO, ZERO, ZERO, ONE, ZERO])
        with pytest.raises(NotShiftable):
            backward_shift_codistribution(Codistribution(ch, [w]), acad)

    def test_shift_round_trip(self, acad, acad_chart):
        # forward-substituting a backward-shifted basis lands inside the
        # original codistribution expressed on (x, u)
        ch = acad.chart_adapted
        pplus = Codistribution(ch, [
            OneForm.unit(ch, "th1"), OneForm.unit(ch, "th3"),
            OneForm(ch, [ZERO, ONE, ZERO, Scalar(3), ZERO, ZERO])])
        P2 = backward_shift_codistribution(pplus, acad)
        pplus_xu = acad_chart.from_adapted(pplus)
        for w in P2.basis:
            # map dx_i -> df_i with coefficients shifted forward
            coeffs = [ZERO] * acad.chart.dim
            for i, x in enumerate(acad.state_names):
                ci = forward_shift(w.coeffs[i], acad)
                if ci.is_zero():
                    continue
                for b in range(acad.chart.dim):
                    coeffs[b] = coeffs[b] + ci * acad.jacobian[i][b]
            assert pplus_xu.contains(OneForm(acad.chart, coeffs))


class TestTriangularSolve:
    def test_chain_of_solves(self):
        a, b = Scalar.var("a"), Scalar.var("b")
        t1, t2 = Scalar.var("t1"), Scalar.var("t2")
        sol = triangular_solve([(a + b, t1), (b, t2)], ["a", "b"])
        assert sol["b"] == t2
        assert sol["a"] == t1 - t2

    def test_stuck_system_returns_none(self):
        a, b = Scalar.var("a"), Scalar.var("b")
        t1, t2 = Scalar.var("t1"), Scalar.var("t2")
        assert triangular_solve([(a * b, t1), (a + b, t2)], ["a", "b"]) is None


class TestSubmersivityInvariance:
    def test_invariant_under_input_mix(self, acad):
        # compose with u -> (u1 + u2, u2): still submersive
        mix = {"u1": parse_scalar("u1 + u2"), "u2": parse_scalar("u2")}
        f2 = [g.subs(mix) for g in acad.f]
        s2 = DiscreteSystem(acad.state_names, acad.input_names, f2,
                            acad.equilibrium, name="mixed")
        assert check_submersive(s2)

    def test_span_df_dimension(self, acad):
        assert differentials_of_map(acad).dim == acad.n
