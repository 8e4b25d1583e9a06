import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import weakerr as we
from weakerr.expansion import (PSI_E, PSI_I, PsiKind, eval_psi, eval_psi_i_expanded,
                               expect_psi, leading_constant, psi_at,
                               psi_identity_residual, psi_ih_gap, psi_ih_kind,
                               riemann_psi_sum)
from weakerr.jets import InsufficientJetOrder, Jet4

entries = st.floats(min_value=-2.0, max_value=2.0)
jets4 = st.builds(lambda v: Jet4(tuple(v)), st.lists(entries, min_size=5, max_size=5))
jets2 = st.builds(lambda v: Jet4(tuple(v) + (0.0, 0.0), valid_order=2),
                  st.lists(entries, min_size=3, max_size=3))


def psi_i_ou_hand(theta, sigma, horizon, t, x):
    """By hand from the six terms: third/fourth derivatives of u vanish,
    leaving theta * e^{-2 theta (T-t)} * (theta x^2 - sigma^2)."""
    return theta * math.exp(-2 * theta * (horizon - t)) * (theta * x * x - sigma**2)


def psi_i_gbm_hand(mu, s, horizon, t, x):
    """By hand: (mu^2 - s^4/2) x^2 e^{(2 mu + s^2)(T - t)}."""
    return (mu**2 - 0.5 * s**4) * x * x * math.exp((2 * mu + s**2) * (horizon - t))


def c1_ou_hand(theta, sigma, x0, horizon):
    """Time integral of E psi_i(t, X_t) under the exact OU marginal, by hand."""
    e2t = math.exp(-2 * theta * horizon)
    return (theta * horizon * e2t * (theta * x0**2 - sigma**2 / 2)
            - sigma**2 / 4 * (1 - e2t))


def c1_gbm_hand(mu, s, x0, horizon):
    """E psi_i(t, X_t) is constant in t for this family."""
    return horizon * (mu**2 - 0.5 * s**4) * x0**2 * math.exp((2 * mu + s**2) * horizon)


def _term_scale(b, sigma, u):
    """Magnitude of the individual density terms, for relative tolerances."""
    b0, b1, b2 = b.d[0], b.d[1], b.d[2]
    s0, s1, s2 = sigma.d[0], sigma.d[1], sigma.d[2]
    u1, u2, u3, u4 = u.d[1], u.d[2], u.d[3], u.d[4]
    v = s0 * s0
    return 1.0 + sum(abs(t) for t in (
        b0 * (b1 * u1 + b0 * u2),
        v * (b2 * u1 + 2 * b1 * u2 + b0 * u3),
        b0 * b0 * u2,
        v * v * u4,
        b0 * (2 * s0 * s1 * u2 + v * u3),
        v * ((2 * s1**2 + 2 * s0 * s2) * u2 + 4 * s0 * s1 * u3 + v * u4),
    ))


class TestEvalPsiOracles:
    @pytest.mark.parametrize("t,x", [(0.0, 1.0), (0.3, -1.7), (0.85, 2.4)])
    def test_ou_matches_hand_formula(self, problems, t, x):
        p = problems["ou"]
        got = psi_at(p, PSI_I, t, x)
        assert got == pytest.approx(psi_i_ou_hand(1.0, 1.0, 1.0, t, x), rel=1e-12)

    @pytest.mark.parametrize("t,x", [(0.0, 1.0), (0.5, 0.3), (0.9, 1.9)])
    def test_gbm_matches_hand_formula(self, problems, t, x):
        p = problems["gbm"]
        got = psi_at(p, PSI_I, t, x)
        assert got == pytest.approx(psi_i_gbm_hand(0.05, 0.2, 1.0, t, x), rel=1e-12)

    def test_ou_explicit_density_is_mirror(self, problems):
        # psi_e = -psi_i for this drift/payoff pair, by hand
        p = problems["ou"]
        for t, x in [(0.2, 1.4), (0.7, -0.5)]:
            assert psi_at(p, PSI_E, t, x) == pytest.approx(-psi_at(p, PSI_I, t, x),
                                                           rel=1e-12)

    def test_bm_density_vanishes(self, problems):
        p = problems["bm"]
        for t, x in [(0.0, 0.0), (0.4, 1.2), (0.9, -2.5)]:
            assert abs(psi_at(p, PSI_I, t, x)) <= 1e-12

    @given(jets2, jets2, jets4)
    @settings(max_examples=200)
    def test_driftless_schemes_share_one_density(self, b_any, sigma, u):
        # kill the drift: both densities collapse to the shared sigma-only form
        b = Jet4((0.0,) * 5)
        pi = eval_psi(PSI_I, b, sigma, u)
        pe = eval_psi(PSI_E, b, sigma, u)
        s0, s1, s2 = sigma.d[0], sigma.d[1], sigma.d[2]
        v = s0 * s0
        lap_vlap = (2 * s1**2 + 2 * s0 * s2) * u.d[2] + 4 * s0 * s1 * u.d[3] + v * u.d[4]
        direct = 0.125 * v * v * u.d[4] - 0.125 * v * lap_vlap
        scale = _term_scale(b, sigma, u)
        assert abs(pi - pe) <= 1e-13 * scale
        assert abs(pi - direct) <= 1e-12 * scale

    def test_constant_sigma_zero_drift_gives_zero(self):
        b = Jet4((0.0,) * 5)
        sigma = Jet4.constant(1.7)
        u = Jet4((0.3, -1.1, 0.8, 2.0, -0.6))
        assert eval_psi(PSI_I, b, sigma, u) == pytest.approx(0.0, abs=1e-14)


class TestDualImplementation:
    @given(jets2, jets2, jets4)
    @settings(max_examples=500)
    def test_jet_route_equals_expanded_route(self, b, sigma, u):
        a = eval_psi(PSI_I, b, sigma, u)
        bb = eval_psi_i_expanded(b, sigma, u)
        assert abs(a - bb) <= 1e-12 * _term_scale(b, sigma, u)


class TestIdentityResidual:
    @given(jets2, jets2, jets4)
    @settings(max_examples=300)
    def test_relation_holds_on_random_jets(self, b, sigma, u):
        assert psi_identity_residual(b, sigma, u) <= 1e-12 * _term_scale(b, sigma, u)

    def test_zero_drift_is_exact(self):
        b = Jet4((0.0,) * 5)
        sigma = Jet4((1.3, -0.2, 0.4, 0.0, 0.0), valid_order=2)
        u = Jet4((0.5, 1.0, -2.0, 0.7, 1.1))
        assert psi_identity_residual(b, sigma, u) == 0.0

    def test_zero_u_is_exact(self):
        b = Jet4((0.7, -0.3, 0.2, 0.0, 0.0), valid_order=2)
        sigma = Jet4((1.3, -0.2, 0.4, 0.0, 0.0), valid_order=2)
        assert psi_identity_residual(b, sigma, Jet4((0.0,) * 5)) == 0.0


class TestPsiIhGap:
    def test_affine_flat_drift_has_no_gap(self):
        b = Jet4((0.9, 0.0, 0.0, 0.0, 0.0))  # b' = b'' = 0 so S_h = 1
        sigma = Jet4((1.1, 0.3, -0.2, 0.0, 0.0), valid_order=2)
        u = Jet4((0.2, -0.7, 1.4, 0.8, -1.9))
        gap, closed = psi_ih_gap(b, sigma, u, h=0.1)
        assert gap == pytest.approx(0.0, abs=1e-14)
        assert closed == 0.0

    def test_ou_jets_single_surviving_term(self, problems):
        # b'' = 0, so gap = 1/2 b' (S_h - 1) sigma^2 lap_u, by hand
        p, h, t, x = problems["ou"], 0.05, 0.3, 1.2
        b, sg, u = p.b_jet(x), p.sigma_jet(x), p.u_jet(t, x)
        gap, closed = psi_ih_gap(b, sg, u, h)
        sh = 1.0 / (1.0 + h)
        hand = 0.5 * (-1.0) * (sh - 1.0) * 1.0 * u.deriv(2)
        assert closed == pytest.approx(hand, rel=1e-13)
        assert gap == pytest.approx(hand, rel=1e-12)

    @given(jets2, jets2, jets4, st.floats(min_value=0.01, max_value=0.2))
    @settings(max_examples=300)
    def test_closed_form_agreement(self, b, sigma, u, h):
        gap, closed = psi_ih_gap(b, sigma, u, h)
        assert abs(gap - closed) <= 1e-12 * _term_scale(b, sigma, u)

    def test_gap_halves_with_h(self, problems):
        p, t, x = problems["ou"], 0.4, 0.8
        b, sg, u = p.b_jet(x), p.sigma_jet(x), p.u_jet(t, x)
        g1, _ = psi_ih_gap(b, sg, u, 0.05)
        g2, _ = psi_ih_gap(b, sg, u, 0.025)
        assert g2 / g1 == pytest.approx(0.5, abs=0.05)

    def test_gap_linear_in_h_against_bound(self, problems):
        p, t, x = problems["ou"], 0.2, 1.0
        b, sg, u = p.b_jet(x), p.sigma_jet(x), p.u_jet(t, x)
        for h in (0.04, 0.02, 0.01):
            gap, _ = psi_ih_gap(b, sg, u, h)
            bound = h * abs(u.deriv(2)) * 2.0  # |b'| = sigma = 1 here
            assert abs(gap) <= bound


class TestPsiKindValidation:
    def test_names(self):
        with pytest.raises(ValueError):
            PsiKind("psi_x")
        with pytest.raises(ValueError):
            PsiKind("psi_i", h=0.1)
        with pytest.raises(ValueError):
            PsiKind("psi_ih")
        assert psi_ih_kind(0.25).h == 0.25

    def test_eval_psi_h_consistency(self):
        b = Jet4((0.5, -1.0, 0.0, 0.0, 0.0))
        sigma = Jet4.constant(1.0)
        u = Jet4((1.0, 1.0, 1.0, 0.0, 0.0))
        with pytest.raises(ValueError):
            eval_psi(PSI_I, b, sigma, u, h=0.1)
        assert eval_psi("psi_ih", b, sigma, u, h=0.1) == pytest.approx(
            eval_psi(psi_ih_kind(0.1), b, sigma, u))

    def test_insufficient_jet_order(self):
        b = Jet4((0.5, -1.0, 0.0, 0.0, 0.0))
        sigma = Jet4.constant(1.0)
        u3 = Jet4((1.0, 1.0, 1.0, 1.0, 0.0), valid_order=3)
        with pytest.raises(InsufficientJetOrder):
            eval_psi(PSI_I, b, sigma, u3)
        b1 = Jet4((0.5, -1.0, 0.0, 0.0, 0.0), valid_order=1)
        with pytest.raises(InsufficientJetOrder):
            eval_psi(PSI_I, b1, sigma, Jet4((1.0,) * 5))

    def test_singular_resolvent(self):
        b = Jet4((0.0, 10.0, 0.0, 0.0, 0.0))
        sigma = Jet4.constant(1.0)
        u = Jet4((1.0, 1.0, 1.0, 0.0, 0.0))
        with pytest.raises(we.SingularSh):
            eval_psi(psi_ih_kind(0.1), b, sigma, u)


class TestLeadingConstant:
    def test_ou_matches_hand_integral(self, problems):
        lc = leading_constant(problems["ou"], PSI_I, quad_nodes=32)
        assert lc.value == pytest.approx(c1_ou_hand(1.0, 1.0, 1.0, 1.0), abs=1e-12)
        assert lc.abs_err_est <= 1e-12

    def test_gbm_matches_hand_integral(self, problems):
        lc = leading_constant(problems["gbm"], PSI_I, quad_nodes=32)
        assert lc.value == pytest.approx(c1_gbm_hand(0.05, 0.2, 1.0, 1.0), abs=1e-12)

    def test_bm_vanishes(self, problems):
        assert leading_constant(problems["bm"], PSI_I, quad_nodes=8).value == \
            pytest.approx(0.0, abs=1e-13)

    def test_invariant_under_node_doubling(self, problems):
        for name in ("ou", "gbm"):
            a = leading_constant(problems[name], PSI_I, quad_nodes=64).value
            b = leading_constant(problems[name], PSI_I, quad_nodes=128).value
            assert abs(a - b) <= 1e-8

    def test_error_estimate_shrinks_under_refinement(self, problems):
        coarse = leading_constant(problems["ou"], PSI_I, quad_nodes=1)
        fine = leading_constant(problems["ou"], PSI_I, quad_nodes=4)
        assert coarse.abs_err_est >= 0.0
        assert fine.abs_err_est <= coarse.abs_err_est + 1e-15

    def test_monte_carlo_time_integral_cross_check(self, problems):
        # independent route: T * mean of psi_hand(t_i, X_i), t uniform,
        # X_i from the exact marginal
        p = problems["ou"]
        n = 1_000_000
        rng = np.random.default_rng(2024)
        t = rng.uniform(0.0, 1.0, n)
        mean = p.x0 * np.exp(-t)
        var = (1.0 - np.exp(-2.0 * t)) / 2.0
        x = mean + np.sqrt(var) * rng.standard_normal(n)
        vals = np.exp(-2.0 * (1.0 - t)) * (x * x - 1.0)
        est, stderr = vals.mean(), vals.std() / math.sqrt(n)
        assert abs(est - c1_ou_hand(1.0, 1.0, 1.0, 1.0)) <= 4 * stderr

    def test_gbm_sign_agrees_with_measured_weak_error(self, problems):
        p = problems["gbm"]
        lc = leading_constant(p, PSI_I, quad_nodes=16)
        fine = we.weak_error_exact(p, we.SchemeConfig(n_steps=512))
        assert math.copysign(1.0, lc.value) == math.copysign(1.0, fine / (1.0 / 512))

    def test_preconditions(self, problems):
        with pytest.raises(ValueError):
            leading_constant(problems["tanh"], PSI_I)

    def test_psi_ih_constant_approaches_psi_i_constant(self, problems):
        p = problems["ou"]
        base = leading_constant(p, PSI_I, quad_nodes=16).value
        gaps = [abs(leading_constant(p, psi_ih_kind(h), quad_nodes=16).value - base)
                for h in (0.05, 0.025)]
        assert gaps[1] == pytest.approx(gaps[0] / 2, rel=0.1)


class TestRiemannSum:
    def test_bm_sum_is_zero(self, problems):
        for n in (1, 7, 32):
            assert riemann_psi_sum(problems["bm"], PSI_I, n) == pytest.approx(0.0,
                                                                              abs=1e-13)

    def test_single_step_is_dirac_value(self, problems):
        p = problems["ou"]
        expected = p.horizon * psi_at(p, PSI_I, 0.0, p.x0)
        assert riemann_psi_sum(p, PSI_I, 1) == pytest.approx(expected, rel=1e-13)

    def test_gap_to_constant_halves(self, problems):
        p = problems["ou"]
        c1 = leading_constant(p, PSI_I, quad_nodes=32).value
        gaps = [abs(riemann_psi_sum(p, PSI_I, n) - c1) for n in (16, 32, 64)]
        assert gaps[1] == pytest.approx(gaps[0] / 2, rel=0.15)
        assert gaps[2] == pytest.approx(gaps[1] / 2, rel=0.15)

    def test_expect_psi_dirac_at_time_zero(self, problems):
        p = problems["ou"]
        assert expect_psi(p, PSI_I, 0.0) == pytest.approx(psi_at(p, PSI_I, 0.0, p.x0),
                                                          rel=1e-14)
