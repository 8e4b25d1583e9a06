import math

import numpy as np
import pytest

import weakerr as we
from weakerr.schemes import MAX_H_LIP, SchemeConfig, check_step_size


def _random_states(p, rng, n):
    if p.name == "gbm":
        return rng.uniform(0.5, 2.0, n)
    return rng.uniform(-2.0, 2.0, n)


class TestSh:
    def test_zero_drift_slope(self, problems):
        assert we.s_h(problems["bm"], 0.3, 1.7) == 1.0

    def test_ou(self, problems):
        assert we.s_h(problems["ou"], 0.1, 0.0) == pytest.approx(1.0 / 1.1, abs=1e-15)

    def test_gbm(self, problems):
        assert we.s_h(problems["gbm"], 0.1, 2.0) == pytest.approx(1.0 / 0.995, abs=1e-15)

    def test_singular_resolvent(self):
        p = we.gbm_family_problem("steep", mu=10.0, s=0.2, f_poly=(0, 0, 1),
                                  x0=1.0, horizon=1.0)
        with pytest.raises(we.SingularSh):
            we.s_h(p, 0.1, 1.0)


class TestExplicitStep:
    def test_pure_diffusion(self, problems):
        assert we.explicit_step(problems["bm"], 0.25, 0.0, 0.3) == pytest.approx(0.3)

    def test_zero_h_zero_dw_is_identity(self, problems):
        assert we.explicit_step(problems["ou"], 0.0, 1.3, 0.0) == 1.3

    def test_ou_by_hand(self, problems):
        # 1 - 0.1*1 + 0.2 = 1.1
        assert we.explicit_step(problems["ou"], 0.1, 1.0, 0.2) == pytest.approx(1.1, abs=1e-15)

    def test_vectorized(self, problems):
        x = np.array([0.0, 1.0, -1.0])
        out = we.explicit_step(problems["ou"], 0.1, x, np.zeros(3))
        assert np.allclose(out, 0.9 * x)


class TestImplicitStep:
    def test_zero_drift_reduces_to_explicit_bitwise(self, problems):
        p = problems["bm"]
        cfg = SchemeConfig(n_steps=8)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x, dw, h = rng.normal(), rng.normal(0, 0.3), rng.uniform(0.01, 0.4)
            x_next, iters = we.implicit_step(p, cfg, h, x, dw)
            assert x_next == we.explicit_step(p, h, x, dw)
            assert iters <= 1

    def test_ou_closed_form_value(self, problems):
        p = problems["ou"]
        for solver in ("fixed_point", "newton", "closed_form_affine"):
            cfg = SchemeConfig(n_steps=10, solver=solver)
            x_next, _ = we.implicit_step(p, cfg, 0.1, 1.0, 0.0)
            assert x_next == pytest.approx(1.0 / 1.1, abs=1e-12)

    def test_solver_agreement_on_affine(self, problems):
        rng = np.random.default_rng(1)
        for name in ("ou", "gbm"):
            p = problems[name]
            for _ in range(25):
                x = float(_random_states(p, rng, 1)[0])
                dw, h = rng.normal(0, 0.2), rng.uniform(0.01, 0.4)
                outs = [we.implicit_step(p, SchemeConfig(n_steps=8, solver=s), h, x, dw)[0]
                        for s in ("fixed_point", "newton", "closed_form_affine")]
                assert max(outs) - min(outs) <= 10 * 1e-12

    def test_newton_is_exact_in_one_update_on_affine(self, problems):
        cfg = SchemeConfig(n_steps=10, solver="newton", fp_tol=1e-13)
        x_next, iters = we.implicit_step(problems["ou"], cfg, 0.1, 1.0, 0.2)
        assert iters == 1
        assert x_next == pytest.approx(1.2 / 1.1, abs=1e-14)

    def test_tanh_fixed_point_at_origin(self, problems):
        x_next, iters = we.implicit_step(problems["tanh"], SchemeConfig(n_steps=10),
                                         0.1, 0.0, 0.0)
        assert x_next == 0.0
        assert iters <= 2

    def test_residual_contract(self, problems):
        p = problems["tanh"]
        cfg = SchemeConfig(n_steps=10, fp_tol=1e-13)
        rng = np.random.default_rng(2)
        for _ in range(50):
            x, dw, h = rng.normal(), rng.normal(0, 0.3), rng.uniform(0.01, 0.4)
            y, _ = we.implicit_step(p, cfg, h, x, dw)
            xi = x + p.sigma(x) * dw
            assert abs(y - xi - h * p.b(y)) <= cfg.fp_tol

    def test_start_point_independence(self, problems):
        p = problems["tanh"]
        cfg = SchemeConfig(n_steps=10, fp_tol=1e-14)
        y_default, _ = we.implicit_step(p, cfg, 0.1, 0.7, 0.2)
        y_zero, _ = we.implicit_step(p, cfg, 0.1, 0.7, 0.2, start=0.0)
        assert abs(y_default - y_zero) <= 1e-12

    def test_no_convergence_raises(self, problems):
        cfg = SchemeConfig(n_steps=4, fp_tol=1e-16, fp_max_iter=1)
        with pytest.raises(we.NoConvergence):
            we.implicit_step(problems["tanh"], cfg, 0.25, 0.9, 0.5)

    def test_closed_form_rejects_nonaffine(self, problems):
        cfg = SchemeConfig(n_steps=10, solver="closed_form_affine")
        with pytest.raises(we.InvalidSolver):
            we.implicit_step(problems["tanh"], cfg, 0.1, 0.5, 0.0)

    def test_step_size_guard(self, problems):
        with pytest.raises(we.StepSizeError):
            we.implicit_step(problems["ou"], SchemeConfig(n_steps=1), 1.0, 1.0, 0.0)


class TestContraction:
    @pytest.mark.parametrize("name", ["ou", "gbm", "tanh"])
    def test_iteration_error_ratio_bounded(self, problems, name):
        p = problems[name]
        h = 0.4 / max(p.lip_b, 0.8)
        bound = h * p.lip_b + 1e-9
        cfg = SchemeConfig(n_steps=max(1, math.ceil(p.horizon / h)))
        h = check_step_size(p, cfg)
        rng = np.random.default_rng(3)
        for _ in range(100):
            x = float(_random_states(p, rng, 1)[0])
            dw = rng.normal(0, math.sqrt(h))
            x_star, _ = we.implicit_step(
                p, SchemeConfig(n_steps=cfg.n_steps, fp_tol=1e-15, fp_max_iter=300),
                h, x, dw)
            xi = x + p.sigma(x) * dw
            y, err_prev = xi, abs(xi - x_star)
            for _ in range(12):
                y = xi + h * p.b(y)
                err = abs(y - x_star)
                if err_prev <= 1e-8:
                    break
                assert err <= bound * err_prev + 1e-15
                err_prev = err


class TestRunPath:
    def test_constant_path_for_zero_increments(self, problems):
        out = we.run_path(problems["bm"], SchemeConfig(n_steps=5), np.zeros(5))
        assert np.array_equal(out, np.zeros(6))

    def test_single_explicit_step(self, problems):
        # gbm keeps h * lip_b inside the guard even at N = 1
        p = problems["gbm"]
        cfg = SchemeConfig(n_steps=1, kind="explicit")
        out = we.run_path(p, cfg, [0.3])
        assert out[0] == p.x0
        assert out[1] == we.explicit_step(p, 1.0, p.x0, 0.3)

    def test_solvers_agree_along_paths(self, problems):
        p = problems["ou"]
        incs = np.random.default_rng(4).normal(0, 0.25, 16)
        path_fp = we.run_path(p, SchemeConfig(n_steps=16, solver="fixed_point"), incs)
        path_cf = we.run_path(p, SchemeConfig(n_steps=16, solver="closed_form_affine"), incs)
        assert np.max(np.abs(path_fp - path_cf)) <= 16 * 1e-12

    def test_wrong_length_rejected(self, problems):
        with pytest.raises(ValueError):
            we.run_path(problems["bm"], SchemeConfig(n_steps=4), np.zeros(5))

    def test_step_guard_applies(self, problems):
        with pytest.raises(we.StepSizeError):
            we.run_path(problems["tanh"], SchemeConfig(n_steps=1), [0.1])

    def test_failure_reports_step_index(self, problems):
        cfg = SchemeConfig(n_steps=4, fp_tol=1e-16, fp_max_iter=1)
        with pytest.raises(we.NoConvergence) as exc:
            we.run_path(problems["tanh"], cfg, [0.5, 0.5, 0.5, 0.5])
        assert exc.value.step_index == 0

    def test_iterate_path_states(self, problems):
        p = problems["ou"]
        cfg = SchemeConfig(n_steps=6)
        incs = np.random.default_rng(8).normal(0, 0.4, 6)
        states = list(we.iterate_path(p, cfg, incs))
        assert [s.k for s in states] == list(range(7))
        assert [s.rng_draws for s in states] == list(range(7))
        assert states[0].x == p.x0
        assert np.array_equal([s.x for s in states], we.run_path(p, cfg, incs))
        with pytest.raises(ValueError):
            we.PathState(k=-1, x=0.0, rng_draws=0)

    def test_run_paths_matches_run_path(self, problems):
        p = problems["gbm"]
        cfg = SchemeConfig(n_steps=8)
        incs = np.random.default_rng(5).normal(0, 0.35, (6, 8))
        full = we.run_paths(p, cfg, incs, keep_path=True)
        for i in range(6):
            assert np.array_equal(full[i], we.run_path(p, cfg, incs[i]))
        terminal = we.run_paths(p, cfg, incs)
        assert np.array_equal(terminal, full[:, -1])

    def test_moment_boundedness_smoke(self, problems):
        # full 1e5-path sweep lives in the acceptance suite
        p = problems["tanh"]
        rng = np.random.default_rng(6)
        sups = []
        for n in (8, 64):
            incs = rng.normal(0, math.sqrt(p.horizon / n), (2000, n))
            path = we.run_paths(p, SchemeConfig(n_steps=n), incs, keep_path=True)
            sups.append(np.max(np.mean(path**4, axis=0)))
        assert max(sups) / min(sups) < 2.0


class TestPathwiseDerivative:
    def test_pure_diffusion_is_exact(self, problems):
        fd, theory = we.pathwise_derivative_check(
            problems["bm"], SchemeConfig(n_steps=8), 0.125, 0.4, 0.2, eps=1e-4)
        assert fd == pytest.approx(1.0, abs=1e-12)
        assert theory == 1.0

    def test_ou_matches_resolvent(self, problems):
        cfg = SchemeConfig(n_steps=10, fp_tol=1e-14, fp_max_iter=200)
        fd, theory = we.pathwise_derivative_check(problems["ou"], cfg, 0.1, 1.0, 0.3,
                                                  eps=1e-4)
        assert theory == pytest.approx(1.0 / 1.1, abs=1e-14)
        assert abs(fd - theory) <= 1e-8

    def test_tanh_central_difference(self, problems):
        cfg = SchemeConfig(n_steps=10, fp_tol=1e-14, fp_max_iter=200)
        fd, theory = we.pathwise_derivative_check(problems["tanh"], cfg, 0.1, 0.0, 0.1,
                                                  eps=1e-5)
        assert abs(fd - theory) <= 1e-7

    def test_requires_implicit_kind(self, problems):
        with pytest.raises(ValueError):
            we.pathwise_derivative_check(problems["ou"],
                                         SchemeConfig(n_steps=8, kind="explicit"),
                                         0.125, 1.0, 0.0, eps=1e-5)


class TestSchemeConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SchemeConfig(n_steps=0)
        with pytest.raises(ValueError):
            SchemeConfig(n_steps=4, kind="midpoint")
        with pytest.raises(ValueError):
            SchemeConfig(n_steps=4, solver="bisect")
        with pytest.raises(ValueError):
            SchemeConfig(n_steps=4, fp_tol=0.0)

    def test_step_guard_constant(self, problems):
        # h * lip_b = 0.5 is allowed, anything beyond is not
        assert check_step_size(problems["tanh"], SchemeConfig(n_steps=2)) == 0.5
        assert MAX_H_LIP == 0.5
