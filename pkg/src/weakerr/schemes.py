"""Explicit and drift-implicit Euler steppers on the uniform grid t_k = k T / N.

The explicit step is X_{k+1} = X_k + b(X_k) h + sigma(X_k) dW_{k+1}; the
implicit step evaluates the drift at the unknown next state,

    X_{k+1} = X_k + b(X_{k+1}) h + sigma(X_k) dW_{k+1},

and is solved per step either by fixed-point iteration on
F(y) = xi + h b(y) with xi = X_k + sigma(X_k) dW (a contraction with constant
h * sup|b'| < 1), by Newton's method, or in closed form when b is affine.

All steppers accept scalars or numpy arrays of states/increments, so whole
path ensembles advance in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problems import Problem

KINDS = ("explicit", "implicit")
SOLVERS = ("fixed_point", "newton", "closed_form_affine")

# Reject configs outside h * sup|b'| <= MAX_H_LIP; strictly inside the
# contraction condition h * sup|b'| < 1, it keeps the resolvent 1/(1 - h b')
# in [2/3, 2] and the fixed-point iteration fast.
MAX_H_LIP = 0.5

_SINGULAR_TOL = 1e-12


class StepSizeError(ValueError):
    """The grid violates the step-size guard h * lip_b <= 0.5."""


class NoConvergence(RuntimeError):
    """The implicit solver exhausted its iteration budget."""

    def __init__(self, message, step_index=None, path_index=None):
        super().__init__(message)
        self.step_index = step_index
        self.path_index = path_index


class InvalidSolver(ValueError):
    """The requested solver does not apply to this problem."""


class SingularSh(ArithmeticError):
    """1 - h b'(x) is numerically zero, so the resolvent map is singular."""


@dataclass(frozen=True)
class PathState:
    """Scheme state after k steps: grid index, value, increments consumed."""

    k: int
    x: float
    rng_draws: int

    def __post_init__(self):
        if self.k < 0:
            raise ValueError("grid index must be nonnegative")
        if self.rng_draws < 0:
            raise ValueError("rng_draws must be nonnegative")


@dataclass(frozen=True)
class SchemeConfig:
    """Grid size and scheme kind, plus implicit-solver settings."""

    n_steps: int
    kind: str = "implicit"
    fp_tol: float = 1e-12
    fp_max_iter: int = 100
    solver: str = "fixed_point"

    def __post_init__(self):
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}, got {self.solver!r}")
        if self.fp_tol <= 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iter < 1:
            raise ValueError("fp_max_iter must be a positive integer")


def _worst_index(residual):
    """Position of the largest residual in an ensemble step, None for scalars."""
    return int(np.argmax(residual)) if np.ndim(residual) else None


def check_step_size(p: Problem, cfg: SchemeConfig) -> float:
    """Validate h * lip_b <= 0.5 and return h = T / N."""
    h = p.horizon / cfg.n_steps
    if h * p.lip_b > MAX_H_LIP:
        raise StepSizeError(
            f"h * lip_b = {h * p.lip_b:.3g} exceeds {MAX_H_LIP}; "
            f"raise n_steps above {p.horizon * p.lip_b / MAX_H_LIP:.3g}"
        )
    return h


def s_h(p: Problem, h: float, x):
    """The resolvent map S_h(x) = 1 / (1 - h b'(x))."""
    den = 1.0 - h * p.b_prime(x)
    if np.min(np.abs(den)) < _SINGULAR_TOL:
        raise SingularSh(f"1 - h b'(x) within {_SINGULAR_TOL} of zero")
    return 1.0 / den


def explicit_step(p: Problem, h: float, x, dw):
    """One explicit Euler step: x + b(x) h + sigma(x) dw."""
    return x + p.b(x) * h + p.sigma(x) * dw


def implicit_step(p: Problem, cfg: SchemeConfig, h: float, x, dw, start=None):
    """One drift-implicit step; returns (x_next, iterations_used).

    x_next solves y = xi + h b(y) with xi = x + sigma(x) dw, to residual
    |y - xi - h b(y)| <= cfg.fp_tol.  The fixed-point iteration starts from
    the explicit predictor xi unless ``start`` overrides it (the limit is the
    same unique fixed point either way).
    """
    if h * p.lip_b > MAX_H_LIP:
        raise StepSizeError(f"h * lip_b = {h * p.lip_b:.3g} exceeds {MAX_H_LIP}")
    xi = x + p.sigma(x) * dw

    if cfg.solver == "closed_form_affine":
        if p.affine is not None:
            b0, b1 = 0.0, p.affine.b1
        else:
            probe = float(np.asarray(x, dtype=float).flat[0])
            jb = p.b_jet(probe)
            if jb.deriv(2) != 0.0:
                raise InvalidSolver("closed_form_affine requires an affine drift (b'' = 0)")
            b1 = jb.deriv(1)
            b0 = jb.value() - b1 * probe
        return (xi + h * b0) / (1.0 - h * b1), 0

    if cfg.solver == "newton":
        y = xi if start is None else start
        for it in range(cfg.fp_max_iter):
            res = y - h * p.b(y) - xi
            if np.max(np.abs(res)) <= cfg.fp_tol:
                return y, it
            den = 1.0 - h * p.b_prime(y)
            if np.min(np.abs(den)) < _SINGULAR_TOL:
                raise SingularSh("Newton derivative 1 - h b'(y) is numerically zero")
            y = y - res / den
        raise NoConvergence(
            f"newton solver did not reach {cfg.fp_tol} in {cfg.fp_max_iter} iterations",
            path_index=_worst_index(res))

    # fixed_point: y_{i+1} = xi + h b(y_i); the residual of y_{i+1} equals
    # h |b(y_i) - b(y_{i+1})|, so one drift evaluation per iteration suffices.
    y = xi if start is None else start
    by = p.b(y)
    for it in range(cfg.fp_max_iter):
        y_next = xi + h * by
        by_next = p.b(y_next)
        res = h * np.abs(by_next - by)
        if np.max(res) <= cfg.fp_tol:
            return y_next, it + 1
        y, by = y_next, by_next
    raise NoConvergence(
        f"fixed-point solver did not reach {cfg.fp_tol} in {cfg.fp_max_iter} iterations",
        path_index=_worst_index(res))


def _step(p: Problem, cfg: SchemeConfig, h: float, x, dw):
    if cfg.kind == "explicit":
        return explicit_step(p, h, x, dw)
    x_next, _ = implicit_step(p, cfg, h, x, dw)
    return x_next


def iterate_path(p: Problem, cfg: SchemeConfig, increments):
    """Yield the :class:`PathState` at every grid point of one path.

    Starts at (k=0, x0, 0 draws); ``increments[k]`` is the Brownian increment
    consumed by step k.  The sequence is a deterministic function of
    (problem, config, increments).
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 1 or increments.shape[0] != cfg.n_steps:
        raise ValueError(f"expected {cfg.n_steps} increments, got shape {increments.shape}")
    h = check_step_size(p, cfg)
    x = p.x0
    yield PathState(k=0, x=x, rng_draws=0)
    for k in range(cfg.n_steps):
        try:
            x = _step(p, cfg, h, x, increments[k])
        except NoConvergence as err:
            raise NoConvergence(f"step {k}: {err}", step_index=k) from err
        yield PathState(k=k + 1, x=float(x), rng_draws=k + 1)


def run_path(p: Problem, cfg: SchemeConfig, increments) -> np.ndarray:
    """Run one path from x0; returns the N+1 grid values."""
    return np.array([state.x for state in iterate_path(p, cfg, increments)])


def run_paths(p: Problem, cfg: SchemeConfig, increments, keep_path: bool = False):
    """Advance a whole ensemble; rows of ``increments`` are independent paths.

    Returns the terminal values (default) or, with ``keep_path``, the full
    (n_paths, N+1) array.
    """
    increments = np.asarray(increments, dtype=float)
    if increments.ndim != 2 or increments.shape[1] != cfg.n_steps:
        raise ValueError(f"expected (n_paths, {cfg.n_steps}) increments, "
                         f"got shape {increments.shape}")
    h = check_step_size(p, cfg)
    x = np.full(increments.shape[0], p.x0)
    path = None
    if keep_path:
        path = np.empty((increments.shape[0], cfg.n_steps + 1))
        path[:, 0] = x
    for k in range(cfg.n_steps):
        try:
            x = _step(p, cfg, h, x, increments[:, k])
        except NoConvergence as err:
            raise NoConvergence(f"step {k}: {err}", step_index=k) from err
        if keep_path:
            path[:, k + 1] = x
    return path if keep_path else x


def pathwise_derivative_check(p: Problem, cfg: SchemeConfig, h: float, x, dw,
                              eps: float):
    """Central-difference d(step)/d(dw) against the theoretical value.

    Returns (fd, theory) with theory = S_h(x_next) * sigma(x); the caller
    asserts agreement to O(eps^2) + O(fp_tol / eps).
    """
    if cfg.kind != "implicit":
        raise ValueError("pathwise derivative check applies to the implicit scheme")
    if eps <= 0:
        raise ValueError("eps must be positive")
    x_plus, _ = implicit_step(p, cfg, h, x, dw + eps)
    x_minus, _ = implicit_step(p, cfg, h, x, dw - eps)
    fd = (x_plus - x_minus) / (2.0 * eps)
    x_next, _ = implicit_step(p, cfg, h, x, dw)
    theory = s_h(p, h, x_next) * p.sigma(x)
    return fd, theory
