"""Benchmark scalar SDE problems.

A :class:`Problem` bundles the drift b, diffusion sigma and payoff f of
``dX = b(X) dt + sigma(X) dW`` as derivative jets (for the density algebra)
and as vectorized callables (for path simulation), plus, where closed forms
exist, the solution u(t, x) of the backward equation

    du/dt + b du/dx + (1/2) sigma^2 d2u/dx2 = 0,   u(T, .) = f,

the terminal expectation E f(X_T) and the exact marginal law of X_t.

Two affine families cover the closed-form benchmarks:

* mean-reverting family  b(x) = b1*x, sigma constant   (Brownian motion is
  the b1 = 0 case) -- Gaussian marginals, so E f(X_T | X_t = x) for a
  polynomial f is again a polynomial in x with exactly computable
  coefficients;
* proportional family    b(x) = b1*x, sigma(x) = s1*x  -- lognormal
  marginals, where monomial expectations pick up exponential factors.

The hyperbolic-drift benchmark (b = tanh, sigma = c*sqrt(1+x^2), f = cos) has
no closed forms and exercises the Monte Carlo route only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .jets import Jet4

MARGINAL_FAMILIES = ("gaussian", "lognormal", "dirac")


@dataclass(frozen=True)
class MarginalLaw:
    """Exact law of X_t for an affine benchmark.

    For the gaussian family ``mean``/``variance`` are the moments of X_t
    itself; for the lognormal family they are the mean and variance of
    log X_t.  A dirac law has variance 0 and mass at ``mean``.
    """

    mean: float
    variance: float
    family: str

    def __post_init__(self):
        if self.family not in MARGINAL_FAMILIES:
            raise ValueError(f"unknown marginal family {self.family!r}")
        if self.variance < 0:
            raise ValueError("variance must be nonnegative")
        if self.family == "dirac" and self.variance != 0.0:
            raise ValueError("a dirac law has zero variance")


@dataclass(frozen=True)
class AffineModel:
    """Coefficients of an affine benchmark: b(x) = b1*x, sigma(x) = s0 + s1*x.

    Exactly one of s0, s1 may be nonzero; s1 != 0 requires b of proportional
    form too (lognormal family).
    """

    b1: float
    s0: float
    s1: float

    def __post_init__(self):
        if self.s0 != 0.0 and self.s1 != 0.0:
            raise ValueError("diffusion must be either constant or proportional, not mixed")
        if self.s0 == 0.0 and self.s1 == 0.0:
            raise ValueError("diffusion must not vanish identically")


@dataclass(frozen=True)
class Problem:
    """An SDE benchmark: coefficients, payoff, and whatever closed forms exist.

    ``b_jet``/``sigma_jet`` provide at least two trustworthy derivatives;
    ``u_jet``, when present, provides four and satisfies the backward PDE.
    ``b``, ``b_prime``, ``sigma`` and ``f`` accept scalars or numpy arrays.
    """

    name: str
    x0: float
    horizon: float
    lip_b: float
    b_jet: Callable[[float], Jet4]
    sigma_jet: Callable[[float], Jet4]
    f_jet: Callable[[float], Jet4]
    b: Callable
    b_prime: Callable
    sigma: Callable
    f: Callable
    u_jet: Optional[Callable[[float, float], Jet4]] = None
    exact_terminal: Optional[Callable[[], float]] = None
    f_poly: Optional[tuple] = None
    affine: Optional[AffineModel] = None


# ---------------------------------------------------------------------------
# polynomial helpers
# ---------------------------------------------------------------------------

def _poly_derivs(coeffs, x: float) -> tuple:
    """Value and first four derivatives of sum c_j x^j at x."""
    out = []
    for k in range(5):
        acc = 0.0
        for j in range(k, len(coeffs)):
            acc += coeffs[j] * math.perm(j, k) * x ** (j - k)
        out.append(float(acc))
    return tuple(out)


def _poly_jet(coeffs, x: float) -> Jet4:
    return Jet4(_poly_derivs(coeffs, x))


def _gaussian_central_moment(k: int, var: float) -> float:
    """E Z^k for Z ~ N(0, var): (k-1)!! var^(k/2) for even k, else 0."""
    if k % 2 == 1:
        return 0.0
    acc = 1.0
    for j in range(1, k, 2):
        acc *= j
    return acc * var ** (k // 2)


def _gaussian_poly_push(coeffs, scale: float, var: float) -> tuple:
    """Coefficients of q(x) = E p(scale*x + Z), Z ~ N(0, var), p = sum c_j x^j."""
    deg = len(coeffs) - 1
    out = [0.0] * (deg + 1)
    for j, c in enumerate(coeffs):
        if c == 0.0:
            continue
        for i in range(j + 1):
            out[i] += c * math.comb(j, i) * scale**i * _gaussian_central_moment(j - i, var)
    return tuple(out)


def _const_fn(c: float):
    return lambda x: c + 0.0 * x


# ---------------------------------------------------------------------------
# problem builders
# ---------------------------------------------------------------------------

def _ou_transition(b1: float, sigma: float, dt):
    """Mean scale and variance of X_{t+dt} given X_t = x: (e^{b1 dt}, var)."""
    scale = float(np.exp(b1 * dt))
    if b1 == 0.0:
        var = sigma**2 * dt
    else:
        var = float(sigma**2 * np.expm1(2.0 * b1 * dt) / (2.0 * b1))
    return scale, var


def ou_family_problem(
    name: str,
    theta: float,
    sigma: float,
    f_poly,
    x0: float,
    horizon: float,
) -> Problem:
    """Mean-reverting benchmark: b(x) = -theta*x, constant sigma, polynomial f.

    theta = 0 gives driftless Brownian motion.  All closed forms (u, terminal
    expectation, marginals) follow from the Gaussian transition law.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    f_poly = tuple(float(c) for c in f_poly)
    if len(f_poly) > 5:
        raise ValueError("payoff degree above 4 is not representable in a Jet4")
    b1 = -float(theta)

    def u_jet(t: float, x: float) -> Jet4:
        scale, var = _ou_transition(b1, sigma, horizon - t)
        return _poly_jet(_gaussian_poly_push(f_poly, scale, var), x)

    def exact_terminal() -> float:
        scale, var = _ou_transition(b1, sigma, horizon)
        return float(np.polynomial.polynomial.polyval(
            x0, _gaussian_poly_push(f_poly, scale, var)))

    return Problem(
        name=name,
        x0=float(x0),
        horizon=float(horizon),
        lip_b=abs(b1),
        b_jet=lambda x: Jet4((b1 * x, b1, 0.0, 0.0, 0.0)),
        sigma_jet=lambda x: Jet4.constant(sigma),
        f_jet=lambda x: _poly_jet(f_poly, x),
        b=lambda x: b1 * x,
        b_prime=_const_fn(b1),
        sigma=_const_fn(sigma),
        f=lambda x: np.polynomial.polynomial.polyval(x, f_poly),
        u_jet=u_jet,
        exact_terminal=exact_terminal,
        f_poly=f_poly,
        affine=AffineModel(b1=b1, s0=float(sigma), s1=0.0),
    )


def gbm_family_problem(
    name: str,
    mu: float,
    s: float,
    f_poly,
    x0: float,
    horizon: float,
) -> Problem:
    """Proportional benchmark: b(x) = mu*x, sigma(x) = s*x, polynomial f.

    Requires x0 > 0 (lognormal marginals).  E X_T^j given X_t = x equals
    x^j exp((j*mu + j(j-1) s^2/2) (T-t)), so u stays polynomial in x.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if s <= 0:
        raise ValueError("s must be positive")
    if x0 <= 0:
        raise ValueError("proportional-diffusion problems need x0 > 0")
    f_poly = tuple(float(c) for c in f_poly)
    if len(f_poly) > 5:
        raise ValueError("payoff degree above 4 is not representable in a Jet4")
    mu = float(mu)
    s = float(s)

    def _pushed(tau: float) -> tuple:
        return tuple(
            c * math.exp((j * mu + 0.5 * j * (j - 1) * s**2) * tau)
            for j, c in enumerate(f_poly)
        )

    return Problem(
        name=name,
        x0=float(x0),
        horizon=float(horizon),
        lip_b=abs(mu),
        b_jet=lambda x: Jet4((mu * x, mu, 0.0, 0.0, 0.0)),
        sigma_jet=lambda x: Jet4((s * x, s, 0.0, 0.0, 0.0)),
        f_jet=lambda x: _poly_jet(f_poly, x),
        b=lambda x: mu * x,
        b_prime=_const_fn(mu),
        sigma=lambda x: s * x,
        f=lambda x: np.polynomial.polynomial.polyval(x, f_poly),
        u_jet=lambda t, x: _poly_jet(_pushed(horizon - t), x),
        exact_terminal=lambda: float(
            np.polynomial.polynomial.polyval(x0, _pushed(horizon))),
        f_poly=f_poly,
        affine=AffineModel(b1=mu, s0=0.0, s1=s),
    )


def tanh_problem(name: str = "tanh", c: float = 0.25, x0: float = 0.4,
                 horizon: float = 1.0) -> Problem:
    """Smooth nonlinear benchmark with no closed forms.

    b(x) = tanh(x), sigma(x) = c*sqrt(1+x^2), f(x) = cos(x).  sup|b'| = 1.
    """
    if c <= 0:
        raise ValueError("c must be positive")

    def b_jet(x: float) -> Jet4:
        t = math.tanh(x)
        sech2 = 1.0 - t * t
        return Jet4((t, sech2, -2.0 * t * sech2, 0.0, 0.0), valid_order=2)

    def sigma_jet(x: float) -> Jet4:
        r = math.sqrt(1.0 + x * x)
        return Jet4((c * r, c * x / r, c / r**3, 0.0, 0.0), valid_order=2)

    def f_jet(x: float) -> Jet4:
        return Jet4((math.cos(x), -math.sin(x), -math.cos(x), math.sin(x), math.cos(x)))

    return Problem(
        name=name,
        x0=float(x0),
        horizon=float(horizon),
        lip_b=1.0,
        b_jet=b_jet,
        sigma_jet=sigma_jet,
        f_jet=f_jet,
        b=np.tanh,
        b_prime=lambda x: 1.0 - np.tanh(x) ** 2,
        sigma=lambda x: c * np.sqrt(1.0 + x * x),
        f=np.cos,
    )


def builtin_problems() -> list:
    """The four desk-scale benchmarks."""
    return [
        ou_family_problem("bm", theta=0.0, sigma=1.0,
                          f_poly=(0.0, 0.0, 0.0, 0.0, 1.0), x0=0.0, horizon=1.0),
        ou_family_problem("ou", theta=1.0, sigma=1.0,
                          f_poly=(0.0, 0.0, 1.0), x0=1.0, horizon=1.0),
        gbm_family_problem("gbm", mu=0.05, s=0.2,
                           f_poly=(0.0, 0.0, 1.0), x0=1.0, horizon=1.0),
        tanh_problem(),
    ]


def get_problem(name: str) -> Problem:
    for p in builtin_problems():
        if p.name == name:
            return p
    raise ValueError(f"unknown problem {name!r}; try one of bm, ou, gbm, tanh")


# ---------------------------------------------------------------------------
# closed-form checks and laws
# ---------------------------------------------------------------------------

def kolmogorov_residual(p: Problem, t: float, x: float, dt_step: float) -> float:
    """|du/dt + b du/dx + (1/2) sigma^2 d2u/dx2| at (t, x).

    The time derivative is a second-order finite difference of u_jet values
    with step ``dt_step`` (one-sided at the t = 0 boundary); the spatial
    derivatives come from the jet itself.
    """
    if p.u_jet is None:
        raise ValueError(f"problem {p.name!r} has no closed-form u")
    if not 0.0 <= t < p.horizon:
        raise ValueError("need 0 <= t < horizon")
    if dt_step <= 0 or t + dt_step > p.horizon:
        raise ValueError("need dt_step > 0 and t + dt_step <= horizon")

    def uval(s: float) -> float:
        return p.u_jet(s, x).value()

    if t - dt_step >= 0.0:
        du_dt = (uval(t + dt_step) - uval(t - dt_step)) / (2.0 * dt_step)
    else:
        # one-sided 3-point stencil keeps O(dt^2) accuracy at the boundary
        du_dt = (-3.0 * uval(t) + 4.0 * uval(t + dt_step)
                 - uval(t + 2.0 * dt_step)) / (2.0 * dt_step)

    uj = p.u_jet(t, x)
    bval = p.b_jet(x).value()
    sval = p.sigma_jet(x).value()
    return abs(du_dt + bval * uj.deriv(1) + 0.5 * sval**2 * uj.deriv(2))


def marginal_law(p: Problem, t: float) -> MarginalLaw:
    """Exact law of X_t for the affine benchmarks; dirac at t = 0."""
    if p.affine is None:
        raise ValueError(f"problem {p.name!r} has no closed-form marginal law")
    if not 0.0 <= t <= p.horizon:
        raise ValueError("need 0 <= t <= horizon")
    if t == 0.0:
        return MarginalLaw(mean=p.x0, variance=0.0, family="dirac")
    a = p.affine
    if a.s1 == 0.0:
        scale, var = _ou_transition(a.b1, a.s0, t)
        return MarginalLaw(mean=p.x0 * float(scale), variance=float(var), family="gaussian")
    return MarginalLaw(
        mean=math.log(p.x0) + (a.b1 - 0.5 * a.s1**2) * t,
        variance=a.s1**2 * t,
        family="lognormal",
    )
