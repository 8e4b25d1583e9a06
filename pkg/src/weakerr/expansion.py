"""Leading-order weak-error densities and their integrals.

The weak error of an Euler scheme expands as h * E int_0^T psi(t, X_t) dt
+ O(h^2), where psi depends on the scheme.  With u the backward-equation
solution and all derivatives spatial:

* implicit scheme:

    psi_i = 1/2 b d(b du) + 1/4 s^2 D(b du) - 1/2 b^2 Du + 1/8 s^4 d4u
            - 1/4 b d(s^2 Du) - 1/8 s^2 D(s^2 Du),

  writing d for one derivative, D for two, s for sigma;

* explicit scheme (time derivatives already eliminated via the PDE):

    psi_e = 1/2 b^2 Du + 1/2 b s^2 d3u + 1/8 s^4 d4u - 1/2 b d(b du)
            - 1/4 b d(s^2 Du) - 1/4 s^2 D(b du) - 1/8 s^2 D(s^2 Du);

* the h-dependent intermediate density of the implicit analysis, built from
  the resolvent S_h = 1/(1 - h b'):

    psi_ih = 1/2 b d(b du) - 1/2 b^2 Du + 1/4 s^2 S_h^2 b'' du
             + 1/4 b s^2 d3u + 1/8 s^4 d4u + 1/2 b' S_h s^2 Du
             - 1/4 b d(s^2 Du) - 1/8 s^2 D(s^2 Du).

Everything is evaluated as jet algebra on (b, sigma, u) jets.  The exact
algebraic relations between the three densities ship alongside as residual
checks, and the leading constant C1 = E int_0^T psi(t, X_t) dt is computed by
Gauss-Legendre panels in time crossed with Gauss-Hermite in space under the
exact marginal law.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .jets import Jet4, jet_derive
from .problems import Problem, marginal_law
from .schemes import SingularSh

PSI_NAMES = ("psi_i", "psi_e", "psi_ih")

_SINGULAR_TOL = 1e-12
_GH_POINTS = 64
_GL_PER_PANEL = 8

# Probabilists' Gauss-Hermite rule, normalized so weights sum to one:
# sum_i w_i g(z_i) ~ E g(Z), Z ~ N(0, 1).
_GH_Z, _GH_W = np.polynomial.hermite_e.hermegauss(_GH_POINTS)
_GH_W = _GH_W / _GH_W.sum()

_GL_X, _GL_W = np.polynomial.legendre.leggauss(_GL_PER_PANEL)


@dataclass(frozen=True)
class PsiKind:
    """Which density to evaluate; psi_ih carries its step size h."""

    name: str
    h: Optional[float] = None

    def __post_init__(self):
        if self.name not in PSI_NAMES:
            raise ValueError(f"kind must be one of {PSI_NAMES}, got {self.name!r}")
        if self.name == "psi_ih":
            if self.h is None or self.h <= 0:
                raise ValueError("psi_ih needs an associated h > 0")
        elif self.h is not None:
            raise ValueError(f"{self.name} is h-free; do not attach an h")


PSI_I = PsiKind("psi_i")
PSI_E = PsiKind("psi_e")


def psi_ih_kind(h: float) -> PsiKind:
    return PsiKind("psi_ih", h=float(h))


@dataclass(frozen=True)
class LeadingConstant:
    """C1 = E int_0^T psi(t, X_t) dt with a node-doubling error estimate."""

    value: float
    quad_nodes: int
    abs_err_est: float


def _require_orders(b: Jet4, sigma: Jet4, u: Jet4) -> None:
    # Raise through the jet accessors so the error message names the culprit.
    u.deriv(4)
    b.deriv(2)
    sigma.deriv(2)


def _resolvent(b: Jet4, h: float) -> float:
    den = 1.0 - h * b.deriv(1)
    if abs(den) < _SINGULAR_TOL:
        raise SingularSh(f"1 - h b' within {_SINGULAR_TOL} of zero")
    return 1.0 / den


def _pieces(b: Jet4, sigma: Jet4, u: Jet4):
    """The composite derivatives shared by all three densities."""
    du = jet_derive(u)
    lap_u = jet_derive(du)
    b_du = b * du
    d_bdu = jet_derive(b_du)
    lap_bdu = jet_derive(d_bdu)
    sig2 = sigma * sigma
    sig2_lap = sig2 * lap_u
    d_sig2lap = jet_derive(sig2_lap)
    lap_sig2lap = jet_derive(d_sig2lap)
    return du, lap_u, d_bdu, lap_bdu, sig2, d_sig2lap, lap_sig2lap


def eval_psi(kind, b: Jet4, sigma: Jet4, u: Jet4, h: Optional[float] = None) -> float:
    """Evaluate the selected density at one jet point.

    ``kind`` is a :class:`PsiKind` or one of the names in ``PSI_NAMES``; for
    psi_ih the step size comes from the kind or the ``h`` argument.
    """
    if isinstance(kind, str):
        kind = PsiKind(kind, h=h)
    elif h is not None:
        if kind.name != "psi_ih":
            raise ValueError(f"{kind.name} is h-free; do not pass h")
        if kind.h is not None and kind.h != h:
            raise ValueError("conflicting h between kind and argument")
        kind = PsiKind(kind.name, h=h)
    _require_orders(b, sigma, u)

    _, lap_u, d_bdu, lap_bdu, sig2, d_sig2lap, lap_sig2lap = _pieces(b, sigma, u)
    bv = b.value()
    s2 = sig2.value()
    lap = lap_u.value()
    d3u = u.deriv(3)
    d4u = u.deriv(4)

    if kind.name == "psi_i":
        return (0.5 * bv * d_bdu.value()
                + 0.25 * s2 * lap_bdu.value()
                - 0.5 * bv**2 * lap
                + 0.125 * s2**2 * d4u
                - 0.25 * bv * d_sig2lap.value()
                - 0.125 * s2 * lap_sig2lap.value())

    if kind.name == "psi_e":
        return (0.5 * bv**2 * lap
                + 0.5 * bv * s2 * d3u
                + 0.125 * s2**2 * d4u
                - 0.5 * bv * d_bdu.value()
                - 0.25 * bv * d_sig2lap.value()
                - 0.25 * s2 * lap_bdu.value()
                - 0.125 * s2 * lap_sig2lap.value())

    sh = _resolvent(b, kind.h)
    return (0.5 * bv * d_bdu.value()
            - 0.5 * bv**2 * lap
            + 0.25 * s2 * sh**2 * b.deriv(2) * u.deriv(1)
            + 0.25 * bv * s2 * d3u
            + 0.125 * s2**2 * d4u
            + 0.5 * b.deriv(1) * sh * s2 * lap
            - 0.25 * bv * d_sig2lap.value()
            - 0.125 * s2 * lap_sig2lap.value())


def eval_psi_i_expanded(b: Jet4, sigma: Jet4, u: Jet4) -> float:
    """Independent implementation of the implicit density.

    All six terms are written out through explicit Leibniz formulas in
    (b, b', b'', sigma, sigma', sigma'', du..d4u) with no jet operations, as a
    cross-check on the algebraic route in :func:`eval_psi`.
    """
    _require_orders(b, sigma, u)
    b0, b1, b2 = b.deriv(0), b.deriv(1), b.deriv(2)
    s0, s1, s2 = sigma.deriv(0), sigma.deriv(1), sigma.deriv(2)
    u1, u2, u3, u4 = u.deriv(1), u.deriv(2), u.deriv(3), u.deriv(4)
    v = s0 * s0
    d_bdu = b1 * u1 + b0 * u2
    lap_bdu = b2 * u1 + 2.0 * b1 * u2 + b0 * u3
    d_v = 2.0 * s0 * s1
    lap_v = 2.0 * s1 * s1 + 2.0 * s0 * s2
    d_vlap = d_v * u2 + v * u3
    lap_vlap = lap_v * u2 + 2.0 * d_v * u3 + v * u4
    return (0.5 * b0 * d_bdu
            + 0.25 * v * lap_bdu
            - 0.5 * b0 * b0 * u2
            + 0.125 * v * v * u4
            - 0.25 * b0 * d_vlap
            - 0.125 * v * lap_vlap)


def psi_identity_residual(b: Jet4, sigma: Jet4, u: Jet4) -> float:
    """Residual of the algebraic relation tying the two scheme densities:

        psi_i = psi_e - b^2 Du + 1/2 s^2 D(b du) + b d(b du) - 1/2 b s^2 d3u.
    """
    _require_orders(b, sigma, u)
    _, lap_u, d_bdu, lap_bdu, sig2, _, _ = _pieces(b, sigma, u)
    bv = b.value()
    s2 = sig2.value()
    lhs = eval_psi(PSI_I, b, sigma, u)
    rhs = (eval_psi(PSI_E, b, sigma, u)
           - bv**2 * lap_u.value()
           + 0.5 * s2 * lap_bdu.value()
           + bv * d_bdu.value()
           - 0.5 * bv * s2 * u.deriv(3))
    return abs(lhs - rhs)


def psi_ih_gap(b: Jet4, sigma: Jet4, u: Jet4, h: float):
    """(psi_ih - psi_i, closed form) at one jet point.

    The closed form is 1/4 s^2 (S_h^2 - 1) b'' du + 1/2 b' (S_h - 1) s^2 Du;
    since S_h - 1 = h b' / (1 - h b'), the gap is O(h).
    """
    gap = (eval_psi(psi_ih_kind(h), b, sigma, u)
           - eval_psi(PSI_I, b, sigma, u))
    sh = _resolvent(b, h)
    s2 = (sigma * sigma).value()
    lap = jet_derive(jet_derive(u)).value()
    closed = (0.25 * s2 * (sh**2 - 1.0) * b.deriv(2) * u.deriv(1)
              + 0.5 * b.deriv(1) * (sh - 1.0) * s2 * lap)
    return gap, closed


# ---------------------------------------------------------------------------
# integration against the exact law of X_t
# ---------------------------------------------------------------------------

def psi_at(p: Problem, kind, t: float, x: float) -> float:
    """The selected density at (t, x) using the problem's coefficient jets."""
    if p.u_jet is None:
        raise ValueError(f"problem {p.name!r} has no closed-form u")
    return eval_psi(kind, p.b_jet(x), p.sigma_jet(x), p.u_jet(t, x))


def expect_psi(p: Problem, kind, t: float) -> float:
    """E psi(t, X_t) under the exact marginal law, by Gauss-Hermite."""
    law = marginal_law(p, t)
    if law.family == "dirac" or law.variance == 0.0:
        return psi_at(p, kind, t, law.mean)
    sd = np.sqrt(law.variance)
    if law.family == "gaussian":
        xs = law.mean + sd * _GH_Z
    else:
        xs = np.exp(law.mean + sd * _GH_Z)
    return float(sum(w * psi_at(p, kind, t, x) for w, x in zip(_GH_W, xs)))


def _time_integral(p: Problem, kind, panels: int) -> float:
    """Composite Gauss-Legendre integral of E psi(t, X_t) over [0, T]."""
    width = p.horizon / panels
    total = 0.0
    for i in range(panels):
        mid = (i + 0.5) * width
        for xi, w in zip(_GL_X, _GL_W):
            total += 0.5 * width * w * expect_psi(p, kind, mid + 0.5 * width * xi)
    return float(total)


def leading_constant(p: Problem, kind, quad_nodes: int = 64) -> LeadingConstant:
    """C1 = E int_0^T psi(t, X_t) dt by quadrature with error control.

    ``quad_nodes`` counts Gauss-Legendre panels in time (8 points each); the
    inner spatial expectation uses 64 Gauss-Hermite nodes.  The error estimate
    is the change under panel doubling.
    """
    if p.u_jet is None:
        raise ValueError(f"problem {p.name!r} has no closed-form u")
    if p.affine is None:
        raise ValueError(f"problem {p.name!r} has no closed-form marginal law")
    if quad_nodes < 1:
        raise ValueError("quad_nodes must be positive")
    value = _time_integral(p, kind, quad_nodes)
    refined = _time_integral(p, kind, 2 * quad_nodes)
    return LeadingConstant(value=value, quad_nodes=quad_nodes,
                           abs_err_est=abs(refined - value))


def riemann_psi_sum(p: Problem, kind, n_steps: int) -> float:
    """Left-endpoint Riemann sum h * sum_k E psi(t_k, X_{t_k}).

    Approaches the leading constant at rate O(h); the k = 0 term uses the
    dirac marginal at the initial condition.
    """
    if p.u_jet is None:
        raise ValueError(f"problem {p.name!r} has no closed-form u")
    if n_steps < 1:
        raise ValueError("n_steps must be positive")
    h = p.horizon / n_steps
    return h * sum(expect_psi(p, kind, k * h) for k in range(n_steps))
