"""Seeded Monte Carlo weak-error estimation with coupled grids.

All grid levels of one run consume the same fine Brownian increments
(coarse increments are sums of consecutive fine ones), so level estimates are
strongly correlated and their differences -- the quantities Richardson
extrapolation feeds on -- carry far less variance than independent runs
would.  Streams are counter-based (see :mod:`weakerr.rng`): a report is a
bitwise-deterministic function of (problem, McConfig, scheme settings),
independent of batch execution order or worker count.

For problems with a closed-form E f(X_T) the reference is exact; otherwise a
fine-grid surrogate 2 E f(X^{2M}) - E f(X^{M}) with M = finest_n / 2 is used,
whose own bias is O(h_fine^2) after the Richardson correction.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import rng
from .moments_oracle import weak_error_exact
from .problems import Problem
from .schemes import NoConvergence, SchemeConfig, run_paths

SOURCES = ("mc", "oracle", "psi_prediction")
REFERENCE_SOURCES = ("exact", "surrogate")

_BATCH = 1 << 14
# Surrogate references need the fine grid well separated from the levels
# it judges.
_SURROGATE_MARGIN = 8


@dataclass(frozen=True)
class McConfig:
    """Sampling plan: path count, seed, coupled grid levels."""

    n_paths: int
    seed: int
    finest_n: int
    levels: tuple
    antithetic: bool = True

    def __post_init__(self):
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        if self.n_paths < 100:
            raise ValueError("n_paths must be at least 100")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.finest_n < 1 or self.finest_n & (self.finest_n - 1):
            raise ValueError("finest_n must be a positive power of two")
        if not self.levels:
            raise ValueError("levels must be nonempty")
        for n in self.levels:
            if n < 1 or self.finest_n % n:
                raise ValueError(f"level {n} does not divide finest_n = {self.finest_n}")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("antithetic sampling needs an even n_paths")


@dataclass(frozen=True)
class LevelEstimate:
    """Weak-error estimate of one grid level."""

    n_steps: int
    h: float
    estimate: float
    stderr: float
    source: str

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"source must be one of {SOURCES}")
        if self.stderr < 0:
            raise ValueError("stderr must be nonnegative")
        if self.source != "mc" and self.stderr != 0.0:
            raise ValueError(f"{self.source} estimates are noise-free; stderr must be 0")


@dataclass(frozen=True)
class WeakErrorReport:
    """Per-level weak-error estimates against a common reference.

    ``covariance`` (when present) is the sampling-unit covariance matrix of
    the per-level error variables, in level order; it feeds the Richardson
    stderr and is not part of the serialized schema.
    """

    problem: str
    scheme: str
    reference: float
    reference_source: str
    levels: tuple
    covariance: Optional[np.ndarray] = field(default=None, repr=False, compare=False)
    n_units: int = 0

    def __post_init__(self):
        if self.reference_source not in REFERENCE_SOURCES:
            raise ValueError(f"reference_source must be one of {REFERENCE_SOURCES}")

    def to_json_dict(self) -> dict:
        return {
            "problem": self.problem,
            "scheme": self.scheme,
            "reference": self.reference,
            "reference_source": self.reference_source,
            "levels": [
                {"n_steps": lv.n_steps, "h": lv.h, "estimate": lv.estimate,
                 "stderr": lv.stderr, "source": lv.source}
                for lv in self.levels
            ],
        }


@dataclass(frozen=True)
class RichardsonPoint:
    """Extrapolated error 2 E_{h/2} - E_h at coarse step h."""

    h: float
    extrapolated_error: float
    stderr: float


def sample_increments(cfg: McConfig, path_index: int, horizon: float = 1.0) -> np.ndarray:
    """The finest-grid Brownian increments of one path, N(0, horizon/finest_n).

    Reproducible in isolation: the draw depends only on (seed, path_index).
    """
    return rng.gaussian_increments(cfg.seed, [path_index], cfg.finest_n,
                                   horizon / cfg.finest_n)[0]


def _coarsen(fine: np.ndarray, n_steps: int) -> np.ndarray:
    m = fine.shape[1] // n_steps
    if m == 1:
        return fine
    return fine.reshape(fine.shape[0], n_steps, m).sum(axis=2)


def _n_workers() -> int:
    try:
        return max(1, int(os.environ.get("WEAKERR_THREADS", "1")))
    except ValueError:
        return 1


def estimate_weak_error(p: Problem, mc: McConfig, kind: str, *,
                        fp_tol: float = 1e-12, fp_max_iter: int = 100,
                        solver: Optional[str] = None) -> WeakErrorReport:
    """Monte Carlo weak errors E f(X^N_T) - reference on all coupled levels.

    ``kind`` selects the scheme; implicit steps use ``solver`` (closed form
    for affine drifts unless overridden).  With antithetic sampling the
    statistical unit is the (+dW, -dW) pair.
    """
    if solver is None:
        solver = "closed_form_affine" if p.affine is not None else "fixed_point"
    levels = tuple(sorted(set(mc.levels)))
    sim_levels = list(levels)
    surrogate = p.exact_terminal is None
    if surrogate:
        if mc.finest_n < _SURROGATE_MARGIN * levels[-1]:
            raise ValueError(
                f"surrogate reference needs finest_n >= {_SURROGATE_MARGIN} * "
                f"largest level ({_SURROGATE_MARGIN * levels[-1]}), got {mc.finest_n}")
        sim_levels += [mc.finest_n // 2, mc.finest_n]

    configs = [SchemeConfig(n_steps=n, kind=kind, fp_tol=fp_tol,
                            fp_max_iter=fp_max_iter, solver=solver)
               for n in sim_levels]
    n_units = mc.n_paths // 2 if mc.antithetic else mc.n_paths
    h_fine = p.horizon / mc.finest_n
    n_report = len(levels)

    def payoffs(cfg: SchemeConfig, incs: np.ndarray) -> np.ndarray:
        return np.asarray(p.f(run_paths(p, cfg, incs)), dtype=float)

    def run_batch(batch_index: int):
        lo = batch_index * _BATCH
        hi = min(lo + _BATCH, n_units)
        idx = np.arange(lo, hi, dtype=np.uint64)
        fine = rng.gaussian_increments(mc.seed, idx, mc.finest_n, h_fine)
        vals = []
        for cfg in configs:
            coarse = _coarsen(fine, cfg.n_steps)
            try:
                v = payoffs(cfg, coarse)
                if mc.antithetic:
                    v = 0.5 * (v + payoffs(cfg, -coarse))
            except NoConvergence as err:
                path = lo + (err.path_index or 0)
                raise NoConvergence(
                    f"level {cfg.n_steps}, path {path}: {err}",
                    step_index=err.step_index, path_index=path) from err
            vals.append(v)
        if surrogate:
            ref = 2.0 * vals[-1] - vals[-2]
        else:
            ref = np.full(hi - lo, p.exact_terminal())
        err_rows = np.stack([v - ref for v in vals[:n_report]])
        return err_rows.sum(axis=1), err_rows @ err_rows.T, float(ref.sum())

    n_batches = (n_units + _BATCH - 1) // _BATCH
    workers = min(_n_workers(), n_batches)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            partials = list(pool.map(run_batch, range(n_batches)))
    else:
        partials = [run_batch(i) for i in range(n_batches)]

    sums = np.zeros(n_report)
    prods = np.zeros((n_report, n_report))
    ref_sum = 0.0
    for s, c, r in partials:  # fixed batch order: bitwise deterministic
        sums += s
        prods += c
        ref_sum += r

    n = n_units
    means = sums / n
    cov = (prods - np.outer(sums, sums) / n) / (n - 1)
    reference = p.exact_terminal() if not surrogate else ref_sum / n
    level_estimates = tuple(
        LevelEstimate(
            n_steps=nl,
            h=p.horizon / nl,
            estimate=float(means[j]),
            stderr=float(np.sqrt(max(cov[j, j], 0.0) / n)),
            source="mc",
        )
        for j, nl in enumerate(levels)
    )
    return WeakErrorReport(
        problem=p.name, scheme=kind, reference=float(reference),
        reference_source="surrogate" if surrogate else "exact",
        levels=level_estimates, covariance=cov, n_units=n,
    )


def oracle_report(p: Problem, kind: str, levels) -> WeakErrorReport:
    """Noise-free weak errors from the moment oracle, in report form."""
    levels = tuple(sorted(set(int(n) for n in levels)))
    ests = tuple(
        LevelEstimate(n_steps=n, h=p.horizon / n,
                      estimate=weak_error_exact(p, SchemeConfig(n_steps=n, kind=kind)),
                      stderr=0.0, source="oracle")
        for n in levels
    )
    return WeakErrorReport(problem=p.name, scheme=kind,
                           reference=p.exact_terminal(), reference_source="exact",
                           levels=ests)


def richardson(report: WeakErrorReport) -> list:
    """First-order extrapolation on every matched (N, 2N) pair of levels.

    extrapolated_error(h) = 2 * estimate(2N) - estimate(N); the h-expansion
    of the weak error makes this O(h^2).  Standard errors use the empirical
    path-level covariance when the report carries one.
    """
    order = {lv.n_steps: j for j, lv in enumerate(report.levels)}
    pairs = [(n, 2 * n) for n in sorted(order) if 2 * n in order]
    if not pairs:
        raise ValueError("report has no matched (N, 2N) level pair")
    out = []
    for n, n2 in pairs:
        a, b = order[n], order[n2]
        la, lb = report.levels[a], report.levels[b]
        extrap = 2.0 * lb.estimate - la.estimate
        if report.covariance is not None and report.n_units > 1:
            cov = report.covariance
            var = (4.0 * cov[b, b] + cov[a, a] - 4.0 * cov[a, b]) / report.n_units
            stderr = float(np.sqrt(max(var, 0.0)))
        else:
            stderr = float(np.hypot(2.0 * lb.stderr, la.stderr))
        out.append(RichardsonPoint(h=la.h, extrapolated_error=float(extrap),
                                   stderr=stderr))
    return out
