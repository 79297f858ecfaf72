# oracle/checks.py
"""Named regeneration checks: closed forms against brute-force references.

Each check takes (seed, count) and returns (passed, detail). Operators are looked up
through their modules at call time, so a patched operator is what gets checked.
"""
from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Tuple

import numpy as np

from config.errors import InvalidInputError
from graphs.layout import BlockLayout, DiagonalOperator, SplitWeights, full_group
from operators import prox as P
from operators import smooth as S
from oracle.brute import fd_gradient, grid_minimize
from solvers import pfdr
from solvers.problem import SplitProblem

logger = logging.getLogger(__name__)

PROX_GAP = 1e-6
FD_REL_TOL = 1e-6
COCOERCIVITY_SLACK = 1e-10
REDUCTION_TOL = 1e-15

CheckFn = Callable[[int, int], Tuple[bool, str]]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float


# ---------------- Small canonical problems ----------------
def _soft_block(v, metric, param):
    return P.soft_threshold(v, param, metric)


def scalar_lasso_problem(gamma: float = 0.5, target: float = 2.0, weight: float = 1.0) -> SplitProblem:
    """min_x ½(x - target)² + weight |x| as one full block (A = ∂|·|), C = 0."""
    layout = BlockLayout(1, (full_group((1,), _soft_block, param=np.array([weight])),))
    return SplitProblem(
        shape=(1,),
        layout=layout,
        weights=SplitWeights((np.ones((1, 1)),)),
        gamma=DiagonalOperator([gamma]),
        smooth=S.quadratic_term([target]),
        objective=lambda x: 0.5 * float((x[0] - target) ** 2) + weight * abs(float(x[0])),
        name="lasso-1d",
    )


def single_block_problem(n: int, gamma: float, smooth: S.SmoothTerm, tau,
                         full_prox=None) -> SplitProblem:
    """n = 1, W = Id, Γ = γ Id, A = ∂(τ‖·‖₁); `full_prox` None means C = 0."""
    layout = BlockLayout(n, (full_group((n,), _soft_block, param=np.asarray(tau, dtype=np.float64)),))
    return SplitProblem(
        shape=(n,),
        layout=layout,
        weights=SplitWeights((np.ones((1, n)),)),
        gamma=DiagonalOperator(np.full(n, gamma)),
        smooth=smooth,
        objective=lambda x: float("nan"),
        full_prox=full_prox,
        name="single-block",
    )


# ---------------- Prox against grids ----------------
def _gap_check(gaps: List[float]) -> Tuple[bool, str]:
    worst = max(gaps) if gaps else 0.0
    return worst <= PROX_GAP, f"{len(gaps)} instances, worst f(prox) - grid_min = {worst:.3e}"


def check_soft_threshold(seed: int, count: int):
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(count):
        x, tau, m = rng.uniform(-3, 3), rng.uniform(0, 2), rng.uniform(0.2, 3)
        f = lambda p: 0.5 * m * (x - p[..., 0]) ** 2 + tau * np.abs(p[..., 0])
        grid = grid_minimize(f, [(min(x, 0) - 1, max(x, 0) + 1)])
        gaps.append(float(f(np.array([[P.soft_threshold(x, tau, m)]]))[0]) - grid.value)
    return _gap_check(gaps)


def check_prox_l1_positive(seed: int, count: int):
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(count):
        x, tau, m = rng.uniform(-3, 3), rng.uniform(0, 2), rng.uniform(0.2, 3)
        f = lambda p: np.where(p[..., 0] >= 0, 0.5 * m * (x - p[..., 0]) ** 2 + tau * p[..., 0], np.inf)
        grid = grid_minimize(f, [(0.0, max(x, 0) + 1)])
        gaps.append(float(f(np.array([[P.prox_l1_positive(x, tau, m)]]))[0]) - grid.value)
    return _gap_check(gaps)


def check_project_simplex(seed: int, count: int):
    rng = np.random.default_rng(seed)
    gaps = []
    for i in range(count):
        k = 2 + i % 2
        p, m = rng.uniform(-2, 2, k), rng.uniform(0.2, 3, k)
        out = P.project_simplex(p, m)
        if abs(out.sum() - 1.0) >= 1e-12 or np.any(out < 0):
            return False, f"instance {i}: output {out} is not on the simplex"

        def f(t, p=p, m=m):
            last = 1.0 - t.sum(axis=1)
            q = np.column_stack([t, last])
            val = 0.5 * np.sum(m * (p - q) ** 2, axis=1)
            return np.where(last >= 0, val, np.inf)

        grid = grid_minimize(f, [(0.0, 1.0)] * (k - 1))
        gaps.append(float(f(out[None, :-1])[0]) - grid.value)
    return _gap_check(gaps)


def check_prox_pair_abs_diff(seed: int, count: int):
    rng = np.random.default_rng(seed)
    gaps = []
    for _ in range(count):
        a, b = rng.uniform(-2, 2, 2)
        lam = rng.uniform(0, 2)
        ma, mb = rng.uniform(0.2, 3, 2)
        f = lambda v: (0.5 * ma * (a - v[:, 0]) ** 2 + 0.5 * mb * (b - v[:, 1]) ** 2
                       + lam * np.abs(v[:, 0] - v[:, 1]))
        box = (min(a, b) - 0.5, max(a, b) + 0.5)
        grid = grid_minimize(f, [box, box])
        p, q = P.prox_pair_abs_diff(a, b, lam, ma, mb)
        gaps.append(float(f(np.array([[float(p), float(q)]]))[0]) - grid.value)
    return _gap_check(gaps)


def check_prox_kl(seed: int, count: int):
    """Separable per coordinate: one 1-D grid per channel."""
    rng = np.random.default_rng(seed)
    gaps = []
    k = 2
    for _ in range(count):
        beta = rng.uniform(0.05, 0.95)
        q = rng.dirichlet(np.ones(k))
        p0, m = rng.uniform(-1, 2, k), rng.uniform(0.2, 3, k)
        out = P.prox_kl(p0, q, beta, m)
        c = beta / k
        r = c + (1 - beta) * q
        gap = 0.0
        for j in range(k):
            def f(t, j=j):
                s = c + (1 - beta) * t[:, 0]
                with np.errstate(divide="ignore", invalid="ignore"):
                    val = 0.5 * m[j] * (p0[j] - t[:, 0]) ** 2 - r[j] * np.log(s)
                return np.where(s > 0, val, np.inf)

            s0 = c + (1 - beta) * p0[j]
            lo = max(p0[j], -c / (1 - beta))
            hi = p0[j] + max(-s0 / (1 - beta), 0.0) + np.sqrt(r[j] / m[j]) + 0.1
            grid = grid_minimize(f, [(lo, hi)])
            gap = max(gap, float(f(np.array([[out[j]]]))[0]) - grid.value)
        gaps.append(gap)
    return _gap_check(gaps)


def check_prox_conjugate(seed: int, count: int):
    """Conjugates of |·| (ι_[-1,1]) and of ½(y - ·)² (½u² + uy), step σ."""
    rng = np.random.default_rng(seed)
    gaps = []
    for i in range(count):
        x, sigma = rng.uniform(-3, 3), rng.uniform(0.2, 3)
        if i % 2 == 0:
            out = P.prox_conjugate(lambda v, m: P.soft_threshold(v, 1.0, m), x, sigma)
            f = lambda u: (x - u[:, 0]) ** 2 / (2 * sigma)
            box = (-1.0, 1.0)
        else:
            y = rng.uniform(-2, 2)
            out = P.prox_conjugate(lambda v, m: (m * v + y) / (m + 1.0), x, sigma)
            f = lambda u: (x - u[:, 0]) ** 2 / (2 * sigma) + 0.5 * u[:, 0] ** 2 + u[:, 0] * y
            box = (-8.0, 8.0)
        grid = grid_minimize(f, [box])
        gaps.append(float(f(np.array([[float(out)]]))[0]) - grid.value)
    return _gap_check(gaps)


# ---------------- Gradients ----------------
def _rel_err(g: np.ndarray, ref: np.ndarray) -> float:
    return float(np.linalg.norm(g - ref) / max(np.linalg.norm(ref), 1e-12))


def check_grad_least_squares(seed: int, count: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        phi = S.DenseOperator(rng.standard_normal((4, 3)))
        y, x = rng.standard_normal(4), rng.standard_normal(3)
        f = lambda v: 0.5 * float(np.sum((y - phi.apply(v)) ** 2))
        worst = max(worst, _rel_err(S.grad_least_squares(x, phi, y), fd_gradient(f, x)))
    return worst < FD_REL_TOL, f"{count} points, worst relative error {worst:.3e}"


def check_grad_smoothed_kl(seed: int, count: int):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        beta = rng.uniform(0.1, 0.9)
        q = rng.dirichlet(np.ones(3), size=2)
        p = rng.uniform(0.1, 1.0, size=(2, 3))
        f = lambda v: S.smoothed_kl_value(v, q, beta)
        worst = max(worst, _rel_err(S.grad_smoothed_kl(p, q, beta), fd_gradient(f, p)))
    return worst < FD_REL_TOL, f"{count} points, worst relative error {worst:.3e}"


def check_cocoercivity(seed: int, count: int):
    """⟨∇f(x) - ∇f(y), x - y⟩ >= ‖∇f(x) - ∇f(y)‖²_{L⁻¹} for both smooth families."""
    rng = np.random.default_rng(seed)
    worst = np.inf
    for i in range(count):
        if i % 2 == 0:
            phi = S.DenseOperator(rng.standard_normal((5, 4)))
            term = S.least_squares_term(phi, rng.standard_normal(5))
            x, y = rng.standard_normal(4), rng.standard_normal(4)
        else:
            q = rng.dirichlet(np.ones(3), size=3)
            term = S.smoothed_kl_term(q, rng.uniform(0.05, 0.95))
            x, y = rng.uniform(0, 1.5, (3, 3)), rng.uniform(0, 1.5, (3, 3))
        d = term.gradient(x) - term.gradient(y)
        margin = float(np.sum(d * (x - y)) - np.sum(d * d / term.curvature.values))
        worst = min(worst, margin)
    return worst >= -COCOERCIVITY_SLACK, f"{count} pairs, smallest margin {worst:.3e}"


# ---------------- Reductions ----------------
def check_forward_backward(seed: int, count: int):
    """n = 1, C = 0, W = Id, Γ = γ Id, ρ = 1, z = x: one step is J_{γA}(x - γ∇f(x))."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(count):
        n = 4
        w = rng.uniform(0.5, 2.0, n)
        smooth = S.quadratic_term(rng.uniform(-0.5, 0.5, n), w)
        gamma = rng.uniform(0.1, 1.9) / w.max()
        tau = rng.uniform(0, 0.5, n)
        problem = single_block_problem(n, gamma, smooth, tau)
        x = rng.uniform(-0.5, 0.5, n)
        new = pfdr.pfdr_step(pfdr.SolverState([x[None, :].copy()], x.copy()), problem, 1.0)
        direct = P.soft_threshold(x - gamma * smooth.gradient(x), tau, 1.0 / gamma)
        worst = max(worst, float(np.max(np.abs(new.x - direct))))
    return worst <= REDUCTION_TOL, f"{count} states, max deviation {worst:.3e}"


def check_douglas_rachford(seed: int, count: int):
    """n = 1, B = 0, W = Id, Γ = γ Id, ρ = 1, x = J_C(z): one step is
    z + J_{γA}(2J_{γC}z - z) - J_{γC}z."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    proj = lambda v, metric: np.maximum(v, 0.0)
    for _ in range(count):
        n = 4
        gamma = rng.uniform(0.1, 2.0)
        tau = rng.uniform(0, 1, n)
        problem = single_block_problem(n, gamma, S.zero_term((n,)), tau, full_prox=proj)
        z = rng.standard_normal(n)
        jc = proj(z, None)
        new = pfdr.pfdr_step(pfdr.SolverState([z[None, :].copy()], jc.copy()), problem, 1.0)
        direct = z + (P.soft_threshold(2 * jc - z, tau, 1.0 / gamma) - jc)
        worst = max(worst, float(np.max(np.abs(new.z[0][0] - direct))))
    return worst <= REDUCTION_TOL, f"{count} states, max deviation {worst:.3e}"


def check_lasso_fixed_point(seed: int, count: int):
    problem = scalar_lasso_problem()
    at_solution = pfdr.fixed_point_residual(pfdr.SolverState([np.ones((1, 1))], np.ones(1)), problem)
    at_zero = pfdr.fixed_point_residual(pfdr.SolverState([np.zeros((1, 1))], np.zeros(1)), problem)
    ok = at_solution <= 1e-12 and abs(at_zero - 0.5) <= 1e-12
    return ok, f"residual {at_solution:.3e} at x* = 1, {at_zero:.6g} at 0"


CHECKS: Dict[str, CheckFn] = {
    "prox.soft_threshold": check_soft_threshold,
    "prox.l1_positive": check_prox_l1_positive,
    "prox.project_simplex": check_project_simplex,
    "prox.pair_abs_diff": check_prox_pair_abs_diff,
    "prox.kl": check_prox_kl,
    "prox.conjugate": check_prox_conjugate,
    "grad.least_squares": check_grad_least_squares,
    "grad.smoothed_kl": check_grad_smoothed_kl,
    "grad.cocoercivity": check_cocoercivity,
    "reduction.forward_backward": check_forward_backward,
    "reduction.douglas_rachford": check_douglas_rachford,
    "fixed_point.lasso": check_lasso_fixed_point,
}

DEFAULT_COUNTS = {"grad.least_squares": 50, "grad.smoothed_kl": 50,
                  "reduction.forward_backward": 20, "reduction.douglas_rachford": 20}


def run_checks(names: Optional[Iterable[str]] = None, seed: int = 0,
               count: Optional[int] = None) -> List[CheckResult]:
    selected = list(CHECKS) if names is None else list(names)
    unknown = [n for n in selected if n not in CHECKS]
    if unknown:
        raise InvalidInputError(f"unknown checks {unknown}; available: {list(CHECKS)}")
    results = []
    for name in selected:
        n = count if count is not None else DEFAULT_COUNTS.get(name, 100)
        t0 = time.perf_counter()
        try:
            passed, detail = CHECKS[name](seed, n)
        except Exception as exc:  # a crashing check is a failing check
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail, time.perf_counter() - t0))
        logger.info("%s: %s (%s)", name, "pass" if passed else "FAIL", detail)
    return results
