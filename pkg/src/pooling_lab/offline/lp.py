"""Fractional matching LP (degree constraints only) and its per-job duals."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from ..errors import NumericFailure
from ..instance import Instance
from .matching import EdgeSet, feasible_edges, solve_opt

# HiGHS reports marginals with roundoff of this order; anything more negative
# than -_CLIP is treated as a solver failure rather than silently zeroed
_CLIP = 1e-9


@dataclass(frozen=True)
class LPSolution:
    primal_x: dict  # (j, k) -> value in [0, 1]
    dual_lambda: np.ndarray  # index 0 is job 1
    objective: float
    dual_objective: float

    def to_json(self) -> dict:
        return {
            "objective": self.objective,
            "dual_objective": self.dual_objective,
            "primal_x": [[j, k, x] for (j, k), x in sorted(self.primal_x.items()) if x != 0.0],
            "dual_lambda": self.dual_lambda.tolist(),
        }


def _positive(edges: EdgeSet):
    return [(j, k, w) for j, k, w in edges.edges if w > 0]


def _highs(edges: EdgeSet, max_iter: int) -> LPSolution:
    n = edges.n
    pos = _positive(edges)
    if not pos:
        return LPSolution({}, np.zeros(n), 0.0, 0.0)
    m = len(pos)
    rows = np.array([j - 1 for j, _, _ in pos] + [k - 1 for _, k, _ in pos])
    cols = np.concatenate([np.arange(m), np.arange(m)])
    a_ub = sparse.csc_matrix((np.ones(2 * m), (rows, cols)), shape=(n, m))
    w = np.array([x for _, _, x in pos])
    res = linprog(-w, A_ub=a_ub, b_ub=np.ones(n), bounds=(0, None), method="highs-ds",
                  options={"maxiter": max_iter, "presolve": False})
    if res.status != 0:
        raise NumericFailure(f"LP solver stopped: {res.message}",
                             bounds=(None if res.fun is None else -res.fun, None))
    lam = -np.asarray(res.ineqlin.marginals, dtype=float)
    if lam.min() < -_CLIP:
        raise NumericFailure("LP solver returned a negative dual", bounds=(-res.fun, float(lam.sum())))
    lam = np.maximum(lam, 0.0)
    x = {(j, k): float(v) for (j, k, _), v in zip(pos, res.x)}
    return LPSolution(x, lam, math.fsum(w * res.x), math.fsum(lam))


def _simplex(edges: EdgeSet, max_iter: int, tol: float = 1e-12) -> LPSolution:
    """Dense tableau simplex with Bland's rule.

    Columns are the edge variables followed by one slack per job; the slack
    basis is feasible because every right-hand side is 1. At optimality the
    reduced cost of slack j is the dual price of job j.
    """
    n = edges.n
    pos = _positive(edges)
    m = len(pos)
    tab = np.zeros((n + 1, m + n + 1))
    for e, (j, k, w) in enumerate(pos):
        tab[j - 1, e] = 1.0
        tab[k - 1, e] = 1.0
        tab[n, e] = -w  # objective row holds -c; optimal once it is non-negative
    tab[:n, m:m + n] = np.eye(n)
    tab[:n, -1] = 1.0
    basis = list(range(m, m + n))
    for _ in range(max_iter):
        entering = next((c for c in range(m + n) if tab[n, c] < -tol), None)
        if entering is None:
            break
        col = tab[:n, entering]
        best_row, best_ratio = None, math.inf
        for r in range(n):
            if col[r] > tol:
                ratio = tab[r, -1] / col[r]
                if ratio < best_ratio - tol or (abs(ratio - best_ratio) <= tol and basis[r] < basis[best_row]):
                    best_row, best_ratio = r, ratio
        if best_row is None:
            raise NumericFailure("fractional matching LP reported unbounded")
        tab[best_row] /= tab[best_row, entering]
        for r in range(n + 1):
            if r != best_row and tab[r, entering] != 0.0:
                tab[r] -= tab[r, entering] * tab[best_row]
        basis[best_row] = entering
    else:
        raise NumericFailure(f"simplex hit the iteration cap ({max_iter})", bounds=(tab[n, -1], None))
    xs = np.zeros(m + n)
    for r, b in enumerate(basis):
        xs[b] = tab[r, -1]
    lam = np.maximum(tab[n, m:m + n], 0.0)
    x = {(j, k): float(xs[e]) for e, (j, k, _) in enumerate(pos)}
    objective = math.fsum(w * xs[e] for e, (_, _, w) in enumerate(pos))
    return LPSolution(x, lam, objective, math.fsum(lam))


def lp_relaxation(edges: EdgeSet, method: str = "highs", max_iter: int = 1_000_000) -> LPSolution:
    if method == "highs":
        return _highs(edges, max_iter)
    if method == "simplex":
        return _simplex(edges, max_iter)
    raise ValueError(f"unknown LP method {method!r}")


def hindsight_duals(inst: Instance, method: str = "highs") -> np.ndarray:
    return lp_relaxation(feasible_edges(inst), method).dual_lambda


def integrality_report(inst: Instance) -> dict:
    ip = solve_opt(inst).value
    lp = lp_relaxation(feasible_edges(inst)).objective
    ratio = 1.0 if lp == 0 else ip / lp
    return {"ip": ip, "lp": lp, "ratio": ratio}
