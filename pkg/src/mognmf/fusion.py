"""Adaptive consensus-graph learning.

Fuses a stack of per-view, per-order weight matrices W_k^v into one
consensus graph W_m with a learned weight matrix H (V x K) by
alternating two exact minimizers:

* W_m <- max(0, sum_vk H_vk W_k^v / (1 + mu))
* H   <- argmin alpha ||H||_F^2 + <P, H>  over the global simplex,
  where P_vk = ||W_m - W_k^v||_F^2.

The H step has Hessian 2*alpha*I, so its exact solution is the
Euclidean projection of -P/(2 alpha) onto the probability simplex; no
generic QP solver is needed.  Because each half-step minimizes a convex
subproblem exactly, the fusion objective is non-increasing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParamError, ShapeError
from .graph import LaplacianMatrix, MultiOrderGraphSet, WeightMatrix, laplacian

__all__ = [
    "FusionState",
    "project_simplex",
    "update_consensus",
    "compute_residuals",
    "update_weights",
    "fuse_graphs",
]


@dataclass(frozen=True)
class FusionState:
    """Learned consensus graph plus the weights that produced it."""

    H: np.ndarray  # V x K, >= 0, entries sum to 1
    Wm: WeightMatrix
    Dm: np.ndarray  # degree vector of Wm
    Lm: LaplacianMatrix
    objective_trace: np.ndarray
    iterations: int = 0
    converged: bool = False


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {h : h >= 0, sum h = 1}.

    Sort-and-threshold algorithm; O(n log n).
    """
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.size == 0:
        raise ShapeError("cannot project an empty vector")
    u = np.sort(y)[::-1]
    cumsum = np.cumsum(u)
    j = np.arange(1, y.size + 1)
    rho_candidates = np.nonzero(u + (1.0 - cumsum) / j > 0)[0]
    rho = rho_candidates[-1]
    tau = (1.0 - cumsum[rho]) / (rho + 1.0)
    return np.maximum(y + tau, 0.0)


def update_consensus(H: np.ndarray, graphs: MultiOrderGraphSet, mu: float) -> np.ndarray:
    """Closed-form consensus update: max(0, sum H_vk W_k^v / (1 + mu))."""
    if mu < 0:
        raise ParamError("mu must be nonnegative")
    H = np.asarray(H, dtype=np.float64)
    stack = graphs.all_graphs()
    if H.size != len(stack):
        raise ShapeError("H shape does not match the graph set")
    weights = H.ravel()
    acc = np.zeros_like(stack[0].W)
    for w, g in zip(weights, stack):
        if w != 0.0:
            acc += w * g.W
    return np.maximum(acc / (1.0 + mu), 0.0)


def compute_residuals(Wm: np.ndarray, graphs: MultiOrderGraphSet) -> np.ndarray:
    """P_vk = ||W_m - W_k^v||_F^2 as a V x K matrix."""
    Wm = np.asarray(Wm, dtype=np.float64)
    out = np.empty((graphs.view_count, graphs.K))
    for v, view in enumerate(graphs.views):
        for k, g in enumerate(view):
            if g.W.shape != Wm.shape:
                raise ShapeError("consensus and view graphs differ in size")
            diff = Wm - g.W
            out[v, k] = float(np.vdot(diff, diff))
    return out


def update_weights(P: np.ndarray, alpha: float) -> np.ndarray:
    """Exact minimizer of alpha ||H||_F^2 + <P, H> over the simplex."""
    if alpha <= 0:
        raise ParamError("alpha must be positive")
    P = np.asarray(P, dtype=np.float64)
    if not np.all(np.isfinite(P)):
        raise ParamError("residual matrix must be finite")
    h = project_simplex(-P.ravel() / (2.0 * alpha))
    return h.reshape(P.shape)


def _fusion_objective(H, P, wm_sq, mu, alpha) -> float:
    return float(np.sum(H * P) + mu * wm_sq + alpha * np.sum(H * H))


def fuse_graphs(
    graphs: MultiOrderGraphSet,
    mu: float = 0.1,
    alpha: float = 0.1,
    eps2: float = 1e-6,
    t2: int = 50,
) -> FusionState:
    """Alternate consensus and weight updates until the objective settles.

    Stops when |L2(j) - L2(j-1)| < eps2 or after t2 sweeps.  The loop is
    evaluated through the Gram matrix of the stacked graphs: with
    G_ij = <W_i, W_j> and all graphs nonnegative (so the max(0, .) in the
    consensus step never clips), every residual and objective value is a
    quadratic form in the current weights, which avoids materializing
    W_m each sweep.  The result is identical to the direct alternation.
    """
    if mu < 0:
        raise ParamError("mu must be nonnegative")
    if alpha <= 0:
        raise ParamError("alpha must be positive")
    if t2 < 1:
        raise ParamError("t2 must be >= 1")
    stack = graphs.all_graphs()
    m = len(stack)
    if m == 0:
        raise ShapeError("empty graph set")
    flat = [g.W.ravel() for g in stack]
    gram = np.empty((m, m))
    for i in range(m):
        for j in range(i, m):
            gram[i, j] = gram[j, i] = float(np.dot(flat[i], flat[j]))
    norms_sq = np.diag(gram).copy()

    V, K = graphs.view_count, graphs.K
    h = np.full(m, 1.0 / m)  # H_vk = 1/(V K) start
    h_cons = h
    trace = []
    prev = None
    converged = False
    iterations = 0
    for _ in range(t2):
        iterations += 1
        # consensus step in Gram space: Wm = (sum h_i W_i) / (1 + mu)
        h_cons = h
        gh = gram @ h
        wm_sq = float(h @ gh) / (1.0 + mu) ** 2
        cross = gh / (1.0 + mu)  # <Wm, W_j>
        P = wm_sq - 2.0 * cross + norms_sq
        h = project_simplex(-P / (2.0 * alpha))
        obj = _fusion_objective(h, P, wm_sq, mu, alpha)
        trace.append(obj)
        if prev is not None and abs(obj - prev) < eps2:
            converged = True
            break
        prev = obj

    H = h.reshape(V, K)
    # materialize the consensus from the last consensus step (the loop
    # ends half a sweep after it, with H freshly updated against it)
    Wm = update_consensus(h_cons.reshape(V, K), graphs, mu)
    lap = laplacian(Wm)
    return FusionState(
        H=H,
        Wm=WeightMatrix(W=Wm, kind="fused", order=0),
        Dm=lap.D,
        Lm=lap,
        objective_trace=np.asarray(trace),
        iterations=iterations,
        converged=converged,
    )
