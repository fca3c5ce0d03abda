"""Distances, divergences and error functionals on grids.

Wasserstein-1 in one dimension is ``int |F_p - F_q| dx``.  Grid weights are
turned back into densities ``f = p / w`` and integrated to CDF values with
the trapezoid rule plus its endpoint Euler-Maclaurin correction, so the CDF
is fourth-order accurate.  ``|F_p - F_q|`` is integrated as the cubic
Hermite interpolant whose slopes are the density differences, splitting
cells at zero crossings.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.special import xlogy

from .measures import Grid
from .sinkhorn import SinkhornState, log_heat_constant

NORMALIZATION_TOL = 1e-8


def _check_normalized(w: np.ndarray) -> None:
    s = np.sum(w, axis=-1)
    if np.any(np.abs(s - 1.0) > NORMALIZATION_TOL) or np.any(w < 0):
        raise ValueError("weights must be nonnegative and sum to one")


def cdf_on_grid(weights: np.ndarray, grid: Grid) -> np.ndarray:
    """CDF values at the grid nodes, one row per weight vector."""
    w = np.atleast_2d(weights)
    h = grid.spacing
    f = w / grid.weights[None, :]
    F = np.zeros_like(f)
    F[:, 1:] = np.cumsum(0.5 * h * (f[:, 1:] + f[:, :-1]), axis=1)
    df = np.gradient(f, h, axis=1, edge_order=2)
    F -= h * h / 12.0 * (df - df[:, :1])
    return F


def _hermite_primitive(t, D0, D1, m0, m1, h):
    # integral over [0, t] (in cell units) of the cubic Hermite interpolant
    t2, t3, t4 = t * t, t**3, t**4
    return h * (
        (t - t3 + t4 / 2) * D0
        + (t2 / 2 - 2 * t3 / 3 + t4 / 4) * h * m0
        + (t3 - t4 / 2) * D1
        + (-t3 / 3 + t4 / 4) * h * m1
    )


def _hermite_value(t, D0, D1, m0, m1, h):
    t2, t3 = t * t, t**3
    return (2 * t3 - 3 * t2 + 1) * D0 + (t3 - 2 * t2 + t) * h * m0 + (-2 * t3 + 3 * t2) * D1 + (t3 - t2) * h * m1


def _abs_integral_hermite(D: np.ndarray, dD: np.ndarray, h: float) -> np.ndarray:
    """Integral of ``|D|`` along the last axis, ``D`` cubic Hermite with slopes ``dD``.

    Cells without a sign change use the closed-form cell integral; cells
    with one locate the crossing by bisection and integrate both pieces.
    """
    D0, D1 = D[..., :-1], D[..., 1:]
    m0, m1 = dD[..., :-1], dD[..., 1:]
    full = _hermite_primitive(1.0, D0, D1, m0, m1, h)
    out = np.abs(full)
    cross = D0 * D1 < 0
    if np.any(cross):
        a, b, c, d = D0[cross], D1[cross], m0[cross], m1[cross]
        lo, hi = np.zeros(a.shape), np.ones(a.shape)
        sign_lo = np.sign(a)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            left = np.sign(_hermite_value(mid, a, b, c, d, h)) == sign_lo
            lo, hi = np.where(left, mid, lo), np.where(left, hi, mid)
        t = 0.5 * (lo + hi)
        part = _hermite_primitive(t, a, b, c, d, h)
        out[cross] = np.abs(part) + np.abs(_hermite_primitive(1.0, a, b, c, d, h) - part)
    return out.sum(axis=-1)


def w1_rows(P: np.ndarray, Q: np.ndarray, grid: Grid) -> np.ndarray:
    """Row-wise Wasserstein-1 between weight tables sharing ``grid``."""
    P, Q = np.atleast_2d(P), np.atleast_2d(Q)
    D = cdf_on_grid(P, grid) - cdf_on_grid(Q, grid)
    dD = (P - Q) / grid.weights[None, :]
    return _abs_integral_hermite(D, dD, grid.spacing)


def w1_1d(p_weights, q_weights, grid_p: Grid, grid_q: Grid | None = None) -> float:
    """Wasserstein-1 distance between two discretised measures.

    Parameters
    ----------
    p_weights, q_weights : array_like
        Probability weights on ``grid_p`` and ``grid_q``.
    grid_p, grid_q : Grid
        ``grid_q`` defaults to ``grid_p``.  Distinct grids are compared on
        the merged set of nodes with linearly interpolated CDFs, which is
        second-order accurate only.
    """
    p = np.asarray(p_weights, dtype=float)
    q = np.asarray(q_weights, dtype=float)
    _check_normalized(p)
    _check_normalized(q)
    if grid_q is None or (grid_q.size == grid_p.size and np.array_equal(grid_q.nodes, grid_p.nodes)):
        return float(w1_rows(p[None, :], q[None, :], grid_p)[0])
    Fp = np.clip(cdf_on_grid(p, grid_p)[0], 0.0, 1.0)
    Fq = np.clip(cdf_on_grid(q, grid_q)[0], 0.0, 1.0)
    xs = np.union1d(grid_p.nodes, grid_q.nodes)
    D = np.interp(xs, grid_p.nodes, Fp, left=0.0, right=1.0) - np.interp(xs, grid_q.nodes, Fq, left=0.0, right=1.0)
    a, b = D[:-1], D[1:]
    dx = np.diff(xs)
    same = a * b >= 0
    denom = np.where(same, 1.0, np.abs(a) + np.abs(b))
    cell = np.where(same, 0.5 * dx * (np.abs(a) + np.abs(b)), 0.5 * dx * (a * a + b * b) / denom)
    return float(cell.sum())


def w1_conditional_bound(P_iter: np.ndarray, P_ref: np.ndarray, inner_grid: Grid, outer_weights: np.ndarray) -> float:
    """``sum_i w_i W1(P_iter[i], P_ref[i])``: the conditional decomposition bound."""
    return float(np.dot(outer_weights, w1_rows(P_iter, P_ref, inner_grid)))


def w1_plan_bound(state: SinkhornState, which: str, reference) -> float:
    """Upper bound on the plan distance to the reference plan.

    ``"n_n"`` integrates the distance between conditional laws of ``x``
    given ``y`` (iterate ``phi^n`` versus ``phi*``) against ``nu``;
    ``"n+1_n"`` integrates those of ``y`` given ``x`` (``psi^n`` versus
    ``psi*``) against ``mu``.
    """
    p = state.problem
    if which == "n_n":
        if state.phi_values is None:
            raise ValueError("phi^n is undefined for this state")
        Pi = p.psi_gibbs(state.phi_values, keep_weights=True).weights
        Pr = p.psi_gibbs(reference.phi_star, keep_weights=True).weights
        return w1_conditional_bound(Pi, Pr, p.mu.grid, p.nu.density_weights)
    if which == "n+1_n":
        Pi = p.phi_gibbs(state.psi_values, keep_weights=True).weights
        Pr = p.phi_gibbs(reference.psi_star, keep_weights=True).weights
        return w1_conditional_bound(Pi, Pr, p.nu.grid, p.mu.density_weights)
    raise ValueError(f"unknown plan {which!r}")


def kl(p_weights, q_weights) -> float:
    """``sum p log(p / q)``; ``inf`` when ``p`` charges a point where ``q`` vanishes."""
    p = np.asarray(p_weights, dtype=float)
    q = np.asarray(q_weights, dtype=float)
    if np.any((p > 0) & (q <= 0)):
        return math.inf
    mask = p > 0
    return float(max(np.sum(xlogy(p[mask], p[mask]) - p[mask] * np.log(q[mask])), 0.0))


def kl_log(log_p: np.ndarray, log_q: np.ndarray) -> float:
    """Relative entropy from log-weights, avoiding underflow in the ratio."""
    p = np.exp(log_p)
    return float(max(np.sum(p * (log_p - log_q)), 0.0))


def sym_kl(p_weights, q_weights) -> float:
    return kl(p_weights, q_weights) + kl(q_weights, p_weights)


def sym_kl_log(log_p: np.ndarray, log_q: np.ndarray) -> float:
    """``KL(p|q) + KL(q|p) = sum (p - q)(log p - log q)`` from log-weights."""
    return float(np.sum((np.exp(log_p) - np.exp(log_q)) * (log_p - log_q)))


def sym_entropy_via_potentials(delta: np.ndarray, base_weights: np.ndarray, adjusted_weights: np.ndarray) -> float:
    """Symmetric plan entropy from the potential gap on one side.

    For plans sharing one marginal exactly, the symmetric relative entropy
    equals ``int delta d base - int delta d adjusted`` where ``delta`` is
    the iterate minus the reference potential on the other side, ``base``
    the true marginal and ``adjusted`` the iterate plan's marginal.
    Additive shifts of ``delta`` cancel.
    """
    return float(np.dot(delta, base_weights) - np.dot(delta, adjusted_weights))


def _abs_cubic_integral(c: np.ndarray) -> float:
    """``int_0^1 |p(t)| dt`` for the polynomial with ascending coefficients ``c``."""
    roots = np.roots(c[::-1])
    cuts = sorted(float(r.real) for r in roots if abs(r.imag) < 1e-12 and 0.0 < r.real < 1.0)
    prim = np.polynomial.polynomial.polyint(c)
    pts = [0.0, *cuts, 1.0]
    vals = np.polynomial.polynomial.polyval(pts, prim)
    return float(np.sum(np.abs(np.diff(vals))))


# cubic through t = -1, 0, 1, 2, ascending coefficients from the four values
_CUBIC = np.linalg.inv(np.vander([-1.0, 0.0, 1.0, 2.0], 4, increasing=True))


def l1_grad_error(diff: np.ndarray, weights: np.ndarray) -> float:
    """``int |grad h^n - grad h*| d(weights)`` from pointwise differences.

    ``weights`` are trapezoid-type node weights on a uniform grid, so
    ``G = diff * weights`` samples a smooth function in index units.  The
    plain sum of ``|G|`` loses accuracy at each sign change of ``G``.  There
    the crossing cell is integrated exactly on the local cubic through four
    nodes, and the sums on either side receive their one-sided
    Euler-Maclaurin endpoint corrections.
    """
    G = np.asarray(diff, dtype=float) * np.asarray(weights, dtype=float)
    total = float(np.sum(np.abs(G)))
    n = G.size
    for i in np.flatnonzero(G[:-1] * G[1:] < 0):
        a, b = abs(G[i]), abs(G[i + 1])
        if i < 2 or i + 3 > n - 1 or np.any(G[i - 2 : i + 1] * G[i] <= 0) or np.any(G[i + 1 : i + 4] * G[i + 1] <= 0):
            # linear interpolant on the cell only
            total -= a * b / (a + b)
            continue
        cell = _abs_cubic_integral(_CUBIC @ G[i - 1 : i + 3])
        d_left = (3 * G[i] - 4 * G[i - 1] + G[i - 2]) / 2
        d_right = (-3 * G[i + 1] + 4 * G[i + 2] - G[i + 3]) / 2
        total += cell - 0.5 * (a + b) - np.sign(G[i]) * d_left / 12 + np.sign(G[i + 1]) * d_right / 12
    return float(total)


def relative_entropy_to_heat(plan, problem) -> float:
    """``H(pi | R_{0,T})`` with ``R_{0,T}(dx dy) = N(x - y; 0, T) dx dy``."""
    x = problem.mu.nodes[:, None]
    y = problem.nu.nodes[None, :]
    log_density = plan.log_weights - problem.mu.grid.log_weights[:, None] - problem.nu.grid.log_weights[None, :]
    log_ref = -((x - y) ** 2) / (2 * problem.T) - log_heat_constant(problem.T)
    return float(np.sum(plan.weights * (log_density - log_ref)))


def fit_rate(errors) -> tuple[float, float]:
    """Per-iteration ratio from a least-squares fit of ``log(errors)``.

    Uses the final half of the positive, finite entries.

    Returns
    -------
    (ratio, slope) : tuple of float
    """
    e = np.asarray(errors, dtype=float)
    idx = np.flatnonzero(np.isfinite(e) & (e > 0))
    if idx.size < 3:
        raise ValueError("need at least three positive errors")
    idx = idx[idx.size // 2 :] if idx.size >= 6 else idx
    slope = float(np.polyfit(idx.astype(float), np.log(e[idx]), 1)[0])
    return math.exp(slope), slope


@dataclass(frozen=True)
class ConvergenceRecord:
    """One history row.  Entries undefined at a given ``n`` are ``nan``."""

    n: int
    l1_grad_mu: float
    l1_grad_nu: float
    w1_plan_nn: float
    w1_plan_n1n: float
    sym_ent_nn: float
    sym_ent_n1n: float
    hess_err_max: float
    pointwise_ratio_max: float
    h_mu_n: float
    h_nu_n: float
    predicted_product_bound: float
    l1_grad_mu_adj: float = math.nan
    l1_grad_nu_adj: float = math.nan
    hess_ratio_max: float = math.nan
    sym_ent_nn_direct: float = math.nan
    sym_ent_n1n_direct: float = math.nan

    def to_dict(self) -> dict:
        return asdict(self)


CSV_COLUMNS = tuple(ConvergenceRecord.__dataclass_fields__)
