"""Log-domain Sinkhorn iteration for one-dimensional marginals on grids.

Potentials are stored as values on the grid of their own marginal: ``phi``
on the mu-grid, ``psi`` on the nu-grid.  One iteration is

    phi^{n+1} = U_mu + log P_T exp(-psi^n),
    psi^{n+1} = U_nu + log P_T exp(-phi^{n+1}),

with the heat semigroup ``P_T`` discretised as

    log P_T e^{-h}(x) = LSE_j(-h_j - (x - y_j)^2 / (2T) + log w_j) - log(2 pi T) / 2.

Every Gibbs sum goes through ``logsumexp``.  Gradients and Hessians are
never obtained by differencing stored values: they come from the mean and
variance of the conditional law ``exp(-(y - x)^2 / (2T) - h(y))``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.special import logsumexp

from .measures import Grid, Marginal1D


def log_heat_constant(T: float) -> float:
    return 0.5 * math.log(2 * math.pi * T)


def _log_kernel(x: np.ndarray, y: np.ndarray, T: float) -> np.ndarray:
    d = x[:, None] - y[None, :]
    return -(d * d) / (2.0 * T)


@dataclass(frozen=True)
class Gibbs:
    """Conditional laws ``pi_T^{x,h}`` for a batch of points ``x``.

    ``log_mass[i]`` is ``log P_T e^{-h}(x_i)``; ``weights`` (optional) has
    one normalised row per ``x_i`` over the grid of ``h``.
    """

    log_mass: np.ndarray
    mean: np.ndarray
    var: np.ndarray
    weights: np.ndarray | None = field(default=None, repr=False)


def gibbs(log_kernel: np.ndarray, h_values: np.ndarray, grid: Grid, T: float, keep_weights: bool = False) -> Gibbs:
    """Mass, mean and variance of the conditional laws for each kernel row."""
    y = grid.nodes
    logits = log_kernel + (grid.log_weights - h_values)[None, :]
    lse = logsumexp(logits, axis=1)
    if not np.all(np.isfinite(lse)):
        raise FloatingPointError("conditional law has no finite mass")
    w = np.exp(logits - lse[:, None])
    mean = w @ y
    c = y[None, :] - mean[:, None]
    var = np.einsum("ij,ij->i", w, c * c)
    return Gibbs(log_mass=lse - log_heat_constant(T), mean=mean, var=var, weights=w if keep_weights else None)


def _as_points(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def heat_log_transform(h_values, grid: Grid, T: float, x):
    """``log P_T exp(-h)(x)`` by quadrature on ``grid``."""
    pts, scalar = _as_points(x)
    out = gibbs(_log_kernel(pts, grid.nodes, T), np.asarray(h_values, float), grid, T).log_mass
    return float(out[0]) if scalar else out


def conditional_measure(x, h_values, grid: Grid, T: float) -> np.ndarray:
    """Probability weights of ``exp(-(y - x)^2/(2T) - h(y))`` on ``grid``.

    Returns one row per point when ``x`` is an array.
    """
    pts, scalar = _as_points(x)
    w = gibbs(_log_kernel(pts, grid.nodes, T), np.asarray(h_values, float), grid, T, keep_weights=True).weights
    return w[0] if scalar else w


def conditional_moments(x, h_values, grid: Grid, T: float):
    """Mean and variance of the conditional law at ``x``."""
    pts, scalar = _as_points(x)
    g = gibbs(_log_kernel(pts, grid.nodes, T), np.asarray(h_values, float), grid, T)
    return (float(g.mean[0]), float(g.var[0])) if scalar else (g.mean, g.var)


def grad_potential(x, h_values, grid: Grid, T: float):
    """Derivative of ``log P_T exp(-h)`` at ``x``: ``(E[Y] - x) / T``."""
    mean, _ = conditional_moments(x, h_values, grid, T)
    return (mean - np.asarray(x, dtype=float)) / T


def hess_potential(x, h_values, grid: Grid, T: float):
    """Second derivative of ``log P_T exp(-h)`` at ``x``: ``-1/T + Var[Y] / T^2``."""
    _, var = conditional_moments(x, h_values, grid, T)
    return -1.0 / T + var / (T * T)


@dataclass(frozen=True)
class SinkhornProblem:
    """Two discretised marginals, ``T`` and the precomputed log-kernel.

    ``log_kernel[i, j] = -(x_i - y_j)^2 / (2T)`` with ``x`` on the mu-grid
    and ``y`` on the nu-grid.
    """

    mu: Marginal1D
    nu: Marginal1D
    T: float
    log_kernel: np.ndarray = field(repr=False)
    U_mu: np.ndarray = field(repr=False)
    U_nu: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, mu: Marginal1D, nu: Marginal1D, T: float) -> "SinkhornProblem":
        if not T > 0:
            raise ValueError("T must be positive")
        return cls(
            mu=mu,
            nu=nu,
            T=float(T),
            log_kernel=_log_kernel(mu.nodes, nu.nodes, T),
            U_mu=np.asarray(mu.U(mu.nodes), dtype=float),
            U_nu=np.asarray(nu.U(nu.nodes), dtype=float),
        )

    def phi_gibbs(self, psi: np.ndarray, keep_weights: bool = False) -> Gibbs:
        """Conditional laws on the nu-grid indexed by the mu-grid nodes."""
        return gibbs(self.log_kernel, psi, self.nu.grid, self.T, keep_weights)

    def psi_gibbs(self, phi: np.ndarray, keep_weights: bool = False) -> Gibbs:
        """Conditional laws on the mu-grid indexed by the nu-grid nodes."""
        return gibbs(self.log_kernel.T, phi, self.mu.grid, self.T, keep_weights)

    def phi_update(self, psi: np.ndarray) -> np.ndarray:
        return self.U_mu + self.phi_gibbs(psi).log_mass

    def psi_update(self, phi: np.ndarray) -> np.ndarray:
        return self.U_nu + self.psi_gibbs(phi).log_mass


@dataclass(frozen=True)
class SinkhornState:
    """Iterate ``(phi^n, psi^n)`` on the grids.

    ``phi_values`` is ``None`` when the run starts from a prescribed
    ``psi^0`` without a preceding ``phi^0``.  ``phi_zero`` marks the null
    start ``phi^0 = 0``, for which ``psi^0 = U_nu`` exactly.
    """

    n: int
    phi_values: np.ndarray | None = field(repr=False)
    psi_values: np.ndarray = field(repr=False)
    problem: SinkhornProblem = field(repr=False)
    phi_zero: bool = False
    history: tuple = ()

    @property
    def T(self) -> float:
        return self.problem.T

    @property
    def marginal_mu(self) -> Marginal1D:
        return self.problem.mu

    @property
    def marginal_nu(self) -> Marginal1D:
        return self.problem.nu


def initial_state(problem: SinkhornProblem, psi0: Callable | np.ndarray | None = None) -> SinkhornState:
    """Null start ``phi^0 = 0, psi^0 = U_nu`` or a prescribed ``psi^0``.

    ``psi0`` may be grid values on the nu-grid or a callable.
    """
    if psi0 is None:
        return SinkhornState(
            n=0, phi_values=np.zeros(problem.mu.grid.size), psi_values=problem.U_nu.copy(), problem=problem, phi_zero=True
        )
    vals = psi0(problem.nu.nodes) if callable(psi0) else psi0
    vals = np.asarray(vals, dtype=float)
    if vals.shape != problem.U_nu.shape or not np.all(np.isfinite(vals)):
        raise ValueError("psi0 must give finite values on the nu-grid")
    return SinkhornState(n=0, phi_values=None, psi_values=vals, problem=problem)


def psi0_from_table(nodes, values) -> Callable:
    """Monotone cubic interpolant of a tabulated ``psi^0``, linear beyond the table.

    The returned callable carries its derivative as ``.grad``.
    """
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if nodes.ndim != 1 or nodes.size < 2 or np.any(np.diff(nodes) <= 0):
        raise ValueError("psi0 nodes must be strictly increasing")
    interp = PchipInterpolator(nodes, values, extrapolate=False)
    dinterp = interp.derivative()

    def psi0(y):
        y = np.asarray(y, dtype=float)
        lo, hi = nodes[0], nodes[-1]
        inner = interp(np.clip(y, lo, hi))
        left = values[0] + dinterp(lo) * (y - lo)
        right = values[-1] + dinterp(hi) * (y - hi)
        return np.where(y < lo, left, np.where(y > hi, right, inner))

    def grad(y):
        y = np.asarray(y, dtype=float)
        return dinterp(np.clip(y, nodes[0], nodes[-1]))

    psi0.grad = grad
    return psi0


def sinkhorn_step(state: SinkhornState) -> SinkhornState:
    """Both half-steps: ``(phi^n, psi^n) -> (phi^{n+1}, psi^{n+1})``."""
    p = state.problem
    phi = p.phi_update(state.psi_values)
    psi = p.psi_update(phi)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(psi))):
        raise FloatingPointError(f"non-finite potential at iteration {state.n + 1}")
    return replace(state, n=state.n + 1, phi_values=phi, psi_values=psi, phi_zero=False)


def solve(
    problem: SinkhornProblem,
    max_iters: int,
    tol: float,
    psi0=None,
) -> tuple[SinkhornState, int]:
    """Iterate until the largest change of ``psi`` drops below ``tol``.

    Returns the final state and the number of iterations performed.
    """
    state = initial_state(problem, psi0)
    for it in range(1, max_iters + 1):
        new = sinkhorn_step(state)
        change = float(np.max(np.abs(new.psi_values - state.psi_values)))
        state = new
        if change < tol:
            return state, it
    return state, max_iters


@dataclass(frozen=True)
class Plan2D:
    """Normalised coupling weights on the product of the two grids."""

    weights: np.ndarray = field(repr=False)
    log_weights: np.ndarray = field(repr=False)
    raw_log_mass: float

    def proj_x(self) -> np.ndarray:
        return self.weights.sum(axis=1)

    def proj_y(self) -> np.ndarray:
        return self.weights.sum(axis=0)


def plan_from_potentials(problem: SinkhornProblem, phi: np.ndarray, psi: np.ndarray) -> Plan2D:
    """``exp(-(x-y)^2/(2T) - phi(x) - psi(y)) / sqrt(2 pi T)`` with grid weights.

    ``raw_log_mass`` is the log total mass before normalisation; it vanishes
    for a pair of potentials whose plan has one exact marginal.
    """
    lw = (
        problem.log_kernel
        + (problem.mu.grid.log_weights - phi)[:, None]
        + (problem.nu.grid.log_weights - psi)[None, :]
        - log_heat_constant(problem.T)
    )
    mass = float(logsumexp(lw))
    if not math.isfinite(mass):
        raise FloatingPointError("plan has no finite mass")
    lw = lw - mass
    return Plan2D(weights=np.exp(lw), log_weights=lw, raw_log_mass=mass)


N_N = "n_n"
N1_N = "n+1_n"
STAR = "star"


def build_plan(state: SinkhornState, which: str, reference=None) -> Plan2D:
    """Sinkhorn plan ``pi^{n,n}``, ``pi^{n+1,n}`` or the reference plan.

    ``reference`` must expose ``phi_star`` and ``psi_star`` grid values for
    ``which = "star"``.
    """
    p = state.problem
    if which == N_N:
        if state.phi_values is None:
            raise ValueError("phi^n is undefined for this state")
        return plan_from_potentials(p, state.phi_values, state.psi_values)
    if which == N1_N:
        return plan_from_potentials(p, p.phi_update(state.psi_values), state.psi_values)
    if which == STAR:
        if reference is None:
            raise ValueError("reference potentials required")
        return plan_from_potentials(p, reference.phi_star, reference.psi_star)
    raise ValueError(f"unknown plan {which!r}")


def normalize_iterates(phi, psi, phi_star, psi_star, mu: Marginal1D, nu: Marginal1D):
    """Shift iterates so their integrals match those of the reference potentials."""
    wm, wn = mu.density_weights, nu.density_weights
    phi_d = np.asarray(phi) - (np.dot(wm, phi) - np.dot(wm, phi_star))
    psi_d = np.asarray(psi) - (np.dot(wn, psi) - np.dot(wn, psi_star))
    return phi_d, psi_d
