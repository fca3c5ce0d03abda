"""One-dimensional marginals on truncated trapezoid grids.

A marginal is ``exp(-U(x)) dx`` for a smooth potential ``U``.  Each family
also carries its profile data: the asymptotic convexity ``alpha`` with its
correction ``g_tilde``, and the concavity bound ``beta`` with its
correction ``g``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.special import logsumexp
from scipy.stats import norm

from .profiles import ProfileFunction, solve_L, tanh_profile, zero_profile

GAUSSIAN = "gaussian"
PERTURBED = "perturbed_gaussian"
CUSTOM = "custom"


@dataclass(frozen=True)
class Family:
    """Potential and profile data of a marginal family.

    Use :func:`gaussian`, :func:`perturbed_gaussian` or :func:`custom`
    rather than constructing this directly.  ``potential`` is the
    unnormalised negative log-density.
    """

    kind: str
    alpha: float
    beta: float
    g_tilde: ProfileFunction
    g: ProfileFunction
    params: dict = field(default_factory=dict)
    potential: Callable = field(default=None, repr=False, compare=False)
    grad: Callable = field(default=None, repr=False, compare=False)
    hess: Callable = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {"family": self.kind, **self.params}


def gaussian(mean: float = 0.0, variance: float = 1.0) -> Family:
    """``N(mean, variance)`` with ``alpha = beta = 1 / variance``."""
    if not variance > 0:
        raise ValueError("variance must be positive")
    m, v = float(mean), float(variance)
    prec = 1.0 / v
    return Family(
        kind=GAUSSIAN,
        alpha=prec,
        beta=prec,
        g_tilde=zero_profile(),
        g=zero_profile(),
        params={"mean": m, "variance": v},
        potential=lambda x: 0.5 * prec * (np.asarray(x, float) - m) ** 2,
        grad=lambda x: prec * (np.asarray(x, float) - m),
        hess=lambda x: np.full_like(np.asarray(x, float), prec),
    )


def perturbed_gaussian(
    mean: float = 0.0,
    variance: float = 1.0,
    amplitude: float = 0.1,
    frequency: float = 2.0,
    profile_radius: float = 1.0,
) -> Family:
    """Potential ``(x - m)^2 / (2 s^2) + a cos(w x)``.

    The gradient perturbation has Lipschitz constant ``C = |a| w^2``, so the
    convexity profile is at least ``1/s^2 - C`` at short range and
    ``1/s^2 - 2|a| w / r`` at long range.  The profile uses
    ``alpha = 1/s^2`` and the tanh member whose chord slope at radius
    ``R`` equals ``C``.  ``R`` is raised to ``2 / w`` when smaller, which is
    what makes the tanh member dominate the long-range deficit.
    """
    if not variance > 0:
        raise ValueError("variance must be positive")
    if not profile_radius > 0:
        raise ValueError("profile_radius must be positive")
    m, v, a, w = float(mean), float(variance), float(amplitude), float(frequency)
    prec = 1.0 / v
    c_u = abs(a) * w * w
    if c_u > 0:
        radius = max(float(profile_radius), 2.0 / abs(w))
        g_tilde = tanh_profile(solve_L(radius, c_u))
    else:
        radius = float(profile_radius)
        g_tilde = zero_profile()
    return Family(
        kind=PERTURBED,
        alpha=prec,
        beta=prec + c_u,
        g_tilde=g_tilde,
        g=zero_profile(),
        params={
            "mean": m,
            "variance": v,
            "amplitude": a,
            "frequency": w,
            "profile_radius": radius,
        },
        potential=lambda x: 0.5 * prec * (np.asarray(x, float) - m) ** 2 + a * np.cos(w * np.asarray(x, float)),
        grad=lambda x: prec * (np.asarray(x, float) - m) - a * w * np.sin(w * np.asarray(x, float)),
        hess=lambda x: prec - a * w * w * np.cos(w * np.asarray(x, float)),
    )


def custom(
    potential: Callable,
    grad: Callable,
    hess: Callable,
    alpha: float,
    g_tilde: ProfileFunction | None = None,
    beta: float = math.inf,
    g: ProfileFunction | None = None,
) -> Family:
    """User-supplied potential with its two derivatives and profile data.

    The profile claims are trusted; check them with
    :func:`eotlab.profiles.verify_alc` on the built marginal.
    """
    if alpha is None or not alpha > 0:
        raise ValueError("custom families need a positive alpha estimate")
    return Family(
        kind=CUSTOM,
        alpha=float(alpha),
        beta=float(beta),
        g_tilde=g_tilde or zero_profile(),
        g=g or zero_profile(),
        params={},
        potential=potential,
        grad=grad,
        hess=hess,
    )


def family_from_dict(d: dict) -> Family:
    """Build a family from a JSON descriptor such as ``{"family": "gaussian", "mean": 0, "variance": 1}``."""
    d = dict(d)
    kind = d.pop("family", None)
    if kind == GAUSSIAN:
        return gaussian(**d)
    if kind == PERTURBED:
        return perturbed_gaussian(**d)
    if kind == CUSTOM:
        raise ValueError("custom families take Python callables and cannot be declared in JSON")
    raise ValueError(f"unknown marginal family {kind!r}")


INTERIOR_FRACTION = 0.5


@dataclass(frozen=True)
class Grid:
    """Uniform grid with composite trapezoid weights."""

    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    lower: float
    upper: float

    @property
    def size(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> float:
        return (self.upper - self.lower) / (self.nodes.size - 1)

    @property
    def log_weights(self) -> np.ndarray:
        return np.log(self.weights)

    def interior(self, fraction: float = INTERIOR_FRACTION) -> np.ndarray:
        """Mask of nodes within the central ``fraction`` of the grid span.

        Near the truncation edges the discrete Sinkhorn fixed point departs
        from the continuum one because conditional laws lose tail mass
        there; pointwise comparisons are made on this interior.
        """
        if not 0 < fraction <= 1:
            raise ValueError("fraction must lie in (0, 1]")
        mid = 0.5 * (self.lower + self.upper)
        half = 0.5 * fraction * (self.upper - self.lower)
        return np.abs(self.nodes - mid) <= half * (1 + 1e-12)


def uniform_grid(lower: float, upper: float, n_nodes: int) -> Grid:
    if not upper > lower:
        raise ValueError("upper bound must exceed lower bound")
    if n_nodes < 2:
        raise ValueError("need at least two nodes")
    nodes = np.linspace(lower, upper, n_nodes)
    h = (upper - lower) / (n_nodes - 1)
    weights = np.full(n_nodes, h)
    weights[0] = weights[-1] = h / 2
    return Grid(nodes=nodes, weights=weights, lower=float(lower), upper=float(upper))


def _custom_bounds(family: Family, budget: float) -> tuple[float, float]:
    # U(x) >= U(0) - c|x| + alpha x^2 / 2 with c = |U'(0)| + sup g_tilde
    a = family.alpha
    c = abs(float(family.grad(0.0))) + family.g_tilde.sup_norm
    if not math.isfinite(c):
        raise ValueError("custom family needs a bounded g_tilde to bound its tails")
    centre = c / a
    # normaliser from a provisional grid wide enough to hold the bulk
    half = centre + 40.0 / math.sqrt(a)
    prov = uniform_grid(-half, half, 8193)
    log_z = logsumexp(-family.potential(prov.nodes) + prov.log_weights)
    log_pref = -float(family.potential(0.0)) - log_z + c * c / (2 * a) + math.log(2 * math.sqrt(2 * math.pi / a))
    # mass outside [-R, R] <= exp(log_pref) * sf(sqrt(a) (R - c / a))
    z = norm.isf(min(budget * math.exp(-log_pref), 0.5))
    r = centre + z / math.sqrt(a)
    return -r, r


def build_grid(family: Family, n_nodes: int = 1024, tail_mass_budget: float = 1e-12) -> Grid:
    """Uniform grid whose truncated tail mass is below ``tail_mass_budget``.

    Gaussian families use the exact two-sided Gaussian tail.  The
    perturbed family's density is within a factor ``exp(2|a|)`` of its
    Gaussian part, which inflates the tail accordingly.  Custom families use
    the sub-Gaussian envelope implied by ``alpha`` and ``sup g_tilde``.
    """
    if n_nodes < 16:
        raise ValueError("n_nodes must be at least 16")
    if not 0 < tail_mass_budget <= 1e-3:
        raise ValueError("tail_mass_budget must lie in (0, 1e-3]")
    if family.kind in (GAUSSIAN, PERTURBED):
        m = family.params["mean"]
        s = math.sqrt(family.params["variance"])
        inflate = math.exp(2 * abs(family.params.get("amplitude", 0.0)))
        z = norm.isf(tail_mass_budget / (2 * inflate))
        lo, hi = m - s * z, m + s * z
    else:
        lo, hi = _custom_bounds(family, tail_mass_budget)
    return uniform_grid(lo, hi, n_nodes)


@dataclass(frozen=True)
class Marginal1D:
    """A marginal family discretised on a grid.

    ``log_normalizer`` and ``density_weights`` are filled by
    :func:`normalize`.
    """

    family: Family
    grid: Grid
    log_normalizer: float = math.nan
    density_weights: np.ndarray | None = field(default=None, repr=False)

    @property
    def alpha(self) -> float:
        return self.family.alpha

    @property
    def beta(self) -> float:
        return self.family.beta

    @property
    def g_tilde(self) -> ProfileFunction:
        return self.family.g_tilde

    @property
    def g(self) -> ProfileFunction:
        return self.family.g

    @property
    def nodes(self) -> np.ndarray:
        return self.grid.nodes

    def U(self, x):
        """Normalised potential, so that ``exp(-U)`` integrates to one."""
        return self.family.potential(x) + self.log_normalizer

    def grad(self, x):
        return self.family.grad(x)

    def hess(self, x):
        return self.family.hess(x)


def normalize(marginal: Marginal1D) -> Marginal1D:
    """Fill the log-normaliser and probability weights by log-sum-exp."""
    log_terms = -marginal.family.potential(marginal.grid.nodes) + marginal.grid.log_weights
    if not np.any(np.isfinite(log_terms)):
        raise FloatingPointError("all log densities are -inf on the grid")
    log_z = float(logsumexp(log_terms))
    weights = np.exp(log_terms - log_z)
    return replace(marginal, log_normalizer=log_z, density_weights=weights)


def make_marginal(family: Family, n_nodes: int = 1024, tail_mass_budget: float = 1e-12) -> Marginal1D:
    """Build the grid for ``family`` and normalise."""
    return normalize(Marginal1D(family=family, grid=build_grid(family, n_nodes, tail_mass_budget)))


def moment(marginal: Marginal1D, k: int) -> float:
    """``M_k = int |x|^k d mu``."""
    if k < 1:
        raise ValueError("k must be a positive integer")
    x = marginal.grid.nodes
    total = float(np.dot(marginal.density_weights, np.abs(x) ** k))
    if k % 2 == 0 or not x[0] < 0 < x[-1]:
        return total
    # |x|^k has a kink at 0 for odd k, which degrades the trapezoid rule to
    # second order; integrate each half-line separately instead
    def integrand(t):
        return abs(t) ** k * math.exp(-float(marginal.U(t)))

    left = quad(integrand, x[0], 0.0, epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    right = quad(integrand, 0.0, x[-1], epsabs=1e-14, epsrel=1e-12, limit=200)[0]
    return left + right


def entropy(marginal: Marginal1D) -> float:
    """``int log(d mu / dx) d mu``, the negative of the differential entropy."""
    return float(-np.dot(marginal.density_weights, marginal.U(marginal.grid.nodes)))


def exp_moment(marginal: Marginal1D, sigma: float) -> float:
    """``int exp(sigma x^2) d mu``; ``inf`` when ``sigma >= alpha / 2``.

    The integrand decays like ``exp(-(alpha/2 - sigma) x^2)``, so the
    quadrature uses its own grid widened by ``sqrt(alpha / (alpha - 2 sigma))``
    at the marginal's spacing.
    """
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    a = marginal.alpha
    if sigma >= a / 2:
        return math.inf
    g = marginal.grid
    widen = math.sqrt(a / (a - 2 * sigma))
    half = max(abs(g.lower), abs(g.upper)) * widen + 1.0
    n = int(min(max(2 * half / g.spacing, g.size), 400_000)) + 1
    wide = uniform_grid(-half, half, n)
    x = wide.nodes
    return float(np.exp(logsumexp(sigma * x * x - marginal.U(x) + wide.log_weights)))
