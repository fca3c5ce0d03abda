"""Explicit constants feeding the entropy and Hessian convergence bounds.

Contents
--------
ckp_constants
    Weighted Csiszar-Kullback-Pinsker constants ``(C1, C2)`` controlling
    first and second moments of a measure by its relative entropy.
entropy_bound_constant
    Multiplicative constant ``D(A, B, zeta)`` of the symmetric-entropy bound.
drift_constants
    Explicit geometric-drift pair for ``V_p(y) = 1 + |y|^p``.
distorted_metric_constants
    Radii, ``epsilon``, concave distortion ``f`` and rates of the
    Lyapunov-weighted concave transport metric.
hessian_rate_constant
    Prefactor of the pointwise Hessian convergence bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.optimize import brentq, minimize_scalar

from .measures import Marginal1D, exp_moment, moment

# fraction of alpha / 2 searched for the CKP constants; exp-moments blow up at the end
CKP_SIGMA_CAP = 0.98
# slack demanded when choosing epsilon in the double-integral condition
EPS_SLACK = 1.01


# --------------------------------------------------------------------------
# moment and entropy constants


def conditional_moment_bound(x, T: float, alpha_star: float, gt_sup: float, grad_at_0: float):
    """Upper bound on ``E|Y|`` for ``Y`` drawn from the conditional law at ``x``.

    ``|x| / (T a + 1) + (1 + sup g_tilde + |grad h(0)|) / (a + 1/T)`` with
    ``a`` the convexity level of ``h``.
    """
    x = np.abs(np.asarray(x, dtype=float))
    return x / (T * alpha_star + 1.0) + (1.0 + gt_sup + abs(grad_at_0)) / (alpha_star + 1.0 / T)


def ckp_c1_at(marginal: Marginal1D, sigma: float) -> float:
    """``sqrt(2/sigma + (2/sigma) log E exp(sigma x^2))`` for one ``sigma``."""
    return math.sqrt(2.0 / sigma + 2.0 / sigma * math.log(exp_moment(marginal, sigma)))


def ckp_c2_at(marginal: Marginal1D, sigma: float) -> float:
    """``3/sigma + (2/sigma) E exp(sigma x^2)`` for one ``sigma``."""
    return 3.0 / sigma + 2.0 / sigma * exp_moment(marginal, sigma)


def ckp_constants(marginal: Marginal1D, xtol: float = 1e-8) -> tuple[float, float]:
    """Infima of the two CKP expressions over ``sigma`` in ``(0, alpha/2)``.

    The search runs on ``(0, 0.49 alpha]``; every ``sigma`` in the open
    interval yields a valid constant, so truncating the search only makes
    the constants slightly larger.

    Returns
    -------
    (C1, C2) : tuple of float
    """
    hi = CKP_SIGMA_CAP * marginal.alpha / 2.0
    lo = hi * 1e-6
    out = []
    for fn in (ckp_c1_at, ckp_c2_at):
        res = minimize_scalar(lambda s: fn(marginal, s), bounds=(lo, hi), method="bounded", options={"xatol": xtol})
        out.append(float(min(res.fun, fn(marginal, hi))))
    return out[0], out[1]


@dataclass(frozen=True)
class MarginalConstants:
    """First two moments and CKP constants of one marginal."""

    M1: float
    M2: float
    C1: float
    C2: float

    @classmethod
    def of(cls, marginal: Marginal1D) -> "MarginalConstants":
        c1, c2 = ckp_constants(marginal)
        return cls(M1=moment(marginal, 1), M2=moment(marginal, 2), C1=c1, C2=c2)


def entropy_bound_constant(A: float, B: float, mc: MarginalConstants, H: float) -> float:
    """``D(A, B, zeta)`` of the symmetric-entropy bound.

    ``2[3A M2 + (A M1 + B) M1 + B M1] + A C2 (sqrt H + H/2) + (A M1 + B) C1 sqrt H``
    where ``H`` is the relative entropy of the first adjusted marginal
    (``mu^1`` for the mu side, ``nu^0`` for the nu side).  Passing the
    entropy at step ``n`` gives the sharper per-step variant.
    """
    if H < 0:
        raise ValueError("relative entropy must be nonnegative")
    base = 3 * A * mc.M2 + (A * mc.M1 + B) * mc.M1 + B * mc.M1
    sh = math.sqrt(H)
    return 2 * base + A * mc.C2 * (sh + H / 2) + (A * mc.M1 + B) * mc.C1 * sh


def entropy_bound_constants(A: float, B: float, mc: MarginalConstants, H_first: float, H_n: float | None = None):
    """``D`` and, when ``H_n`` is given, the sharper per-step variant."""
    d = entropy_bound_constant(A, B, mc, H_first)
    return d if H_n is None else (d, entropy_bound_constant(A, B, mc, H_n))


# --------------------------------------------------------------------------
# drift constants


def drift_constants(alpha_eff: float, c_lin: float, p: int = 2) -> tuple[float, float]:
    """Pair ``(A, B)`` with ``L V_p <= -A V_p + B`` for ``V_p = 1 + |y|^p``.

    The generator ``L = (1/2) d^2 - (1/2) W' d`` has a drift with
    ``y W'(y) >= alpha_eff y^2 - c_lin |y|``, so
    ``L V_p(y) <= p(p-1)/2 |y|^(p-2) + p c_lin/2 |y|^(p-1) - p alpha_eff/2 |y|^p``.
    Taking ``A = p alpha_eff / 4`` leaves half the confining term, and ``B``
    is ``A`` plus the supremum of the remaining polynomial in ``t = |y|``.
    For ``p = 2`` this is ``1 + A + c_lin^2 / (2 alpha_eff)`` and for
    ``p = 4`` the supremum sits at
    ``t = (6 c + sqrt(36 c^2 + 192 a)) / (8 a)``.
    """
    if not alpha_eff > 0:
        raise ValueError("alpha_eff must be positive")
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    a, c = float(alpha_eff), float(c_lin)
    if p == 2:
        A = a / 2
        return A, 1.0 + A + c * c / (2 * a)
    if p == 4:
        t = (6 * c + math.sqrt(36 * c * c + 192 * a)) / (8 * a)
        return a, a + 6 * t * t + 2 * c * t**3 - a * t**4
    A = p * a / 4

    def poly(t):
        return 0.5 * p * (p - 1) * t ** (p - 2) + 0.5 * p * c * t ** (p - 1) - A * t**p

    # the derivative has a single positive root; bracket it and solve
    def dpoly(t):
        return 0.5 * p * (p - 1) * (p - 2) * t ** (p - 3) + 0.5 * p * (p - 1) * c * t ** (p - 2) - p * A * t ** (p - 1)

    hi = 1.0
    while dpoly(hi) > 0:
        hi *= 2
    t = brentq(dpoly, 1e-12, hi, xtol=1e-14)
    return A, A + poly(t)


# --------------------------------------------------------------------------
# distorted-metric constants


def _double_integral(c: float, eps: float, R1: float, n: int) -> float:
    # int_0^R1 int_0^s exp(c/4 (s^2 - r^2) + 2 sqrt(eps)(s - r)) dr ds with r = s u
    s = np.linspace(0.0, R1, n + 1)[:, None]
    u = np.linspace(0.0, 1.0, n + 1)[None, :]
    vals = s * np.exp(0.25 * c * s * s * (1 - u * u) + 2 * math.sqrt(eps) * s * (1 - u))
    return float(np.trapezoid(np.trapezoid(vals, u[0], axis=1), s[:, 0]))


def eq_double_integral(c: float, eps: float, R1: float) -> tuple[float, float]:
    """Richardson-extrapolated double integral and its error estimate.

    Returns
    -------
    (value, err) : tuple of float
        ``value`` combines the 400 and 800 panel trapezoid rules; ``err`` is
        the gap to the finer rule.
    """
    coarse = _double_integral(c, eps, R1, 400)
    fine = _double_integral(c, eps, R1, 800)
    rich = (4 * fine - coarse) / 3
    return rich, abs(rich - fine)


@dataclass(frozen=True)
class DistortedMetricConstants:
    """Constants of the Lyapunov-weighted concave transport metric.

    ``f`` is tabulated on ``r_grid`` and held constant past ``R2``.
    """

    drift_A2: float
    drift_B2: float
    drift_A4: float
    drift_B4: float
    c_excess: float
    R1: float
    R2: float
    epsilon: float
    double_integral: float
    xi: float
    beta_const: float
    lam: float
    C_I: float
    C_Delta: float
    r_grid: np.ndarray = field(repr=False)
    f_values: np.ndarray = field(repr=False)
    g_values: np.ndarray = field(repr=False)
    phi_values: np.ndarray = field(repr=False)

    def phi(self, r):
        return np.exp(-self.c_excess / 8 * np.asarray(r) ** 2 - 2 * math.sqrt(self.epsilon) * np.asarray(r))

    def f(self, r):
        return np.interp(np.asarray(r, dtype=float), self.r_grid, self.f_values, right=self.f_values[-1])

    @property
    def f_R2(self) -> float:
        return float(self.f_values[-1])

    def eps_slack(self) -> float:
        """Ratio of the left side of the epsilon condition to the integral."""
        return 1.0 / (4 * self.drift_B2 * self.epsilon) / self.double_integral

    def to_dict(self) -> dict:
        return {
            k: getattr(self, k)
            for k in (
                "drift_A2",
                "drift_B2",
                "drift_A4",
                "drift_B4",
                "c_excess",
                "R1",
                "R2",
                "epsilon",
                "double_integral",
                "xi",
                "beta_const",
                "lam",
                "C_I",
                "C_Delta",
            )
        } | {"f_R2": self.f_R2}


def distorted_metric_constants(
    alpha_nu: float,
    G_tilde_nu: float,
    drift2: tuple[float, float],
    drift4: tuple[float, float],
    n_fine: int = 40_001,
) -> DistortedMetricConstants:
    """Build the distorted-metric constants from drift pairs.

    ``R1`` and ``R2`` are the largest ``|x - y|`` over centred discs in the
    plane of squared radii ``2 B/A`` and ``4 B (1 + 1/A)``.  ``epsilon`` is
    the largest value in ``(0, 1)`` for which ``1 / (4 B epsilon)`` exceeds
    the double integral by one percent, located by bisection.
    """
    A2, B2 = map(float, drift2)
    if not (A2 > 0 and B2 > 0):
        raise ValueError("drift constants must be positive")
    c = max(G_tilde_nu - alpha_nu, 0.0)
    R1 = math.sqrt(2 * (2 * B2 / A2))
    R2 = math.sqrt(2 * (4 * B2 * (1 + 1 / A2)))

    def feasible(eps):
        val, err = eq_double_integral(c, eps, R1)
        return 1.0 / (4 * B2 * eps) >= EPS_SLACK * (val + err)

    hi = 0.999
    if feasible(hi):
        eps = hi
    else:
        lo = hi
        while not feasible(lo):
            lo /= 2
            if lo < 1e-300:
                raise ArithmeticError("no epsilon in (0, 1) satisfies the double-integral condition")
        hi = min(2 * lo, 0.999)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi) or hi - lo <= 1e-9 * lo:
                break
            lo, hi = (mid, hi) if feasible(mid) else (lo, mid)
        eps = lo
    integral, err = eq_double_integral(c, eps, R1)
    integral += err

    # fine radial grid containing R1 exactly
    n1 = max(int(n_fine * R1 / R2), 2)
    r = np.concatenate([np.linspace(0.0, R1, n1), np.linspace(R1, R2, max(n_fine - n1, 2))[1:]])
    i1 = n1 - 1
    phi = np.exp(-c / 8 * r * r - 2 * math.sqrt(eps) * r)
    Phi = cumulative_trapezoid(phi, r, initial=0.0)
    J = cumulative_trapezoid(Phi / phi, r, initial=0.0)
    xi_inv, beta_inv = J[i1], J[-1]
    g = 1.0 - np.minimum(J, xi_inv) / (4 * xi_inv) - J / (4 * beta_inv)
    f = cumulative_trapezoid(phi * g, r, initial=0.0)
    lam = float(min(1.0 / beta_inv, A2, 4 * A2 * B2 * eps) / 2)
    return DistortedMetricConstants(
        drift_A2=A2,
        drift_B2=B2,
        drift_A4=float(drift4[0]),
        drift_B4=float(drift4[1]),
        c_excess=c,
        R1=R1,
        R2=R2,
        epsilon=eps,
        double_integral=integral,
        xi=float(1.0 / xi_inv),
        beta_const=float(1.0 / beta_inv),
        lam=lam,
        C_I=math.exp(-c / 8 * R2 * R2 - 2 * math.sqrt(eps) * R2),
        C_Delta=max(3.0, 2.0 + 2.0 * R2 * R2),
        r_grid=r,
        f_values=f,
        g_values=g,
        phi_values=phi,
    )


# --------------------------------------------------------------------------
# Hessian constant


def moment_prefactor_cx(
    x: float,
    T: float,
    alpha_psi_star: float,
    alpha_nu: float,
    gt_sup: float,
    grad_psi_star_at_0: float,
    grad_drift: float,
) -> float:
    """``C_x = max{1, C1 |x|/T + C2}`` from conditional first-moment bounds.

    ``C1 |x|/T + C2`` bounds the sum of the conditional first moments under
    the limit potential and under every iterate.  Iterates are controlled
    with the floor ``alpha_nu`` of their convexity and ``grad_drift``, a
    bound on ``|grad psi^n(0) - grad psi*(0)|`` over all ``n``.
    """
    K = 1.0 + gt_sup + abs(grad_psi_star_at_0)
    C1 = T / (T * alpha_psi_star + 1.0) + 1.0 / alpha_nu
    C2 = K / (alpha_psi_star + 1.0 / T) + (K + grad_drift) / alpha_nu
    return max(1.0, C1 * abs(x) / T + C2)


def u_bound(t, x: float, T: float, dm: DistortedMetricConstants, A: float, B: float, alpha_psi_star: float, gt_sup: float, grad_psi_star_at_0: float):
    """Upper bound on the time-integrated weighted gradient error up to ``t``."""
    t = np.asarray(t, dtype=float)
    eps = dm.epsilon
    A2, B2, A4, B4 = dm.drift_A2, dm.drift_B2, dm.drift_A4, dm.drift_B4
    e2, e4 = np.exp(t * A2), np.exp(t * A4)
    term_b = B * t * (1 + eps * B2 / A2 * (1 + e2) + eps * B2 * t * e2)
    term_m = A * t / (alpha_psi_star + 1 / T) * (abs(x) / T + 1 + gt_sup + abs(grad_psi_star_at_0))
    term_v = A * eps * t * (B2 / A2 + B4 / A4 * (1 + e4) + B4 * t * e4)
    return term_b + term_m + term_v


@dataclass(frozen=True)
class HessianConstant:
    value: float
    t_opt: float
    C_x: float


def hessian_rate_constant(
    x: float,
    T: float,
    dm: DistortedMetricConstants,
    A: float,
    B: float,
    alpha_psi_star: float,
    gt_sup: float,
    grad_psi_star_at_0: float,
    C_x: float,
) -> HessianConstant:
    """Minimise the Hessian prefactor over ``t > log(C_Delta) / lambda``.

    The objective is
    ``(10/3) C_x / (T^2 sqrt eps) max{2/C_I, 1/(f(R2) sqrt eps)}
    C_Delta / (1 - C_Delta e^{-lambda t}) (1/2) e^{c t / C_I} U(t)``
    and is minimised in log form: a geometric scan of ``t - t0`` over
    ``(1e-8, 50] / lambda`` followed by bounded Brent refinement.
    """
    lam = dm.lam
    if not lam > 0:
        raise ValueError("lambda must be positive")
    t0 = math.log(dm.C_Delta) / lam
    eps = dm.epsilon
    pref = (
        math.log(10 / 3)
        + math.log(C_x)
        - math.log(T * T * math.sqrt(eps))
        + math.log(max(2 / dm.C_I, 1 / (dm.f_R2 * math.sqrt(eps))))
        + math.log(dm.C_Delta)
        + math.log(0.5)
    )

    def log_obj(s):
        # s = t - t0 > 0; 1 - C_Delta e^{-lambda t} = 1 - e^{-lambda s}
        t = t0 + s
        with np.errstate(over="ignore"):
            ub = float(u_bound(t, x, T, dm, A, B, alpha_psi_star, gt_sup, grad_psi_star_at_0))
        return pref - math.log(-math.expm1(-lam * s)) + dm.c_excess / dm.C_I * t + math.log(ub)

    s_grid = np.geomspace(1e-8, 50.0, 400) / lam
    vals = np.array([log_obj(s) for s in s_grid])
    i = int(np.argmin(vals))
    lo, hi = s_grid[max(i - 1, 0)], s_grid[min(i + 1, s_grid.size - 1)]
    best_s, best = s_grid[i], vals[i]
    if hi > lo:
        res = minimize_scalar(log_obj, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10 * hi})
        if res.fun < best:
            best_s, best = float(res.x), float(res.fun)
    return HessianConstant(value=math.exp(best), t_opt=t0 + best_s, C_x=C_x)
