"""Exact Schrödinger potentials for Gaussian marginals.

For Gaussian marginals both potentials are quadratic,
``phi(x) = a_phi x^2 / 2 + b_phi x + c_phi`` and likewise for ``psi``.
The heat-semigroup transform maps a quadratic ``h = a y^2/2 + b y + c``
to the quadratic

    log P_T e^{-h}(x) = -a x^2 / (2(1+Ta)) - b x / (1+Ta)
                        + T b^2 / (2(1+Ta)) - c - log(1+Ta) / 2,

so the Schrödinger system closes on the coefficients.  The solver
iterates exactly that map.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class GaussianEOT:
    """Quadratic Schrödinger potentials and the optimal plan's covariance."""

    mu_mean: float
    mu_var: float
    nu_mean: float
    nu_var: float
    T: float
    a_phi: float
    b_phi: float
    c_phi: float
    a_psi: float
    b_psi: float
    c_psi: float
    cross_cov: float
    iterations: int
    damped: bool

    def phi(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * self.a_phi * x * x + self.b_phi * x + self.c_phi

    def psi(self, y):
        y = np.asarray(y, dtype=float)
        return 0.5 * self.a_psi * y * y + self.b_psi * y + self.c_psi

    def grad_phi(self, x):
        return self.a_phi * np.asarray(x, dtype=float) + self.b_phi

    def grad_psi(self, y):
        return self.a_psi * np.asarray(y, dtype=float) + self.b_psi

    def plan_covariance(self) -> np.ndarray:
        """Covariance of the optimal plan from its precision matrix."""
        t = 1.0 / self.T
        prec = np.array([[t + self.a_phi, -t], [-t, t + self.a_psi]])
        return np.linalg.inv(prec)

    def plan_mean(self) -> np.ndarray:
        t = 1.0 / self.T
        prec = np.array([[t + self.a_phi, -t], [-t, t + self.a_psi]])
        return np.linalg.solve(prec, -np.array([self.b_phi, self.b_psi]))

    def conditional_y_given_x(self, x):
        """Mean and variance of the plan's conditional law of ``y`` given ``x``."""
        p = 1.0 / self.T + self.a_psi
        mean = (np.asarray(x, dtype=float) / self.T - self.b_psi) / p
        return mean, 1.0 / p

    def to_dict(self) -> dict:
        return asdict(self)


def _transform_coeffs(a: float, b: float, T: float) -> tuple[float, float, float]:
    """Quadratic, linear and constant coefficients of ``log P_T e^{-h}``, up to ``-c``."""
    d = 1.0 + T * a
    return -a / d, -b / d, T * b * b / (2.0 * d) - 0.5 * math.log(d)


def _gaussian_potential(mean: float, var: float) -> tuple[float, float, float]:
    return 1.0 / var, -mean / var, mean * mean / (2 * var) + 0.5 * math.log(2 * math.pi * var)


def solve_gaussian(
    mu_mean: float,
    mu_var: float,
    nu_mean: float,
    nu_var: float,
    T: float,
    tol: float = 1e-14,
    max_iter: int = 100_000,
) -> GaussianEOT:
    """Solve the Schrödinger system for two Gaussians by coefficient iteration.

    Starts from ``psi = U_nu`` and alternates the two half-steps of the
    system on ``(a, b)``.  If the undamped iteration fails to settle within
    ``max_iter // 2`` steps it restarts with damping ``0.5``.  The additive
    constants are split so that
    ``int phi d mu + Ent(mu) = int psi d nu + Ent(nu)``.
    """
    if not (mu_var > 0 and nu_var > 0 and T > 0):
        raise ValueError("variances and T must be positive")
    am, bm, cm = _gaussian_potential(mu_mean, mu_var)
    an, bn, cn = _gaussian_potential(nu_mean, nu_var)

    def sweep(a_psi, b_psi):
        qa, qb, _ = _transform_coeffs(a_psi, b_psi, T)
        a_phi, b_phi = am + qa, bm + qb
        qa, qb, _ = _transform_coeffs(a_phi, b_phi, T)
        return a_phi, b_phi, an + qa, bn + qb

    result = None
    for damping, budget in ((1.0, max_iter // 2), (0.5, max_iter)):
        a_psi, b_psi = an, bn
        for it in range(1, budget + 1):
            a_phi, b_phi, a_new, b_new = sweep(a_psi, b_psi)
            a_new = damping * a_new + (1 - damping) * a_psi
            b_new = damping * b_new + (1 - damping) * b_psi
            done = abs(a_new - a_psi) <= tol * max(1.0, abs(a_psi)) and abs(b_new - b_psi) <= tol * max(
                1.0, abs(b_psi)
            )
            a_psi, b_psi = a_new, b_new
            if not (math.isfinite(a_psi) and 1 + T * a_psi > 0):
                break
            if done:
                result = (a_psi, b_psi, it, damping < 1)
                break
        if result is not None:
            break
    if result is None:
        raise ArithmeticError("coefficient iteration did not converge")
    a_psi, b_psi, iterations, damped = result
    a_phi, b_phi, _, _ = sweep(a_psi, b_psi)

    # constants: c_phi + c_psi is fixed by the system, the split by the symmetric normalisation
    _, _, k_phi = _transform_coeffs(a_psi, b_psi, T)
    total = cm + k_phi
    ent_mu = -0.5 * math.log(2 * math.pi * math.e * mu_var)
    ent_nu = -0.5 * math.log(2 * math.pi * math.e * nu_var)
    quad_phi = 0.5 * a_phi * (mu_var + mu_mean**2) + b_phi * mu_mean
    quad_psi = 0.5 * a_psi * (nu_var + nu_mean**2) + b_psi * nu_mean
    c_phi = 0.5 * (total + quad_psi + ent_nu - quad_phi - ent_mu)
    c_psi = total - c_phi

    t = 1.0 / T
    det = (t + a_phi) * (t + a_psi) - t * t
    return GaussianEOT(
        mu_mean=float(mu_mean),
        mu_var=float(mu_var),
        nu_mean=float(nu_mean),
        nu_var=float(nu_var),
        T=float(T),
        a_phi=a_phi,
        b_phi=b_phi,
        c_phi=c_phi,
        a_psi=a_psi,
        b_psi=b_psi,
        c_psi=c_psi,
        cross_cov=t / det,
        iterations=iterations,
        damped=damped,
    )


def schrodinger_residual(sol: GaussianEOT) -> float:
    """Largest coefficient mismatch of both Schrödinger equations, constants included."""
    am, bm, cm = _gaussian_potential(sol.mu_mean, sol.mu_var)
    an, bn, cn = _gaussian_potential(sol.nu_mean, sol.nu_var)
    qa, qb, qc = _transform_coeffs(sol.a_psi, sol.b_psi, sol.T)
    r1 = (sol.a_phi - am - qa, sol.b_phi - bm - qb, sol.c_phi - cm - qc + sol.c_psi)
    qa, qb, qc = _transform_coeffs(sol.a_phi, sol.b_phi, sol.T)
    r2 = (sol.a_psi - an - qa, sol.b_psi - bn - qb, sol.c_psi - cn - qc + sol.c_phi)
    return max(abs(v) for v in r1 + r2)


def alpha_limit_closed_form(alpha: float, beta_other: float, T: float) -> float:
    """Limit of the strongly log-concave convexity recursion.

    ``(alpha + sqrt(alpha^2 + 4 alpha / (T^2 beta_other))) / 2 - 1/T``, which
    reduces to ``alpha - 1/T`` when ``beta_other`` is infinite.
    """
    if math.isinf(beta_other):
        return alpha - 1.0 / T
    return 0.5 * (alpha + math.sqrt(alpha * alpha + 4 * alpha / (T * T * beta_other))) - 1.0 / T


def oracle_profile_check(sol: GaussianEOT, alpha_phi_star: float, alpha_psi_star: float, tol: float = 1e-10) -> bool:
    """Whether the quadratic coefficients attain the convexity limits.

    Gaussian potentials are exactly as convex as the lower bound allows,
    so both coefficients must equal the supplied limits within ``tol``.
    """
    return abs(sol.a_phi - alpha_phi_star) <= tol and abs(sol.a_psi - alpha_psi_star) <= tol
