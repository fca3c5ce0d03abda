"""Certified contraction rates for Sinkhorn's algorithm.

The pipeline is

1. ``alpha_sequence`` iterates the convexity recursion
   ``alpha_{n+1} = alpha - 1/T + G(alpha_n, 2) / (2 T^2)`` for each side,
   where ``G`` inverts the increasing function ``F`` in its second argument.
2. ``gamma_sequence`` turns each convexity level into a per-half-step
   contraction factor ``gamma_k``; the product ``gamma^mu gamma^nu / T^2`` is the
   per-iteration rate of the integrated gradient error.
3. ``hat_gamma`` inflates the factors for the pointwise (weighted sup-norm)
   rates using the linear-growth constants ``(A, B)`` of the initial error.

``beta = inf`` is carried as ``math.inf`` and handled on explicit branches.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Sequence

import numpy as np

from .profiles import ProfileFunction, profile_from_dict, zero_profile

MU = "mu"
NU = "nu"

# margin used when asserting a strict inequality "rho < 1", so that a value
# equal to one up to rounding is never reported as certified
STRICT_MARGIN = 1e-12


def strictly_below(value: float, bound: float) -> bool:
    return value < bound * (1.0 - STRICT_MARGIN)


@dataclass(frozen=True)
class RateParams:
    """Profile data of both marginals and the regularisation ``T``."""

    alpha_mu: float
    alpha_nu: float
    beta_mu: float
    beta_nu: float
    T: float
    gt_mu: ProfileFunction = field(default_factory=zero_profile)
    gt_nu: ProfileFunction = field(default_factory=zero_profile)
    g_mu: ProfileFunction = field(default_factory=zero_profile)
    g_nu: ProfileFunction = field(default_factory=zero_profile)

    def __post_init__(self):
        if not (self.alpha_mu > 0 and self.alpha_nu > 0):
            raise ValueError("alpha values must be positive")
        if not self.T > 0:
            raise ValueError("T must be positive")
        if not (self.beta_mu > 0 and self.beta_nu > 0):
            raise ValueError("beta values must be positive or inf")

    @classmethod
    def from_marginals(cls, mu, nu, T: float) -> "RateParams":
        return cls(
            alpha_mu=mu.alpha,
            alpha_nu=nu.alpha,
            beta_mu=mu.beta,
            beta_nu=nu.beta,
            T=float(T),
            gt_mu=mu.g_tilde,
            gt_nu=nu.g_tilde,
            g_mu=mu.g,
            g_nu=nu.g,
        )

    def side(self, side: str):
        """``(alpha, beta_other, g_other, g_tilde_own)`` for the recursion of ``side``."""
        if side == MU:
            return self.alpha_mu, self.beta_nu, self.g_nu, self.gt_mu
        if side == NU:
            return self.alpha_nu, self.beta_mu, self.g_mu, self.gt_nu
        raise ValueError(f"side must be {MU!r} or {NU!r}")

    @property
    def strongly_log_concave(self) -> bool:
        return all(p.is_zero for p in (self.gt_mu, self.gt_nu, self.g_mu, self.g_nu))


def F(beta: float, g: ProfileFunction, ghat: ProfileFunction, alpha: float, T: float, s: float) -> float:
    """``beta s + s/(T(1+T alpha)) + sqrt(s) g(sqrt(s)) + sqrt(s) ghat(sqrt(s)) / (1+T alpha)^2``."""
    d = 1.0 + T * alpha
    if not d > 0:
        raise ValueError("alpha must exceed -1/T")
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return 0.0
    if math.isinf(beta):
        return math.inf
    r = math.sqrt(s)
    out = beta * s + s / (T * d)
    if not g.is_zero:
        out += r * float(g.value(r))
    if not ghat.is_zero:
        out += r * float(ghat.value(r)) / (d * d)
    return out


def G(beta: float, g: ProfileFunction, ghat: ProfileFunction, alpha: float, T: float, u: float) -> float:
    """``inf{s >= 0 : F(s) >= u}``; zero when ``beta`` is infinite.

    Bisection on ``[0, u / beta]`` (where ``F >= beta s`` already reaches
    ``u``) down to adjacent floating-point numbers.  The bracket does not
    depend on ``alpha``, which keeps the result exactly monotone in
    ``alpha``.
    """
    if not 1.0 + T * alpha > 0:
        raise ValueError("alpha must exceed -1/T")
    if not u > 0:
        raise ValueError("u must be positive")
    if math.isinf(beta):
        return 0.0
    lo, hi = 0.0, u / beta
    while True:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            return hi
        if F(beta, g, ghat, alpha, T, mid) >= u:
            hi = mid
        else:
            lo = mid


@dataclass(frozen=True)
class AlphaSchedule:
    """Convexity levels ``alpha_{side,k}`` for ``k = 0, 1, ...`` and their limit."""

    side: str
    values: tuple
    limit: float
    fixed_point_residual: float
    converged: bool

    def at(self, k: int) -> float:
        return self.values[k] if k < len(self.values) else self.limit


def alpha_step(params: RateParams, side: str, alpha_k: float) -> float:
    """One step of the convexity recursion for ``side``."""
    alpha, beta_other, g_other, gt_own = params.side(side)
    T = params.T
    if math.isinf(beta_other):
        return alpha - 1.0 / T
    return alpha - 1.0 / T + G(beta_other, g_other, gt_own, alpha_k, T, 2.0) / (2.0 * T * T)


def alpha_sequence(
    params: RateParams, side: str, n_terms: int, fp_tol: float = 1e-10, cap: int = 10_000
) -> AlphaSchedule:
    """Iterate the convexity recursion from ``alpha - 1/T``.

    At least ``n_terms`` values are stored.  Iteration continues (up to
    ``cap`` terms) until the geometric tail estimate
    ``step * q / (1 - q)``, with ``q`` the ratio of successive steps, is
    below ``fp_tol / 10``; a slowly contracting recursion therefore runs
    longer than a plain step test would allow.  The sequence increases, so
    the last value, reported as the limit, errs on the conservative side.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    alpha = params.side(side)[0]
    values = [alpha - 1.0 / params.T]
    converged = False
    prev_step = math.inf
    while len(values) < cap:
        nxt = alpha_step(params, side, values[-1])
        step = abs(nxt - values[-1])
        values.append(nxt)
        q = step / prev_step if prev_step > 0 else 0.0
        tail = step * q / (1.0 - q) if q < 1.0 else math.inf
        prev_step = step
        # steps at rounding level carry no ratio information
        at_noise = step <= 8 * np.finfo(float).eps * max(1.0, abs(nxt))
        if at_noise or (step < fp_tol and tail < 0.1 * fp_tol):
            converged = True
            if len(values) >= n_terms:
                break
    limit = values[-1]
    residual = abs(alpha_step(params, side, limit) - limit)
    return AlphaSchedule(side=side, values=tuple(values), limit=limit, fixed_point_residual=residual, converged=converged)


def gamma_from_alpha(alpha_k: float, gt: ProfileFunction, T: float) -> float:
    """Contraction factor for convexity level ``alpha_k``.

    With ``theta = alpha_k + 1/T`` this is ``1/theta`` when ``gt`` vanishes and
    ``gt'(0)^2 / (gt'(R)^2 (theta + gt'(0)))`` with
    ``R = sup(gt) (1/gt'(0) + 2/theta)`` otherwise.
    """
    return coupling_prefactor(alpha_k + 1.0 / T, gt)


def coupling_prefactor(theta: float, gt: ProfileFunction) -> float:
    """W1 contraction constant of a measure with convexity ``theta`` and correction ``gt``.

    ``1/theta`` when ``gt`` vanishes, else
    ``gt'(0)^2 / (gt'(R)^2 (theta + gt'(0)))`` with
    ``R = sup(gt) (1/gt'(0) + 2/theta)``.
    """
    if not theta > 0:
        raise ValueError("convexity level must be positive")
    if gt.is_zero:
        return 1.0 / theta
    s0 = gt.slope_at_zero
    R = gt.sup_norm * (1.0 / s0 + 2.0 / theta)
    if gt.kind == "tanh":
        # with sup = 2 sqrt(L) and slope L at 0, R sqrt(L) / 2 = 1 + 2 L / theta
        z = 1.0 + 2.0 * gt.L / theta
        return math.inf if z > 170.0 else math.cosh(z) ** 4 / (theta + s0)
    sR = float(gt.deriv(R))
    if sR == 0.0:
        return math.inf
    return s0 * s0 / (sR * sR * (theta + s0))


def gamma_tanh_display(alpha_k: float, gt: ProfileFunction, T: float) -> float | None:
    """Tanh-family shortcut with ``cosh^4`` taken at ``R`` rather than ``R sqrt(L)/2``.

    This is the alternative simplified expression some derivations state
    for the tanh family.  It is reported next to :func:`gamma_from_alpha`
    for comparison only; it is never used in a bound.
    """
    if gt.kind != "tanh":
        return None
    L = gt.L
    theta = alpha_k + 1.0 / T
    R = 2.0 * math.sqrt(L) * (1.0 / L + 2.0 / theta)
    if R > 170.0:
        return math.inf
    return math.cosh(R) ** 4 / (theta + L)


@dataclass(frozen=True)
class RateCertificate:
    """Rate sequences, limits and verdicts for one parameter set."""

    T: float
    alpha_mu_schedule: tuple
    alpha_nu_schedule: tuple
    alpha_phi_star: float
    alpha_psi_star: float
    gamma_mu: tuple
    gamma_nu: tuple
    gamma_inf_mu: float
    gamma_inf_nu: float
    product_rho: float
    contraction_certified: bool
    gamma_inf_display_mu: float | None = None
    gamma_inf_display_nu: float | None = None
    A: float | None = None
    B: float | None = None
    grad_phi_star_at_0: float | None = None
    grad_psi_star_at_0: float | None = None
    hat_gamma_mu: tuple = ()
    hat_gamma_nu: tuple = ()
    hat_gamma_inf_mu: float | None = None
    hat_gamma_inf_nu: float | None = None
    pointwise_rho: float | None = None
    pointwise_certified: bool | None = None
    pointwise_threshold_certified: bool | None = None

    def gamma(self, side: str, k: int) -> float:
        seq, lim = (self.gamma_mu, self.gamma_inf_mu) if side == MU else (self.gamma_nu, self.gamma_inf_nu)
        return seq[k] if k < len(seq) else lim

    def hat(self, side: str, k: int) -> float:
        seq, lim = (self.hat_gamma_mu, self.hat_gamma_inf_mu) if side == MU else (self.hat_gamma_nu, self.hat_gamma_inf_nu)
        return seq[k] if k < len(seq) else lim

    def product(self, n: int) -> float:
        """``prod_{k<n} gamma_k^mu gamma_k^nu / T^2``."""
        T2 = self.T * self.T
        return math.prod(self.gamma(MU, k) * self.gamma(NU, k) / T2 for k in range(n))

    def hat_product(self, n: int) -> float:
        """``prod_{k<n} hat_gamma_k^mu hat_gamma_k^nu / T^2``."""
        T2 = self.T * self.T
        return math.prod(self.hat(MU, k) * self.hat(NU, k) / T2 for k in range(n))

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = list(v)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "RateCertificate":
        names = {f.name for f in fields(cls)}
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in d.items() if k in names}
        return cls(**kw)


def gamma_sequence(params: RateParams, alpha_mu_sched: AlphaSchedule, alpha_nu_sched: AlphaSchedule) -> RateCertificate:
    """Contraction factors for both sides and the product rate."""
    T = params.T
    g_mu = tuple(gamma_from_alpha(a, params.gt_mu, T) for a in alpha_mu_sched.values)
    g_nu = tuple(gamma_from_alpha(a, params.gt_nu, T) for a in alpha_nu_sched.values)
    inf_mu = gamma_from_alpha(alpha_mu_sched.limit, params.gt_mu, T)
    inf_nu = gamma_from_alpha(alpha_nu_sched.limit, params.gt_nu, T)
    rho = inf_mu * inf_nu / (T * T)
    return RateCertificate(
        T=T,
        alpha_mu_schedule=alpha_mu_sched.values,
        alpha_nu_schedule=alpha_nu_sched.values,
        alpha_phi_star=alpha_mu_sched.limit,
        alpha_psi_star=alpha_nu_sched.limit,
        gamma_mu=g_mu,
        gamma_nu=g_nu,
        gamma_inf_mu=inf_mu,
        gamma_inf_nu=inf_nu,
        product_rho=rho,
        contraction_certified=strictly_below(rho, 1.0),
        gamma_inf_display_mu=gamma_tanh_display(alpha_mu_sched.limit, params.gt_mu, T),
        gamma_inf_display_nu=gamma_tanh_display(alpha_nu_sched.limit, params.gt_nu, T),
    )


def gamma_recursion_strongly_log_concave(alpha: float, beta_other: float, T: float, n_terms: int) -> list[float]:
    """``gamma_0 = 1/alpha``, ``gamma_{k+1} = 1/(alpha + 1/(T^2 beta_other + gamma_k))``."""
    out = [1.0 / alpha]
    for _ in range(n_terms - 1):
        tail = 0.0 if math.isinf(beta_other) else 1.0 / (T * T * beta_other + out[-1])
        out.append(1.0 / (alpha + tail))
    return out


def gamma_limit_strongly_log_concave(alpha: float, beta_other: float, T: float) -> float:
    """``2 / (alpha + sqrt(alpha^2 + 4 alpha / (T^2 beta_other)))``."""
    if math.isinf(beta_other):
        return 1.0 / alpha
    return 2.0 / (alpha + math.sqrt(alpha * alpha + 4 * alpha / (T * T * beta_other)))


def _slc_threshold(a_mu: float, a_nu: float, b_mu: float, b_nu: float) -> float:
    # (1/(a_mu a_nu) - 1/(b_mu b_nu)) / sqrt((1/a_mu + 1/b_mu)(1/a_nu + 1/b_nu)),
    # which equals the product form and treats 1/inf = 0 exactly
    ib_mu = 0.0 if math.isinf(b_mu) else 1.0 / b_mu
    ib_nu = 0.0 if math.isinf(b_nu) else 1.0 / b_nu
    num = 1.0 / (a_mu * a_nu) - ib_mu * ib_nu
    den = math.sqrt((1.0 / a_mu + ib_mu) * (1.0 / a_nu + ib_nu))
    return num / den


def sufficient_T(params: RateParams) -> dict:
    """Smallest ``T`` guaranteed to give ``rho < 1`` by a closed formula.

    Branches:

    ``beta_infinite``
        strongly log-concave marginals, both ``beta`` infinite:
        ``(alpha_mu alpha_nu)^(-1/2)``.
    ``strongly_log_concave``
        ``(beta_mu beta_nu - alpha_mu alpha_nu) /
        sqrt(alpha_mu beta_mu alpha_nu beta_nu (alpha_mu + beta_mu)(alpha_nu + beta_nu))``.
    ``profile``
        square root of the product over both sides of
        ``gt'(0)^2 / (gt'(R)^2 (alpha + gt'(0)))`` with
        ``R = sup(gt) (1/gt'(0) + 2/alpha)``, or ``1/alpha`` for a zero profile.
    """
    a_mu, a_nu, b_mu, b_nu = params.alpha_mu, params.alpha_nu, params.beta_mu, params.beta_nu
    if params.strongly_log_concave:
        if math.isinf(b_mu) and math.isinf(b_nu):
            branch, thr = "beta_infinite", 1.0 / math.sqrt(a_mu * a_nu)
        else:
            branch, thr = "strongly_log_concave", _slc_threshold(a_mu, a_nu, b_mu, b_nu)
    else:
        branch = "profile"
        thr = math.sqrt(coupling_prefactor(a_mu, params.gt_mu) * coupling_prefactor(a_nu, params.gt_nu))
    return {"branch": branch, "threshold": thr, "certified": params.T > thr}


def init_linear_growth(alpha_phi_star: float, T: float, gt_mu_sup: float, grad_phi_star_at_0: float) -> tuple[float, float]:
    """Constants with ``|grad psi^0 - grad psi*|(y) <= A |y| + B`` for ``psi^0 = U_nu``.

    ``A = (T alpha + 2) / (T (T alpha + 1))`` and
    ``B = (1 + sup g_tilde_mu + |grad phi*(0)|) / (T alpha + 1)``.
    """
    d = T * alpha_phi_star + 1.0
    if not d > 0:
        raise ValueError("T alpha_phi_star + 1 must be positive")
    return (T * alpha_phi_star + 2.0) / (T * d), (1.0 + gt_mu_sup + abs(grad_phi_star_at_0)) / d


def hat_gamma(
    cert: RateCertificate,
    params: RateParams,
    alpha_phi_star: float,
    alpha_psi_star: float,
    grad_phi_star_at_0: float,
    grad_psi_star_at_0: float,
    A: float | None = None,
    B: float | None = None,
) -> RateCertificate:
    """Add the pointwise rate factors to a certificate.

    ``hat_gamma_k = gamma_k max{1/(T a + 1), 1 + (A/B)(1 + sup gt + |grad h*(0)|)/(a + 1/T)}``
    with ``a`` the limiting convexity of the side.  ``A`` and ``B`` default
    to :func:`init_linear_growth`.
    """
    T = params.T
    if A is None or B is None:
        A, B = init_linear_growth(alpha_phi_star, T, params.gt_mu.sup_norm, grad_phi_star_at_0)
    if not B > 0:
        raise ValueError("B must be positive")

    def bracket(a_star, gt, grad0):
        return max(1.0 / (T * a_star + 1.0), 1.0 + (A / B) * (1.0 + gt.sup_norm + abs(grad0)) / (a_star + 1.0 / T))

    br_mu = bracket(alpha_phi_star, params.gt_mu, grad_phi_star_at_0)
    br_nu = bracket(alpha_psi_star, params.gt_nu, grad_psi_star_at_0)
    hat_mu = tuple(g * br_mu for g in cert.gamma_mu)
    hat_nu = tuple(g * br_nu for g in cert.gamma_nu)
    inf_mu, inf_nu = cert.gamma_inf_mu * br_mu, cert.gamma_inf_nu * br_nu
    prho = inf_mu * inf_nu / (T * T)

    def eq28_term(gamma_inf, alpha, gt, grad0):
        return gamma_inf + gamma_inf * A / (alpha * B) * (1.0 + gt.sup_norm + abs(grad0))

    t28 = max(
        1.0 / params.alpha_mu,
        1.0 / params.alpha_nu,
        eq28_term(cert.gamma_inf_mu, params.alpha_mu, params.gt_mu, grad_phi_star_at_0),
        eq28_term(cert.gamma_inf_nu, params.alpha_nu, params.gt_nu, grad_psi_star_at_0),
    )
    return replace(
        cert,
        A=A,
        B=B,
        grad_phi_star_at_0=abs(grad_phi_star_at_0),
        grad_psi_star_at_0=abs(grad_psi_star_at_0),
        hat_gamma_mu=hat_mu,
        hat_gamma_nu=hat_nu,
        hat_gamma_inf_mu=inf_mu,
        hat_gamma_inf_nu=inf_nu,
        pointwise_rho=prho,
        pointwise_certified=strictly_below(prho, 1.0),
        pointwise_threshold_certified=T > t28,
    )


def certify(
    params: RateParams,
    n_terms: int,
    grad_phi_star_at_0: float,
    grad_psi_star_at_0: float,
    fp_tol: float = 1e-10,
    A: float | None = None,
    B: float | None = None,
) -> RateCertificate:
    """Full certificate: schedules, gamma and hat-gamma sequences, verdicts."""
    s_mu = alpha_sequence(params, MU, n_terms, fp_tol)
    s_nu = alpha_sequence(params, NU, n_terms, fp_tol)
    cert = gamma_sequence(params, s_mu, s_nu)
    return hat_gamma(cert, params, s_mu.limit, s_nu.limit, grad_phi_star_at_0, grad_psi_star_at_0, A, B)


def rate_params_to_dict(p: RateParams) -> dict:
    return {
        "alpha_mu": p.alpha_mu,
        "alpha_nu": p.alpha_nu,
        "beta_mu": p.beta_mu,
        "beta_nu": p.beta_nu,
        "T": p.T,
        "gt_mu": p.gt_mu.to_dict(),
        "gt_nu": p.gt_nu.to_dict(),
        "g_mu": p.g_mu.to_dict(),
        "g_nu": p.g_nu.to_dict(),
    }


def rate_params_from_dict(d: dict) -> RateParams:
    return RateParams(
        alpha_mu=d["alpha_mu"],
        alpha_nu=d["alpha_nu"],
        beta_mu=d["beta_mu"],
        beta_nu=d["beta_nu"],
        T=d["T"],
        gt_mu=profile_from_dict(d.get("gt_mu")),
        gt_nu=profile_from_dict(d.get("gt_nu")),
        g_mu=profile_from_dict(d.get("g_mu")),
        g_nu=profile_from_dict(d.get("g_nu")),
    )
