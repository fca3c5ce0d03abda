"""Concavity-profile function classes and sampled convexity profiles.

A profile function ``g`` is a nonnegative function on ``(0, inf)`` used to
quantify how far a potential is from being uniformly convex.  Three
classes are supported:

``CLASS_G``
    ``r -> sqrt(r) g(sqrt(r))`` is non-decreasing and concave and
    ``r g(r) -> 0`` as ``r -> 0``.
``CLASS_G_HAT``
    ``CLASS_G`` plus boundedness and ``2 g'' + g g' <= 0``.
``CLASS_G_TILDE``
    ``CLASS_G_HAT`` plus ``g(0+) = 0`` and ``g' >= 0``.

Only three concrete kinds are implemented: the zero function, the tanh
family ``2 sqrt(L) tanh(r sqrt(L) / 2)`` and tabulated profiles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

CLASS_G = "G"
CLASS_G_HAT = "G_hat"
CLASS_G_TILDE = "G_tilde"
CLASSES = (CLASS_G, CLASS_G_HAT, CLASS_G_TILDE)

_FD_REL_STEP = 1e-4
_CLASS_TOL = 1e-6


@dataclass(frozen=True)
class ProfileFunction:
    """A member of one of the profile classes.

    Attributes
    ----------
    kind : str
        ``"zero"``, ``"tanh"`` or ``"tabulated"``.
    value, deriv, second_deriv : callable
        Vectorised evaluators of ``g``, ``g'`` and ``g''`` for ``r > 0``.
    sup_norm : float
        ``sup g``; ``inf`` for unbounded members.
    slope_at_zero : float
        ``g'(0+)``.
    class_flags : frozenset of str
        Classes this profile claims to belong to.
    L : float or None
        Parameter of the tanh family.
    """

    kind: str
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    second_deriv: Callable[[np.ndarray], np.ndarray] = field(repr=False, compare=False)
    sup_norm: float
    slope_at_zero: float
    class_flags: frozenset
    L: float | None = None
    table: tuple | None = field(default=None, repr=False, compare=False)

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero"

    def __call__(self, r):
        return self.value(r)

    def to_dict(self) -> dict:
        out = {"kind": self.kind}
        if self.kind == "tanh":
            out["L"] = self.L
        elif self.kind == "tabulated":
            out["abscissae"] = [float(v) for v in self.table[0]]
            out["ordinates"] = [float(v) for v in self.table[1]]
            out["class_flags"] = sorted(self.class_flags)
        return out


def zero_profile() -> ProfileFunction:
    """The identically zero profile, a member of every class."""

    def zeros(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    return ProfileFunction(
        kind="zero",
        value=zeros,
        deriv=zeros,
        second_deriv=zeros,
        sup_norm=0.0,
        slope_at_zero=0.0,
        class_flags=frozenset(CLASSES),
    )


def tanh_profile(L: float) -> ProfileFunction:
    """Return ``g(r) = 2 sqrt(L) tanh(r sqrt(L) / 2)``.

    The family satisfies ``2 g'' + g g' = 0`` identically, has
    ``g'(0) = L`` and ``sup g = 2 sqrt(L)``.
    """
    if not L > 0 or not math.isfinite(L):
        raise ValueError(f"tanh profile needs a finite positive L, got {L!r}")
    sq = math.sqrt(L)

    def value(r):
        return 2.0 * sq * np.tanh(np.asarray(r, dtype=float) * sq / 2.0)

    def deriv(r):
        return L / np.cosh(np.asarray(r, dtype=float) * sq / 2.0) ** 2

    def second_deriv(r):
        z = np.asarray(r, dtype=float) * sq / 2.0
        return -L * sq * np.tanh(z) / np.cosh(z) ** 2

    return ProfileFunction(
        kind="tanh",
        value=value,
        deriv=deriv,
        second_deriv=second_deriv,
        sup_norm=2.0 * sq,
        slope_at_zero=L,
        class_flags=frozenset(CLASSES),
        L=float(L),
    )


class _Table:
    """Monotone cubic interpolant, held constant past the last abscissa."""

    def __init__(self, r, g):
        self.table = (np.asarray(r, float), np.asarray(g, float))
        self._p = PchipInterpolator(r, g, extrapolate=True)
        self._dp = self._p.derivative()
        self._ddp = self._p.derivative(2)
        self._rmax = float(r[-1])
        self._gmax = float(g[-1])

    def value(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self._rmax, self._gmax, self._p(np.minimum(r, self._rmax)))

    def deriv(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self._rmax, 0.0, self._dp(np.minimum(r, self._rmax)))

    def second_deriv(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r >= self._rmax, 0.0, self._ddp(np.minimum(r, self._rmax)))


def tabulated_profile(
    abscissae: Sequence[float],
    ordinates: Sequence[float],
    class_flags: Sequence[str] = (),
) -> ProfileFunction:
    """Profile given by a table, interpolated by a monotone cubic.

    Values below the first abscissa use the interpolant's polynomial
    extension; values past the last abscissa are held constant.  Class
    membership is not assumed; pass ``class_flags`` only after checking
    them with :func:`class_membership_check`.
    """
    r = np.asarray(abscissae, dtype=float)
    g = np.asarray(ordinates, dtype=float)
    if r.ndim != 1 or r.size < 2 or r.shape != g.shape:
        raise ValueError("tabulated profile needs two matching 1D arrays of length >= 2")
    if not np.all(r > 0) or not np.all(np.diff(r) > 0):
        raise ValueError("abscissae must be positive and strictly increasing")
    if not np.all(g >= 0):
        raise ValueError("ordinates must be nonnegative")
    unknown = set(class_flags) - set(CLASSES)
    if unknown:
        raise ValueError(f"unknown classes {sorted(unknown)}")
    tab = _Table(r, g)
    slope0 = float(max(tab._dp(0.0), 0.0))
    return ProfileFunction(
        kind="tabulated",
        value=tab.value,
        deriv=tab.deriv,
        second_deriv=tab.second_deriv,
        sup_norm=float(np.max(g)),
        slope_at_zero=slope0,
        class_flags=frozenset(class_flags),
        table=tab.table,
    )


def profile_from_dict(d: dict | None) -> ProfileFunction:
    """Inverse of :meth:`ProfileFunction.to_dict`."""
    if d is None or d.get("kind", "zero") == "zero":
        return zero_profile()
    if d["kind"] == "tanh":
        return tanh_profile(float(d["L"]))
    if d["kind"] == "tabulated":
        return tabulated_profile(d["abscissae"], d["ordinates"], d.get("class_flags", ()))
    raise ValueError(f"unknown profile kind {d['kind']!r}")


def solve_L(R: float, C_U: float, rtol: float = 1e-12) -> float:
    """Smallest ``L`` with ``g_L(R) / R >= C_U`` for the tanh family.

    The map ``L -> g_L(R) / R`` is increasing, behaving like ``L`` near
    zero and like ``2 sqrt(L) / R`` for large ``L``, so bisection on a
    bracket grown by doubling always terminates.
    """
    if not (R > 0 and C_U > 0):
        raise ValueError("R and C_U must be positive")

    def ratio(L):
        sq = math.sqrt(L)
        return 2.0 * sq * math.tanh(R * sq / 2.0) / R

    lo, hi = 0.0, max(C_U, 1e-300)
    while ratio(hi) < C_U:
        lo, hi = hi, 2.0 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        if ratio(mid) >= C_U:
            hi = mid
        else:
            lo = mid
    return hi


def class_membership_check(
    g: ProfileFunction, cls: str, grid: Sequence[float]
) -> tuple[bool, list[str]]:
    """Check the defining conditions of ``cls`` on ``grid``.

    Derivatives are central differences with step ``1e-4 * max(1, r)``
    and inequalities are allowed a violation of ``1e-6``.

    Returns
    -------
    ok : bool
    violations : list of str
        Human-readable names of the failed conditions.
    """
    if cls not in CLASSES:
        raise ValueError(f"unknown class {cls!r}")
    r = np.asarray(grid, dtype=float)
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("grid must be nonempty and positive")
    tol = _CLASS_TOL
    violations: list[str] = []
    h = _FD_REL_STEP * np.maximum(1.0, r)

    gv = g.value(r)
    if np.any(gv < -tol):
        violations.append("nonnegativity")

    # u -> sqrt(u) g(sqrt(u)) on u = r^2
    u = r**2
    hu = _FD_REL_STEP * np.maximum(1.0, u)
    u_lo = np.maximum(u - hu, 0.5 * u)
    u_hi = u + (u - u_lo)

    def lift(v):
        s = np.sqrt(v)
        return s * g.value(s)

    lu, l0, lh = lift(u_lo), lift(u), lift(u_hi)
    step = u - u_lo
    d1 = (lh - lu) / (2 * step)
    d2 = (lh - 2 * l0 + lu) / step**2
    if np.any(d1 < -tol):
        violations.append("lifted profile non-decreasing")
    if np.any(d2 * step > tol):
        violations.append("lifted profile concave")
    r_small = min(float(r[0]), 1e-8)
    if abs(r_small * float(g.value(r_small))) > tol:
        violations.append("r g(r) -> 0 at the origin")

    hm = np.minimum(h, r / 2)
    g_hi, g_lo = g.value(r + hm), g.value(r - hm)
    gp = (g_hi - g_lo) / (2 * hm)
    if cls in (CLASS_G_HAT, CLASS_G_TILDE):
        if not math.isfinite(g.sup_norm):
            violations.append("bounded")
        gpp = (g_hi - 2 * gv + g_lo) / hm**2
        if np.any(2 * gpp + gv * gp > tol):
            violations.append("2g'' + g g' <= 0")
    if cls == CLASS_G_TILDE:
        if abs(float(g.value(r_small))) > tol:
            violations.append("g(0+) = 0")
        if np.any(gp < -tol):
            violations.append("g' >= 0")
    return (not violations, violations)


@dataclass(frozen=True)
class ConvexityProfileEstimate:
    """Sampled convexity and concavity profiles.

    ``kappa_values[i]`` is the minimum and ``ell_values[i]`` the maximum of
    ``(U'(x + r) - U'(x)) / r`` over the sample points at radius
    ``radii[i]``.  The minimum over a subset can only overestimate the true
    infimum, so a passing check means "not falsified".
    """

    radii: np.ndarray
    kappa_values: np.ndarray
    ell_values: np.ndarray


def estimate_kappa(
    U_prime: Callable[[np.ndarray], np.ndarray],
    radii: Sequence[float],
    sample_points: Sequence[float],
) -> ConvexityProfileEstimate:
    """Sampled integrated convexity profile of a one-dimensional potential."""
    x = np.asarray(sample_points, dtype=float)
    r = np.asarray(radii, dtype=float)
    if x.size == 0:
        raise ValueError("empty sample set")
    if r.size == 0 or np.any(r <= 0):
        raise ValueError("radii must be positive")
    base = U_prime(x)
    q = (U_prime(x[None, :] + r[:, None]) - base[None, :]) / r[:, None]
    return ConvexityProfileEstimate(radii=r, kappa_values=q.min(axis=1), ell_values=q.max(axis=1))


def verify_alc(marginal, alpha: float, g_tilde: ProfileFunction, radii: Sequence[float]) -> bool:
    """Sampled check of ``kappa(r) >= alpha - g_tilde(r) / r``.

    The marginal's grid nodes serve as sample points.  A ``True`` result
    means the profile bound was not falsified on the sample.
    """
    nodes = marginal.grid.nodes
    est = estimate_kappa(marginal.family.grad, radii, nodes)
    r = est.radii
    # cancellation error of the difference quotient (U'(x + r) - U'(x)) / r
    scale = float(np.max(np.abs(marginal.family.grad(nodes))))
    tol = 16 * np.finfo(float).eps * (2 * scale / r + abs(alpha)) + 1e-12 * max(1.0, abs(alpha))
    return bool(np.all(est.kappa_values >= alpha - g_tilde.value(r) / r - tol))
