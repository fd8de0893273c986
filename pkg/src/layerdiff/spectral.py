"""Transform-domain kernels, characteristic roots and residue coefficients.

For a layer ``[alpha, beta]`` with diffusivity ``d`` and weight scale ``tau``
put ``w = sqrt(s / (tau d))`` and

    L(y; s) = (cosh w y, w sinh w y),      C(y; s) = (sinh w y, w cosh w y),
    Delta(s) = <b, C(beta)> <a, L(alpha)> - <a, C(alpha)> <b, L(beta)>.

All roots of ``Delta`` away from zero lie on the negative real axis, where
``w = i mu`` is purely imaginary.  There ``C``, ``Delta`` and ``psi`` are
purely imaginary and are returned divided by ``i`` (the *reduced*
convention): ``C -> (sin mu y, mu cos mu y)``, ``L -> (cos mu y,
-mu sin mu y)``.  Every coefficient built from them is real.

Root finding and the limits at ``s = 0`` work with the entire function

    G(z) = (a0 b0 - a1 b1 z) l S(z l^2) + (a0 b1 - a1 b0) K(z l^2),
    S(u) = sinh(sqrt u) / sqrt u,  K(u) = cosh(sqrt u),  z = s / (tau d),

of which ``Delta = w G`` (``l`` is the layer width).  Similarly
``<L, C(y)> = w H_L(y; z)`` with ``H_L = L0 y S(z y^2) + L1 K(z y^2)``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq


class SpectralError(RuntimeError):
    """Root finding failed (positive or repeated characteristic root)."""


@dataclass(frozen=True)
class RobinVector:
    """Coefficients ``(c0, c1)`` of a Robin functional ``c0 u + c1 u_x``."""

    c0: float
    c1: float
    label: str = "|c0|+|c1|>0"

    def __post_init__(self) -> None:
        object.__setattr__(self, "c0", float(self.c0))
        object.__setattr__(self, "c1", float(self.c1))
        if not (math.isfinite(self.c0) and math.isfinite(self.c1)):
            raise ValueError("Robin coefficients must be finite")
        if abs(self.c0) + abs(self.c1) == 0.0:
            raise ValueError(f"Robin coefficients violate {self.label}")

    def dot(self, v) -> np.ndarray:
        return self.c0 * v[0] + self.c1 * v[1]


@dataclass(frozen=True)
class LayerGeometry:
    """Interval ``[left, right]`` with diffusivity ``d`` and weight scale ``tau``."""

    left: float
    right: float
    d: float
    tau: float = 1.0

    def __post_init__(self) -> None:
        if not self.right > self.left:
            raise ValueError("layer must have right > left")
        if not self.d > 0.0:
            raise ValueError("diffusivity must be positive")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")

    @property
    def width(self) -> float:
        return self.right - self.left

    @property
    def scale(self) -> float:
        """``tau * d``, the factor between ``s`` and ``z``."""
        return self.tau * self.d


# --- transform-domain kernels --------------------------------------------------


def _w(s: float, geom: LayerGeometry) -> tuple[float, bool]:
    """Return (|w|, oscillatory) for the transform variable ``s``."""
    z = s / geom.scale
    return math.sqrt(abs(z)), z < 0.0


def kernel_L(y, s: float, geom: LayerGeometry) -> np.ndarray:
    """``L(y; s)``; stacked components along axis 0."""
    y = np.asarray(y, dtype=float)
    w, osc = _w(s, geom)
    if osc:
        return np.array([np.cos(w * y), -w * np.sin(w * y)])
    return np.array([np.cosh(w * y), w * np.sinh(w * y)])


def kernel_C(y, s: float, geom: LayerGeometry) -> np.ndarray:
    """``C(y; s)`` (reduced for ``s < 0``)."""
    y = np.asarray(y, dtype=float)
    w, osc = _w(s, geom)
    if osc:
        return np.array([np.sin(w * y), w * np.cos(w * y)])
    return np.array([np.sinh(w * y), w * np.cosh(w * y)])


def delta(s: float, a: RobinVector, b: RobinVector, geom: LayerGeometry) -> float:
    """Characteristic function ``Delta(s)`` in absolute coordinates (reduced for ``s < 0``)."""
    al, be = geom.left, geom.right
    return float(
        b.dot(kernel_C(be, s, geom)) * a.dot(kernel_L(al, s, geom))
        - a.dot(kernel_C(al, s, geom)) * b.dot(kernel_L(be, s, geom))
    )


def psi(x, y, s: float, geom: LayerGeometry, L: RobinVector):
    """``psi(x, y) = <L, C(y)> cosh(w x) - <L, L(y)> sinh(w x)`` (reduced for ``s < 0``)."""
    x = np.asarray(x, dtype=float)
    w, osc = _w(s, geom)
    if osc:
        return L.dot(kernel_C(y, s, geom)) * np.cos(w * x) - L.dot(kernel_L(y, s, geom)) * np.sin(w * x)
    return L.dot(kernel_C(y, s, geom)) * np.cosh(w * x) - L.dot(kernel_L(y, s, geom)) * np.sinh(w * x)


# --- entire-function form ------------------------------------------------------


def _sinc(x):
    """``sin(x) / x``."""
    return np.sinc(np.asarray(x, dtype=float) / np.pi)


def _sinc_minus_cos(x):
    """``(sin(x)/x - cos(x)) / x**2``, stable near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 0.05
    xs2 = x[small] ** 2
    out[small] = 1.0 / 3.0 - xs2 / 30.0 + xs2**2 / 840.0 - xs2**3 / 45360.0
    xl = x[~small]
    out[~small] = (np.sin(xl) / xl - np.cos(xl)) / xl**2
    return out


def _g_neg(mu, a: RobinVector, b: RobinVector, width: float):
    """``G(-mu^2)``."""
    p, q, r = a.c0 * b.c0, a.c1 * b.c1, a.c0 * b.c1 - a.c1 * b.c0
    return (p + q * mu**2) * width * _sinc(mu * width) + r * np.cos(mu * width)


def _g1_neg(mu, a: RobinVector, b: RobinVector, width: float):
    """``G(-mu^2) / mu^2``, used when ``G(0) = 0``."""
    p, q = a.c0 * b.c0, a.c1 * b.c1
    return p * width**3 * _sinc_minus_cos(mu * width) + q * width * _sinc(mu * width)


def _g_pos_scaled(w, a: RobinVector, b: RobinVector, width: float):
    """``2 w exp(-w l) G(w^2)``, bounded for large ``w``."""
    p, q, r = a.c0 * b.c0, a.c1 * b.c1, a.c0 * b.c1 - a.c1 * b.c0
    e = np.exp(-2.0 * w * width)
    return (p - q * w**2) * (1.0 - e) + r * w * (1.0 + e)


def delta_reduced_prime(mu, a: RobinVector, b: RobinVector, width: float):
    """Derivative of the reduced characteristic function with respect to ``mu``."""
    p, q, r = a.c0 * b.c0, a.c1 * b.c1, a.c0 * b.c1 - a.c1 * b.c0
    sl, cl = np.sin(mu * width), np.cos(mu * width)
    return 2.0 * q * mu * sl + (p + q * mu**2) * width * cl + r * (cl - mu * width * sl)


class Branch(enum.Enum):
    """Behaviour of a transform-domain quotient at ``s = 0``."""

    REMOVABLE = "removable"
    SIMPLE_POLE = "simple_pole"
    DOUBLE_POLE = "double_pole"


@dataclass(frozen=True)
class SpectralBasis:
    """Characteristic roots of one layer and the data needed for residues.

    Attributes
    ----------
    s : ndarray
        Roots ``s_1 > s_2 > ... > s_K`` of ``Delta`` (all negative).
    mu : ndarray
        ``sqrt(-s_k / (tau d))``.
    dprime : ndarray
        ``dDelta/ds`` at the roots, reduced convention.
    s_next : float
        The root ``s_{K+1}``, used for truncation bounds.
    degenerate : bool
        True when ``s = 0`` is itself a root of ``Delta / w`` (for example
        Neumann at both ends); the kernels then pick up a pole at zero.
    """

    geometry: LayerGeometry
    a: RobinVector
    b: RobinVector
    s: np.ndarray
    mu: np.ndarray
    dprime: np.ndarray
    s_next: float
    degenerate: bool
    g0: float
    gz0: float
    gzz0: float

    @property
    def K(self) -> int:
        return int(self.s.size)

    @property
    def theta_branch(self) -> Branch:
        return Branch.SIMPLE_POLE if self.degenerate else Branch.REMOVABLE

    @property
    def phi_branch(self) -> Branch:
        return Branch.DOUBLE_POLE if self.degenerate else Branch.SIMPLE_POLE

    def truncated(self, K: int) -> SpectralBasis:
        """The same basis restricted to its first ``K`` roots."""
        if K > self.K:
            raise ValueError(f"basis only holds {self.K} roots, asked for {K}")
        s_next = self.s_next if K == self.K else float(self.s[K])
        return SpectralBasis(
            self.geometry, self.a, self.b, self.s[:K], self.mu[:K], self.dprime[:K],
            s_next, self.degenerate, self.g0, self.gz0, self.gzz0,
        )

    # -- residues -----------------------------------------------------------
    def theta_coefficients(self, x, y) -> np.ndarray:
        """Residue weights of ``Theta(x, y, t)``, shape ``broadcast(x, y) + (K,)``."""
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        mu = self.mu
        ca = self.a.c0 * np.sin(mu * x) + self.a.c1 * mu * np.cos(mu * x)
        cb = self.b.c0 * np.sin(mu * y) + self.b.c1 * mu * np.cos(mu * y)
        return ca * cb / (mu * self.dprime)

    def phi_coefficients(self, y, L: RobinVector) -> np.ndarray:
        """Residue weights of ``Phi(y, t; L)``, shape ``shape(y) + (K,)``."""
        y = np.asarray(y, dtype=float)[..., None]
        mu = self.mu
        cl = L.c0 * np.sin(mu * y) + L.c1 * mu * np.cos(mu * y)
        return cl / (self.s * self.dprime)

    def theta0(self, x, y):
        """Constant part of ``Theta`` (zero unless the basis is degenerate)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.degenerate:
            return np.zeros(np.broadcast(x, y).shape)
        ha = self.a.c0 * x + self.a.c1
        hb = self.b.c0 * y + self.b.c1
        return self.geometry.scale * ha * hb / self.gz0

    def phi0(self, y, L: RobinVector):
        """Time-independent part of ``Phi(y, t; L)``."""
        y = np.asarray(y, dtype=float)
        h0 = L.c0 * y + L.c1
        if not self.degenerate:
            return h0 / self.g0
        hz = L.c0 * y**3 / 6.0 + L.c1 * y**2 / 2.0
        c2 = 0.5 * self.gzz0
        return (hz * self.gz0 - h0 * c2) / self.gz0**2

    def phi_slope(self, y, L: RobinVector):
        """Coefficient of the term linear in ``t`` (nonzero only when degenerate)."""
        y = np.asarray(y, dtype=float)
        if not self.degenerate:
            return np.zeros_like(y)
        return self.geometry.d * (L.c0 * y + L.c1) / self.gz0

    def tail_bound(self, t_min: float, coefficient_bound: float = 1.0) -> float:
        """``exp(s_{K+1} t_min / tau) * coefficient_bound``."""
        return math.exp(self.s_next * t_min / self.geometry.tau) * coefficient_bound


def characteristic_taylor(a: RobinVector, b: RobinVector, width: float) -> tuple[float, float, float]:
    """``G(0)``, ``G'(0)`` and ``G''(0)`` of the entire characteristic function."""
    p, q, r = a.c0 * b.c0, a.c1 * b.c1, a.c0 * b.c1 - a.c1 * b.c0
    l = width
    g0 = p * l + r
    g1 = p * l**3 / 6.0 - q * l + r * l**2 / 2.0
    g2 = 2.0 * (p * l**5 / 120.0 - q * l**3 / 6.0 + r * l**4 / 24.0)
    return g0, g1, g2


def _is_degenerate(a: RobinVector, b: RobinVector, width: float) -> bool:
    p, r = a.c0 * b.c0, a.c0 * b.c1 - a.c1 * b.c0
    # compare against the size of the functionals, not of G(0)'s own terms,
    # so that a vanishing c0 next to c1 = O(1) counts as pure Neumann
    scale = (abs(a.c0) * width + abs(a.c1)) * (abs(b.c0) * width + abs(b.c1)) / width
    return abs(p * width + r) <= 1e-13 * scale


def _check_no_positive_roots(a: RobinVector, b: RobinVector, width: float) -> None:
    p, q, r = a.c0 * b.c0, a.c1 * b.c1, a.c0 * b.c1 - a.c1 * b.c0
    if q != 0.0:
        bound = 1.0 + max(abs(r), abs(p)) / abs(q)
    elif r != 0.0:
        bound = 1.0 + abs(p / r)
    else:
        bound = 1.0
    # roots beyond w ~ 1e6 / l would need coefficients tiny to rounding level
    bound = min(bound, 1e6 / width)
    w = np.linspace(0.0, bound + 40.0 / width, 4001)[1:]
    vals = _g_pos_scaled(w, a, b, width)
    if _is_degenerate(a, b, width):
        # G(0) = 0: the sign just right of zero follows G'(0).
        ref = characteristic_taylor(a, b, width)[1]
    else:
        ref = characteristic_taylor(a, b, width)[0]
    signs = np.sign(vals[np.abs(vals) > 1e-12 * np.max(np.abs(vals))])
    if ref != 0.0 and np.any(signs != np.sign(ref)):
        raise SpectralError(
            "characteristic function has a positive root; the boundary data "
            "admit exponentially growing modes"
        )


def find_roots(
    a: RobinVector,
    b: RobinVector,
    geom: LayerGeometry,
    K: int,
    root_tol: float = 1e-13,
) -> SpectralBasis:
    """Locate the first ``K + 1`` characteristic roots of a layer.

    Roots are bracketed by a sign scan of ``G(-mu^2)`` with step
    ``pi / (4 l)``, refined with Brent's method and polished by one Newton
    step.  When zero is a root the scan uses ``G(z) / z`` instead so that
    ``mu = 0`` is excluded.

    Raises
    ------
    SpectralError
        If a root in ``s > 0`` exists or a located root is not simple.
    """
    if K < 0:
        raise ValueError("K must be non-negative")
    width = geom.width
    _check_no_positive_roots(a, b, width)
    degenerate = _is_degenerate(a, b, width)
    g = (lambda m: float(_g1_neg(m, a, b, width))) if degenerate else (lambda m: float(_g_neg(m, a, b, width)))
    step = math.pi / (4.0 * width)
    roots: list[float] = []
    lo, glo = 0.0, g(0.0)
    if glo == 0.0:
        lo, glo = 1e-3 * step, g(1e-3 * step)
    while len(roots) < K + 1:
        hi = lo + step
        ghi = g(hi)
        if ghi == 0.0:
            roots.append(hi)
            hi = hi + 1e-3 * step
            ghi = g(hi)
        elif glo * ghi < 0.0:
            roots.append(brentq(g, lo, hi, xtol=root_tol * max(hi, 1.0), rtol=1e-15, maxiter=200))
        lo, glo = hi, ghi
    mu = np.asarray(roots)
    # one Newton polish on the reduced characteristic function
    dr = delta_reduced_prime(mu, a, b, width)
    red = mu * _g_neg(mu, a, b, width)
    mu = mu - np.where(dr != 0.0, red / dr, 0.0)
    dr = delta_reduced_prime(mu, a, b, width)
    scale = abs(a.c0 * b.c0) * width + abs(a.c1 * b.c1) * mu**2 * width + abs(a.c0 * b.c1 - a.c1 * b.c0) * (1 + mu * width)
    if np.any(np.abs(dr) < 1e-10 * scale):
        raise SpectralError("characteristic root is not simple")
    s = -geom.scale * mu**2
    dprime = dr / (-2.0 * geom.scale * mu)
    g0, gz0, gzz0 = characteristic_taylor(a, b, width)
    if degenerate:
        g0 = 0.0
    return SpectralBasis(geom, a, b, s[:K], mu[:K], dprime[:K], float(s[K]), degenerate, g0, gz0, gzz0)


# --- time-domain kernels -------------------------------------------------------


def theta_kernel(x, y, t, basis: SpectralBasis, K: int | None = None) -> np.ndarray:
    """Truncated ``Theta(x, y, t) = Theta_0 + sum_k Theta_k exp(s_k t / tau)``.

    ``x`` and ``y`` broadcast together; ``t`` adds a trailing axis when it
    is an array.
    """
    bs = basis if K is None else basis.truncated(K)
    t = np.asarray(t, dtype=float)
    coef = bs.theta_coefficients(x, y)
    ex = np.exp(np.multiply.outer(bs.s / bs.geometry.tau, t))
    series = np.tensordot(coef, ex, axes=([-1], [0]))
    return np.asarray(bs.theta0(x, y))[(...,) + (None,) * t.ndim] + series


def phi_kernel(y, t, basis: SpectralBasis, L: RobinVector, K: int | None = None) -> np.ndarray:
    """Truncated ``Phi(y, t; L) = Phi_0 + kappa t + sum_k Phi_k exp(s_k t / tau)``."""
    bs = basis if K is None else basis.truncated(K)
    t = np.asarray(t, dtype=float)
    coef = bs.phi_coefficients(y, L)
    ex = np.exp(np.multiply.outer(bs.s / bs.geometry.tau, t))
    series = np.tensordot(coef, ex, axes=([-1], [0]))
    pad = (...,) + (None,) * t.ndim
    return np.asarray(bs.phi0(y, L))[pad] + np.asarray(bs.phi_slope(y, L))[pad] * t + series


def phi_kernel_time_derivative(y, t, basis: SpectralBasis, L: RobinVector, K: int | None = None) -> np.ndarray:
    """``d/dt Phi(y, t; L)``."""
    bs = basis if K is None else basis.truncated(K)
    t = np.asarray(t, dtype=float)
    rate = bs.s / bs.geometry.tau
    coef = bs.phi_coefficients(y, L) * rate
    ex = np.exp(np.multiply.outer(rate, t))
    series = np.tensordot(coef, ex, axes=([-1], [0]))
    return np.asarray(bs.phi_slope(y, L))[(...,) + (None,) * t.ndim] + series


def phi_kernel_integral(y, t, basis: SpectralBasis, L: RobinVector, K: int | None = None) -> np.ndarray:
    """``int_0^t Phi(y, u; L) du`` in closed form."""
    bs = basis if K is None else basis.truncated(K)
    t = np.asarray(t, dtype=float)
    tau = bs.geometry.tau
    coef = bs.phi_coefficients(y, L) * (tau / bs.s)
    ex = np.expm1(np.multiply.outer(bs.s / tau, t))
    series = np.tensordot(coef, ex, axes=([-1], [0]))
    pad = (...,) + (None,) * t.ndim
    return np.asarray(bs.phi0(y, L))[pad] * t + 0.5 * np.asarray(bs.phi_slope(y, L))[pad] * t**2 + series
