"""Closed-form solution of a single layer with weighted Robin data.

The solution is assembled from three pieces,

    phi(x, t) = T[lambda zeta](beta - x; b) - T[lambda xi](alpha - x; a) + theta(x, t),

where ``theta`` carries the initial profile and the source and ``T`` is the
boundary-memory operator

    T f(y, t; L) = Phi(y, 0; L) f(t) + int_0^t d/dt Phi(y, t - u; L) f(u) du.

Expanding ``Phi`` in residues, ``T`` becomes a constant/linear part plus
``sum_k Phi_k(y) Gamma_k f`` with ``Gamma_k f = f + (s_k / tau) int_0^t
exp(s_k (t - u) / tau) f(u) du``.  The exponential integrals are done
exactly for piecewise linear (or cell-wise constant) data, so stiff modes
with ``s_k dt / tau << -1`` cost nothing in accuracy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.signal import lfilter

from .funcspace import (
    FunctionSpec,
    SpaceTimeFunctionSpec,
    TimeGrid,
    TimeSeries,
    WeightParams,
    eval_fn,
    eval_weight,
    sample,
)
from .spectral import LayerGeometry, RobinVector, SpectralBasis, find_roots
from .transforms import cumulative_integral, exp_history, phi1, phi2

GAUSS_ORDER = 5
MIN_PANELS = 64


@dataclass(frozen=True)
class OneLayerProblem:
    """A single layer ``[alpha, beta]`` with its data.

    ``zeta`` is the Robin datum at the left end (functional ``a``) and
    ``xi`` the datum at the right end (functional ``b``); both are the
    unweighted data, the solver multiplies them by the time weight.
    """

    geometry: LayerGeometry
    a: RobinVector
    b: RobinVector
    eta: FunctionSpec
    zeta: FunctionSpec
    xi: FunctionSpec
    source: SpaceTimeFunctionSpec | None = None
    weight: WeightParams = field(default_factory=WeightParams)

    def __post_init__(self) -> None:
        if self.geometry.tau != self.weight.tau:
            raise ValueError("geometry.tau and weight.tau must agree")


@dataclass
class SolutionField:
    """Sampled solution ``phi_j(x, t)`` of every layer.

    ``values[j]`` has shape ``(len(x[j]), len(grid))``.
    """

    x: list[np.ndarray]
    grid: TimeGrid
    values: list[np.ndarray]
    provenance: str
    metadata: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        for xs, v in zip(self.x, self.values):
            if v.shape != (len(xs), len(self.grid)):
                raise ValueError(f"layer values of shape {v.shape} do not match nodes")
            if not np.all(np.isfinite(v)):
                raise FloatingPointError("solution contains non-finite values")

    @property
    def n_layers(self) -> int:
        return len(self.values)

    def rows(self) -> Iterator[tuple[float, float, int, float]]:
        """Yield ``(x, t, layer, phi)`` in layer, x, t order (layers 1-based)."""
        t = self.grid.nodes
        for j, (xs, v) in enumerate(zip(self.x, self.values), start=1):
            for i, xv in enumerate(xs):
                for n, tv in enumerate(t):
                    yield float(xv), float(tv), j, float(v[i, n])

    def sup_norm(self) -> float:
        return max(float(np.max(np.abs(v))) for v in self.values)


# --- quadrature -----------------------------------------------------------------


def gauss_nodes(lo: float, hi: float, n_panels: int, order: int = GAUSS_ORDER) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on ``[lo, hi]``."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * xg[None, :]).ravel()
    weights = (half[:, None] * wg[None, :]).ravel()
    return nodes, weights


def default_panels(K: int) -> int:
    # at least one panel per half wavelength of the fastest retained mode
    return max(MIN_PANELS, K)


# --- boundary memory ------------------------------------------------------------


def memory_terms(values: np.ndarray, interp: str, dt: float, basis: SpectralBasis) -> np.ndarray:
    """``f + (s_k / tau) int_0^t exp(s_k (t-u)/tau) f(u) du`` for every root; shape (K, N+1)."""
    q = basis.s / basis.geometry.tau
    if q.size == 0:
        return np.zeros((0, np.size(values)))
    hist = exp_history(q, values, dt, interp)
    return np.asarray(values)[None, :] + q[:, None] * hist


def gamma_op(k: int, phi: TimeSeries, basis: SpectralBasis, weight: WeightParams) -> TimeSeries:
    """Boundary-memory operator of the ``k``-th root (1-based).

    ``Gamma_k phi = lambda phi + (s_k / tau) int_0^t lambda(u) exp(s_k (t-u)/tau) phi(u) du``,
    with ``lambda phi`` integrated exactly as a piecewise linear function.
    """
    if not 1 <= k <= basis.K:
        raise IndexError(f"root index {k} outside 1..{basis.K}")
    weighted = phi.values * eval_weight(weight, phi.t)
    q = basis.s[k - 1 : k] / weight.tau
    hist = exp_history(q, weighted, phi.grid.dt, phi.interp)[0]
    return TimeSeries(phi.grid, weighted + q[0] * hist, interp=phi.interp)


def apply_T(values: np.ndarray, interp: str, dt: float, basis: SpectralBasis, y, L: RobinVector) -> np.ndarray:
    """Boundary operator ``T`` on weighted data at every ``y``; shape ``shape(y) + (N+1,)``."""
    values = np.asarray(values, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.multiply.outer(basis.phi0(y, L), values)
    slope = basis.phi_slope(y, L)
    if np.any(slope != 0.0):
        out = out + np.multiply.outer(slope, cumulative_integral(values, dt, interp))
    if basis.K:
        coef = basis.phi_coefficients(y, L)
        out = out + coef @ memory_terms(values, interp, dt, basis)
    return out


def T_op(phi: TimeSeries, y: float, basis: SpectralBasis, L: RobinVector, K: int | None = None) -> TimeSeries:
    """``T phi(y, t; L) = Phi(y, 0; L) phi(t) + int_0^t D_t Phi(y, t-u; L) phi(u) du``.

    ``phi`` is taken as already weighted.
    """
    bs = basis if K is None else basis.truncated(K)
    vals = apply_T(phi.values, phi.interp, phi.grid.dt, bs, y, L)
    return TimeSeries(phi.grid, vals, interp=phi.interp)


# --- theta ----------------------------------------------------------------------


def theta_values(
    x: np.ndarray,
    grid: TimeGrid,
    basis: SpectralBasis,
    eta: FunctionSpec,
    source: SpaceTimeFunctionSpec | None,
    weight: WeightParams,
    n_panels: int | None = None,
) -> np.ndarray:
    """Initial-profile and source part of a layer at nodes ``x``; shape ``(len(x), N+1)``."""
    geom = basis.geometry
    al, be = geom.left, geom.right
    scale = geom.scale
    yq, wq = gauss_nodes(al, be, n_panels or default_panels(basis.K))
    t = grid.nodes
    lam = eval_weight(weight, t)

    eta_q = np.asarray(eval_fn(eta, yq), dtype=float)
    sources = []
    if source is not None:
        for X, Tf in source.terms:
            sources.append((np.asarray(eval_fn(X, yq), dtype=float), lam * np.asarray(eval_fn(Tf, t), dtype=float)))
    if not np.all(np.isfinite(eta_q)) or any(not np.all(np.isfinite(xq)) for xq, _ in sources):
        raise FloatingPointError("non-finite integrand in theta quadrature")

    out = np.zeros((x.size, t.size))
    if basis.degenerate:
        # Theta_0(alpha - x, beta - y) is separable
        ha = basis.a.c0 * (al - x) + basis.a.c1
        hb = basis.b.c0 * (be - yq) + basis.b.c1
        pref = scale / basis.gz0
        acc = np.full(t.size, np.dot(wq, hb * eta_q))
        for xq, tser in sources:
            acc = acc + np.dot(wq, hb * xq) * cumulative_integral(tser, grid.dt)
        out += pref * np.multiply.outer(ha, acc)
    if basis.K:
        mu = basis.mu
        ca = basis.a.c0 * np.sin(mu[:, None] * (al - yq)[None, :]) + basis.a.c1 * mu[:, None] * np.cos(
            mu[:, None] * (al - yq)[None, :]
        )
        cb = basis.b.c0 * np.sin(np.multiply.outer(be - x, mu)) + basis.b.c1 * mu * np.cos(np.multiply.outer(be - x, mu))
        coef = cb / (mu * basis.dprime)
        q = basis.s / geom.tau
        modal = np.exp(np.multiply.outer(q, t)) * (ca @ (wq * eta_q))[:, None]
        for xq, tser in sources:
            modal = modal + (ca @ (wq * xq))[:, None] * exp_history(q, tser, grid.dt)
        out += coef @ modal
    return -out / scale


def theta_field(
    x,
    grid: TimeGrid,
    problem: OneLayerProblem,
    basis: SpectralBasis,
    K: int | None = None,
    n_panels: int | None = None,
) -> TimeSeries:
    """The part of the solution driven by the initial profile and the source.

    ``x`` may be a scalar (values of shape ``(N+1,)``) or an array (values of
    shape ``(N+1, len(x))``).
    """
    bs = basis if K is None else basis.truncated(K)
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    geom = bs.geometry
    if np.any(xa < geom.left - 1e-12) or np.any(xa > geom.right + 1e-12):
        raise ValueError("theta_field: x outside the layer")
    block = theta_values(xa, grid, bs, problem.eta, problem.source, problem.weight, n_panels)
    vals = block[0] if np.ndim(x) == 0 else block.T
    return TimeSeries(grid, vals)


# --- full layer -----------------------------------------------------------------


def layer_field(
    x: np.ndarray,
    grid: TimeGrid,
    basis: SpectralBasis,
    left: TimeSeries,
    right: TimeSeries,
    eta: FunctionSpec,
    source: SpaceTimeFunctionSpec | None,
    weight: WeightParams,
    n_panels: int | None = None,
) -> np.ndarray:
    """Evaluate one layer given its weighted boundary data; shape ``(len(x), N+1)``.

    ``left`` is the weighted datum of the left functional ``a``, ``right`` that
    of ``b``.  Each series carries its own interpolation rule.
    """
    geom = basis.geometry
    x = np.asarray(x, dtype=float)
    dt = grid.dt
    phi = apply_T(left.values, left.interp, dt, basis, geom.right - x, basis.b)
    phi = phi - apply_T(right.values, right.interp, dt, basis, geom.left - x, basis.a)
    return phi + theta_values(x, grid, basis, eta, source, weight, n_panels)


def tail_metadata(basis: SpectralBasis, grid: TimeGrid) -> dict:
    """Truncation bound at the first positive grid time."""
    geom = basis.geometry
    ends = np.array([0.0, geom.width])
    coef = 0.0
    if basis.K:
        coef = float(
            max(np.max(np.abs(basis.phi_coefficients(ends, basis.a))), np.max(np.abs(basis.phi_coefficients(ends, basis.b))))
        )
    return {"K": basis.K, "s_next": basis.s_next, "tail_bound": basis.tail_bound(grid.dt, max(coef, 1.0))}


def solve_one_layer(
    problem: OneLayerProblem,
    x_nodes,
    grid: TimeGrid,
    K: int,
    basis: SpectralBasis | None = None,
    n_panels: int | None = None,
) -> SolutionField:
    """Series solution of a single layer sampled at ``x_nodes`` and grid times."""
    if basis is None:
        basis = find_roots(problem.a, problem.b, problem.geometry, K)
    elif basis.K != K:
        basis = basis.truncated(K)
    x = np.asarray(x_nodes, dtype=float)
    left = sample(problem.zeta, grid, problem.weight)
    right = sample(problem.xi, grid, problem.weight)
    vals = layer_field(x, grid, basis, left, right, problem.eta, problem.source, problem.weight, n_panels)
    meta = {"layers": [tail_metadata(basis, grid)], "method": "series"}
    return SolutionField([x], grid, [vals], "series", meta)


# --- unweighted reduction -----------------------------------------------------


def gamma_tilde(s_k: float, phi: TimeSeries) -> TimeSeries:
    """Unweighted memory operator ``phi + s_k int_0^t exp(s_k (t-u)) phi(u) du``.

    Coincides with :func:`gamma_op` when ``rho = 0`` and ``tau = 1``; it is
    implemented separately as a linear recursive filter.
    """
    dt = phi.grid.dt
    z = np.array([s_k * dt])
    if phi.interp == "linear":
        w1 = float(dt * phi2(z)[0])
        w0 = float(dt * phi1(z)[0]) - w1
    else:
        w1, w0 = float(dt * phi1(z)[0]), 0.0
    f = phi.values
    hist = lfilter([w1, w0], [1.0, -np.exp(s_k * dt)], f)
    # the filter starts from f[0]; the integral vanishes at t = 0
    hist = hist - w1 * f[0] * np.exp(s_k * dt) ** np.arange(f.size)
    return TimeSeries(phi.grid, f + s_k * hist, interp=phi.interp)


def reduced_solution(problem: OneLayerProblem, x_nodes, grid: TimeGrid, basis: SpectralBasis) -> np.ndarray:
    """Unweighted closed form for ``rho = 0``, ``tau = 1`` and no source.

    Written out term by term with :func:`gamma_tilde`; used as a cross-check
    of the weighted path.  Returns shape ``(len(x), N+1)``.
    """
    w = problem.weight
    if w.rho != 0.0 or w.tau != 1.0 or problem.source is not None:
        raise ValueError("reduced form needs rho = 0, tau = 1 and no source")
    geom = basis.geometry
    al, be, d = geom.left, geom.right, geom.d
    x = np.asarray(x_nodes, dtype=float)
    t = grid.nodes
    zeta = sample(problem.zeta, grid)
    xi = sample(problem.xi, grid)
    Fz = cumulative_integral(zeta.values, grid.dt)
    Fx = cumulative_integral(xi.values, grid.dt)
    phi = np.multiply.outer(basis.phi0(be - x, basis.b), zeta.values) + np.multiply.outer(basis.phi_slope(be - x, basis.b), Fz)
    phi -= np.multiply.outer(basis.phi0(al - x, basis.a), xi.values) + np.multiply.outer(basis.phi_slope(al - x, basis.a), Fx)
    yq, wq = gauss_nodes(al, be, default_panels(basis.K))
    eta_q = np.asarray(eval_fn(problem.eta, yq), dtype=float)
    phi -= (1.0 / d) * np.outer(np.array([np.dot(wq, basis.theta0(al - xv, be - yq) * eta_q) for xv in x]), np.ones_like(t))
    for k in range(basis.K):
        sk, mu, dp = basis.s[k], basis.mu[k], basis.dprime[k]
        cb = basis.b.c0 * np.sin(mu * (be - x)) + basis.b.c1 * mu * np.cos(mu * (be - x))
        ca = basis.a.c0 * np.sin(mu * (al - x)) + basis.a.c1 * mu * np.cos(mu * (al - x))
        phi += np.outer(cb / (sk * dp), gamma_tilde(sk, zeta).values)
        phi -= np.outer(ca / (sk * dp), gamma_tilde(sk, xi).values)
        cay = basis.a.c0 * np.sin(mu * (al - yq)) + basis.a.c1 * mu * np.cos(mu * (al - yq))
        # 1 / sqrt(d s_k) in reduced form is 1 / (d mu)
        phi -= np.outer(cb / (d * mu * dp) * np.dot(wq, cay * eta_q), np.exp(sk * t))
    return phi
