"""n-layer stacks: interface bookkeeping, renewal equations and assembly.

Each layer ``j`` is solved in closed form given its two boundary data.  At
an interior point ``x_j`` the data are the (weighted) interface flux

    h_j(t) = lambda(t) (nu_j phi_j + mu_j d phi_j/dx)(x_j, t),

shared by layer ``j`` (right datum) and layer ``j + 1`` (left datum).
Continuity ``phi_j = Lambda_j phi_{j+1}`` at every ``x_j`` then gives a
tridiagonal Volterra system ``d/dt (A * h) = b`` for the unknown fluxes.

Discretization
--------------
The fluxes are represented on the time grid either as continuous piecewise
linear functions (default) or as cell-wise constants, and the system is
collocated at the grid nodes.  For both representations the time
derivative of the convolution is exact in terms of samples of ``A`` and of
its running integral ``P``; for piecewise linear ``h``

    d/dt (A * h)(t_n) = E_n h_0 + sum_{i=1}^{n} W_{n-i} h_i,
    W_0 = P(dt) / dt,  W_j = (P((j+1)dt) - 2 P(j dt) + P((j-1)dt)) / dt,
    E_n = A(t_n) - (P(t_n) - P(t_{n-1})) / dt,

with ``h_0`` read off the initial profile.  The system is lower
block-triangular and is solved by forward substitution.  ``A(0)`` alone is
not used as the instantaneous part: for a well-posed interface it tends to
zero as more roots are kept (the flux to trace map is smoothing), which
makes the plain resolvent series diverge.  The resolvent series is still
available (``method="neumann"``) for small problems and reports when it
fails to converge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .funcspace import FunctionSpec, SpaceTimeFunctionSpec, TimeGrid, TimeSeries, WeightParams, eval_weight, sample
from .onelayer import SolutionField, apply_T, layer_field, tail_metadata, theta_values
from .spectral import LayerGeometry, RobinVector, SpectralBasis, find_roots, phi_kernel, phi_kernel_integral
from .transforms import cumulative_integral, exp_history, neumann_series, phi1, phi2


class StackError(ValueError):
    """Invalid stack description; ``errors`` lists every violated constraint."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)


class SingularSystemError(RuntimeError):
    """The instantaneous part of an interface system cannot be inverted."""


@dataclass(frozen=True)
class StackSpec:
    """A stack of ``n`` layers on the partition ``x_0 < x_1 < ... < x_n``.

    Parameters
    ----------
    partition : tuple of float
        Layer end points, strictly increasing.
    d : tuple of float
        Diffusivity of every layer.
    eta : tuple of FunctionSpec
        Initial profile of every layer.
    outer_left, outer_right : RobinVector
        ``(i, iota)`` at ``x_0`` and ``(ell, l)`` at ``x_n``.
    zeta, xi : FunctionSpec
        Outer boundary data (unweighted) at ``x_0`` and ``x_n``.
    ratio : tuple of float
        Continuity ratios ``Lambda_j`` (``phi_j = Lambda_j phi_{j+1}`` at ``x_j``).
    flux : tuple of RobinVector
        ``(nu_j, mu_j)`` of every layer; layer ``j`` uses its pair at both of
        its interior ends, so the flux condition at ``x_j`` reads
        ``nu_j phi_j + mu_j phi_j' = nu_{j+1} phi_{j+1} + mu_{j+1} phi_{j+1}'``.
    source : tuple of SpaceTimeFunctionSpec or None
        Source of every layer (``None`` for no source).
    weight : WeightParams
        Time weight shared by all layers.
    """

    partition: tuple[float, ...]
    d: tuple[float, ...]
    eta: tuple[FunctionSpec, ...]
    outer_left: RobinVector
    outer_right: RobinVector
    zeta: FunctionSpec
    xi: FunctionSpec
    ratio: tuple[float, ...] = ()
    flux: tuple[RobinVector, ...] = ()
    source: tuple[SpaceTimeFunctionSpec | None, ...] = ()
    weight: WeightParams = field(default_factory=WeightParams)

    def __post_init__(self) -> None:
        for name in ("partition", "d", "eta", "ratio", "flux", "source"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.source:
            object.__setattr__(self, "source", (None,) * len(self.d))
        errors = stack_errors(self)
        if errors:
            raise StackError(errors)

    @property
    def n_layers(self) -> int:
        return len(self.d)

    def geometry(self, j: int) -> LayerGeometry:
        """Geometry of layer ``j`` (0-based)."""
        return LayerGeometry(self.partition[j], self.partition[j + 1], self.d[j], self.weight.tau)

    def left_functional(self, j: int) -> RobinVector:
        return self.outer_left if j == 0 else self.flux[j]

    def right_functional(self, j: int) -> RobinVector:
        return self.outer_right if j == self.n_layers - 1 else self.flux[j]


def stack_errors(stack: StackSpec) -> list[str]:
    """Every violated structural constraint of a stack, as readable strings."""
    errors = []
    n = len(stack.d)
    if n < 1:
        return ["a stack needs at least one layer"]
    if len(stack.partition) != n + 1:
        errors.append(f"partition needs {n + 1} points for {n} layers")
    elif np.any(np.diff(stack.partition) <= 0.0):
        errors.append("partition must be strictly increasing")
    if any(not (dj > 0.0 and np.isfinite(dj)) for dj in stack.d):
        errors.append("every diffusivity must be positive")
    if len(stack.eta) != n:
        errors.append(f"need {n} initial profiles")
    if len(stack.source) != n:
        errors.append(f"need {n} source entries")
    if len(stack.ratio) != n - 1:
        errors.append(f"need {n - 1} continuity ratios")
    elif any(r == 0.0 or not np.isfinite(r) for r in stack.ratio):
        errors.append("continuity ratio must be nonzero: Lambda_j != 0")
    if n > 1 and len(stack.flux) != n:
        errors.append(f"need {n} flux coefficient pairs (nu_j, mu_j)")
    return errors


# --- bookkeeping ----------------------------------------------------------------


def layer_bases(stack: StackSpec, K: int) -> list[SpectralBasis]:
    """Roots of every layer with its own boundary functionals."""
    return [find_roots(stack.left_functional(j), stack.right_functional(j), stack.geometry(j), K) for j in range(stack.n_layers)]


def chain_boundary_data(stack: StackSpec, h: TimeSeries) -> list[tuple[TimeSeries, TimeSeries]]:
    """Weighted (left, right) data of every layer given the interface fluxes.

    ``h.values`` has shape ``(N+1, n-1)``.  Layer ``j`` receives ``h_{j-1}``
    on the left and ``h_j`` on the right; the outer data are the weighted
    ``zeta`` and ``xi``.
    """
    n = stack.n_layers
    hv = np.asarray(h.values)
    if hv.ndim == 1:
        hv = hv[:, None]
    if hv.shape[1] != n - 1 and not (n == 1 and hv.size == 0):
        raise ValueError(f"expected {n - 1} interface series, got {hv.shape[1]}")
    grid = h.grid
    flux = [TimeSeries(grid, hv[:, j], interp=h.interp) for j in range(n - 1)]
    lefts = [sample(stack.zeta, grid, stack.weight)] + flux
    rights = flux + [sample(stack.xi, grid, stack.weight)]
    return list(zip(lefts, rights))


def initial_flux(stack: StackSpec) -> np.ndarray:
    """Weighted interface fluxes at ``t = 0`` read off the initial profiles."""
    lam0 = float(eval_weight(stack.weight, 0.0))
    out = []
    for j in range(stack.n_layers - 1):
        f = stack.flux[j]
        xj = stack.partition[j + 1]
        out.append(lam0 * (f.c0 * stack.eta[j](xj) + f.c1 * stack.eta[j].derivative_at(xj)))
    return np.asarray(out, dtype=float)


def _theta_at(stack: StackSpec, basis: SpectralBasis, j: int, x: float, grid: TimeGrid) -> np.ndarray:
    return theta_values(np.array([x]), grid, basis, stack.eta[j], stack.source[j], stack.weight)[0]


# --- matrix Volterra system ---------------------------------------------------


@dataclass
class VolterraSystem:
    """Interface system ``d/dt (A * h) = b`` sampled on a grid.

    ``kernel[n]`` is ``A(n dt)`` and ``kernel_integral[n]`` is
    ``int_0^{n dt} A`` for ``n = 0..N+1`` (one step past the grid, needed by
    the product rule on the last cell).  ``h0`` is the flux at ``t = 0``.
    """

    grid: TimeGrid
    kernel: np.ndarray
    kernel_integral: np.ndarray
    b: TimeSeries
    h0: np.ndarray
    bases: list[SpectralBasis]
    interp: str = "linear"

    @property
    def dimension(self) -> int:
        return self.kernel.shape[1]

    @property
    def A0(self) -> np.ndarray:
        """``A(0)`` of the truncated series."""
        return self.kernel[0]

    @property
    def Aprime(self) -> TimeSeries:
        """Cell averages of ``dA/dt``: ``(A(t_{n+1}) - A(t_n)) / dt``."""
        return TimeSeries(self.grid, np.diff(self.kernel, axis=0) / self.grid.dt)

    def weights(self) -> tuple[np.ndarray, np.ndarray]:
        """Collocation weights ``W_j`` (history) and ``E_n`` (initial value).

        ``d/dt (A * h)(t_n) = E_n h_0 + sum_{i=1}^n W_{n-i} h_i``.
        """
        dt = self.grid.dt
        A, P = self.kernel, self.kernel_integral
        n1 = len(self.grid)
        E = np.zeros((n1,) + A.shape[1:])
        if self.interp == "constant":
            W = np.diff(A, axis=0)
            W[0] = A[1]
        elif self.interp == "linear":
            W = np.empty((n1,) + A.shape[1:])
            W[0] = P[1] / dt
            W[1:] = (P[2:] - 2.0 * P[1:-1] + P[:-2]) / dt
            E[1:] = A[1:n1] - (P[1:n1] - P[: n1 - 1]) / dt
        else:
            raise ValueError("interp must be 'linear' or 'constant'")
        return W, E

    def condition(self) -> dict[str, float]:
        W, _ = self.weights()
        return {"A0": float(np.linalg.cond(self.A0, 1)), "W0": float(np.linalg.cond(W[0], 1))}


def interface_kernel(stack: StackSpec, bases: list[SpectralBasis], t, kernel=phi_kernel) -> np.ndarray:
    """Tridiagonal kernel ``A(t)``; shape ``(len(t), n-1, n-1)``.

    ``kernel`` selects the layer kernel (``phi_kernel`` or its running
    integral ``phi_kernel_integral``).
    """
    n = stack.n_layers
    t = np.asarray(t, dtype=float)
    A = np.zeros((t.size, n - 1, n - 1))
    x = stack.partition
    for j in range(n - 1):
        bj, bn = bases[j], bases[j + 1]
        lam = stack.ratio[j]
        A[:, j, j] = -kernel(x[j] - x[j + 1], t, bj, bj.a) - lam * kernel(x[j + 2] - x[j + 1], t, bn, bn.b)
        if j + 1 < n - 1:
            A[:, j, j + 1] = lam * kernel(0.0, t, bn, bn.a)
        if j > 0:
            A[:, j, j - 1] = kernel(0.0, t, bj, bj.b)
    return A


def interface_forcing(stack: StackSpec, bases: list[SpectralBasis], grid: TimeGrid) -> np.ndarray:
    """Right-hand side ``b(t)`` of the interface system; shape ``(N+1, n-1)``."""
    n = stack.n_layers
    x = stack.partition
    b = np.zeros((len(grid), n - 1))
    for j in range(n - 1):
        b[:, j] = stack.ratio[j] * _theta_at(stack, bases[j + 1], j + 1, x[j + 1], grid) - _theta_at(
            stack, bases[j], j, x[j + 1], grid
        )
    zeta = sample(stack.zeta, grid, stack.weight)
    xi = sample(stack.xi, grid, stack.weight)
    b[:, 0] -= apply_T(zeta.values, "linear", grid.dt, bases[0], 0.0, bases[0].b)
    b[:, n - 2] -= stack.ratio[n - 2] * apply_T(xi.values, "linear", grid.dt, bases[n - 1], 0.0, bases[n - 1].a)
    return b


def build_volterra_system(
    stack: StackSpec,
    grid: TimeGrid,
    K: int,
    bases: list[SpectralBasis] | None = None,
    interp: str = "linear",
) -> VolterraSystem:
    """Assemble kernel samples and forcing of the interface system."""
    if stack.n_layers < 2:
        raise ValueError("a Volterra system needs at least two layers")
    if bases is None:
        bases = layer_bases(stack, K)
    t_ext = np.arange(len(grid) + 1) * grid.dt
    kernel = interface_kernel(stack, bases, t_ext)
    integral = interface_kernel(stack, bases, t_ext, kernel=phi_kernel_integral)
    b = TimeSeries(grid, interface_forcing(stack, bases, grid))
    return VolterraSystem(grid, kernel, integral, b, initial_flux(stack), bases, interp)


class SeriesDivergenceError(RuntimeError):
    """A resolvent series failed to converge or lost its accuracy to cancellation."""


def _check_series(res, meta: dict, raise_on_failure: bool, rel_tol: float = 1e-8) -> None:
    scale = max(1.0, float(np.max(np.abs(res.series.values))))
    meta.update(
        neumann_terms=res.n_terms,
        last_norm=res.last_norm,
        converged=res.converged,
        rounding_bound=res.rounding_bound,
    )
    if not raise_on_failure:
        return
    trace = ", ".join(f"{v:.2e}" for v in res.term_norms[-5:])
    if not res.converged:
        raise SeriesDivergenceError(f"resolvent series did not converge in {res.n_terms} terms (last norms {trace})")
    if res.rounding_bound > rel_tol * scale:
        peak = max(res.term_norms)
        raise SeriesDivergenceError(
            f"resolvent series lost accuracy to cancellation: largest term {peak:.2e}, "
            f"rounding bound {res.rounding_bound:.2e}; use method='march'"
        )


def _residual(W: np.ndarray, E: np.ndarray, h: np.ndarray, b: np.ndarray) -> float:
    res = 0.0
    for n in range(1, h.shape[0]):
        lhs = np.einsum("jab,jb->a", W[:n][::-1], h[1 : n + 1]) + E[n] @ h[0]
        res = max(res, float(np.max(np.abs(lhs - b[n]))))
    return res


def solve_interfaces(
    system: VolterraSystem,
    tol: float = 1e-12,
    max_terms: int = 200,
    method: str = "march",
    raise_on_failure: bool = True,
) -> TimeSeries:
    """Interface fluxes solving the collocated system.

    ``method="march"`` performs block forward substitution.
    ``method="neumann"`` sums the resolvent series
    ``h = C + sum_m B^{*m} * C`` with ``C = W_0^{-1} (b - E h_0)`` and
    ``B = -W_0^{-1} W_j / dt``; it terminates after at most ``N`` terms in
    exact arithmetic but is prone to cancellation on long grids.

    The returned series carries the system's interpolation rule and
    metadata with the residual of the discrete equations and the condition
    numbers.
    """
    W, E = system.weights()
    b = system.b.values
    grid = system.grid
    cond = system.condition()
    if not np.isfinite(cond["W0"]) or cond["W0"] > 1e12:
        worst = int(np.argmin(np.abs(np.diag(W[0]))))
        raise SingularSystemError(f"interface system is singular near interface {worst + 1} (cond {cond['W0']:.3g})")
    lu = scipy.linalg.lu_factor(W[0])
    m = system.dimension
    h = np.zeros((len(grid), m))
    h[0] = system.h0 if system.interp == "linear" else 0.0
    rhs = b - np.einsum("nab,b->na", E, h[0])
    meta = {"method": method, "interp": system.interp, "condition": cond}
    if method == "march":
        for n in range(1, len(grid)):
            hist = np.einsum("jab,jb->a", W[1:n][::-1], h[1:n]) if n > 1 else 0.0
            h[n] = scipy.linalg.lu_solve(lu, rhs[n] - hist)
    elif method == "neumann":
        C = np.zeros_like(h)
        C[1:] = scipy.linalg.lu_solve(lu, rhs[1:].T).T
        B = np.zeros_like(W)
        B[1:] = -np.einsum("ab,jbc->jac", scipy.linalg.lu_solve(lu, np.eye(m)), W[1:]) / grid.dt
        res = neumann_series(TimeSeries(grid, B), TimeSeries(grid, C), tol=tol, max_terms=max_terms, rule="cells")
        _check_series(res, meta, raise_on_failure)
        h[1:] = res.series.values[1:]
    else:
        raise ValueError(f"unknown method {method!r}")
    if system.interp == "constant" and len(grid) > 1:
        h[0] = h[1]
    meta["residual"] = _residual(W, E, h, b)
    return TimeSeries(grid, h, interp=system.interp, meta=meta)


def _layer_nodes(stack: StackSpec, nx) -> list[np.ndarray]:
    if isinstance(nx, (int, np.integer)):
        return [np.linspace(stack.partition[j], stack.partition[j + 1], int(nx)) for j in range(stack.n_layers)]
    return [np.asarray(v, dtype=float) for v in nx]


def interface_probe_nodes(stack: StackSpec, spacing: float | None = None) -> list[np.ndarray]:
    """Three nodes at either end of every layer, ``spacing`` apart.

    Evaluating the series there gives one-sided difference fluxes whose
    ``O(spacing**2)`` error is negligible next to the interface mismatch
    itself.  The default spacing is 1/256 of the thinnest layer.
    """
    widths = np.diff(stack.partition)
    if spacing is None:
        spacing = float(np.min(widths)) / 256.0
    if not 0.0 < spacing <= float(np.min(widths)) / 4.0:
        raise ValueError("probe spacing must be positive and at most a quarter of every layer")
    out = []
    for j in range(stack.n_layers):
        a, b = stack.partition[j], stack.partition[j + 1]
        out.append(np.array([a, a + spacing, a + 2 * spacing, b - 2 * spacing, b - spacing, b]))
    return out


def assemble_solution(
    stack: StackSpec,
    h: TimeSeries,
    grid: TimeGrid,
    K: int,
    x_nodes,
    bases: list[SpectralBasis] | None = None,
    provenance: str = "matrix",
) -> SolutionField:
    """Evaluate every layer from its chained boundary data.

    ``x_nodes`` is a node count per layer or a list of node arrays.
    """
    if bases is None:
        bases = layer_bases(stack, K)
    xs = _layer_nodes(stack, x_nodes)
    data = chain_boundary_data(stack, h)
    values = [
        layer_field(xs[j], grid, bases[j], left, right, stack.eta[j], stack.source[j], stack.weight)
        for j, (left, right) in enumerate(data)
    ]
    meta = {"layers": [tail_metadata(bs, grid) for bs in bases], "method": provenance}
    if stack.n_layers > 1:
        meta["interface_flux"] = np.asarray(h.values)
        meta.update(h.meta)
    return SolutionField(xs, grid, values, "series", meta)


def solve_stack(
    stack: StackSpec,
    grid: TimeGrid,
    K: int,
    x_nodes,
    method: str = "march",
    interp: str = "linear",
    tol: float = 1e-12,
    max_terms: int = 200,
) -> SolutionField:
    """Solve an ``n``-layer stack through the matrix interface system."""
    bases = layer_bases(stack, K)
    if stack.n_layers == 1:
        h = TimeSeries(grid, np.zeros((len(grid), 0)), interp="linear")
    else:
        system = build_volterra_system(stack, grid, K, bases, interp)
        h = solve_interfaces(system, tol=tol, max_terms=max_terms, method=method)
    return assemble_solution(stack, h, grid, K, x_nodes, bases)


# --- two layers: scalar renewal equation -------------------------------------


class SingularRenewalError(RuntimeError):
    """The instantaneous coefficient of the two-layer renewal equation vanishes."""


@dataclass
class RenewalEquation:
    """``g + sum_k a_k Gamma1_k g + sum_k b_k Gamma2_k g + kappa int g = c``.

    ``g`` is the weighted interface flux, ``Gamma1_k``/``Gamma2_k`` are the
    memory operators of the left and right layer and ``g0`` is ``g(0)``.
    """

    a: np.ndarray
    b: np.ndarray
    q1: np.ndarray
    q2: np.ndarray
    kappa: float
    c: TimeSeries
    norm: float
    g0: float


def renewal_equation(stack: StackSpec, grid: TimeGrid, bases: list[SpectralBasis]) -> RenewalEquation:
    """Coefficients of the two-layer renewal equation for the interface flux."""
    if stack.n_layers != 2:
        raise ValueError("the renewal equation is for two-layer stacks")
    b1, b2 = bases
    x0, x1, x2 = stack.partition
    lam = stack.ratio[0]
    y1, y2 = x0 - x1, x2 - x1
    norm = float(lam * b2.phi0(y2, b2.b) + b1.phi0(y1, b1.a))
    if abs(norm) < 1e-300:
        raise SingularRenewalError("renewal normalization vanishes")
    a_k = b1.phi_coefficients(y1, b1.a) / norm
    b_k = lam * b2.phi_coefficients(y2, b2.b) / norm
    kappa = float(b1.phi_slope(y1, b1.a) + lam * b2.phi_slope(y2, b2.b)) / norm
    # continuity phi_1(x1) = Lambda phi_2(x1) with the known data moved right
    zeta = sample(stack.zeta, grid, stack.weight)
    xi = sample(stack.xi, grid, stack.weight)
    rhs = apply_T(zeta.values, "linear", grid.dt, b1, 0.0, b1.b)
    rhs = rhs + lam * apply_T(xi.values, "linear", grid.dt, b2, 0.0, b2.a)
    rhs = rhs + _theta_at(stack, b1, 0, x1, grid) - lam * _theta_at(stack, b2, 1, x1, grid)
    return RenewalEquation(
        a_k, b_k, b1.s / b1.geometry.tau, b2.s / b2.geometry.tau, kappa, TimeSeries(grid, rhs / norm), norm,
        float(initial_flux(stack)[0]),
    )


def solve_renewal(
    eq: RenewalEquation,
    method: str = "march",
    interp: str = "linear",
    tol: float = 1e-12,
    max_terms: int = 200,
) -> TimeSeries:
    """Solve the renewal equation for a piecewise linear or cell-wise constant flux.

    The equation is collocated at the grid nodes; the memory integrals are
    advanced recursively, one exponential per root.
    """
    grid = eq.c.grid
    dt = grid.dt
    coef = np.concatenate([eq.a, eq.b])
    q = np.concatenate([eq.q1, eq.q2])
    z = q * dt
    decay = np.exp(z)
    if interp == "linear":
        w1 = dt * phi2(z)
        w0 = dt * phi1(z) - w1
        k1, k0 = 0.5 * dt, 0.5 * dt
    elif interp == "constant":
        w1, w0 = dt * phi1(z), np.zeros_like(z)
        k1, k0 = dt, 0.0
    else:
        raise ValueError("interp must be 'linear' or 'constant'")
    lead = 1.0 + float(np.dot(coef, 1.0 + q * w1)) + eq.kappa * k1
    if abs(lead) < 1e-12:
        raise SingularRenewalError(f"instantaneous coefficient {lead:.3g} of the renewal equation vanishes")
    c = eq.c.values
    g = np.zeros(len(grid))
    g[0] = eq.g0 if interp == "linear" else 0.0
    meta: dict = {"method": method, "interp": interp, "lead": lead}
    if method == "march":
        hist = np.zeros(q.size)
        total = 0.0
        for n in range(1, len(grid)):
            base = decay * hist + w0 * g[n - 1]
            known = float(np.dot(coef, q * base)) + eq.kappa * (total + k0 * g[n - 1])
            g[n] = (c[n] - known) / lead
            hist = base + w1 * g[n]
            total += k0 * g[n - 1] + k1 * g[n]
    elif method == "neumann":
        # impulse response of the discrete operator gives its convolution weights
        n1 = len(grid)
        unit = np.zeros(n1 + 1)
        unit[1] = 1.0
        Wj = _renewal_response(coef, q, eq.kappa, unit, interp, dt)[1:]
        E = _renewal_response(coef, q, eq.kappa, np.eye(1, n1)[0], interp, dt) if interp == "linear" else np.zeros(n1)
        B = np.zeros(n1)
        B[1:] = -Wj[1:] / (lead * dt)
        C = (c - E * g[0]) / lead
        C[0] = 0.0
        res = neumann_series(TimeSeries(grid, B), TimeSeries(grid, C), tol=tol, max_terms=max_terms, rule="cells")
        _check_series(res, meta, True)
        g[1:] = res.series.values[1:]
    else:
        raise ValueError(f"unknown method {method!r}")
    if interp == "constant" and len(grid) > 1:
        g[0] = g[1]
    return TimeSeries(grid, g, interp=interp, meta=meta)


def _renewal_response(coef, q, kappa, g, interp, dt) -> np.ndarray:
    """Left-hand side of the renewal equation applied to samples ``g``."""
    gam = g[None, :] + q[:, None] * exp_history(q, g, dt, interp)
    return g + coef @ gam + kappa * cumulative_integral(g, dt, interp)


def solve_two_layer(
    stack: StackSpec,
    grid: TimeGrid,
    K: int,
    x_nodes,
    method: str = "march",
    interp: str = "linear",
    bases: list[SpectralBasis] | None = None,
) -> SolutionField:
    """Two-layer solve through the scalar renewal equation for the interface flux."""
    if bases is None:
        bases = layer_bases(stack, K)
    eq = renewal_equation(stack, grid, bases)
    g = solve_renewal(eq, method=method, interp=interp)
    h = TimeSeries(grid, g.values[:, None], interp=interp, meta=dict(g.meta))
    return assemble_solution(stack, h, grid, K, x_nodes, bases, provenance="renewal")
