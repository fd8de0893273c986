"""Crank-Nicolson reference solver for layered stacks, plus field diagnostics.

Every layer carries its own uniform grid including both end points, so an
interior point ``x_j`` appears twice (once per side).  The two copies are
tied by two algebraic rows: continuity ``phi_j = Lambda_j phi_{j+1}`` and
the flux balance with one-sided second order differences.  Outer Robin
conditions use a ghost node eliminated through the boundary condition
(a Dirichlet row when the derivative coefficient is zero).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse
from scipy.linalg import solve_banded

from .funcspace import TimeGrid, eval_fn, eval_weight
from .multilayer import StackSpec
from .onelayer import SolutionField

LOWER, UPPER = 2, 3


@dataclass(frozen=True)
class FdConfig:
    """Resolution of the reference solver.

    ``nodes`` is the node count per layer (a single int applies to all
    layers); ``dt`` must divide the output grid step (``None`` uses it);
    ``theta`` is the implicitness (0.5 Crank-Nicolson, 1 backward Euler).
    """

    nodes: int | tuple[int, ...] = 129
    dt: float | None = None
    theta: float = 0.5

    def __post_init__(self) -> None:
        counts = (self.nodes,) if isinstance(self.nodes, int) else tuple(self.nodes)
        if any(int(c) != c or c < 8 for c in counts):
            raise ValueError("need at least 8 nodes per layer")
        if self.dt is not None and not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if not 0.5 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0.5, 1]")

    def node_counts(self, n_layers: int) -> list[int]:
        if isinstance(self.nodes, int):
            return [self.nodes] * n_layers
        if len(self.nodes) != n_layers:
            raise ValueError(f"need {n_layers} node counts")
        return [int(c) for c in self.nodes]


def _substeps(grid: TimeGrid, dt: float | None) -> int:
    if dt is None:
        return 1
    ratio = grid.dt / dt
    m = int(round(ratio))
    if m < 1 or abs(ratio - m) > 1e-9 * ratio:
        raise ValueError("the reference time step must divide the output step")
    return m


def solve_fd(stack: StackSpec, cfg: FdConfig, grid: TimeGrid) -> SolutionField:
    """Integrate the stack with the theta scheme and sample it on ``grid``."""
    n = stack.n_layers
    counts = cfg.node_counts(n)
    xs = [np.linspace(stack.partition[j], stack.partition[j + 1], counts[j]) for j in range(n)]
    offs = np.concatenate([[0], np.cumsum(counts)])
    size = int(offs[-1])
    hs = [stack.partition[j + 1] - stack.partition[j] for j in range(n)]
    dxs = [h / (c - 1) for h, c in zip(hs, counts)]

    L = scipy.sparse.lil_matrix((size, size))  # spatial operator on PDE rows
    alg = scipy.sparse.lil_matrix((size, size))  # algebraic rows
    pde = np.zeros(size, dtype=bool)
    bc_left = np.zeros(size)  # coefficient multiplying zeta-tilde(t)
    bc_right = np.zeros(size)
    alg_left = np.zeros(size)
    alg_right = np.zeros(size)

    for j in range(n):
        o, c, dx, dj = offs[j], counts[j], dxs[j], stack.d[j]
        k = dj / dx**2
        for i in range(1, c - 1):
            r = o + i
            pde[r] = True
            L[r, r - 1] = k
            L[r, r] = -2.0 * k
            L[r, r + 1] = k
    ia, ib = stack.outer_left.c0, stack.outer_left.c1
    r = 0
    if ib != 0.0:
        k = stack.d[0] / dxs[0] ** 2
        pde[r] = True
        L[r, 0] = -2.0 * k + 2.0 * stack.d[0] * ia / (ib * dxs[0])
        L[r, 1] = 2.0 * k
        bc_left[r] = -2.0 * stack.d[0] / (ib * dxs[0])
    else:
        alg[r, 0] = ia
        alg_left[r] = 1.0
    la, lb = stack.outer_right.c0, stack.outer_right.c1
    r = size - 1
    if lb != 0.0:
        k = stack.d[-1] / dxs[-1] ** 2
        pde[r] = True
        L[r, r] = -2.0 * k - 2.0 * stack.d[-1] * la / (lb * dxs[-1])
        L[r, r - 1] = 2.0 * k
        bc_right[r] = 2.0 * stack.d[-1] / (lb * dxs[-1])
    else:
        alg[r, r] = la
        alg_right[r] = 1.0
    for j in range(n - 1):
        p = offs[j + 1] - 1
        fl, fr = stack.flux[j], stack.flux[j + 1]
        dl, dr = dxs[j], dxs[j + 1]
        alg[p, p] = fl.c0 + 3.0 * fl.c1 / (2.0 * dl)
        alg[p, p - 1] = -4.0 * fl.c1 / (2.0 * dl)
        alg[p, p - 2] = fl.c1 / (2.0 * dl)
        alg[p, p + 1] = -fr.c0 + 3.0 * fr.c1 / (2.0 * dr)
        alg[p, p + 2] = -4.0 * fr.c1 / (2.0 * dr)
        alg[p, p + 3] = fr.c1 / (2.0 * dr)
        alg[p + 1, p] = 1.0
        alg[p + 1, p + 1] = -stack.ratio[j]

    m = _substeps(grid, cfg.dt)
    dt = grid.dt / m
    th = cfg.theta
    L = L.tocsr()
    eye_pde = scipy.sparse.diags(pde.astype(float))
    lhs = (eye_pde - th * dt * L + alg.tocsr()).toarray()
    explicit = (eye_pde + (1.0 - th) * dt * L).tocsr()
    ab = np.zeros((LOWER + UPPER + 1, size))
    for u in range(-LOWER, UPPER + 1):
        diag = np.diagonal(lhs, offset=u)
        if u >= 0:
            ab[UPPER - u, u:] = diag
        else:
            ab[UPPER - u, : size + u] = diag
    if np.count_nonzero(lhs) != sum(np.count_nonzero(np.diagonal(lhs, u)) for u in range(-LOWER, UPPER + 1)):
        raise RuntimeError("reference matrix exceeds its band")

    src_space = []
    for j in range(n):
        if stack.source[j] is None:
            continue
        sl = slice(offs[j], offs[j + 1])
        for X, T in stack.source[j].terms:
            mask = np.zeros(size)
            mask[sl] = np.asarray(eval_fn(X, xs[j]), dtype=float)
            src_space.append((mask * pde, T))

    def boundary(t: float) -> tuple[float, float]:
        lam = float(eval_weight(stack.weight, t))
        return lam * float(eval_fn(stack.zeta, t)), lam * float(eval_fn(stack.xi, t))

    phi = np.concatenate([np.asarray(eval_fn(stack.eta[j], xs[j]), dtype=float) for j in range(n)])
    out = np.zeros((size, len(grid)))
    out[:, 0] = phi
    t = 0.0
    gz0, gx0 = boundary(0.0)
    for step in range(grid.n_steps * m):
        t1 = (step + 1) * dt
        gz1, gx1 = boundary(t1)
        rhs = explicit @ phi
        rhs += dt * (th * gz1 + (1.0 - th) * gz0) * bc_left + dt * (th * gx1 + (1.0 - th) * gx0) * bc_right
        rhs += gz1 * alg_left + gx1 * alg_right
        if src_space:
            tm = t + 0.5 * dt
            lam = float(eval_weight(stack.weight, tm))
            for mask, T in src_space:
                rhs += dt * lam * float(eval_fn(T, tm)) * mask
        phi = solve_banded((LOWER, UPPER), ab, rhs, check_finite=False)
        t, gz0, gx0 = t1, gz1, gx1
        if (step + 1) % m == 0:
            out[:, (step + 1) // m] = phi
    values = [out[offs[j] : offs[j + 1]] for j in range(n)]
    meta = {"nodes": counts, "dt": dt, "theta": th, "method": "finite-difference"}
    return SolutionField(xs, grid, values, "finite-difference", meta)


# --- diagnostics ----------------------------------------------------------------


def compare_fields(field: SolutionField, reference: SolutionField) -> dict:
    """Relative L2 and max errors of ``field`` against ``reference``.

    The reference is interpolated linearly in ``x`` onto the field's nodes;
    both must share the time grid.
    """
    if len(field.grid) != len(reference.grid) or field.grid.t_end != reference.grid.t_end:
        raise ValueError("fields must share a time grid")
    per_layer = []
    num = den = 0.0
    worst = 0.0
    for xf, vf, xr, vr in zip(field.x, field.values, reference.x, reference.values):
        ref = np.empty_like(vf)
        for n in range(vf.shape[1]):
            ref[:, n] = np.interp(xf, xr, vr[:, n])
        diff = vf - ref
        ln, ld = float(np.sum(diff**2)), float(np.sum(ref**2))
        num, den = num + ln, den + ld
        mx = float(np.max(np.abs(diff)))
        worst = max(worst, mx)
        per_layer.append({"rel_l2": float(np.sqrt(ln / ld)) if ld > 0 else float(np.sqrt(ln)), "max_abs": mx})
    rel = float(np.sqrt(num / den)) if den > 0 else float(np.sqrt(num))
    return {"rel_l2": rel, "max_abs": worst, "layers": per_layer}


def _one_sided(v: np.ndarray, dx: float, side: str) -> np.ndarray:
    if side == "right":
        return (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dx)
    return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)


def interface_residuals(field: SolutionField, stack: StackSpec) -> list[dict]:
    """Continuity and flux mismatch at every interior point, max over ``t > 0``.

    The initial profile need not satisfy the interface conditions, so the
    first time column is left out.
    """
    out = []
    for j in range(stack.n_layers - 1):
        vl, vr = field.values[j], field.values[j + 1]
        xl, xr = field.x[j], field.x[j + 1]
        cont = vl[-1] - stack.ratio[j] * vr[0]
        fl, fr = stack.flux[j], stack.flux[j + 1]
        dl = _one_sided(vl, xl[-1] - xl[-2], "right")
        dr = _one_sided(vr, xr[1] - xr[0], "left")
        flux = fl.c0 * vl[-1] + fl.c1 * dl - fr.c0 * vr[0] - fr.c1 * dr
        out.append(
            {
                "interface": j + 1,
                "continuity": float(np.max(np.abs(cont[1:]))) if cont.size > 1 else 0.0,
                "flux": float(np.max(np.abs(flux[1:]))) if flux.size > 1 else 0.0,
            }
        )
    return out


def pde_residual(field: SolutionField, stack: StackSpec) -> list[float]:
    """Max of ``|phi_t - d phi_xx - lambda r|`` at interior nodes and times.

    Fourth-order central differences in ``x`` and second-order central
    differences in ``t``; layers with fewer than five nodes are skipped.
    """
    t = field.grid.nodes
    dt = field.grid.dt
    lam = eval_weight(stack.weight, t[1:-1])
    res = []
    for j, (x, v) in enumerate(zip(field.x, field.values)):
        if x.size < 5 or t.size < 3:
            res.append(0.0)
            continue
        dx = x[1] - x[0]
        vt = (v[2:-2, 2:] - v[2:-2, :-2]) / (2.0 * dt)
        vxx = (-v[4:, 1:-1] + 16 * v[3:-1, 1:-1] - 30 * v[2:-2, 1:-1] + 16 * v[1:-3, 1:-1] - v[:-4, 1:-1]) / (12 * dx**2)
        r = vt - stack.d[j] * vxx
        if stack.source[j] is not None:
            r = r - stack.source[j](x[2:-2], t[1:-1]) * lam[None, :]
        res.append(float(np.max(np.abs(r))))
    return res
