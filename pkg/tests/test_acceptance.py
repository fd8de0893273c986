"""The ten acceptance criteria, each at its stated tolerance and time budget.

Every test appends one PASS/FAIL line to ``RESULTS``; the lines are printed
in the terminal summary and when this file is run as a script.
"""

import math
import time

import numpy as np

from cases import (
    CATALOG,
    DIRICHLET,
    NEUMANN,
    PI,
    S_TAU,
    SIN_PI,
    convolution_fn,
    generic_pair,
    merged_exact,
    merged_pair,
    one_layer_stack,
    three_layer,
    unit_layer,
)
from layerdiff.fdoracle import FdConfig, compare_fields, interface_residuals, solve_fd
from layerdiff.funcspace import FunctionSpec, SpaceTimeFunctionSpec, TimeGrid, TimeSeries, WeightParams
from layerdiff.multilayer import (
    assemble_solution,
    build_volterra_system,
    interface_probe_nodes,
    layer_bases,
    renewal_equation,
    solve_interfaces,
    solve_renewal,
    solve_stack,
)
from layerdiff.onelayer import gamma_op, gamma_tilde, reduced_solution, solve_one_layer
from layerdiff.spectral import LayerGeometry, RobinVector, SpectralError, delta, find_roots, kernel_C, psi
from layerdiff.transforms import TransformQuery, natural_transform

RESULTS: list[str] = []


def check(number, title, value, limit, elapsed, budget, comparison="<="):
    ok_value = value <= limit if comparison == "<=" else limit[0] <= value <= limit[1]
    ok = bool(ok_value and elapsed < budget)
    bound = f"{limit:.1e}" if comparison == "<=" else f"[{limit[0]}, {limit[1]}]"
    RESULTS.append(
        f"{number:>2}. {'PASS' if ok else 'FAIL'}  {title:<38} {value:.3e} vs {bound}  ({elapsed:.2f} s < {budget:g} s)"
    )
    assert ok_value, f"{title}: {value:.3e} outside {bound}"
    assert elapsed < budget, f"{title}: {elapsed:.1f} s over the {budget:g} s budget"


def rel_sup(a, b):
    return float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def rel_l2(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b**2)))


# --- 1 ---------------------------------------------------------------------------


def test_transform_rules():
    t0 = time.perf_counter()
    worst = 0.0
    names = list(CATALOG)
    for i, name in enumerate(names):
        f, g = CATALOG[name], CATALOG[names[(i + 1) % len(names)]]
        conv = convolution_fn(f, g)
        for s, tau in S_TAU:
            q = TransformQuery(s, WeightParams(tau=tau))
            lhs = natural_transform(f.derivative_at, q)
            nf = natural_transform(f, q)
            rhs = (s / tau) * nf - float(f(0.0)) / tau
            # the rule is exact cancellation for constants, so measure against its terms
            worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(s / tau * nf), abs(float(f(0.0)) / tau)))
            lhs = tau * natural_transform(f, q, n_panels=512) * natural_transform(g, q, n_panels=512)
            rhs = natural_transform(conv, q, n_panels=512)
            worst = max(worst, abs(lhs - rhs) / abs(rhs))
    check(1, "derivative and convolution rules", worst, 1e-6, time.perf_counter() - t0, 10)


# --- 2 ---------------------------------------------------------------------------


def sinh_like(s, geom, z):
    w = math.sqrt(abs(s) / geom.scale)
    return math.sinh(w * z) if s > 0 else math.sin(w * z)


def magnitude(L, w, z):
    # size of the intermediate terms of psi and of <L, C(z)>
    return (abs(L.c0) + abs(L.c1) * w) * (1 + w) * math.cosh(w * abs(z))


def test_characteristic_identities():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    worst = worst_roots = 0.0
    draws = 0
    while draws < 100:
        left = rng.uniform(-1, 1)
        geom = LayerGeometry(left, left + rng.uniform(0.3, 2.0), rng.uniform(0.2, 3.0), rng.uniform(0.5, 2.0))
        a = RobinVector(*rng.uniform(-2, 2, 2))
        b = RobinVector(*rng.uniform(-2, 2, 2))
        s = rng.uniform(-50, 50)
        x, y = rng.uniform(-2, 2, 2)
        try:
            bs = find_roots(a, b, geom, 6)
        except SpectralError:
            continue  # growing modes: no real spectrum to test against
        draws += 1
        al, be = geom.left, geom.right
        w = math.sqrt(abs(s) / geom.scale)
        # shifted kernel
        res = abs(psi(x, y, s, geom, a) - a.dot(kernel_C(y - x, s, geom)))
        worst = max(worst, res / (magnitude(a, w, x) * math.cosh(w * abs(y))))
        # characteristic identity
        lhs = delta(s, a, b, geom) * sinh_like(s, geom, x - y)
        rhs = -psi(x, al, s, geom, a) * b.dot(kernel_C(be - y, s, geom)) + a.dot(kernel_C(al - y, s, geom)) * psi(
            x, be, s, geom, b
        )
        scale = magnitude(a, w, x) * magnitude(a, w, al) * magnitude(b, w, be - y) + magnitude(
            a, w, al - y
        ) * magnitude(b, w, x) * magnitude(b, w, be)
        worst = max(worst, abs(lhs - rhs) / scale)
        # the two products coincide at the roots
        for sk in bs.s:
            wk = math.sqrt(abs(sk) / geom.scale)
            t1 = psi(x, al, sk, geom, a) * b.dot(kernel_C(be - y, sk, geom))
            t2 = a.dot(kernel_C(al - y, sk, geom)) * psi(x, be, sk, geom, b)
            worst_roots = max(worst_roots, abs(t1 - t2) / ((abs(a.c0) + abs(a.c1) * wk) * (abs(b.c0) + abs(b.c1) * wk)))
    elapsed = time.perf_counter() - t0
    check(2, "identities at random draws", worst, 1e-10, elapsed, 5)
    check(2, "identities at the roots", worst_roots, 1e-8, elapsed, 5)


# --- 3 ---------------------------------------------------------------------------


def test_closed_form_roots():
    t0 = time.perf_counter()
    unit = LayerGeometry(0.0, 1.0, 1.0, 1.0)
    k = np.arange(1, 21)
    cases = [
        (DIRICHLET, DIRICHLET, -((k * PI) ** 2)),
        (NEUMANN, NEUMANN, -((k * PI) ** 2)),
        (DIRICHLET, NEUMANN, -(((2 * k - 1) * PI / 2) ** 2)),
    ]
    worst = max(float(np.max(np.abs(find_roots(a, b, unit, 20).s - exact) / np.abs(exact))) for a, b, exact in cases)
    check(3, "unit-layer roots, k <= 20", worst, 1e-10, time.perf_counter() - t0, 1)


# --- 4, 5 ------------------------------------------------------------------------


def test_one_layer_closed_form():
    t0 = time.perf_counter()
    x, g = np.linspace(0.0, 1.0, 65), TimeGrid(1.0, 100)
    field = solve_one_layer(unit_layer(eta=SIN_PI), x, g, 64).values[0]
    err = float(np.max(np.abs(field - np.multiply.outer(np.sin(PI * x), np.exp(-PI**2 * g.nodes)))))
    check(4, "sine mode on 65 x 101 grid", err, 1e-6, time.perf_counter() - t0, 30)


def test_duhamel_source():
    t0 = time.perf_counter()
    x, g = np.linspace(0.0, 1.0, 65), TimeGrid(1.0, 100)
    src = SpaceTimeFunctionSpec.product(SIN_PI, FunctionSpec.constant(1.0))
    field = solve_one_layer(unit_layer(source=src), x, g, 64).values[0]
    exact = np.multiply.outer(np.sin(PI * x), (1.0 - np.exp(-PI**2 * g.nodes)) / PI**2)
    check(5, "constant source from rest", float(np.max(np.abs(field - exact))), 1e-5, time.perf_counter() - t0, 30)


# --- 6, 7 ------------------------------------------------------------------------


def test_merged_domain():
    t0 = time.perf_counter()
    stack = merged_pair()
    g = TimeGrid(0.5, 100)
    x = [np.linspace(0.0, 1.0, 33), np.linspace(1.0, 2.0, 33)]
    got = np.vstack(solve_stack(stack, g, 64, x).values)
    exact = np.vstack([merged_exact(xj, g.nodes) for xj in x])
    check(6, "identical layers vs merged layer", rel_l2(got, exact), 1e-4, time.perf_counter() - t0, 60)


def test_renewal_matches_matrix_system():
    t0 = time.perf_counter()
    stack = generic_pair()
    g = TimeGrid(0.5, 200)
    bases = layer_bases(stack, 64)
    scalar = solve_renewal(renewal_equation(stack, g, bases)).values
    matrix = solve_interfaces(build_volterra_system(stack, g, 64, bases)).values[:, 0]
    check(7, "two-layer renewal vs matrix system", rel_sup(scalar, matrix), 1e-6, time.perf_counter() - t0, 60)


# --- 8 ---------------------------------------------------------------------------


def test_three_layer_against_reference():
    t0 = time.perf_counter()
    stack = three_layer()
    g = TimeGrid(0.5, 200)
    bases = layer_bases(stack, 64)
    h = solve_interfaces(build_volterra_system(stack, g, 64, bases))
    field = assemble_solution(stack, h, g, 64, 33, bases)
    ref = solve_fd(stack, FdConfig(nodes=257, dt=2.5e-4), g)
    err = compare_fields(field, ref)["rel_l2"]
    probe = assemble_solution(stack, h, g, 64, interface_probe_nodes(stack), bases)
    sup = max(field.sup_norm(), probe.sup_norm())
    res = max(max(r["continuity"], r["flux"]) for r in interface_residuals(probe, stack)) / sup
    elapsed = time.perf_counter() - t0
    check(8, "three layers vs finite differences", err, 5e-3, elapsed, 300)
    check(8, "interface residual / sup norm", res, 1e-3, elapsed, 300)


# --- 9 ---------------------------------------------------------------------------


def test_unweighted_reduction():
    t0 = time.perf_counter()
    a, b = RobinVector(1.0, -0.5), RobinVector(2.0, 1.0)
    basis = find_roots(a, b, LayerGeometry(0.0, 1.0, 1.0, 1.0), 64)
    rng = np.random.default_rng(7)
    worst = 0.0
    for interp in ("linear", "constant"):
        g = TimeGrid(0.5, 200)
        data = TimeSeries(g, rng.uniform(-3, 3, 201), interp=interp)
        for k in range(1, 65):
            lhs = gamma_op(k, data, basis, WeightParams()).values
            worst = max(worst, float(np.max(np.abs(lhs - gamma_tilde(basis.s[k - 1], data).values))) / 3.0)
    p = unit_layer(
        a=a,
        b=b,
        eta=FunctionSpec.polynomial([0.1, 0.2, -0.075]),
        zeta=FunctionSpec.sinusoid(1.0, 5.0),
        xi=FunctionSpec.exponential(0.5, -1.0),
    )
    x, g = np.linspace(0.0, 1.0, 33), TimeGrid(0.5, 100)
    full = solve_one_layer(p, x, g, 64, basis=basis).values[0]
    worst = max(worst, rel_sup(reduced_solution(p, x, g, basis), full))
    check(9, "weighted path at rho = 0, tau = 1", worst, 1e-10, time.perf_counter() - t0, 5)


# --- 10 --------------------------------------------------------------------------


def test_reference_solver_order():
    t0 = time.perf_counter()
    stack = one_layer_stack(unit_layer(eta=SIN_PI))
    g = TimeGrid(0.1, 10)
    errs = []
    for nodes, sub in [(17, 1), (33, 2), (65, 4), (129, 8)]:
        f = solve_fd(stack, FdConfig(nodes=nodes, dt=g.dt / sub), g)
        exact = np.multiply.outer(np.sin(PI * f.x[0]), np.exp(-PI**2 * g.nodes))
        errs.append(float(np.max(np.abs(f.values[0] - exact))))
    ratios = [coarse / fine for coarse, fine in zip(errs, errs[1:])]
    ratio = max(ratios, key=lambda r: abs(r - 4.0))
    check(10, "halving dx and dt, error ratio", ratio, (3.4, 4.6), time.perf_counter() - t0, 60, "in")


if __name__ == "__main__":
    for name, fn in list(globals().items()):
        if name.startswith("test_"):
            try:
                fn()
            except AssertionError:
                pass
    print("\n".join(RESULTS))
