"""Three-layer stack against the finite-difference reference.

Solves the acceptance case (distinct diffusivities, Robin outer data, jump
ratios and a weighted source), then reports the relative L2 error per layer,
the interface residuals at probe nodes and the truncation tail bound for a
range of K.
"""

import argparse
import time

import numpy as np

from layerdiff import FdConfig, FunctionSpec, SpaceTimeFunctionSpec, StackSpec, TimeGrid, WeightParams
from layerdiff.fdoracle import compare_fields, interface_residuals, solve_fd
from layerdiff.multilayer import assemble_solution, build_volterra_system, interface_probe_nodes, layer_bases, solve_interfaces
from layerdiff.onelayer import tail_metadata
from layerdiff.spectral import RobinVector


def stack() -> StackSpec:
    src = SpaceTimeFunctionSpec.product(FunctionSpec.sinusoid(1.0, np.pi), FunctionSpec.constant(1.0))
    return StackSpec(
        partition=(0.0, 0.3, 0.7, 1.0),
        d=(1.0, 0.4, 2.0),
        eta=(FunctionSpec.constant(0.0),) * 3,
        outer_left=RobinVector(1.0, -0.5),
        outer_right=RobinVector(2.0, 1.0),
        zeta=FunctionSpec.sinusoid(1.0, 5.0),
        xi=FunctionSpec.polynomial([0.0, 1.0]),
        ratio=(2.0, 0.5),
        flux=(RobinVector(0.3, 1.0), RobinVector(0.0, 2.0), RobinVector(0.5, 1.0)),
        source=(src,) * 3,
        weight=WeightParams(1.0, 1, 1.0),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--nodes", type=int, default=257, help="reference nodes per layer")
    args = parser.parse_args()
    st = stack()
    grid = TimeGrid(0.5, args.steps)
    t0 = time.perf_counter()
    ref = solve_fd(st, FdConfig(nodes=args.nodes, dt=grid.dt / 10), grid)
    print(f"reference: {time.perf_counter() - t0:.2f} s")

    print("K    rel_l2     layers                            interface  tail_bound  seconds")
    for K in (2, 4, 8, 16, 32, 64, 128):
        t0 = time.perf_counter()
        bases = layer_bases(st, K)
        h = solve_interfaces(build_volterra_system(st, grid, K, bases))
        field = assemble_solution(st, h, grid, K, 33, bases)
        elapsed = time.perf_counter() - t0
        cmp = compare_fields(field, ref)
        probe = assemble_solution(st, h, grid, K, interface_probe_nodes(st), bases)
        res = max(max(r["continuity"], r["flux"]) for r in interface_residuals(probe, st)) / field.sup_norm()
        tail = max(tail_metadata(b, grid)["tail_bound"] for b in bases)
        layers = " ".join(f"{lay['rel_l2']:.2e}" for lay in cmp["layers"])
        print(f"{K:<4} {cmp['rel_l2']:.3e}  {layers}  {res:.2e}   {tail:.2e}    {elapsed:.2f}")


if __name__ == "__main__":
    main()
