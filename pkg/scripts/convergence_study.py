"""Convergence of the series solver in K and in the time step.

Uses the weighted one-layer Robin case with initial data compatible with the
boundary conditions, against a fine finite-difference reference.  Prints two
tables: error against truncation K at a fixed grid, and error against the
number of time steps at fixed K (piecewise linear data gives order two).
"""

import argparse


from layerdiff import FdConfig, FunctionSpec, SpaceTimeFunctionSpec, StackSpec, TimeGrid, WeightParams, solve_stack
from layerdiff.fdoracle import compare_fields, solve_fd
from layerdiff.spectral import RobinVector


def robin_stack() -> StackSpec:
    src = SpaceTimeFunctionSpec.product(FunctionSpec.polynomial([1.0, -1.0]), FunctionSpec.exponential(1.0, -2.0))
    return StackSpec(
        partition=(0.0, 1.0),
        d=(1.0,),
        eta=(FunctionSpec.polynomial([0.1, 0.2, -0.075]),),
        outer_left=RobinVector(1.0, -0.5),
        outer_right=RobinVector(2.0, 1.0),
        zeta=FunctionSpec.sinusoid(1.0, 5.0),
        xi=FunctionSpec.exponential(0.5, -1.0),
        ratio=(),
        flux=(RobinVector(0.0, 1.0),),
        source=(src,),
        weight=WeightParams(1.0, 1, 1.0),
    )


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--t-end", type=float, default=0.5)
    parser.add_argument("--nodes", type=int, default=513, help="reference nodes")
    args = parser.parse_args()
    stack = robin_stack()

    grid = TimeGrid(args.t_end, 400)
    ref = solve_fd(stack, FdConfig(nodes=args.nodes, dt=grid.dt / 4), grid)
    print("K      rel_l2")
    for K in (2, 4, 8, 16, 32, 64):
        err = compare_fields(solve_stack(stack, grid, K, 33), ref)["rel_l2"]
        print(f"{K:<6} {err:.3e}")

    print("\nsteps  max_abs    ratio")
    prev = None
    for n in (25, 50, 100, 200, 400):
        g = TimeGrid(args.t_end, n)
        fine = solve_fd(stack, FdConfig(nodes=args.nodes, dt=g.dt / (1600 // n)), g)
        err = compare_fields(solve_stack(stack, g, 64, 33), fine)["max_abs"]
        ratio = f"{prev / err:.2f}" if prev else ""
        print(f"{n:<6} {err:.3e}  {ratio}")
        prev = err


if __name__ == "__main__":
    main()
