"""Discrete inf-sup constants across uniform refinements.

Example:
    python scripts/run_infsup.py --problem potential --levels 3
"""

import argparse

from dpgfem.fespace import SpaceLayout, build_dofmap
from dpgfem.manufactured import ALL_NEUMANN, POTENTIAL_PARTITION, UNIT_SQUARE
from dpgfem.mesh import BoundaryPartition, build_rect_mesh, classify_boundary
from dpgfem.problems import ConcentrationProblem, PotentialProblem
from dpgfem.solver import active_facets
from dpgfem.verify import infsup_constant


def default_problem(kind: str):
    if kind == "concentration":
        return ConcentrationProblem(D=0.5, dt=0.5, c_prev=0.0, J=0.0)
    return PotentialProblem(kappa=1.0, beta=1.0, S=(0.0, 0.0), I=0.0, R=0.0,
                            partition=POTENTIAL_PARTITION)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", default="concentration",
                    choices=("concentration", "potential"))
    ap.add_argument("--p", type=int, default=1)
    ap.add_argument("--delta-p", type=int, default=1)
    ap.add_argument("--levels", type=int, default=3)
    ap.add_argument("--base-n", type=int, default=1)
    ap.add_argument("--robin-all", action="store_true",
                    help="potential only: Robin on every side (no Dirichlet)")
    args = ap.parse_args()

    problem = default_problem(args.problem)
    partition = problem.partition if args.problem == "potential" else ALL_NEUMANN
    if args.robin_all:
        partition = BoundaryPartition.from_names(
            {"left": "neumann", "right": "neumann",
             "bottom": "robin", "top": "robin"})
        problem = PotentialProblem(kappa=1.0, beta=1.0, S=(0.0, 0.0),
                                   I=0.0, R=0.0, partition=partition)

    layout = SpaceLayout(args.p, args.delta_p)
    prev = None
    print(f"{'n':>4} {'dofs':>6} {'alpha':>12} {'ratio':>8}")
    for lvl in range(args.levels):
        n = args.base_n * 2 ** lvl
        mesh = classify_boundary(build_rect_mesh(UNIT_SQUARE, n, n),
                                 partition, problem.kind)
        dofmap = build_dofmap(mesh, layout, active_facets(mesh, problem))
        alpha = infsup_constant(mesh, problem, layout)
        ratio = "-" if prev is None else f"{alpha / prev:.4f}"
        print(f"{n:>4} {dofmap.n_total:>6} {alpha:>12.6e} {ratio:>8}")
        prev = alpha


if __name__ == "__main__":
    main()
