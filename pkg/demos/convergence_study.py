# Uniform-refinement convergence study for the manufactured smooth solution.
#
# Runs the Bubnov-Galerkin, primal DPG, and ultraweak DPG discretizations
# on a sequence of globally refined cube meshes and prints the H1-seminorm
# and L2 errors with their observed rates.  Expected: rate p in H1, p+1 in
# L2 for the field of each formulation.

import math
import os

from hphex import adapt, poisson as po
from hphex.mesh import read_geometry

HERE = os.path.dirname(os.path.realpath(__file__))
CUBE = os.path.join(HERE, os.pardir, "inputs", "cube.geometry")


def study(kind, p, nref=3):
    problem = po.make_problem(kind, exact="smooth", dp=1)
    mesh = po.make_mesh(problem, read_geometry(CUBE), p)
    rows = []
    for step in range(nref):
        if step:
            adapt.global_href(mesh)
        report = po.solve_problem(mesh, problem, workers=4)
        e_h1, e_l2, _ = po.compute_exact_error(mesh, problem)
        rows.append((mesh.NRELES, report.ndof, e_h1, e_l2))
    return rows


def print_table(kind, p, rows):
    print(f"\n{kind} p={p}")
    print(f"{'nreles':>7} {'ndof':>8} {'H1 err':>11} {'rate':>6} "
          f"{'L2 err':>11} {'rate':>6}")
    prev = None
    for nreles, ndof, e_h1, e_l2 in rows:
        r_h1 = r_l2 = "     -"
        if prev is not None:
            r_h1 = f"{math.log2(prev[0] / e_h1):6.2f}"
            r_l2 = f"{math.log2(prev[1] / e_l2):6.2f}"
        print(f"{nreles:7d} {ndof:8d} {e_h1:11.4e} {r_h1} {e_l2:11.4e} {r_l2}")
        prev = (e_h1, e_l2)


def main():
    for kind in (po.GALERKIN, po.PRIMAL, po.UW):
        for p in (1, 2):
            print_table(kind, p, study(kind, p))


if __name__ == "__main__":
    main()
