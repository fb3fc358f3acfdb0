# Adaptive resolution of an internal layer with the ultraweak DPG solver.
#
# The manufactured solution has a tanh layer of width 0.05 across the plane
# x = 0.5, tapered laterally by a bi-quadratic cutoff.  Starting from a
# slab mesh that is coarse only in x, each cycle solves, evaluates the
# built-in residual estimator, marks a Doerfler set, and h-refines it.
# Refinement concentrates in the layer, and the estimator tracks the exact
# error closely.  Snapshots go to output/ as a ParaView .pvd series.

import os

import numpy as np

from hphex import adapt, poisson as po, vtu
from hphex.mesh import GeometryFile


def slab_grid(nx):
    xs = np.linspace(0.0, 1.0, nx + 1)
    pts = np.array([(x, y, z) for z in (0.0, 1.0) for y in (0.0, 1.0)
                    for x in xs])

    def pid(i, j, k):
        return 1 + i + (nx + 1) * (j + 2 * k)

    elems = [[pid(i, 0, 0), pid(i + 1, 0, 0), pid(i + 1, 1, 0), pid(i, 1, 0),
              pid(i, 0, 1), pid(i + 1, 0, 1), pid(i + 1, 1, 1), pid(i, 1, 1)]
             for i in range(nx)]
    return GeometryFile(pts, np.array(elems), [])


def main():
    outdir = os.path.join(os.path.dirname(os.path.realpath(__file__)),
                          "output")
    os.makedirs(outdir, exist_ok=True)

    problem = po.make_problem(po.UW, exact="boundary_layer", dp=1)
    mesh = po.make_mesh(problem, slab_grid(8), 2)
    marking = adapt.MarkingConfig(adapt.DOERFLER, 0.5)
    series = vtu.PvdSeries(outdir, name="layer")
    config = vtu.ParaviewConfig(dir=outdir, vlevel=1)

    print(f"{'step':>4} {'nreles':>7} {'ndof':>8} {'estimator':>11} "
          f"{'exact H1':>11}")

    def on_step(mesh, problem, row, errors):
        print(f"{row.step:4d} {row.nreles:7d} {row.ndof:8d} "
              f"{row.estimator:11.4e} {row.exact_error:11.4e}")
        series.add(mesh, config, f"step{row.step:03d}",
                   time=float(row.step))

    history = adapt.adaptive_loop(mesh, problem, marking, tol=0.0,
                                  max_steps=6, workers=4, on_step=on_step)
    drop = history[0].exact_error / history[-1].exact_error
    print(f"\nexact error reduced {drop:.1f}x; "
          f"open {os.path.join(outdir, 'layer.pvd')} in ParaView")


if __name__ == "__main__":
    main()
