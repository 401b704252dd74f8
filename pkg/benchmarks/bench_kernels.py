"""Compiled kernels against the NumPy fallback on representative inputs.

    python benchmarks/bench_kernels.py [--repeat N]

Inputs come from a 10-chiplet synthetic system on the default grid; the Adam
case updates a float32 vector the size of the policy head. Array outputs of
the two backends are checked for agreement before timing is reported.
"""
import argparse
import timeit

import numpy as np

from chipletplan.floorplan_env import placed_rects, random_floorplan
from chipletplan.io import generate_synthetic
from chipletplan.kernels import _pykernels as py
from chipletplan.thermal_reference import characterize_tables

try:
    from chipletplan.kernels import _ckernels as cy
except ImportError:
    cy = None


def cases(rng):
    spec = generate_synthetic(10, rng)
    fp = random_floorplan(spec, rng, 1000)
    tables = characterize_tables(spec.thermal_grid)
    grid = spec.thermal_grid
    cs = spec.cell_size_mm
    mm = np.array(placed_rects(fp, spec))
    rects = mm / np.array([cs, cs, cs, cs, 1.0])
    sizes = np.array([(c.width / cs, c.height / cs, c.power) for c in spec.chiplets])
    placed = mm[:-1, :4]
    last = spec.chiplets[-1]
    kern = tables.offset_kernel()
    n = 16 * 1024 * 1024
    p = np.random.default_rng(0).standard_normal(n).astype(np.float32)
    g = np.random.default_rng(1).standard_normal(n).astype(np.float32)

    def adam(mod):
        m, v, q = np.zeros_like(p), np.zeros_like(p), p.copy()
        return lambda: mod.adam_update(q, g, m, v, 1e-3, 0.9, 0.999, 1.0, 1e-8)

    return {
        "anchor_mask": lambda mod: (lambda: mod.anchor_mask(
            placed, last.width, last.height, spec.min_spacing, spec.width, spec.height,
            spec.lattice_size, spec.pitch_x, spec.pitch_y)),
        "rasterize": lambda mod: (lambda: mod.rasterize(rects, grid.nx, grid.ny)),
        "mutual_rises": lambda mod: (lambda: mod.mutual_rises(rects, kern, grid.nx, grid.ny)),
        "anchored_rises": lambda mod: (lambda: mod.anchored_rises(
            fp.anchors, sizes, spec.pitch_x / cs, spec.pitch_y / cs, kern, grid.nx, grid.ny)),
        "adam_update (16M f32)": adam,
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if cy is None:
        raise SystemExit("compiled extension not built; run pip install -e . first")
    rng = np.random.default_rng(11)
    print(f"{'kernel':24s} {'python':>12s} {'cython':>12s} {'speedup':>8s}")
    for name, make in cases(rng).items():
        t = {}
        for label, mod in (("python", py), ("cython", cy)):
            fn = make(mod)
            number = 1 if name.startswith("adam") else 20
            t[label] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        if not name.startswith("adam"):
            a, b = make(py)(), make(cy)()
            assert np.allclose(np.asarray(a, dtype=float), np.asarray(b, dtype=float),
                               rtol=1e-10, atol=1e-12), name
        print(f"{name:24s} {t['python'] * 1e6:10.1f}us {t['cython'] * 1e6:10.1f}us "
              f"{t['python'] / t['cython']:7.1f}x")


if __name__ == "__main__":
    main()
