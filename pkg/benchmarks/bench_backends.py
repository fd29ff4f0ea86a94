"""Compare the compiled and pure-Python Tree SHAP kernels.

Run ``python benchmarks/bench_backends.py`` after an editable install. Prints
a CSV with the median seconds per explanation for each backend, the speedup,
and the largest difference between the two backends' outputs.
"""

import argparse
import sys

import numpy as np

from treeattr import synthetic
from treeattr.bench import time_call
from treeattr.treeshap import BACKENDS, tree_shap


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--trees", type=int, default=20)
    p.add_argument("--depths", default="2,4,6,8")
    p.add_argument("--features", type=int, default=50)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    if "cython" not in BACKENDS:
        print("compiled kernel not built; only the python backend is available", file=sys.stderr)
        return 1
    print("T,D,M,python_sec,cython_sec,speedup,max_abs_diff")
    for D in (int(d) for d in args.depths.split(",")):
        rng = np.random.default_rng([args.seed, D])
        ens = synthetic.random_full_ensemble(rng, args.trees, D, args.features)
        x = rng.uniform(0.0, 1.0, args.features)
        sec = {b: time_call(lambda b=b: tree_shap(ens, x, backend=b), args.repeats) for b in ("python", "cython")}
        diff = np.max(np.abs(tree_shap(ens, x, backend="python")[0] - tree_shap(ens, x, backend="cython")[0]))
        print(f"{args.trees},{D},{args.features},{sec['python']:.6g},{sec['cython']:.6g},"
              f"{sec['python'] / sec['cython']:.1f},{diff:.3g}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
