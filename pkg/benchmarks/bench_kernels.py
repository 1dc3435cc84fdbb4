"""Compare the compiled and pure numpy kernel backends.

Times the element kernels on the basis tables of a real quadrature grid,
then a full system assembly with each backend swapped in.

    python benchmarks/bench_kernels.py [--n 12] [--p 2] [--repeat 5]
"""
import argparse
import timeit

import numpy as np

from gsiga import assembly, kernels
from gsiga.assembly import QuadratureGrid, l2_project
from gsiga.geometry import sphere_patch
from gsiga.space import SplineSpace

KERNELS = ("find_spans", "basis_funs_ders", "element_mass", "element_stiffness", "element_load")


def best(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def kernel_cases(quad):
    b = quad.btab[:, :, 0, :]
    db = quad.btab[:, :, 1, :]
    rng = np.random.default_rng(0)
    w = rng.uniform(0.5, 1.5, size=quad.weights.shape)
    K = rng.uniform(0.5, 1.5, size=quad.weights.shape + (2, 2))
    kv = quad.univariate.knots
    x = quad.points_1d.ravel()
    return {
        "find_spans": lambda m: m.find_spans(kv, quad.p, x),
        "basis_funs_ders": lambda m: m.basis_funs_ders(kv, quad.p, x, 2),
        "element_mass": lambda m: m.element_mass(b, b, w),
        "element_stiffness": lambda m: m.element_stiffness(b, db, b, db, K),
        "element_load": lambda m: m.element_load(b, b, w),
    }


def use_backend(name):
    impl = kernels.load_backend(name)
    for k in KERNELS:
        setattr(kernels, k, getattr(impl, k))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=12)
    ap.add_argument("--p", type=int, default=2)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    space = SplineSpace.uniform(args.n, args.p)
    quad = QuadratureGrid(space)
    e = l2_project(lambda f, x, y: sphere_patch(f, x, y, 40.0), quad)
    c = np.ones(space.num_dofs)
    backends = kernels.available_backends()
    print(f"(n, p) = ({args.n}, {args.p}), {space.num_dofs} dofs, backends: {', '.join(backends)}")
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is timed")

    cases = kernel_cases(quad)
    times = {}
    for name in backends:
        impl = kernels.load_backend(name)
        times[name] = {k: best(lambda: fn(impl), args.repeat) for k, fn in cases.items()}
        use_backend(name)
        times[name]["assemble"] = best(lambda: assembly.assemble(quad, e, e, 0.1, c, 0.5 * c), args.repeat)
    use_backend(kernels.BACKEND)

    header = f"{'kernel':<20}" + "".join(f"{b:>12}" for b in backends)
    if len(backends) == 2:
        header += f"{'speed-up':>10}"
    print(header)
    for k in list(cases) + ["assemble"]:
        row = f"{k:<20}" + "".join(f"{times[b][k] * 1e3:>10.3f}ms" for b in backends)
        if len(backends) == 2:
            row += f"{times['python'][k] / times['cython'][k]:>9.2f}x"
        print(row)


if __name__ == "__main__":
    main()
