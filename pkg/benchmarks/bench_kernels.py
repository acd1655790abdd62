"""Time the compiled kernels against the pure-Python loops.

    python3 benchmarks/bench_kernels.py [--N 64] [--steps 20000] [--repeat 3]

Both backends consume the same random stream, so the script also reports the
largest difference between their outputs.
"""
import argparse
import time

import numpy as np

from phaselab import _backend, fourier, sgd, shallow, special
from phaselab.data_model import PlantSpec


def best_time(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_sgd(N, steps, repeat, backend):
    spec = fourier.isotropic_spectrum(N)
    cfg = sgd.SgdConfig(steps=steps, record_every=max(steps // 10, 1))

    def run():
        return sgd.run_online(spec, PlantSpec(), special.hermite4(), cfg, 0, backend=backend)

    return best_time(run, repeat)


def bench_mlp(N, n, repeat, backend):
    rng = np.random.default_rng(0)
    X = rng.standard_normal((n, N))
    y = np.where(rng.random(n) < 0.5, 1.0, -1.0)
    order = rng.permutation(n)

    def run():
        net = shallow.init_net(N, 30, 1)
        shallow.sgd_pass(net, X, y, order, 1e-3, backend)
        return net

    return best_time(run, repeat)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--N", type=int, default=64)
    ap.add_argument("--steps", type=int, default=20000, help="online SGD steps")
    ap.add_argument("--examples", type=int, default=2000, help="examples in one MLP pass")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    if not _backend.CYTHON_AVAILABLE:
        print("compiled kernels not built; only the Python loops can be timed")
    backends = ["python"] + (["cython"] if _backend.CYTHON_AVAILABLE else [])

    print(f"online SGD, N={args.N}, {args.steps} steps")
    res = {}
    for b in backends:
        t, tr = bench_sgd(args.N, args.steps, args.repeat, b)
        res[b] = tr
        print(f"  {b:7s} {t:8.3f} s   {1e6 * t / args.steps:8.2f} us/step")
    if len(res) == 2:
        gap = np.max(np.abs(res["python"].projections - res["cython"].projections))
        print(f"  max |projection difference| = {gap:.2e}")

    print(f"two-layer net, N={args.N}, k=30, one pass over {args.examples} examples")
    nets = {}
    for b in backends:
        t, net = bench_mlp(args.N, args.examples, args.repeat, b)
        nets[b] = net
        print(f"  {b:7s} {t:8.3f} s   {1e6 * t / args.examples:8.2f} us/example")
    if len(nets) == 2:
        gap = np.max(np.abs(nets["python"].w1 - nets["cython"].w1))
        print(f"  max |w1 difference| = {gap:.2e}")


if __name__ == "__main__":
    main()
