"""Time the power-flow kernels of each available backend.

    python benchmarks/bench_kernels.py [--repeat N]

Reports the mean time of one Newton system assembly (mismatch plus
Jacobian) and of one full solve at base load, per case and backend.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rl2adn.grid import PowerFlowModel, kernels, load_case


def _time(fn, repeat: int) -> float:
    fn()  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_case(name: str, repeat: int) -> list[tuple[str, str, float, float]]:
    case = load_case(name)
    model = PowerFlowModel(case)
    p, q = -case.p_load, -case.q_load
    p_pu, q_pu = p / case.base_mva, q / case.base_mva
    rng = np.random.default_rng(0)
    vm = rng.uniform(0.95, 1.0, case.n_bus)
    va = rng.uniform(-0.05, 0.0, case.n_bus)
    m = model.pq.size
    F, J = np.empty(2 * m), np.empty((2 * m, 2 * m))
    rows = []
    default = kernels.newton_system
    try:
        for backend in kernels.available_backends():
            be = kernels.load_backend(backend)
            t_sys = _time(lambda: be.newton_system(model.G, model.B, vm, va, p_pu, q_pu, model.pq, F, J), repeat)
            kernels.newton_system = be.newton_system
            t_pf = _time(lambda: model.solve(p, q), max(1, repeat // 10))
            rows.append((name, backend, t_sys, t_pf))
    finally:
        kernels.newton_system = default
    return rows


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=2000)
    ap.add_argument("--cases", nargs="+", default=["tiny4", "ieee33", "ieee69"])
    args = ap.parse_args(argv)
    print(f"{'case':8s} {'backend':9s} {'system [us]':>12s} {'solve [ms]':>11s}")
    for name in args.cases:
        rows = bench_case(name, args.repeat)
        for case, backend, t_sys, t_pf in rows:
            print(f"{case:8s} {backend:9s} {t_sys * 1e6:12.1f} {t_pf * 1e3:11.3f}")
        if len(rows) == 2:
            print(f"{'':8s} speedup   {rows[1][2] / rows[0][2]:11.1f}x {rows[1][3] / rows[0][3]:10.1f}x")


if __name__ == "__main__":
    main()
