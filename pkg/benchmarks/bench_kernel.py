"""Compare the compiled and numpy RK4 kernels on realistic workloads.

Run: python3 benchmarks/bench_kernel.py [--repeat N]

Workloads:
  trajectory   one density matrix, d = 10, 20000 steps (evolve)
  period-map   d^2 basis matrices, d = 8, 2000 steps (steady_response)
  large        one density matrix, d = 40, 2000 steps (BLAS path)
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from uscqed import kernel


def problem(d: int, batch: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    energies = np.concatenate([[0.0], np.sort(rng.uniform(0.2, 3.0, d - 1))])
    rates = np.triu(rng.uniform(0, 1e-3, (d, d)), 1)
    op = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    ops = (op + op.conj().T)[None]
    rho = np.zeros((batch, d, d), dtype=complex)
    rho[:, 0, 0] = 1.0
    obs = np.eye(d, dtype=complex)[None]
    return rho, energies, rates, ops, np.array([0.01]), np.array([1.1]), obs


WORKLOADS = {"trajectory": (10, 1, 20000), "period-map": (8, 64, 2000), "large": (40, 1, 2000)}


def run(repeat: int) -> None:
    backends = sorted(kernel.BACKENDS)
    print(f"{'workload':<12} {'d':>3} {'batch':>5} {'steps':>6} " + " ".join(f"{b:>10}" for b in backends) + "  speedup")
    for name, (d, batch, steps) in WORKLOADS.items():
        rho0, e, r, ops, amps, freqs, obs = problem(d, batch)
        times = {}
        for b in backends:
            def call():
                rho = rho0.copy()
                kernel.propagate(rho, e, r, ops, amps, freqs, 0.0, 0.002, steps, obs, 1.1, backend=b)

            times[b] = min(timeit.repeat(call, number=1, repeat=repeat))
        speed = f"{times['python'] / times['compiled']:.1f}x" if "compiled" in times else "n/a"
        print(f"{name:<12} {d:>3} {batch:>5} {steps:>6} " + " ".join(f"{times[b]:>9.3f}s" for b in backends)
              + f"  {speed:>7}")


if __name__ == "__main__":
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    run(parser.parse_args().repeat)
