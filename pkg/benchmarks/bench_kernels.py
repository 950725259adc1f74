"""Timing comparison of the pure numpy kernels against the compiled extension.

Runs each hot kernel on field sizes typical of exact enumeration (hundreds of
atoms) and Monte Carlo (1e5 atoms), checks that both backends agree to
rounding error, and prints a small table. Usage:

    python3 benchmarks/bench_kernels.py [--repeats 20]
"""

import argparse
import time

import numpy as np

from qtmlab.kernels import available_backends


def _field(rng, atoms, m):
    totals = rng.normal(0.0, 1.0, size=(atoms, m))
    weights = rng.random(atoms)
    weights /= weights.sum()
    return totals, weights


def _time(fn, repeats):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeats", type=int, default=20)
    args = ap.parse_args()

    backends = available_backends()
    names = [b.BACKEND for b in backends]
    if len(backends) < 2:
        print(f"only the {names[0]} backend is available; nothing to compare")

    rng = np.random.default_rng(7)
    m = 3
    a = rng.uniform(-0.5, 0.5, size=m)
    u = rng.random(m)
    cases = []
    for atoms, tag in [(300, "exact-300"), (100_000, "mc-100k")]:
        totals, weights = _field(rng, atoms, m)
        cands = rng.uniform(-0.5, 0.5, size=(64, m))
        cases.append((tag, totals, weights, cands))

    kernels_to_run = [
        ("softmax_rows", lambda b, t, w, cd: b.softmax_rows(t)),
        ("rjk_matrix", lambda b, t, w, cd: b.rjk_matrix(a, t, w)),
        ("rjk_grad", lambda b, t, w, cd: b.rjk_grad(a, t, w)),
        ("choice_values", lambda b, t, w, cd: b.choice_values(cd, t, w, u)),
    ]

    print(f"{'kernel':<16} {'field':<10} " + " ".join(f"{n:>12}" for n in names) + "   speedup")
    for kname, runner in kernels_to_run:
        for tag, totals, weights, cands in cases:
            times = []
            outs = []
            for b in backends:
                outs.append(runner(b, totals, weights, cands))
                times.append(_time(lambda: runner(b, totals, weights, cands), args.repeats))
            if len(outs) == 2:
                ref, alt = outs
                if isinstance(ref, tuple):
                    err = max(np.abs(x - y).max() for x, y in zip(ref, alt))
                else:
                    err = np.abs(np.asarray(ref) - np.asarray(alt)).max()
                assert err <= 1e-11, f"{kname}/{tag}: backends disagree by {err:.2e}"
            row = " ".join(f"{t * 1e3:>10.3f}ms" for t in times)
            speed = f"{times[0] / times[-1]:>8.2f}x" if len(times) == 2 else ""
            print(f"{kname:<16} {tag:<10} {row}   {speed}")
    print("agreement between backends verified to 1e-11")


if __name__ == "__main__":
    main()
