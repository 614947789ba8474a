#!/usr/bin/env python3
"""Resource-counter growth across array sizes, with least-squares fits.

Quantum-side counters (QFT gates per shot, semiclassical ops per
sample) grow polynomially in s = log2(S); the classical reference
transform grows as S*s. Prints the measured counts, the fitted
coefficients, and the worst relative residual per fit.
"""

import argparse
import sys

import numpy as np

from qpattern import CellGrid, exact_distribution, qft_gate_total, run_pipeline


def counters_at(s, seed, shots):
    n = (s + 1) // 2
    rng = np.random.default_rng([seed, 3, s])
    cells = (rng.random(1 << s) < 0.5).astype(np.uint8)
    if not cells.any():
        cells[0] = 1
    g = CellGrid(n=n, m=s - n, cells=cells)
    amp = run_pipeline(g, shots, np.random.default_rng([seed, 4, s]))
    semi = run_pipeline(
        g, 4, np.random.default_rng([seed, 6, s]), sampler="semiclassical"
    )
    semi_ops = (semi.counters.gates - semi.counters.trials * s) / 4
    return {
        "s": s,
        "qft": qft_gate_total(s),
        "semi": semi_ops,
        "queries_per_shot": amp.counters.queries / shots,
        "classical": exact_distribution(g).classical_ops,
    }


def fit_and_report(name, xs, ys, model):
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    coeff = float((model(xs) * ys).sum() / (model(xs) ** 2).sum())
    fitted = coeff * model(xs)
    worst = float(np.max(np.abs(fitted - ys) / ys))
    print(f"{name}: coefficient {coeff:.4f}, worst residual {worst:.2%}")
    return worst


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="8,10,12,14,16")
    ap.add_argument("--shots", type=int, default=2048)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    sizes = [int(v) for v in args.sizes.split(",")]

    rows = [counters_at(s, args.seed, args.shots) for s in sizes]
    print("s    qft_gates  semi_ops  queries/shot  classical_ops")
    for r in rows:
        print(
            f"{r['s']:<4} {r['qft']:<10} {r['semi']:<9.1f}"
            f" {r['queries_per_shot']:<13.4f} {r['classical']}"
        )

    ss = [r["s"] for r in rows]
    fit_and_report(
        "QFT gates ~ s^2", ss, [r["qft"] for r in rows], lambda x: x**2
    )
    fit_and_report(
        "semiclassical ~ s", ss, [r["semi"] for r in rows], lambda x: x
    )
    fit_and_report(
        "classical ~ S*s",
        ss,
        [r["classical"] for r in rows],
        lambda x: x * 2.0**x,
    )
    qmean = np.mean([r["queries_per_shot"] for r in rows])
    print(f"amplitude queries per shot: mean {qmean:.4f} (expect 1/rho = 2)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
