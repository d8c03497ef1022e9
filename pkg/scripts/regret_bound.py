"""Empirical regret against the Fair-LinUCB high-probability bound.

A noise-free linear environment with a shared coefficient vector is simulated
for several horizons; each policy's cumulative regret is printed next to the
bound evaluated at the observed context-norm bound ``L`` and ``M = ||theta*||``.

Example::

    python scripts/regret_bound.py --horizons 100 500 1000 5000 --dim 10 --arms 10
"""

from __future__ import annotations

import argparse

import numpy as np

from fairbandit.groups import Group
from fairbandit.metrics import BoundParams, alpha_schedule, theoretical_bound
from fairbandit.policy import BanditPolicy, PolicyConfig


def simulate(kind: str, gamma: float, T: int, d: int, k: int, seed: int, lam: float, delta: float):
    rng = np.random.default_rng(seed)
    theta = rng.normal(size=d)
    theta /= np.linalg.norm(theta)
    alpha = alpha_schedule(T, lam, 1.0, 1.0, d, delta)
    policy = BanditPolicy(PolicyConfig(kind=kind, alpha=alpha, gamma=gamma, lam=lam, dim=d, sensitive_index=0))
    regret, L = 0.0, 0.0
    curve = []
    for t in range(T):
        g = Group(int(rng.integers(2)))
        X = rng.normal(size=(k, d))
        X /= np.maximum(np.linalg.norm(X, axis=1, keepdims=True), 1.0) * rng.uniform(1.0, 2.0, size=(k, 1))
        X[:, 0] = 0.5 * float(g)
        L = max(L, float(np.linalg.norm(X, axis=1).max()))
        r = X @ theta
        arm, _ = policy.select_arm(X, g)
        policy.update(arm, X[arm], float(r[arm]), g)
        regret += float(r.max() - r[arm])
        curve.append(regret)
    return curve, L, float(np.linalg.norm(theta))


def main(argv: list[str] | None = None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--horizons", type=int, nargs="+", default=[100, 500, 1000, 5000])
    ap.add_argument("--dim", type=int, default=10)
    ap.add_argument("--arms", type=int, default=10)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--delta", type=float, default=0.05)
    ap.add_argument("--Gamma", type=float, default=3.0)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    T_max = max(args.horizons)
    print(f"{'policy':22s} " + " ".join(f"{'T=' + str(T):>22s}" for T in args.horizons))
    for kind, gamma in (("linucb", 0.0), ("fair_linucb", 1.0), ("fair_linucb", args.Gamma)):
        curve, L, M = simulate(kind, gamma, T_max, args.dim, args.arms, args.seed, args.lam, args.delta)
        cells = []
        for T in args.horizons:
            b = theoretical_bound(BoundParams(T=T, d=args.dim, L=L, M=M, lam=args.lam, delta=args.delta,
                                              Gamma=args.Gamma))
            cells.append(f"{curve[T - 1]:9.1f} / {b:10.0f}")
        print(f"{kind + f'(g={gamma:g})':22s} " + " ".join(f"{c:>22s}" for c in cells))
    p0 = BoundParams(T=T_max, d=args.dim, L=1.0, M=1.0, lam=args.lam, delta=args.delta, Gamma=0.0)
    pG = BoundParams(T=T_max, d=args.dim, L=1.0, M=1.0, lam=args.lam, delta=args.delta, Gamma=args.Gamma)
    print(f"\nbound(Gamma={args.Gamma:g}) / bound(Gamma=0) = {theoretical_bound(pG) / theoretical_bound(p0):.12f}"
          f"  (expected {(2 + args.Gamma) / 2:.12f})")


if __name__ == "__main__":
    main()
