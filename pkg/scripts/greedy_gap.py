"""Energy captured by greedy tree growth relative to the best tree of equal size.

Enumerates every proper tree with levels below ``--depth`` and reports, for
each tree size, the mean and worst ratio over random coefficient maps.
"""

import argparse

import numpy as np

from warptree.coefficients import CoefficientMap
from warptree.dyadic import ROOT, DyadicIndex, children
from warptree.estimators import grow_greedy_tree


def all_trees(ix, depth):
    if ix.j >= depth:
        return [frozenset()]
    left, right = children(ix)
    out = [frozenset()]
    for a in all_trees(left, depth):
        for b in all_trees(right, depth):
            out.append(frozenset({ix}) | a | b)
    return out


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--depth", type=int, default=4)
    ap.add_argument("--maps", type=int, default=50)
    ap.add_argument("--decay", type=float, default=1.5, help="coefficient scale 2^(-decay j); 0 gives white maps")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    trees = [t for t in all_trees(ROOT, args.depth) if t]
    rng = np.random.default_rng(args.seed)
    sizes = range(1, 2**args.depth)
    ratios = []
    for _ in range(args.maps):
        d = {DyadicIndex(j, k): rng.normal() * 2.0 ** (-args.decay * j) for j in range(args.depth) for k in range(2**j)}
        best = {}
        for t in trees:
            best[len(t)] = max(best.get(len(t), 0.0), sum(d[ix] ** 2 for ix in t))
        cmap = CoefficientMap(d)
        ratios.append([sum(d[ix] ** 2 for ix in grow_greedy_tree(cmap, N, args.depth).nodes) / best[N] for N in sizes])
    r = np.array(ratios)
    print(f"{len(trees)} proper trees, {args.maps} maps, decay {args.decay}")
    print("N      " + " ".join(f"{N:>6d}" for N in sizes))
    print("mean   " + " ".join(f"{v:6.3f}" for v in r.mean(axis=0)))
    print("worst  " + " ".join(f"{v:6.3f}" for v in r.min(axis=0)))
    print(f"maps at >= 0.9 for every N: {np.mean(np.all(r >= 0.9, axis=1)):.2f}")


if __name__ == "__main__":
    main()
