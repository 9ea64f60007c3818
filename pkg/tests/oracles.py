"""Independent reference computations used by the tests.

Nothing here imports the package's numerical code: each oracle recomputes its
quantity from first principles (plain Python loops, exact enumeration, or a
different closed form).
"""

import itertools
import math

import numpy as np
from scipy.special import lambertw


def psi_bisection(lam, tol=1e-15):
    """Largest root of 1 - exp(-lam x) - x on [0, 1] by plain bisection."""
    if lam <= 1:
        return 0.0
    f = lambda x: 1.0 - math.exp(-lam * x) - x
    lo, hi = 1e-12, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def psi_lambert(lam):
    """Closed form psi = 1 + W(-lam e^{-lam}) / lam on the principal branch."""
    if lam <= 1:
        return 0.0
    return float(1.0 + lambertw(-lam * math.exp(-lam), 0).real / lam)


class DSU:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, x):
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[ra] = rb


def c1_c2(n, edges):
    dsu = DSU(n)
    for a, b in edges:
        dsu.union(a, b)
    counts = {}
    for i in range(n):
        root = dsu.find(i)
        counts[root] = counts.get(root, 0) + 1
    sizes = sorted(counts.values(), reverse=True) + [0]
    return sizes[0], sizes[1]


def exact_c1c2_distribution(n, pairs, probs):
    """Law of (C1, C2) by enumerating every subset of the random pairs.

    Pairs with probability 1 are always present; pairs with probability 0
    should not be passed in.
    """
    sure = [pr for pr, p in zip(pairs, probs) if p >= 1.0]
    rand = [(pr, p) for pr, p in zip(pairs, probs) if p < 1.0]
    dist = {}
    for mask in itertools.product((0, 1), repeat=len(rand)):
        w = 1.0
        edges = list(sure)
        for bit, (pr, p) in zip(mask, rand):
            if bit:
                w *= p
                edges.append(pr)
            else:
                w *= 1.0 - p
        key = c1_c2(n, edges)
        dist[key] = dist.get(key, 0.0) + w
    return dist


def brute_pairs(points, sides, torus, radius):
    """All index pairs within ``radius`` (minimum image on a torus), O(n^2)."""
    out = []
    n = len(points)
    for i in range(n):
        for j in range(i + 1, n):
            delta = points[j] - points[i]
            if torus:
                delta = delta - sides * np.round(delta / sides)
            if math.sqrt(float(delta @ delta)) <= radius:
                out.append((i, j))
    return out


def brute_paths(n, edges, start, length):
    """Self-avoiding directed paths of the given length starting in ``start`` by DFS."""
    adj = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)

    def walk(path, left):
        if left == 0:
            return 1
        return sum(walk(path + [y], left - 1) for y in adj[path[-1]] if y not in path)

    return sum(walk([s], length) for s in start)

