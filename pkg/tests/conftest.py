import random

import pytest

from diophapprox import numtheory as nt
from diophapprox.gcd_graph import GcdGraph


@pytest.fixture(scope="session")
def big_table():
    return nt.sieve(100_000)


def random_toy_graph(
    rng: random.Random,
    table: nt.PrimeTable,
    prime_pool=(7, 11, 13, 17, 19, 23, 29),
    side_size=(3, 7),
    edge_prob=0.6,
    with_multiplicative_data=False,
) -> GcdGraph:
    """Seeded valid square-free GCD graph for branch-coverage experiments.

    Vertices are square-free products from a small prime pool.  With
    multiplicative data enabled, P = {2, 3} with a | 6, b | 6 and every
    vertex carries exactly its side's P-part, so the gcd-coupling rule holds
    by construction.
    """

    def rand_squarefree(stem: int) -> int:
        val = stem
        picks = rng.sample(prime_pool, k=rng.randint(1, min(3, len(prime_pool))))
        for p in picks:
            val *= p
        return val

    if with_multiplicative_data:
        P = (2, 3)
        a = rng.choice((1, 2, 3, 6))
        b = rng.choice((1, 2, 3, 6))
    else:
        P = ()
        a = b = 1

    def side(stem: int) -> list[nt.FactoredInt]:
        values = set()
        target = rng.randint(*side_size)
        while len(values) < target:
            values.add(rand_squarefree(stem))
        return [nt.factor(v, table) for v in sorted(values)]

    V = side(a)
    W = side(b)
    E = [
        (v.value, w.value)
        for v in V
        for w in W
        if rng.random() < edge_prob
    ]
    if not E:
        E = [(V[0].value, W[0].value)]
    return GcdGraph.create(V=V, W=W, E=E, P=P, a=a, b=b)


def graph_with_balanced_split(rng, table, p=7, **kw):
    """A toy graph where prime p divides some but not all vertices per side,
    so all four split candidates are non-empty."""
    for _ in range(200):
        g = random_toy_graph(rng, table, **kw)
        v_div = [f for f in g.V if f.value % p == 0]
        w_div = [f for f in g.W if f.value % p == 0]
        if 0 < len(v_div) < len(g.V) and 0 < len(w_div) < len(g.W):
            return g
    raise RuntimeError("generator failed to produce a balanced graph")
