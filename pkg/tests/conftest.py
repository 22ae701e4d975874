import numpy as np
import pytest

from sgmpcs import Activity, Instance, parse_orlib

DATA = __import__("pathlib").Path(__file__).resolve().parent.parent / "data"


def random_instance(n, m, seed, dmax=9):
    """Seeded random JSP: uniform machine permutation per job, durations in
    [1, dmax]."""
    rng = np.random.Generator(np.random.PCG64(seed))
    acts = []
    for j in range(n):
        order = rng.permutation(m)
        durs = rng.integers(1, dmax + 1, size=m)
        for pos in range(m):
            acts.append(Activity(j, pos, int(order[pos]), int(durs[pos])))
    return Instance(n, m, acts, name=f"rnd_{n}x{m}_{seed}")


def rng_for(seed):
    return np.random.Generator(np.random.PCG64(seed))


@pytest.fixture
def tiny_2x1():
    # two single-activity jobs competing for one machine (durations 3, 4)
    return parse_orlib("2 1\n0 3\n0 4", name="tiny2x1")


@pytest.fixture
def tiny_1x2():
    # one job, two machines in a chain (durations 5, 7)
    return parse_orlib("1 2\n0 5 1 7", name="tiny1x2")


@pytest.fixture
def tiny_2x2():
    return parse_orlib("2 2\n0 3 1 4\n1 2 0 6", name="tiny2x2")
