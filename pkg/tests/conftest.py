import json
import pathlib

import numpy as np
import pytest

from asht.instances import BanditClass, load_instance

ROOT = pathlib.Path(__file__).resolve().parents[1]


@pytest.fixture(scope="session")
def table1():
    return load_instance(ROOT / "instances" / "table1.json")


@pytest.fixture(scope="session")
def table2():
    return load_instance(ROOT / "instances" / "table2.json")


@pytest.fixture(scope="session")
def m2_simple():
    # one arm discriminates strongly, the other weakly
    return BanditClass(np.array([
        [[0.8, 0.2], [0.4, 0.6]],
        [[0.3, 0.7], [0.7, 0.3]],
    ]))


@pytest.fixture(scope="session")
def m2_single_arm():
    return BanditClass(np.array([
        [[0.9, 0.1]],
        [[0.1, 0.9]],
    ]))


def random_bernoulli_instance(rng, m=3, K=3, lo=0.15, hi=0.85, min_gap=0.03):
    """Random full-support Bernoulli instance with distinct hypotheses."""
    while True:
        means = rng.uniform(lo, hi, size=(m, K))
        ok = True
        for i in range(m):
            for j in range(i + 1, m):
                if np.max(np.abs(means[i] - means[j])) < min_gap:
                    ok = False
        if ok:
            break
    probs = np.stack([np.stack([[p, 1.0 - p] for p in row]) for row in means])
    return BanditClass(probs)


@pytest.fixture(scope="session")
def tiny_goap_table(m2_simple):
    from asht.goap import backward_induction, build_grids

    spec = build_grids(m2_simple, B=2, kappa=1.0, dh=0.35)
    return backward_induction(m2_simple, spec)
