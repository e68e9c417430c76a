"""Shared fixtures: a validated constant bundle and synthesized nets.

The expensive artifacts (bundle, nets, complexes) are session-scoped so the
unit suites and the acceptance suite share one build.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from delone import constants as consts
from delone import netsynth as nsy
from delone import tessellation as tess


@pytest.fixture(scope="session")
def bundle2():
    return consts.default_practical_bundle(2)


@pytest.fixture(scope="session")
def small_net_pack(bundle2):
    """Net over a 3rF x 3rF box, used by the cheaper end-to-end checks."""
    K = nsy.Region.box([0.0, 0.0], [3.0 * bundle2.rF, 3.0 * bundle2.rF])
    net, transversal, report = nsy.synthesize_net(K, bundle2, seed=7)
    return {"K": K, "net": net, "transversal": transversal, "report": report}


@pytest.fixture(scope="session")
def small_complex(small_net_pack):
    return tess.build_delaunay(small_net_pack["net"], None)


@pytest.fixture(scope="session")
def big_net_pack(bundle2):
    """Seed-42 net over the 10rF x 10rF box, with its synthesis wall time."""
    K = nsy.Region.box([0.0, 0.0], [10.0 * bundle2.rF, 10.0 * bundle2.rF])
    t0 = time.perf_counter()
    net, transversal, report = nsy.synthesize_net(K, bundle2, seed=42)
    elapsed = time.perf_counter() - t0
    return {"K": K, "net": net, "transversal": transversal,
            "report": report, "elapsed": elapsed}


@pytest.fixture(scope="session")
def big_complex(big_net_pack):
    return tess.build_delaunay(big_net_pack["net"], None)


def random_separated_points(rng, count, box, min_sep, dim=2):
    """Rejection-sampled point set with pairwise separation >= min_sep."""
    pts = []
    tries = 0
    while len(pts) < count and tries < 200 * count:
        tries += 1
        p = rng.uniform(0.0, box, size=dim)
        if all(np.linalg.norm(p - q) >= min_sep for q in pts):
            pts.append(p)
    return np.array(pts)
