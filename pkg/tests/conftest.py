import itertools

import numpy as np
import pytest

from qilp import Dataset, ForwardInstance


@pytest.fixture(scope="session")
def box_instance():
    """The unit running example: the square [0, 2.5]^2.

    Rows (already unit-norm): x2 <= 2.5, x1 <= 2.5, x2 >= 0, x1 >= 0.
    """
    A = np.array([[0.0, -1.0], [-1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    b = np.array([-2.5, -2.5, 0.0, 0.0])
    return ForwardInstance(A, b, (">=",) * 4, name="box")


@pytest.fixture(scope="session")
def example1_data():
    return Dataset(np.array([[2.0, 2.3], [2.2, 2.3], [2.2, 2.0], [2.0, 2.0]]))


@pytest.fixture(scope="session")
def example1_shifted():
    return Dataset(np.array([[2.0, 2.3], [2.3, 2.2], [2.3, 1.9], [2.0, 2.0]]))


@pytest.fixture(scope="session")
def outlier_data():
    """The four square points plus one outlier near the bottom edge."""
    return Dataset(
        np.array([[2.0, 2.3], [2.2, 2.3], [2.2, 2.0], [2.0, 2.0], [2.2, 0.3]])
    )


# ---------------------------------------------------------------------------
# Independent brute-force oracles for 2-D instances


def enumerate_vertices_2d(inst, tol=1e-9):
    """All vertices of a 2-D instance by intersecting row pairs."""
    verts = []
    m = inst.m
    for i, j in itertools.combinations(range(m), 2):
        M = np.array([inst.A[i], inst.A[j]])
        if abs(np.linalg.det(M)) < 1e-12:
            continue
        x = np.linalg.solve(M, np.array([inst.b[i], inst.b[j]]))
        resid = inst.A @ x - inst.b
        ok = all(
            resid[r] >= -1e-7 if inst.row_senses[r] == ">=" else abs(resid[r]) <= 1e-7
            for r in range(m)
        )
        if ok and not any(np.allclose(x, v, atol=1e-9) for v in verts):
            verts.append(x)
    return verts


def _segment_distance(point, v1, v2, norm):
    """Exact min distance from a point to a 2-D segment, by breakpoints."""
    a = point - v1
    b = v1 - v2  # x(t) = v1 + t(v2-v1); point - x(t) = a + t*b

    def value(t):
        r = a + t * b
        return max(abs(r[0]), abs(r[1])) if norm == "inf" else abs(r[0]) + abs(r[1])

    cands = {0.0, 1.0}
    for k in range(2):
        if abs(b[k]) > 1e-14:
            cands.add(min(1.0, max(0.0, -a[k] / b[k])))
    if norm == "inf":
        for s1, s2 in itertools.product((1, -1), repeat=2):
            denom = s1 * b[0] - s2 * b[1]
            if abs(denom) > 1e-14:
                t = (s2 * a[1] - s1 * a[0]) / denom
                cands.add(min(1.0, max(0.0, t)))
    return min(value(t) for t in cands)


def oracle_min_facet_distance(inst, facet, point, norm="inf"):
    """Min distance from a point to a facet region, via its vertex pairs."""
    verts = enumerate_vertices_2d(inst)
    on_facet = [
        v for v in verts if abs(inst.A[facet] @ v - inst.b[facet]) <= 1e-7
    ]
    if not on_facet:
        return np.inf
    if len(on_facet) == 1:
        r = np.asarray(point) - on_facet[0]
        return max(abs(r)) if norm == "inf" else abs(r).sum()
    best = np.inf
    for v1, v2 in itertools.combinations(on_facet, 2):
        best = min(best, _segment_distance(np.asarray(point, float), v1, v2, norm))
    return best


def oracle_max_point_distance(inst, point):
    verts = enumerate_vertices_2d(inst)
    return max(np.abs(np.asarray(point) - v).max() for v in verts)


def oracle_face_max_distance(inst, c, point):
    verts = enumerate_vertices_2d(inst)
    vals = [float(np.asarray(c) @ v) for v in verts]
    z = min(vals)
    face = [v for v, val in zip(verts, vals) if val <= z + 1e-9]
    return max(np.abs(np.asarray(point) - v).max() for v in face)
