"""Reference systems shared by the test modules."""

import math

import numpy as np

from affineproj.affine import BernoulliWeights, SelfAffineIFS
from affineproj.spectral import affinity_dimension

SYM = np.array([[0.3, 0.1], [0.1, 0.3]])
E1 = np.array([1.0, 1.0]) / math.sqrt(2)
CLOSED_FORM_DIM = math.log(2) / math.log(2.5)


def symmetric_pair(c: float = 0.4) -> SelfAffineIFS:
    """Two copies of SYM; translations on the (1, 1) line, so the attractor is a segment."""
    return SelfAffineIFS.from_arrays([SYM, SYM], [(-c, -c), (c, c)])


def diagonal_pair() -> SelfAffineIFS:
    return SelfAffineIFS.from_arrays([np.diag([1 / 2, 1 / 3]), np.diag([1 / 3, 1 / 2])],
                                     [(-0.45, 0.0), (0.45, 0.0)])


def generic_pair() -> SelfAffineIFS:
    """Strictly positive, no common dominant eigenvector, overlapping pieces."""
    A2 = np.array([[0.30, 0.02], [0.20, 0.25]])
    return SelfAffineIFS.from_arrays([SYM, A2], [(-0.4, -0.3), (0.4, 0.3)])


def four_squares() -> SelfAffineIFS:
    """x -> x/2 + d on the corners of a square: the uniform measure on the square."""
    c = 0.5 / math.sqrt(2)
    d = [(-c, -c), (c, -c), (-c, c), (c, c)]
    return SelfAffineIFS.from_arrays([0.5 * np.eye(2)] * 4, d)


def _with_dominant_e1(a: float, b: float, psi: float) -> np.ndarray:
    """Matrix with eigenvalue a on (1, 1) and b on the direction at angle psi."""
    w = np.array([math.cos(psi), math.sin(psi)])
    P = np.column_stack([E1, w])
    return P @ np.diag([a, b]) @ np.linalg.inv(P)


def eigenline_pair() -> tuple[SelfAffineIFS, BernoulliWeights]:
    """Non-commuting positive pair sharing the dominant eigenvector (1, 1).

    Both fixed points sit on the (1, 1) line, so the measure lives on a segment
    and pi/4 is a genuine exceptional direction. The pieces are disjoint and the
    Furstenberg measure is non-atomic. Weights ``a_i^s / sum`` with ``s`` the
    affinity dimension make the Bernoulli measure the natural equilibrium one.
    """
    a = (0.45, 0.40)
    A1 = _with_dominant_e1(a[0], 0.30, 0.75 * math.pi + 0.25)
    A2 = _with_dominant_e1(a[1], 0.25, 0.75 * math.pi - 0.25)
    d1 = -0.95 * (1 - a[0]) * E1
    d2 = 0.95 * (1 - a[1]) * E1
    ifs = SelfAffineIFS.from_arrays([A1, A2], [d1, d2])
    s = affinity_dimension(ifs)
    p = np.array([a[0] ** s, a[1] ** s])
    return ifs, BernoulliWeights(tuple(p / p.sum()))


def single(A, d=(0.0, 0.0)) -> SelfAffineIFS:
    return SelfAffineIFS.from_arrays([A], [d])
