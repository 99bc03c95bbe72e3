"""Quadrature rules on the reference triangle and on the unit interval."""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

MAX_DEGREE = 8


@dataclass(frozen=True)
class QuadratureRule:
    """Rule on the reference triangle (0,0), (1,0), (0,1).

    ``points`` holds barycentric coordinates (l0, l1, l2); the Cartesian
    point is (l1, l2). Weights sum to the reference area 1/2.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def xy(self) -> np.ndarray:
        return self.points[:, 1:]

    def __len__(self) -> int:
        return len(self.weights)


def _orbit3(a):
    b = 1.0 - 2.0 * a
    return [(a, a, b), (a, b, a), (b, a, a)]


def _orbit6(a, b):
    c = 1.0 - a - b
    return [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]


# Symmetric positive-weight rules (Dunavant). Weights normalised to 1 here;
# scaled to the reference area on construction.
_TABLES = {
    1: [((1 / 3, 1 / 3, 1 / 3), 1.0)],
    2: [(p, 1 / 3) for p in _orbit3(1 / 6)],
    4: [(p, 0.223381589678011) for p in _orbit3(0.445948490915965)]
    + [(p, 0.109951743655322) for p in _orbit3(0.091576213509771)],
    5: [((1 / 3, 1 / 3, 1 / 3), 0.225)]
    + [(p, 0.132394152788506) for p in _orbit3(0.470142064105115)]
    + [(p, 0.125939180544827) for p in _orbit3(0.101286507323456)],
    6: [(p, 0.116786275726379) for p in _orbit3(0.249286745170910)]
    + [(p, 0.050844906370207) for p in _orbit3(0.063089014491502)]
    + [(p, 0.082851075618374) for p in _orbit6(0.053145049844817, 0.310352451033784)],
    8: [((1 / 3, 1 / 3, 1 / 3), 0.144315607677787)]
    + [(p, 0.095091634267285) for p in _orbit3(0.459292588292723)]
    + [(p, 0.103217370534718) for p in _orbit3(0.170569307751760)]
    + [(p, 0.032458497623198) for p in _orbit3(0.050547228317031)]
    + [(p, 0.027230314174435) for p in _orbit6(0.008394777409958, 0.263112829634638)],
}


@lru_cache(maxsize=None)
def quadrature(degree: int) -> QuadratureRule:
    """Symmetric Gauss rule on the reference triangle exact to ``degree``."""
    degree = int(degree)
    if degree > MAX_DEGREE:
        raise ValueError(f"quadrature degree {degree} exceeds supported maximum {MAX_DEGREE}")
    d = max(degree, 1)
    while d not in _TABLES:
        d += 1
    pts = np.array([p for p, _ in _TABLES[d]], dtype=float)
    w = np.array([w for _, w in _TABLES[d]], dtype=float)
    # re-normalise so the weights sum to 1/2 to the last bit
    w = 0.5 * w / w.sum()
    pts.setflags(write=False)
    w.setflags(write=False)
    return QuadratureRule(points=pts, weights=w, degree=d)


@lru_cache(maxsize=None)
def gauss_legendre_01(npts: int):
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(npts)
    return 0.5 * (x + 1.0), 0.5 * w


def legendre_01(m: int, s: np.ndarray) -> np.ndarray:
    """L2(0,1)-orthonormal Legendre polynomial of degree ``m`` at ``s``."""
    c = np.zeros(m + 1)
    c[m] = 1.0
    return np.sqrt(2 * m + 1) * np.polynomial.legendre.legval(2.0 * s - 1.0, c)
