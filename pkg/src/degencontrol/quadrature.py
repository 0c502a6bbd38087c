"""Triangle quadrature rules in barycentric coordinates."""
import numpy as np

_S = np.sqrt(15.0)
_A = (6.0 - _S) / 21.0
_B = (6.0 + _S) / 21.0

#: 7-point rule exact for polynomials of degree 5 (all nodes strictly interior).
BARY7 = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [_A, _A, 1 - 2 * _A],
    [_A, 1 - 2 * _A, _A],
    [1 - 2 * _A, _A, _A],
    [_B, _B, 1 - 2 * _B],
    [_B, 1 - 2 * _B, _B],
    [1 - 2 * _B, _B, _B],
])
WEIGHTS7 = np.array([9 / 40] + [(155 - _S) / 1200] * 3 + [(155 + _S) / 1200] * 3)


def subdivided_rule(levels=1):
    """Composite 7-point rule on ``4**levels`` congruent sub-triangles.

    Returns barycentric points and weights summing to one.
    """
    tris = [np.eye(3)]
    for _ in range(levels):
        new = []
        for t in tris:
            a, b, c = t
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            new += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                    np.array([ca, bc, c]), np.array([ab, bc, ca])]
        tris = new
    pts = np.concatenate([BARY7 @ t for t in tris])
    wts = np.tile(WEIGHTS7, len(tris)) / len(tris)
    return pts, wts
