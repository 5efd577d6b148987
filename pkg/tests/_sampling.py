"""Random pair generators shared by kernel and acceptance tests."""

import math

import numpy as np


def admissible_pair(rng, a):
    """``(r0, x, y)`` with ``|x2|, |y2| <= r0/2`` and kernel argument ``a``.

    ``r0`` is log-uniform on [1, 1e4].  Half of the draws put ``y2`` within a
    few ``a * rx`` of ``x2`` so that small ``a`` is not always realised by a
    purely axial offset.
    """
    while True:
        r0 = 10.0 ** rng.uniform(0.0, 4.0)
        x2 = rng.uniform(-0.5, 0.5) * r0
        rx = r0 + x2
        y2 = rng.uniform(-0.5, 0.5) * r0
        if rng.random() < 0.5:
            y2 = float(np.clip(x2 + rng.normal() * a * rx, -0.5 * r0, 0.5 * r0))
        ry = r0 + y2
        d1sq = a * a * rx * ry - (y2 - x2) ** 2
        if d1sq < 0.0:
            continue
        x1 = rng.uniform(-1.0, 1.0)
        y1 = x1 + math.sqrt(d1sq) * rng.choice([-1.0, 1.0])
        return r0, np.array([x1, x2]), np.array([y1, y2])


def band_pairs(rng, eps, alpha, n, dmax=10.0):
    """``n`` pairs inside the band ``|x2| <= r0/2`` with log-uniform distances."""
    r0 = abs(math.log(eps)) ** alpha
    x2 = rng.uniform(-0.5, 0.5, n) * r0
    d = 10.0 ** rng.uniform(-6.0, math.log10(dmax), n)
    phi = rng.uniform(0.0, 2.0 * np.pi, n)
    x = np.column_stack([rng.uniform(-1.0, 1.0, n), x2])
    y = x + d[:, None] * np.column_stack([np.cos(phi), np.sin(phi)])
    y[:, 1] = np.clip(y[:, 1], -0.5 * r0, 0.5 * r0)
    return x, y
