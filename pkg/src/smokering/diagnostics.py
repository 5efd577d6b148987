"""Blob diagnostics: centres, inertia, support radii, mass tails and bounds.

All sums over particles use ``math.fsum`` so that inequalities holding term by
term (Chebyshev, the mollifier sandwich) also hold for the computed values.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateBlobError, DomainError
from .point_vortex import PointVortexState
from .ring_sim import ParticleBlob

# Extremes of the quintic smoothstep derivatives on [0, 1].
SMOOTHSTEP_MAX_SLOPE = 15.0 / 8.0
SMOOTHSTEP_MAX_CURVATURE = 10.0 / math.sqrt(3.0)


@dataclass(frozen=True)
class BlobMoments:
    center: np.ndarray
    inertia: float
    support_radius: float


@dataclass(frozen=True)
class MollifierParams:
    """Radial bump ``W_{R,h}``: one inside ``R``, zero beyond ``R + h``.

    ``outer`` optionally pins the zero edge to an exact float, which
    :meth:`inner_shell` uses so that ``R - h + h`` cannot round below ``R``.
    """

    radius: float
    width: float
    outer: float | None = None

    def __post_init__(self):
        if not (self.radius > 0.0 and self.width > 0.0):
            raise DomainError("mollifier radius and width must be positive")
        if self.outer is not None and not self.outer >= self.radius:
            raise DomainError("outer edge must not lie inside the radius")

    @property
    def edge(self) -> float:
        return self.outer if self.outer is not None else self.radius + self.width

    def inner_shell(self) -> "MollifierParams":
        """The bump ``W_{R-h,h}`` whose zero set starts exactly at ``R``."""
        return MollifierParams(self.radius - self.width, self.width, outer=self.radius)


@dataclass(frozen=True)
class BoundReport:
    k: float
    support_bound: float
    delta_bound: float
    inertia_bound: float
    c_fit: float
    epsilon0: float | None = None


def _check_blob(blob: ParticleBlob) -> float:
    a = float(blob.intensity)
    if a == 0.0 or blob.n == 0:
        raise DegenerateBlobError(f"blob {blob.blob_index} is degenerate")
    return a


def blob_center(blob: ParticleBlob) -> np.ndarray:
    a = _check_blob(blob)
    w, x = blob.weights, blob.positions
    return np.array([math.fsum(w * x[:, 0]) / a, math.fsum(w * x[:, 1]) / a])


def _distances(blob: ParticleBlob, center: np.ndarray) -> np.ndarray:
    d = blob.positions - center
    return np.hypot(d[:, 0], d[:, 1])


def blob_moments(blob: ParticleBlob) -> BlobMoments:
    """Centre of vorticity, moment of inertia and support radius of a blob."""
    c = blob_center(blob)
    d = _distances(blob, c)
    return BlobMoments(
        center=c,
        inertia=math.fsum(np.abs(blob.weights) * d * d),
        support_radius=float(d.max()),
    )


def mass_tail(blob: ParticleBlob, R: float) -> float:
    """Fraction of ``|w|`` lying strictly farther than ``R`` from the centre."""
    if not R >= 0.0:
        raise DomainError(f"R must be non-negative, got {R}")
    a = _check_blob(blob)
    d = _distances(blob, blob_center(blob))
    w = np.abs(blob.weights)
    return math.fsum(w[d > R]) / abs(a)


def smoothstep(s):
    """Quintic smoothstep ``S(s) = 10 s^3 - 15 s^4 + 6 s^5`` clamped to [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    return s * s * s * (10.0 + s * (-15.0 + 6.0 * s))


def mollifier(dist, m: MollifierParams):
    """``W_{R,h}`` as a function of the distance from the centre."""
    d = np.asarray(dist, dtype=float)
    w = 1.0 - smoothstep((d - m.radius) / m.width)
    w = np.where(d <= m.radius, 1.0, w)
    return np.where(d >= m.edge, 0.0, w)


def mollified_mass(blob: ParticleBlob, m: MollifierParams) -> float:
    """``mu_t(R, h) = sum_p |w_p| / |a| (1 - W_{R,h}(x_p - B))``."""
    if m.radius < 2.0 * m.width:
        raise DomainError(f"need R >= 2h, got R={m.radius}, h={m.width}")
    a = _check_blob(blob)
    d = _distances(blob, blob_center(blob))
    return math.fsum(np.abs(blob.weights) * (1.0 - mollifier(d, m))) / abs(a)


def diagnostic_mollifier(support_radius: float) -> MollifierParams:
    """Shell used in diagnostics CSVs: ``R = R_t / 2``, ``h = R / 4``."""
    R = 0.5 * support_radius
    return MollifierParams(R, 0.25 * R)


def sandwich(blob: ParticleBlob, m: MollifierParams) -> tuple[float, float, float]:
    """``(mu(R, h), m(R), mu(R - h, h))``; ordered for every blob."""
    return (mollified_mass(blob, m), mass_tail(blob, m.radius),
            mollified_mass(blob, m.inner_shell()))


def solve_epsilon0(c_fit: float, r_m: float, k: float) -> float:
    """Solve ``c_fit |log eps0|^-k = r_m / 4`` for ``eps0``.

    Warns when ``4 c_fit <= r_m``: the solution is then at least ``1/e`` and
    lies outside the concentrated regime.  Very small solutions underflow
    to subnormals or zero.
    """
    for name, v in (("c_fit", c_fit), ("r_m", r_m), ("k", k)):
        if not v > 0.0:
            raise DomainError(f"{name} must be positive, got {v}")
    if 4.0 * c_fit <= r_m:
        warnings.warn(f"4 c_fit = {4 * c_fit:.4g} <= r_m = {r_m:.4g}: "
                      "eps0 >= 1/e, outside the small-eps regime", RuntimeWarning,
                      stacklevel=2)
    return math.exp(-((4.0 * c_fit / r_m) ** (1.0 / k)))


def bound_report(params, c_fit: float, r_m: float | None = None) -> BoundReport:
    """Evaluate the concentration bounds at ``params.eps``, ``params.alpha``.

    Parameters
    ----------
    params
        Anything with ``eps`` and ``alpha`` attributes, e.g. ``SimParams``.
    c_fit
        Fitted constant multiplying each bound.
    r_m
        Minimum point-vortex separation; when given, ``eps0`` is solved too.
    """
    eps, alpha = float(params.eps), float(params.alpha)
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    if not alpha > 2.0:
        raise DomainError(f"alpha must exceed 2 (k > 0), got {alpha}")
    k = 0.5 * (alpha - 2.0)
    le = abs(math.log(eps))
    return BoundReport(
        k=k,
        support_bound=c_fit * le**-k,
        delta_bound=c_fit * le ** -(alpha - 1.0),
        inertia_bound=c_fit * le ** (-2.0 * (alpha - 1.0)),
        c_fit=c_fit,
        epsilon0=solve_epsilon0(c_fit, r_m, k) if r_m is not None else None,
    )


def pv_deviation(blobs: list[ParticleBlob], reference: PointVortexState) -> float:
    """``max_i |B_i - z_i|`` against a point-vortex state."""
    if len(blobs) != reference.n:
        raise DomainError(f"{len(blobs)} blobs vs {reference.n} reference vortices")
    return max(math.dist(blob_center(b), z) for b, z in zip(blobs, reference.positions))
