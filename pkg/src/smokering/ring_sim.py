"""Lagrangian particle discretisation of concentrated vortex rings.

Each ring cross-section is a disk of uniform vorticity sampled by particles
carrying fixed circulation weights.  Particles move under the axisymmetric
kernel ``G`` summed directly over all pairs, advanced with RK4.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .errors import (AxisCollisionError, ConfigurationError, DegenerateBlobError,
                     DomainError, RegimeError)
from .kernel import axisym_kernel, planar_kernel
from .point_vortex import rk4_step

# Target rows per block in the pairwise sum.  Each row is reduced over the full
# source list independently, so the block size never changes the result.
_BLOCK_ELEMS = 1 << 18

_GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


@dataclass(frozen=True)
class SimParams:
    """Physical and numerical parameters of one ring simulation.

    ``m_bound``, ``dt`` and ``delta`` default to ``None`` and are resolved
    against the blob intensities by :meth:`resolved`.  The default time step
    makes one step turn a blob by 0.2 rad of its internal rotation,
    ``dt = 0.2 * 2 pi eps^2 / max|a|``; the default regularisation is half
    the mean inter-particle spacing ``sqrt(pi eps^2 / n)``.
    """

    eps: float
    alpha: float = 3.0
    gamma: float = 2.0
    m_bound: float | None = None
    dt: float | None = None
    horizon: float = 1.0
    delta: float | None = None
    particles_per_blob: int = 100
    quad_tol: float = 1e-12
    strict_regime: bool = False
    workers: int = 1
    exploratory: bool = False

    def __post_init__(self):
        if not 0.0 < self.eps < 1.0:
            raise ConfigurationError(f"eps must lie in (0, 1), got {self.eps}")
        if not (self.alpha > 2.0 or (self.exploratory and self.alpha > 0.0)):
            raise ConfigurationError(
                f"alpha must exceed 2 outside exploratory mode, got {self.alpha}")
        if not self.gamma > 0.0:
            raise ConfigurationError(f"gamma must be positive, got {self.gamma}")
        if self.m_bound is not None and not self.m_bound > 0.0:
            raise ConfigurationError("m_bound must be positive")
        if self.dt is not None and not self.dt > 0.0:
            raise ConfigurationError(f"dt must be positive, got {self.dt}")
        if not self.horizon >= 0.0:
            raise ConfigurationError("horizon must be non-negative")
        if self.delta is not None and not self.delta >= 0.0:
            raise ConfigurationError("delta must be non-negative")
        if int(self.particles_per_blob) != self.particles_per_blob or self.particles_per_blob < 1:
            raise ConfigurationError("particles_per_blob must be a positive integer")
        if int(self.workers) < 1:
            raise ConfigurationError("workers must be >= 1")

    @property
    def r0(self) -> float:
        return abs(math.log(self.eps)) ** self.alpha

    @property
    def spacing(self) -> float:
        return math.sqrt(math.pi * self.eps**2 / self.particles_per_blob)

    def resolved(self, intensities) -> "SimParams":
        """Copy with every ``None`` default filled in for these intensities."""
        amax = max(abs(float(a)) for a in intensities)
        if amax == 0.0:
            raise ConfigurationError("all intensities are zero")
        return replace(
            self,
            m_bound=self.m_bound if self.m_bound is not None else 1.01 * amax / math.pi,
            dt=self.dt if self.dt is not None else 0.4 * math.pi * self.eps**2 / amax,
            delta=self.delta if self.delta is not None else 0.5 * self.spacing,
        )


@dataclass(frozen=True)
class ParticleBlob:
    blob_index: int
    positions: np.ndarray
    weights: np.ndarray
    intensity: float
    sign: int

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        w = np.array(self.weights, dtype=float).ravel()
        if len(pos) == 0 or len(w) != len(pos):
            raise DegenerateBlobError("blob needs matching, nonempty positions and weights")
        if self.intensity == 0.0:
            raise DegenerateBlobError("blob intensity is zero")
        pos.flags.writeable = False
        w.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return len(self.weights)

    def moved(self, positions: np.ndarray) -> "ParticleBlob":
        # weights are shared, never copied or rebuilt
        out = object.__new__(ParticleBlob)
        pos = np.array(positions, dtype=float)
        pos.flags.writeable = False
        for k, v in (("blob_index", self.blob_index), ("positions", pos),
                     ("weights", self.weights), ("intensity", self.intensity),
                     ("sign", self.sign)):
            object.__setattr__(out, k, v)
        return out


@dataclass(frozen=True)
class FieldSplit:
    f1: np.ndarray
    f2: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.f1 + self.f2


# --------------------------------------------------------------------------- #
# initial data

def _ring_counts(m: int, edges: np.ndarray) -> np.ndarray:
    """Split ``m`` (even) particles over rings, even counts proportional to area."""
    area = np.diff(edges**2)
    pairs = m // 2
    ideal = pairs * area / area.sum()
    cnt = np.maximum(np.floor(ideal).astype(int), 1)
    while cnt.sum() > pairs:
        cnt[np.argmax(cnt - ideal)] -= 1
    while cnt.sum() < pairs:
        cnt[np.argmax(ideal - cnt)] += 1
    return 2 * cnt


def disk_layout(n: int, radius: float) -> tuple[np.ndarray, np.ndarray]:
    """Polar-grid sample of the unit-mass uniform disk.

    Returns offsets ``(n, 2)`` from the centre and cell area fractions summing
    to one.  Rings have equal radial width; within a ring particles come in
    antipodal pairs, so the area-weighted mean is zero to rounding, and their
    radii are stratified uniformly in ``r^2`` so tails of the radial mass
    distribution are resolved below the ring width.
    """
    if n < 1:
        raise ConfigurationError("need at least one particle per blob")
    offs = []
    frac = []
    inner = 0.0
    if n % 2:
        inner = radius / math.sqrt(n)
        offs.append((0.0, 0.0))
        frac.append(1.0 / n)
    m = n - n % 2
    if m:
        n_rings = max(1, min(m // 2, int(round(math.sqrt(n / math.pi)))))
        edges = np.linspace(inner, radius, n_rings + 1)
        counts = _ring_counts(m, edges)
        for k, nk in enumerate(counts):
            lo2, hi2 = edges[k] ** 2, edges[k + 1] ** 2
            half = nk // 2
            order = np.argsort((np.arange(half) * _GOLDEN) % 1.0)
            strata = np.empty(half, dtype=int)
            strata[order] = np.arange(half)
            rr = np.sqrt(lo2 + (hi2 - lo2) * (strata + 0.5) / half)
            phi = 2.0 * math.pi * np.arange(half) / nk + math.pi * k / max(nk, 1)
            c, s = rr * np.cos(phi), rr * np.sin(phi)
            cell = (hi2 - lo2) / (radius**2 * nk)
            for j in range(half):
                offs.append((c[j], s[j]))
                offs.append((-c[j], -s[j]))
                frac.extend((cell, cell))
    return np.array(offs, dtype=float), np.array(frac, dtype=float)


def _exact_weights(frac: np.ndarray, a: float) -> np.ndarray:
    w = a * frac
    for _ in range(8):
        w[-1] = a - math.fsum(w[:-1])
        if math.fsum(w) == a:
            return w
    raise ConfigurationError("could not balance particle weights")  # pragma: no cover


def init_blobs(params: SimParams, centers, intensities) -> list[ParticleBlob]:
    """Uniform-vorticity disks of radius ``eps`` about each centre.

    Particle weights are ``a_i`` times the cell area fraction; the last weight
    absorbs rounding so that ``math.fsum`` of each blob's weights equals
    ``a_i`` exactly.
    """
    z = np.asarray(centers, dtype=float).reshape(-1, 2)
    a = np.asarray(intensities, dtype=float).ravel()
    if len(z) != len(a) or len(z) == 0:
        raise ConfigurationError("centers and intensities must have equal nonzero length")
    if np.any(a == 0.0) or not np.all(np.isfinite(a)) or not np.all(np.isfinite(z)):
        raise ConfigurationError("intensities must be finite and nonzero")
    if params.gamma < 2.0:
        raise ConfigurationError("a uniform disk needs gamma >= 2")
    p = params.resolved(a)
    eps = p.eps
    for i in range(len(z)):
        for j in range(i + 1, len(z)):
            if math.dist(z[i], z[j]) <= 2.0 * eps:
                raise ConfigurationError(f"initial disks {i} and {j} overlap")
    peak = np.abs(a) / (math.pi * eps**2)
    lim = p.m_bound * eps ** (-p.gamma)
    if np.any(peak > lim):
        raise ConfigurationError(
            f"peak vorticity {peak.max():.6g} exceeds M eps^-gamma = {lim:.6g}")
    if np.any(p.r0 + z[:, 1] - eps <= 0.0):
        raise ConfigurationError("a disk reaches the symmetry axis")

    offs, frac = disk_layout(int(p.particles_per_blob), eps)
    blobs = []
    for i in range(len(z)):
        blobs.append(ParticleBlob(
            blob_index=i,
            positions=z[i] + offs,
            weights=_exact_weights(frac, float(a[i])),
            intensity=float(a[i]),
            sign=1 if a[i] > 0 else -1,
        ))
    return blobs


# --------------------------------------------------------------------------- #
# velocity evaluation

def _flatten(blobs):
    pos = np.concatenate([b.positions for b in blobs])
    w = np.concatenate([b.weights for b in blobs])
    return pos, w


def _block_sum(tx: np.ndarray, sx: np.ndarray, sw: np.ndarray, r0: float,
               delta: float) -> np.ndarray:
    t1, t2 = tx[:, 0:1], tx[:, 1:2]
    s1, s2 = sx[None, :, 0], sx[None, :, 1]
    g1, g2 = axisym_kernel(t1, t2, s1, s2, r0, delta)
    if delta == 0.0:
        same = (t1 == s1) & (t2 == s2)
        if np.any(same):
            g1 = np.where(same, 0.0, g1)
            g2 = np.where(same, 0.0, g2)
    return np.stack([(g1 * sw).sum(axis=1), (g2 * sw).sum(axis=1)], axis=1)


def pairwise_velocity(targets: np.ndarray, sources: np.ndarray, weights: np.ndarray,
                      r0: float, delta: float, workers: int = 1) -> np.ndarray:
    """``sum_q w_q G_delta(x, x_q)`` for every target ``x``.

    With ``delta == 0`` a source coinciding with the target is skipped.  Each
    target's sum runs over the sources in index order inside one numpy
    reduction, so the result does not depend on ``workers``.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    sources = np.asarray(sources, dtype=float).reshape(-1, 2)
    weights = np.asarray(weights, dtype=float).ravel()
    if np.any(r0 + targets[:, 1] <= 0.0) or np.any(r0 + sources[:, 1] <= 0.0):
        raise AxisCollisionError("a point reached the symmetry axis (r0 + x2 <= 0)")
    nt = len(targets)
    out = np.zeros((nt, 2))
    if nt == 0 or len(sources) == 0:
        return out
    rows = max(1, _BLOCK_ELEMS // len(sources))
    starts = range(0, nt, rows)

    def job(s):
        out[s:s + rows] = _block_sum(targets[s:s + rows], sources, weights, r0, delta)

    if workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            list(ex.map(job, starts))
    else:
        for s in starts:
            job(s)
    return out


def induced_velocity(blobs: list[ParticleBlob], point, params: SimParams) -> np.ndarray:
    """Velocity induced at ``point`` by all particles of all blobs."""
    x = np.asarray(point, dtype=float).reshape(2)
    if not params.r0 + x[1] > 0.0:
        raise DomainError("shifted radius r0 + x2 must be positive")
    p = params.resolved([b.intensity for b in blobs])
    pos, w = _flatten(blobs)
    return pairwise_velocity(x[None, :], pos, w, p.r0, p.delta)[0]


def particle_velocities(blobs: list[ParticleBlob], params: SimParams,
                        positions: np.ndarray | None = None) -> np.ndarray:
    """Velocities of all particles (flattened in blob order)."""
    p = params.resolved([b.intensity for b in blobs])
    pos, w = _flatten(blobs)
    if positions is not None:
        pos = positions
    return pairwise_velocity(pos, pos, w, p.r0, p.delta, int(p.workers))


def _check_regime(pos: np.ndarray, p: SimParams) -> None:
    if np.any(p.r0 + pos[:, 1] <= 0.0):
        raise AxisCollisionError("a particle reached the symmetry axis (r0 + x2 <= 0)")
    if p.strict_regime and np.any(np.abs(pos[:, 1]) > 0.5 * p.r0):
        raise RegimeError("a particle left the band |x2| <= r0/2")


def advance(blobs: list[ParticleBlob], params: SimParams,
            dt: float | None = None) -> list[ParticleBlob]:
    """One RK4 step for every particle; weights and membership are unchanged."""
    p = params.resolved([b.intensity for b in blobs])
    h = p.dt if dt is None else float(dt)
    pos, w = _flatten(blobs)
    _check_regime(pos, p)

    def f(y, t):
        _check_regime(y, p)
        return pairwise_velocity(y, y, w, p.r0, p.delta, int(p.workers))

    new = rk4_step(f, pos, 0.0, h)
    _check_regime(new, p)
    out, k = [], 0
    for b in blobs:
        out.append(b.moved(new[k:k + b.n]))
        k += b.n
    return out


def axisymmetric_impulse(blobs: list[ParticleBlob], r0: float) -> float:
    """``sum_p w_p (r0 + x2_p)^2``, conserved by the semi-discrete dynamics."""
    pos, w = _flatten(blobs)
    return math.fsum(w * (r0 + pos[:, 1]) ** 2)


def impulse_variation(blobs: list[ParticleBlob], r0: float) -> float:
    """``sum_p w_p (2 r0 x2_p + x2_p^2)``: the impulse minus ``r0^2 sum w``."""
    pos, w = _flatten(blobs)
    x2 = pos[:, 1]
    return math.fsum(w * (2.0 * r0 * x2 + x2 * x2))


def external_field_split(blobs: list[ParticleBlob], i: int, point,
                         params: SimParams) -> FieldSplit:
    """Planar part and curvature correction of the field of blobs ``j != i``."""
    if not 0 <= i < len(blobs):
        raise DomainError(f"blob index {i} out of range")
    x = np.asarray(point, dtype=float).reshape(2)
    others = [b for j, b in enumerate(blobs) if j != i]
    if not others:
        return FieldSplit(np.zeros(2), np.zeros(2))
    pos, w = _flatten(others)
    d1, d2 = x[0] - pos[:, 0], x[1] - pos[:, 1]
    k1, k2 = planar_kernel(d1, d2)
    g1, g2 = axisym_kernel(x[0], x[1], pos[:, 0], pos[:, 1], params.r0)
    f1 = np.array([np.sum(w * k1), np.sum(w * k2)])
    f2 = np.array([np.sum(w * (g1 - k1)), np.sum(w * (g2 - k2))])
    return FieldSplit(f1, f2)


# --------------------------------------------------------------------------- #
# checkpoints

CHECKPOINT_COLUMNS = ("blob", "particle", "x1", "x2", "w")


def write_checkpoint(path, blobs: list[ParticleBlob]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CHECKPOINT_COLUMNS)
        for b in blobs:
            for p, (x, w) in enumerate(zip(b.positions, b.weights)):
                wr.writerow([b.blob_index, p, repr(float(x[0])), repr(float(x[1])),
                             repr(float(w))])


def read_checkpoint(path) -> list[ParticleBlob]:
    rows: dict[int, list] = {}
    with open(path, newline="") as fh:
        rd = csv.DictReader(fh)
        if tuple(rd.fieldnames or ()) != CHECKPOINT_COLUMNS:
            raise ConfigurationError(f"bad checkpoint header {rd.fieldnames}")
        for r in rd:
            rows.setdefault(int(r["blob"]), []).append(
                (int(r["particle"]), float(r["x1"]), float(r["x2"]), float(r["w"])))
    blobs = []
    for i in sorted(rows):
        data = sorted(rows[i])
        w = np.array([d[3] for d in data])
        a = math.fsum(w)
        if a == 0.0 or not (np.all(w > 0) or np.all(w < 0)):
            raise ConfigurationError(f"blob {i}: weights must be nonzero with one sign")
        blobs.append(ParticleBlob(i, np.array([d[1:3] for d in data]), w, a,
                                  1 if a > 0 else -1))
    return blobs
