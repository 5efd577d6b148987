"""Planar point-vortex system, optionally with a uniform axial drift.

    dz_i/dt = sum_{j != i} a_j K(z_i - z_j)  (+ a_i e1 in drift mode)

Integrated with classical fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CollapseError, DomainError
from .kernel import TWO_PI


@dataclass(frozen=True)
class PointVortexState:
    positions: np.ndarray
    intensities: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float).reshape(-1, 2)
        a = np.array(self.intensities, dtype=float).ravel()
        if len(pos) < 1:
            raise DomainError("need at least one vortex")
        if len(a) != len(pos):
            raise DomainError(f"{len(pos)} positions but {len(a)} intensities")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(a))):
            raise DomainError("non-finite vortex data")
        pos.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "intensities", a)
        object.__setattr__(self, "time", float(self.time))

    @property
    def n(self) -> int:
        return len(self.intensities)

    def moved(self, positions: np.ndarray, time: float) -> "PointVortexState":
        return PointVortexState(positions, self.intensities, time)


@dataclass(frozen=True)
class PvInvariants:
    hamiltonian: float
    linear_impulse: np.ndarray = field(repr=True)
    angular_impulse: float = 0.0


def _pair_offsets(z: np.ndarray):
    d = z[:, None, :] - z[None, :, :]
    r2 = d[..., 0] ** 2 + d[..., 1] ** 2
    return d, r2


def min_separation(positions: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Smallest pairwise distance and the pair attaining it (inf for N = 1)."""
    z = np.asarray(positions, dtype=float)
    if len(z) < 2:
        return math.inf, (-1, -1)
    _, r2 = _pair_offsets(z)
    iu = np.triu_indices(len(z), k=1)
    k = int(np.argmin(r2[iu]))
    return math.sqrt(r2[iu][k]), (int(iu[0][k]), int(iu[1][k]))


def _velocities(z: np.ndarray, a: np.ndarray, drift: bool, time: float) -> np.ndarray:
    d, r2 = _pair_offsets(z)
    np.fill_diagonal(r2, np.inf)
    if np.any(r2 == 0.0):
        i, j = np.argwhere(r2 == 0.0)[0]
        raise CollapseError(time, (int(i), int(j)), 0.0)
    w = a[None, :] / (TWO_PI * r2)
    v = np.stack([-(w * d[..., 1]).sum(axis=1), (w * d[..., 0]).sum(axis=1)], axis=1)
    if drift:
        v[:, 0] += a
    return v


def pv_rhs(state: PointVortexState, drift: bool = False) -> np.ndarray:
    """Velocities of all vortices, shape ``(N, 2)``.

    Raises :class:`CollapseError` if two positions coincide.
    """
    return _velocities(state.positions, state.intensities, drift, state.time)


def step_schedule(horizon: float, dt: float) -> tuple[int, float]:
    """Number of full steps of size ``dt`` and the leftover partial step.

    A remainder within ``1e-9 dt`` of zero or of ``dt`` is absorbed, so that
    ``horizon = 1, dt = 1e-3`` gives 1000 steps rather than 999 plus a sliver.
    """
    n = int(math.floor(horizon / dt))
    rest = horizon - n * dt
    if rest <= 1e-9 * dt:
        return n, 0.0
    if dt - rest <= 1e-9 * dt:
        return n + 1, 0.0
    return n, rest


def rk4_step(f, y: np.ndarray, t: float, h: float) -> np.ndarray:
    k1 = f(y, t)
    k2 = f(y + 0.5 * h * k1, t + 0.5 * h)
    k3 = f(y + 0.5 * h * k2, t + 0.5 * h)
    k4 = f(y + h * k3, t + h)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def pv_step(state: PointVortexState, h: float, drift: bool = False,
            time: float | None = None) -> PointVortexState:
    """One RK4 step of size ``h``; the new time is ``time`` if given."""
    a = state.intensities

    def f(z, t):
        return _velocities(z, a, drift, t)

    z = rk4_step(f, np.array(state.positions), state.time, h)
    return state.moved(z, state.time + h if time is None else time)


def pv_integrate(state: PointVortexState, horizon: float, dt: float,
                 collapse_threshold: float | None = None,
                 drift: bool = False) -> list[PointVortexState]:
    """Fixed-step RK4 trajectory from ``state.time`` to ``state.time + horizon``.

    The returned list starts with ``state`` and holds every accepted step;
    the last step is shortened to land exactly on the horizon.

    Parameters
    ----------
    collapse_threshold
        Halt with :class:`CollapseError` once the minimum separation drops
        below this.  Defaults to ``1e-6`` times the initial minimum separation.
    """
    if not dt > 0.0:
        raise DomainError(f"dt must be positive, got {dt}")
    if not horizon >= 0.0:
        raise DomainError(f"horizon must be non-negative, got {horizon}")
    sep0, pair0 = min_separation(state.positions)
    if collapse_threshold is None:
        collapse_threshold = 1e-6 * sep0 if math.isfinite(sep0) else 0.0
    if not collapse_threshold >= 0.0:
        raise DomainError("collapse_threshold must be non-negative")
    if sep0 <= collapse_threshold:
        raise CollapseError(state.time, pair0, sep0)

    a = state.intensities

    def f(z, t):
        return _velocities(z, a, drift, t)

    n_full, rest = step_schedule(horizon, dt)
    t0 = state.time
    z = np.array(state.positions)
    out = [state]
    steps = [dt] * n_full + ([rest] if rest > 0.0 else [])
    t = t0
    for k, h in enumerate(steps, start=1):
        z = rk4_step(f, z, t, h)
        t = t0 + (k * dt if k <= n_full else horizon)
        sep, pair = min_separation(z)
        if sep < collapse_threshold:
            raise CollapseError(t, pair, sep)
        out.append(state.moved(z, t))
    return out


def pv_invariants(state: PointVortexState) -> PvInvariants:
    """Hamiltonian, linear impulse ``sum a_i z_i`` and angular impulse ``sum a_i |z_i|^2``."""
    z, a = state.positions, state.intensities
    sep, pair = min_separation(z)
    if sep == 0.0:
        raise CollapseError(state.time, pair, 0.0)
    h = 0.0
    if len(a) > 1:
        _, r2 = _pair_offsets(z)
        iu = np.triu_indices(len(a), k=1)
        h = -float(np.sum(a[iu[0]] * a[iu[1]] * 0.5 * np.log(r2[iu]))) / TWO_PI
    return PvInvariants(
        hamiltonian=h,
        linear_impulse=a @ z,
        angular_impulse=float(a @ np.sum(z * z, axis=1)),
    )
