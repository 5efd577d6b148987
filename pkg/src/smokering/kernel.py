"""
Kernels
=======

Planar Biot-Savart kernel ``K`` and the axisymmetric (swirl-free) kernel ``G``
written in the shifted half-plane coordinates ``x = (z, r - r0)``.

The axisymmetric kernel reduces to the two one-dimensional integrals

    I1(a) = int_0^pi cos(t) / (a^2 + 2 - 2 cos t)^(3/2) dt
    I2(a) = int_0^pi (1 - cos t) / (a^2 + 2 - 2 cos t)^(3/2) dt

with ``a = |x - y| / sqrt((r0 + x2)(r0 + y2))``.  Two independent routes are
provided for them:

* :func:`special_values` -- vectorised, via complete elliptic integrals for
  ``a <= 2`` and a positive-term hypergeometric series above.  This is what the
  particle simulation calls millions of times per step.
* :func:`eval_special` -- scalar, exact antiderivatives for the singular
  pieces plus adaptive Gauss-Kronrod quadrature for the smooth remainders.

:func:`eval_G_oracle` integrates the defining theta-integrals of ``G``
directly and is used to cross-check the closed form in :func:`eval_G`.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.special import ellipe, ellipkm1, gammaln

from .errors import AccuracyError, DomainError, SingularityError

TWO_PI = 2.0 * math.pi

# Branch point between the elliptic-integral and series evaluations.
_SERIES_SWITCH = 2.0
# smallest relative tolerance QUADPACK accepts (50 machine epsilons)
_MIN_TOL = 50.0 * np.finfo(float).eps
_N_SERIES = 64  # m <= 1/2 above the switch, so 64 terms reach rounding level


def _series_coefficients():
    n = np.arange(1, _N_SERIES + 1, dtype=float)
    w = np.exp(gammaln(n + 0.5) - gammaln(0.5) - gammaln(n + 1.0))  # (1/2)_n / n!
    c = np.exp(gammaln(n + 1.5) - gammaln(1.5) - gammaln(n + 1.0))  # (3/2)_n / n!
    return n, c * w * n / (n + 1.0), w * w * 2.0 * n / (2.0 * n - 1.0)


_SER_N, _SER_I1, _SER_I2 = _series_coefficients()


def as_vec(x) -> np.ndarray:
    """Return ``x`` as a finite float vector of shape (2,)."""
    v = np.asarray(x, dtype=float)
    if v.shape != (2,):
        raise DomainError(f"expected a 2-vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DomainError(f"non-finite vector {v}")
    return v


# --------------------------------------------------------------------------- #
# Planar kernel
# --------------------------------------------------------------------------- #
def eval_K(x) -> np.ndarray:
    """Planar kernel ``K(x) = -(1/2pi) grad^perp log|x|``.

    ``grad^perp = (d/dx2, -d/dx1)``, so ``K(x) = (-x2, x1) / (2 pi |x|^2)``.
    """
    x = as_vec(x)
    r2 = x[0] * x[0] + x[1] * x[1]
    if r2 == 0.0:
        raise SingularityError("K is singular at the origin")
    return np.array([-x[1], x[0]]) / (TWO_PI * r2)


def planar_kernel(d1, d2, delta: float = 0.0):
    """Vectorised (optionally regularised) planar kernel of the offset ``(d1, d2)``.

    Returns the two components of ``(-d2, d1) / (2 pi (|d|^2 + delta^2))``.
    Zero offsets give nan when ``delta == 0``; callers mask them.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = 1.0 / (TWO_PI * (d1 * d1 + d2 * d2 + delta * delta))
    return -d2 * inv, d1 * inv


# --------------------------------------------------------------------------- #
# I1, I2: fast vectorised route
# --------------------------------------------------------------------------- #
def special_values(a):
    """Vectorised ``(I1(a), I2(a))`` for ``a > 0``.

    For ``a <= 2`` with ``m = 4/(a^2+4)`` and ``s = sqrt(a^2+4)``::

        I2 = (K(m) - E(m)) / s,    I1 = 2 E(m) / (a^2 s) - I2

    where ``K(m)`` is taken from ``ellipkm1(1 - m)`` so that ``1 - m`` keeps
    full precision as ``a -> 0``.  For ``a > 2`` both differences cancel, so
    the positive-term series in ``m`` is summed instead.
    """
    a = np.asarray(a, dtype=float)
    if np.any(~(a > 0.0)):
        raise DomainError("special functions require a > 0")
    a2 = a * a
    s = np.sqrt(a2 + 4.0)
    i1 = np.empty_like(a)
    i2 = np.empty_like(a)

    low = a <= _SERIES_SWITCH
    if np.any(low):
        al2, sl = a2[low], s[low]
        k = ellipkm1(al2 / (al2 + 4.0))
        e = ellipe(4.0 / (al2 + 4.0))
        i2l = (k - e) / sl
        i2[low] = i2l
        i1[low] = 2.0 * e / (al2 * sl) - i2l

    high = ~low
    if np.any(high):
        ah2, sh = a2[high], s[high]
        m = 4.0 / (ah2 + 4.0)
        powers = m[..., None] ** _SER_N
        i1[high] = math.pi / sh**3 * (powers @ _SER_I1)
        i2[high] = 0.5 * math.pi / sh * (powers @ _SER_I2)
    return i1, i2


# --------------------------------------------------------------------------- #
# I1, I2: antiderivative + adaptive quadrature route
# --------------------------------------------------------------------------- #
@dataclass(frozen=True)
class SpecialPair:
    """Values of ``I1, I2`` at ``a`` and their remainders.

    ``i1 = a**-2 + r1`` and ``i2 = -log(a)/2 * [a < 1] + r2`` by construction.
    """

    a: float
    i1: float
    i2: float
    r1: float
    r2: float
    err_est: float


def _quad(f, lo, hi, tol, args=()):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val, err = quad(f, lo, hi, args=args, epsabs=0.0, epsrel=tol, limit=200)
    if not err <= max(tol * abs(val), 1e-300):
        raise AccuracyError(f"quadrature on [{lo:.3g}, {hi:.3g}] did not converge", err)
    return val, err


def _q2_stretched(u, a):
    # cos t - cos(t/2) over t in [0, pi/2], with z = 2 sin(t/2) = a sinh(u).
    z = a * math.sinh(u)
    z2 = z * z
    c = math.sqrt(1.0 - 0.25 * z2)
    th = math.tanh(u)
    return -th * th * (3.0 - z2) / (4.0 * c * ((1.0 - 0.5 * z2) + c))


def _q2_direct(t, a):
    return (math.cos(t) - math.cos(0.5 * t)) / (a * a + 2.0 - 2.0 * math.cos(t)) ** 1.5


def _p2_integrand(t, a):
    sh = math.sin(0.5 * t)
    sq = math.sin(0.25 * t)
    return 4.0 * sh * sh * sq * sq / (a * a + 4.0 * sh * sh) ** 1.5


def _i1_ibp(t, a):
    # integration by parts of cos(t) D^-3/2: positive integrand, no cancellation
    st = math.sin(t)
    sh = math.sin(0.5 * t)
    return 3.0 * st * st / (a * a + 4.0 * sh * sh) ** 2.5


def _i2_integrand(t, a):
    sh = math.sin(0.5 * t)
    return 2.0 * sh * sh / (a * a + 4.0 * sh * sh) ** 1.5


def eval_special(a: float, tol: float = 1e-12) -> SpecialPair:
    """Evaluate ``I1, I2`` and the remainders ``R1, R2`` at a single ``a > 0``.

    For ``a < 1`` the singular parts are integrated exactly after the
    substitution ``z = 2 sin(theta/2)``::

        int_0^2 dz / (a^2+z^2)^(3/2)       = 2 / (a^2 sqrt(a^2+4))
        int_0^2 z^2 dz / (2 (a^2+z^2)^(3/2)) = log(2+s)/2 - 1/s - log(a)/2

    and only the bounded remainders go through adaptive quadrature (the
    ``[0, pi/2]`` part in the stretched variable ``z = a sinh u``).  For
    ``a >= 1`` both integrands are smooth and are integrated directly.

    Raises
    ------
    DomainError
        If ``a`` is not a finite positive number.
    AccuracyError
        If any quadrature misses ``tol`` (relative).
    """
    a = float(a)
    if not (a > 0.0 and math.isfinite(a)):
        raise DomainError(f"special functions require finite a > 0, got {a}")
    if not tol >= _MIN_TOL:
        raise DomainError(f"tol must be at least {_MIN_TOL:.1e}, got {tol}")
    s = math.sqrt(a * a + 4.0)
    if a < 1.0:
        u_hi = math.asinh(math.sqrt(2.0) / a)
        q2a, e1 = _quad(_q2_stretched, 0.0, u_hi, tol, args=(a,))
        q2b, e2 = _quad(_q2_direct, 0.5 * math.pi, math.pi, tol, args=(a,))
        # the P2 integrand turns over at theta ~ a; break the interval there
        cuts = [0.0] + [c for c in (a, 10.0 * a) if c < 0.5 * math.pi] + [math.pi]
        p2 = e3 = 0.0
        for lo, hi in zip(cuts[:-1], cuts[1:]):
            v, e = _quad(_p2_integrand, lo, hi, tol, args=(a,))
            p2 += v
            e3 += e
        r1 = -1.0 / ((2.0 + s) * s) + (q2a + q2b)
        r2 = -1.0 / s + 0.5 * math.log(2.0 + s) + p2
        i1 = a**-2 + r1
        i2 = -0.5 * math.log(a) + r2
        err = e1 + e2 + e3
    else:
        i1, e1 = _quad(_i1_ibp, 0.0, math.pi, tol, args=(a,))
        i2, e2 = _quad(_i2_integrand, 0.0, math.pi, tol, args=(a,))
        r1 = i1 - a**-2
        r2 = i2
        err = e1 + e2
    return SpecialPair(a=a, i1=i1, i2=i2, r1=r1, r2=r2, err_est=err)


def special_table(a_values, tol: float = 1e-12) -> np.ndarray:
    """Rows ``(a, i1, i2, r1, r2, err_est)`` for each ``a`` (quadrature route)."""
    rows = []
    for a in np.asarray(a_values, dtype=float).ravel():
        p = eval_special(a, tol)
        rows.append((p.a, p.i1, p.i2, p.r1, p.r2, p.err_est))
    return np.array(rows, dtype=float).reshape(-1, 6)


# --------------------------------------------------------------------------- #
# Axisymmetric kernel
# --------------------------------------------------------------------------- #
def axisym_kernel(x1, x2, y1, y2, r0: float, delta: float = 0.0):
    """Vectorised ``G_delta(x, y)`` components (broadcasting over inputs).

    With ``rx = r0 + x2``, ``ry = r0 + y2`` and
    ``a^2 = (|x - y|^2 + delta^2) / (rx ry)``::

        2 pi G1 = ((y2 - x2) I1(a) + ry I2(a)) / (rx^(3/2) ry^(1/2))
        2 pi G2 = (x1 - y1) I1(a) / (rx^(3/2) ry^(1/2))

    Coincident points with ``delta == 0`` yield nan; callers mask them.
    """
    x1, x2, y1, y2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (x1, x2, y1, y2))
    )
    rx = r0 + x2
    ry = r0 + y2
    d1 = x1 - y1
    d2 = y2 - x2
    num = d1 * d1 + d2 * d2 + delta * delta
    a = np.sqrt(num / (rx * ry))
    safe = a > 0.0
    i1 = np.full(a.shape, np.nan)
    i2 = np.full(a.shape, np.nan)
    if np.any(safe):
        i1[safe], i2[safe] = special_values(a[safe])
    c = 1.0 / (TWO_PI * rx * np.sqrt(rx * ry))
    return c * (d2 * i1 + ry * i2), c * d1 * i1


def _check_pair(x: np.ndarray, y: np.ndarray, r0: float, delta: float) -> None:
    if not r0 > 0.0:
        raise DomainError(f"r0 must be positive, got {r0}")
    if not (r0 + x[1] > 0.0 and r0 + y[1] > 0.0):
        raise DomainError("shifted radii r0 + x2 and r0 + y2 must be positive")
    if delta == 0.0 and x[0] == y[0] and x[1] == y[1]:
        raise SingularityError("G is singular at x = y")


def eval_G(x, y, r0: float, delta: float = 0.0) -> np.ndarray:
    """Axisymmetric kernel ``G(x, y)`` in closed form (see :func:`axisym_kernel`)."""
    x, y = as_vec(x), as_vec(y)
    _check_pair(x, y, r0, delta)
    g1, g2 = axisym_kernel(x[0], x[1], y[0], y[1], r0, delta)
    return np.array([float(g1), float(g2)])


def _oracle_pieces(x, y, r0, delta):
    """Integrands of 2 pi G (theta form), split for adaptive quadrature."""
    rx, ry = r0 + x[1], r0 + y[1]
    d1, d2 = x[0] - y[0], y[1] - x[1]
    ell2 = d1 * d1 + d2 * d2 + delta * delta
    q = rx * ry
    a = math.sqrt(ell2 / q)

    def g1_theta(t):
        omc = 2.0 * math.sin(0.5 * t) ** 2  # 1 - cos t
        return ry * (d2 + rx * omc) / (ell2 + 2.0 * q * omc) ** 1.5

    def g2_theta(t):
        omc = 2.0 * math.sin(0.5 * t) ** 2
        return ry * d1 * math.cos(t) / (ell2 + 2.0 * q * omc) ** 1.5

    def g2_theta_ibp(t):
        st = math.sin(t)
        omc = 2.0 * math.sin(0.5 * t) ** 2
        return 3.0 * q * ry * d1 * st * st / (ell2 + 2.0 * q * omc) ** 2.5

    if a >= 1.0:
        return [(g1_theta, 0.0, math.pi), (g2_theta_ibp, 0.0, math.pi)], a

    # t in [0, pi/2]: z = 2 sin(t/2) = a sinh(u); D = q a^2 cosh^2 u exactly.
    def stretched(numerator):
        def f(u):
            z = a * math.sinh(u)
            z2 = z * z
            jac = a * math.cosh(u) / math.sqrt(1.0 - 0.25 * z2)
            dd = q * a * a * math.cosh(u) ** 2
            return numerator(0.5 * z2) * jac / dd**1.5

        return f

    g1_u = stretched(lambda omc: ry * (d2 + rx * omc))
    g2_u = stretched(lambda omc: ry * d1 * (1.0 - omc))
    u_hi = math.asinh(math.sqrt(2.0) / a)
    half = 0.5 * math.pi
    return [
        (g1_u, 0.0, u_hi),
        (g1_theta, half, math.pi),
        (g2_u, 0.0, u_hi),
        (g2_theta, half, math.pi),
    ], a


def eval_G_oracle(x, y, r0: float, tol: float = 1e-12, delta: float = 0.0,
                  full_output: bool = False):
    """Brute-force ``G(x, y)`` by adaptive quadrature of the theta-integrals.

    For ``a < 1`` the near-singular part ``theta in [0, pi/2]`` is integrated
    in ``z = 2 sin(theta/2)``, further stretched as ``z = a sinh u`` so that the
    width-``a`` peak becomes an O(1) feature.  Tolerances are relative to the
    norm of ``G``.

    Returns the 2-vector, or ``(vector, error_estimate)`` if ``full_output``.
    """
    x, y = as_vec(x), as_vec(y)
    if not tol > 0.0:
        raise DomainError("tol must be positive")
    _check_pair(x, y, r0, delta)
    pieces, _ = _oracle_pieces(x, y, r0, delta)
    n_g1 = len(pieces) // 2

    def integrate(epsrel, epsabs):
        vals, errs = [], []
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", IntegrationWarning)
            for f, lo, hi in pieces:
                v, e = quad(f, lo, hi, epsabs=epsabs, epsrel=epsrel, limit=400)
                vals.append(v)
                errs.append(e)
        g = np.array([sum(vals[:n_g1]), sum(vals[n_g1:])]) / TWO_PI
        return g, math.fsum(errs) / TWO_PI

    coarse, _ = integrate(1e-6, 0.0)
    scale = float(np.hypot(*coarse))
    share = tol / len(pieces)
    g, err = integrate(share, 0.25 * share * scale * TWO_PI)
    norm = float(np.hypot(*g))
    if not err <= tol * max(norm, 1e-300):
        raise AccuracyError("G oracle missed its tolerance", err / max(norm, 1e-300))
    return (g, err) if full_output else g


# --------------------------------------------------------------------------- #
# |G - K| against its log-eps bound
# --------------------------------------------------------------------------- #
def difference_bracket(dist, eps: float, alpha: float):
    """``|log eps|^-alpha (1 + log|log eps| + |log d| [d < 1])``."""
    dist = np.asarray(dist, dtype=float)
    le = abs(math.log(eps))
    near = np.where(dist < 1.0, np.abs(np.log(np.where(dist > 0, dist, 1.0))), 0.0)
    return le**-alpha * (1.0 + math.log(le) + near)


def difference_ratio(x, y, eps: float, alpha: float):
    """``|G(x,y) - K(x-y)|`` divided by its bound bracket.

    Accepts single 2-vectors or ``(n, 2)`` arrays of pairs.  The ratio plays
    the role of the (non-constructive) constant of the bound and should stay
    bounded over sampled pairs.

    Raises
    ------
    DomainError
        If ``eps`` is not in (0, 1), a point has ``|x2| > r0/2``, or the
        bracket is not positive.
    SingularityError
        If ``x == y`` for some pair.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    scalar = x.ndim == 1
    x, y = np.atleast_2d(x), np.atleast_2d(y)
    r0 = abs(math.log(eps)) ** alpha
    if np.any(np.abs(x[:, 1]) > 0.5 * r0) or np.any(np.abs(y[:, 1]) > 0.5 * r0):
        raise DomainError("pair outside the band |x2|, |y2| <= r0/2")
    d1 = x[:, 0] - y[:, 0]
    d2 = x[:, 1] - y[:, 1]
    dist = np.hypot(d1, d2)
    if np.any(dist == 0.0):
        raise SingularityError("difference_ratio undefined at x = y")
    bracket = difference_bracket(dist, eps, alpha)
    if np.any(bracket <= 0.0):
        raise DomainError("bound bracket is not positive; eps too close to 1")
    g1, g2 = axisym_kernel(x[:, 0], x[:, 1], y[:, 0], y[:, 1], r0)
    k1, k2 = planar_kernel(d1, d2)
    ratio = np.hypot(g1 - k1, g2 - k2) / bracket
    return float(ratio[0]) if scalar else ratio
