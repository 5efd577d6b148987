import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smokering.errors import (AxisCollisionError, ConfigurationError, DegenerateBlobError,
                              DomainError, RegimeError)
from smokering.kernel import eval_G, planar_kernel
from smokering.ring_sim import (ParticleBlob, SimParams, advance, axisymmetric_impulse,
                                disk_layout, external_field_split, impulse_variation,
                                induced_velocity, init_blobs, pairwise_velocity,
                                particle_velocities, read_checkpoint, write_checkpoint)

PAIR = [(-0.5, 0.0), (0.5, 0.0)]


def blobs_for(eps=0.1, n=30, centers=PAIR, a=(1.0, 1.0), **kw):
    p = SimParams(eps=eps, particles_per_blob=n, **kw)
    return p, init_blobs(p, centers, a)


def test_params_validation():
    for kw in (dict(eps=0.0), dict(eps=1.0), dict(eps=0.1, alpha=2.0),
               dict(eps=0.1, dt=0.0), dict(eps=0.1, particles_per_blob=0),
               dict(eps=0.1, delta=-1.0), dict(eps=0.1, workers=0)):
        with pytest.raises(ConfigurationError):
            SimParams(**kw)
    assert SimParams(eps=0.1, alpha=1.5, exploratory=True).r0 == pytest.approx(
        abs(math.log(0.1)) ** 1.5)


def test_r0_and_defaults():
    p = SimParams(eps=1e-2, alpha=3.0, particles_per_blob=100).resolved([1.0, -2.0])
    assert p.r0 == abs(math.log(1e-2)) ** 3.0
    assert p.m_bound == pytest.approx(1.01 * 2.0 / math.pi)
    assert p.dt == pytest.approx(0.2 * 2 * math.pi * 1e-4 / 2.0)
    assert p.delta == pytest.approx(0.5 * math.sqrt(math.pi * 1e-4 / 100))


@given(st.integers(1, 400), st.floats(-5, 5).filter(lambda a: abs(a) > 1e-3))
@settings(max_examples=40, deadline=None)
def test_init_structure(n, a):
    p = SimParams(eps=0.05, particles_per_blob=n)
    (b,) = init_blobs(p, [(0.3, -0.2)], [a])
    assert b.n == n
    assert math.fsum(b.weights) == a
    assert np.all(np.sign(b.weights) == b.sign) and b.sign == (1 if a > 0 else -1)
    d = np.hypot(*(b.positions - (0.3, -0.2)).T)
    assert np.all(d <= 0.05)


def test_layout_is_centred_and_area_weighted():
    offs, frac = disk_layout(1000, 1.0)
    assert math.fsum(frac) == pytest.approx(1.0, rel=1e-14)
    assert abs(frac @ offs[:, 0]) < 1e-15 and abs(frac @ offs[:, 1]) < 1e-15
    assert np.all(frac > 0)


def test_peak_vorticity_example():
    p = SimParams(eps=1e-2, particles_per_blob=10).resolved([1.0])
    peak = 1.0 / (math.pi * 1e-4)
    assert peak == pytest.approx(3183.0988618, rel=1e-10)
    assert peak <= p.m_bound * 1e-2 ** -2
    init_blobs(p, [(0.0, 0.0)], [1.0])


def test_init_errors():
    p = SimParams(eps=0.1, particles_per_blob=10)
    with pytest.raises(ConfigurationError):
        init_blobs(p, [(0.0, 0.0), (0.15, 0.0)], [1.0, 1.0])
    with pytest.raises(ConfigurationError):
        init_blobs(SimParams(eps=0.1, m_bound=0.1), [(0.0, 0.0)], [1.0])
    with pytest.raises(ConfigurationError):
        init_blobs(SimParams(eps=0.1, gamma=1.5), [(0.0, 0.0)], [1.0])
    with pytest.raises(ConfigurationError):
        init_blobs(p, [(0.0, 0.0)], [0.0])
    with pytest.raises(ConfigurationError):
        init_blobs(p, [(0.0, 0.0)], [1.0, 2.0])
    with pytest.raises(DegenerateBlobError):
        ParticleBlob(0, np.zeros((0, 2)), [], 1.0, 1)


def test_weights_are_frozen():
    _, blobs = blobs_for()
    with pytest.raises(ValueError):
        blobs[0].weights[0] = 3.0
    with pytest.raises(ValueError):
        blobs[0].positions[0, 0] = 3.0


def test_single_particle_self_term_skipped():
    p = SimParams(eps=0.1, particles_per_blob=1, delta=0.0)
    blobs = init_blobs(p, [(0.0, 0.0)], [1.0])
    np.testing.assert_array_equal(induced_velocity(blobs, (0.0, 0.0), p), [0.0, 0.0])


def test_two_particle_velocity():
    p = SimParams(eps=0.1, delta=0.0)
    b = ParticleBlob(0, [(0.0, 0.0), (0.05, 0.02)], [0.4, 0.6], 1.0, 1)
    v = induced_velocity([b], (0.0, 0.0), p)
    np.testing.assert_allclose(v, 0.6 * eval_G((0.0, 0.0), (0.05, 0.02), p.r0), rtol=1e-15)
    pr = SimParams(eps=0.1, delta=1e-3)
    v = induced_velocity([b], (0.0, 0.0), pr)
    expect = 0.4 * eval_G((0, 0), (0, 0), pr.r0, 1e-3) + 0.6 * eval_G(
        (0, 0), (0.05, 0.02), pr.r0, 1e-3)
    np.testing.assert_allclose(v, expect, rtol=1e-14)


def test_induced_velocity_domain():
    p, blobs = blobs_for()
    with pytest.raises(DomainError):
        induced_velocity(blobs, (0.0, -p.r0), p)


def test_delta_refinement_is_second_order():
    p, blobs = blobs_for(eps=0.1, n=20)
    x = (0.0, 0.6)
    v = [induced_velocity(blobs, x, SimParams(eps=0.1, particles_per_blob=20, delta=d))
         for d in (0.04, 0.02, 0.01)]
    ratio = np.linalg.norm(v[0] - v[1]) / np.linalg.norm(v[1] - v[2])
    assert 3.0 <= ratio <= 5.0


def test_mirror_symmetry():
    p, blobs = blobs_for(centers=[(0.2, 0.1), (-0.7, -0.3)], a=(1.0, -0.6))
    mirrored = [b.moved(b.positions * (-1.0, 1.0)) for b in blobs]
    x = np.array([0.35, -0.2])
    v = induced_velocity(blobs, x, p)
    w = induced_velocity(mirrored, x * (-1.0, 1.0), p)
    # G1 sees x1 - y1 only through a; G2 carries the factor x1 - y1
    assert w[0] == pytest.approx(v[0], rel=1e-12)
    assert w[1] == pytest.approx(-v[1], rel=1e-12)


def test_approaches_planar_sum_for_large_r0():
    diffs = []
    for eps in (1e-2, 1e-3, 1e-6):
        p, blobs = blobs_for(eps=eps, n=20)
        pos = np.concatenate([b.positions for b in blobs])
        w = np.concatenate([b.weights for b in blobs])
        x = np.array([0.0, 0.4])
        k1, k2 = planar_kernel(x[0] - pos[:, 0], x[1] - pos[:, 1])
        planar = np.array([w @ k1, w @ k2])
        v = induced_velocity(blobs, x, SimParams(eps=eps, particles_per_blob=20, delta=0.0))
        diffs.append(np.linalg.norm(v - planar) * abs(math.log(eps)) ** 2)
    # bounded when scaled by |log eps|^(alpha - 1)
    assert max(diffs) < 10.0
    assert diffs[2] < diffs[0]


def test_advance_preserves_weights_and_circulation():
    p, blobs = blobs_for()
    new = advance(blobs, p)
    for b0, b1 in zip(blobs, new):
        assert b1.weights is b0.weights
        assert math.fsum(b1.weights) == b0.intensity
        assert b1.blob_index == b0.blob_index and b1.n == b0.n
        assert not np.array_equal(b1.positions, b0.positions)


def test_axis_collision():
    p = SimParams(eps=0.1, particles_per_blob=1)
    b = ParticleBlob(0, [(0.0, -p.r0)], [1.0], 1.0, 1)
    with pytest.raises(AxisCollisionError):
        advance([b], p)


def test_strict_regime():
    p = SimParams(eps=0.1, particles_per_blob=1, strict_regime=True)
    b = ParticleBlob(0, [(0.0, 0.6 * p.r0)], [1.0], 1.0, 1)
    with pytest.raises(RegimeError):
        advance([b], p)
    advance([b], SimParams(eps=0.1, particles_per_blob=1))


def test_bitwise_reproducible_across_workers(monkeypatch):
    import smokering.ring_sim as rs
    monkeypatch.setattr(rs, "_BLOCK_ELEMS", 64)  # force many blocks
    p1, blobs = blobs_for(n=25, workers=1)
    p4 = SimParams(eps=0.1, particles_per_blob=25, workers=4)
    v1, v4 = particle_velocities(blobs, p1), particle_velocities(blobs, p4)
    assert np.array_equal(v1, v4)
    monkeypatch.setattr(rs, "_BLOCK_ELEMS", 1 << 18)
    assert np.array_equal(v1, particle_velocities(blobs, p1))


def test_impulse_conserved_semi_discretely():
    # d/dt sum w (r0 + x2)^2 = 0 because r_p G2(p, q) is antisymmetric
    p, blobs = blobs_for(centers=[(0.0, 0.0), (0.3, 0.4)], a=(1.0, -0.5))
    p = p.resolved([1.0, -0.5])
    pos = np.concatenate([b.positions for b in blobs])
    w = np.concatenate([b.weights for b in blobs])
    v = pairwise_velocity(pos, pos, w, p.r0, p.delta)
    rate = 2.0 * np.sum(w * (p.r0 + pos[:, 1]) * v[:, 1])
    scale = 2.0 * np.sum(np.abs(w * (p.r0 + pos[:, 1]) * v[:, 1]))
    assert abs(rate) <= 1e-13 * scale


def test_impulse_variation_consistent():
    p, blobs = blobs_for()
    full = axisymmetric_impulse(blobs, p.r0)
    assert full == pytest.approx(p.r0**2 * 2.0 + impulse_variation(blobs, p.r0), rel=1e-14)


def test_field_split():
    p, blobs = blobs_for(eps=1e-3, n=40)
    single = init_blobs(p, [(0.0, 0.0)], [1.0])
    fs = external_field_split(single, 0, (0.0, 0.0), p)
    np.testing.assert_array_equal(fs.f1, 0.0)
    np.testing.assert_array_equal(fs.f2, 0.0)
    x = blobs[0].positions[3]
    fs = external_field_split(blobs, 0, x, p)
    p0 = SimParams(eps=1e-3, particles_per_blob=40, delta=0.0)
    np.testing.assert_allclose(fs.total, induced_velocity(blobs[1:], x, p0), rtol=1e-12)
    with pytest.raises(DomainError):
        external_field_split(blobs, 2, x, p)


def test_checkpoint_roundtrip(tmp_path):
    p, blobs = blobs_for(centers=[(0.0, 0.0), (0.5, 0.1)], a=(1.0, -0.3))
    blobs = advance(blobs, p)
    path = tmp_path / "ck.csv"
    write_checkpoint(path, blobs)
    back = read_checkpoint(path)
    assert path.read_text().splitlines()[0] == "blob,particle,x1,x2,w"
    for a, b in zip(blobs, back):
        assert np.array_equal(a.positions, b.positions)
        assert np.array_equal(a.weights, b.weights)
        assert b.intensity == a.intensity and b.sign == a.sign
