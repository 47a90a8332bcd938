import math

import numpy as np
import pytest

from sphlab.particles import (EmptyInteriorError, ParticleSet, build_neighbor_list,
                              generate_irregular, generate_regular, iter_neighbor_chunks,
                              mean_interior_neighbors)

from conftest import seeded_sets


def brute_neighbors(pos, radius):
    d2 = ((pos[:, None, :] - pos[None, :, :]) ** 2).sum(-1)
    # same arithmetic as the cell search: dx*dx + dy*dy on x_b - x_a
    dx = pos[None, :, 0] - pos[:, None, 0]
    dy = pos[None, :, 1] - pos[:, None, 1]
    d2 = dx * dx + dy * dy
    return [np.flatnonzero(row < radius * radius) for row in d2]


def test_regular_four():
    p = generate_regular(4)
    expected = {(0.25, 0.25), (0.75, 0.25), (0.25, 0.75), (0.75, 0.75)}
    assert {tuple(v) for v in p.positions} == expected
    assert np.all(p.volume == 0.25)


def test_regular_625_spacing():
    p = generate_regular(625)
    xs = np.unique(p.x)
    assert xs.size == 25
    assert np.allclose(np.diff(xs), 0.04, atol=1e-15)
    assert p.spacing == pytest.approx(0.04)


@pytest.mark.parametrize("N", [5, 1, 2.5, 8])
def test_rejects_non_square(N):
    with pytest.raises(ValueError):
        generate_regular(N)


def test_zero_jitter_is_regular():
    assert np.array_equal(generate_irregular(625, 0.0, 9).positions, generate_regular(625).positions)


def test_jitter_is_deterministic():
    a = generate_irregular(625, 0.45, 42)
    b = generate_irregular(625, 0.45, 42)
    assert np.array_equal(a.positions, b.positions)
    assert not np.array_equal(a.positions, generate_irregular(625, 0.45, 43).positions)


def test_jitter_bounds_and_separation():
    p = generate_irregular(625, 0.45, 42)
    base = generate_regular(625).positions
    assert np.all(np.abs(p.positions - base) <= 0.45 * 0.04 + 1e-15)
    assert np.all((p.positions >= 0) & (p.positions <= 1))
    d = np.sqrt(((p.positions[:, None] - p.positions[None]) ** 2).sum(-1))
    d[np.diag_indices_from(d)] = np.inf
    assert d.min() > 0


@pytest.mark.parametrize("a", [-0.1, 0.5, 0.7])
def test_jitter_amplitude_range(a):
    with pytest.raises(ValueError):
        generate_irregular(100, a, 1)


def test_particle_set_validation():
    with pytest.raises(ValueError):
        ParticleSet(np.array([[0.5, 1.2]]))
    p = generate_regular(4)
    with pytest.raises(ValueError):
        p.positions[0, 0] = 0.3


def test_csv_round_trip(tmp_path):
    p = generate_irregular(100, 0.3, 8)
    path = tmp_path / "p.csv"
    p.to_csv(path)
    assert path.read_text().splitlines()[0] == "x,y"
    q = ParticleSet.from_csv(path)
    assert np.array_equal(p.positions, q.positions)


def test_four_particle_neighbors():
    nl = build_neighbor_list(generate_regular(4), 0.6)
    assert np.all(nl.counts() == 3)
    # spacing 0.5 < 0.6 < diagonal 0.707: itself plus the two edge neighbours
    for i in range(4):
        assert i in nl.neighbors_of(i)


def test_tiny_radius_is_self_only():
    p = generate_irregular(196, 0.4, 2)
    nl = build_neighbor_list(p, 1e-9)
    assert np.array_equal(nl.indices, np.arange(196))


def test_against_brute_force_twenty_sets():
    gen = np.random.default_rng(77)
    for i, p in enumerate(seeded_sets()):
        radius = float(gen.uniform(0.05, 0.4))
        nl = build_neighbor_list(p, radius)
        ref = brute_neighbors(p.positions, radius)
        for a in range(p.count):
            assert np.array_equal(nl.neighbors_of(a), ref[a])
        assert nl.mean_neighbors == nl.total_pairs / p.count
        # symmetry and self inclusion
        pairs = {(a, int(b)) for a in range(p.count) for b in nl.neighbors_of(a)}
        assert all((b, a) in pairs for a, b in pairs)
        assert all((a, a) in pairs for a in range(p.count))


def test_random_uniform_sets_against_brute_force():
    gen = np.random.default_rng(123)
    for _ in range(20):
        N = int(gen.integers(5, 401))
        p = ParticleSet(gen.uniform(0, 1, size=(N, 2)))
        radius = float(gen.uniform(0.01, 1.0))
        nl = build_neighbor_list(p, radius)
        ref = brute_neighbors(p.positions, radius)
        for a in range(N):
            assert np.array_equal(nl.neighbors_of(a), ref[a])


def test_chunks_cover_full_list():
    p = generate_irregular(900, 0.45, 4)
    full = build_neighbor_list(p, 0.12)
    chunks = list(iter_neighbor_chunks(p, 0.12, max_pairs=5000))
    assert len(chunks) > 1
    assert np.array_equal(np.concatenate([c.queries for c in chunks]), np.arange(900))
    assert np.array_equal(np.concatenate([c.indices for c in chunks]), full.indices)


def test_rejects_bad_radius():
    p = generate_regular(4)
    for r in (0.0, -0.1, 1.5):
        with pytest.raises(ValueError):
            build_neighbor_list(p, r)


def _pair_probability_mean(N, r):
    """Expected neighbour count for a uniform density on the unit square.

    The probability that two uniform points lie closer than r is
    pi r^2 - 8 r^3 / 3 + r^4 / 2 for r <= 1.
    """
    return N * (math.pi * r * r - 8 * r ** 3 / 3 + r ** 4 / 2)


def test_mean_neighbors_625():
    nl = build_neighbor_list(generate_regular(625), 0.342)
    assert nl.mean_neighbors == pytest.approx(_pair_probability_mean(625, 0.342), rel=0.05)


def test_mean_interior_neighbors_table_row():
    assert mean_interior_neighbors(generate_regular(10000), 0.215) == pytest.approx(1436, rel=0.05)


def test_interior_neighbors_uniform_on_lattice():
    p = generate_regular(2500)
    nl = build_neighbor_list(p, 0.05)
    counts = nl.counts()[p.interior_mask(0.05)]
    assert np.all(counts == counts[0])


@pytest.mark.parametrize("r", [0.03, 0.05, 0.08])
def test_interior_density(r):
    N = 90000
    n = mean_interior_neighbors(generate_regular(N), r)
    assert 0.9 * math.pi * r * r * N <= n <= 1.1 * math.pi * r * r * N


def test_empty_interior():
    with pytest.raises(EmptyInteriorError):
        mean_interior_neighbors(generate_regular(4), 0.9)
