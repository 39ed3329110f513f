import numpy as np
import pytest

from ionspin import (ConvergenceError, Geometry, GeometryError, TrapConfig,
                     hex_ion_count, hex_shells_for_count, make_hex_lattice,
                     make_microtrap_chain, potential_gradient,
                     solve_paul_chain_equilibrium)
from ionspin.crystal import _axial_gradient, _axial_potential

# Closed-form equilibria: two ions sit at +-(1/4)^(1/3), three ions at
# 0 and +-(5/4)^(1/3).
U2 = 0.6299605249474366
U3 = 1.0772173450159418


def test_two_ion_positions_match_closed_form():
    c = solve_paul_chain_equilibrium(2, tol=1e-13)
    assert np.allclose(c.z, [-U2, U2], atol=1e-12)
    assert abs(c.z[1] - c.z[0] - 2.0 * U2) < 1e-12
    # cube of the separation is exactly 2
    assert abs((c.z[1] - c.z[0]) ** 3 - 2.0) < 1e-11


def test_three_ion_positions_match_closed_form():
    c = solve_paul_chain_equilibrium(3, tol=1e-13)
    assert np.allclose(c.z, [-U3, 0.0, U3], atol=1e-12)


def test_single_ion_sits_at_origin():
    c = solve_paul_chain_equilibrium(1)
    assert c.n_ions == 1
    assert np.all(c.positions == 0.0)


@pytest.mark.parametrize("n", [2, 5, 10, 25, 50, 100])
def test_equilibrium_gradient_vanishes(n):
    c = solve_paul_chain_equilibrium(n)
    assert c.residual < 1e-10
    assert np.max(np.abs(potential_gradient(c))) < 1e-10


@pytest.mark.parametrize("n", [4, 11, 30])
def test_equilibrium_is_mirror_symmetric_and_ordered(n):
    z = solve_paul_chain_equilibrium(n).z
    assert np.max(np.abs(z + z[::-1])) < 1e-12
    assert np.all(np.diff(z) > 0)


def test_outer_spacing_exceeds_central_spacing():
    z = solve_paul_chain_equilibrium(20).z
    gaps = np.diff(z)
    assert gaps[0] > gaps[len(gaps) // 2]
    assert gaps[-1] > gaps[len(gaps) // 2]


def test_central_spacing_shrinks_with_ion_number():
    d = [solve_paul_chain_equilibrium(n).central_spacing()
         for n in (5, 10, 20, 40)]
    assert np.all(np.diff(d) < 0)


def test_gradient_is_consistent_with_potential():
    rng = np.random.default_rng(7)
    z = np.sort(rng.uniform(-3, 3, 6))
    z += np.arange(6) * 0.2  # enforce separation
    grad = _axial_gradient(z)
    eps = 1e-6
    for i in range(6):
        zp, zm = z.copy(), z.copy()
        zp[i] += eps
        zm[i] -= eps
        fd = (_axial_potential(zp) - _axial_potential(zm)) / (2 * eps)
        assert abs(grad[i] - fd) < 1e-6


def test_nonconvergence_raises_with_residual():
    with pytest.raises(ConvergenceError) as err:
        solve_paul_chain_equilibrium(30, max_iter=2)
    assert err.value.residual is not None
    assert err.value.residual > 0


def test_microtrap_chain_is_uniform():
    c = make_microtrap_chain(5, 1.5)
    assert c.config.geometry is Geometry.MICROTRAP_CHAIN
    assert np.allclose(np.diff(c.z), 1.5)
    assert abs(np.mean(c.z)) < 1e-12
    assert c.central_spacing() == pytest.approx(1.5)


def test_microtrap_requires_spacing():
    with pytest.raises(ValueError):
        TrapConfig(Geometry.MICROTRAP_CHAIN, 4, (1.0, 1.0, 1.0), d0=None)
    with pytest.raises(ValueError):
        make_microtrap_chain(4, -1.0)


@pytest.mark.parametrize("shells,count", [(0, 1), (1, 7), (2, 19), (3, 37)])
def test_hex_shell_counts(shells, count):
    assert hex_ion_count(shells) == count
    assert hex_shells_for_count(count) == shells
    assert make_hex_lattice(shells, 1.0, (1.0, 10.0, 1.0)).n_ions == count


def test_hex_rejects_open_shell_count():
    with pytest.raises(ValueError):
        hex_shells_for_count(8)


def test_hex_nearest_neighbor_distance_is_d0():
    c = make_hex_lattice(2, 0.75, (1.0, 10.0, 1.0))
    d = c.pair_distances()
    iu = np.triu_indices(c.n_ions, 1)
    assert d[iu].min() == pytest.approx(0.75, rel=1e-12)
    # the lattice is planar: nothing along the transverse axis
    assert np.all(c.positions[:, 1] == 0.0)


def test_hex_lattice_is_centered():
    c = make_hex_lattice(3, 1.0, (1.0, 10.0, 1.0))
    assert np.max(np.abs(c.positions.mean(axis=0))) < 1e-12
    # six ions in the first ring, all at distance d0 from the center
    r = np.linalg.norm(c.positions, axis=1)
    assert np.sum(np.abs(r - 1.0) < 1e-9) == 6


def test_axial_trap_frequency_is_the_unit():
    with pytest.raises(ValueError):
        TrapConfig(Geometry.PAUL_CHAIN, 3, (1.4, 1.4, 1.2))
    with pytest.raises(ValueError):
        TrapConfig(Geometry.PAUL_CHAIN, 3, (1.4, -1.0, 1.0))


def test_potential_gradient_rejects_other_geometries():
    c = make_microtrap_chain(3, 1.0)
    with pytest.raises(GeometryError):
        potential_gradient(c)


def test_positions_are_read_only():
    c = solve_paul_chain_equilibrium(4)
    with pytest.raises(ValueError):
        c.positions[0, 2] = 0.0
