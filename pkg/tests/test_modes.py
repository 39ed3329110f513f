import numpy as np
import pytest

from ionspin import (GeometryError, InstabilityError, beta, elasticity_matrix,
                     make_hex_lattice, make_microtrap_chain, normal_modes,
                     radial_freq_for_beta, solve_paul_chain_equilibrium,
                     stiffness_sign)
from ionspin.crystal import Geometry

TF = (1.4, 1.4, 1.0)
# longer chains need a stiffer radial trap to stay linear
TF5 = (5.0, 5.0, 1.0)


def two_ion_chain():
    return solve_paul_chain_equilibrium(2, tol=1e-13)


def test_two_ion_axial_stiffness_matrix():
    k = elasticity_matrix(two_ion_chain(), "z", TF)
    assert np.allclose(k.entries, [[2.0, -1.0], [-1.0, 2.0]], atol=1e-11)
    assert k.c_alpha == -2.0


def test_two_ion_axial_frequencies():
    modes = normal_modes(elasticity_matrix(two_ion_chain(), "z", TF))
    assert np.allclose(modes.frequencies, [1.0, np.sqrt(3.0)], atol=1e-11)


def test_two_ion_radial_frequencies():
    modes = normal_modes(elasticity_matrix(two_ion_chain(), "x", TF))
    expected = [np.sqrt(1.4 ** 2 - 1.0), 1.4]
    assert np.allclose(modes.frequencies, expected, atol=1e-11)


def test_axial_com_is_lowest_radial_com_is_highest():
    c = solve_paul_chain_equilibrium(6)
    com = np.ones(6) / np.sqrt(6.0)
    axial = normal_modes(elasticity_matrix(c, "z", TF5))
    radial = normal_modes(elasticity_matrix(c, "x", TF5))
    assert abs(abs(com @ axial.mode_matrix[:, 0]) - 1.0) < 1e-9
    assert abs(axial.frequencies[0] - 1.0) < 1e-11
    assert abs(abs(com @ radial.mode_matrix[:, -1]) - 1.0) < 1e-9
    assert abs(radial.frequencies[-1] - 5.0) < 1e-11


def test_mode_matrix_is_orthonormal_and_reconstructs_stiffness():
    c = solve_paul_chain_equilibrium(7)
    k = elasticity_matrix(c, "x", TF5)
    modes = normal_modes(k)
    m = modes.mode_matrix
    assert np.allclose(m.T @ m, np.eye(7), atol=1e-12)
    rebuilt = m @ np.diag(modes.frequencies ** 2) @ m.T
    assert np.allclose(rebuilt, k.entries, atol=1e-10)


def test_frequencies_are_sorted_ascending():
    c = solve_paul_chain_equilibrium(9)
    for axis in ("x", "z"):
        f = normal_modes(elasticity_matrix(c, axis, TF5)).frequencies
        assert np.all(np.diff(f) >= 0)


def test_mode_sign_convention_is_deterministic():
    c = solve_paul_chain_equilibrium(5)
    m1 = normal_modes(elasticity_matrix(c, "z", TF)).mode_matrix
    m2 = normal_modes(elasticity_matrix(c, "z", TF)).mode_matrix
    assert np.array_equal(m1, m2)
    for col in m1.T:
        assert col[np.argmax(np.abs(col))] > 0


def test_radial_instability_below_critical_anisotropy():
    # a long chain buckles when the radial confinement is too weak
    c = solve_paul_chain_equilibrium(10)
    with pytest.raises(InstabilityError):
        normal_modes(elasticity_matrix(c, "x", (1.05, 1.05, 1.0)))


def test_stiffness_signs():
    assert stiffness_sign(Geometry.PAUL_CHAIN, "x") == 1.0
    assert stiffness_sign(Geometry.PAUL_CHAIN, "y") == 1.0
    assert stiffness_sign(Geometry.PAUL_CHAIN, "z") == -2.0
    assert stiffness_sign(Geometry.HEX_LATTICE, "y") == 1.0
    with pytest.raises(GeometryError):
        stiffness_sign(Geometry.HEX_LATTICE, "x")


def test_hex_out_of_plane_com_sits_at_trap_frequency():
    tf = (1.0, 10.0, 1.0)
    c = make_hex_lattice(2, 1.0, tf)
    modes = normal_modes(elasticity_matrix(c, "y", tf))
    n = c.n_ions
    com = np.ones(n) / np.sqrt(n)
    # the uniform displacement feels only the trap, and every other mode is
    # softened by the repulsion, so the bunch of frequencies ends at 10
    assert abs(modes.frequencies[-1] - 10.0) < 1e-10
    assert abs(abs(com @ modes.mode_matrix[:, -1]) - 1.0) < 1e-9
    assert np.all(modes.frequencies[:-1] < 10.0)


# beta = |c| / (omega^2 d0^3) with d0 the central spacing.
def test_beta_two_ion_axial_is_one():
    b = beta(two_ion_chain(), "z", TF)
    assert b.value == pytest.approx(1.0, abs=1e-11)
    assert b.d0 == pytest.approx(2.0 * 0.6299605249474366, abs=1e-12)


def test_beta_two_ion_radial():
    b = beta(two_ion_chain(), "x", TF)
    assert b.value == pytest.approx(1.0 / (1.4 ** 2 * 2.0), abs=1e-11)


def test_beta_microtrap_stiff_regime():
    c = make_microtrap_chain(2, 1.0, trap_freqs=(10.0, 10.0, 1.0))
    b = beta(c, "x", (10.0, 10.0, 1.0))
    assert b.value == pytest.approx(0.01, abs=1e-14)


def test_radial_freq_for_beta_round_trips():
    c = solve_paul_chain_equilibrium(4)
    for target in (0.05, 0.3, 1.0):
        w = radial_freq_for_beta(c, "x", target)
        tf = (w, w, 1.0)
        assert beta(c, "x", tf).value == pytest.approx(target, rel=1e-12)


def test_elasticity_scale_with_distance():
    # doubling all distances divides every off-diagonal entry by eight
    tf = (5.0, 5.0, 1.0)
    k1 = elasticity_matrix(make_microtrap_chain(3, 1.0, tf), "x", tf)
    k2 = elasticity_matrix(make_microtrap_chain(3, 2.0, tf), "x", tf)
    off1 = k1.entries[0, 1]
    off2 = k2.entries[0, 1]
    assert off1 == pytest.approx(8.0 * off2, rel=1e-12)
