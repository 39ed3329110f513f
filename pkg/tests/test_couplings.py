import numpy as np
import pytest

from ionspin import (AccuracyError, CouplingModel, DegenerateModeError,
                     ForceSpec, InstabilityError, build_coupling_model,
                     combine_models, coupling_from_inverse_k,
                     coupling_from_modes, effective_field, eta_for_force,
                     eta_matrix, force_for_eta, make_microtrap_chain,
                     solve_paul_chain_equilibrium, stiff_limit_dipolar)
from ionspin.modes import ModeData, elasticity_matrix, normal_modes

TF = (1.4, 1.4, 1.0)
# stiffer radial trap so chains beyond two ions stay linear
TF5 = (5.0, 5.0, 1.0)


def chain(n, tol=1e-13):
    return solve_paul_chain_equilibrium(n, tol=tol)


def axis_modes(crystal, axis, tf=TF):
    return normal_modes(elasticity_matrix(crystal, axis, tf))


def test_two_ion_axial_coupling_value():
    # two modes at 1 and sqrt(3): J12 = -(1/2 - 1/(2*3)) = -1/3
    model = coupling_from_modes(axis_modes(chain(2), "z"), ForceSpec(f_z=1.0))
    assert model.j["z"][0, 1] == pytest.approx(-1.0 / 3.0, abs=1e-11)
    assert model.j["z"][0, 0] == 0.0


def test_two_ion_radial_coupling_value():
    model = coupling_from_modes(axis_modes(chain(2), "x"), ForceSpec(f_x=1.0))
    expected = 0.5 / (1.4 ** 2 * (1.4 ** 2 - 1.0))
    assert model.j["x"][0, 1] == pytest.approx(expected, abs=1e-11)
    assert model.j["x"][0, 1] > 0


def test_coupling_scales_with_force_squared():
    m1 = coupling_from_modes(axis_modes(chain(3), "x", TF5), ForceSpec(f_x=0.2))
    m2 = coupling_from_modes(axis_modes(chain(3), "x", TF5), ForceSpec(f_x=0.4))
    assert np.allclose(m2.j["x"], 4.0 * m1.j["x"], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("axis", ["x", "z"])
def test_mode_route_matches_inverse_stiffness_route(axis):
    c = chain(5)
    k = elasticity_matrix(c, axis, TF5)
    force = ForceSpec(**{"f_" + axis: 0.7})
    via_modes = coupling_from_modes(normal_modes(k), force)
    via_inverse = coupling_from_inverse_k(k, force)
    assert np.allclose(via_modes.j[axis], via_inverse.j[axis],
                       rtol=0, atol=1e-12)
    assert via_modes.b_prime[axis] == pytest.approx(
        via_inverse.b_prime[axis], abs=1e-12)
    assert via_modes.energy_offset == pytest.approx(
        via_inverse.energy_offset, abs=1e-12)


def test_axial_couplings_are_all_negative():
    model = coupling_from_modes(axis_modes(chain(8), "z"), ForceSpec(f_z=1.0))
    j = model.j["z"]
    off = j[~np.eye(8, dtype=bool)]
    assert np.all(off < 0)


def test_field_shift_is_minus_force_squared_over_omega_squared():
    model = coupling_from_modes(axis_modes(chain(2), "x"),
                                ForceSpec(f_x=1.0, b_x=0.2))
    assert model.b_prime["x"] == pytest.approx(0.2 - 1.0 / 1.4 ** 2, abs=1e-11)
    fields = effective_field({"x": 0.2}, TF, ForceSpec(f_x=1.0))
    assert fields["x"] == pytest.approx(0.2 - 1.0 / 1.4 ** 2, abs=1e-14)
    assert fields["y"] == 0.0


def test_energy_offset_two_ion_axial():
    # sum of full J is -2 F^2 / omega_z^2 = -2, trace is 2 J11 = -4/3:
    # offset = -1 - 2/3
    model = coupling_from_modes(axis_modes(chain(2), "z"), ForceSpec(f_z=1.0))
    assert model.energy_offset == pytest.approx(-5.0 / 3.0, abs=1e-10)


def test_eta_matrix_values_and_force_round_trip():
    modes = axis_modes(chain(2), "z")
    etas = eta_matrix(modes, ForceSpec(f_z=0.3))
    # center-of-mass column: M = 1/sqrt(2) at frequency 1
    assert etas.entries[0, 0] == pytest.approx(0.3 * 0.5, abs=1e-11)
    assert etas.entries.shape == (2, 2)
    f = force_for_eta(0.05, 1.4)
    assert eta_for_force(f, 1.4) == pytest.approx(0.05, rel=1e-14)
    with pytest.raises(ValueError):
        force_for_eta(0.05, 0.0)


def test_eta_rejects_zero_frequency_modes():
    bad = ModeData("x", np.array([0.0, 1.0]), np.eye(2),
                   np.array([True, False]))
    with pytest.raises(DegenerateModeError):
        eta_matrix(bad, 1.0)


def test_inverse_route_rejects_unstable_stiffness():
    c = chain(10)
    k = elasticity_matrix(c, "x", (1.05, 1.05, 1.0))
    with pytest.raises(InstabilityError):
        coupling_from_inverse_k(k, ForceSpec(f_x=1.0))


def test_dipolar_stiff_limit_values():
    tf = (10.0, 10.0, 1.0)
    c = make_microtrap_chain(3, 1.0, trap_freqs=tf)
    model = stiff_limit_dipolar(c, "x", tf, ForceSpec(f_x=1.0))
    assert model.j["x"][0, 1] == pytest.approx(1e-4, rel=1e-12)
    assert model.j["x"][0, 2] == pytest.approx(1.25e-5, rel=1e-12)
    assert model.provenance["axes"]["x"]["beta"] == pytest.approx(0.01)


def test_dipolar_matches_exact_coupling_when_stiff():
    w = 10.0 * np.sqrt(10.0)  # beta = 1e-3 at unit spacing
    tf = (w, w, 1.0)
    c = make_microtrap_chain(4, 1.0, trap_freqs=tf)
    exact = coupling_from_modes(axis_modes(c, "x", tf), ForceSpec(f_x=1.0))
    approx = stiff_limit_dipolar(c, "x", tf, ForceSpec(f_x=1.0))
    j_e = exact.j["x"][0, 1]
    j_a = approx.j["x"][0, 1]
    assert abs(j_a - j_e) / abs(j_e) < 0.01


def test_model_validation():
    with pytest.raises(ValueError):
        CouplingModel({"x": np.array([[0.0, 1.0], [2.0, 0.0]])}, {})
    with pytest.raises(ValueError):
        CouplingModel({"x": np.array([[1.0, 0.5], [0.5, 0.0]])}, {})


def test_json_round_trip_is_exact(tmp_path):
    model = coupling_from_modes(axis_modes(chain(4), "x", TF5),
                                ForceSpec(f_x=0.37, b_x=0.11))
    path = tmp_path / "model.json"
    model.dump(path)
    back = CouplingModel.load(path)
    assert np.array_equal(back.j["x"], model.j["x"])
    assert back.b_prime == model.b_prime
    assert back.energy_offset == model.energy_offset
    assert back.provenance == model.provenance


def test_combine_models_rejects_axis_collision():
    m = coupling_from_modes(axis_modes(chain(2), "x"), ForceSpec(f_x=1.0))
    with pytest.raises(ValueError):
        combine_models(m, m)


def test_build_model_merges_axes_and_bare_fields():
    c = chain(2)
    model = build_coupling_model(c, TF, ForceSpec(f_x=0.5, f_z=0.3, b_y=0.7))
    assert set(model.j) == {"x", "z"}
    assert model.b_prime["y"] == 0.7
    assert model.b_prime["x"] == pytest.approx(-0.25 / 1.4 ** 2, abs=1e-12)
    assert model.n_ions == 2
    # per-axis offsets add up
    mx = coupling_from_modes(axis_modes(c, "x"), ForceSpec(f_x=0.5))
    mz = coupling_from_modes(axis_modes(c, "z"), ForceSpec(f_z=0.3))
    assert model.energy_offset == pytest.approx(
        mx.energy_offset + mz.energy_offset, abs=1e-13)


def test_negative_force_rejected():
    with pytest.raises(ValueError):
        ForceSpec(f_x=-1.0)
