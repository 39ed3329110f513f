"""Effective spin-spin couplings transmitted by the vibrational modes.

A state-dependent pushing force F_alpha along axis alpha turns the phonon
bus into an Ising-type coupling.  With the mode expansion (frequencies
omega_n, orthonormal mode matrix M) the coupling matrix is

    J_ij = - sum_n (F^2 / omega_n^2) M_in M_jn = -F^2 (K^-1)_ij

and the per-mode displacement amplitudes are

    eta_in = F M_in / (sqrt(2) omega_n^(3/2)).

Both routes to J are kept independent so they can be checked against each
other.  The exact frame transformation also produces a uniform field shift
along the forced axis equal to the row sum of the full J matrix, which is
-F^2 / omega_alpha^2 for a common trap; the shifted field B' = B - F^2 /
omega_alpha^2 lowers the energy of the pushed spin state, as it must for a
displaced oscillator.  Diagonal entries J_ii never act on the spins; they
are stripped into a scalar energy offset.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .crystal import IonCrystal
from .errors import AccuracyError, DegenerateModeError, InstabilityError
from .modes import (AXES, BetaParam, ModeData, beta, elasticity_matrix,
                    normal_modes, stiffness_sign)

_SCHEMA = "ionspin.coupling_model/1"


@dataclass(frozen=True)
class ForceSpec:
    """Per-axis pushing-force amplitudes and bare transverse fields.

    Forces are non-negative; natural units throughout.
    """

    f_x: float = 0.0
    f_y: float = 0.0
    f_z: float = 0.0
    b_x: float = 0.0
    b_y: float = 0.0
    b_z: float = 0.0

    def __post_init__(self):
        for axis in AXES:
            if self.force(axis) < 0:
                raise ValueError("force amplitudes must be >= 0")

    def force(self, axis):
        return float(getattr(self, "f_" + axis))

    def bare_field(self, axis):
        return float(getattr(self, "b_" + axis))

    @property
    def forced_axes(self):
        return tuple(a for a in AXES if self.force(a) > 0)


def force_for_eta(eta, omega_ref):
    """Force amplitude that realizes displacement parameter eta.

    eta = F sqrt(1 / (2 omega)) / omega evaluated at a reference mode
    frequency, by default the center-of-mass mode of the forced axis.
    """
    if omega_ref <= 0:
        raise ValueError("reference frequency must be positive")
    return float(eta * np.sqrt(2.0) * omega_ref ** 1.5)


def eta_for_force(force, omega_ref):
    """Displacement parameter of a force at a reference mode frequency."""
    if omega_ref <= 0:
        raise ValueError("reference frequency must be positive")
    return float(force / (np.sqrt(2.0) * omega_ref ** 1.5))


@dataclass
class EtaMatrix:
    """Per-ion, per-mode displacement parameters for one axis."""

    axis: str
    entries: np.ndarray  # shape (n_ions, n_modes)
    mode_frequencies: np.ndarray

    @property
    def n_ions(self):
        return self.entries.shape[0]


@dataclass
class CouplingModel:
    """Zero-diagonal coupling matrices plus effective fields per axis.

    j maps axis -> symmetric (N, N) matrix with zero diagonal; b_prime maps
    axis -> uniform effective field (bare field plus force-induced shift);
    energy_offset collects all spin-independent constants produced by the
    frame transformation.  provenance records how the model was built.
    """

    j: dict
    b_prime: dict
    energy_offset: float = 0.0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        for axis, mat in self.j.items():
            mat = np.array(mat, dtype=float)
            if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
                raise ValueError("J matrices must be square")
            if np.max(np.abs(mat - mat.T)) > 1e-12:
                raise ValueError("J matrices must be symmetric")
            if np.max(np.abs(np.diag(mat))) > 0:
                raise ValueError("J matrices must have zero diagonal")
            mat.setflags(write=False)
            self.j[axis] = mat

    @property
    def n_ions(self):
        for mat in self.j.values():
            return mat.shape[0]
        if "n_ions" in self.provenance:
            return int(self.provenance["n_ions"])
        raise ValueError("empty coupling model")

    @property
    def axes(self):
        return tuple(sorted(set(self.j) | set(self.b_prime)))

    def to_json_dict(self):
        axes = {}
        for axis in self.axes:
            entry = {}
            if axis in self.j:
                entry["j"] = self.j[axis].tolist()
            if axis in self.b_prime:
                entry["b_prime"] = self.b_prime[axis]
            axes[axis] = entry
        return {
            "schema": _SCHEMA,
            "n_ions": self.n_ions,
            "axes": axes,
            "energy_offset": self.energy_offset,
            "provenance": self.provenance,
        }

    @classmethod
    def from_json_dict(cls, data):
        if data.get("schema") != _SCHEMA:
            raise ValueError("unrecognized schema %r" % data.get("schema"))
        j = {}
        b_prime = {}
        for axis, entry in data["axes"].items():
            if "j" in entry:
                j[axis] = np.array(entry["j"], dtype=float)
            if "b_prime" in entry:
                b_prime[axis] = float(entry["b_prime"])
        return cls(j, b_prime, float(data.get("energy_offset", 0.0)),
                   dict(data.get("provenance", {})))

    def dump(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))


def combine_models(*models):
    """Merge single-axis models with disjoint axes into one."""
    j = {}
    b_prime = {}
    offset = 0.0
    provenance = {}
    for model in models:
        for axis in model.j:
            if axis in j:
                raise ValueError("axis %s appears in more than one model" % axis)
            j[axis] = model.j[axis]
        for axis in model.b_prime:
            if axis in b_prime:
                raise ValueError("axis %s appears in more than one model" % axis)
            b_prime[axis] = model.b_prime[axis]
        offset += model.energy_offset
        provenance.update(model.provenance.get("axes", {}))
    return CouplingModel(j, b_prime, offset, {"axes": provenance})


def eta_matrix(modes, force):
    """Displacement parameters eta_in for every ion and mode of one axis."""
    f = force.force(modes.axis) if isinstance(force, ForceSpec) else float(force)
    if np.any(modes.zero_modes):
        raise DegenerateModeError(
            "axis %s has zero-frequency modes; eta is undefined" % modes.axis)
    omega = modes.frequencies
    entries = f * modes.mode_matrix / (np.sqrt(2.0) * omega ** 1.5)[None, :]
    return EtaMatrix(modes.axis, entries, omega.copy())


def _package_single_axis(axis, j_full, f, bare_b, provenance):
    """Split a full coupling matrix into model fields.

    Row sums of the full matrix give the site fields produced by the frame
    transformation; they are uniform for a common trap, so their mean is
    stored (spread is checked).  The constant part is
    (1/2) sum_ij J_ij + (1/2) tr J.
    """
    row_sums = j_full.sum(axis=1)
    shift = float(row_sums.mean())
    if np.max(np.abs(row_sums - shift)) > 1e-9 * max(1.0, abs(shift)):
        raise AccuracyError("site-dependent field shift on axis %s" % axis)
    offset = 0.5 * float(j_full.sum()) + 0.5 * float(np.trace(j_full))
    j = j_full.copy()
    np.fill_diagonal(j, 0.0)
    j = 0.5 * (j + j.T)
    return CouplingModel({axis: j}, {axis: bare_b + shift}, offset,
                         {"axes": {axis: provenance}})


def coupling_from_modes(modes, force):
    """Coupling model for one axis from its mode expansion.

    Evaluates both mode-sum forms (the F^2/omega^2 sum and the
    2 eta eta omega sum) and verifies they agree to 1e-12 before packaging.
    """
    if not isinstance(force, ForceSpec):
        raise ValueError("force must be a ForceSpec")
    f = force.force(modes.axis)
    etas = eta_matrix(modes, force)
    omega = modes.frequencies
    m = modes.mode_matrix
    j_full = -(m * (f ** 2 / omega ** 2)[None, :]) @ m.T
    j_eta = -2.0 * (etas.entries * omega[None, :]) @ etas.entries.T
    scale = max(1.0, np.max(np.abs(j_full)))
    if np.max(np.abs(j_full - j_eta)) > 1e-12 * scale:
        raise AccuracyError("mode-sum forms of the coupling disagree")
    provenance = {
        "route": "mode_sum",
        "force": f,
        "bare_field": force.bare_field(modes.axis),
        "mode_frequencies": omega.tolist(),
    }
    return _package_single_axis(modes.axis, j_full, f,
                                force.bare_field(modes.axis), provenance)


def coupling_from_inverse_k(elasticity, force):
    """Coupling model for one axis via J = -F^2 K^-1.

    Independent of the mode route: no eigendecomposition is used.
    """
    if not isinstance(force, ForceSpec):
        raise ValueError("force must be a ForceSpec")
    f = force.force(elasticity.axis)
    sign, logdet = np.linalg.slogdet(elasticity.entries)
    evals_min = np.linalg.eigvalsh(elasticity.entries)[0]
    if sign <= 0 or evals_min <= 0:
        raise InstabilityError(
            "axis %s stiffness matrix is not positive definite" % elasticity.axis)
    j_full = -(f ** 2) * np.linalg.inv(elasticity.entries)
    j_full = 0.5 * (j_full + j_full.T)
    provenance = {
        "route": "inverse_k",
        "force": f,
        "bare_field": force.bare_field(elasticity.axis),
    }
    return _package_single_axis(elasticity.axis, j_full, f,
                                force.bare_field(elasticity.axis), provenance)


def stiff_limit_dipolar(crystal, axis, trap_freqs, force):
    """Dipolar approximation J_ij = c F^2 / (omega^4 |r_i - r_j|^3).

    Valid in the stiff regime (small beta); the returned provenance carries
    the beta value actually realized by the configuration.
    """
    if not isinstance(force, ForceSpec):
        raise ValueError("force must be a ForceSpec")
    f = force.force(axis)
    c = stiffness_sign(crystal.config.geometry, axis)
    omega = float(trap_freqs[AXES.index(axis)])
    dist = crystal.pair_distances()
    n = crystal.n_ions
    with np.errstate(divide="ignore"):
        j = c * f ** 2 / (omega ** 4 * dist ** 3)
    np.fill_diagonal(j, 0.0)
    b = beta(crystal, axis, trap_freqs) if n >= 2 else None
    shift = -f ** 2 / omega ** 2
    offset = 0.5 * float(j.sum()) + 0.5 * n * shift + 0.5 * n * shift
    provenance = {
        "route": "stiff_limit",
        "force": f,
        "bare_field": force.bare_field(axis),
        "beta": None if b is None else b.value,
    }
    return CouplingModel({axis: j}, {axis: force.bare_field(axis) + shift},
                         offset, {"axes": {axis: provenance}})


def effective_field(bare_fields, trap_freqs, force):
    """Effective per-axis fields after the frame transformation.

    B'_alpha = B_alpha - F_alpha^2 / omega_alpha^2.  The shift is the row
    sum of the full coupling matrix of a common trap; it is negative because
    pushing lowers the energy of the pushed spin state.
    """
    if not isinstance(force, ForceSpec):
        raise ValueError("force must be a ForceSpec")
    result = {}
    for i, axis in enumerate(AXES):
        omega = float(trap_freqs[i])
        if omega <= 0:
            raise ValueError("trap frequencies must be positive")
        bare = float(bare_fields.get(axis, 0.0)) if isinstance(bare_fields, dict) \
            else float(bare_fields[i])
        result[axis] = bare - force.force(axis) ** 2 / omega ** 2
    return result


def build_coupling_model(crystal, trap_freqs, force):
    """Multi-axis coupling model for a crystal under a ForceSpec.

    Forced axes get mode-route couplings; axes with only a bare field
    contribute a field entry.  Offsets accumulate across axes.
    """
    models = []
    plain_fields = {}
    for axis in AXES:
        if force.force(axis) > 0:
            k = elasticity_matrix(crystal, axis, trap_freqs)
            modes = normal_modes(k)
            models.append(coupling_from_modes(modes, force))
        elif force.bare_field(axis) != 0.0:
            plain_fields[axis] = force.bare_field(axis)
    if models:
        model = combine_models(*models)
    else:
        model = CouplingModel({}, {}, 0.0, {"axes": {}})
    model.b_prime.update(plain_fields)
    model.provenance.setdefault("geometry", crystal.config.geometry.value)
    model.provenance.setdefault("n_ions", crystal.n_ions)
    model.provenance.setdefault("trap_freqs", list(trap_freqs))
    return model
