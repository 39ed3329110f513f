"""Small-oscillation analysis around an ion crystal equilibrium.

The elasticity matrix along a trap axis alpha is

    K_ii = omega_alpha^2 - c_alpha * sum_{j != i} |r_i - r_j|^-3
    K_ij = c_alpha / |r_i - r_j|^3          (i != j)

in natural units, with c = +1 for displacements transverse to the
inter-ion separations and c = -2 along them.  For chains that means
c_x = c_y = +1 and c_z = -2; for the planar hex lattice only the
out-of-plane axis (y) is supported, with c = +1.
"""

from dataclasses import dataclass

import numpy as np

from .crystal import Geometry, IonCrystal
from .errors import GeometryError, InstabilityError

AXES = ("x", "y", "z")

#: Fock-style tolerance for treating an eigenvalue of K as zero.
_ZERO_TOL = 1e-12


def stiffness_sign(geometry, axis):
    """Coulomb coupling sign c_alpha for the given geometry and axis."""
    if axis not in AXES:
        raise ValueError("axis must be one of %s" % (AXES,))
    geometry = Geometry(geometry)
    if geometry is Geometry.HEX_LATTICE:
        if axis != "y":
            raise GeometryError("hex lattice supports the out-of-plane axis y only")
        return 1.0
    return -2.0 if axis == "z" else 1.0


@dataclass
class ElasticityMatrix:
    """Symmetric stiffness matrix for one axis of a crystal."""

    axis: str
    entries: np.ndarray
    c_alpha: float
    trap_freq: float

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        entries.setflags(write=False)
        self.entries = entries

    @property
    def n_ions(self):
        return self.entries.shape[0]


@dataclass
class ModeData:
    """Normal modes of one axis: ascending frequencies and mode matrix.

    Column n of mode_matrix is the eigenvector for frequencies[n].  Each
    column is normalized and its largest-magnitude component is positive
    (ties broken by lowest ion index).  zero_modes flags entries whose
    squared frequency was clamped to zero.
    """

    axis: str
    frequencies: np.ndarray
    mode_matrix: np.ndarray
    zero_modes: np.ndarray

    @property
    def n_ions(self):
        return self.mode_matrix.shape[0]


@dataclass(frozen=True)
class BetaParam:
    """Stiffness ratio beta = |c_alpha| / (omega_alpha^2 d0^3)."""

    axis: str
    value: float
    d0: float


def elasticity_matrix(crystal, axis, trap_freqs):
    """Build the stiffness matrix of `crystal` along `axis`.

    trap_freqs is the (omega_x, omega_y, omega_z) triple in units of
    omega_z; the frequency matching `axis` is used.
    """
    if not isinstance(crystal, IonCrystal):
        raise ValueError("crystal must be an IonCrystal")
    c = stiffness_sign(crystal.config.geometry, axis)
    omega = float(trap_freqs[AXES.index(axis)])
    if omega <= 0:
        raise ValueError("trap frequency must be positive")
    n = crystal.n_ions
    if n == 1:
        entries = np.array([[omega ** 2]])
        return ElasticityMatrix(axis, entries, c, omega)
    dist = crystal.pair_distances()
    off = dist + np.eye(n)  # placeholder diagonal, excluded below
    if np.any(off <= 0):
        raise GeometryError("coincident ions in crystal")
    inv3 = 1.0 / off ** 3
    np.fill_diagonal(inv3, 0.0)
    entries = c * inv3
    np.fill_diagonal(entries, omega ** 2 - c * inv3.sum(axis=1))
    return ElasticityMatrix(axis, entries, c, omega)


def normal_modes(elasticity):
    """Diagonalize an ElasticityMatrix into a ModeData record.

    Raises InstabilityError when an eigenvalue is below -1e-12 (for a radial
    axis of a chain this is the zig-zag transition).  Eigenvalues within
    1e-12 of zero are clamped to exactly zero and flagged.
    """
    evals, evecs = np.linalg.eigh(elasticity.entries)
    if evals[0] < -_ZERO_TOL:
        raise InstabilityError(
            "axis %s is unstable: min eigenvalue %.3e < 0"
            % (elasticity.axis, evals[0]))
    zero = np.abs(evals) < _ZERO_TOL
    evals = np.where(zero, 0.0, evals)
    for k in range(evecs.shape[1]):
        lead = np.argmax(np.abs(evecs[:, k]))
        if evecs[lead, k] < 0:
            evecs[:, k] = -evecs[:, k]
    return ModeData(elasticity.axis, np.sqrt(evals), evecs, zero)


def beta(crystal, axis, trap_freqs):
    """Dimensionless stiffness ratio for `axis` of a chain or hex lattice.

    Uses the central nearest-neighbor spacing for the Paul chain and the
    configured lattice constant otherwise.  Small beta is the stiff
    (dipolar) regime; beta >= 1 signals the zig-zag instability for
    transverse axes.
    """
    if crystal.n_ions < 2:
        raise ValueError("beta needs at least two ions")
    c = stiffness_sign(crystal.config.geometry, axis)
    omega = float(trap_freqs[AXES.index(axis)])
    d0 = crystal.central_spacing()
    return BetaParam(axis, abs(c) / (omega ** 2 * d0 ** 3), d0)


def radial_freq_for_beta(crystal, axis, beta_target):
    """Trap frequency along `axis` that realizes a given beta for `crystal`."""
    if beta_target <= 0:
        raise ValueError("beta must be positive")
    c = stiffness_sign(crystal.config.geometry, axis)
    d0 = crystal.central_spacing()
    return float(np.sqrt(abs(c) / (beta_target * d0 ** 3)))
