"""Ion crystal geometries and equilibrium positions.

All quantities are expressed in natural units hbar = m = e^2 = omega_z = 1,
with the length unit l = (e^2 / (m omega_z^2))**(1/3).  Trap frequencies are
therefore ratios to the axial frequency, and omega_z = 1 internally.

Three geometries are supported: a chain of individually trapped ions with a
fixed lattice constant (microtrap chain), the self-organized Coulomb chain of
a common linear trap (Paul chain), and a planar triangular lattice built from
closed shells (hex lattice).  Chains lie along z; the hex lattice lies in the
x-z plane.
"""

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConvergenceError, GeometryError


class Geometry(str, Enum):
    MICROTRAP_CHAIN = "microtrap_chain"
    PAUL_CHAIN = "paul_chain"
    HEX_LATTICE = "hex_lattice"


def hex_ion_count(shells):
    """Number of ions in a triangular lattice with the given closed shells."""
    if shells < 0:
        raise ValueError("shell count must be >= 0")
    return 1 + 3 * shells * (shells + 1)


def hex_shells_for_count(n_ions):
    """Inverse of :func:`hex_ion_count`; raises ValueError for open shells."""
    for s in range(0, 200):
        count = hex_ion_count(s)
        if count == n_ions:
            return s
        if count > n_ions:
            break
    raise ValueError("%d ions is not a closed-shell hex lattice" % n_ions)


@dataclass(frozen=True)
class TrapConfig:
    """Static description of the trap holding the crystal.

    Parameters
    ----------
    geometry : Geometry
        One of the three supported layouts.
    n_ions : int
        Ion count; for the hex lattice it must be a closed-shell count
        1 + 3 s (s + 1) (1, 7, 19, ...).
    trap_freqs : tuple of float
        (omega_x, omega_y, omega_z) in units of omega_z, so the last entry
        must equal 1.
    d0 : float or None
        Lattice constant for the microtrap chain and hex lattice; must be
        None for the Paul chain, whose spacing follows from the equilibrium.
    """

    geometry: Geometry
    n_ions: int
    trap_freqs: tuple = (1.0, 1.0, 1.0)
    d0: float = None

    def __post_init__(self):
        geometry = Geometry(self.geometry)
        object.__setattr__(self, "geometry", geometry)
        object.__setattr__(self, "trap_freqs", tuple(float(w) for w in self.trap_freqs))
        if self.n_ions < 1:
            raise ValueError("n_ions must be >= 1")
        if len(self.trap_freqs) != 3:
            raise ValueError("trap_freqs must be (omega_x, omega_y, omega_z)")
        if any(w <= 0 for w in self.trap_freqs):
            raise ValueError("trap frequencies must be positive")
        if abs(self.trap_freqs[2] - 1.0) > 1e-12:
            raise ValueError("omega_z must equal 1 (frequencies are ratios to omega_z)")
        if geometry is Geometry.PAUL_CHAIN:
            if self.d0 is not None:
                raise ValueError("d0 is not configurable for a Paul chain")
        else:
            if self.d0 is None or self.d0 <= 0:
                raise ValueError("%s requires a positive d0" % geometry.value)
        if geometry is Geometry.HEX_LATTICE:
            hex_shells_for_count(self.n_ions)


@dataclass
class IonCrystal:
    """Equilibrium positions (read-only) together with their trap."""

    positions: np.ndarray
    config: TrapConfig
    residual: float = 0.0

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.shape != (self.config.n_ions, 3):
            raise ValueError("positions must have shape (n_ions, 3)")
        positions.setflags(write=False)
        self.positions = positions

    @property
    def n_ions(self):
        return self.config.n_ions

    @property
    def z(self):
        return self.positions[:, 2]

    def pair_distances(self):
        """Euclidean distance matrix with zeros on the diagonal."""
        delta = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt((delta ** 2).sum(axis=-1))

    def central_spacing(self):
        """Nearest-neighbor distance at the chain center.

        For chains this is the gap between the two middle ions (for an odd
        count the two central gaps coincide by symmetry); for the hex
        lattice it is the configured lattice constant.
        """
        if self.config.geometry is Geometry.HEX_LATTICE:
            return self.config.d0
        if self.n_ions < 2:
            raise ValueError("central spacing needs at least two ions")
        z = np.sort(self.z)
        mid = self.n_ions // 2
        return z[mid] - z[mid - 1]


def make_microtrap_chain(n_ions, d0, trap_freqs=(1.0, 1.0, 1.0)):
    """Chain of individually trapped ions with fixed spacing d0 along z."""
    config = TrapConfig(Geometry.MICROTRAP_CHAIN, n_ions, trap_freqs, d0)
    z = d0 * (np.arange(n_ions) - 0.5 * (n_ions - 1))
    positions = np.zeros((n_ions, 3))
    positions[:, 2] = z
    return IonCrystal(positions, config)


def make_hex_lattice(shells, d0, trap_freqs=(1.0, 1.0, 1.0)):
    """Closed-shell triangular lattice in the x-z plane.

    The lattice is built from axial coordinates (a, b) on the basis
    (d0, 0, 0) and (d0/2, 0, d0*sqrt(3)/2), keeping sites within the given
    number of shells of the center.  Shell s adds 6 s ions for a total of
    1 + 3 s (s + 1).
    """
    n_ions = hex_ion_count(shells)
    config = TrapConfig(Geometry.HEX_LATTICE, n_ions, trap_freqs, d0)
    e1 = np.array([1.0, 0.0, 0.0])
    e2 = np.array([0.5, 0.0, np.sqrt(3.0) / 2.0])
    sites = []
    for a in range(-shells, shells + 1):
        for b in range(-shells, shells + 1):
            ring = (abs(a) + abs(b) + abs(a + b)) // 2
            if ring <= shells:
                sites.append(d0 * (a * e1 + b * e2))
    positions = np.array(sites)
    order = np.lexsort((positions[:, 0], positions[:, 2]))
    return IonCrystal(positions[order], config)


def _axial_potential(z):
    trap = 0.5 * np.sum(z ** 2)
    diff = z[:, None] - z[None, :]
    iu = np.triu_indices(len(z), k=1)
    return trap + np.sum(1.0 / np.abs(diff[iu]))


def _axial_gradient(z):
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, np.inf)
    return z - np.sum(np.sign(diff) / diff ** 2, axis=1)


def _axial_hessian(z):
    diff = z[:, None] - z[None, :]
    np.fill_diagonal(diff, np.inf)
    inv3 = 2.0 / np.abs(diff) ** 3
    hess = -inv3
    np.fill_diagonal(hess, 1.0 + inv3.sum(axis=1))
    return hess


def solve_paul_chain_equilibrium(n_ions, tol=1e-10, max_iter=200,
                                 trap_freqs=(1.0, 1.0, 1.0)):
    """Equilibrium of n ions in a common linear trap.

    Solves u_i = sum_{j<i} (u_i - u_j)^-2 - sum_{j>i} (u_j - u_i)^-2 by a
    damped Newton iteration on the axial potential, starting from a uniform
    chain of total length n**0.6.  The step is halved until the potential
    decreases.  Raises ConvergenceError (with the last residual) if the
    gradient max-norm does not drop below tol within max_iter iterations.
    """
    config = TrapConfig(Geometry.PAUL_CHAIN, n_ions, trap_freqs)
    if n_ions == 1:
        return IonCrystal(np.zeros((1, 3)), config)

    length = float(n_ions) ** 0.6
    z = np.linspace(-0.5 * length, 0.5 * length, n_ions)
    residual = np.inf
    for _ in range(max_iter):
        grad = _axial_gradient(z)
        residual = np.max(np.abs(grad))
        if residual < tol:
            break
        step = np.linalg.solve(_axial_hessian(z), grad)
        v0 = _axial_potential(z)
        scale = 1.0
        while scale > 1e-14:
            trial = z - scale * step
            if np.all(np.diff(trial) > 0):
                # Accept on potential decrease; near the minimum the change in
                # V drops below machine epsilon, so fall back to the residual.
                if (_axial_potential(trial) < v0
                        or np.max(np.abs(_axial_gradient(trial))) < residual):
                    z = trial
                    break
            scale *= 0.5
        else:
            raise ConvergenceError(
                "Newton damping stalled at residual %.3e" % residual,
                residual=residual)
    else:
        raise ConvergenceError(
            "no convergence after %d iterations (residual %.3e)"
            % (max_iter, residual), residual=residual)

    # The solution is mirror symmetric; project out floating-point asymmetry.
    z = 0.5 * (z - z[::-1])
    residual = float(np.max(np.abs(_axial_gradient(z))))
    positions = np.zeros((n_ions, 3))
    positions[:, 2] = z
    return IonCrystal(positions, config, residual=residual)


def potential_gradient(crystal):
    """Gradient of the axial trap-plus-Coulomb potential at the stored z.

    Only defined for the Paul chain, where the stored positions are meant to
    be a stationary point of this potential.
    """
    if crystal.config.geometry is not Geometry.PAUL_CHAIN:
        raise GeometryError("potential gradient is defined for Paul chains only")
    if crystal.n_ions == 1:
        return np.array([crystal.z[0]])
    return _axial_gradient(crystal.z)
