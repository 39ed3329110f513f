"""Spin-phonon dynamics of one to three ions with truncated Fock spaces.

The composite basis is spin register (x) phonon modes.  Modes are grouped
by axis in x, y, z order and sorted by frequency within an axis; phonon
configurations are enumerated row-major with the first mode varying
slowest.  A pushing force F_alpha couples through

    H_f = - sum_{alpha,i,n} F_alpha M_in / sqrt(2 omega_n)
          (a^dag_n + a_n)(1 + sigma^alpha_i)

so the dark sector sigma^alpha = -1 stays purely harmonic.  The canonical
transformation S displaces the bright sector and is kept as a diagnostic;
production fidelities evolve the lab-frame Hamiltonian directly.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import spinsim
from .couplings import (ForceSpec, combine_models, coupling_from_modes,
                        eta_matrix, force_for_eta)
from .errors import CapacityError, TruncationWarning
from .modes import AXES, elasticity_matrix, normal_modes
from .crystal import solve_paul_chain_equilibrium

DIM_GUARD = 100_000
MAX_FULL_IONS = 3


def _ladder(n_max):
    return sp.diags(np.sqrt(np.arange(1, n_max)), 1, format="csr",
                    dtype=complex)


@dataclass
class FullHamiltonian:
    """Lab-frame Hamiltonian split into its three physical pieces."""

    n_ions: int
    axes: tuple
    n_max: int
    mode_frequencies: np.ndarray   # concatenated across axes
    mode_axes: tuple               # axis label per concatenated mode
    etas: dict                     # axis -> EtaMatrix
    h_v: sp.csr_matrix
    h_f: sp.csr_matrix
    h_m: sp.csr_matrix

    @property
    def spin_dim(self):
        return 2 ** self.n_ions

    @property
    def n_modes(self):
        return len(self.mode_frequencies)

    @property
    def phonon_dim(self):
        return self.n_max ** self.n_modes

    @property
    def dim(self):
        return self.spin_dim * self.phonon_dim

    @property
    def matrix(self):
        return self.h_v + self.h_f + self.h_m

    def spin_operator(self, axis, site):
        return sp.kron(spinsim.pauli_site(axis, site, self.n_ions),
                       sp.identity(self.phonon_dim, format="csr",
                                   dtype=complex), format="csr")

    def mode_operator(self, op, mode):
        """Lift a single-mode operator to the full space."""
        left = sp.identity(self.n_max ** mode, format="csr", dtype=complex)
        right = sp.identity(self.n_max ** (self.n_modes - mode - 1),
                            format="csr", dtype=complex)
        ph = sp.kron(sp.kron(left, op), right, format="csr")
        return sp.kron(sp.identity(self.spin_dim, format="csr",
                                   dtype=complex), ph, format="csr")

    def lowering(self, mode):
        return self.mode_operator(_ladder(self.n_max), mode)


def build_full_hamiltonian(crystal, modes_by_axis, force, bare_fields=None,
                           n_max=3):
    """Assemble H_v + H_f + H_m on the truncated product space.

    modes_by_axis maps an axis label to its ModeData; bare_fields maps an
    axis to a uniform field.  The capacity guard caps both the ion count
    and the total dimension.
    """
    n_ions = crystal.n_ions
    if n_ions > MAX_FULL_IONS:
        raise CapacityError("full dynamics supports at most %d ions"
                            % MAX_FULL_IONS)
    if n_max < 2:
        raise ValueError("need at least two Fock levels per mode")
    axes = tuple(a for a in AXES if a in modes_by_axis)
    freqs = []
    mode_axes = []
    for axis in axes:
        md = modes_by_axis[axis]
        if md.n_ions != n_ions:
            raise ValueError("mode data for axis %s has wrong ion count"
                             % axis)
        freqs.extend(md.frequencies)
        mode_axes.extend([axis] * len(md.frequencies))
    freqs = np.array(freqs)
    if np.any(freqs <= 0):
        raise ValueError("all mode frequencies must be positive")
    n_modes = len(freqs)
    dim = 2 ** n_ions * n_max ** n_modes
    if dim > DIM_GUARD:
        raise CapacityError("dimension %d exceeds the guard %d"
                            % (dim, DIM_GUARD))

    etas = {axis: eta_matrix(modes_by_axis[axis], force) for axis in axes}
    shell = FullHamiltonian(
        n_ions, axes, n_max, freqs, tuple(mode_axes), etas,
        None, None, None)

    zero = sp.csr_matrix((dim, dim), dtype=complex)
    h_v = zero.copy()
    number = _ladder(n_max).getH() @ _ladder(n_max)
    for m, w in enumerate(freqs):
        h_v = h_v + w * shell.mode_operator(number, m)

    h_f = zero.copy()
    offset = 0
    for axis in axes:
        md = modes_by_axis[axis]
        f = force.force(axis)
        if f > 0:
            for local, w in enumerate(md.frequencies):
                m = offset + local
                quad = shell.lowering(m)
                quad = quad + quad.getH()        # a + a^dag
                for i in range(n_ions):
                    g = f * md.mode_matrix[i, local] / np.sqrt(2.0 * w)
                    if g != 0.0:
                        one_plus = shell.spin_operator(axis, i) \
                            + sp.identity(dim, format="csr", dtype=complex)
                        h_f = h_f - g * (quad @ one_plus)
        offset += len(md.frequencies)

    h_m = zero.copy()
    for axis, b in (bare_fields or {}).items():
        if b != 0.0:
            for i in range(n_ions):
                h_m = h_m + b * shell.spin_operator(axis, i)

    shell.h_v = h_v.tocsr()
    shell.h_f = h_f.tocsr()
    shell.h_m = h_m.tocsr()
    return shell


def canonical_S(full):
    """Displacement generator S on the full space (anti-Hermitian)."""
    dim = full.dim
    s = sp.csr_matrix((dim, dim), dtype=complex)
    offset = 0
    for axis in full.axes:
        etas = full.etas[axis]
        n_local = etas.entries.shape[1]
        for local in range(n_local):
            m = offset + local
            a = full.lowering(m)
            anti = a.getH() - a                  # a^dag - a
            for i in range(full.n_ions):
                eta = etas.entries[i, local]
                if eta != 0.0:
                    one_plus = full.spin_operator(axis, i) \
                        + sp.identity(dim, format="csr", dtype=complex)
                    s = s + eta * (anti @ one_plus)
        offset += n_local
    return s.tocsr()


def transformed_hamiltonian(full):
    """Exact e^{-S} H e^{S} on the truncated space."""
    s = canonical_S(full).toarray()
    herm = 1j * s
    evals, evecs = np.linalg.eigh(herm)
    # e^{-S} = e^{i (iS)}
    u = evecs @ (np.exp(1j * evals)[:, None] * evecs.conj().T)
    h = full.matrix.toarray()
    return u @ h @ u.conj().T


def closed_form_spin_operator(full):
    """Closed-form spin Hamiltonian lifted to the full space.

    Couplings, field shifts and scalar offsets are the exact second-order
    results implied by the stored etas; used as the target when checking
    the transformed operator.
    """
    models = []
    for axis in full.axes:
        etas = full.etas[axis]
        omega = etas.mode_frequencies
        j_full = -2.0 * (etas.entries * omega[None, :]) @ etas.entries.T
        row = j_full.sum(axis=1)
        j = j_full.copy()
        np.fill_diagonal(j, 0.0)
        shift = float(row.mean())
        const = 0.5 * float(j_full.sum()) + 0.5 * float(np.trace(j_full))
        models.append((axis, j, shift, const))
    n = full.n_ions
    h_spin = sp.csr_matrix((2 ** n, 2 ** n), dtype=complex)
    total_const = 0.0
    for axis, j, shift, const in models:
        h_spin = h_spin + spinsim.spin_hamiltonian_from_terms(
            n, {axis: j}, {axis: shift}).matrix
        total_const += const
    h_spin = h_spin + total_const * sp.identity(2 ** n, format="csr",
                                                dtype=complex)
    return sp.kron(h_spin, sp.identity(full.phonon_dim, format="csr",
                                       dtype=complex), format="csr")


def cross_axis_operator(full):
    """Residual second-order spin-phonon term for two simultaneous forces.

    With forces along two axes the displacement generators fail to commute
    on the same ion, leaving
        -1/2 sum eta^a_in eta^b_im omega_an (a+a^dag)_an (a^dag-a)_bm
             [sigma^a_i, sigma^b_i]
    summed over ordered pairs of distinct axes.  It vanishes identically
    when only one axis is forced.
    """
    dim = full.dim
    out = sp.csr_matrix((dim, dim), dtype=complex)
    starts = {}
    pos = 0
    for axis in full.axes:
        starts[axis] = pos
        pos += full.etas[axis].entries.shape[1]
    sigma = {}
    for a_idx, axis_a in enumerate(full.axes):
        for axis_b in full.axes:
            if axis_a == axis_b:
                continue
            eta_a = full.etas[axis_a]
            eta_b = full.etas[axis_b]
            for na in range(eta_a.entries.shape[1]):
                qa = full.lowering(starts[axis_a] + na)
                quad_a = qa + qa.getH()
                wa = eta_a.mode_frequencies[na]
                for nb in range(eta_b.entries.shape[1]):
                    qb = full.lowering(starts[axis_b] + nb)
                    anti_b = qb.getH() - qb
                    pair_op = quad_a @ anti_b
                    for i in range(full.n_ions):
                        coeff = eta_a.entries[i, na] * eta_b.entries[i, nb]
                        if coeff == 0.0:
                            continue
                        key = (axis_a, axis_b, i)
                        if key not in sigma:
                            sa = full.spin_operator(axis_a, i)
                            sb = full.spin_operator(axis_b, i)
                            sigma[key] = sa @ sb - sb @ sa
                        out = out - 0.5 * coeff * wa * (pair_op @ sigma[key])
    return out.tocsr()


def reference_transformed_operator(full):
    """H_v plus the closed-form spin part plus the cross-axis term."""
    return full.h_v + closed_form_spin_operator(full) \
        + cross_axis_operator(full)


@dataclass
class ThermalSpec:
    """Truncated thermal occupation shared by every mode."""

    n_bar: float
    n_max: int

    def __post_init__(self):
        if self.n_bar < 0:
            raise ValueError("mean occupation must be >= 0")
        if self.n_max < 1:
            raise ValueError("need at least one Fock level")

    @property
    def level_weights(self):
        if self.n_bar == 0.0:
            w = np.zeros(self.n_max)
            w[0] = 1.0
            return w
        ratio = self.n_bar / (1.0 + self.n_bar)
        w = ratio ** np.arange(self.n_max)
        return w / w.sum()

    @property
    def n_eff(self):
        """Mean occupation actually realized after truncation."""
        return float(np.arange(self.n_max) @ self.level_weights)

    def config_weights(self, n_modes):
        w = self.level_weights
        out = np.array([1.0])
        for _ in range(n_modes):
            out = np.outer(out, w).ravel()
        return out


@dataclass
class FidelityReport:
    f_avg: float
    error: float
    stderr: float
    n_samples: int
    closed_form: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        for val in (self.f_avg, self.closed_form):
            if not -1e-9 <= val <= 1.0 + 1e-9:
                raise ValueError("fidelity %r outside [0, 1]" % val)


def _unitary(h_dense, t):
    evals, evecs = np.linalg.eigh(h_dense)
    return evecs @ (np.exp(-1j * evals * t)[:, None] * evecs.conj().T)


def _u_blocks(full, t):
    u = _unitary(full.matrix.toarray(), t)
    p = full.phonon_dim
    s = full.spin_dim
    return u.reshape(s, p, s, p)


def _check_truncation(full, u_r, psi_i, weights):
    """Warn when evolved states crowd the top Fock level of any mode."""
    p = full.phonon_dim
    evolved = np.einsum("ambn,b->amn", u_r, psi_i)   # (spin, m, init config)
    shape = (full.spin_dim,) + (full.n_max,) * full.n_modes + (p,)
    probs = np.abs(evolved.reshape(shape)) ** 2
    active = weights > 0
    worst = 0.0
    for mode in range(full.n_modes):
        axis = 1 + mode
        top = np.take(probs, full.n_max - 1, axis=axis)
        pop = top.reshape(-1, p).sum(axis=0)
        worst = max(worst, float(pop[active].max()))
    if worst > 1e-3:
        warnings.warn(
            "top Fock level reaches population %.2e; n_max=%d looks too small"
            % (worst, full.n_max), TruncationWarning, stacklevel=3)
    return worst


def fidelity(psi_i, t, full, h_s_ref, thermal):
    """Simulation fidelity of one initial spin state (thermal phonons).

    Evolves psi_i against every thermally weighted Fock configuration under
    the lab-frame Hamiltonian, then projects on the spin target produced by
    the reference spin Hamiltonian, tracing over phonons.
    """
    psi_i = np.asarray(psi_i, dtype=complex)
    if abs(np.linalg.norm(psi_i) - 1.0) > 1e-10:
        raise ValueError("initial state is not normalized")
    if t < 0:
        raise ValueError("duration must be >= 0")
    if thermal.n_max != full.n_max:
        raise ValueError("thermal cutoff disagrees with the Hamiltonian")
    u_r = _u_blocks(full, t)
    weights = thermal.config_weights(full.n_modes)
    psi_f = spinsim.time_evolve(h_s_ref, psi_i, t)
    _check_truncation(full, u_r, psi_i, weights)
    amps = np.einsum("a,ambn,b->mn", psi_f.conj(), u_r, psi_i)
    return float(np.sum(np.abs(amps) ** 2 * weights[None, :]))


def _haar_samples(dim, n_samples, seed, product=False):
    rng = np.random.Generator(np.random.Philox(seed))
    if not product:
        z = rng.normal(size=(dim, n_samples)) \
            + 1j * rng.normal(size=(dim, n_samples))
        return z / np.linalg.norm(z, axis=0)
    half = int(round(np.sqrt(dim)))
    za = rng.normal(size=(half, n_samples)) \
        + 1j * rng.normal(size=(half, n_samples))
    zb = rng.normal(size=(half, n_samples)) \
        + 1j * rng.normal(size=(half, n_samples))
    za /= np.linalg.norm(za, axis=0)
    zb /= np.linalg.norm(zb, axis=0)
    return np.einsum("as,bs->abs", za, zb).reshape(dim, n_samples)


def average_fidelity(full, h_s_ref, t, thermal, n_samples=200, seed=0,
                     product_states=False):
    """Average simulation fidelity over random initial spin states.

    Monte Carlo over Haar states (counter-based generator, reproducible)
    plus the deterministic channel closed form: with Kraus blocks
    K_mn = sqrt(w_n) <m|U|n> and target V, the entanglement fidelity is
    sum |Tr(V^dag K)|^2 / d^2 and the Haar average is (d F_e + 1)/(d+1).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if thermal.n_max != full.n_max:
        raise ValueError("thermal cutoff disagrees with the Hamiltonian")
    d = full.spin_dim
    u_r = _u_blocks(full, t)
    weights = thermal.config_weights(full.n_modes)
    v = _unitary(h_s_ref.dense(), t)

    tr_amp = np.einsum("ab,ambn->mn", v.conj(), u_r)
    f_ent = float(np.sum(np.abs(tr_amp) ** 2 * weights[None, :]) / d ** 2)
    closed = (d * f_ent + 1.0) / (d + 1.0)

    samples = _haar_samples(d, n_samples, seed, product=product_states)
    _check_truncation(full, u_r, samples[:, 0], weights)
    targets = v @ samples
    amps = np.einsum("as,ambn,bs->mns", targets.conj(), u_r, samples)
    f_each = np.sum(np.abs(amps) ** 2 * weights[None, :, None], axis=(0, 1))
    f_avg = float(f_each.mean())
    stderr = float(f_each.std(ddof=1) / np.sqrt(n_samples)) \
        if n_samples > 1 else 0.0
    return FidelityReport(
        f_avg, 1.0 - f_avg, stderr, n_samples, closed,
        {"t": t, "n_bar": thermal.n_bar, "n_eff": thermal.n_eff,
         "n_max": full.n_max, "product_states": product_states})


def error_estimate(eta, n_bar, trap="symmetric", j=None, detuning=None,
                   eta_ref=1.0, n_bar_ref=0.0):
    """Analytic error scaling, normalized at the reference point.

    symmetric traps: E proportional to eta^2 (1 + 2 n_bar); asymmetric
    traps with both radial directions driven: E proportional to
    J^2/detuning^2, independent of n_bar.  Constants are not determined,
    so only ratios of returned values are meaningful.
    """
    if eta <= 0 or n_bar < 0:
        raise ValueError("parameters must be positive")
    if trap == "symmetric":
        return (eta / eta_ref) ** 2 * (1.0 + 2.0 * n_bar) \
            / (1.0 + 2.0 * n_bar_ref)
    if trap == "asymmetric":
        if j is None or detuning is None:
            raise ValueError("asymmetric estimate needs j and detuning")
        if detuning == 0:
            raise ValueError("detuning must be nonzero")
        return (j / detuning) ** 2
    raise ValueError("trap must be symmetric or asymmetric")


def _radial_modes(trap_freqs):
    crystal = solve_paul_chain_equilibrium(2, tol=1e-13)
    modes = {}
    for axis in ("x", "y"):
        modes[axis] = normal_modes(elasticity_matrix(crystal, axis,
                                                     trap_freqs))
    return crystal, modes


def matched_radial_forces(trap_freqs, eta):
    """Force pair giving equal x and y couplings at displacement eta.

    eta fixes the x force at the x center-of-mass frequency; the y force
    is then scaled so the two-ion couplings J^x and J^y coincide.  For a
    symmetric trap the two forces come out equal.
    """
    crystal, modes = _radial_modes(trap_freqs)
    f_x = force_for_eta(eta, trap_freqs[0])
    j_unit = {}
    for axis in ("x", "y"):
        model = coupling_from_modes(modes[axis],
                                    ForceSpec(**{"f_" + axis: 1.0}))
        j_unit[axis] = model.j[axis][0, 1]
    f_y = f_x * np.sqrt(j_unit["x"] / j_unit["y"])
    return crystal, modes, ForceSpec(f_x=f_x, f_y=f_y)


def xy_gate_experiment(trap_ratios, eta, n_bar, n_samples=200, seed=0,
                       n_max=3, product_states=False):
    """Two-ion exchange-gate pipeline through the full dynamics.

    trap_ratios gives (omega_x, omega_y) in axial units; lasers push both
    ions along x and y with amplitudes matched so J^x = J^y = J, and the
    state evolves for T = pi/(8J).  Reports the averaged fidelity against
    the coupling-model spin evolution, plus J and T.
    """
    w_x, w_y = trap_ratios
    trap_freqs = (float(w_x), float(w_y), 1.0)
    crystal, modes, force = matched_radial_forces(trap_freqs, eta)
    model = combine_models(
        coupling_from_modes(modes["x"], ForceSpec(f_x=force.f_x)),
        coupling_from_modes(modes["y"], ForceSpec(f_y=force.f_y)))
    j = model.j["x"][0, 1]
    t_gate = np.pi / (8.0 * j)
    h_s = spinsim.build_spin_hamiltonian(model)
    full = build_full_hamiltonian(crystal, modes, force, n_max=n_max)
    thermal = ThermalSpec(n_bar, n_max)
    report = average_fidelity(full, h_s, t_gate, thermal,
                              n_samples=n_samples, seed=seed,
                              product_states=product_states)
    report.params.update({
        "eta": eta, "omega_x": w_x, "omega_y": w_y,
        "j": float(j), "t_gate": float(t_gate),
        "f_x": force.f_x, "f_y": force.f_y})
    return report
