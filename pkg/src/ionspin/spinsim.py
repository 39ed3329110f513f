"""Exact diagonalization and time evolution for small spin registers.

Conventions used throughout: |0> = spin up is the +1 eigenstate of sigma^z,
site 0 occupies the leftmost tensor factor, and a symmetric coupling matrix
J^alpha contributes sum_{i<j} J_ij sigma^alpha_i sigma^alpha_j (each
unordered pair once).  States are plain complex vectors over the 2^N
product basis.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from .couplings import CouplingModel
from .errors import AccuracyError, CapacityError

MAX_SPINS = 16
_DENSE_LIMIT = 12  # eigendecomposition is fine up to 2^12

_SIGMA = {
    "x": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def pauli_site(axis, site, n_spins):
    """Pauli operator on one site of an n-spin register, sparse."""
    if not 0 <= site < n_spins:
        raise ValueError("site %d outside register of %d" % (site, n_spins))
    left = sp.identity(2 ** site, format="csr", dtype=complex)
    right = sp.identity(2 ** (n_spins - site - 1), format="csr", dtype=complex)
    return sp.kron(sp.kron(left, sp.csr_matrix(_SIGMA[axis])), right,
                   format="csr")


def pauli_pair(axis, i, j, n_spins):
    """Product sigma^axis_i sigma^axis_j, sparse."""
    return pauli_site(axis, i, n_spins) @ pauli_site(axis, j, n_spins)


@dataclass
class SpinHamiltonian:
    """Spin Hamiltonian with its coupling data and sparse realization."""

    n_spins: int
    j: dict                 # axis -> symmetric (N, N) coupling matrix
    fields: dict            # axis -> per-site field array
    offset: float
    matrix: sp.csr_matrix

    @property
    def dim(self):
        return 2 ** self.n_spins

    def dense(self):
        return self.matrix.toarray()

    def project_coefficients(self):
        """Recover couplings, fields and offset from the operator.

        Pauli strings are trace-orthogonal, so the coefficients come back
        by projection; this is the round-trip check for the builder.
        """
        h = self.dense()
        dim = self.dim
        n = self.n_spins
        j = {}
        fields = {}
        for axis in self.j:
            mat = np.zeros((n, n))
            for a in range(n):
                for b in range(a + 1, n):
                    op = pauli_pair(axis, a, b, n)
                    mat[a, b] = mat[b, a] = np.real(
                        np.trace(op @ h)) / dim
            j[axis] = mat
        for axis in self.fields:
            vals = np.array([np.real(np.trace(pauli_site(axis, a, n) @ h))
                             / dim for a in range(n)])
            fields[axis] = vals
        return j, fields, float(np.real(np.trace(h)) / dim)


def spin_hamiltonian_from_terms(n_spins, j=None, fields=None, offset=0.0):
    """Assemble sum_{i<j} J sigma sigma + sum_i B_i sigma + offset.

    j maps axis to a symmetric coupling matrix, fields maps axis to a
    scalar (uniform) or per-site array.
    """
    if n_spins > MAX_SPINS:
        raise CapacityError("%d spins exceeds the %d-spin guard"
                            % (n_spins, MAX_SPINS))
    if n_spins < 1:
        raise ValueError("need at least one spin")
    j = {} if j is None else {a: np.asarray(m, dtype=float)
                              for a, m in j.items()}
    fields = {} if fields is None else dict(fields)
    dim = 2 ** n_spins
    h = sp.csr_matrix((dim, dim), dtype=complex)
    for axis, mat in j.items():
        if mat.shape != (n_spins, n_spins):
            raise ValueError("coupling matrix shape mismatch")
        if np.max(np.abs(mat - mat.T)) > 1e-12:
            raise ValueError("coupling matrices must be symmetric")
        for a in range(n_spins):
            for b in range(a + 1, n_spins):
                if mat[a, b] != 0.0:
                    h = h + mat[a, b] * pauli_pair(axis, a, b, n_spins)
    norm_fields = {}
    for axis, val in fields.items():
        arr = np.asarray(val, dtype=float)
        if arr.ndim == 0:
            arr = np.full(n_spins, float(arr))
        if arr.shape != (n_spins,):
            raise ValueError("field array shape mismatch")
        norm_fields[axis] = arr
        for a in range(n_spins):
            if arr[a] != 0.0:
                h = h + arr[a] * pauli_site(axis, a, n_spins)
    if offset != 0.0:
        h = h + offset * sp.identity(dim, format="csr", dtype=complex)
    return SpinHamiltonian(n_spins, j, norm_fields, float(offset),
                           h.tocsr())


def build_spin_hamiltonian(model, n_max_spins_guard=MAX_SPINS):
    """Spin Hamiltonian of a coupling model (uniform per-axis fields)."""
    if not isinstance(model, CouplingModel):
        raise ValueError("expected a CouplingModel")
    n = model.n_ions
    if n > n_max_spins_guard:
        raise CapacityError("%d spins exceeds the %d-spin guard"
                            % (n, n_max_spins_guard))
    return spin_hamiltonian_from_terms(n, model.j, model.b_prime,
                                       model.energy_offset)


@dataclass
class GroundState:
    energy: float
    vectors: np.ndarray     # (dim, multiplicity), orthonormal columns
    degenerate: bool

    @property
    def vector(self):
        return self.vectors[:, 0]


def ground_state(ham, gap_tol=1e-10):
    """Lowest eigenpair; degenerate ground spaces come back whole.

    The returned columns are orthonormal; each is phased so that its
    largest-magnitude amplitude is real positive.
    """
    h = ham.dense() if isinstance(ham, SpinHamiltonian) else np.asarray(ham)
    evals, evecs = np.linalg.eigh(h)
    scale = max(1.0, abs(evals[0]))
    mult = int(np.sum(evals - evals[0] < gap_tol * scale))
    vecs = evecs[:, :mult].astype(complex)
    for k in range(mult):
        lead = np.argmax(np.abs(vecs[:, k]))
        phase = vecs[lead, k] / abs(vecs[lead, k])
        vecs[:, k] = vecs[:, k] / phase
    return GroundState(float(evals[0]), vecs, mult > 1)


def _n_spins_of(state):
    n = int(round(np.log2(len(state))))
    if 2 ** n != len(state):
        raise ValueError("state dimension is not a power of two")
    return n


@dataclass
class Observables:
    site: dict              # axis -> per-site expectation values
    pair: dict              # axis -> correlation matrix
    structure_factor_z: np.ndarray  # S(k) on the k_grid below
    k_grid: np.ndarray
    fluorescence: float     # total population of the up state


def structure_factor(state, k):
    """S(k) = (1/N) sum_ij e^{ik(i-j)} <sigma^z_i sigma^z_j>."""
    n = _n_spins_of(state)
    corr = _pair_matrix(state, "z", n)
    phases = np.exp(1j * k * np.arange(n))
    return float(np.real(phases.conj() @ corr @ phases) / n)


def _site_values(state, axis, n):
    return np.array([np.real(np.vdot(state, pauli_site(axis, i, n) @ state))
                     for i in range(n)])


def _pair_matrix(state, axis, n):
    corr = np.eye(n)
    for a in range(n):
        for b in range(a + 1, n):
            val = np.real(np.vdot(state, pauli_pair(axis, a, b, n) @ state))
            corr[a, b] = corr[b, a] = val
    return corr


def observables(state, model=None):
    """Site magnetizations, pair correlators and the z structure factor."""
    state = np.asarray(state, dtype=complex)
    n = _n_spins_of(state)
    if model is not None:
        expected = model.n_spins if isinstance(model, SpinHamiltonian) \
            else model.n_ions
        if expected != n:
            raise ValueError("state dimension does not match the model")
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state is not normalized")
    site = {axis: _site_values(state, axis, n) for axis in ("x", "y", "z")}
    pair = {axis: _pair_matrix(state, axis, n) for axis in ("x", "y", "z")}
    k_grid = 2.0 * np.pi * np.arange(n) / n
    s_k = np.array([structure_factor(state, k) for k in k_grid])
    fluor = float(np.sum(1.0 + site["z"]) / 2.0)
    return Observables(site, pair, s_k, k_grid, fluor)


def time_evolve(ham, state, t):
    """Exact evolution exp(-iHt)|state> by eigendecomposition."""
    state = np.asarray(state, dtype=complex)
    if abs(np.linalg.norm(state) - 1.0) > 1e-10:
        raise ValueError("state is not normalized")
    if ham.n_spins <= _DENSE_LIMIT:
        evals, evecs = np.linalg.eigh(ham.dense())
        return evecs @ (np.exp(-1j * evals * t) * (evecs.conj().T @ state))
    return expm_multiply(-1j * t * ham.matrix, state)


@dataclass
class SweepSchedule:
    """Time profile of an adiabatic run.

    coupling_scale is the dimensionless ramp multiplying every J entry and
    must stay inside [0, 1]; transverse_field gives B^x(t) directly.
    """

    total_time: float
    dt: float
    coupling_scale: object = None
    transverse_field: object = None

    def __post_init__(self):
        if self.total_time <= 0 or self.dt <= 0:
            raise ValueError("total_time and dt must be positive")
        if self.dt > self.total_time:
            raise ValueError("dt exceeds the total time")
        if self.coupling_scale is None:
            self.coupling_scale = cosine_ramp(self.total_time)
        if self.transverse_field is None:
            self.transverse_field = lambda t: 1.0

    def steps(self):
        n = int(np.ceil(self.total_time / self.dt - 1e-12))
        edges = np.linspace(0.0, self.total_time, n + 1)
        return edges


def linear_ramp(duration):
    def ramp(t):
        return min(max(t / duration, 0.0), 1.0)
    return ramp


def cosine_ramp(duration):
    def ramp(t):
        x = min(max(t / duration, 0.0), 1.0)
        return 0.5 * (1.0 - np.cos(np.pi * x))
    return ramp


def time_evolve_schedule(ham_of_t, state, schedule):
    """Piecewise-constant evolution of a time-dependent Hamiltonian.

    ham_of_t maps a time to a sparse operator; each step uses the midpoint
    Hamiltonian.  Raises AccuracyError if the norm drifts beyond 1e-8.
    """
    psi = np.asarray(state, dtype=complex).copy()
    edges = schedule.steps()
    for t0, t1 in zip(edges[:-1], edges[1:]):
        h = ham_of_t(0.5 * (t0 + t1))
        psi = expm_multiply(-1j * (t1 - t0) * h, psi)
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-8:
        raise AccuracyError("norm drift %.2e exceeds 1e-8" % drift)
    return psi


def _dt_guard(schedule, h_j, h_b, b_max):
    """Reject steps coarser than a tenth of the fastest period."""
    bound = _inf_norm(h_j) + abs(b_max) * _inf_norm(h_b)
    if bound > 0 and schedule.dt > 2.0 * np.pi / bound / 10.0:
        raise AccuracyError(
            "dt %.3g too coarse for spectral width %.3g (need < %.3g)"
            % (schedule.dt, bound, 2.0 * np.pi / bound / 10.0))


def _inf_norm(mat):
    return float(np.max(np.abs(mat).sum(axis=1))) if mat.nnz else 0.0


@dataclass
class SweepResult:
    times: np.ndarray
    j_values: np.ndarray        # reference coupling lambda(t) * j_ref
    field_values: np.ndarray
    magnetization: np.ndarray   # <sum_i sigma^z_i>
    nn_correlator: np.ndarray   # chain average of <sigma^z_i sigma^z_{i+1}>
    gs_overlap: np.ndarray      # squared overlap with instantaneous gs space
    final_state: np.ndarray
    j_ref: float


def tfim_sweep(model, schedule, n_checkpoints=50):
    """Adiabatic ramp of Ising couplings against a transverse field.

    The run starts from the ground state of the initial Hamiltonian, which
    for a ramp beginning at coupling_scale 0 is the fully polarized state
    along -x.  Couplings are scaled by coupling_scale(t) and the field
    follows transverse_field(t); checkpoints record the observables listed
    in SweepResult, including the overlap with the instantaneous ground
    space (summed over degenerate partners).
    """
    if isinstance(model, CouplingModel):
        j_mat = model.j.get("z")
        if j_mat is None:
            raise ValueError("model carries no z couplings")
        n = model.n_ions
    else:
        j_mat = np.asarray(model, dtype=float)
        n = j_mat.shape[0]
    if n > MAX_SPINS:
        raise CapacityError("%d spins exceeds the %d-spin guard"
                            % (n, MAX_SPINS))
    h_j = spin_hamiltonian_from_terms(n, {"z": j_mat}).matrix
    h_b = spin_hamiltonian_from_terms(n, fields={"x": 1.0}).matrix
    nn = np.mean(np.diag(j_mat, 1)) if n > 1 else 0.0
    edges = schedule.steps()
    b_samples = [schedule.transverse_field(t) for t in edges]
    _dt_guard(schedule, h_j, h_b, max(abs(b) for b in b_samples))

    def ham_at(t):
        lam = schedule.coupling_scale(t)
        if not -1e-12 <= lam <= 1.0 + 1e-12:
            raise ValueError("coupling_scale left [0, 1] at t=%g" % t)
        return lam * h_j + schedule.transverse_field(t) * h_b

    start = ground_state(ham_at(0.0).toarray())
    psi = start.vector.copy()

    stride = max(1, len(edges) // max(1, n_checkpoints))
    marks = sorted(set(range(0, len(edges) - 1, stride)) | {len(edges) - 1})
    rows = {name: [] for name in ("t", "j", "b", "m", "c", "o")}

    def record(idx, state):
        t = edges[idx]
        gs = ground_state(ham_at(t).toarray())
        overlap = float(np.sum(np.abs(gs.vectors.conj().T @ state) ** 2))
        mz = _site_values(state, "z", n)
        corr = np.mean([np.real(np.vdot(state, pauli_pair("z", i, i + 1, n)
                                        @ state)) for i in range(n - 1)]) \
            if n > 1 else 0.0
        rows["t"].append(t)
        rows["j"].append(schedule.coupling_scale(t) * nn)
        rows["b"].append(schedule.transverse_field(t))
        rows["m"].append(float(np.sum(mz)))
        rows["c"].append(float(corr))
        rows["o"].append(overlap)

    record(0, psi)
    for idx, (t0, t1) in enumerate(zip(edges[:-1], edges[1:]), start=1):
        h = ham_at(0.5 * (t0 + t1))
        psi = expm_multiply(-1j * (t1 - t0) * h, psi)
        if idx in marks:
            record(idx, psi)
    drift = abs(np.linalg.norm(psi) - 1.0)
    if drift > 1e-8:
        raise AccuracyError("norm drift %.2e exceeds 1e-8" % drift)
    return SweepResult(
        np.array(rows["t"]), np.array(rows["j"]), np.array(rows["b"]),
        np.array(rows["m"]), np.array(rows["c"]), np.array(rows["o"]),
        psi, float(nn))
