"""Command-line front end for the simulation pipeline.

Configs are plain text, line oriented::

    # chain of ten ions
    [trap]
    geometry = paul_chain
    n = 10
    omega_x = 5.0

    [forces]
    f_x = 1.0

    [run]
    axis = x

Sections group related keys, ``key = value`` pairs hold scalars, booleans
(true/false) or comma-separated float lists.  Blank lines and lines starting
with ``#`` are ignored.  Unknown sections or keys are rejected with the
offending line number.

Subcommands: equilibrium, modes, couplings, ising-sweep, fidelity-scan,
version.  All outputs are deterministic for a fixed config and seed: CSV
files carry a header row and round-trip floats, JSON files carry a schema
tag and sorted keys.  Exit codes: 0 success, 2 config error, 3 numerical
failure, 4 capacity guard.
"""

import argparse
import hashlib
import json
import os
import sys

import numpy as np

from . import __version__, fullsim, spinsim
from .couplings import ForceSpec, coupling_from_modes, force_for_eta
from .crystal import (Geometry, hex_shells_for_count, make_hex_lattice,
                      make_microtrap_chain, potential_gradient,
                      solve_paul_chain_equilibrium)
from .errors import (AccuracyError, CapacityError, ConfigError,
                     ConvergenceError, DegenerateModeError, GeometryError,
                     InstabilityError, SimulationError)
from .modes import AXES, elasticity_matrix, normal_modes, radial_freq_for_beta

UNITS = {
    "hbar": 1.0,
    "mass": 1.0,
    "charge_squared": 1.0,
    "omega_z": 1.0,
    "length_unit": "(e^2/(m omega_z^2))^(1/3)",
    "energy_unit": "hbar omega_z",
}

_SECTION_KEYS = {
    "trap": ("geometry", "n", "omega_x", "omega_y", "d0"),
    "forces": ("f_x", "f_y", "f_z", "eta_x", "eta_y", "eta_z"),
    "fields": ("b_x", "b_y", "b_z"),
    "run": ("tol", "max_iter", "axis", "beta_list", "endpoint_j",
            "total_time", "dt", "checkpoints", "eta_list", "n_bar_list",
            "ratio_list", "n_max", "samples", "seed", "product_states"),
    "output": ("directory", "si_omega_z_mhz"),
}

_GEOMETRIES = {
    "paul_chain": Geometry.PAUL_CHAIN,
    "microtrap_chain": Geometry.MICROTRAP_CHAIN,
    "hex_lattice": Geometry.HEX_LATTICE,
}


class Config:
    """Parsed key-value store that remembers source lines for errors."""

    def __init__(self, entries):
        self._entries = entries

    def has(self, section, key):
        return (section, key) in self._entries

    def line(self, section, key):
        return self._entries[(section, key)][1]

    def _raw(self, section, key, default):
        if (section, key) not in self._entries:
            if default is _REQUIRED:
                raise ConfigError("missing required key %s.%s"
                                  % (section, key))
            return None, None
        return self._entries[(section, key)]

    def get_str(self, section, key, default=None, choices=None):
        raw, line = self._raw(section, key, default)
        if raw is None:
            return default
        if choices is not None and raw not in choices:
            raise ConfigError("%s.%s must be one of %s"
                              % (section, key, ", ".join(choices)), line)
        return raw

    def get_int(self, section, key, default=None, minimum=None):
        raw, line = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ConfigError("%s.%s must be an integer" % (section, key),
                              line)
        if minimum is not None and value < minimum:
            raise ConfigError("%s.%s must be >= %d" % (section, key, minimum),
                              line)
        return value

    def get_float(self, section, key, default=None, minimum=None):
        raw, line = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            value = float(raw)
        except ValueError:
            raise ConfigError("%s.%s must be a number" % (section, key), line)
        if minimum is not None and value < minimum:
            raise ConfigError("%s.%s must be >= %g" % (section, key, minimum),
                              line)
        return value

    def get_bool(self, section, key, default=None):
        raw, line = self._raw(section, key, default)
        if raw is None:
            return default
        if raw not in ("true", "false"):
            raise ConfigError("%s.%s must be true or false" % (section, key),
                              line)
        return raw == "true"

    def get_float_list(self, section, key, default=None):
        raw, line = self._raw(section, key, default)
        if raw is None:
            return default
        try:
            values = [float(part) for part in raw.split(",")]
        except ValueError:
            raise ConfigError("%s.%s must be comma-separated numbers"
                              % (section, key), line)
        if not values:
            raise ConfigError("%s.%s is empty" % (section, key), line)
        return values


_REQUIRED = object()


def parse_config(text):
    """Parse config text into a Config, rejecting anything unknown."""
    entries = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SECTION_KEYS:
                raise ConfigError("unknown section [%s]" % section, lineno)
            continue
        if "=" not in line:
            raise ConfigError("expected key = value", lineno)
        if section is None:
            raise ConfigError("key outside any [section]", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SECTION_KEYS[section]:
            raise ConfigError("unknown key %s in [%s]" % (key, section),
                              lineno)
        if (section, key) in entries:
            raise ConfigError("duplicate key %s" % key, lineno)
        if not value:
            raise ConfigError("empty value for %s" % key, lineno)
        entries[(section, key)] = (value, lineno)
    return Config(entries)


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return repr(float(value))


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_json(path, payload):
    with open(path, "w") as fh:
        fh.write(json.dumps(payload, sort_keys=True, indent=2) + "\n")


def trap_frequencies(cfg):
    wx = cfg.get_float("trap", "omega_x", default=1.0, minimum=0.0)
    wy = cfg.get_float("trap", "omega_y", default=wx, minimum=0.0)
    return (wx, wy, 1.0)


def build_crystal(cfg):
    geometry = cfg.get_str("trap", "geometry", default=_REQUIRED,
                           choices=tuple(_GEOMETRIES))
    n = cfg.get_int("trap", "n", default=_REQUIRED, minimum=1)
    tf = trap_frequencies(cfg)
    if geometry == "paul_chain":
        tol = cfg.get_float("run", "tol", default=1e-12, minimum=0.0)
        max_iter = cfg.get_int("run", "max_iter", default=200, minimum=1)
        return solve_paul_chain_equilibrium(n, tol=tol, max_iter=max_iter,
                                            trap_freqs=tf)
    d0 = cfg.get_float("trap", "d0", default=_REQUIRED, minimum=0.0)
    if geometry == "microtrap_chain":
        return make_microtrap_chain(n, d0, trap_freqs=tf)
    try:
        shells = hex_shells_for_count(n)
    except ValueError as exc:
        raise ConfigError(str(exc), cfg.line("trap", "n"))
    return make_hex_lattice(shells, d0, trap_freqs=tf)


def build_force(cfg, trap_freqs):
    kwargs = {}
    for idx, axis in enumerate(AXES):
        f_key, eta_key = "f_" + axis, "eta_" + axis
        if cfg.has("forces", f_key) and cfg.has("forces", eta_key):
            raise ConfigError("give either %s or %s, not both"
                              % (f_key, eta_key),
                              cfg.line("forces", eta_key))
        if cfg.has("forces", f_key):
            kwargs[f_key] = cfg.get_float("forces", f_key, minimum=0.0)
        elif cfg.has("forces", eta_key):
            eta = cfg.get_float("forces", eta_key, minimum=0.0)
            kwargs[f_key] = force_for_eta(eta, trap_freqs[idx])
        if cfg.has("fields", "b_" + axis):
            kwargs["b_" + axis] = cfg.get_float("fields", "b_" + axis)
    return ForceSpec(**kwargs)


def _run_axis(cfg):
    return cfg.get_str("run", "axis", default=_REQUIRED,
                       choices=("x", "y", "z"))


def cmd_equilibrium(cfg, outdir, args):
    crystal = build_crystal(cfg)
    if crystal.config.geometry == Geometry.PAUL_CHAIN:
        residual = float(np.max(np.abs(potential_gradient(crystal))))
    else:
        residual = 0.0
    rows = [(i,) + tuple(pos) for i, pos in enumerate(crystal.positions)]
    write_csv(os.path.join(outdir, "positions.csv"),
              ("ion", "x", "y", "z"), rows)
    write_json(os.path.join(outdir, "equilibrium.json"), {
        "schema": "ionspin.cli.equilibrium/1",
        "geometry": crystal.config.geometry.value,
        "n_ions": crystal.n_ions,
        "residual": residual,
        "units": UNITS,
    })


def cmd_modes(cfg, outdir, args):
    crystal = build_crystal(cfg)
    axis = _run_axis(cfg)
    data = normal_modes(elasticity_matrix(crystal, axis,
                                          trap_frequencies(cfg)))
    write_csv(os.path.join(outdir, "frequencies.csv"),
              ("mode", "frequency"),
              list(enumerate(data.frequencies)))
    header = ("ion",) + tuple("mode_%d" % m for m in range(data.n_ions))
    rows = [(i,) + tuple(data.mode_matrix[i]) for i in range(data.n_ions)]
    write_csv(os.path.join(outdir, "mode_matrix.csv"), header, rows)
    write_json(os.path.join(outdir, "modes.json"), {
        "schema": "ionspin.cli.modes/1",
        "axis": axis,
        "n_ions": data.n_ions,
        "frequencies": [float(w) for w in data.frequencies],
        "zero_modes": [bool(z) for z in data.zero_modes],
        "units": UNITS,
    })


def _decay_rows(crystal, j):
    if crystal.config.geometry == Geometry.HEX_LATTICE:
        raise ConfigError("decay curves need a chain geometry")
    center = (crystal.n_ions - 1) // 2
    rmax = min(10, crystal.n_ions - 1 - center)
    if rmax < 1:
        raise ConfigError("need at least two ions for a decay curve")
    z = crystal.positions[:, 2]
    first = j[center, center + 1]
    rows = []
    for r in range(1, rmax + 1):
        rows.append((r, abs(z[center + r] - z[center]),
                     j[center, center + r],
                     j[center, center + r] / first))
    return rows


def _fit_exponent(rows):
    if len(rows) < 2:
        return None
    sep = np.array([row[1] for row in rows])
    val = np.abs([row[2] for row in rows])
    if np.any(val == 0.0):
        return None
    return float(np.polyfit(np.log(sep), np.log(val), 1)[0])


def cmd_couplings(cfg, outdir, args):
    crystal = build_crystal(cfg)
    axis = _run_axis(cfg)
    idx = AXES.index(axis)
    betas = cfg.get_float_list("run", "beta_list", default=None)
    runs = []
    settings = [None] if betas is None else betas
    for k, beta_val in enumerate(settings):
        tf = list(trap_frequencies(cfg))
        if beta_val is not None:
            if beta_val <= 0:
                raise ConfigError("beta values must be positive",
                                  cfg.line("run", "beta_list"))
            tf[idx] = radial_freq_for_beta(crystal, axis, beta_val)
        force = build_force(cfg, tuple(tf))
        if force.force(axis) <= 0.0:
            raise ConfigError("no force configured on axis %s" % axis)
        data = normal_modes(elasticity_matrix(crystal, axis, tuple(tf)))
        model = coupling_from_modes(data, force)
        tag = "" if beta_val is None else "_b%d" % k
        coupling_file = "coupling_%s%s.json" % (axis, tag)
        decay_file = "decay_%s%s.csv" % (axis, tag)
        model.dump(os.path.join(outdir, coupling_file))
        rows = _decay_rows(crystal, model.j[axis])
        write_csv(os.path.join(outdir, decay_file),
                  ("r", "separation", "j_value", "j_ratio_to_first"), rows)
        runs.append({
            "beta": beta_val,
            "omega_axis": float(tf[idx]),
            "fitted_exponent": _fit_exponent(rows),
            "second_neighbor_ratio":
                float(abs(rows[1][3])) if len(rows) > 1 else None,
            "coupling_file": coupling_file,
            "decay_file": decay_file,
        })
    write_json(os.path.join(outdir, "couplings.json"), {
        "schema": "ionspin.cli.couplings/1",
        "axis": axis,
        "n_ions": crystal.n_ions,
        "runs": runs,
        "units": UNITS,
    })


def cmd_ising_sweep(cfg, outdir, args):
    n = cfg.get_int("trap", "n", default=_REQUIRED, minimum=2)
    endpoint = cfg.get_float("run", "endpoint_j", default=_REQUIRED)
    if endpoint == 0.0:
        raise ConfigError("run.endpoint_j must be nonzero",
                          cfg.line("run", "endpoint_j"))
    field = cfg.get_float("fields", "b_x", default=1.0)
    if field == 0.0:
        raise ConfigError("fields.b_x must be nonzero",
                          cfg.line("fields", "b_x"))
    total_time = cfg.get_float("run", "total_time", default=_REQUIRED,
                               minimum=0.0)
    dt = cfg.get_float("run", "dt", default=_REQUIRED, minimum=0.0)
    checkpoints = cfg.get_int("run", "checkpoints", default=50, minimum=1)
    j_mat = np.zeros((n, n))
    for i in range(n - 1):
        j_mat[i, i + 1] = j_mat[i + 1, i] = endpoint
    schedule = spinsim.SweepSchedule(total_time, dt,
                                     transverse_field=lambda t: field)
    result = spinsim.tfim_sweep(j_mat, schedule, n_checkpoints=checkpoints)
    rows = list(zip(result.times, result.j_values, result.field_values,
                    result.magnetization, result.nn_correlator,
                    result.gs_overlap))
    write_csv(os.path.join(outdir, "sweep.csv"),
              ("time", "coupling", "field", "magnetization",
               "nn_correlator", "gs_overlap"), rows)
    write_json(os.path.join(outdir, "sweep.json"), {
        "schema": "ionspin.cli.ising_sweep/1",
        "n_spins": n,
        "endpoint_j": endpoint,
        "field": field,
        "total_time": total_time,
        "dt": dt,
        "checkpoints": checkpoints,
        "final_magnetization": float(result.magnetization[-1]),
        "final_nn_correlator": float(result.nn_correlator[-1]),
        "final_gs_overlap": float(result.gs_overlap[-1]),
        "units": UNITS,
    })


def cmd_fidelity_scan(cfg, outdir, args):
    if cfg.has("trap", "n") and cfg.get_int("trap", "n") != 2:
        raise ConfigError("fidelity scans run on two ions",
                          cfg.line("trap", "n"))
    omega_x = cfg.get_float("trap", "omega_x", default=_REQUIRED,
                            minimum=0.0)
    ratios = cfg.get_float_list("run", "ratio_list", default=_REQUIRED)
    etas = cfg.get_float_list("run", "eta_list", default=_REQUIRED)
    n_bars = cfg.get_float_list("run", "n_bar_list", default=_REQUIRED)
    n_max = cfg.get_int("run", "n_max", default=3, minimum=2)
    samples = cfg.get_int("run", "samples", default=200, minimum=1)
    seed = cfg.get_int("run", "seed", default=0)
    if args.seed is not None:
        seed = args.seed
    product = cfg.get_bool("run", "product_states", default=False)
    si_mhz = cfg.get_float("output", "si_omega_z_mhz", default=None,
                           minimum=0.0)

    header = ["eta", "n_bar", "omega_ratio", "error", "stderr", "j",
              "t_gate"]
    if si_mhz is not None:
        header.append("j_khz")
    rows = []
    errors = {}
    for ratio in ratios:
        for eta in etas:
            for n_bar in n_bars:
                try:
                    rep = fullsim.xy_gate_experiment(
                        (omega_x, omega_x * ratio), eta, n_bar,
                        n_samples=samples, seed=seed, n_max=n_max,
                        product_states=product)
                except SimulationError:
                    print("at grid point ratio=%g eta=%g n_bar=%g"
                          % (ratio, eta, n_bar), file=sys.stderr)
                    raise
                row = [eta, n_bar, ratio, rep.error, rep.stderr,
                       rep.params["j"], rep.params["t_gate"]]
                if si_mhz is not None:
                    row.append(rep.params["j"] * si_mhz * 1e3)
                rows.append(row)
                errors[(ratio, n_bar, eta)] = rep.error
    slopes = []
    if len(etas) >= 2:
        log_eta = np.log(etas)
        for ratio in ratios:
            for n_bar in n_bars:
                errs = np.array([errors[(ratio, n_bar, e)] for e in etas])
                if np.all(errs > 0):
                    slope = float(np.polyfit(log_eta, np.log(errs), 1)[0])
                    slopes.append({"ratio": ratio, "n_bar": n_bar,
                                   "slope": slope})
    write_csv(os.path.join(outdir, "scan.csv"), header, rows)
    payload = {
        "schema": "ionspin.cli.fidelity_scan/1",
        "version": __version__,
        "seed": seed,
        "samples": samples,
        "n_max": n_max,
        "product_states": product,
        "omega_x": omega_x,
        "ratios": ratios,
        "etas": etas,
        "n_bars": n_bars,
        "eta_slopes": slopes,
        "units": UNITS,
    }
    if si_mhz is not None:
        payload["si_omega_z_mhz"] = si_mhz
    write_json(os.path.join(outdir, "scan.json"), payload)


def cmd_version(args):
    digest = None
    if args.config is not None:
        with open(args.config, "rb") as fh:
            digest = hashlib.sha256(fh.read()).hexdigest()
    print(json.dumps({
        "schema": "ionspin.cli.version/1",
        "version": __version__,
        "config_sha256": digest,
        "units": UNITS,
    }, sort_keys=True, indent=2))


_COMMANDS = {
    "equilibrium": cmd_equilibrium,
    "modes": cmd_modes,
    "couplings": cmd_couplings,
    "ising-sweep": cmd_ising_sweep,
    "fidelity-scan": cmd_fidelity_scan,
}

_THREAD_LIMIT = None


def _apply_threads(threads):
    global _THREAD_LIMIT
    if threads is None:
        return
    if threads < 1:
        raise ConfigError("--threads must be >= 1")
    import threadpoolctl
    _THREAD_LIMIT = threadpoolctl.threadpool_limits(limits=threads)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="ionspin",
        description="Effective spin models for laser-pushed trapped ions.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="experiment config file")
        p.add_argument("--out", default=None,
                       help="output directory (default: config, then '.')")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        p.add_argument("--threads", type=int, default=None,
                       help="cap linear-algebra thread pools")
    pv = sub.add_parser("version")
    pv.add_argument("--config", default=None,
                    help="config file to fingerprint")
    pv.add_argument("--threads", type=int, default=None)
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        _apply_threads(args.threads)
        if args.command == "version":
            cmd_version(args)
            return 0
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError("cannot read config: %s" % exc)
        cfg = parse_config(text)
        outdir = args.out
        if outdir is None:
            outdir = cfg.get_str("output", "directory", default=".")
        os.makedirs(outdir, exist_ok=True)
        _COMMANDS[args.command](cfg, outdir, args)
        return 0
    except ConfigError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except GeometryError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except ValueError as exc:
        print("config error: %s" % exc, file=sys.stderr)
        return 2
    except CapacityError as exc:
        print("capacity error: %s" % exc, file=sys.stderr)
        return 4
    except (ConvergenceError, InstabilityError, AccuracyError,
            DegenerateModeError, np.linalg.LinAlgError) as exc:
        print("numerical error: %s" % exc, file=sys.stderr)
        return 3
    except SimulationError as exc:
        print("error: %s" % exc, file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
