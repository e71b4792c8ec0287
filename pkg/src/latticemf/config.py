"""Experiment configuration: JSON schema, validation and deserialization.

A config is a single JSON document; every validation error names the
offending field path.  Custom operators/states travel as base64-encoded
little-endian complex128 matrices (C order) next to their site lists, so
configs are self-contained and byte-reproducible.
"""

from __future__ import annotations

import base64
import json
import math

import numpy as np

from .errors import ConfigError
from .fock import (
    SPIN_HALF,
    LocalOp,
    annihilator_local,
    creator_local,
    identity_local,
    number_local,
)
from .interactions import (
    Atom,
    Interaction,
    LongRangeModel,
    Schedule,
    TimeDependentModel,
    build_bcs_model,
    hopping_nn,
    number_onsite,
    pairing_annihilate,
    pairing_create,
    zero_interaction,
)
from .lattice import DecayFunction, PeriodVector
from .states import Mixture, ProductStateSpec

EXPERIMENTS = ("simulate", "selfconsistent", "lrbound", "converge", "mixture", "density")


def encode_matrix(matrix):
    m = np.ascontiguousarray(matrix, dtype=np.complex128)
    return base64.b64encode(m.tobytes()).decode("ascii")


def decode_matrix(b64, dim, path):
    try:
        raw = base64.b64decode(b64.encode("ascii"), validate=True)
    except Exception as exc:
        raise ConfigError(path, f"invalid base64 matrix: {exc}") from None
    expect = dim * dim * 16
    if len(raw) == dim * 16:  # vector
        return np.frombuffer(raw, dtype=np.complex128).copy()
    if len(raw) != expect:
        raise ConfigError(
            path, f"matrix byte length {len(raw)} != {expect} for dimension {dim}"
        )
    return np.frombuffer(raw, dtype=np.complex128).reshape(dim, dim).copy()


def _get(cfg, field, path, kind=None, default=KeyError, choices=None):
    if field not in cfg:
        if default is KeyError:
            raise ConfigError(f"{path}{field}", "missing required field")
        return default
    val = cfg[field]
    if kind is not None and not isinstance(val, kind):
        names = kind.__name__ if not isinstance(kind, tuple) else "/".join(k.__name__ for k in kind)
        raise ConfigError(f"{path}{field}", f"expected {names}, got {type(val).__name__}")
    if choices is not None and val not in choices:
        raise ConfigError(f"{path}{field}", f"must be one of {sorted(choices)}")
    return val


def parse_spins(cfg, path=""):
    lat = _get(cfg, "lattice", path, dict, default={})
    spins = tuple(lat.get("spins", ["up", "down"]))
    if not spins or not all(isinstance(s, str) for s in spins):
        raise ConfigError(f"{path}lattice.spins", "must be a non-empty list of labels")
    d = lat.get("dimension", 1)
    if not isinstance(d, int) or d < 1:
        raise ConfigError(f"{path}lattice.dimension", "must be a positive integer")
    return spins, d


def parse_decay(cfg, path=""):
    dec = _get(cfg, "decay", path, dict, default={"family": "exponential", "kappa": 1.0})
    family = _get(dec, "family", f"{path}decay.", str, choices=set(DecayFunction.FAMILIES))
    try:
        if family == "exponential":
            return DecayFunction("exponential", kappa=_get(dec, "kappa", f"{path}decay.", (int, float)))
        return DecayFunction("polynomial", power=_get(dec, "power", f"{path}decay.", (int, float)))
    except ValueError as exc:
        raise ConfigError(f"{path}decay", str(exc)) from None


def parse_schedule(spec, path):
    if spec is None:
        return Schedule()
    kind = _get(spec, "kind", f"{path}.", str, choices=set(Schedule.KINDS))
    kwargs = {k: spec[k] for k in ("value", "slope", "amplitude", "omega", "phase") if k in spec}
    return Schedule(kind, **kwargs)


def parse_interaction(spec, spins, d, path):
    family = _get(spec, "family", f"{path}.", str)
    coeff = spec.get("coeff", 1.0)
    if family == "sum":
        parts = _get(spec, "parts", f"{path}.", list)
        if not parts:
            raise ConfigError(f"{path}.parts", "sum needs at least one part")
        total = None
        for k, p in enumerate(parts):
            piece = parse_interaction(p, spins, d, f"{path}.parts[{k}]")
            total = piece if total is None else total + piece
        return total
    if family == "onsite-number":
        return number_onsite(spins, coeff, d)
    if family == "hopping":
        return hopping_nn(spins, coeff, d)
    if family == "pairing-create":
        if tuple(spins) != SPIN_HALF:
            raise ConfigError(f"{path}.family", "pairing families need spins [up, down]")
        return coeff * pairing_create(d)
    if family == "pairing-annihilate":
        if tuple(spins) != SPIN_HALF:
            raise ConfigError(f"{path}.family", "pairing families need spins [up, down]")
        return coeff * pairing_annihilate(d)
    if family == "custom-dense":
        sites = _get(spec, "sites", f"{path}.", list)
        sites = tuple(tuple(int(c) for c in s) for s in sites)
        q = len(sites) * len(spins)
        mat = decode_matrix(_get(spec, "matrix_b64", f"{path}.", str), 1 << q, f"{path}.matrix_b64")
        if mat.ndim != 2:
            raise ConfigError(f"{path}.matrix_b64", "custom-dense needs a square matrix")
        ti = spec.get("translation_invariant", True)
        try:
            op = LocalOp(tuple(sorted(sites)), spins, coeff * mat)
            return Interaction((op,), ti, spins)
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.family", f"unknown interaction family {family!r}")


def parse_model(cfg, spins, d, path=""):
    spec = _get(cfg, "model", path, dict)
    mtype = _get(spec, "type", f"{path}model.", str, choices={"bcs", "custom"})
    if mtype == "bcs":
        if tuple(spins) != SPIN_HALF:
            raise ConfigError(f"{path}model.type", "bcs model needs spins [up, down]")
        gamma = _get(spec, "gamma", f"{path}model.", (int, float))
        mu = _get(spec, "mu", f"{path}model.", (int, float))
        hopping = spec.get("hopping", 0.0)
        if gamma < 0:
            raise ConfigError(f"{path}model.gamma", "must be >= 0")
        base = build_bcs_model(float(gamma), float(mu), float(hopping), d)
    else:
        sr_specs = _get(spec, "short_range", f"{path}model.", list, default=[])
        phi = zero_interaction(spins)
        for k, t in enumerate(sr_specs):
            phi = phi + parse_interaction(t, spins, d, f"{path}model.short_range[{k}]")
        atoms = []
        for k, a in enumerate(_get(spec, "atoms", f"{path}model.", list, default=[])):
            w = _get(a, "weight", f"{path}model.atoms[{k}].", (int, float))
            factors = tuple(
                parse_interaction(f, spins, d, f"{path}model.atoms[{k}].factors[{j}]")
                for j, f in enumerate(_get(a, "factors", f"{path}model.atoms[{k}].", list))
            )
            atoms.append(Atom(float(w), factors))
        base = LongRangeModel(phi, tuple(atoms))
    sched_spec = spec.get("schedules", {})
    phi_sched = parse_schedule(sched_spec.get("phi"), f"{path}model.schedules.phi")
    atom_scheds = sched_spec.get("atoms")
    if atom_scheds is None:
        atom_tuple = ()
    else:
        if len(atom_scheds) != len(base.atoms):
            raise ConfigError(
                f"{path}model.schedules.atoms",
                f"need {len(base.atoms)} schedules, got {len(atom_scheds)}",
            )
        atom_tuple = tuple(
            parse_schedule(s, f"{path}model.schedules.atoms[{k}]")
            for k, s in enumerate(atom_scheds)
        )
    return TimeDependentModel(base, phi_sched, atom_tuple)


def parse_cell(spec, spins, ell, path):
    kind = _get(spec, "kind", f"{path}.", str)
    n_modes = len(ell.cell_sites()) * len(spins)
    dim = 1 << n_modes
    if kind == "vacuum":
        m = np.zeros((dim, dim), dtype=complex)
        m[0, 0] = 1.0
        return m
    if kind == "maximally-mixed":
        return np.eye(dim, dtype=complex) / dim
    if kind == "bcs-coherent":
        if tuple(spins) != SPIN_HALF or n_modes != 2:
            raise ConfigError(f"{path}.kind", "bcs-coherent needs a one-site spin-half cell")
        theta = _get(spec, "theta", f"{path}.", (int, float))
        phase = spec.get("phase", 0.0)
        v = np.zeros(4, dtype=complex)
        v[0] = math.cos(theta)
        v[3] = math.sin(theta) * np.exp(1j * phase)
        return np.outer(v, v.conj())
    if kind == "occupation":
        filled = _get(spec, "filled", f"{path}.", list)
        idx = 0
        for m_i in filled:
            if not isinstance(m_i, int) or not (0 <= m_i < n_modes):
                raise ConfigError(f"{path}.filled", f"mode index {m_i} out of range")
            idx |= 1 << m_i
        m = np.zeros((dim, dim), dtype=complex)
        m[idx, idx] = 1.0
        return m
    if kind == "custom-dense":
        mat = decode_matrix(_get(spec, "matrix_b64", f"{path}.", str), dim, f"{path}.matrix_b64")
        if mat.ndim == 1:
            mat = np.outer(mat, mat.conj())
        return mat
    raise ConfigError(f"{path}.kind", f"unknown cell kind {kind!r}")


def parse_state(cfg, spins, d, path=""):
    spec = _get(cfg, "state", path, dict)
    stype = _get(spec, "type", f"{path}state.", str, choices={"product", "mixture"})
    if stype == "product":
        ell = PeriodVector(tuple(spec.get("period", [1] * d)))
        if ell.dimension != d:
            raise ConfigError(f"{path}state.period", f"needs {d} entries")
        cell = parse_cell(_get(spec, "cell", f"{path}state.", dict), spins, ell, f"{path}state.cell")
        return ProductStateSpec(cell, ell, spins)
    comps = _get(spec, "components", f"{path}state.", list)
    weights, parts = [], []
    for k, c in enumerate(comps):
        weights.append(_get(c, "weight", f"{path}state.components[{k}].", (int, float)))
        parts.append(parse_state(c, spins, d, f"{path}state.components[{k}]."))
    try:
        return Mixture(weights, parts)
    except ValueError as exc:
        raise ConfigError(f"{path}state.components", str(exc)) from None


def parse_observable(spec, spins, d, path):
    kind = _get(spec, "kind", f"{path}.", str)
    origin = (0,) * d
    if kind == "identity":
        return identity_local(spins)
    if kind == "pairing":
        if tuple(spins) != SPIN_HALF:
            raise ConfigError(f"{path}.kind", "pairing needs spins [up, down]")
        return annihilator_local(origin, spins, "down") @ annihilator_local(origin, spins, "up")
    if kind == "number":
        spin = spec.get("spin", spins[0])
        if spin not in spins:
            raise ConfigError(f"{path}.spin", f"unknown spin {spin!r}")
        site = tuple(spec.get("site", origin))
        return number_local(site, spins, spin)
    if kind == "hopping":
        spin = spec.get("spin", spins[0])
        e0 = tuple(1 if i == 0 else 0 for i in range(d))
        return creator_local(origin, spins, spin) @ annihilator_local(e0, spins, spin)
    if kind == "custom-dense":
        sites = tuple(tuple(int(c) for c in s) for s in _get(spec, "sites", f"{path}.", list))
        q = len(sites) * len(spins)
        mat = decode_matrix(_get(spec, "matrix_b64", f"{path}.", str), 1 << q, f"{path}.matrix_b64")
        return LocalOp(tuple(sorted(sites)), spins, mat)
    raise ConfigError(f"{path}.kind", f"unknown observable kind {kind!r}")


class ExperimentConfig:
    """Validated experiment configuration."""

    def __init__(self, raw):
        if not isinstance(raw, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        self.raw = raw
        self.experiment = _get(raw, "experiment", "", str, choices=set(EXPERIMENTS))
        self.seed = _get(raw, "seed", "", int, default=0)
        self.name = _get(raw, "name", "", str, default=self.experiment)
        self.threads = _get(raw, "threads", "", int, default=1)
        self.out = _get(raw, "out", "", str, default=None)
        self.spins, self.dimension = parse_spins(raw)
        self.decay = parse_decay(raw)
        time_spec = _get(raw, "time", "", dict, default={})
        self.t_start = float(time_spec.get("start", 0.0))
        self.t_stop = float(time_spec.get("stop", 1.0))
        self.t_nodes = int(time_spec.get("nodes", 51))
        if self.t_nodes < 2:
            raise ConfigError("time.nodes", "must be >= 2")
        sweep = _get(raw, "sweep", "", dict, default={})
        self.L_list = sweep.get("L", [0, 1, 2])
        if not isinstance(self.L_list, list) or not all(
            isinstance(x, int) and x >= 0 for x in self.L_list
        ):
            raise ConfigError("sweep.L", "must be a list of non-negative integers")
        solver = _get(raw, "solver", "", dict, default={})
        self.solver_kw = {
            "tol": float(solver.get("tol", 1e-8)),
            "max_iter": int(solver.get("max_iter", 30)),
            "window": float(solver.get("window", 0.1)),
            "damping": float(solver.get("damping", 1.0)),
            "node_dt": float(solver.get("node_dt", 0.001)),
        }
        self.box_eff_L = solver.get("box_eff_L")
        if self.box_eff_L is not None and (
            not isinstance(self.box_eff_L, int) or self.box_eff_L < 0
        ):
            raise ConfigError("solver.box_eff_L", "must be a non-negative integer")
        self.tolerances = _get(raw, "tolerances", "", dict, default={})

        needs_model = self.experiment in (
            "simulate", "selfconsistent", "converge", "mixture",
        )
        self.model = parse_model(raw, self.spins, self.dimension) if needs_model or "model" in raw else None
        needs_state = self.experiment in (
            "simulate", "selfconsistent", "converge", "mixture", "density",
        )
        self.state = parse_state(raw, self.spins, self.dimension) if needs_state or "state" in raw else None
        if self.experiment == "mixture" and not isinstance(self.state, Mixture):
            raise ConfigError("state.type", "mixture experiment needs a mixture state")
        if self.experiment in ("converge", "simulate", "mixture") and isinstance(
            self.state, Mixture
        ) and self.experiment != "mixture":
            raise ConfigError("state.type", f"{self.experiment} needs a product state")

        # feasibility: reject sweeps that exceed the mode caps up front,
        # before any allocation
        from .fock import VECTOR_MODE_CAP

        n_spins = len(self.spins)
        for L in self.L_list:
            modes = n_spins * (2 * L + 1) ** self.dimension
            if modes > VECTOR_MODE_CAP:
                raise ConfigError(
                    "sweep.L",
                    f"L={L} needs {modes} modes, above the {VECTOR_MODE_CAP}-mode cap",
                )
        if self.box_eff_L is not None:
            modes = n_spins * (2 * self.box_eff_L + 1) ** self.dimension
            if modes > VECTOR_MODE_CAP:
                raise ConfigError(
                    "solver.box_eff_L",
                    f"needs {modes} modes, above the {VECTOR_MODE_CAP}-mode cap",
                )

        obs = _get(raw, "observables", "", dict, default={})
        a_spec = obs.get("A", {"kind": "pairing" if tuple(self.spins) == SPIN_HALF else "number"})
        b_spec = obs.get("B", {"kind": "identity"})
        self.obs_a = parse_observable(a_spec, self.spins, self.dimension, "observables.A")
        self.obs_b = parse_observable(b_spec, self.spins, self.dimension, "observables.B")
        self.lr_draws = int(_get(raw, "lr_draws", "", int, default=20))
        self.density_phi = None
        if "density_interaction" in raw:
            self.density_phi = parse_interaction(
                raw["density_interaction"], self.spins, self.dimension, "density_interaction"
            )

    @classmethod
    def from_file(cls, path):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except FileNotFoundError:
            raise ConfigError("<path>", f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("<root>", f"invalid JSON: {exc}") from None
        return cls(raw)


# -- serialization back to the config format ------------------------------------


def serialize_interaction(interaction):
    """Single config dict (custom-dense terms) reproducing the interaction."""
    terms = [
        {
            "family": "custom-dense",
            "sites": [list(s) for s in op.sites],
            "matrix_b64": encode_matrix(op.matrix),
            "translation_invariant": interaction.translation_invariant,
        }
        for op in interaction.terms
    ]
    if len(terms) == 1:
        return terms[0]
    return {"family": "sum", "parts": terms}


def serialize_model(td_model):
    """Config 'model' entry reproducing a TimeDependentModel."""
    base = td_model.base

    def sched_dict(s):
        return {
            "kind": s.kind,
            "value": s.value,
            "slope": s.slope,
            "amplitude": s.amplitude,
            "omega": s.omega,
            "phase": s.phase,
        }

    return {
        "type": "custom",
        "short_range": [] if base.phi.is_zero() else [serialize_interaction(base.phi)],
        "atoms": [
            {
                "weight": atom.weight,
                "factors": [serialize_interaction(f) for f in atom.factors],
            }
            for atom in base.atoms
        ],
        "schedules": {
            "phi": sched_dict(td_model.phi_schedule),
            "atoms": [sched_dict(s) for s in td_model.atom_schedules],
        },
    }


def serialize_state(spec):
    """Config 'state' entry for a ProductStateSpec or Mixture."""
    if isinstance(spec, Mixture):
        return {
            "type": "mixture",
            "components": [
                {"weight": w, "state": serialize_state(c)}
                for w, c in zip(spec.weights, spec.components)
            ],
        }
    return {
        "type": "product",
        "period": list(spec.ell.ell),
        "cell": {"kind": "custom-dense", "matrix_b64": encode_matrix(spec.cell_matrix)},
    }
