"""Bundled reproducible experiment presets.

Budgets on the reference machine class (commodity 8-core):
smoke < 1 s; bcs-selfconsistent < 1 min; lr-sweep < 3 min;
density-sweep < 1 min; mixture-demo < 3 min; bcs-converge < 10 min.
"""

import copy

_BCS_STATE = {
    "type": "product",
    "period": [1],
    "cell": {"kind": "bcs-coherent", "theta": 0.7853981633974483},
}

PRESETS = {
    "smoke": {
        "name": "smoke",
        "experiment": "selfconsistent",
        "seed": 0,
        "lattice": {"dimension": 1, "spins": ["up", "down"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "model": {"type": "bcs", "gamma": 1.0, "mu": 0.5},
        "state": _BCS_STATE,
        "time": {"start": 0.0, "stop": 0.0},
        "sweep": {"L": [0]},
        "solver": {"box_eff_L": 0},
        "description": "1-site, t=0 self-consistency; exercises the full stack in under a second",
    },
    "bcs-selfconsistent": {
        "name": "bcs-selfconsistent",
        "experiment": "selfconsistent",
        "seed": 0,
        "lattice": {"dimension": 1, "spins": ["up", "down"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "model": {"type": "bcs", "gamma": 1.0, "mu": 0.5},
        "state": _BCS_STATE,
        "time": {"start": 0.0, "stop": 2.0},
        "sweep": {"L": [0]},
        "solver": {"tol": 1e-8, "max_iter": 30, "window": 0.1, "box_eff_L": 0},
        "description": "one-site-cell BCS flow on [0,2]; trajectory matches the pseudospin precession",
    },
    "bcs-converge": {
        "name": "bcs-converge",
        "experiment": "converge",
        "seed": 1,
        "lattice": {"dimension": 1, "spins": ["up", "down"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "model": {"type": "bcs", "gamma": 1.0, "mu": 0.5},
        "state": _BCS_STATE,
        "observables": {"A": {"kind": "pairing"}, "B": {"kind": "identity"}},
        "time": {"start": 0.0, "stop": 1.0},
        "sweep": {"L": [0, 1, 2]},
        "solver": {"tol": 1e-8, "max_iter": 30, "window": 0.1, "box_eff_L": 0},
        "description": "flagship full-vs-effective dynamics gap sweep (strictly decreasing)",
    },
    "lr-sweep": {
        "name": "lr-sweep",
        "experiment": "lrbound",
        "seed": 7,
        "lattice": {"dimension": 1, "spins": ["s"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "time": {"start": 0.0, "stop": 1.0},
        "sweep": {"L": [1, 2, 3]},
        "lr_draws": 12,
        "description": "randomized commutator-estimate checks across box sizes",
    },
    "density-sweep": {
        "name": "density-sweep",
        "experiment": "density",
        "seed": 0,
        "lattice": {"dimension": 1, "spins": ["s"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "state": {
            "type": "product",
            "period": [1],
            "cell": {"kind": "custom-dense", "matrix_b64": None},
        },
        "sweep": {"L": [1, 2, 3, 4]},
        "description": "local-energy density gaps and ergodicity-defect decay across L",
    },
    "mixture-demo": {
        "name": "mixture-demo",
        "experiment": "mixture",
        "seed": 0,
        "lattice": {"dimension": 1, "spins": ["up", "down"]},
        "decay": {"family": "exponential", "kappa": 1.0},
        "model": {"type": "bcs", "gamma": 1.0, "mu": 0.5},
        "state": {
            "type": "mixture",
            "components": [
                {
                    "weight": 0.5,
                    "state": {
                        "type": "product",
                        "period": [1],
                        "cell": {"kind": "bcs-coherent", "theta": 0.7853981633974483, "phase": 0.9},
                    },
                },
                {
                    "weight": 0.5,
                    "state": {
                        "type": "product",
                        "period": [1],
                        "cell": {"kind": "bcs-coherent", "theta": 0.7853981633974483, "phase": -0.9},
                    },
                },
            ],
        },
        "observables": {"A": {"kind": "pairing"}, "B": {"kind": "identity"}},
        "time": {"start": 0.0, "stop": 0.6},
        "sweep": {"L": [0, 1]},
        "solver": {"tol": 1e-8, "window": 0.1, "box_eff_L": 0},
        "description": "two-phase BCS mixture: per-fiber flows plus the mixed gap trend",
    },
}


def _density_cell_b64():
    import numpy as np

    from .config import encode_matrix

    return encode_matrix(np.diag([0.3, 0.7]).astype(complex))


def get_preset(name):
    if name not in PRESETS:
        raise KeyError(name)
    preset = copy.deepcopy(PRESETS[name])
    if name == "density-sweep":
        preset["state"]["cell"]["matrix_b64"] = _density_cell_b64()
    return preset


def preset_names():
    return sorted(PRESETS)


def describe_presets():
    return [(n, PRESETS[n].get("description", "")) for n in preset_names()]
