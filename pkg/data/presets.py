"""
Run configuration presets
Coarsening runs on (0, 2pi)^2 with random initial data, the manufactured-solution
convergence study and the FBDF2/BDF2 compatibility study
"""
from typing import Dict

# Manufactured solution omega_{1+alpha}(t) sin x sin y on graded meshes
EX1: Dict[str, dict] = {
    "model": {"alpha": 0.4, "kappa": 1.0, "eps": 0.5},
    "grid": {"Mx": 32, "My": 32},
    "converge": {"T": 1.0, "gamma": 3.0, "N_base": 20, "refinements": 6},
    "solver": {"fp_tol": 1e-12, "initial": "zero"},
}

# Coarsening: graded prefix on [0, 0.01] followed by adaptive steps
_COARSENING_MODEL = {"alpha": 0.5, "kappa": 0.01, "eps": 0.05}
_COARSENING_MESH = {
    "mode": "adaptive",
    "T0": 0.01,
    "N0": 30,
    "gamma": 2.0,
    "tau_min": 1e-3,
    "tau_max": 1e-1,
    "eta_user": 1e3,
}
_COARSENING_SOLVER = {"initial": "random", "amplitude": 1e-3, "seed": 42}

EX2_DESK: Dict[str, dict] = {
    "model": dict(_COARSENING_MODEL),
    "grid": {"Mx": 64, "My": 64},
    "mesh": {**_COARSENING_MESH, "T": 100.0},
    "solver": dict(_COARSENING_SOLVER),
    "output": {"snapshot_times": [10.0, 30.0, 50.0, 100.0]},
}

EX2_FULL: Dict[str, dict] = {
    "model": dict(_COARSENING_MODEL),
    "grid": {"Mx": 128, "My": 128},
    "mesh": {**_COARSENING_MESH, "T": 500.0},
    "solver": dict(_COARSENING_SOLVER),
    "output": {"snapshot_times": [10.0, 30.0, 50.0, 100.0, 500.0]},
}


def _eta_study(eta_user: float) -> Dict[str, dict]:
    return {
        "model": dict(_COARSENING_MODEL),
        "grid": {"Mx": 64, "My": 64},
        "mesh": {**_COARSENING_MESH, "T": 100.0, "eta_user": eta_user},
        "solver": dict(_COARSENING_SOLVER),
    }


# uniform tau = 5e-3 reference for the eta study
ETA_STUDY_REFERENCE: Dict[str, dict] = {
    "model": dict(_COARSENING_MODEL),
    "grid": {"Mx": 64, "My": 64},
    "mesh": {"mode": "uniform", "T": 100.0, "tau_max": 5e-3},
    "solver": dict(_COARSENING_SOLVER),
}

# Smooth data on a fixed uniform mesh, FBDF2(alpha) against BDF2
COMPAT: Dict[str, dict] = {
    "model": {"alpha": 0.9, "kappa": 1.0, "eps": 0.5},
    "grid": {"Mx": 32, "My": 32},
    "mesh": {"mode": "uniform", "T": 1.0, "tau_max": 1e-2},
    "solver": {"initial": "smooth", "amplitude": 0.5},
}

PRESETS: Dict[str, Dict[str, dict]] = {
    "ex1": EX1,
    "ex2-desk": EX2_DESK,
    "ex2-full": EX2_FULL,
    "eta-study-10": _eta_study(10.0),
    "eta-study-100": _eta_study(100.0),
    "eta-study-1000": _eta_study(1000.0),
    "eta-study-reference": ETA_STUDY_REFERENCE,
    "compat": COMPAT,
}
