"""Central numerical configuration.

Every tolerance used by the library lives in :class:`Tolerances`.  Named
profiles are selectable from the CLI (``--tol-profile``) and individual
values can be overridden from a config file.
"""

import dataclasses
import os
from dataclasses import dataclass

ENV_DISABLE_NUMBA = "RESOURCELAB_DISABLE_NUMBA"


def numba_enabled():
    """True unless the env flag asks for the pure-numpy kernels."""
    flag = os.environ.get(ENV_DISABLE_NUMBA, "").strip().lower()
    return flag in ("", "0", "false", "no")


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-12
    eig_reconstruction: float = 1e-10
    jacobi_rel_offdiag: float = 1e-13
    jacobi_max_sweeps: int = 100
    trace: float = 1e-10
    psd: float = 1e-9
    kraus_completeness: float = 1e-9
    diagonal: float = 1e-10
    solver_gap: float = 1e-6
    solver_max_iter: int = 20000
    free_lambda: float = 1e-9
    bound_slack: float = 1e-9
    dimension_cap: int = 4096
    # above this dimension hermitian_eig defers to LAPACK (see linalg)
    jacobi_max_dim: int = 128

    def validate(self):
        """Raise ValueError naming the first field outside its sane range."""
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if f.type in ("int", int):
                if not isinstance(value, int) or value < 1:
                    raise ValueError(f"tolerance {f.name!r} must be a positive integer, got {value!r}")
            else:
                if not (isinstance(value, float) and 0.0 < value < 1.0):
                    raise ValueError(f"tolerance {f.name!r} must lie in (0, 1), got {value!r}")
        return self

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


PROFILES = {
    "default": Tolerances(),
    "strict": Tolerances(solver_gap=1e-8, psd=1e-11, bound_slack=1e-11),
    "loose": Tolerances(solver_gap=1e-4, psd=1e-7, bound_slack=1e-7),
}

DEFAULT = PROFILES["default"]


def get_profile(name):
    try:
        return PROFILES[name]
    except KeyError:
        raise ValueError(f"unknown tolerance profile {name!r}; choose from {sorted(PROFILES)}") from None


def tolerances_from_mapping(base, mapping):
    """Apply string overrides (e.g. from an INI section) to ``base``."""
    fields = {f.name: f for f in dataclasses.fields(base)}
    changes = {}
    for key, raw in mapping.items():
        if key not in fields:
            raise ValueError(f"unknown tolerance key {key!r}")
        ftype = fields[key].type
        changes[key] = int(raw) if ftype in ("int", int) else float(raw)
    return base.replace(**changes)
