"""Default tolerances and size caps.

``COLLISIM_TOL`` overrides tolerances for the whole process. It accepts either
a single number (applied to every tolerance) or comma-separated ``name=value``
pairs, e.g. ``COLLISIM_TOL="tol_eig=1e-8,tol_trace=1e-9"``.
"""
import dataclasses
import os


@dataclasses.dataclass(frozen=True)
class Tolerances:
    tol_herm: float = 1e-10
    tol_trace: float = 1e-10
    tol_psd: float = 1e-10
    tol_unitary: float = 1e-10
    tol_eig: float = 1e-9
    # eigenvalue grouping for spectral decompositions
    tol_degenerate: float = 1e-8
    # |lambda - 1| below this counts as a unit eigenvalue of the transfer matrix
    tol_unit: float = 1e-8


def _from_env(raw):
    base = Tolerances()
    if not raw:
        return base
    raw = raw.strip()
    try:
        value = float(raw)
    except ValueError:
        pass
    else:
        return Tolerances(*([value] * len(dataclasses.fields(Tolerances))))
    updates = {}
    names = {f.name for f in dataclasses.fields(Tolerances)}
    for item in raw.split(","):
        key, _, val = item.partition("=")
        key = key.strip()
        if key not in names:
            raise ValueError(f"COLLISIM_TOL: unknown tolerance {key!r}")
        updates[key] = float(val)
    return dataclasses.replace(base, **updates)


TOL = _from_env(os.environ.get("COLLISIM_TOL"))

# dense objects: state vectors up to 2**16 amplitudes, matrices up to 2**26 entries
STATE_CAP = 2**16
ENTRY_CAP = 2**26
