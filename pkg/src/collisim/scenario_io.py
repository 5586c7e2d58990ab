"""YAML scenario files.

Layout::

    name: my-run
    dims: {system: 2, ancilla: 3}
    interaction: {type: hamiltonian, generator: pauli-spin1}   # or matrix: [...]
    g_tau: 0.2                          # or g: ... (takes precedence)
    tau: 1.0
    steps: 50
    environment: {type: ghz}            # ghz | aklt | factorized | mps | mpdo
    initial_state: {bloch: [0, 0, 1]}   # or matrix: [...]
    outputs: [bloch]

A file may also start from a built-in scenario with ``preset: <name>`` and
override any of ``g_tau``, ``tau``, ``steps`` and ``initial_state``.

Dense matrices are row-major nested lists whose entries are ``[re, im]``
pairs (a bare number is read as a real entry).
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import yaml

from .env import CollisionScenario, EnvironmentMPDO
from .errors import ScenarioParseError, ValidationError
from .operators import GENERATORS, from_bloch
from .presets import ENV_PRESETS, PRESETS, check_preset_invariants

ENV_TYPES = ("factorized", "mps", "mpdo") + tuple(ENV_PRESETS)


def matrix_to_data(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _entry(x, where):
    if isinstance(x, (int, float)):
        return complex(x)
    if isinstance(x, (list, tuple)) and len(x) == 2 and all(isinstance(v, (int, float)) for v in x):
        return complex(x[0], x[1])
    raise ScenarioParseError(f"{where}: matrix entries must be numbers or [re, im] pairs, got {x!r}")


def data_to_matrix(data, where: str) -> np.ndarray:
    if not isinstance(data, list) or not data or not all(isinstance(r, list) for r in data):
        raise ScenarioParseError(f"{where}: expected a nested list of rows")
    rows = [[_entry(x, where) for x in row] for row in data]
    if len({len(r) for r in rows}) != 1:
        raise ScenarioParseError(f"{where}: rows have different lengths")
    return np.array(rows, dtype=complex)


def _vector(data, where):
    if not isinstance(data, list) or not data:
        raise ScenarioParseError(f"{where}: expected a list")
    return np.array([_entry(x, where) for x in data], dtype=complex)


def _require(doc, key, where="scenario"):
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioParseError(f"{where}: missing field {key!r}")
    return doc[key]


def _environment(spec, d) -> EnvironmentMPDO:
    kind = _require(spec, "type", "environment")
    length = spec.get("length")
    if kind in ENV_PRESETS:
        return ENV_PRESETS[kind]()
    if kind == "factorized":
        state = _require(spec, "state", "environment")
        if isinstance(state, list) and state and not isinstance(state[0], list):
            v = _vector(state, "environment.state")
            rho = np.outer(v, v.conj())
        else:
            rho = data_to_matrix(state, "environment.state")
        return EnvironmentMPDO.factorized(rho, length)
    if kind in ("mps", "mpdo"):
        chi0 = data_to_matrix(_require(spec, "chi0", "environment"), "environment.chi0")

        def site(raw, where):
            if kind == "mps":
                mats = [[data_to_matrix(m, f"{where}[{i}]")] for i, m in enumerate(raw)]
            else:
                mats = [
                    [data_to_matrix(m, f"{where}[{i}][{b}]") for b, m in enumerate(fam)] for i, fam in enumerate(raw)
                ]
            return np.array(mats, dtype=complex)

        if "tensor" in spec:
            return EnvironmentMPDO(chi0, site(spec["tensor"], "environment.tensor"), length)
        sites = _require(spec, "sites", "environment")
        return EnvironmentMPDO(chi0, [site(s, f"environment.sites[{k}]") for k, s in enumerate(sites)])
    raise ScenarioParseError(f"environment.type must be one of {', '.join(ENV_TYPES)}, got {kind!r}")


def _initial_state(spec, d_s):
    if not isinstance(spec, dict):
        raise ScenarioParseError("initial_state: expected a mapping with 'bloch' or 'matrix'")
    if "bloch" in spec:
        if d_s != 2:
            raise ScenarioParseError("initial_state.bloch needs a qubit system")
        r = np.array(spec["bloch"], dtype=float)
        if r.shape != (3,):
            raise ScenarioParseError("initial_state.bloch needs three components")
        return from_bloch(r)
    return data_to_matrix(_require(spec, "matrix", "initial_state"), "initial_state.matrix")


def scenario_from_dict(doc: dict) -> CollisionScenario:
    """Build and validate a scenario; errors name the offending field."""
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario file must contain a mapping")
    try:
        if "preset" in doc:
            preset = PRESETS.get(doc["preset"])
            if preset is None:
                raise ScenarioParseError(f"preset: unknown name {doc['preset']!r}")
            sc = preset.scenario(doc.get("g_tau"), doc.get("steps"), float(doc.get("tau", 1.0)))
            if "initial_state" in doc:
                sc = sc.replace(rho_s0=_initial_state(doc["initial_state"], sc.d_s))
            check_preset_invariants(preset.name, sc)
            return sc
        dims = _require(doc, "dims")
        d_s, d = int(_require(dims, "system", "dims")), int(_require(dims, "ancilla", "dims"))
        inter = _require(doc, "interaction")
        kind = _require(inter, "type", "interaction")
        if "generator" in inter:
            name = inter["generator"]
            if name not in GENERATORS:
                raise ScenarioParseError(f"interaction.generator: unknown preset {name!r}")
            op = GENERATORS[name]()
        else:
            op = data_to_matrix(_require(inter, "matrix", "interaction"), "interaction.matrix")
        if kind not in ("hamiltonian", "unitary"):
            raise ScenarioParseError(f"interaction.type must be hamiltonian or unitary, got {kind!r}")
        tau = float(doc.get("tau", 1.0))
        if "g" in doc:
            g = float(doc["g"])
        elif kind == "hamiltonian":
            g = float(_require(doc, "g_tau")) / tau
        else:
            g = float(doc.get("g_tau", 1.0)) / tau
        env = _environment(_require(doc, "environment"), d)
        rho0 = _initial_state(_require(doc, "initial_state"), d_s)
        return CollisionScenario(
            d_s=d_s,
            d=d,
            g=g,
            tau=tau,
            rho_s0=rho0,
            env=env,
            steps=int(_require(doc, "steps")),
            hamiltonian=op if kind == "hamiltonian" else None,
            unitary=op if kind == "unitary" else None,
            name=str(doc.get("name", "")),
        )
    except (TypeError, KeyError) as exc:
        raise ScenarioParseError(f"malformed scenario: {exc}") from None


def load_scenario(path) -> CollisionScenario:
    text = Path(path).read_text()
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ScenarioParseError(f"{path}: YAML parse error{where}: {getattr(exc, 'problem', exc)}") from None
    try:
        return scenario_from_dict(doc)
    except ScenarioParseError as exc:
        raise ScenarioParseError(f"{path}: {exc}") from None
    except ValidationError as exc:
        raise type(exc)(f"{path}: {exc}") from None


def _env_to_dict(env: EnvironmentMPDO) -> dict:
    for name, build in ENV_PRESETS.items():
        ref = build()
        if env.homogeneous and ref.homogeneous and np.array_equal(ref.chi0, env.chi0) and (
            ref.tensors.shape == env.tensors.shape and np.array_equal(ref.tensors, env.tensors)
        ):
            return {"type": name}

    def site(t):
        return [[matrix_to_data(t[i, b]) for b in range(t.shape[1])] for i in range(t.shape[0])]

    out = {"type": "mpdo", "chi0": matrix_to_data(env.chi0)}
    if env.homogeneous:
        out["tensor"] = site(env.tensors)
        if env.length is not None:
            out["length"] = env.length
    else:
        out["sites"] = [site(t) for t in env.tensors]
    return out


def scenario_to_dict(sc: CollisionScenario) -> dict:
    if sc.hamiltonian is not None:
        inter = {"type": "hamiltonian"}
        named = [n for n, f in GENERATORS.items() if np.array_equal(f(), sc.hamiltonian)]
        if named:
            inter["generator"] = named[0]
        else:
            inter["matrix"] = matrix_to_data(sc.hamiltonian)
    else:
        inter = {"type": "unitary", "matrix": matrix_to_data(sc.unitary)}
    return {
        "name": sc.name,
        "dims": {"system": sc.d_s, "ancilla": sc.d},
        "interaction": inter,
        "g_tau": float(sc.g * sc.tau),
        "g": float(sc.g),
        "tau": float(sc.tau),
        "steps": int(sc.steps),
        "environment": _env_to_dict(sc.env),
        "initial_state": {"matrix": matrix_to_data(sc.rho_s0)},
        "outputs": ["bloch"] if sc.d_s == 2 else ["matrix"],
    }


def dump_scenario(sc: CollisionScenario) -> str:
    return yaml.safe_dump(scenario_to_dict(sc), sort_keys=False, default_flow_style=None)


def save_scenario(sc: CollisionScenario, path) -> None:
    Path(path).write_text(dump_scenario(sc))

