"""JSON scenario configurations.

Complex numbers are written as [re, im] pairs (a bare number is real);
matrices are row-major lists of rows.  States are normalized on load.

A config looks like::

    {"kind": "abl_query", "seed": 0,
     "params": {"initial": [1, 0], "final": [[0.6, 0], [0.8, 0]],
                "observable": [[0, 1], [1, 0]]}}
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .hilbert import (
    MAX_DIMENSION,
    NotHermitianError,
    OperatorMatrix,
    PureState,
    SubsystemLayout,
    is_hermitian,
)
from .rules import DegenerateObservableError, InconsistentBoundaryError, abl_probability, eigenbasis
from .twostate import OVERLAP_TOL

KINDS = (
    "single_measurement",
    "sequential_measurement",
    "signaling",
    "born_ensemble",
    "robustness_sweep",
    "abl_query",
    "weak_value_query",
)
STOCHASTIC_KINDS = ("born_ensemble",)


class ConfigError(ValueError):
    """Invalid config; ``where`` is "line L, column C" or a field path."""

    def __init__(self, message: str, where: str = ""):
        self.where = where
        super().__init__(f"{where}: {message}" if where else message)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    kind: str
    params: dict
    seed: Optional[int]
    output: Optional[str]
    raw: dict
    notes: tuple[str, ...] = field(default=())

    def with_seed(self, seed: int) -> "ScenarioConfig":
        raw = copy.deepcopy(self.raw)
        raw["seed"] = int(seed)
        return parse_config(raw)


def _complex(value: Any, path: str) -> complex:
    if isinstance(value, bool):
        raise ConfigError("expected a number or [re, im] pair", path)
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(value[0], value[1])
    raise ConfigError("expected a number or [re, im] pair", path)


def _vector(value: Any, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a nonempty list of amplitudes", path)
    vec = np.array([_complex(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if not np.all(np.isfinite(vec)):
        raise ConfigError("amplitudes must be finite", path)
    return vec


def _matrix(value: Any, path: str) -> np.ndarray:
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a nonempty list of rows", path)
    rows = [_vector(r, f"{path}[{i}]") for i, r in enumerate(value)]
    n = len(rows)
    for i, r in enumerate(rows):
        if len(r) != n:
            raise ConfigError(f"row has {len(r)} entries, matrix needs {n}", f"{path}[{i}]")
    return np.array(rows)


def _int(value: Any, path: str, minimum: Optional[int] = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError("expected an integer", path)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be at least {minimum}", path)
    return value


def _float(value: Any, path: str, lo: Optional[float] = None, hi: Optional[float] = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError("expected a real number", path)
    if (lo is not None and value < lo) or (hi is not None and value > hi):
        raise ConfigError(f"must lie in [{lo}, {hi}]", path)
    return float(value)


def _choice(value: Any, path: str, options) -> str:
    if value not in options:
        raise ConfigError(f"must be one of {', '.join(map(str, options))}", path)
    return value


def _layout(value: Any, dim: int, path: str) -> SubsystemLayout:
    if value is None:
        if dim > MAX_DIMENSION:
            raise ConfigError(f"dimension {dim} exceeds the dense cap", path)
        return SubsystemLayout.of(("system", dim))
    if not isinstance(value, list) or not value:
        raise ConfigError("expected a list of [label, dim] pairs", path)
    pairs = []
    for i, item in enumerate(value):
        if not (isinstance(item, list) and len(item) == 2 and isinstance(item[0], str)):
            raise ConfigError("expected [label, dim]", f"{path}[{i}]")
        pairs.append((item[0], _int(item[1], f"{path}[{i}][1]", 1)))
    try:
        layout = SubsystemLayout.of(*pairs)
    except ValueError as exc:
        raise ConfigError(str(exc), path) from None
    if layout.dim != dim:
        raise ConfigError(f"layout dimension {layout.dim} does not match state dimension {dim}", path)
    return layout


class _Params:
    """Reads one params object, tracking which keys were consumed."""

    def __init__(self, raw: Any, path: str = "params"):
        if not isinstance(raw, dict):
            raise ConfigError("expected an object", path)
        self.raw, self.path, self.used = raw, path, set()

    def get(self, key, default=None, required=False):
        self.used.add(key)
        if key not in self.raw:
            if required:
                raise ConfigError("missing required field", f"{self.path}.{key}")
            return default
        return self.raw[key]

    def at(self, key):
        return f"{self.path}.{key}"

    def finish(self):
        extra = sorted(set(self.raw) - self.used)
        if extra:
            raise ConfigError("unknown field", f"{self.path}.{extra[0]}")


def _state(p: _Params, key: str, notes: list, required=True, default=None) -> Optional[np.ndarray]:
    raw = p.get(key, required=required)
    if raw is None:
        return default
    vec = _vector(raw, p.at(key))
    norm = float(np.linalg.norm(vec))
    if norm == 0:
        raise ConfigError("state has zero norm", p.at(key))
    if abs(norm - 1) > 1e-12:
        notes.append(f"{p.at(key)} normalized on load (norm was {norm!r})")
        vec = vec / norm
    return vec


def _observable(p: _Params, layout: SubsystemLayout, key: str = "observable") -> OperatorMatrix:
    mat = _matrix(p.get(key, required=True), p.at(key))
    if mat.shape[0] != layout.dim:
        raise ConfigError(f"observable is {mat.shape[0]}x{mat.shape[0]}, states have dimension {layout.dim}", p.at(key))
    if not is_hermitian(mat):
        raise ConfigError("observable must be hermitian", p.at(key))
    op = OperatorMatrix(layout, mat, hermitian=True)
    return op


def _boundary_pair(p: _Params, notes: list):
    initial = _state(p, "initial", notes)
    final = _state(p, "final", notes)
    if initial.shape != final.shape:
        raise ConfigError("initial and final states have different dimensions", p.at("final"))
    layout = _layout(p.get("layout"), len(initial), p.at("layout"))
    return layout, PureState(layout, initial), PureState(layout, final)


def _parse_abl_query(p: _Params, notes: list) -> dict:
    layout, initial, final = _boundary_pair(p, notes)
    obs = _observable(p, layout)
    try:
        abl_probability(initial, final, obs)
    except DegenerateObservableError as exc:
        raise ConfigError(str(exc), p.at("observable")) from None
    except InconsistentBoundaryError:
        raise ConfigError(
            "boundary pair admits no outcome of the observable (orthogonal through every eigenstate)",
            p.at("final"),
        ) from None
    return {"initial": initial, "final": final, "observable": obs}


def _parse_weak_value_query(p: _Params, notes: list) -> dict:
    layout, initial, final = _boundary_pair(p, notes)
    if abs(np.vdot(final.amplitudes, initial.amplitudes)) <= OVERLAP_TOL:
        raise ConfigError("initial and final states are orthogonal", p.at("final"))
    ops = p.get("observables")
    if ops is None:
        obs = {"A": _observable(p, layout)}
    else:
        if not isinstance(ops, dict) or not ops:
            raise ConfigError("expected an object of named matrices", p.at("observables"))
        sub = _Params(ops, p.at("observables"))
        obs = {name: _observable(sub, layout, name) for name in ops}
        sub.finish()
    return {"initial": initial, "final": final, "observables": obs}


def _parse_born_ensemble(p: _Params, notes: list) -> dict:
    vec = _state(p, "initial", notes)
    layout = _layout(p.get("layout"), len(vec), p.at("layout"))
    obs = _observable(p, layout)
    try:
        eigenbasis(obs)
    except DegenerateObservableError as exc:
        raise ConfigError(str(exc), p.at("observable")) from None
    return {
        "initial": PureState(layout, vec),
        "observable": obs,
        "size": _int(p.get("size", required=True), p.at("size"), 1),
    }


def _parse_single(p: _Params, notes: list) -> dict:
    alpha = _complex(p.get("alpha", 2**-0.5), p.at("alpha"))
    beta = _complex(p.get("beta", 2**-0.5), p.at("beta"))
    if abs(alpha) == 0 and abs(beta) == 0:
        raise ConfigError("alpha and beta cannot both vanish", p.at("alpha"))
    norm = float(np.hypot(abs(alpha), abs(beta)))
    if abs(norm - 1) > 1e-12:
        notes.append(f"{p.at('alpha')}, {p.at('beta')} normalized on load (norm was {norm!r})")
        alpha, beta = alpha / norm, beta / norm
    out = {
        "alpha": alpha,
        "beta": beta,
        "final_particle": _state(p, "final_particle", notes, required=False),
        "final_outcome": _choice(p.get("final_outcome", "I"), p.at("final_outcome"), ("I", "II")),
        "eps_orth": _float(p.get("eps_orth", 0.0), p.at("eps_orth"), 0.0, 0.999),
        "env_qubits": _int(p.get("env_qubits", 3), p.at("env_qubits"), 2),
    }
    if out["final_particle"] is not None and len(out["final_particle"]) != 2:
        raise ConfigError("particle state must have 2 amplitudes", p.at("final_particle"))
    ratio = p.get("projection_ratio")
    out["projection_ratio"] = None if ratio is None else _float(ratio, p.at("projection_ratio"), 0.0)
    return out


def _parse_sequential(p: _Params, notes: list) -> dict:
    a = _complex(p.get("a", 2**-0.5), p.at("a"))
    b = _complex(p.get("b", 2**-0.5), p.at("b"))
    norm = float(np.hypot(abs(a), abs(b)))
    if norm == 0:
        raise ConfigError("a and b cannot both vanish", p.at("a"))
    if abs(norm - 1) > 1e-12:
        notes.append(f"{p.at('a')}, {p.at('b')} normalized on load (norm was {norm!r})")
        a, b = a / norm, b / norm
    out = {
        "a": a,
        "b": b,
        "final_spin": _state(p, "final_spin", notes, required=False),
        "final_x": _choice(p.get("final_x", "U"), p.at("final_x"), ("U", "D")),
        "final_y": _choice(p.get("final_y", "U"), p.at("final_y"), ("U", "D")),
        "eps_orth": _float(p.get("eps_orth", 0.0), p.at("eps_orth"), 0.0, 0.999),
        "env_qubits": _int(p.get("env_qubits", 3), p.at("env_qubits"), 3),
    }
    if out["final_spin"] is not None and len(out["final_spin"]) != 2:
        raise ConfigError("spin state must have 2 amplitudes", p.at("final_spin"))
    return out


def _parse_signaling(p: _Params, notes: list) -> dict:
    acts = p.get("alice_acts", required=True)
    if not isinstance(acts, bool):
        raise ConfigError("expected true or false", p.at("alice_acts"))
    return {"alice_acts": acts}


def _grid(p: _Params, key: str, default, parse) -> tuple:
    raw = p.get(key)
    if raw is None:
        return tuple(default)
    if not isinstance(raw, list) or not raw:
        raise ConfigError("expected a nonempty list", p.at(key))
    return tuple(parse(v, f"{p.at(key)}[{i}]") for i, v in enumerate(raw))


def _parse_sweep(p: _Params, notes: list) -> dict:
    from .robustness import DEFAULT_GRID

    out = {
        "c": _grid(p, "c", DEFAULT_GRID["c"], lambda v, at: _float(v, at, 0.0, 1.0)),
        "N": _grid(p, "N", DEFAULT_GRID["N"], lambda v, at: _int(v, at, 1)),
        "n": _grid(p, "n", DEFAULT_GRID["n"], lambda v, at: _int(v, at, 0)),
        "collapse": _choice(p.get("collapse", "symmetric"), p.at("collapse"), ("symmetric", "branch1")),
    }
    for n in out["n"]:
        if n >= min(out["N"]):
            raise ConfigError(f"n={n} is not below every N (macroscopic core)", p.at("n"))
    return out


_PARSERS = {
    "abl_query": _parse_abl_query,
    "weak_value_query": _parse_weak_value_query,
    "born_ensemble": _parse_born_ensemble,
    "single_measurement": _parse_single,
    "sequential_measurement": _parse_sequential,
    "signaling": _parse_signaling,
    "robustness_sweep": _parse_sweep,
}


def parse_config(raw: Any) -> ScenarioConfig:
    """Validate an already-decoded config object."""
    if not isinstance(raw, dict):
        raise ConfigError("top level must be an object", "$")
    extra = sorted(set(raw) - {"kind", "seed", "params", "output", "description"})
    if extra:
        raise ConfigError("unknown field", extra[0])
    kind = raw.get("kind")
    if kind is None:
        raise ConfigError("missing required field", "kind")
    _choice(kind, "kind", KINDS)
    seed = raw.get("seed")
    if seed is not None:
        seed = _int(seed, "seed", 0)
    elif kind in STOCHASTIC_KINDS:
        raise ConfigError(f"{kind} is stochastic and needs a seed", "seed")
    output = raw.get("output")
    if output is not None and not isinstance(output, str):
        raise ConfigError("expected a path string", "output")
    notes: list[str] = []
    p = _Params(raw.get("params", {}))
    try:
        params = _PARSERS[kind](p, notes)
    except (NotHermitianError, InconsistentBoundaryError) as exc:
        raise ConfigError(str(exc), "params") from None
    p.finish()
    return ScenarioConfig(kind, params, seed, output, copy.deepcopy(raw), tuple(notes))


def loads_config(text: str) -> ScenarioConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(exc.msg, f"line {exc.lineno}, column {exc.colno}") from None
    return parse_config(raw)


def load_config(path) -> ScenarioConfig:
    return loads_config(Path(path).read_text())
