"""Experiment configuration files.

A config is a YAML document with a required ``schema_version`` and
optional sections ``quadrotor``, ``weights`` (``dq``/``baseline``),
``ocp``, ``solver``, ``trajectory``, ``disturbances``, ``experiment``.
Every field is optional and falls back to the library default for its
dataclass.  Unknown keys are rejected with an error naming the key, so
a typo fails loudly instead of silently running the default.

Matrix-valued weights accept a scalar (multiple of identity), a flat
list (diagonal), or a nested list (full matrix).

``disturbances`` describes either a single scenario (its fields inline,
optional ``name``) or, for tracking studies, ``scenarios:`` with a list
of named entries; ``load_scenarios`` returns them all.
"""

from __future__ import annotations

import numpy as np
import yaml

from .baseline import BaselineWeights
from .dynamics import DisturbanceConfig, QuadrotorParams
from .harness import ExperimentConfig
from .ocp import OcpConfig, Weights
from .reference import TrajectorySpec
from .sqp import SolverConfig

__all__ = ["ConfigError", "SCHEMA_VERSION", "load_config", "parse_config",
           "load_scenarios"]

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    pass


def _check_keys(doc: dict, allowed, where: str):
    for key in doc:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


def _mat(val, n: int, where: str) -> np.ndarray:
    if isinstance(val, (int, float)):
        return float(val) * np.eye(n)
    arr = np.asarray(val, float)
    if arr.shape == (n,):
        return np.diag(arr)
    if arr.shape == (n, n):
        return arr
    raise ConfigError(f"{where} must be a scalar, length-{n} diagonal, "
                      f"or {n}x{n} matrix")


def _vec(val, n: int, where: str) -> np.ndarray:
    arr = np.asarray(val, float)
    if arr.shape != (n,):
        raise ConfigError(f"{where} must be a length-{n} vector")
    return arr


_QUAD_KEYS = ("m", "j_diag", "g", "drag_c", "f_min", "f_max", "tau_max")
_OCP_KEYS = ("horizon_s", "n_nodes", "u_min", "u_max", "norm_tol")
_SOLVER_KEYS = ("mode", "max_sqp_iter", "tol_kkt", "step_rule", "levenberg",
                "merit_penalty", "qp_max_iter", "armijo_c", "backtrack_beta")
_TRAJ_KEYS = ("kind", "center", "amplitudes", "angular_freqs", "phases",
              "yaw_mode", "yaw_fixed", "duration")
_DQW_KEYS = ("Qp", "Qv", "R", "QpN", "QvN")
_BLW_KEYS = ("Qpos", "Qvel", "Qquat", "Qomega", "Rb",
             "QposN", "QvelN", "QquatN", "QomegaN")
_DIST_KEYS = ("name", "drag_scale", "mass_scale", "inertia_scale",
              "ext_force", "ext_moment")
_EXP_KEYS = ("seed", "n_samples", "pos_low", "pos_high", "ang_min", "ang_max",
             "controller", "sim_duration", "control_rate", "conv_pos_tol",
             "conv_ori_tol", "divergence_pos")
_TOP_KEYS = ("schema_version", "quadrotor", "weights", "ocp", "solver",
             "trajectory", "disturbances", "experiment")

# matrix fields and their dimensions, by weights section
_DQW_DIMS = {"Qp": 6, "Qv": 6, "R": 6, "QpN": 6, "QvN": 6}
_BLW_DIMS = {"Qpos": 3, "Qvel": 3, "Qquat": 3, "Qomega": 3, "Rb": 4,
             "QposN": 3, "QvelN": 3, "QquatN": 3, "QomegaN": 3}


def _parse_quadrotor(doc: dict) -> QuadrotorParams:
    _check_keys(doc, _QUAD_KEYS, "quadrotor")
    kw = dict(doc)
    if "j_diag" in kw:
        kw["j_diag"] = _vec(kw["j_diag"], 3, "quadrotor.j_diag")
    try:
        return QuadrotorParams(**kw)
    except ValueError as e:
        raise ConfigError(f"quadrotor: {e}") from None


def _parse_weights(doc: dict, section: str, dims: dict, cls):
    allowed = tuple(dims)
    _check_keys(doc, allowed, f"weights.{section}")
    kw = {k: _mat(v, dims[k], f"weights.{section}.{k}") for k, v in doc.items()}
    try:
        return cls(**kw)
    except ValueError as e:
        raise ConfigError(f"weights.{section}: {e}") from None


def _parse_ocp(doc: dict) -> OcpConfig:
    _check_keys(doc, _OCP_KEYS, "ocp")
    kw = dict(doc)
    for b in ("u_min", "u_max"):
        if b in kw:
            kw[b] = np.asarray(kw[b], float)
    try:
        return OcpConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"ocp: {e}") from None


def _parse_solver(doc: dict) -> SolverConfig:
    _check_keys(doc, _SOLVER_KEYS, "solver")
    try:
        return SolverConfig(**doc)
    except ValueError as e:
        raise ConfigError(f"solver: {e}") from None


def _parse_trajectory(doc: dict) -> TrajectorySpec:
    _check_keys(doc, _TRAJ_KEYS, "trajectory")
    kw = dict(doc)
    for v in ("center", "amplitudes", "angular_freqs", "phases"):
        if v in kw:
            kw[v] = _vec(kw[v], 3, f"trajectory.{v}")
    try:
        return TrajectorySpec(**kw)
    except ValueError as e:
        raise ConfigError(f"trajectory: {e}") from None


def _parse_one_disturbance(doc: dict, where: str) -> tuple[str, DisturbanceConfig]:
    _check_keys(doc, _DIST_KEYS, where)
    kw = dict(doc)
    name = kw.pop("name", "nominal")
    for v in ("ext_force", "ext_moment"):
        if v in kw:
            kw[v] = _vec(kw[v], 3, f"{where}.{v}")
    try:
        return str(name), DisturbanceConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"{where}: {e}") from None


def _parse_disturbances(doc: dict) -> list[tuple[str, DisturbanceConfig]]:
    if "scenarios" in doc:
        _check_keys(doc, ("scenarios",), "disturbances")
        out = []
        for i, entry in enumerate(doc["scenarios"]):
            if not isinstance(entry, dict):
                raise ConfigError(f"disturbances.scenarios[{i}] must be a mapping")
            out.append(_parse_one_disturbance(entry, f"disturbances.scenarios[{i}]"))
        if not out:
            raise ConfigError("disturbances.scenarios is empty")
        return out
    return [_parse_one_disturbance(doc, "disturbances")]


def parse_config(doc: dict) -> ExperimentConfig:
    """Build the campaign config from a parsed YAML document.

    When the document holds several disturbance scenarios, the returned
    config carries the first; ``load_scenarios`` exposes the rest.
    """
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    _check_keys(doc, _TOP_KEYS, "config")
    if "schema_version" not in doc:
        raise ConfigError("missing required key 'schema_version'")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(
            f"unsupported schema_version {doc['schema_version']!r} "
            f"(this build reads {SCHEMA_VERSION})")

    kw = {}
    if "quadrotor" in doc:
        kw["params"] = _parse_quadrotor(doc["quadrotor"] or {})
    if "weights" in doc:
        wdoc = doc["weights"] or {}
        _check_keys(wdoc, ("dq", "baseline"), "weights")
        if "dq" in wdoc:
            kw["dq_weights"] = _parse_weights(wdoc["dq"] or {}, "dq",
                                              _DQW_DIMS, Weights)
        if "baseline" in wdoc:
            kw["baseline_weights"] = _parse_weights(wdoc["baseline"] or {},
                                                    "baseline", _BLW_DIMS,
                                                    BaselineWeights)
    if "ocp" in doc:
        kw["ocp"] = _parse_ocp(doc["ocp"] or {})
    if "solver" in doc:
        kw["solver"] = _parse_solver(doc["solver"] or {})
    if "trajectory" in doc:
        kw["trajectory"] = _parse_trajectory(doc["trajectory"] or {})
    if "disturbances" in doc:
        name, dist = _parse_disturbances(doc["disturbances"] or {})[0]
        kw["scenario"] = name
        kw["disturbances"] = dist
    if "experiment" in doc:
        edoc = doc["experiment"] or {}
        _check_keys(edoc, _EXP_KEYS, "experiment")
        kw.update(edoc)
        for v in ("pos_low", "pos_high"):
            if v in kw:
                kw[v] = _vec(kw[v], 3, f"experiment.{v}")
    try:
        return ExperimentConfig(**kw)
    except ValueError as e:
        raise ConfigError(f"experiment: {e}") from None


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        doc = yaml.safe_load(f)
    return parse_config(doc)


def load_scenarios(path) -> list[tuple[str, DisturbanceConfig]]:
    """All named disturbance scenarios in the file (at least one)."""
    with open(path) as f:
        doc = yaml.safe_load(f)
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    if "disturbances" not in doc or not doc["disturbances"]:
        return [("nominal", DisturbanceConfig())]
    return _parse_disturbances(doc["disturbances"])
