"""
Run configuration and artifact serialization.

Configurations are JSON documents validated by pydantic; unknown keys are
rejected and every default is written back into the effective config.
Trajectories are written as CSV, reports as JSON.  Every artifact carries the
SHA-256 hash of the effective config.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path
from typing import Annotated, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, model_validator

from . import model
from .errors import ArgumentError
from .reparam import ParamTrajectory
from .viscous import ViscousTrajectory

__all__ = [
    "RunConfig",
    "ConfigError",
    "ConfigReadError",
    "parse_config",
    "dump_config",
    "config_hash",
    "write_json",
    "read_json",
    "write_viscous_csv",
    "read_viscous_csv",
    "write_param_csv",
    "read_param_csv",
    "param_to_dict",
    "viscous_to_dict",
    "to_jsonable",
]


class ConfigError(ArgumentError):
    """Schema violation; ``fields`` lists dotted paths such as ``model.kappa[0]``."""

    def __init__(self, message, fields=()):
        super().__init__(message)
        self.fields = list(fields)


class ConfigReadError(OSError):
    """The configuration document could not be read or is not JSON."""


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class FConfig(_Strict):
    kind: Literal["zero", "double_well"] = "zero"
    beta: float = Field(default=1.0, ge=0.0)


class ModelConfig(_Strict):
    n: PositiveInt
    A: Optional[list[list[float]]] = None
    V: Optional[list[list[float]]] = None
    kappa: list[PositiveFloat]
    F: FConfig = FConfig()
    q: float = 2.0

    @model_validator(mode="after")
    def _fill(self):
        eye = np.eye(self.n).tolist()
        if self.A is None:
            self.A = eye
        if self.V is None:
            self.V = eye
        if len(self.kappa) != self.n:
            raise ValueError(f"kappa must have n={self.n} entries")
        self.build()
        return self

    def build(self):
        try:
            return model.ProblemSpec(n=self.n, A=self.A, V=self.V, kappa=self.kappa,
                                     F=self.F.model_dump(), q=self.q)
        except ArgumentError as exc:
            raise ValueError(str(exc)) from None


class LoadConfig(_Strict):
    node_times: list[float]
    node_values: list[list[float]]

    @model_validator(mode="after")
    def _check(self):
        self.build()
        return self

    def build(self):
        try:
            return model.LoadPath(self.node_times, self.node_values)
        except ArgumentError as exc:
            raise ValueError(str(exc)) from None


class SolverConfig(_Strict):
    epsilon: PositiveFloat = 1e-3
    tau: PositiveFloat = 1e-4
    delta: float = Field(default=0.0, ge=0.0)
    stop_gap: PositiveFloat = 1e-8
    horizon_cap: Optional[PositiveFloat] = None
    ell_star: Optional[list[float]] = None


class ReparamConfig(_Strict):
    eps_list: list[PositiveFloat] = [1e-2, 1e-3, 1e-4]
    tau_ratio: PositiveFloat = 0.1
    s_samples: int = Field(default=3001, ge=3)
    extend_constant: bool = False
    excise_jumps: bool = True

    @model_validator(mode="after")
    def _decreasing(self):
        e = self.eps_list
        if len(e) < 2 or any(b >= a for a, b in zip(e, e[1:])):
            raise ValueError("eps_list needs at least two strictly decreasing entries")
        return self


class CertifyConfig(_Strict):
    profile: Literal["strict", "standard"] = "standard"
    gap_threshold: Optional[PositiveFloat] = None


class ObjectiveConfig(_Strict):
    z_des: list[float]
    alpha: PositiveFloat = 1e-3


class NelderMeadConfig(_Strict):
    kind: Literal["nelder_mead"] = "nelder_mead"
    initial_step: Optional[PositiveFloat] = None
    xatol: PositiveFloat = 1e-6
    fatol: PositiveFloat = 1e-9
    restarts: int = Field(default=0, ge=0)


class FDConfig(_Strict):
    kind: Literal["fd_gradient_descent"]
    h_fd: PositiveFloat = 1e-4
    step: PositiveFloat = 1.0
    shrink: float = Field(default=0.5, gt=0.0, lt=1.0)
    armijo: float = Field(default=1e-4, gt=0.0, lt=1.0)
    min_step: PositiveFloat = 1e-10


class SurrogateConfig(_Strict):
    kind: Literal["surrogate"] = "surrogate"
    epsilon: PositiveFloat = 1e-3
    tau: PositiveFloat = 1e-4
    s_samples: int = Field(default=2001, ge=3)


class FullConfig(_Strict):
    kind: Literal["full_extraction"]
    eps_list: list[PositiveFloat] = [1e-2, 1e-3, 1e-4]
    tau_ratio: PositiveFloat = 0.1
    s_samples: int = Field(default=3001, ge=3)


class ControlConfig(_Strict):
    objective: Optional[ObjectiveConfig] = None
    optimizer: Annotated[Union[NelderMeadConfig, FDConfig], Field(discriminator="kind")] = NelderMeadConfig()
    budget: int = Field(default=500, ge=0)
    fidelity: Annotated[Union[SurrogateConfig, FullConfig], Field(discriminator="kind")] = SurrogateConfig()
    seed: int = 0


class OutputConfig(_Strict):
    directory: str = "out"
    formats: list[Literal["csv", "json"]] = ["csv", "json"]


class RunConfig(_Strict):
    model: ModelConfig
    load: LoadConfig
    z0: Optional[list[float]] = None
    solver: SolverConfig = SolverConfig()
    reparam: ReparamConfig = ReparamConfig()
    certify: CertifyConfig = CertifyConfig()
    control: ControlConfig = ControlConfig()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _dims(self):
        n = self.model.n
        if self.z0 is None:
            self.z0 = [0.0] * n
        checks = [("z0", self.z0), ("solver.ell_star", self.solver.ell_star)]
        if self.control.objective is not None:
            checks.append(("control.objective.z_des", self.control.objective.z_des))
        for name, v in checks:
            if v is not None and len(v) != n:
                raise ValueError(f"{name} must have n={n} entries")
        if any(len(row) != n for row in self.load.node_values):
            raise ValueError(f"load.node_values rows must have n={n} entries")
        return self

    # builders -------------------------------------------------------------
    def problem(self):
        return self.model.build()

    def load_path(self):
        return self.load.build()

    def initial_state(self):
        return np.array(self.z0, dtype=float)


def _loc(loc):
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += ("." if out else "") + str(part)
    return out


def parse_config(source):
    """Validate a config given as a path, a JSON string or a dict.

    Raises
    ------
    ConfigReadError
        Unreadable file or malformed JSON.
    ConfigError
        Schema violation; the message names every offending field path.
    """
    if isinstance(source, dict):
        data = source
    else:
        text = source
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            try:
                text = Path(source).read_text()
            except OSError as exc:
                raise ConfigReadError(f"cannot read config {source}: {exc}") from exc
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigReadError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        fields, lines = [], []
        for err in exc.errors():
            loc = [p for p in err["loc"] if p not in ("nelder_mead", "fd_gradient_descent",
                                                     "surrogate", "full_extraction")]
            path = _loc(loc)
            fields.append(path)
            lines.append(f"{path or '<root>'}: {err['msg']}")
        raise ConfigError("invalid config: " + "; ".join(lines), fields) from None


def dump_config(cfg):
    """Canonical JSON text of the effective config (sorted keys, trailing newline)."""
    return json.dumps(cfg.model_dump(mode="json"), sort_keys=True, indent=2) + "\n"


def config_hash(cfg):
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def to_jsonable(obj):
    """Recursively convert numpy values, dataclasses and loads to JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, np.generic):
        return to_jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def write_json(path, payload, chash=None):
    payload = dict(to_jsonable(payload))
    if chash is not None:
        payload["config_hash"] = chash
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _write_csv(path, header, rows, chash):
    with open(path, "w", newline="") as fh:
        if chash is not None:
            fh.write(f"# config_hash={chash}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) for x in r])


def _read_csv(path):
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise ArgumentError(f"{path}: empty CSV")
    header, body = rows[0], rows[1:]
    try:
        data = np.array([[float(x) for x in r] for r in body if r], dtype=float)
    except ValueError as exc:
        raise ArgumentError(f"{path}: non-numeric entry ({exc})") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ArgumentError(f"{path}: rows do not match the header")
    return header, data


def _count(header, prefix):
    return sum(1 for h in header if h.startswith(prefix) and h[len(prefix):].isdigit())


def write_viscous_csv(path, traj, chash=None):
    """Columns ``t, z_1..z_n, rate_1..rate_n, energy, diss_R, diss_visc``.

    Row ``k`` holds the rate of the step ending at ``t_k`` (zero in the first
    row) and the dissipation accumulated up to ``t_k``.
    """
    n = traj.states.shape[1]
    rates = np.vstack([np.zeros((1, n)), traj.rates])
    dR = np.concatenate([[0.0], np.cumsum(traj.diss_R)])
    dv = np.concatenate([[0.0], np.cumsum(traj.diss_visc)])
    header = (["t"] + [f"z_{i + 1}" for i in range(n)] + [f"rate_{i + 1}" for i in range(n)]
              + ["energy", "diss_R", "diss_visc"])
    rows = np.column_stack([traj.times, traj.states, rates, traj.energies, dR, dv])
    _write_csv(path, header, rows, chash)


def read_viscous_csv(path, epsilon, tau):
    header, d = _read_csv(path)
    n = _count(header, "z_")
    if header[0] != "t" or n == 0:
        raise ArgumentError(f"{path}: not a viscous trajectory CSV")
    return ViscousTrajectory(
        times=d[:, 0], states=d[:, 1:1 + n], rates=d[1:, 1 + n:1 + 2 * n],
        energies=d[:, 1 + 2 * n], diss_R=np.diff(d[:, 2 + 2 * n]),
        diss_visc=np.diff(d[:, 3 + 2 * n]), epsilon=float(epsilon), tau=float(tau))


def viscous_to_dict(traj):
    return {
        "epsilon": traj.epsilon, "tau": traj.tau, "delta": traj.delta,
        "ell_star": traj.ell_star, "n_steps": traj.n_steps, "T": float(traj.times[-1]),
        "converged": traj.converged, "terminal_gap": traj.terminal_gap,
        "max_inner_residual": traj.max_inner_residual, "final_state": traj.states[-1],
        "meta": traj.meta,
    }


def write_param_csv(path, ptraj, chash=None):
    """Columns ``s, t_hat, z_1..z_n, gap, lambda, in_G``."""
    n = ptraj.n
    header = ["s", "t_hat"] + [f"z_{i + 1}" for i in range(n)] + ["gap", "lambda", "in_G"]
    rows = np.column_stack([ptraj.s_grid, ptraj.t_hat, ptraj.z_hat, ptraj.gap, ptraj.lam,
                            ptraj.g_mask.astype(float)])
    _write_csv(path, header, rows, chash)


def read_param_csv(path, gap_threshold=1e-4, provenance=()):
    header, d = _read_csv(path)
    n = _count(header, "z_")
    if header[:2] != ["s", "t_hat"] or n == 0 or header[-3:] != ["gap", "lambda", "in_G"]:
        raise ArgumentError(f"{path}: not a parametrized trajectory CSV")
    s = d[:, 0]
    if s.size < 3 or np.any(np.diff(s) <= 0):
        raise ArgumentError(f"{path}: s column must be strictly increasing with >= 3 rows")
    return ParamTrajectory(
        S=float(s[-1]), s_grid=s, t_hat=d[:, 1], z_hat=d[:, 2:2 + n], gap=d[:, 2 + n],
        lam=d[:, 3 + n], g_mask=d[:, 4 + n] > 0.5, provenance=list(provenance),
        gap_threshold=float(gap_threshold))


def param_to_dict(ptraj):
    meta = {k: v for k, v in ptraj.meta.items() if not isinstance(v, np.ndarray)}
    return {"S": ptraj.S, "s_samples": int(ptraj.s_grid.size), "h_s": ptraj.h_s,
            "gap_threshold": ptraj.gap_threshold, "provenance": ptraj.provenance,
            "g_nodes": int(np.count_nonzero(ptraj.g_mask)), "meta": meta}
