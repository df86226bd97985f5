"""Run configuration: JSON schema, defaults and construction of solver objects."""

from __future__ import annotations

import copy
import hashlib
import json
from importlib import resources

import jsonschema
import numpy as np

from .controls import AdmissibleSet
from .forward import ModelParams, solve_forward
from .grid import SpatialGrid
from .optimize import ControlProblem, ObjectiveWeights, TargetData
from .stochastic import NoiseModel, PhaseField, Profile, sample_path, sample_paths
from .trajectory import read_binary


class ConfigError(ValueError):
    def __init__(self, message, path=""):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


def _obj(props, required=()):
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


_NUM = {"type": "number"}
_NUMS = {"type": "array", "items": _NUM, "minItems": 1}
_SHAPE = _obj(
    {
        "shape": {"enum": ["gaussian", "cosine", "constant"]},
        "amplitude": _NUM,
        "center": {"oneOf": [_NUM, _NUMS]},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "mode": {"type": "integer"},
        "phase": _NUM,
        "value": _NUM,
    },
    ["shape"],
)
_FIELD = _obj(
    {
        "shape": {"enum": ["gaussian"]},
        "amplitude": _NUM,
        "center": {"oneOf": [_NUM, _NUMS]},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "kick": _NUM,
        "normalize": {"type": "boolean"},
    },
    ["shape"],
)
_CONTROL_SHAPE = _obj(
    {
        "kind": {"enum": ["constant", "sine"]},
        "value": _NUMS,
        "amplitude": _NUMS,
        "frequency": _NUM,
        "phase": _NUM,
        "offset": _NUMS,
    },
    ["kind"],
)
_TARGET = _obj(
    {
        "kind": {"enum": ["analytic", "file", "uncontrolled-run", "controlled-run"]},
        "field": _FIELD,
        "path": {"type": "string"},
        "seed": {"type": "integer"},
        "control": _CONTROL_SHAPE,
    },
    ["kind"],
)

SCHEMA = _obj(
    {
        "grid": _obj(
            {
                "d": {"enum": [1, 2]},
                "n": {"type": "integer", "minimum": 8},
                "L": {"type": "number", "exclusiveMinimum": 0},
            },
            ["d", "n", "L"],
        ),
        "model": _obj(
            {
                "lambda": {"enum": [-1, 1]},
                "alpha": {"type": "number", "exclusiveMinimum": 1},
                "V0": _SHAPE,
                "V": {"type": "array", "items": _SHAPE, "minItems": 1},
                "max_dt": {"type": ["number", "null"]},
            },
            ["lambda", "alpha", "V"],
        ),
        "initial": _FIELD,
        "noise": {
            "oneOf": [
                {"type": "null"},
                _obj(
                    {
                        "mu": {
                            "type": "array",
                            "minItems": 1,
                            "items": {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2},
                        },
                        "profiles": {
                            "type": "array",
                            "minItems": 1,
                            "items": _obj(
                                {
                                    "kind": {"enum": ["constant", "bump"]},
                                    "c": _NUM,
                                    "x0": {"oneOf": [_NUM, _NUMS]},
                                    "s": {"type": "number", "minimum": 2},
                                },
                                ["kind"],
                            ),
                        },
                        "conservative": {"type": "boolean"},
                    },
                    ["mu", "profiles"],
                ),
            ]
        },
        "time": _obj(
            {
                "T": {"type": "number", "exclusiveMinimum": 0},
                "M": {"type": "integer", "minimum": 1},
                "stride": {"type": "integer", "minimum": 1},
            },
            ["T", "M"],
        ),
        "control": _obj(
            {
                "m": {"type": "integer", "minimum": 1},
                "K": _obj(
                    {
                        "kind": {"enum": ["box", "ball"]},
                        "lo": _NUMS,
                        "hi": _NUMS,
                        "center": _NUMS,
                        "radius": {"type": "number", "minimum": 0},
                    },
                    ["kind"],
                ),
                "u0": _CONTROL_SHAPE,
            },
            ["m", "K"],
        ),
        "weights": _obj(
            {
                "gamma1": {"type": "number", "minimum": 0},
                "gamma2": {"type": "number", "exclusiveMinimum": 0},
                "gamma3": {"type": "number", "minimum": 0},
            },
            ["gamma2"],
        ),
        "targets": _obj({"terminal": _TARGET, "tracking": {"oneOf": [{"type": "null"}, _TARGET]}}, ["terminal"]),
        "mc": _obj({"paths": {"type": "integer", "minimum": 1}, "base_seed": {"type": "integer", "minimum": 0}}),
        "optimizer": _obj(
            {
                "method": {"enum": ["pgd", "fixed-point"]},
                "theta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "max_iter": {"type": "integer", "minimum": 0},
                "adjoint_mode": {"enum": ["discrete-adjoint", "continuous"]},
            }
        ),
        "gradcheck": _obj({"eps": {"type": "number", "exclusiveMinimum": 0}, "nodes": {"type": "integer", "minimum": 1}}),
        "stability": _obj(
            {
                "levels": {"type": "integer", "minimum": 2},
                "delta0": {"type": "number", "exclusiveMinimum": 0},
                "direction": _CONTROL_SHAPE,
            }
        ),
    },
    ["grid", "model", "initial", "time", "control", "weights", "targets"],
)

DEFAULTS = {
    "model": {"V0": {"shape": "constant", "value": 0.0}, "max_dt": None},
    "noise": None,
    "time": {"stride": 1},
    "control": {"u0": {"kind": "constant", "value": [0.0]}},
    "weights": {"gamma1": 0.0, "gamma3": 0.0},
    "targets": {"tracking": None},
    "mc": {"paths": 1, "base_seed": 0},
    "optimizer": {"method": "pgd", "theta": 0.5, "tol": 1e-6, "max_iter": 200, "adjoint_mode": "discrete-adjoint"},
    "gradcheck": {"eps": 1e-5, "nodes": 8},
    "stability": {"levels": 5, "delta0": 0.2, "direction": {"kind": "sine", "amplitude": [1.0], "frequency": 1.0}},
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def validate(raw: dict) -> dict:
    """Check ``raw`` against the schema and return the effective config with defaults filled."""
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "/".join(str(p) for p in err.absolute_path)
        if err.validator == "additionalProperties":
            extra = sorted(set(err.instance) - set(err.schema.get("properties", {})))
            path = "/".join([path, extra[0]]) if path else extra[0]
            raise ConfigError(f"unknown key {extra[0]!r}", path)
        raise ConfigError(err.message, path)
    cfg = _merge(DEFAULTS, raw)
    if raw.get("noise") is None:
        cfg["noise"] = None
    if raw.get("targets", {}).get("tracking") is None:
        cfg["targets"]["tracking"] = None
    _check_physics(cfg)
    return cfg


def _check_physics(cfg):
    g = cfg["grid"]
    try:
        SpatialGrid(g["d"], g["n"], g["L"])
    except ValueError as exc:
        raise ConfigError(str(exc), "grid") from exc
    m = cfg["control"]["m"]
    if len(cfg["model"]["V"]) != m:
        raise ConfigError(f"expected {m} control potentials", "model/V")
    K = cfg["control"]["K"]
    try:
        build_K(K, m)
    except ValueError as exc:
        raise ConfigError(str(exc), "control/K") from exc
    alpha, d, lam = cfg["model"]["alpha"], g["d"], cfg["model"]["lambda"]
    if alpha > 1 + 4 / d + 1e-12:
        raise ConfigError("mass-supercritical exponent", "model/alpha")
    if lam == 1 and abs(alpha - 1 - 4 / d) < 1e-12:
        raise ConfigError("focusing mass-critical case is not supported", "model/lambda")
    noise = cfg["noise"]
    if noise is not None:
        if len(noise["mu"]) != len(noise["profiles"]):
            raise ConfigError("one profile per noise coefficient", "noise/profiles")
        if noise.get("conservative", True) and any(mu[0] != 0 for mu in noise["mu"]):
            raise ConfigError("conservative noise needs purely imaginary mu", "noise/mu")
    M, stride = cfg["time"]["M"], cfg["time"]["stride"]
    if M % stride:
        raise ConfigError("stride must divide M", "time/stride")
    if cfg["weights"]["gamma1"] > 0 and cfg["targets"]["tracking"] is None:
        raise ConfigError("gamma1 > 0 needs a tracking target", "targets/tracking")
    if cfg["optimizer"]["method"] == "fixed-point" and cfg["weights"]["gamma3"] > 0:
        raise ConfigError("fixed-point iteration needs gamma3 = 0", "optimizer/method")


def load(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from exc
    return validate(raw)


def dump(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2)


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()[:16]


def reference_config() -> dict:
    """The committed desk-scale tracking problem."""
    text = resources.files("nlscontrol").joinpath("data/reference_tracking.json").read_text(encoding="utf-8")
    return validate(json.loads(text))


# --- construction -----------------------------------------------------------


def build_grid(cfg) -> SpatialGrid:
    g = cfg["grid"]
    return SpatialGrid(g["d"], g["n"], float(g["L"]))


def shape_values(spec, grid: SpatialGrid) -> np.ndarray:
    kind = spec["shape"]
    if kind == "constant":
        return np.full(grid.shape, float(spec.get("value", spec.get("amplitude", 0.0))))
    if kind == "gaussian":
        return grid.gaussian(spec.get("width", 1.0), spec.get("center"), spec.get("amplitude", 1.0)).real
    if kind == "cosine":
        x = grid.axes[0]
        return spec.get("amplitude", 1.0) * np.cos(2 * np.pi * spec.get("mode", 1) * x / grid.L + spec.get("phase", 0.0))
    raise ValueError(f"unknown shape {kind!r}")


def field_values(spec, grid: SpatialGrid) -> np.ndarray:
    f = grid.gaussian(spec.get("width", 1.0), spec.get("center"), spec.get("amplitude", 1.0), spec.get("kick", 0.0))
    if spec.get("normalize", True):
        f = f / grid.norm(f)
    return f


def control_values(spec, times, m) -> np.ndarray:
    times = np.asarray(times, float)
    if spec["kind"] == "constant":
        v = np.broadcast_to(np.asarray(spec.get("value", [0.0]), float), (m,))
        return np.tile(v, (len(times), 1))
    amp = np.broadcast_to(np.asarray(spec.get("amplitude", [1.0]), float), (m,))
    off = np.broadcast_to(np.asarray(spec.get("offset", [0.0]), float), (m,))
    T = times[-1] if times[-1] > 0 else 1.0
    wave = np.sin(2 * np.pi * spec.get("frequency", 1.0) * times / T + spec.get("phase", 0.0))
    return off + wave[:, None] * amp


def build_K(spec, m) -> AdmissibleSet:
    if spec["kind"] == "box":
        K = AdmissibleSet.box(spec.get("lo", [-1.0] * m), spec.get("hi", [1.0] * m))
    else:
        K = AdmissibleSet.ball(spec.get("center", [0.0] * m), spec.get("radius", 1.0))
    if K.m != m:
        raise ValueError(f"admissible set has dimension {K.m}, expected {m}")
    return K


def build_params(cfg, grid) -> ModelParams:
    model = cfg["model"]
    V = np.stack([shape_values(s, grid) for s in model["V"]])
    return ModelParams(
        lam=model["lambda"],
        alpha=float(model["alpha"]),
        V0=shape_values(model["V0"], grid),
        V=V,
        d=grid.d,
        max_dt=model.get("max_dt"),
    )


def build_noise(cfg) -> NoiseModel | None:
    noise = cfg["noise"]
    if noise is None:
        return None
    profiles = []
    for p in noise["profiles"]:
        x0 = p.get("x0")
        profiles.append(Profile(p["kind"], p.get("c", 1.0), tuple(np.atleast_1d(x0)) if x0 is not None else None, p.get("s", 2.0)))
    return NoiseModel(tuple(complex(a, b) for a, b in noise["mu"]), tuple(profiles), noise.get("conservative", True))


def times_of(cfg) -> np.ndarray:
    return np.linspace(0.0, float(cfg["time"]["T"]), cfg["time"]["M"] + 1)


def build_paths(cfg, noise):
    if noise is None:
        return None
    t = cfg["time"]
    return sample_paths(noise, float(t["T"]), t["M"], cfg["mc"]["paths"], cfg["mc"]["base_seed"])


def _target_run(spec, cfg, grid, params, noise, controlled):
    t = cfg["time"]
    times = times_of(cfg)
    if controlled:
        u = control_values(spec["control"], times, params.m)
    else:
        u = np.zeros((len(times), params.m))
    phase = None
    if noise is not None and "seed" in spec:
        phase = PhaseField(noise, sample_path(noise, float(t["T"]), t["M"], spec["seed"]), grid)
    X0 = field_values(cfg["initial"], grid)
    return solve_forward(X0, params, u, phase, T=float(t["T"]), grid=grid).values


def build_target(spec, cfg, grid, params, noise, terminal):
    if spec is None:
        return None
    kind = spec["kind"]
    n_nodes = cfg["time"]["M"] + 1
    if kind == "analytic":
        f = field_values(spec["field"], grid)
        return f if terminal else np.broadcast_to(f, (n_nodes,) + grid.shape).copy()
    if kind == "file":
        traj = read_binary(spec["path"])
        if traj.grid != grid:
            raise ConfigError("target trajectory grid differs from the run grid", "targets")
        if terminal:
            return traj.values[-1]
        if len(traj) != n_nodes:
            raise ConfigError("tracking target needs one field per time node", "targets/tracking")
        return traj.values
    run = _target_run(spec, cfg, grid, params, noise, controlled=(kind == "controlled-run"))
    return run[-1] if terminal else run


def build_problem(cfg, paths=None) -> ControlProblem:
    grid = build_grid(cfg)
    params = build_params(cfg, grid)
    noise = build_noise(cfg)
    if paths is None:
        paths = build_paths(cfg, noise)
    tg = cfg["targets"]
    targets = TargetData(
        build_target(tg["terminal"], cfg, grid, params, noise, terminal=True),
        build_target(tg["tracking"], cfg, grid, params, noise, terminal=False),
    )
    w = cfg["weights"]
    return ControlProblem(
        grid=grid,
        X0=field_values(cfg["initial"], grid),
        params=params,
        K=build_K(cfg["control"]["K"], cfg["control"]["m"]),
        T=float(cfg["time"]["T"]),
        M=cfg["time"]["M"],
        targets=targets,
        weights=ObjectiveWeights(w["gamma1"], w["gamma2"], w["gamma3"]),
        noise=noise,
        paths=paths,
        adjoint_mode=cfg["optimizer"]["adjoint_mode"],
    )


def initial_control(cfg, problem: ControlProblem) -> np.ndarray:
    u = control_values(cfg["control"]["u0"], problem.times, problem.params.m)
    return problem.K.project(u)
