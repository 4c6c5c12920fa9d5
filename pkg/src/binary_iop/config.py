"""
Experiment configuration files (YAML) with strict, all-at-once validation.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .grid_pde import BOUNDARY_MODES, GridSpec, ModelParams
from .inference import DEFAULT_GAMMA, PARAM_NAMES, SIGMA_EPS_FLOOR, PriorBox
from .lm import LmSettings

DRIFT_FAMILIES = ("identity", "sine", "cubic")


class ConfigError(ValueError):
    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("invalid configuration:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class TruthConfig:
    family: str = "identity"
    coefficients: tuple = (1.0, 0.0, 0.0)
    sigma0: float = 1.0
    r: float = 0.05

    @property
    def expected(self) -> np.ndarray:
        """Cubic coefficients the fit should recover, plus sigma0."""
        if self.family == "identity":
            coef = (1.0, 0.0, 0.0)
        elif self.family == "sine":
            coef = (1.0, 0.0, -1.0 / 6.0)
        else:
            coef = tuple(self.coefficients)
        return np.array([*coef, self.sigma0])

    @property
    def params(self) -> ModelParams:
        return ModelParams.from_vector(self.expected, self.r)

    @property
    def drift(self):
        """Exact drift perturbation used to synthesize data (None means cubic)."""
        return np.sin if self.family == "sine" else None

    @property
    def exact_curve(self):
        if self.family == "sine":
            return np.sin
        if self.family == "identity":
            return lambda y: np.asarray(y, dtype=float)
        c = self.expected
        return lambda y: y * (c[0] + y * (c[1] + y * c[2]))


@dataclass(frozen=True)
class NoiseConfig:
    levels: tuple = (0.0, 0.05)
    seed: int = 0

    def seed_for(self, level_index: int) -> int:
        return self.seed + level_index


@dataclass(frozen=True)
class SamplerConfig:
    k_total: int = 100_000
    k_burn: int = 30_000
    gamma: tuple = DEFAULT_GAMMA
    seed: int = 1
    adapt: bool = True
    sigma_eps: float | None = None
    sigma_eps_floor: float = SIGMA_EPS_FLOOR

    def seed_for(self, level_index: int, guess_index: int) -> int:
        return self.seed + 1000 * level_index + guess_index


@dataclass(frozen=True)
class LmConfig:
    enabled: bool = True
    lambda0: float = 1e-3
    lambda_up: float = 10.0
    lambda_down: float = 0.1
    max_iters: int = 200
    tol_step: float = 1e-8
    tol_grad: float = 1e-8
    fd_step: float = 1e-5
    project: bool = False

    def settings(self) -> LmSettings:
        d = asdict(self)
        d.pop("enabled")
        return LmSettings(**d)


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "results"
    hist_bins: int = 50
    drift_range: tuple = (-1.0, 1.0)
    drift_samples: int = 201


@dataclass(frozen=True)
class ExperimentConfig:
    name: str = "experiment"
    truth: TruthConfig = field(default_factory=TruthConfig)
    grid: GridSpec = field(default_factory=GridSpec)
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    prior: PriorBox = field(default_factory=PriorBox)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    initial_guesses: tuple = ((0.0, 0.0, 0.0, 0.0),)
    measurement_points: object = "interior"
    output: OutputConfig = field(default_factory=OutputConfig)
    warnings: tuple = ()

    def points(self) -> np.ndarray:
        if isinstance(self.measurement_points, str):
            return self.grid.interior
        return np.asarray(self.measurement_points, dtype=float)

    def start_points(self) -> list[np.ndarray]:
        """Initial guesses moved onto the prior box."""
        return [self.prior.project(g) for g in self.initial_guesses]

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "truth": {
                "family": self.truth.family,
                "coefficients": list(self.truth.coefficients),
                "sigma0": self.truth.sigma0,
                "r": self.truth.r,
            },
            "grid": {
                "y_min": self.grid.y_min,
                "y_max": self.grid.y_max,
                "n_y": self.grid.n_y,
                "n_tau": self.grid.n_tau,
                "tau_star": self.grid.tau_star,
                "boundary": self.grid.boundary,
            },
            "noise": {"levels": list(self.noise.levels), "seed": self.noise.seed},
            "prior": {
                n: {"lower": float(lo), "upper": float(hi)}
                for n, lo, hi in zip(PARAM_NAMES, self.prior.lower, self.prior.upper)
            },
            "sampler": {**asdict(self.sampler), "gamma": list(self.sampler.gamma)},
            "lm": asdict(self.lm),
            "initial_guesses": [list(g) for g in self.initial_guesses],
            "measurement_points": (
                self.measurement_points
                if isinstance(self.measurement_points, str)
                else [float(p) for p in self.measurement_points]
            ),
            "output": {**asdict(self.output), "drift_range": list(self.output.drift_range)},
        }


# key -> (default, kind); kind drives coercion and error messages
_SCHEMA = {
    "name": ("experiment", "str"),
    "truth": {
        "family": ("identity", "str"),
        "coefficients": ([1.0, 0.0, 0.0], "vec3"),
        "sigma0": (1.0, "float"),
        "r": (0.05, "float"),
    },
    "grid": {
        "y_min": (-1.5, "float"),
        "y_max": (1.5, "float"),
        "n_y": (100, "int"),
        "n_tau": (400, "int"),
        "tau_star": (0.4, "float"),
        "boundary": ("fixed", "str"),
    },
    "noise": {"levels": ([0.0, 0.05], "floats"), "seed": (0, "int")},
    "prior": {
        n: {"lower": (float(lo), "float"), "upper": (float(hi), "float")}
        for n, lo, hi in zip(PARAM_NAMES, PriorBox().lower, PriorBox().upper)
    },
    "sampler": {
        "k_total": (100_000, "int"),
        "k_burn": (30_000, "int"),
        "gamma": (list(DEFAULT_GAMMA), "vec4"),
        "seed": (1, "int"),
        "adapt": (True, "bool"),
        "sigma_eps": (None, "float?"),
        "sigma_eps_floor": (SIGMA_EPS_FLOOR, "float"),
    },
    "lm": {
        "enabled": (True, "bool"),
        "lambda0": (1e-3, "float"),
        "lambda_up": (10.0, "float"),
        "lambda_down": (0.1, "float"),
        "max_iters": (200, "int"),
        "tol_step": (1e-8, "float"),
        "tol_grad": (1e-8, "float"),
        "fd_step": (1e-5, "float"),
        "project": (False, "bool"),
    },
    "initial_guesses": ([[0.0, 0.0, 0.0, 0.0]], "vec4list"),
    "measurement_points": ("interior", "points"),
    "output": {
        "directory": ("results", "str"),
        "hist_bins": (50, "int"),
        "drift_range": ([-1.0, 1.0], "vec2"),
        "drift_samples": (201, "int"),
    },
}


def _coerce(value, kind: str, path: str, errors: list):
    def bad(msg):
        errors.append(f"{path}: {msg}")
        return None

    def num(v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise TypeError
        v = float(v)
        if not math.isfinite(v):
            raise ValueError
        return v

    try:
        if kind == "str":
            return value if isinstance(value, str) else bad("expected a string")
        if kind == "bool":
            return value if isinstance(value, bool) else bad("expected true/false")
        if kind == "int":
            if isinstance(value, bool) or not isinstance(value, int):
                return bad("expected an integer")
            return value
        if kind == "float":
            return num(value)
        if kind == "float?":
            return None if value is None else num(value)
        if kind == "floats":
            if not isinstance(value, list) or not value:
                return bad("expected a non-empty list of numbers")
            return [num(v) for v in value]
        if kind.startswith("vec") and kind[3:].isdigit():
            n = int(kind[3:])
            if not isinstance(value, list) or len(value) != n:
                return bad(f"expected a list of {n} numbers")
            return [num(v) for v in value]
        if kind == "vec4list":
            if not isinstance(value, list) or not value:
                return bad("expected a non-empty list of 4-vectors")
            out = []
            for i, g in enumerate(value):
                out.append(_coerce(g, "vec4", f"{path}[{i}]", errors))
            return out
        if kind == "points":
            if value == "interior":
                return value
            if isinstance(value, list) and value:
                return [num(v) for v in value]
            return bad("expected 'interior' or a non-empty list of y locations")
    except (TypeError, ValueError):
        return bad("expected finite number(s)")
    raise AssertionError(kind)


def _walk(raw, schema, prefix, errors):
    out = {}
    if not isinstance(raw, dict):
        errors.append(f"{prefix or '<root>'}: expected a mapping")
        raw = {}
    for key in raw:
        if key not in schema:
            errors.append(f"{prefix}{key}: unknown key")
    for key, spec in schema.items():
        path = f"{prefix}{key}"
        if isinstance(spec, dict):
            out[key] = _walk(raw.get(key, {}), spec, path + ".", errors)
        else:
            default, kind = spec
            out[key] = _coerce(raw[key], kind, path, errors) if key in raw else default
    return out


def parse_config(raw: dict) -> ExperimentConfig:
    """
    Build an ExperimentConfig from a parsed mapping.

    Every problem is collected and raised together as ConfigError, each
    message prefixed with the dotted path of the offending field.
    """
    if isinstance(raw, dict) and "manifest_version" in raw:
        raw = raw.get("config", {})
    errors: list[str] = []
    d = _walk(raw, _SCHEMA, "", errors)
    notes: list[str] = []

    t = d["truth"]
    if t["family"] is not None and t["family"] not in DRIFT_FAMILIES:
        errors.append(f"truth.family: must be one of {DRIFT_FAMILIES}")
    if t["sigma0"] is not None and t["sigma0"] <= 0:
        errors.append("truth.sigma0: must be positive")
    if t["r"] is not None and t["r"] < 0:
        errors.append("truth.r: must be non-negative")

    g = d["grid"]
    if None not in (g["y_min"], g["y_max"]) and not (g["y_min"] < 0 < g["y_max"]):
        errors.append("grid: need y_min < 0 < y_max")
    if g["n_y"] is not None and g["n_y"] < 3:
        errors.append("grid.n_y: must be >= 3")
    if g["n_tau"] is not None and g["n_tau"] < 1:
        errors.append("grid.n_tau: must be >= 1")
    if g["tau_star"] is not None and g["tau_star"] <= 0:
        errors.append("grid.tau_star: must be positive")
    if g["boundary"] is not None and g["boundary"] not in BOUNDARY_MODES:
        errors.append(f"grid.boundary: must be one of {BOUNDARY_MODES}")

    for i, lvl in enumerate(d["noise"]["levels"] or []):
        if lvl < 0:
            errors.append(f"noise.levels[{i}]: must be non-negative")

    p = d["prior"]
    for n in PARAM_NAMES:
        lo, hi = p[n]["lower"], p[n]["upper"]
        if lo is not None and hi is not None and not lo < hi:
            errors.append(f"prior.{n}: lower must be below upper")
    if p["sigma0"]["lower"] is not None and p["sigma0"]["lower"] <= 0:
        errors.append("prior.sigma0.lower: must be positive")

    s = d["sampler"]
    if s["k_total"] is not None and s["k_total"] < 1:
        errors.append("sampler.k_total: must be >= 1")
    if s["k_burn"] is not None and s["k_burn"] < 0:
        errors.append("sampler.k_burn: must be >= 0")
    if None not in (s["k_total"], s["k_burn"]) and s["k_burn"] >= s["k_total"]:
        errors.append("sampler.k_burn: must be smaller than sampler.k_total")
    if s["gamma"] is not None and any(v <= 0 for v in s["gamma"]):
        errors.append("sampler.gamma: entries must be positive")
    if s["sigma_eps"] is not None and s["sigma_eps"] <= 0:
        errors.append("sampler.sigma_eps: must be positive")
    if s["sigma_eps_floor"] is not None and s["sigma_eps_floor"] <= 0:
        errors.append("sampler.sigma_eps_floor: must be positive")

    lmd = d["lm"]
    if lmd["lambda0"] is not None and lmd["lambda0"] < 0:
        errors.append("lm.lambda0: must be non-negative")
    if lmd["lambda_up"] is not None and lmd["lambda_up"] <= 1:
        errors.append("lm.lambda_up: must exceed 1")
    if lmd["lambda_down"] is not None and not 0 < lmd["lambda_down"] < 1:
        errors.append("lm.lambda_down: must lie in (0, 1)")
    for key in ("tol_step", "tol_grad", "fd_step"):
        if lmd[key] is not None and lmd[key] <= 0:
            errors.append(f"lm.{key}: must be positive")
    if lmd["max_iters"] is not None and lmd["max_iters"] < 0:
        errors.append("lm.max_iters: must be non-negative")

    o = d["output"]
    if o["hist_bins"] is not None and o["hist_bins"] < 1:
        errors.append("output.hist_bins: must be >= 1")
    if o["drift_samples"] is not None and o["drift_samples"] < 2:
        errors.append("output.drift_samples: must be >= 2")

    if errors:
        raise ConfigError(errors)

    grid = GridSpec(**g)
    prior = PriorBox(
        lower=np.array([p[n]["lower"] for n in PARAM_NAMES]),
        upper=np.array([p[n]["upper"] for n in PARAM_NAMES]),
    )
    pts = d["measurement_points"]
    if not isinstance(pts, str):
        arr = np.asarray(pts)
        if np.any(np.diff(arr) <= 0):
            errors.append("measurement_points: must be strictly increasing")
        if np.any(arr < grid.y_min) or np.any(arr > grid.y_max):
            errors.append("measurement_points: must lie within the grid")
    guesses = []
    for i, guess in enumerate(d["initial_guesses"]):
        if not prior.contains(guess):
            notes.append(
                f"initial_guesses[{i}] = {guess} lies outside the prior box; "
                f"starting from {prior.project(guess).tolist()} instead"
            )
        guesses.append(tuple(guess))
    if errors:
        raise ConfigError(errors)

    return ExperimentConfig(
        name=d["name"],
        truth=TruthConfig(
            family=t["family"],
            coefficients=tuple(t["coefficients"]),
            sigma0=t["sigma0"],
            r=t["r"],
        ),
        grid=grid,
        noise=NoiseConfig(levels=tuple(d["noise"]["levels"]), seed=d["noise"]["seed"]),
        prior=prior,
        sampler=SamplerConfig(**{**s, "gamma": tuple(s["gamma"])}),
        lm=LmConfig(**lmd),
        initial_guesses=tuple(guesses),
        measurement_points=pts if isinstance(pts, str) else tuple(pts),
        output=OutputConfig(**{**o, "drift_range": tuple(o["drift_range"])}),
        warnings=tuple(notes),
    )


def validate_config(path) -> ExperimentConfig:
    """Read and validate a YAML experiment file; raises ConfigError."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError([f"<file>: cannot read {path}: {exc}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"<file>: YAML syntax error: {exc}"]) from exc
    return parse_config(raw if raw is not None else {})


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)


def config_reference() -> str:
    """Markdown listing of every key with its default."""
    lines = ["# Experiment configuration reference", "", "| key | default | kind |", "|---|---|---|"]

    def walk(schema, prefix):
        for key, spec in schema.items():
            if isinstance(spec, dict):
                walk(spec, f"{prefix}{key}.")
            else:
                default, kind = spec
                lines.append(f"| `{prefix}{key}` | `{default!r}` | {kind} |")

    walk(_SCHEMA, "")
    lines += [
        "",
        "`truth.family` is one of identity, sine, cubic (`coefficients` used only for cubic).",
        "`grid.boundary` is `fixed` (constant 1 / 0) or `discounted` (exp(-r tau) / 0).",
        "`sampler.sigma_eps: null` calibrates the likelihood scale as",
        "max(noise level, sigma_eps_floor) * RMS(data).",
        "Data seed for noise level i is `noise.seed + i`; chain seed for (level i, guess j)",
        "is `sampler.seed + 1000 i + j`.",
        "Initial guesses outside the prior box are projected onto it (with a warning).",
    ]
    return "\n".join(lines) + "\n"
