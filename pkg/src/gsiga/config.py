"""Run configuration: dataclasses, JSON schema validation and presets."""
import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources

import jsonschema

from .errors import InvalidArgument

DEFAULT_CENTERS = (
    (0.0, 0.0),
    (0.3 * math.pi, 0.4 * math.pi),
    (0.4 * math.pi, 0.7 * math.pi),
    (0.65 * math.pi, math.pi),
)


@dataclass
class GeometryConfig:
    R: float = 40.0
    n: int = 12
    p: int = 2


@dataclass
class ModelConfig:
    F: float = 0.04
    H: float = 0.06
    K: float = 0.001
    d1: float = 0.2
    d2: float = 0.1


@dataclass
class TimeConfig:
    h0: float = 0.1
    max_steps: int = 200
    t_end: float | None = None
    kP: float = 0.075
    kI: float = 0.175
    kD: float = 0.01
    tau: float = 0.01
    h_min: float = 1e-4
    h_max: float = 50.0
    adaptive: bool = True


@dataclass
class RefinementConfig:
    enabled: bool = True
    k_cell: float = 4.0
    k_curve: float = 4.0
    cadence: int = 25
    max_depth: int = 3


@dataclass
class PositivityConfig:
    enabled: bool = False


@dataclass
class SolverConfig:
    tol: float = 1e-10
    quadrature_order: int = 6
    workers: int = 1


@dataclass
class GuardConfig:
    min_sqrt_g_ratio: float = 1e-3
    normal_flip: bool = True


@dataclass
class OutputConfig:
    directory: str = "run_output"
    snapshot_every: int = 25
    mesh_density: int = 20
    dump_matrices: bool = False
    checkpoint: bool = True


@dataclass
class GaussianCenter:
    xi: float
    eta: float
    amplitude: float = 1.0


@dataclass
class InitialConditionConfig:
    centers: list = field(default_factory=lambda: [GaussianCenter(x, y) for x, y in DEFAULT_CENTERS])
    widths: list = field(default_factory=lambda: [20.0, 15.0, 15.0])
    u_base: float = 1.0
    u_scale: float = -0.75
    v_base: float = 0.0
    v_scale: float = 0.5


_SECTIONS = {
    "geometry": GeometryConfig,
    "model": ModelConfig,
    "time": TimeConfig,
    "refinement": RefinementConfig,
    "positivity": PositivityConfig,
    "solver": SolverConfig,
    "guards": GuardConfig,
    "output": OutputConfig,
    "initial_condition": InitialConditionConfig,
}


@dataclass
class RunConfig:
    """Complete description of a run; every model value defaults to the
    published one except the desk-scale resolution ``(n, p) = (12, 2)``."""

    geometry: GeometryConfig = field(default_factory=GeometryConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    time: TimeConfig = field(default_factory=TimeConfig)
    refinement: RefinementConfig = field(default_factory=RefinementConfig)
    positivity: PositivityConfig = field(default_factory=PositivityConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    guards: GuardConfig = field(default_factory=GuardConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    initial_condition: InitialConditionConfig = field(default_factory=InitialConditionConfig)

    def __post_init__(self):
        g, t = self.geometry, self.time
        if g.n <= g.p:
            raise InvalidArgument("need n > p")
        if t.h_min > t.h_max:
            raise InvalidArgument("h_min exceeds h_max")

    # -- (de)serialisation ----------------------------------------------------

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        """Validate ``data`` against the schema and fill in defaults."""
        validate(data)
        kw = {}
        for name, typ in _SECTIONS.items():
            sec = dict(data.get(name, {}))
            if name == "initial_condition" and "centers" in sec:
                sec["centers"] = [GaussianCenter(**c) for c in sec["centers"]]
            kw[name] = typ(**sec)
        return cls(**kw)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_json() + "\n")

    def digest(self):
        """SHA-256 of the canonical JSON form, ignoring output settings."""
        d = self.to_dict()
        d.pop("output")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()

    def replace(self, **sections):
        """Copy with some section fields overridden, e.g.
        ``cfg.replace(model={"K": 0.0})``."""
        d = copy.deepcopy(self.to_dict())
        for name, upd in sections.items():
            d[name].update(upd)
        return RunConfig.from_dict(d)


def schema():
    """The published JSON schema for run configurations."""
    text = resources.files("gsiga").joinpath("config_schema.json").read_text()
    return json.loads(text)


def validate(data):
    try:
        jsonschema.validate(data, schema())
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path)
        raise InvalidArgument(f"invalid configuration at '{path}': {exc.message}") from None


PRESETS = {
    "desk": {},
    "paper-healthy": {"geometry": {"n": 28, "p": 3}, "model": {"F": 0.04}},
    "paper-polymicrogyria": {"geometry": {"n": 28, "p": 3}, "model": {"F": 0.0285}},
}


def preset(name):
    if name not in PRESETS:
        raise InvalidArgument(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return RunConfig.from_dict(copy.deepcopy(PRESETS[name]))


def merge(base, overrides):
    """Deep-merge a (partial) config dict onto ``base`` (a RunConfig)."""
    d = base.to_dict()
    for name, sec in overrides.items():
        if name not in d:
            raise InvalidArgument(f"unknown config section {name!r}")
        d[name].update(sec)
    return RunConfig.from_dict(d)
