"""Run configuration: one JSON file wiring every module together.

Parsing is strict: unknown keys and out-of-range values fail fast with the
offending JSON path.  Missing keys fall back to the documented defaults.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .enhance import EnhanceConfig
from .errors import ValidationError
from .fusion import FusionConfig
from .schedule import PhasePlan
from .simulate import DetectorModel, SceneConfig

_TUPLE_FIELDS = {
    "blur_sigma", "gamma_range", "keep_area", "keep_aspect",
    "brightness_beta", "contrast_beta", "local_gamma_range",
}


def _build(cls, data: dict, path: str):
    """Construct a flat config dataclass from a dict with strict keys."""
    if not isinstance(data, dict):
        raise ValidationError(f"{path}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(data) - names
    if unknown:
        raise ValidationError(f"{path}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for name, value in data.items():
        if name in _TUPLE_FIELDS:
            if not (isinstance(value, list) and len(value) == 2):
                raise ValidationError(f"{path}.{name}: expected a [lo, hi] pair")
            value = (float(value[0]), float(value[1]))
        kwargs[name] = value
    try:
        return cls(**kwargs)
    except ValidationError as exc:
        raise ValidationError(f"{path}: {exc}") from None
    except TypeError as exc:
        raise ValidationError(f"{path}: {exc}") from None


@dataclass(slots=True)
class ThresholdParams:
    gamma: float = 0.05
    floor: float = 0.25

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma <= 1.0):
            raise ValidationError(f"gamma must be in [0, 1], got {self.gamma}")
        if not (0.0 <= self.floor <= 1.0):
            raise ValidationError(f"floor must be in [0, 1], got {self.floor}")


@dataclass(slots=True)
class SimParams:
    scene: SceneConfig = field(default_factory=SceneConfig)
    n_scenes: int = 200
    teacher: DetectorModel = field(default_factory=lambda: DetectorModel(skill=0.7))
    proxy: DetectorModel = field(default_factory=lambda: DetectorModel(skill=0.65))
    student: DetectorModel = field(default_factory=lambda: DetectorModel(skill=0.7))
    lr: float = 0.1
    use_band_mining: bool = True
    use_threshold_adaptation: bool = True
    n_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.n_scenes < 1:
            raise ValidationError(f"n_scenes must be >= 1, got {self.n_scenes}")
        if not (0.0 <= self.lr <= 1.0):
            raise ValidationError(f"lr must be in [0, 1], got {self.lr}")


@dataclass(slots=True)
class RunConfig:
    seed: int = 0
    glt: EnhanceConfig = field(default_factory=EnhanceConfig)
    ptc: FusionConfig = field(default_factory=FusionConfig)
    ait: ThresholdParams = field(default_factory=ThresholdParams)
    plan: PhasePlan = field(default_factory=PhasePlan)
    sim: SimParams = field(default_factory=SimParams)
    paths: dict[str, str] = field(default_factory=dict)


_SECTIONS = {"seed", "glt", "ptc", "ait", "plan", "sim", "paths"}
_SIM_NESTED = {"scene": SceneConfig, "teacher": DetectorModel,
               "proxy": DetectorModel, "student": DetectorModel}


def run_config_from_dict(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ValidationError("config: expected a top-level object")
    unknown = set(data) - _SECTIONS
    if unknown:
        raise ValidationError(f"config: unknown key(s) {sorted(unknown)}")
    seed = data.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ValidationError("config.seed: expected an integer")

    glt = _build(EnhanceConfig, data.get("glt", {}), "config.glt")
    ptc = _build(FusionConfig, data.get("ptc", {}), "config.ptc")
    ait = _build(ThresholdParams, data.get("ait", {}), "config.ait")
    plan = _build(PhasePlan, data.get("plan", {}), "config.plan")

    sim_data = dict(data.get("sim", {})) if isinstance(data.get("sim", {}), dict) else None
    if sim_data is None:
        raise ValidationError("config.sim: expected an object")
    sim_kwargs = {}
    for key, sub_cls in _SIM_NESTED.items():
        if key in sim_data:
            sim_kwargs[key] = _build(sub_cls, sim_data.pop(key), f"config.sim.{key}")
    sim = _build(SimParams, sim_data, "config.sim")
    for key, value in sim_kwargs.items():
        setattr(sim, key, value)

    paths = data.get("paths", {})
    if not isinstance(paths, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in paths.items()
    ):
        raise ValidationError("config.paths: expected string-to-string entries")

    return RunConfig(seed=seed, glt=glt, ptc=ptc, ait=ait, plan=plan, sim=sim,
                     paths=dict(paths))


def load_run_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc})") from None
    except FileNotFoundError:
        raise ValidationError(f"{path}: no such file") from None
    return run_config_from_dict(data)


def run_config_to_dict(cfg: RunConfig) -> dict:
    def flat(obj) -> dict:
        out = {}
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    sim = flat(cfg.sim)
    for key in _SIM_NESTED:
        sim[key] = flat(getattr(cfg.sim, key))
    return {
        "seed": cfg.seed,
        "glt": flat(cfg.glt),
        "ptc": flat(cfg.ptc),
        "ait": flat(cfg.ait),
        "plan": flat(cfg.plan),
        "sim": sim,
        "paths": dict(cfg.paths),
    }
