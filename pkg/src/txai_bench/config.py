"""Experiment configuration: a line-oriented ``section.key = value`` format.

Plain UTF-8 text, ``#`` starts a comment, blank lines are ignored. Keys are
dotted paths; scenarios are declared as ``scenario.<id>.entry.<k>.<field>``
groups, one entry per backdoor trigger/target pair.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field

from .arch import ARCHITECTURES
from .data import SyntheticSpec
from .localize import CannyConfig
from .nn import TrainConfig
from .saliency import METHOD_IDS, MethodConfig
from .trojan import (
    CheckerPattern,
    CornerLocation,
    FixedLocation,
    Location,
    Pattern,
    PoisonConfig,
    PoisonEntry,
    RandomLocation,
    ShapePattern,
    SolidPattern,
    TriggerSpec,
)


class ConfigError(ValueError):
    pass


def parse_config_text(text: str) -> dict[str, str]:
    """Parse to an ordered flat mapping of dotted keys to value strings."""
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw.rstrip()!r}")
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def format_config(mapping: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in mapping.items())


def config_digest(text: str) -> str:
    """Hash of the canonicalized (parsed and re-serialized) config text."""
    return hashlib.sha256(format_config(parse_config_text(text)).encode("utf-8")).hexdigest()


def derive_seed(global_seed: int, *labels) -> int:
    """Stable named sub-seed so independent random streams never collide."""
    tag = "/".join(str(p) for p in labels) + f"#{global_seed}"
    return int.from_bytes(hashlib.sha256(tag.encode("utf-8")).digest()[:8], "little")


# --------------------------------------------------------------------------
# experiment assembly
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class IdxPaths:
    train_images: str
    train_labels: str
    test_images: str
    test_labels: str


@dataclass(frozen=True)
class ScenarioConfig:
    scenario_id: str
    poison: PoisonConfig

    @property
    def location_label(self) -> str:
        loc = self.poison.entries[0].trigger.location
        if isinstance(loc, CornerLocation):
            return "corner"
        if isinstance(loc, RandomLocation):
            return "random"
        return f"{loc.row},{loc.col}"

    @property
    def pattern_label(self) -> str:
        pat = self.poison.entries[0].trigger.pattern
        return pat.shape if isinstance(pat, ShapePattern) else pat.kind

    @property
    def size_label(self) -> int:
        return self.poison.entries[0].trigger.size

    @property
    def target_mode(self) -> str:
        return "single" if len(self.poison.entries) == 1 else "multi"


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int
    out_dir: str
    dataset: SyntheticSpec | IdxPaths
    arch_id: str
    train: TrainConfig
    scenarios: tuple[ScenarioConfig, ...]
    methods: tuple[str, ...]
    method_cfg: MethodConfig = field(default_factory=MethodConfig)
    canny_cfg: CannyConfig = field(default_factory=CannyConfig)
    eval_samples: int = 100

    def __post_init__(self):
        if self.eval_samples < 1:
            raise ConfigError("eval.samples must be >= 1")
        if not self.methods:
            raise ConfigError("method list must not be empty")
        for m in self.methods:
            if m not in METHOD_IDS:
                raise ConfigError(f"unknown method {m!r}; known: {METHOD_IDS}")
        if not self.scenarios:
            raise ConfigError("at least one scenario is required")
        if self.arch_id not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch_id!r}")


def _get(flat, key, default=None, convert=str):
    if key not in flat:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return default
    try:
        return convert(flat[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {flat[key]!r} ({exc})") from exc


def _to_bool(v: str) -> bool:
    if v.lower() in ("true", "yes", "1", "on"):
        return True
    if v.lower() in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {v!r}")


def _colors(v: str) -> tuple[float, ...]:
    return tuple(float(p) for p in v.split(","))


def _parse_location(v: str) -> Location:
    if v == "corner":
        return CornerLocation()
    if v == "random":
        return RandomLocation()
    parts = v.split(",")
    if len(parts) != 2:
        raise ConfigError(f"location must be 'corner', 'random', or 'row,col', got {v!r}")
    return FixedLocation(int(parts[0]), int(parts[1]))


def _parse_pattern(kind: str, flat: dict[str, str], prefix: str) -> Pattern:
    if kind == "solid":
        return SolidPattern(color=_get(flat, f"{prefix}.color", (1.0,), _colors))
    if kind == "checker":
        return CheckerPattern(
            color_a=_get(flat, f"{prefix}.color", (1.0,), _colors),
            color_b=_get(flat, f"{prefix}.color_b", (0.0,), _colors),
            cell=_get(flat, f"{prefix}.cell", 2, int),
        )
    if kind in ("square", "circle", "cross"):
        return ShapePattern(shape=kind, color=_get(flat, f"{prefix}.color", (1.0,), _colors))
    raise ConfigError(f"unknown trigger pattern {kind!r} at {prefix}")


def _parse_scenarios(flat: dict[str, str], global_seed: int) -> tuple[ScenarioConfig, ...]:
    # group keys by scenario id, preserving declaration order
    order: list[str] = []
    for key in flat:
        if key.startswith("scenario."):
            sid = key.split(".")[1]
            if sid not in order:
                order.append(sid)
    scenarios = []
    for sid in order:
        base = f"scenario.{sid}"
        entry_ids = sorted(
            {int(k.split(".")[3]) for k in flat if k.startswith(f"{base}.entry.")}
        )
        if not entry_ids:
            raise ConfigError(f"scenario {sid!r} declares no entries")
        entries = []
        for k in entry_ids:
            p = f"{base}.entry.{k}"
            kind = _get(flat, f"{p}.pattern", "solid")
            entries.append(
                PoisonEntry(
                    trigger=TriggerSpec(
                        pattern=_parse_pattern(kind, flat, p),
                        size=_get(flat, f"{p}.size", 6, int),
                        location=_parse_location(_get(flat, f"{p}.location", "corner")),
                        alpha=_get(flat, f"{p}.alpha", 1.0, float),
                    ),
                    target_label=_get(flat, f"{p}.target", None, int),
                )
            )
        scenarios.append(
            ScenarioConfig(
                scenario_id=sid,
                poison=PoisonConfig(
                    entries=tuple(entries),
                    fraction=_get(flat, f"{base}.fraction", 0.1, float),
                    seed=derive_seed(global_seed, "poison", sid),
                ),
            )
        )
    return tuple(scenarios)


def experiment_from_mapping(flat: dict[str, str], base_dir: str = ".") -> ExperimentConfig:
    seed = _get(flat, "seed", 0, int)
    source = _get(flat, "dataset.source", "synthetic")
    if source == "synthetic":
        dataset = SyntheticSpec(
            classes=_get(flat, "synthetic.classes", 3, int),
            image_size=_get(flat, "synthetic.image_size", 28, int),
            train_count=_get(flat, "synthetic.train_count", 3000, int),
            test_count=_get(flat, "synthetic.test_count", 600, int),
            noise=_get(flat, "synthetic.noise", 0.05, float),
            seed=derive_seed(seed, "data"),
        )
    elif source == "idx":
        paths = {}
        for part in ("train_images", "train_labels", "test_images", "test_labels"):
            p = os.path.join(base_dir, _get(flat, f"dataset.{part}", None))
            if not os.path.exists(p):
                raise ConfigError(f"dataset.{part}: no such file {p!r}")
            paths[part] = p
        dataset = IdxPaths(**paths)
    else:
        raise ConfigError(f"dataset.source must be 'synthetic' or 'idx', got {source!r}")

    train = TrainConfig(
        learning_rate=_get(flat, "train.learning_rate", 0.02, float),
        epochs=_get(flat, "train.epochs", 12, int),
        batch_size=_get(flat, "train.batch_size", 32, int),
        seed=derive_seed(seed, "train"),
        init=_get(flat, "train.init", "kaiming_uniform"),
        momentum=_get(flat, "train.momentum", 0.9, float),
    )
    method_cfg = MethodConfig(
        occ_window=_get(flat, "method.occ.window", 4, int),
        occ_stride=_get(flat, "method.occ.stride", 2, int),
        occ_baseline=_get(flat, "method.occ.baseline", 0.0, float),
        fa_cells=_get(flat, "method.fa.cells", 7, int),
        fa_baseline=_get(flat, "method.fa.baseline", 0.0, float),
        lime_segments=_get(flat, "method.lime.segments", 7, int),
        lime_samples=_get(flat, "method.lime.samples", 500, int),
        lime_kernel_width=(float(flat["method.lime.kernel_width"])
                           if "method.lime.kernel_width" in flat else None),
        lime_ridge=_get(flat, "method.lime.ridge", 1e-3, float),
        lime_baseline=_get(flat, "method.lime.baseline", 0.0, float),
        lime_seed=derive_seed(seed, "lime"),
        gcam_layer=(int(flat["method.gcam.layer"]) if "method.gcam.layer" in flat else None),
    )
    canny_cfg = CannyConfig(
        sigma=_get(flat, "canny.sigma", 1.4, float),
        kernel_size=_get(flat, "canny.kernel", 5, int),
        low=_get(flat, "canny.low", 0.10, float),
        high=_get(flat, "canny.high", 0.30, float),
    )
    methods = tuple(
        m.strip() for m in _get(flat, "eval.methods", ",".join(METHOD_IDS)).split(",") if m.strip()
    )
    return ExperimentConfig(
        seed=seed,
        out_dir=_get(flat, "out.dir", "runs/out"),
        dataset=dataset,
        arch_id=_get(flat, "arch.id", "cnn_small"),
        train=train,
        scenarios=_parse_scenarios(flat, seed),
        methods=methods,
        method_cfg=method_cfg,
        canny_cfg=canny_cfg,
        eval_samples=_get(flat, "eval.samples", 100, int),
    )


def load_experiment(path) -> tuple[ExperimentConfig, str]:
    """Read a config file; returns (config, raw text)."""
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()
    cfg = experiment_from_mapping(parse_config_text(text), base_dir=os.path.dirname(os.path.abspath(path)))
    return cfg, text


def default_grid_mapping(
    sizes: tuple[int, ...] = (4, 6, 8),
    eval_samples: int = 100,
    methods: tuple[str, ...] = METHOD_IDS,
    seed: int = 0,
    out_dir: str = "runs/default_grid",
) -> dict[str, str]:
    """The default experiment: single-target solid triggers swept over
    {corner, random} x sizes, all methods."""
    flat: dict[str, str] = {
        "seed": str(seed),
        "out.dir": out_dir,
        "dataset.source": "synthetic",
        "eval.samples": str(eval_samples),
        "eval.methods": ",".join(methods),
    }
    for location in ("corner", "random"):
        for size in sizes:
            sid = f"{location}{size}"
            flat[f"scenario.{sid}.fraction"] = "0.1"
            flat[f"scenario.{sid}.entry.0.pattern"] = "solid"
            flat[f"scenario.{sid}.entry.0.color"] = "1.0"
            flat[f"scenario.{sid}.entry.0.size"] = str(size)
            flat[f"scenario.{sid}.entry.0.location"] = location
            flat[f"scenario.{sid}.entry.0.target"] = "1"
    return flat


def multi_target_mapping(
    k: int = 4,
    size: int = 6,
    location: str = "corner",
    eval_samples: int = 100,
    methods: tuple[str, ...] = METHOD_IDS,
    seed: int = 0,
    out_dir: str = "runs/multi_target",
    classes: int = 5,
) -> dict[str, str]:
    """Multi-target scenario: k distinct triggers (texture/color/shape
    variants), each bound to its own target label."""
    variants = [
        ("checker", {"color": "1.0", "color_b": "0.0"}),
        ("solid", {"color": "1.0"}),
        ("cross", {"color": "1.0"}),
        ("circle", {"color": "1.0"}),
        ("solid", {"color": "0.5"}),
    ]
    if k > min(len(variants), classes):
        raise ConfigError(f"multi-target supports at most {min(len(variants), classes)} entries here")
    flat: dict[str, str] = {
        "seed": str(seed),
        "out.dir": out_dir,
        "dataset.source": "synthetic",
        "synthetic.classes": str(classes),
        "eval.samples": str(eval_samples),
        "eval.methods": ",".join(methods),
        "scenario.multi.fraction": "0.06",
    }
    for i in range(k):
        kind, extra = variants[i]
        base = f"scenario.multi.entry.{i}"
        flat[f"{base}.pattern"] = kind
        flat[f"{base}.size"] = str(size)
        flat[f"{base}.location"] = location
        flat[f"{base}.target"] = str(i)
        for key, value in extra.items():
            flat[f"{base}.{key}"] = value
    return flat
