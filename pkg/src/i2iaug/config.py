"""Pipeline configuration: a TOML file mapped onto the module config dataclasses.

Schema (every key optional, defaults shown)::

    [data]
    interactions = "events.tsv"   # required by every data-consuming subcommand
    items = ""                    # optional item metadata JSONL
    format = ""                   # "tsv" or "jsonl"; empty infers from the suffix
    out_dir = "artifacts"

    [long_tail]
    fraction = 0.2

    [generator]      dim, learning_rate, epochs, alpha, beta, seed, init_scale
    [discriminator]  dim, learning_rate, epochs, neg_ratio, seed, init_scale, batch_size
    [augmentation]   recall_number, confidence_threshold, history_window, seed, workers

    [backend]
    name = "swing"                # swing | bm25 | bpr
    [swing]          smoothing, click_cap
    [bm25]           k1, b
    [bpr]            factors, lr, reg, epochs, neg_per_pos, batch_size, seed, init_scale
    [topk]           K

    [eval]
    ks = [5, 10]
    m = 100
    n = 10

    [index]
    k = 200
    aggregation = "sum"

    [llm]
    mode = "local"                # local | remote
    base_url = ""
    model = ""
    credential_env = "I2IAUG_API_KEY"
    timeout = 60.0
    max_in_flight = 4
    request_logprobs = false

    [pipeline]
    variant = "full"

Relative paths resolve against the config file's directory. ``click_cap`` is
applied when building the interaction graph for every backend.
"""

from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .augmentation import AugmentationConfig
from .backends import BACKENDS, BackendConfig, BprConfig
from .discriminator import DiscriminatorConfig
from .exceptions import ConfigError
from .generator import GeneratorConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

VARIANTS = ("full", "baseline", "wo_generator", "wo_long_tail_loss", "wo_discriminator",
            "wo_threshold_filter", "wo_backend")


@dataclass(frozen=True)
class DataConfig:
    interactions: str = ""
    items: str = ""
    format: str = ""
    out_dir: str = "artifacts"


@dataclass(frozen=True)
class EvalConfig:
    ks: tuple = (5, 10)
    m: int = 100
    n: int = 10

    def __post_init__(self):
        object.__setattr__(self, "ks", tuple(sorted(set(self.ks))))
        if not self.ks or min(self.ks) < 1:
            raise ValueError("ks must be a non-empty list of positive integers")
        if self.m < 1 or self.n < 1:
            raise ValueError("m and n must be >= 1")
        if self.n < max(self.ks):
            raise ValueError(f"n={self.n} is smaller than the largest K={max(self.ks)}")


@dataclass(frozen=True)
class IndexConfig:
    k: int = 200
    aggregation: str = "sum"

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.aggregation not in ("sum", "max"):
            raise ValueError("aggregation must be 'sum' or 'max'")


@dataclass(frozen=True)
class LlmConfig:
    mode: str = "local"
    base_url: str = ""
    model: str = ""
    credential_env: str = "I2IAUG_API_KEY"
    timeout: float = 60.0
    max_in_flight: int = 4
    request_logprobs: bool = False

    def __post_init__(self):
        if self.mode not in ("local", "remote"):
            raise ValueError("mode must be 'local' or 'remote'")
        if self.mode == "remote" and not (self.base_url and self.model):
            raise ValueError("remote mode needs base_url and model")
        if self.max_in_flight < 1 or self.timeout <= 0:
            raise ValueError("max_in_flight must be >= 1 and timeout > 0")


@dataclass(frozen=True)
class PipelineConfig:
    data: DataConfig = field(default_factory=DataConfig)
    long_tail_fraction: float = 0.2
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    discriminator: DiscriminatorConfig = field(default_factory=DiscriminatorConfig)
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)
    backend: BackendConfig = field(default_factory=BackendConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    index: IndexConfig = field(default_factory=IndexConfig)
    llm: LlmConfig = field(default_factory=LlmConfig)
    variant: str = "full"

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "PipelineConfig":
        return _build(raw, base_dir)

    def to_dict(self) -> dict:
        """Nested TOML-shaped dict; ``from_dict(to_dict())`` round-trips."""
        b = self.backend
        return {
            "data": asdict(self.data),
            "long_tail": {"fraction": self.long_tail_fraction},
            "generator": asdict(self.generator),
            "discriminator": asdict(self.discriminator),
            "augmentation": asdict(self.augmentation),
            "backend": {"name": b.name},
            "swing": {"smoothing": b.smoothing, "click_cap": b.click_cap},
            "bm25": {"k1": b.k1, "b": b.b},
            "bpr": {_BPR_KEYS.get(k, k): v for k, v in asdict(b.bpr).items()},
            "topk": {"K": b.top_k},
            "eval": {"ks": list(self.eval.ks), "m": self.eval.m, "n": self.eval.n},
            "index": asdict(self.index),
            "llm": asdict(self.llm),
            "pipeline": {"variant": self.variant},
        }

    def hash(self) -> str:
        """SHA-256 over the canonical JSON of every parameter except output location."""
        d = self.to_dict()
        d["data"] = {k: v for k, v in d["data"].items() if k != "out_dir"}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_overrides(self, overrides: dict) -> "PipelineConfig":
        """Apply ``{"section.key": value}`` overrides and re-validate."""
        d = self.to_dict()
        for path, value in overrides.items():
            section, _, key = path.partition(".")
            if not key:
                raise ConfigError(path, "override keys look like section.key")
            d.setdefault(section, {})[key] = value
        return _build(d, None)


# BprConfig field -> config key
_BPR_KEYS = {"learning_rate": "lr", "regularization": "reg"}

# section -> key -> accepted python types
_FLOAT = (int, float)
_SCHEMA = {
    "data": {"interactions": (str,), "items": (str,), "format": (str,), "out_dir": (str,)},
    "long_tail": {"fraction": _FLOAT},
    "generator": {"dim": (int,), "learning_rate": _FLOAT, "epochs": (int,), "alpha": _FLOAT,
                  "beta": _FLOAT, "seed": (int,), "init_scale": _FLOAT},
    "discriminator": {"dim": (int,), "learning_rate": _FLOAT, "epochs": (int,),
                      "neg_ratio": (int,), "seed": (int,), "init_scale": _FLOAT,
                      "batch_size": (int,)},
    "augmentation": {"recall_number": (int,), "confidence_threshold": _FLOAT,
                     "history_window": (int,), "seed": (int,), "workers": (int,)},
    "backend": {"name": (str,)},
    "swing": {"smoothing": _FLOAT, "click_cap": (int,)},
    "bm25": {"k1": _FLOAT, "b": _FLOAT},
    "bpr": {"factors": (int,), "lr": _FLOAT, "reg": _FLOAT, "epochs": (int,),
            "neg_per_pos": (int,), "batch_size": (int,), "seed": (int,), "init_scale": _FLOAT},
    "topk": {"K": (int,)},
    "eval": {"ks": (list, tuple), "m": (int,), "n": (int,)},
    "index": {"k": (int,), "aggregation": (str,)},
    "llm": {"mode": (str,), "base_url": (str,), "model": (str,), "credential_env": (str,),
            "timeout": _FLOAT, "max_in_flight": (int,), "request_logprobs": (bool,)},
    "pipeline": {"variant": (str,)},
}


def _section(raw, name) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(name, "expected a table")
    allowed = _SCHEMA[name]
    out = {}
    for key, value in sec.items():
        path = f"{name}.{key}"
        if key not in allowed:
            raise ConfigError(path, f"unknown key; expected one of {sorted(allowed)}")
        types = allowed[key]
        want = "number" if types is _FLOAT else types[0].__name__
        if (isinstance(value, bool) and bool not in types) or not isinstance(value, types):
            raise ConfigError(path, f"expected {want}, got {type(value).__name__}")
        if types is _FLOAT:
            value = float(value)
        out[key] = value
    return out


def _make(path, cls, kwargs):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as exc:
        raise ConfigError(path, str(exc)) from None


def _build(raw: dict, base_dir) -> PipelineConfig:
    unknown = sorted(set(raw) - set(_SCHEMA))
    if unknown:
        raise ConfigError(unknown[0], f"unknown section; expected one of {sorted(_SCHEMA)}")
    s = {name: _section(raw, name) for name in _SCHEMA}

    data = s["data"]
    if base_dir is not None:
        for key in ("interactions", "items", "out_dir"):
            if data.get(key):
                data[key] = str((Path(base_dir) / data[key]).resolve()) \
                    if not Path(data[key]).is_absolute() else data[key]
    if data.get("format", "") not in ("", "tsv", "jsonl"):
        raise ConfigError("data.format", "expected 'tsv', 'jsonl' or empty")
    fraction = s["long_tail"].get("fraction", 0.2)
    if not 0 < fraction <= 1:
        raise ConfigError("long_tail.fraction", "must be in (0, 1]")

    field_of = {v: k for k, v in _BPR_KEYS.items()}
    bpr = {field_of.get(k, k): v for k, v in s["bpr"].items()}
    bpr_cfg = _make("bpr", BprConfig, bpr)
    name = s["backend"].get("name", "swing")
    if name not in BACKENDS:
        raise ConfigError("backend.name", f"expected one of {list(BACKENDS)}")
    backend_kw = {"name": name, "bpr": bpr_cfg, **s["swing"], **s["bm25"]}
    if "K" in s["topk"]:
        backend_kw["top_k"] = s["topk"]["K"]
    backend = _make("backend", BackendConfig, backend_kw)

    ev = dict(s["eval"])
    if "ks" in ev:
        if not all(isinstance(k, int) and not isinstance(k, bool) for k in ev["ks"]):
            raise ConfigError("eval.ks", "expected a list of integers")
        ev["ks"] = tuple(ev["ks"])
        ev.setdefault("n", max(ev["ks"], default=10))
    variant = s["pipeline"].get("variant", "full")
    if variant not in VARIANTS:
        raise ConfigError("pipeline.variant", f"expected one of {list(VARIANTS)}")

    return PipelineConfig(
        data=_make("data", DataConfig, data),
        long_tail_fraction=fraction,
        generator=_make("generator", GeneratorConfig, s["generator"]),
        discriminator=_make("discriminator", DiscriminatorConfig, s["discriminator"]),
        augmentation=_make("augmentation", AugmentationConfig, s["augmentation"]),
        backend=backend,
        eval=_make("eval", EvalConfig, ev),
        index=_make("index", IndexConfig, s["index"]),
        llm=_make("llm", LlmConfig, s["llm"]),
        variant=variant,
    )


def load_config(path, overrides: dict | None = None) -> PipelineConfig:
    """Read and validate a TOML config file; raises :class:`ConfigError`."""
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("config", f"{path}: {exc}") from None
    cfg = _build(raw, p.parent)
    return cfg.with_overrides(overrides) if overrides else cfg


def parse_override(text: str) -> tuple[str, object]:
    """``section.key=value`` with the value read as a TOML literal, else a string."""
    key, sep, value = text.partition("=")
    key = key.strip()
    if not sep or "." not in key:
        raise ConfigError(key or text, "overrides look like section.key=value")
    try:
        parsed = tomllib.loads(f"v = {value.strip()}")["v"]
    except tomllib.TOMLDecodeError:
        parsed = value.strip()
    return key, parsed
