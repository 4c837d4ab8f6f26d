"""Study configuration: a flat, typed key-value schema read from TOML."""

from __future__ import annotations

import enum
import math
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

from .errors import SchemaError
from .raoblackwell import ConditioningLevel

__all__ = ["StudyKind", "StudyConfig", "load_config", "parse_config", "size_prior_weights"]


class StudyKind(str, enum.Enum):
    MIXTURE = "mixture"
    RETROSPECTIVE = "retrospective"
    GENERIC = "generic"


SIZE_PRIORS = ("inverse_size", "inverse_index", "uniform")


def size_prior_weights(rule, sizes) -> list[float]:
    """Normalized prior over ``sizes`` from a named rule or an explicit list.

    ``inverse_size`` weights each size ``n`` by ``1/n``; ``inverse_index``
    weights the ``k``-th listed size (1-based) by ``1/k``.
    """
    sizes = list(sizes)
    if isinstance(rule, str):
        if rule == "inverse_size":
            raw = [1.0 / n for n in sizes]
        elif rule == "inverse_index":
            raw = [1.0 / k for k in range(1, len(sizes) + 1)]
        elif rule == "uniform":
            raw = [1.0] * len(sizes)
        else:
            raise SchemaError(f"unknown size prior {rule!r}; expected one of {SIZE_PRIORS} or a list")
    else:
        raw = [float(v) for v in rule]
        if len(raw) != len(sizes):
            raise SchemaError("explicit size prior needs one weight per size")
        if any(v < 0 for v in raw):
            raise SchemaError("size prior weights must be >= 0")
        if abs(math.fsum(raw) - 1.0) > 1e-9:
            raise SchemaError(f"explicit size prior sums to {math.fsum(raw)!r}, not 1")
    total = math.fsum(raw)
    return [v / total for v in raw]


@dataclass(frozen=True)
class StudyConfig:
    """Everything a study run depends on besides the population itself."""

    study: StudyKind
    dataset: str
    responses: tuple[str, ...]
    replicates: int = 1_000_000
    master_seed: int = 20240101
    confidence_level: float = 0.95
    block_size: int = 10_000
    workers: int = 1
    # mixture / generic
    n_draws: int = 5
    strategy_designs: tuple[str, ...] = ()
    strategy_estimators: tuple[str, ...] = ()
    strategy_priors: tuple[float, ...] = ()
    strategy_names: tuple[str, ...] = ()
    reference_strategy: str = ""
    level: ConditioningLevel = ConditioningLevel.ORDERED_SAMPLE
    scatter_sample: int = 2000
    # retrospective
    posited_sizes: tuple[int, ...] = ()
    size_prior: str | tuple[float, ...] = "inverse_size"
    true_sizes: tuple[int, ...] = ()
    true_size_prior: str | tuple[float, ...] = ""
    max_abort_fraction: float = 0.01
    schema: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.replicates < 1:
            raise SchemaError("replicates must be >= 1")
        if self.block_size < 1:
            raise SchemaError("block_size must be >= 1")
        if self.workers < 1:
            raise SchemaError("workers must be >= 1")
        if not 0 < self.confidence_level < 1:
            raise SchemaError("confidence_level must lie in (0, 1)")
        if not 0 <= self.master_seed < 2**64:
            raise SchemaError("master_seed must be an unsigned 64-bit integer")
        if self.scatter_sample < 0:
            raise SchemaError("scatter_sample must be >= 0")
        if not self.responses:
            raise SchemaError("at least one response is required")
        if self.study in (StudyKind.MIXTURE, StudyKind.GENERIC):
            k = len(self.strategy_designs)
            if k == 0:
                raise SchemaError("mixture studies need strategy_designs")
            for name in ("strategy_estimators", "strategy_priors"):
                if len(getattr(self, name)) != k:
                    raise SchemaError(f"{name} must have {k} entries")
            if self.strategy_names and len(self.strategy_names) != k:
                raise SchemaError(f"strategy_names must have {k} entries")
            if len(set(self.names)) != k or {"preliminary", "improved"} & set(self.names):
                raise SchemaError("strategy names must be distinct and not 'preliminary' or 'improved'")
            if abs(math.fsum(self.strategy_priors) - 1.0) > 1e-9:
                raise SchemaError(f"strategy priors sum to {math.fsum(self.strategy_priors)!r}, not 1")
            if self.reference_strategy and self.reference_strategy not in self.names:
                raise SchemaError(f"reference_strategy {self.reference_strategy!r} is not a strategy name")
            if self.n_draws < 1:
                raise SchemaError("n_draws must be >= 1")
        if self.study is StudyKind.RETROSPECTIVE:
            if not self.posited_sizes:
                raise SchemaError("retrospective studies need posited_sizes")
            if any(n < 1 for n in self.posited_sizes):
                raise SchemaError("posited sizes must be >= 1")
            size_prior_weights(self.size_prior, self.posited_sizes)
            if self.true_size_prior:
                size_prior_weights(self.true_size_prior, self.sampling_sizes)

    # -- derived -------------------------------------------------------------

    @property
    def names(self) -> tuple[str, ...]:
        if self.strategy_names:
            return tuple(self.strategy_names)
        base = [f"{d}_{e}" for d, e in zip(self.strategy_designs, self.strategy_estimators)]
        if len(set(base)) == len(base):
            return tuple(base)
        return tuple(f"{b}_{i}" for i, b in enumerate(base, 1))

    @property
    def reference(self) -> str:
        return self.reference_strategy or self.names[-1]

    @property
    def normalized_priors(self) -> list[float]:
        total = math.fsum(self.strategy_priors)
        return [p / total for p in self.strategy_priors]

    @property
    def posited_prior(self) -> list[float]:
        return size_prior_weights(self.size_prior, self.posited_sizes)

    @property
    def sampling_sizes(self) -> tuple[int, ...]:
        return self.true_sizes or self.posited_sizes

    @property
    def sampling_prior(self) -> list[float]:
        if self.true_size_prior:
            return size_prior_weights(self.true_size_prior, self.sampling_sizes)
        if self.true_sizes:
            return size_prior_weights("uniform", self.true_sizes)
        return self.posited_prior

    def with_overrides(self, **changes) -> "StudyConfig":
        changes = {k: v for k, v in changes.items() if v is not None}
        return replace(self, **changes)

    def canonical(self) -> dict:
        """Plain-data echo of every setting, with derived priors resolved.

        ``workers`` is left out: it never affects results.
        """
        out = {}
        for f in fields(self):
            if f.name == "workers":
                continue
            v = getattr(self, f.name)
            if isinstance(v, enum.Enum):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            out[f.name] = v
        if self.study is StudyKind.RETROSPECTIVE:
            out["resolved_posited_prior"] = self.posited_prior
            out["resolved_sampling_sizes"] = list(self.sampling_sizes)
            out["resolved_sampling_prior"] = self.sampling_prior
        else:
            out["resolved_strategy_priors"] = self.normalized_priors
            out["resolved_reference"] = self.reference
        return dict(sorted(out.items()))


_TYPES = {
    "study": str,
    "dataset": str,
    "response": str,
    "responses": list,
    "replicates": int,
    "master_seed": int,
    "confidence_level": float,
    "block_size": int,
    "workers": int,
    "n_draws": int,
    "strategy_designs": list,
    "strategy_estimators": list,
    "strategy_priors": list,
    "strategy_names": list,
    "reference_strategy": str,
    "level": str,
    "scatter_sample": int,
    "posited_sizes": list,
    "size_prior": (str, list),
    "true_sizes": list,
    "true_size_prior": (str, list),
    "max_abort_fraction": float,
    "schema": dict,
}

_REQUIRED = ("study", "dataset")


def parse_config(data: dict) -> StudyConfig:
    """Validate a mapping against the schema and build a :class:`StudyConfig`."""
    unknown = sorted(set(data) - set(_TYPES))
    if unknown:
        raise SchemaError(f"unknown config key(s): {unknown}")
    missing = [k for k in _REQUIRED if k not in data]
    if missing:
        raise SchemaError(f"missing required config key(s): {missing}")
    for key, value in data.items():
        want = _TYPES[key]
        ok = isinstance(value, want)
        if want is float and isinstance(value, int) and not isinstance(value, bool):
            ok = True
        if want is int and isinstance(value, bool):
            ok = False
        if not ok:
            raise SchemaError(f"config key {key!r} has type {type(value).__name__}, expected {want}")
    kwargs = dict(data)
    try:
        kwargs["study"] = StudyKind(kwargs["study"])
        if "level" in kwargs:
            kwargs["level"] = ConditioningLevel(kwargs["level"])
    except ValueError as exc:
        raise SchemaError(str(exc)) from None
    if "response" in kwargs:
        if "responses" in kwargs:
            raise SchemaError("give either 'response' or 'responses', not both")
        kwargs["responses"] = [kwargs.pop("response")]
    if "responses" not in kwargs:
        raise SchemaError("missing required config key 'response' (or 'responses')")
    for key in ("responses", "strategy_designs", "strategy_estimators", "strategy_names"):
        if key in kwargs:
            kwargs[key] = tuple(str(v) for v in kwargs[key])
    for key in ("posited_sizes", "true_sizes"):
        if key in kwargs:
            kwargs[key] = tuple(int(v) for v in kwargs[key])
    if "strategy_priors" in kwargs:
        kwargs["strategy_priors"] = tuple(float(v) for v in kwargs["strategy_priors"])
    for key in ("size_prior", "true_size_prior"):
        if isinstance(kwargs.get(key), list):
            kwargs[key] = tuple(float(v) for v in kwargs[key])
    if "confidence_level" in kwargs:
        kwargs["confidence_level"] = float(kwargs["confidence_level"])
    if "max_abort_fraction" in kwargs:
        kwargs["max_abort_fraction"] = float(kwargs["max_abort_fraction"])
    return StudyConfig(**kwargs)


def load_config(path: str | Path) -> StudyConfig:
    with open(path, "rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from None
    return parse_config(data)
