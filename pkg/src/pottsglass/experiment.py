"""Declarative experiment descriptions shared by the CLI and the engines.

An :class:`ExperimentSpec` captures everything a run needs -- sizes,
temperatures, sector, Hamiltonian kind, seeds, replica counts, chain
parameters, and output routing -- and is serialized verbatim into every
output file header so results can be re-derived from the file alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

from .core import count_configs

__all__ = ["ExperimentSpec", "ValidationError"]


class ValidationError(ValueError):
    """The spec fails a structural constraint before any computation runs."""


@dataclass(frozen=True)
class ExperimentSpec:
    command: str
    kappa: int = 3
    n: tuple[int, ...] = (6,)
    beta: tuple[float, ...] = (1.0,)
    sector: str = "all"
    kind: str = "centered"
    seed: int = 0
    replicas: int = 8
    sweeps: int = 2000
    burn_in: int = 1000
    thinning: int = 10
    ladder: tuple[float, ...] = ()
    epsilon: tuple[float, ...] = ()
    moments: tuple[int, ...] = ()
    delta: float = 0.01
    trials: int = 1000
    n_grid: int = 13
    beta_max: float = 1.0
    kappa_max: int = 100
    cap: int = 20_000_000
    workers: int = 1
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        for name in ("n",):
            object.__setattr__(self, name, _int_tuple(getattr(self, name)))
        for name in ("beta", "ladder", "epsilon"):
            object.__setattr__(self, name, _float_tuple(getattr(self, name)))
        object.__setattr__(self, "moments", _int_tuple(self.moments))

    def validate(self) -> None:
        """Raise :class:`ValidationError` on the first failed constraint."""
        if self.kappa < 2:
            raise ValidationError(f"kappa must be >= 2, got {self.kappa}")
        if any(n < 1 for n in self.n):
            raise ValidationError(f"sizes must be positive, got {self.n}")
        if any(b < 0 for b in self.beta):
            raise ValidationError(f"betas must be nonnegative, got {self.beta}")
        if self.sector not in ("all", "balanced"):
            raise ValidationError(f"sector must be 'all' or 'balanced', got {self.sector!r}")
        if self.kind not in ("raw", "centered"):
            raise ValidationError(f"kind must be 'raw' or 'centered', got {self.kind!r}")
        if self.fmt not in ("csv", "json"):
            raise ValidationError(f"format must be 'csv' or 'json', got {self.fmt!r}")
        if self.sector == "balanced":
            for n in self.n:
                if n % self.kappa:
                    raise ValidationError(
                        f"balanced sector needs kappa | n; n={n}, kappa={self.kappa}"
                    )
        if self.ladder and list(self.ladder) != sorted(self.ladder):
            raise ValidationError("ladder betas must be nondecreasing")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")
        if self.replicas < 1:
            raise ValidationError("replicas must be >= 1")

    def check_cap(self, n: int) -> None:
        size = count_configs(n, self.kappa, self.sector)
        if size > self.cap:
            raise ValidationError(
                f"sector size {size} at n={n} exceeds the enumeration cap {self.cap}"
            )

    def to_json(self) -> str:
        """Canonical JSON of the experiment content.

        ``out`` and ``workers`` are routing/execution knobs, not experiment
        parameters; they are excluded so identical experiments produce
        byte-identical files regardless of sink path or parallelism.
        """
        payload = asdict(self)
        payload = {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in payload.items()
            if k not in ("out", "workers")
        }
        return json.dumps(payload, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        payload = json.loads(text)
        names = {f.name for f in fields(cls)}
        kwargs = {k: v for k, v in payload.items() if k in names}
        for key in ("n", "moments"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
        for key in ("beta", "ladder", "epsilon"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(float(v) for v in kwargs[key])
        return cls(**kwargs)

    def replace(self, **changes) -> "ExperimentSpec":
        payload = asdict(self)
        payload.update(changes)
        return ExperimentSpec(**payload)


def _int_tuple(value) -> tuple[int, ...]:
    if value is None:
        return ()
    if isinstance(value, (int,)):
        return (int(value),)
    return tuple(int(v) for v in value)


def _float_tuple(value) -> tuple[float, ...]:
    if value is None:
        return ()
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        v = float(value)
        if not math.isfinite(v) and v != math.inf:
            raise ValidationError("beta values must be finite or inf")
        return (v,)
    return tuple(float(v) for v in value)
