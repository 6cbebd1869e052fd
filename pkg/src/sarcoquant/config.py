"""Run configuration shared by all commands.

One flat dataclass covers orientation, spacing, HU window, cutoffs,
slice policy, segmentation parameters, output format and seed. It can be
loaded from a ``key=value`` config file with CLI flags taking precedence,
and it serializes into every report so results carry their provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from .baseline_seg import SegParams
from .geometry import parse_orientation
from .preprocess import HuWindow
from .sma import DEFAULT_CUTOFFS, SLICE_POLICIES

OUTPUT_FORMATS = ("csv", "json")


@dataclass(frozen=True)
class RunConfig:
    orientation: str = "RAS"
    spacing: tuple[float, float, float] = (1.0, 1.0, 1.0)
    hu_lo: float = -175.0
    hu_hi: float = 250.0
    cutoff_male: float = DEFAULT_CUTOFFS["male"]
    cutoff_female: float = DEFAULT_CUTOFFS["female"]
    slice_policy: str = "single"
    muscle_lo: float = -29.0
    muscle_hi: float = 150.0
    body_threshold: float = -500.0
    opening_radius: int = 1
    min_component_mm2: float = 100.0
    format: str = "csv"
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "orientation", parse_orientation(self.orientation))
        spacing = tuple(float(s) for s in self.spacing)
        if len(spacing) != 3 or any(s <= 0 for s in spacing):
            raise ValueError(f"spacing must be 3 positive values, got {self.spacing}")
        object.__setattr__(self, "spacing", spacing)
        if self.format not in OUTPUT_FORMATS:
            raise ValueError(f"format must be one of {OUTPUT_FORMATS}, got {self.format!r}")
        if self.slice_policy not in SLICE_POLICIES and not self.slice_policy.startswith("index="):
            raise ValueError(
                f"slice policy must be one of {SLICE_POLICIES} or index=<k>, got {self.slice_policy!r}"
            )
        # window and seg params validate their own invariants
        self.hu_window()
        self.seg_params()
        if self.cutoff_male <= 0 or self.cutoff_female <= 0:
            raise ValueError("cutoffs must be positive")

    def hu_window(self) -> HuWindow:
        return HuWindow(self.hu_lo, self.hu_hi)

    def seg_params(self) -> SegParams:
        return SegParams(
            muscle_window=HuWindow(self.muscle_lo, self.muscle_hi),
            body_threshold_hu=self.body_threshold,
            opening_radius_px=self.opening_radius,
            min_component_mm2=self.min_component_mm2,
        )

    def cutoffs(self) -> dict[str, float]:
        return {"male": self.cutoff_male, "female": self.cutoff_female}

    def to_items(self) -> list[tuple[str, str]]:
        """Ordered (key, value) pairs for provenance headers."""
        items = []
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                text = ",".join(repr(v) for v in value)
            else:
                text = str(value)
            items.append((f.name, text))
        return items


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key == "spacing":
        parts = [float(p) for p in str(raw).replace(",", " ").split()]
        if len(parts) == 1:
            parts = parts * 3
        return tuple(parts)
    if key in ("opening_radius", "seed"):
        return int(raw)
    if key in ("orientation", "slice_policy", "format"):
        return str(raw)
    return float(raw)


def parse_config_file(path: str | Path) -> dict:
    """Read a flat ``key=value`` file; '#' starts a comment."""
    values: dict = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _coerce(key, raw)
    return values


def build_config(config_file: str | None = None, **overrides) -> RunConfig:
    """Defaults, then config file values, then explicit flags."""
    values: dict = {}
    if config_file:
        values.update(parse_config_file(config_file))
    for key, value in overrides.items():
        if value is None:
            continue
        values[key] = _coerce(key, value) if isinstance(value, str) else value
    return RunConfig(**values)


def with_updates(config: RunConfig, **changes) -> RunConfig:
    return replace(config, **changes)
