from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..errors import InvalidInput
from ..features import AUX_GROUPS

ALL_AUX = tuple(AUX_GROUPS)

# which pieces each numbered ablation removes
ABLATIONS = {
    0: {},
    1: {"use_cloud": False, "aux_groups": ()},
    2: {"aux_groups": ()},
    3: {"aux_groups": tuple(g for g in ALL_AUX if g != "pd_stats")},
    4: {"aux_groups": tuple(g for g in ALL_AUX if g != "pc_stats")},
    5: {"aux_groups": tuple(g for g in ALL_AUX if g != "noise")},
    6: {"aux_groups": tuple(g for g in ALL_AUX if g != "bbox")},
}


@dataclass(frozen=True)
class TunConfig:
    H: int = 64
    F: int = 64
    heads: int = 4
    N_pd: int = 32
    N_pc: int = 512
    dropout_fusion: float = 0.3
    dropout_clf1: float = 0.4
    dropout_clf2: float = 0.3
    alpha: float = 1.0
    gamma: float = 2.0
    w0: float = 1.0
    w1: float = 2.0
    batch_size: int = 8
    use_cloud: bool = True
    aux_groups: tuple = field(default=ALL_AUX)
    seed: int = 0
    lr_max: float = 1e-3
    lr_min: float = 1e-5
    weight_decay: float = 1e-4
    max_epochs: int = 200
    patience: int = 10
    clip: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "aux_groups", tuple(self.aux_groups))
        if self.H % self.heads:
            raise InvalidInput(f"H={self.H} must be divisible by heads={self.heads}")
        if self.F % 2:
            raise InvalidInput(f"F={self.F} must be even")
        bad = set(self.aux_groups) - set(ALL_AUX)
        if bad:
            raise InvalidInput(f"unknown auxiliary groups {sorted(bad)}")
        # keep the canonical group order whatever order was given
        object.__setattr__(self, "aux_groups", tuple(g for g in ALL_AUX if g in self.aux_groups))
        for name in ("N_pd", "N_pc", "batch_size", "max_epochs"):
            if getattr(self, name) < 1:
                raise InvalidInput(f"{name} must be positive")

    @classmethod
    def paper(cls, **kw) -> "TunConfig":
        """Full-size settings (H = F = 256, 8 heads, 100 diagram rows, 50k points)."""
        base = dict(H=256, F=256, heads=8, N_pd=100, N_pc=50_000, batch_size=16)
        base.update(kw)
        return cls(**base)

    @classmethod
    def desk(cls, **kw) -> "TunConfig":
        return cls(**kw)

    def ablation(self, k: int) -> "TunConfig":
        if k not in ABLATIONS:
            raise InvalidInput(f"ablation must be one of {sorted(ABLATIONS)}, got {k}")
        return replace(self, **ABLATIONS[k])

    @property
    def aux_dim(self) -> int:
        return sum(len(AUX_GROUPS[g]) for g in self.aux_groups)

    @property
    def fusion_dim(self) -> int:
        """Width D of the fused vector: F/2 per present branch."""
        parts = 1 + int(self.use_cloud) + int(bool(self.aux_groups))
        return parts * self.F // 2

    def to_dict(self) -> dict:
        d = asdict(self)
        d["aux_groups"] = list(self.aux_groups)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise InvalidInput(f"unknown config keys {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "TunConfig":
        try:
            d = json.loads(Path(path).read_text())
        except (OSError, ValueError) as exc:
            raise InvalidInput(f"cannot read config {path}: {exc}") from None
        ablation = d.pop("ablation", 0)
        preset = d.pop("preset", "desk")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidInput(f"unknown config keys {sorted(unknown)} in {path}")
        cfg = (cls.paper if preset == "paper" else cls.desk)(**d)
        return cfg.ablation(ablation) if ablation else cfg
