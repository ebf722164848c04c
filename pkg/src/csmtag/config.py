"""Training configuration with strict JSON round-tripping."""

import dataclasses
import json

MATRIX_MODES = ("direct", "metapath", "none")


class ConfigError(ValueError):
    pass


@dataclasses.dataclass
class TrainConfig:
    """Hyperparameters; defaults are the full-scale settings, see desk()."""

    alpha: float = 0.5
    d_emb: int = 300
    d_hid: int = 128
    n_layers: int = 2
    dropout: float = 0.5
    learning_rate: float = 0.02
    epochs: int = 30
    batch_size: int = 256
    meta_path_length: int = 3
    folds: int = 10
    seed: int = 1
    matrix_mode: str = "metapath"

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ConfigError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        for field in ("d_emb", "d_hid", "n_layers", "epochs", "batch_size"):
            if getattr(self, field) < 1:
                raise ConfigError(f"{field} must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.meta_path_length < 1 or self.meta_path_length % 2 == 0:
            raise ConfigError("meta_path_length must be odd and >= 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.matrix_mode not in MATRIX_MODES:
            raise ConfigError(f"matrix_mode must be one of {MATRIX_MODES}")

    @classmethod
    def desk(cls, **overrides):
        """Small-dimension profile for tests and quick local experiments."""
        base = dict(d_emb=32, d_hid=16, n_layers=1, dropout=0.2, epochs=10,
                    batch_size=64)
        base.update(overrides)
        return cls(**base)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def to_json(self):
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text):
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        if not isinstance(obj, dict):
            raise ConfigError("config file must hold a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_json(f.read())
