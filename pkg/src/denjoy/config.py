"""Run configuration: what to blow up, how, and where results go."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .lengths import SCHEMES, LengthScheme, admissible_herman
from .modulus import Modulus, parse_modulus
from .orbit import THETA_PRESETS, RotationAction, parse_theta

__all__ = ["Config", "ConfigError", "build_from_config"]


class ConfigError(ValueError):
    pass


@dataclass
class Config:
    modulus: str = "power:tau=0.5"
    d: int = 1
    theta: list = field(default_factory=lambda: ["golden"])
    scheme: str = "herman_v"
    k: int = 1
    K: float | None = None          # herman_v shift; None means max(2, 1/alpha(1)), doubled until admissible
    scale: float = 1.0
    radius: int | None = None       # None: smallest radius meeting tail_tol, capped by radius_cap
    tail_tol: float = 1e-10
    radius_cap: int = 10 ** 5
    max_elements: int = 2 * 10 ** 6
    tol: float = 1e-12
    seed: int = 0
    model_path: str | None = None
    report_path: str | None = None

    def __post_init__(self):
        if isinstance(self.theta, (str, int, float)):
            self.theta = [self.theta]
        self.theta = list(self.theta)

    # --- validation -------------------------------------------------------------

    def validate(self) -> "Config":
        try:
            alpha = parse_modulus(self.modulus)
        except ValueError as exc:
            raise ConfigError(f"modulus: {exc}") from exc
        if not isinstance(self.d, int) or self.d < 1:
            raise ConfigError("d must be a positive integer")
        if len(self.theta) != self.d:
            raise ConfigError(f"theta has {len(self.theta)} entries but d = {self.d}")
        for t in self.theta:
            if isinstance(t, str) and t not in THETA_PRESETS:
                try:
                    float(t)
                except ValueError:
                    raise ConfigError(f"theta entry {t!r} is neither a number nor a preset "
                                      f"({', '.join(THETA_PRESETS)})") from None
        scheme = "nu" if self.scheme == "nu_scheme" else self.scheme
        if scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {', '.join(SCHEMES)}")
        if scheme == "herman_v" and self.d != 1:
            raise ConfigError("scheme herman_v requires d = 1")
        if scheme == "herman_v" and self.scale != 1.0:
            raise ConfigError("scheme herman_v takes no scale")
        if not isinstance(self.k, int) or self.k < 1:
            raise ConfigError("k must be a positive integer")
        if self.K is not None and self.K < 1.0 / alpha.domain_cap:
            raise ConfigError("K must satisfy 1/K <= domain cap of the modulus")
        if self.scale <= 0:
            raise ConfigError("scale must be positive")
        if self.radius is not None and (not isinstance(self.radius, int) or self.radius < 0):
            raise ConfigError("radius must be a non-negative integer")
        if not 0 < self.tail_tol < 1:
            raise ConfigError("tail_tol must lie in (0, 1)")
        if self.radius_cap < 1 or self.max_elements < 1:
            raise ConfigError("radius_cap and max_elements must be positive")
        if not 0 < self.tol < 1e-3:
            raise ConfigError("tol must lie in (0, 1e-3)")
        try:
            self.scheme_object(alpha)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    # --- conversions -------------------------------------------------------------

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in fields(cls)}
        extra = set(data) - known
        if extra:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(extra))}")
        return cls(**data).validate()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def alpha(self) -> Modulus:
        return parse_modulus(self.modulus)

    def action(self) -> RotationAction:
        return RotationAction(parse_theta(self.theta))

    def scheme_object(self, alpha: Modulus | None = None) -> LengthScheme:
        alpha = self.alpha() if alpha is None else alpha
        if self.scheme == "herman_v":
            return LengthScheme("herman_v", alpha, 1, K=self.K)
        return LengthScheme(self.scheme, alpha, self.d, k=self.k, scale=self.scale)


def build_from_config(cfg: Config):
    """Build the blow-up model described by ``cfg`` (imports kept local)."""
    from .blowup import BlowupModel
    from .lengths import choose_radius

    cfg.validate()
    action = cfg.action()
    action.warn_if_resonant()
    scheme = cfg.scheme_object()
    radius = cfg.radius
    if scheme.kind == "herman_v" and cfg.K is None:
        r = radius if radius is not None else cfg.radius_cap
        scheme, _ = admissible_herman(scheme.alpha, r)
    if radius is None:
        radius = choose_radius(scheme, cfg.tail_tol, cfg.radius_cap, cfg.max_elements).radius
    model = BlowupModel.build(action, scheme, radius=radius, tail_tol=cfg.tail_tol, tol=cfg.tol)
    model.meta["config"] = cfg.to_dict()
    return model
