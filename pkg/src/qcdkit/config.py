"""Experiment configuration files (INI syntax) and the built-in presets.

Every value is validated on load; unknown sections or keys and missing
required keys raise :class:`ConfigError` naming ``section.key``.  Thresholds
are always log-scale numbers (see :mod:`qcdkit.detectors.specs`).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from .detectors.glr import default_epsilon, default_window
from .detectors.specs import (
    Cusum,
    DeShiryaev,
    DetectorSpec,
    FractionalShiryaev,
    GlrGaussian,
    MixtureGaussian,
    Shiryaev,
    ShiryaevRoberts,
)
from .dist_models import (
    Bernoulli,
    ChangePointLaw,
    DensityPair,
    ExponentialRate,
    FixedChange,
    GaussianMeanShift,
    GeometricPrior,
    NeverChange,
)
from .errors import InputError


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


def _float(s: str) -> float:
    v = float(s)
    if not math.isfinite(v):
        raise ValueError("must be finite")
    return v


def _int(s: str) -> int:
    return int(s)


def _floats(s: str) -> tuple[float, ...]:
    parts = [p.strip() for p in s.replace(";", ",").split(",") if p.strip()]
    if not parts:
        raise ValueError("empty list")
    return tuple(_float(p) for p in parts)


def _words(s: str) -> tuple[str, ...]:
    return tuple(p.strip().lower() for p in s.split(",") if p.strip())


def _choice(*options: str) -> Callable[[str], str]:
    def parse(s: str) -> str:
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v

    return parse


def _optional_int(s: str) -> int | None:
    return None if s.strip().lower() in ("none", "") else int(s)


# section -> key -> parser
SCHEMA: dict[str, dict[str, Callable[[str], object]]] = {
    "model": {
        "family": _choice("gaussian", "bernoulli", "exponential"),
        "mu0": _float, "mu1": _float, "sigma": _float,
        "p0": _float, "p1": _float,
        "lam0": _float, "lam1": _float,
    },
    "change": {
        "law": _choice("geometric", "fixed", "never"),
        "rho": _float,
        "gamma": _int,
    },
    "detector": {
        "kind": _choice("shiryaev", "cusum", "sr", "de_shiryaev", "fractional_shiryaev", "glr", "mixture"),
        "thresholds": _floats,
        "rho": _float,
        "lower": _float,
        "period": _int,
        "head_start": _float,
        "window": _int,
        "glr_kind": _choice("siegmund", "lorden"),
        "epsilon": _float,
        "alpha": _float,
        "prior_mean": _float,
        "prior_var": _float,
    },
    "simulation": {
        "trials": _int,
        "seed": _int,
        "horizon_cap": _int,
        "threads": _int,
        "mode": _choice("bayesian", "minimax"),
        "far_trials": _int,
    },
    "output": {
        "path": str,
    },
    "overshoot": {
        "crossings": _int,
        "thresholds": _floats,
        "eta_trials": _int,
        "predict": _floats,
        "degenerate_step": _float,
    },
    "network": {
        "sensors": _int,
        "quantizer_levels": _optional_int,
        "local_detector": _choice("cusum", "shiryaev"),
        "local_thresholds": _floats,
        "alpha": _float,
        "rules": _words,
        "sum_threshold": _float,
        "centralized_threshold": _float,
    },
}

REQUIRED = {
    "model": ("family",),
    "change": ("law",),
    "detector": ("kind", "thresholds"),
    "simulation": ("trials",),
}


@dataclass(frozen=True)
class ExperimentConfig:
    values: dict = field(default_factory=dict)  # section -> {key: parsed value}

    def get(self, section: str, key: str, default=None):
        return self.values.get(section, {}).get(key, default)

    def require(self, section: str, key: str):
        v = self.get(section, key)
        if v is None:
            raise ConfigError(f"missing required key {section}.{key}")
        return v

    def has_section(self, section: str) -> bool:
        return section in self.values

    # --- builders ------------------------------------------------------------

    def model(self) -> DensityPair:
        fam = self.require("model", "family")
        try:
            if fam == "gaussian":
                return GaussianMeanShift(
                    self.require("model", "mu0"), self.require("model", "mu1"), self.get("model", "sigma", 1.0)
                )
            if fam == "bernoulli":
                return Bernoulli(self.require("model", "p0"), self.require("model", "p1"))
            return ExponentialRate(self.require("model", "lam0"), self.require("model", "lam1"))
        except InputError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def change_law(self) -> ChangePointLaw:
        law = self.require("change", "law")
        try:
            if law == "geometric":
                return GeometricPrior(self.require("change", "rho"))
            if law == "fixed":
                return FixedChange(self.require("change", "gamma"))
            return NeverChange()
        except InputError as exc:
            raise ConfigError(f"change: {exc}") from exc

    def prior_rho(self) -> float:
        rho = self.get("detector", "rho", self.get("change", "rho"))
        if rho is None:
            raise ConfigError("missing required key detector.rho (or change.rho)")
        return rho

    def detector(self, log_threshold: float) -> DetectorSpec:
        kind = self.require("detector", "kind")
        g = lambda key, default=None: self.get("detector", key, default)  # noqa: E731
        try:
            if kind == "shiryaev":
                return Shiryaev(log_threshold, self.prior_rho())
            if kind == "cusum":
                return Cusum(log_threshold)
            if kind == "sr":
                return ShiryaevRoberts(log_threshold, g("head_start", 0.0))
            if kind == "de_shiryaev":
                lower = g("lower")
                if lower is None:
                    raise ConfigError("missing required key detector.lower")
                return DeShiryaev(log_threshold, self.prior_rho(), lower)
            if kind == "fractional_shiryaev":
                return FractionalShiryaev(log_threshold, self.prior_rho(), g("period", 2))
            model = self.model()
            if not isinstance(model, GaussianMeanShift):
                raise ConfigError("detector.kind: GLR and mixture detectors need model.family = gaussian")
            alpha = g("alpha")
            window = g("window")
            if window is None:
                if alpha is None:
                    raise ConfigError("missing required key detector.window (or detector.alpha to derive it)")
                window = default_window(alpha, model.kl())
            if kind == "glr":
                epsilon = g("epsilon", default_epsilon(alpha) if alpha is not None else 0.0)
                return GlrGaussian(
                    log_threshold, window, g("glr_kind", "siegmund"), epsilon, model.mu0, model.sigma
                )
            return MixtureGaussian(
                log_threshold, window, g("prior_mean", model.mu1), g("prior_var", 1.0), model.mu0, model.sigma
            )
        except InputError as exc:
            raise ConfigError(f"detector: {exc}") from exc

    def detectors(self) -> list[DetectorSpec]:
        return [self.detector(t) for t in self.require("detector", "thresholds")]

    @property
    def trials(self) -> int:
        return self.require("simulation", "trials")

    @property
    def seed(self) -> int:
        return self.get("simulation", "seed", 0)

    @property
    def horizon_cap(self) -> int:
        return self.get("simulation", "horizon_cap", 10**6)

    @property
    def threads(self) -> int | None:
        return self.get("simulation", "threads")


def _parse_into(values: dict, section: str, key: str, raw: str) -> None:
    if section not in SCHEMA:
        raise ConfigError(f"unknown section [{section}]")
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key {section}.{key}")
    try:
        values.setdefault(section, {})[key] = SCHEMA[section][key](raw)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid value for {section}.{key}: {raw!r} ({exc})") from exc


def parse_config(
    text: str | None = None,
    *,
    base: ExperimentConfig | None = None,
    overrides: Iterable[str] = (),
) -> ExperimentConfig:
    """Layer an INI document and ``section.key=value`` overrides on top of ``base``."""
    values = {s: dict(kv) for s, kv in (base.values if base else {}).items()}
    if text:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str.lower
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config: {exc}") from exc
        for section in parser.sections():
            for key, raw in parser.items(section):
                _parse_into(values, section.lower(), key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        lhs, raw = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        _parse_into(values, section.strip().lower(), key.strip().lower(), raw.strip())
    return ExperimentConfig(values)


def validate_required(cfg: ExperimentConfig, sections: Iterable[str]) -> None:
    for section in sections:
        for key in REQUIRED.get(section, ()):
            cfg.require(section, key)
    trials = cfg.get("simulation", "trials")
    if trials is not None and trials < 1:
        raise ConfigError("simulation.trials must be >= 1")
    seed = cfg.get("simulation", "seed")
    if seed is not None and not 0 <= seed < 2**64:
        raise ConfigError("simulation.seed must be an unsigned 64-bit integer")
    cap = cfg.get("simulation", "horizon_cap")
    if cap is not None and cap < 1:
        raise ConfigError("simulation.horizon_cap must be >= 1")
    threads = cfg.get("simulation", "threads")
    if threads is not None and threads < 1:
        raise ConfigError("simulation.threads must be >= 1")


def load_config(path: str | Path | None = None, *, preset: str | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    if preset is not None and preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}")
    base = parse_config(PRESETS[preset]) if preset else None
    text = None
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return parse_config(text, base=base, overrides=overrides)


TABLE2 = """
# Shiryaev, N(0,1) -> N(1,1), geometric prior rho = 0.01
[model]
family = gaussian
mu0 = 0
mu1 = 1
sigma = 1

[change]
law = geometric
rho = 0.01

[detector]
kind = shiryaev
# b = log(A / (1 - A)) for A = 0.8, 0.9, 0.99, 0.999, 0.99999
thresholds = 1.386, 2.197, 4.595, 6.906, 11.512

[simulation]
trials = 1000000
seed = 20240101
horizon_cap = 1000000

[overshoot]
crossings = 200000
thresholds = 5, 15, 25
predict = 1.386, 2.197, 4.595, 6.906, 11.512
"""

FIG4 = """
# ADD against PFA for Shiryaev, N(0,1) -> N(0.75,1), rho = 0.01
[model]
family = gaussian
mu0 = 0
mu1 = 0.75

[change]
law = geometric
rho = 0.01

[detector]
kind = shiryaev
thresholds = 3.0, 4.5, 6.0, 7.5

[simulation]
trials = 400000
seed = 4
mode = bayesian
"""

FIG6 = """
# worst-case delay against FAR for CuSum, N(0,1) -> N(0.75,1)
[model]
family = gaussian
mu0 = 0
mu1 = 0.75

[change]
law = never

[detector]
kind = cusum
thresholds = 4.8, 6.3, 7.8, 9.2

[simulation]
trials = 20000
far_trials = 2000
seed = 6
mode = minimax
horizon_cap = 10000000
"""

PRESETS = {"table2": TABLE2, "fig4": FIG4, "fig6": FIG6}
