"""JSON experiment configuration (schema version 1): parsing, validation and serialization.

Every validation error is a ConfigError naming the JSON pointer of the
offending field. Unknown keys are rejected at every level.
"""

from __future__ import annotations

import json
import math
from numbers import Integral, Real

from .errors import ConfigError
from .experiments import BOUND_MODES, POSTERIOR_MODES, BoundSettings, ExperimentConfig
from .operators import operator_from_dict, operator_to_dict
from .posterior import DEFAULT_SUPPORT_POOL
from .priors import prior_from_dict, prior_to_dict

SCHEMA_VERSION = 1

_REQUIRED = ("schema", "real_prior", "operator", "sigma", "m_values", "threshold_factor", "eta", "trials")
_OPTIONAL = ("model_prior", "master_seed", "posterior_mode", "n_particles", "support_pool", "bound_mode", "bound")
_BOUND_KEYS = ("delta", "c_prime", "t", "p_order", "k", "eps", "d")


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, Real):
        raise ConfigError(path, f"expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value):
        raise ConfigError(path, "NaN is not allowed")
    return value


def _integer(value, path: str) -> int:
    if isinstance(value, bool):
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if isinstance(value, Integral):
        return int(value)
    if isinstance(value, float) and value.is_integer():
        return int(value)
    raise ConfigError(path, f"expected an integer, got {value!r}")


def _string(value, path: str, choices) -> str:
    if value not in choices:
        raise ConfigError(path, f"expected one of {list(choices)}, got {value!r}")
    return value


def _check_keys(data: dict, allowed, required, path: str) -> None:
    for key in data:
        if key not in allowed:
            raise ConfigError(f"{path}/{key}", "unknown key")
    for key in required:
        if key not in data:
            raise ConfigError(f"{path}/{key}", "missing required field")


def _parse_p_order(value, path: str) -> float:
    if value in ("inf", "infinity"):
        return math.inf
    p = _number(value, path)
    if p < 1:
        raise ConfigError(path, "p_order must be >= 1")
    return p


def _parse_bound(data, path: str = "/bound") -> BoundSettings:
    if not isinstance(data, dict):
        raise ConfigError(path, "bound must be a JSON object")
    _check_keys(data, _BOUND_KEYS, (), path)
    kwargs = {}
    for key in ("delta", "c_prime", "t", "k", "eps", "d"):
        if key in data and data[key] is not None:
            kwargs[key] = _number(data[key], f"{path}/{key}")
    if "p_order" in data:
        kwargs["p_order"] = _parse_p_order(data["p_order"], f"{path}/p_order")
    settings = BoundSettings(**kwargs)
    if not 0 < settings.delta <= 0.25:
        raise ConfigError(f"{path}/delta", "delta must lie in (0, 1/4]")
    if settings.c_prime < 1:
        raise ConfigError(f"{path}/c_prime", "c_prime must be >= 1")
    if not settings.t > 0:
        raise ConfigError(f"{path}/t", "t must be positive")
    if settings.eps is not None and settings.eps < 0:
        raise ConfigError(f"{path}/eps", "eps must be nonnegative")
    if settings.d < 2:
        raise ConfigError(f"{path}/d", "d must be >= 2")
    return settings


def config_from_dict(data) -> ExperimentConfig:
    if not isinstance(data, dict):
        raise ConfigError("/", "config must be a JSON object")
    _check_keys(data, _REQUIRED + _OPTIONAL, _REQUIRED, "")
    if isinstance(data["schema"], bool) or data["schema"] != SCHEMA_VERSION:
        raise ConfigError("/schema", f"unsupported schema version {data['schema']!r}; expected {SCHEMA_VERSION}")

    real = prior_from_dict(data["real_prior"], "/real_prior")
    model = prior_from_dict(data["model_prior"], "/model_prior") if data.get("model_prior") is not None else None
    operator = operator_from_dict(data["operator"], "/operator")

    m_values = data["m_values"]
    if not isinstance(m_values, list):
        raise ConfigError("/m_values", "expected a list of integers")
    ms = tuple(_integer(v, f"/m_values/{i}") for i, v in enumerate(m_values))

    return ExperimentConfig(
        real_prior=real,
        operator=operator,
        sigma=_number(data["sigma"], "/sigma"),
        m_values=ms,
        threshold_factor=_number(data["threshold_factor"], "/threshold_factor"),
        eta=_number(data["eta"], "/eta"),
        trials=_integer(data["trials"], "/trials"),
        master_seed=_integer(data.get("master_seed", 0), "/master_seed"),
        model_prior=model,
        posterior_mode=_string(data.get("posterior_mode", "exact"), "/posterior_mode", POSTERIOR_MODES),
        n_particles=_integer(data.get("n_particles", 1000), "/n_particles"),
        support_pool=_integer(data.get("support_pool", DEFAULT_SUPPORT_POOL), "/support_pool"),
        bound_mode=_string(data.get("bound_mode", "none"), "/bound_mode", BOUND_MODES),
        bound=_parse_bound(data["bound"]) if "bound" in data else BoundSettings(),
    )


def parse_config(text) -> ExperimentConfig:
    """Parse and validate a UTF-8 JSON config."""
    if isinstance(text, bytes):
        try:
            text = text.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ConfigError("/", f"config is not valid UTF-8: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("/", f"invalid JSON: {exc}") from None
    return config_from_dict(data)


def load_config(path) -> ExperimentConfig:
    with open(path, "rb") as fh:
        return parse_config(fh.read())


def _bound_to_dict(b: BoundSettings) -> dict:
    out = {
        "delta": b.delta,
        "c_prime": b.c_prime,
        "t": b.t,
        "p_order": "inf" if math.isinf(b.p_order) else b.p_order,
        "d": b.d,
    }
    if b.k is not None:
        out["k"] = b.k
    if b.eps is not None:
        out["eps"] = b.eps
    return out


def config_to_dict(config: ExperimentConfig) -> dict:
    out = {
        "schema": SCHEMA_VERSION,
        "real_prior": prior_to_dict(config.real_prior),
        "operator": operator_to_dict(config.operator),
        "sigma": config.sigma,
        "m_values": list(config.m_values),
        "threshold_factor": config.threshold_factor,
        "eta": config.eta,
        "trials": config.trials,
        "master_seed": config.master_seed,
        "posterior_mode": config.posterior_mode,
        "n_particles": config.n_particles,
        "support_pool": config.support_pool,
        "bound_mode": config.bound_mode,
        "bound": _bound_to_dict(config.bound),
    }
    if config.model_prior is not None:
        out["model_prior"] = prior_to_dict(config.model_prior)
    return out


def serialize_config(config: ExperimentConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, indent=2) + "\n"
