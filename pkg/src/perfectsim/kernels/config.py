"""Kernel construction from JSON-style dicts. Unknown fields are rejected.

Field names per ``type``:

alternating_renewal
    ``survival`` (both signs) or ``minus`` and ``plus``; each is
    ``{"values": [p_1, ..., p_m], "limit": p_inf}`` or ``{"rule": "sqrt"}``.
    Optional ``epsilon``.
changepoint_binary
    ``p1``, ``c``, ``sigma``, ``alpha``, ``gamma_ratio`` (all optional).
generalized_walk
    ``n_letters``; optional ``arcs`` (default: every w -> g with g != w),
    ``weights``, ``base``, ``modulation`` ("rotation" or "none"), ``labels``.
markov
    ``matrix``; optional ``labels``.
"""
from __future__ import annotations

from ..errors import ConfigError
from .changepoint import ChangepointBinaryKernel
from .renewal import AlternatingRenewalKernel, SqrtSurvival, SurvivalRates
from .walk import GeneralizedWalkKernel, MarkovKernel

_FIELDS = {
    "alternating_renewal": {"survival", "minus", "plus", "epsilon"},
    "changepoint_binary": {"p1", "c", "sigma", "alpha", "gamma_ratio"},
    "generalized_walk": {"n_letters", "arcs", "weights", "base", "modulation", "labels"},
    "markov": {"matrix", "labels"},
}


def _strict(d: dict, allowed: set, where: str) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"unknown field(s) in {where}: {sorted(extra)}", code="config.unknown_field")


def _survival(d: dict, where: str) -> SurvivalRates:
    _strict(d, {"values", "limit", "rule"}, where)
    if "rule" in d:
        if set(d) != {"rule"} or d["rule"] != "sqrt":
            raise ConfigError(f"{where}: only rule 'sqrt' is available, with no other fields")
        return SqrtSurvival()
    if "limit" not in d:
        raise ConfigError(f"{where}: missing 'limit'")
    return SurvivalRates(d.get("values", []), d["limit"])


def kernel_from_config(cfg: dict):
    if not isinstance(cfg, dict) or "type" not in cfg:
        raise ConfigError("kernel config needs a 'type'")
    kind = cfg["type"]
    if kind not in _FIELDS:
        raise ConfigError(f"unknown kernel type {kind!r}")
    params = {k: v for k, v in cfg.items() if k != "type"}
    _strict(params, _FIELDS[kind], f"kernel '{kind}'")
    try:
        if kind == "alternating_renewal":
            if "survival" in params:
                if "minus" in params or "plus" in params:
                    raise ConfigError("give either 'survival' or 'minus'/'plus'")
                minus = plus = _survival(params["survival"], "survival")
            else:
                if "minus" not in params or "plus" not in params:
                    raise ConfigError("alternating_renewal needs 'survival' or both 'minus' and 'plus'")
                minus = _survival(params["minus"], "minus")
                plus = _survival(params["plus"], "plus")
            return AlternatingRenewalKernel(minus, plus, params.get("epsilon"))
        if kind == "changepoint_binary":
            return ChangepointBinaryKernel(**params)
        if kind == "generalized_walk":
            n = params.pop("n_letters", None)
            if n is None:
                raise ConfigError("generalized_walk needs 'n_letters'")
            arcs = params.pop("arcs", None)
            if arcs is None:
                arcs = [(w, g) for w in range(n) for g in range(n) if g != w]
            return GeneralizedWalkKernel(int(n), [tuple(a) for a in arcs], **params)
        if "matrix" not in params:
            raise ConfigError("markov needs 'matrix'")
        return MarkovKernel(params["matrix"], params.get("labels"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"kernel '{kind}': {exc}") from exc
