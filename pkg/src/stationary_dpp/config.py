"""Run configuration documents.

A run configuration is a YAML (or JSON, a subset of YAML) mapping::

    suite: gap-prob              # one of list-suites, or "all"
    seed: 20240611               # decimal unsigned 64-bit integer, mandatory
    symbol:                      # symbol document, see symbol_from_dict
      kind: constant
      value: 0.3
    params:                      # suite parameters; for "all" one section per suite
      lengths: [8]
    output:
      dir: out                   # default "out"
      formats: [csv, json]       # default both
    workers: 1                   # threads used for sampling

Rationals inside symbol documents are written as ``"num/den"`` strings.
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field

import yaml

from .errors import ConfigInvalidError, InvalidSymbolError
from .suites import ALL_DEFAULTS, SUITES, suite_names
from .symbol import SpectralSymbol, symbol_from_dict

__all__ = ["RunConfig", "load_config", "parse_config", "FORMATS"]

FORMATS = ("csv", "json")
_TOP_KEYS = {"suite", "seed", "symbol", "params", "output", "workers"}
U64_MAX = 2 ** 64 - 1


@dataclass
class RunConfig:
    suite: str
    seed: int
    symbol: SpectralSymbol
    symbol_doc: dict
    params: dict
    out_dir: str = "out"
    formats: tuple = FORMATS
    workers: int = 1
    raw: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Fully resolved document, embedded into reports."""
        return {
            "suite": self.suite,
            "seed": str(self.seed),
            "symbol": self.symbol_doc,
            "params": self.params,
            "output": {"dir": self.out_dir, "formats": list(self.formats)},
            "workers": self.workers,
        }

    def suite_params(self, name):
        if self.suite == "all":
            return self.params.get(name, {})
        return self.params


def _is_int(x):
    return isinstance(x, int) and not isinstance(x, bool)


def _check_value(field_name, kind, v):
    def bad(reason):
        raise ConfigInvalidError(field_name, reason)

    if kind == "int":
        if not _is_int(v) or v < 0:
            bad("expected a nonnegative integer")
        return v
    if kind == "float":
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            bad("expected a number")
        return float(v)
    if kind == "bool":
        if not isinstance(v, bool):
            bad("expected true or false")
        return v
    if kind == "str":
        if not isinstance(v, str):
            bad("expected a string")
        return v
    if kind == "int_list":
        if not isinstance(v, list) or not all(_is_int(x) for x in v):
            bad("expected a list of integers")
        return list(v)
    if kind == "float_list":
        if not isinstance(v, list) or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
            bad("expected a list of numbers")
        return [float(x) for x in v]
    if kind == "size":
        if _is_int(v) and v > 0:
            return v
        if isinstance(v, list) and v and all(_is_int(x) and x > 0 for x in v):
            return list(v)
        bad("expected a positive integer or a list of positive side lengths")
    if kind == "list":
        if not isinstance(v, list):
            bad("expected a list")
        return v
    bad(f"unknown parameter kind {kind}")


def _validate_params(suite, params, prefix, defaults=None):
    spec = SUITES[suite]
    if params is None:
        params = {}
    if not isinstance(params, dict):
        raise ConfigInvalidError(prefix, "expected a mapping")
    merged = dict(defaults or {})
    merged.update(params)
    out = {}
    for k, v in merged.items():
        if k not in spec.params:
            raise ConfigInvalidError(f"{prefix}.{k}", f"unknown parameter for suite {suite!r}")
        out[k] = _check_value(f"{prefix}.{k}", spec.params[k].kind, v)
    for k, p in spec.params.items():
        if k in out:
            continue
        if p.required:
            raise ConfigInvalidError(f"{prefix}.{k}", f"required by suite {suite!r}")
        out[k] = copy.deepcopy(p.default)
    return out


def _parse_seed(v):
    if _is_int(v):
        seed = v
    elif isinstance(v, str) and v.strip().isdigit():
        seed = int(v.strip())
    else:
        raise ConfigInvalidError("seed", "expected a decimal unsigned 64-bit integer")
    if not 0 <= seed <= U64_MAX:
        raise ConfigInvalidError("seed", "out of the unsigned 64-bit range")
    return seed


def parse_config(doc, seed_override=None, out_override=None, formats_override=None,
                 workers_override=None) -> RunConfig:
    """Validate a configuration mapping.

    Raises
    ------
    ConfigInvalidError
        With the offending field and a reason.
    """
    if not isinstance(doc, dict):
        raise ConfigInvalidError("<root>", "configuration must be a mapping")
    doc = copy.deepcopy(doc)
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise ConfigInvalidError(sorted(unknown)[0], "unknown top-level field")
    suite = doc.get("suite")
    if suite not in suite_names():
        raise ConfigInvalidError("suite", f"unknown suite {suite!r}; choose from {', '.join(suite_names())}")
    if seed_override is not None:
        seed = _parse_seed(seed_override)
    elif "seed" in doc:
        seed = _parse_seed(doc["seed"])
    else:
        raise ConfigInvalidError("seed", "missing (a seed is mandatory)")
    if "symbol" not in doc:
        raise ConfigInvalidError("symbol", "missing")
    try:
        symbol = symbol_from_dict(doc["symbol"])
    except InvalidSymbolError as exc:
        raise ConfigInvalidError("symbol", str(exc)) from None
    params_doc = doc.get("params") or {}
    if suite == "all":
        if not isinstance(params_doc, dict):
            raise ConfigInvalidError("params", "expected a mapping of suite sections")
        for k in params_doc:
            if k not in SUITES:
                raise ConfigInvalidError(f"params.{k}", "unknown suite section")
        params = {name: _validate_params(name, params_doc.get(name), f"params.{name}", ALL_DEFAULTS.get(name))
                  for name in SUITES}
    else:
        params = _validate_params(suite, params_doc, "params")
    out = doc.get("output") or {}
    if not isinstance(out, dict):
        raise ConfigInvalidError("output", "expected a mapping")
    out_dir = out_override or out.get("dir", "out")
    if not isinstance(out_dir, str):
        raise ConfigInvalidError("output.dir", "expected a path string")
    formats = formats_override if formats_override is not None else out.get("formats", list(FORMATS))
    if isinstance(formats, str):
        formats = [f.strip() for f in formats.split(",") if f.strip()]
    if not isinstance(formats, list) or not formats or not set(formats) <= set(FORMATS):
        raise ConfigInvalidError("output.formats", f"expected a nonempty subset of {list(FORMATS)}")
    workers = workers_override if workers_override is not None else doc.get("workers", 1)
    if not _is_int(workers) or workers < 1:
        raise ConfigInvalidError("workers", "expected a positive integer")
    return RunConfig(suite, seed, symbol, doc["symbol"], params, out_dir,
                     tuple(f for f in FORMATS if f in formats), workers, doc)


def load_config(path, **overrides) -> RunConfig:
    """Read and validate a YAML or JSON configuration file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigInvalidError("<file>", str(exc)) from None
    except yaml.YAMLError as exc:
        raise ConfigInvalidError("<file>", f"not valid YAML/JSON: {exc}") from None
    return parse_config(doc, **overrides)
