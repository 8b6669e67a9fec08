"""
Run configuration parsing.

Config files are key=value text read with python-dotenv; dotted keys form
sections (`operator.kind = harmonic`, `grid.lambda_min = -1`). `--set`
overrides use the same syntax and win over the file.
"""

import copy
import inspect
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import pandas as pd
from dotenv import dotenv_values

from xitrace.errors import DescriptorError
from xitrace.jacobi import JacobiOperator
from xitrace.potentials import BUILTINS, Potential, periodic, sampled

logger = logging.getLogger(__name__)


def _nest(flat: Dict[str, str]) -> Dict[str, Any]:
    nested: Dict[str, Any] = {}
    for key, value in flat.items():
        parts = [p.strip() for p in key.strip().split(".") if p.strip()]
        if not parts:
            raise DescriptorError(f"Empty configuration key in '{key}'")
        node = nested
        for part in parts[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise DescriptorError(f"Key '{key}' conflicts with a scalar value at '{part}'")
            node = child
        if isinstance(node.get(parts[-1]), dict):
            raise DescriptorError(f"Key '{key}' conflicts with section '{parts[-1]}'")
        node[parts[-1]] = value.strip() if isinstance(value, str) else value
    return nested


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def parse_overrides(overrides: Sequence[str]) -> Dict[str, str]:
    """Parse `key=value` strings from the command line."""
    parsed = {}
    for item in overrides or ():
        if "=" not in item:
            raise DescriptorError(f"Override '{item}' is not of the form key=value")
        key, value = item.split("=", 1)
        if not key.strip():
            raise DescriptorError(f"Override '{item}' has an empty key")
        parsed[key.strip()] = value.strip()
    return parsed


def load_config(path: Optional[str] = None, overrides: Sequence[str] = (),
                defaults: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    Load a run configuration.

    Args:
        path: key=value config file (optional)
        overrides: `key=value` strings applied after the file
        defaults: Nested defaults the file and overrides are merged over

    Returns:
        Nested configuration dictionary with string leaves from the file

    Raises:
        DescriptorError: If the file is missing or a key is malformed
    """
    flat: Dict[str, str] = {}
    if path:
        if not Path(path).is_file():
            raise DescriptorError(f"Config file not found: {path}")
        values = dotenv_values(path)
        for key, value in values.items():
            if value is None:
                raise DescriptorError(f"Config key '{key}' in {path} has no value")
            flat[key] = value
        logger.info(f"Loaded {len(flat)} settings from {path}")
    flat.update(parse_overrides(overrides))
    return _merge(defaults or {}, _nest(flat))


# ---------------------------------------------------------------------------
# Typed accessors
# ---------------------------------------------------------------------------

def get_section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    section = config.get(name, {})
    if not isinstance(section, dict):
        raise DescriptorError(f"'{name}' must be a section, got value '{section}'")
    return section


def get_float(section: Dict[str, Any], key: str, default: Optional[float] = None) -> float:
    value = section.get(key, default)
    if value is None:
        raise DescriptorError(f"Missing required setting '{key}'")
    try:
        return float(value)
    except (TypeError, ValueError):
        raise DescriptorError(f"Setting '{key}' must be a number, got '{value}'")


def get_int(section: Dict[str, Any], key: str, default: Optional[int] = None) -> int:
    value = section.get(key, default)
    if value is None:
        raise DescriptorError(f"Missing required setting '{key}'")
    try:
        return int(value)
    except (TypeError, ValueError):
        raise DescriptorError(f"Setting '{key}' must be an integer, got '{value}'")


def get_list(section: Dict[str, Any], key: str, default: Optional[Sequence[float]] = None) -> List[float]:
    value = section.get(key, default)
    if value is None:
        raise DescriptorError(f"Missing required setting '{key}'")
    if isinstance(value, (list, tuple)):
        return [float(v) for v in value]
    try:
        return [float(v) for v in str(value).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise DescriptorError(f"Setting '{key}' must be a comma-separated list of numbers, got '{value}'")


def get_bool(section: Dict[str, Any], key: str, default: bool = False) -> bool:
    value = section.get(key, default)
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise DescriptorError(f"Setting '{key}' must be a boolean, got '{value}'")


# ---------------------------------------------------------------------------
# Operator descriptors
# ---------------------------------------------------------------------------

def read_sampled_potential(path: str) -> Potential:
    """
    Two-column whitespace-separated (x, V) file, x ascending, '#' comments.

    Raises:
        DescriptorError: If the file cannot be read or the grid is invalid
    """
    try:
        frame = pd.read_csv(path, sep=r"\s+", header=None, comment="#", names=["x", "V"])
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DescriptorError(f"Could not read sampled potential {path}: {str(e)}")
    if frame.isna().any().any():
        raise DescriptorError(f"Sampled potential {path} must have exactly two numeric columns")
    try:
        return sampled(frame["x"].to_numpy(dtype=float), frame["V"].to_numpy(dtype=float))
    except ValueError as e:
        raise DescriptorError(f"Invalid sampled potential {path}: {str(e)}")


def build_potential(section: Dict[str, Any]) -> Potential:
    """
    Potential from an `operator` section.

    `kind` names a builtin (parameters as further keys) or `sampled` with a
    `file`; a `period` key wraps a non-periodic builtin periodically.
    """
    kind = str(section.get("kind", "zero")).strip().lower()
    if kind == "sampled":
        if "file" not in section:
            raise DescriptorError("Sampled potential needs operator.file")
        V = read_sampled_potential(str(section["file"]))
    elif kind in BUILTINS:
        factory = BUILTINS[kind]
        params = {}
        for name, parameter in inspect.signature(factory).parameters.items():
            if name in section:
                params[name] = get_float(section, name)
            elif parameter.default is inspect.Parameter.empty:
                raise DescriptorError(f"Potential '{kind}' needs operator.{name}")
        try:
            V = factory(**params)
        except ValueError as e:
            raise DescriptorError(f"Invalid parameters for '{kind}': {str(e)}")
    else:
        raise DescriptorError(f"Unknown potential kind '{kind}'. Builtins: {', '.join(sorted(BUILTINS))}, sampled")

    if "period" in section and not V.is_periodic:
        try:
            V = periodic(V, get_float(section, "period"))
        except ValueError as e:
            raise DescriptorError(str(e))
    return V


def build_jacobi(section: Dict[str, Any]) -> JacobiOperator:
    """JacobiOperator from an `operator` section with `type = jacobi`."""
    kind = str(section.get("kind", "constant")).strip().lower()
    try:
        if kind == "constant":
            return JacobiOperator.constant(get_float(section, "c", 0.0))
        if kind == "periodic":
            return JacobiOperator.periodic(get_list(section, "values"))
        if kind == "almost_mathieu":
            return JacobiOperator.almost_mathieu(
                get_float(section, "coupling"), get_int(section, "p"), get_int(section, "q"),
                get_float(section, "theta", 0.0),
            )
        if kind == "finite":
            return JacobiOperator.finite(
                get_list(section, "values"), get_int(section, "offset", 0),
                str(section.get("exterior", "zero")).strip().lower(),
            )
    except ValueError as e:
        if isinstance(e, DescriptorError):
            raise
        raise DescriptorError(f"Invalid Jacobi operator: {str(e)}")
    raise DescriptorError(f"Unknown Jacobi kind '{kind}'. Options: constant, periodic, almost_mathieu, finite")


def is_jacobi(config: Dict[str, Any]) -> bool:
    return str(get_section(config, "operator").get("type", "schrodinger")).strip().lower() == "jacobi"
