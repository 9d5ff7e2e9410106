import json
import math
from typing import Any

import numpy as np

# Floats are rounded to this many significant digits before hashing so that
# the last-ulp noise of BLAS reductions does not change a report hash.
HASH_DIGITS = 12


def to_builtin(data: Any) -> Any:
    """
    Recursively convert numpy scalars/arrays and complex numbers into JSON-safe
    builtins. Complex values become ``[re, im]`` pairs; non-finite floats become
    their string names.
    """
    if isinstance(data, dict):
        return {str(k): to_builtin(v) for k, v in sorted(data.items(), key=lambda kv: str(kv[0]))}
    if isinstance(data, (list, tuple)):
        return [to_builtin(x) for x in data]
    if isinstance(data, np.ndarray):
        return [to_builtin(x) for x in data.tolist()]
    if isinstance(data, (complex, np.complexfloating)):
        return [to_builtin(float(data.real)), to_builtin(float(data.imag))]
    if isinstance(data, np.integer):
        return int(data)
    if isinstance(data, (float, np.floating)):
        value = float(data)
        if not math.isfinite(value):
            return str(value)
        return value
    if isinstance(data, np.bool_):
        return bool(data)
    return data


def round_floats(data: Any, digits: int = HASH_DIGITS) -> Any:
    if isinstance(data, dict):
        return {k: round_floats(v, digits) for k, v in data.items()}
    if isinstance(data, list):
        return [round_floats(x, digits) for x in data]
    if isinstance(data, float) and data != 0.0:
        return float(f"{data:.{digits}g}")
    return data


def canonicalize_json(data: Any) -> str:
    """
    Returns a canonical JSON string for hashing.
    Keys sorted, numpy types converted, floats rounded, no whitespace.
    List order is preserved: parameter lists are ordered data here.
    """
    return json.dumps(round_floats(to_builtin(data)), sort_keys=True, separators=(',', ':'))
