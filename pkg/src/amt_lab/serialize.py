"""Fixed-precision text serialization shared by every exported artifact."""
from __future__ import annotations

import json
import math
from typing import Any

SIG_DIGITS = 9


def fmt(x: float) -> str:
    """Nine significant digits; negative zero prints as 0."""
    return format(float(x) + 0.0, f".{SIG_DIGITS}g")


def rounded(obj: Any) -> Any:
    """Round every float of a JSON-like structure to nine significant digits.

    Non-finite floats become None so the output stays strict JSON.
    """
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return obj
    if isinstance(obj, float):
        return float(fmt(obj)) if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if hasattr(obj, "item"):  # numpy scalar
        return rounded(obj.item())
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj: Any) -> str:
    return json.dumps(rounded(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"
