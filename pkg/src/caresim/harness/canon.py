"""Canonical serialization: one stable byte encoding per value.

Wire messages, trace frames, and reports all use this encoding so that
byte equality is meaningful:

    - JSON, UTF-8, no whitespace (separators "," and ":")
    - object keys sorted
    - floats via Python repr (shortest round-trip decimal); integers bare
    - no NaN/Infinity (rejected)

A float and an integer of equal value serialize differently (1.0 vs 1);
producers must keep field types stable.
"""

from __future__ import annotations

import json
import math


def _reject_nonfinite(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ValueError("non-finite float in canonical payload")
    if isinstance(obj, dict):
        for v in obj.values():
            _reject_nonfinite(v)
    elif isinstance(obj, (list, tuple)):
        for v in obj:
            _reject_nonfinite(v)


def canon_dumps(obj) -> str:
    _reject_nonfinite(obj)
    return json.dumps(obj, sort_keys=True, separators=(",", ":"),
                      ensure_ascii=True, allow_nan=False)


def canon_line(obj) -> bytes:
    return canon_dumps(obj).encode("ascii") + b"\n"


def canon_loads(line: str | bytes):
    return json.loads(line)
