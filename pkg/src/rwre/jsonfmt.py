"""JSON emission with a fixed numeric format.

The stdlib encoder writes floats with repr's shortest round-trip form, which
is version-dependent in spirit; recorded runs want one canonical spelling.
Every float is emitted with 17 significant digits ('.17g'), which is lossless
for IEEE doubles, so parse -> reserialize is the identity on our outputs.

Non-finite floats are refused here; callers encode "not applicable" as null
and an infinite kappa as the string "inf" before serializing.
"""

from __future__ import annotations

import math


def fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError("non-finite float has no JSON spelling here: %r" % x)
    return format(x, ".17g")


def dumps(obj) -> str:
    """Serialize dict/list/str/int/float/bool/None with '.17g' floats."""
    parts: list[str] = []
    _emit(obj, parts)
    return "".join(parts)


def _emit(obj, parts: list[str]) -> None:
    if obj is None:
        parts.append("null")
    elif obj is True:
        parts.append("true")
    elif obj is False:
        parts.append("false")
    elif isinstance(obj, str):
        parts.append(_escape(obj))
    elif isinstance(obj, int):
        parts.append(str(obj))
    elif isinstance(obj, float):
        parts.append(fmt_float(obj))
    elif isinstance(obj, dict):
        parts.append("{")
        first = True
        for k, v in obj.items():
            if not isinstance(k, str):
                raise TypeError("JSON object keys must be str, got %r" % (k,))
            if not first:
                parts.append(",")
            first = False
            parts.append(_escape(k))
            parts.append(":")
            _emit(v, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, v in enumerate(obj):
            if i:
                parts.append(",")
            _emit(v, parts)
        parts.append("]")
    else:
        # numpy scalars and similar: fall back on their Python counterpart
        if hasattr(obj, "item"):
            _emit(obj.item(), parts)
        else:
            raise TypeError("cannot serialize %r" % (obj,))


_ESCAPES = {
    '"': '\\"', "\\": "\\\\", "\n": "\\n", "\r": "\\r", "\t": "\\t",
    "\b": "\\b", "\f": "\\f",
}


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch in _ESCAPES:
            out.append(_ESCAPES[ch])
        elif ord(ch) < 0x20:
            out.append("\\u%04x" % ord(ch))
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)
