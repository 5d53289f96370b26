"""Pull a JSON object out of free-form model output.

The repair grammar is deliberately small and fixed:

1. fence strip: if a fenced code block holds a ``{``, only its body is used;
2. brace-balance scan: candidate objects are the balanced ``{...}`` spans,
   found with a string-aware scanner, tried left to right;
3. trailing-comma removal: ``,`` directly before ``}`` or ``]`` (outside
   strings) is dropped.

Anything still invalid after that raises :class:`ProtocolError`.
"""

from __future__ import annotations

import json
import re
from typing import Any, Iterator

from .errors import ProtocolError

__all__ = ["extract_json_object", "strip_fences", "balanced_objects", "remove_trailing_commas"]

_FENCE_RE = re.compile(r"```[A-Za-z0-9_-]*[ \t]*\n?(.*?)```", re.DOTALL)


def strip_fences(text: str) -> str:
    for m in _FENCE_RE.finditer(text):
        if "{" in m.group(1):
            return m.group(1)
    return text


def balanced_objects(text: str) -> Iterator[str]:
    """Yield each top-level balanced ``{...}`` span, left to right."""
    start = text.find("{")
    while start != -1:
        depth = 0
        in_str = False
        escaped = False
        end = -1
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escaped:
                    escaped = False
                elif ch == "\\":
                    escaped = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    end = i
                    break
        if end == -1:
            return
        yield text[start: end + 1]
        start = text.find("{", end + 1)


def remove_trailing_commas(text: str) -> str:
    out: list[str] = []
    in_str = False
    escaped = False
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if in_str:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_str = False
        elif ch == '"':
            in_str = True
            out.append(ch)
        elif ch == ",":
            j = i + 1
            while j < n and text[j] in " \t\r\n":
                j += 1
            if j < n and text[j] in "}]":
                i += 1
                continue
            out.append(ch)
        else:
            out.append(ch)
        i += 1
    return "".join(out)


def extract_json_object(text: str) -> dict[str, Any]:
    if not isinstance(text, str):
        raise ProtocolError("model output is not text", raw=repr(text))
    body = strip_fences(text)
    last_error = "no balanced JSON object found"
    for candidate in balanced_objects(body):
        try:
            value = json.loads(remove_trailing_commas(candidate))
        except json.JSONDecodeError as exc:
            last_error = f"invalid JSON after repair: {exc.msg} at pos {exc.pos}"
            continue
        if isinstance(value, dict):
            return value
    raise ProtocolError(last_error, raw=text)
