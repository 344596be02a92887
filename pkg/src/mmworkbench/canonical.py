"""Canonical JSON form and content digests.

The whole project persists as one UTF-8 JSON document: keys sorted, no
insignificant whitespace, NaN/Inf forbidden. Two equal projects must always
produce byte-identical streams, so everything that ends up in a file or an
HTTP body goes through these helpers.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True,
                      separators=(",", ":"), allow_nan=False)


def canonical_bytes(obj: Any) -> bytes:
    return canonical_dumps(obj).encode("utf-8")


def canonical_loads(data: bytes | str) -> Any:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    return json.loads(data)


def content_hash(obj: Any) -> str:
    """Stable digest of a JSON-serializable value (64 hex chars)."""
    return hashlib.sha256(canonical_bytes(obj)).hexdigest()


def digest_bytes(data: bytes, length: int = 12) -> str:
    return hashlib.sha256(data).hexdigest()[:length]


def element_id(owner: str, chart_kind: str, mark_key: str) -> str:
    """Stable id for one chart mark; survives re-execution of identical inputs."""
    seed = f"{owner}|{chart_kind}|{mark_key}".encode("utf-8")
    return "e" + hashlib.sha256(seed).hexdigest()[:16]
