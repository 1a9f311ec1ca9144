"""Utility functions and classes for popmatch"""

import json
from typing import Any

from pydantic import BaseModel


class CanonicalEncoder(json.JSONEncoder):
    """JSON encoder that handles sets and pydantic models"""

    def default(self, obj):
        if isinstance(obj, (set, frozenset)):
            return sorted(obj)
        if isinstance(obj, BaseModel):
            return obj.model_dump(mode="json")
        return super().default(obj)


def canonical_json(data: Any) -> str:
    """Sorted keys, two-space indent, trailing newline; arrays keep their order"""
    return json.dumps(data, cls=CanonicalEncoder, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def plural(count: int, noun: str) -> str:
    return f"{count} {noun}" if count == 1 else f"{count} {noun}s"
