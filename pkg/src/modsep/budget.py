"""Global enumeration/search budget, capped by the MODSEP_BUDGET env var."""

from __future__ import annotations

import os


def cap(default: int) -> int:
    """The given default, lowered to MODSEP_BUDGET when that is set."""
    raw = os.environ.get("MODSEP_BUDGET")
    if not raw:
        return default
    try:
        return min(default, int(raw))
    except ValueError:
        return default
