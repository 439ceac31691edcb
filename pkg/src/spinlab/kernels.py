"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the
pure-numpy ``_fallback``. Set ``SPINLAB_BACKEND=python`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("SPINLAB_BACKEND", "").lower() != "python":
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback

energies = _impl.energies
run_chains = _impl.run_chains
cs_functional = _impl.cs_functional


def get(name: str):
    """Return a kernel module by name ("compiled" or "python")."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(name)
