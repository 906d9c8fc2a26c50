"""Backend selection for the trace replay kernel.

The compiled extension is used when importable; set ``LATENTREC_PURE=1`` to
force the numpy implementation.
"""
from __future__ import annotations

import os

from . import _audit_py

try:
    if os.environ.get("LATENTREC_PURE") == "1":
        raise ImportError("pure backend requested")
    from . import _audit_ext as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"

replay_python = _audit_py.replay
replay_compiled = _compiled.replay if _compiled is not None else None
replay = replay_compiled if replay_compiled is not None else replay_python
