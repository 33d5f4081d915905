"""Backend selection for the power-flow kernels.

The compiled extension is used when it was built; otherwise the numpy
fallback is loaded. Setting ``RL2ADN_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _pf_kernels_py


def load_backend(name: str) -> ModuleType:
    if name == "python":
        return _pf_kernels_py
    if name == "compiled":
        from . import _pf_kernels  # type: ignore[attr-defined]

        return _pf_kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends() -> list[str]:
    names = ["python"]
    try:
        load_backend("compiled")
    except ImportError:
        pass
    else:
        names.insert(0, "compiled")
    return names


if os.environ.get("RL2ADN_PURE_PYTHON", "") not in ("", "0"):
    backend = _pf_kernels_py
    BACKEND_NAME = "python"
else:
    try:
        backend = load_backend("compiled")
        BACKEND_NAME = "compiled"
    except ImportError:
        backend = _pf_kernels_py
        BACKEND_NAME = "python"

injections = backend.injections
newton_system = backend.newton_system
