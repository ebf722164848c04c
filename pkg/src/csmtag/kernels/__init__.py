"""Kernel backend selection.

The compiled extension is preferred when built; the numpy fallback is a
drop-in twin.  ``CSM_BACKEND`` forces the choice: ``c``, ``python``, or
``auto`` (default).
"""

import os

_choice = os.environ.get("CSM_BACKEND", "auto").lower()
if _choice not in ("auto", "c", "python"):
    raise ImportError(f"CSM_BACKEND must be auto, c, or python; got {_choice!r}")


def _load(name):
    if name == "python":
        from . import lstm_py
        return lstm_py
    from . import _lstm
    return _lstm


if _choice == "python":
    _impl = _load("python")
    active_backend = "python"
elif _choice == "c":
    _impl = _load("c")  # raises if the extension was not built
    active_backend = "c"
else:
    try:
        _impl = _load("c")
        active_backend = "c"
    except ImportError:
        _impl = _load("python")
        active_backend = "python"

lstm_seq_forward = _impl.lstm_seq_forward
lstm_seq_backward = _impl.lstm_seq_backward


def available_backends():
    out = ["python"]
    try:
        _load("c")
        out.insert(0, "c")
    except ImportError:
        pass
    return out


def get_backend(name):
    """Kernel module for an explicit backend name (used by the benchmark)."""
    if name not in ("c", "python"):
        raise ValueError(f"unknown backend {name!r}")
    return _load(name)
