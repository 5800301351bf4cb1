"""Backend selection for the hot kernels.

Prefers the compiled extension; falls back to pure numpy. Set
SPEECHCONF_PURE_PYTHON=1 to force the fallback (used by the benchmark and
the backend parity test).
"""

from __future__ import annotations

import os

from speechconf import _kernels_py

if os.environ.get("SPEECHCONF_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from speechconf import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

ncc_matrix = _impl.ncc_matrix
spectral_gate_gains = _impl.spectral_gate_gains
