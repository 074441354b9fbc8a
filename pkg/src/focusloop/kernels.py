"""Kernel backend selection.

The compiled extension (``focusloop._kernels``) is preferred when it built;
otherwise the pure-numpy fallback is used. ``FOCUSLOOP_PURE=1`` forces the
fallback, which the benchmark uses to compare both backends. Within one
process the selected backend is fixed, keeping replay bit-exact.
"""

from __future__ import annotations

import os

from . import _pykernels

_impl = None
if not os.environ.get("FOCUSLOOP_PURE"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = None
if _impl is None:
    _impl = _pykernels

BACKEND: str = _impl.BACKEND
fir_filter = _impl.fir_filter
welch_bin_powers = _impl.welch_bin_powers
mlp_forward = _impl.mlp_forward


def available_backends():
    """(name, module) pairs for every importable backend, compiled first."""
    out = []
    try:
        from . import _kernels

        out.append((_kernels.BACKEND, _kernels))
    except ImportError:
        pass
    out.append((_pykernels.BACKEND, _pykernels))
    return out


def use_backend(name: str) -> None:
    """Rebind the active kernels; exists for the benchmark's A/B pass.

    Callers resolve through module attributes (kernels.fir_filter), so the
    switch takes effect everywhere immediately.
    """
    global BACKEND, fir_filter, welch_bin_powers, mlp_forward, _impl
    for bname, mod in available_backends():
        if bname == name:
            _impl = mod
            BACKEND = mod.BACKEND
            fir_filter = mod.fir_filter
            welch_bin_powers = mod.welch_bin_powers
            mlp_forward = mod.mlp_forward
            return
    raise ValueError(f"kernel backend {name!r} is not available")
