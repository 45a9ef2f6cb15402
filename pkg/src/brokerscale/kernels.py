"""Backend selection for the hot kernels.

The compiled module is used when it imports; otherwise the pure-Python
reference in :mod:`brokerscale._pykernels` is used. :func:`use_backend`
switches explicitly (tests and benchmarks compare both).
"""
from __future__ import annotations

from types import ModuleType

from brokerscale import _pykernels

try:
    from brokerscale import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType | None] = {"cython": _ckernels, "python": _pykernels}
_active: ModuleType = _ckernels if _ckernels is not None else _pykernels


def available() -> list[str]:
    return [name for name, mod in _BACKENDS.items() if mod is not None]


def backend() -> str:
    return "cython" if _active is _ckernels and _ckernels is not None else "python"


def get(name: str | None = None) -> ModuleType:
    """Return the kernel module ``name``, or the active one."""
    if name is None:
        return _active
    mod = _BACKENDS.get(name)
    if mod is None:
        raise ValueError(f"kernel backend {name!r} is not available")
    return mod


def use_backend(name: str) -> None:
    global _active
    _active = get(name)
