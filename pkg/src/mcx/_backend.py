"""Selects the eigensolver kernel: compiled Cython if importable, else pure Python."""

from . import _pyjacobi

try:
    from . import _jacobi as _compiled
except ImportError:  # extension not built
    _compiled = None

_KERNELS = {"python": _pyjacobi}
if _compiled is not None:
    _KERNELS["compiled"] = _compiled

_active = _compiled if _compiled is not None else _pyjacobi


def available():
    return sorted(_KERNELS)


def name():
    return "compiled" if _active is _compiled and _compiled is not None else "python"


def use(backend):
    """Switch kernels at runtime (benchmarks and parity tests)."""
    global _active
    if backend not in _KERNELS:
        raise ValueError(f"backend {backend!r} not available; have {available()}")
    _active = _KERNELS[backend]


def eigh(a):
    return _active.eigh(a)


def eigh_batch(a):
    return _active.eigh_batch(a)


def eigvalsh_batch(a):
    return _active.eigvalsh_batch(a)
