"""Kernel backend selection.

The compiled extension ``_core`` is used when importable; otherwise (or
when the environment variable HCOCYCLE_PURE is set to a non-empty value
other than "0") the numpy / Python fallback ``_pycore`` is used.
"""

import os

_force_pure = os.environ.get("HCOCYCLE_PURE", "") not in ("", "0")

if _force_pure:
    from . import _pycore as _impl
else:
    try:
        from . import _core as _impl
    except ImportError:  # extension not built
        from . import _pycore as _impl

BACKEND = _impl.BACKEND
MAX_MOD = _impl.MAX_MOD
matching_rank = _impl.matching_rank
mulmod = _impl.mulmod
contraction_counts = _impl.contraction_counts
symbolic_accumulate = _impl.symbolic_accumulate
chord_gram_rows = _impl.chord_gram_rows
reduce_rows_mod = _impl.reduce_rows_mod
rref_mod = _impl.rref_mod
matmul_mod = _impl.matmul_mod
sparse_combine_mod = _impl.sparse_combine_mod
EchelonMod = _impl.EchelonMod
as_mod = _impl.as_mod


def load(name: str):
    """Return the kernel module by name ("compiled" or "python")."""
    if name == "python":
        from . import _pycore
        return _pycore
    if name == "compiled":
        from . import _core
        return _core
    raise ValueError(f"unknown backend {name!r}")
