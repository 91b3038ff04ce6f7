"""Hot kernels behind a backend switch.

The compiled extension is used when it imports; ``SCHEDLAB_PURE=1`` forces
the pure-Python twin.
"""
import os

from . import _pure

if os.environ.get("SCHEDLAB_PURE"):
    _impl = _pure
else:
    try:
        from . import _fast as _impl
    except ImportError:
        _impl = _pure

BACKEND = "pure" if _impl is _pure else "compiled"

lex_violation = _impl.lex_violation
nest_terms = _impl.nest_terms
