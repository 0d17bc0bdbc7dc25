"""Python face of the dual-metric bias harness: scoring and metric primitives."""

try:
    from ._dmba import *  # noqa: F401,F403
    from ._dmba import __doc__ as _core_doc  # noqa: F401
except ImportError:
    # In-tree builds put the extension next to this package instead of inside it.
    from _dmba import *  # noqa: F401,F403
