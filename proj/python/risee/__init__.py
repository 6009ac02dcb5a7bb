"""Energy-efficiency optimization for multi-RIS MISO downlinks.

The heavy lifting lives in the compiled extension `_risee`; this package
re-exports its surface. When running against a build tree (rather than an
installed wheel) put the directory containing `_risee*.so` on PYTHONPATH.
"""

try:
    from ._risee import *  # noqa: F401,F403  (installed layout: risee/_risee.so)
    from ._risee import __version__  # noqa: F401
except ImportError:  # build-tree layout: _risee.so next to PYTHONPATH
    from _risee import *  # noqa: F401,F403
    from _risee import __version__  # noqa: F401
