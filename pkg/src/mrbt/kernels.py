"""Hot kernels, compiled when the extension is built, numpy fallback otherwise.

Set ``MRBT_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MRBT_PURE_PYTHON"):
    from ._kernels_py import backward_dist, masked_greedy, masked_max, template_tick

    BACKEND = "python"
else:
    try:
        from ._kernels import backward_dist, masked_greedy, masked_max, template_tick

        BACKEND = "cython"
    except ImportError:
        from ._kernels_py import backward_dist, masked_greedy, masked_max, template_tick

        BACKEND = "python"

__all__ = ["BACKEND", "backward_dist", "masked_greedy", "masked_max", "template_tick"]
