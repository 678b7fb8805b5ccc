"""Pixel-kernel backend selection.

The compiled extension (_native, Cython) is used when it imported cleanly;
otherwise the pure-Python twin (_pure) takes over. Both expose the same
three functions with identical semantics:

    label_components(mask)            -> (labels int32, count)
    component_stats(labels, count)    -> (areas, centroid_r, centroid_c, bbox)
    trace_contour(labels, k, r0, c0)  -> (n, 2) int32 border pixels

Set SMARTLID_KERNELS=pure to force the fallback (used by the benchmark).
"""

import os

from . import _pure

if os.environ.get("SMARTLID_KERNELS", "").lower() == "pure":
    _impl = _pure
    backend_name = "pure"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]

        backend_name = "native"
    except ImportError:
        _impl = _pure
        backend_name = "pure"

label_components = _impl.label_components
component_stats = _impl.component_stats
trace_contour = _impl.trace_contour
