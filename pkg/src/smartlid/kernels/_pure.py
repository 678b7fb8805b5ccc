"""Pure-Python pixel kernels: the fallback when the compiled core is absent.

Same contracts as kernels._native; see kernels/__init__.py for selection.
"""

from collections import deque

import numpy as np

# Moore neighborhood in clockwise order (image coords, row grows downward):
# E, SE, S, SW, W, NW, N, NE
_DIRS = ((0, 1), (1, 1), (1, 0), (1, -1), (0, -1), (-1, -1), (-1, 0), (-1, 1))


def label_components(mask: np.ndarray) -> tuple[np.ndarray, int]:
    """8-connectivity labeling; labels 1..K in row-major first-encounter order."""
    mask = np.asarray(mask)
    h, w = mask.shape
    labels = np.zeros((h, w), dtype=np.int32)
    count = 0
    for r0 in range(h):
        for c0 in range(w):
            if not mask[r0, c0] or labels[r0, c0]:
                continue
            count += 1
            labels[r0, c0] = count
            queue = deque([(r0, c0)])
            while queue:
                r, c = queue.popleft()
                for dr, dc in _DIRS:
                    rr, cc = r + dr, c + dc
                    if (
                        0 <= rr < h
                        and 0 <= cc < w
                        and mask[rr, cc]
                        and not labels[rr, cc]
                    ):
                        labels[rr, cc] = count
                        queue.append((rr, cc))
    return labels, count


def component_stats(
    labels: np.ndarray, count: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-label area, centroid row/col (pixel-coordinate mean), bounding box.

    bbox rows are (row_min, col_min, row_max, col_max), inclusive.
    """
    labels = np.asarray(labels)
    flat = labels.ravel()
    areas = np.bincount(flat, minlength=count + 1)[1:].astype(np.int64)
    rows, cols = np.indices(labels.shape)
    sum_r = np.bincount(flat, weights=rows.ravel(), minlength=count + 1)[1:]
    sum_c = np.bincount(flat, weights=cols.ravel(), minlength=count + 1)[1:]
    with np.errstate(invalid="ignore"):
        centroid_r = sum_r / areas
        centroid_c = sum_c / areas
    bbox = np.zeros((count, 4), dtype=np.int32)
    for k in range(1, count + 1):
        rr, cc = np.nonzero(labels == k)
        bbox[k - 1] = (rr.min(), cc.min(), rr.max(), cc.max())
    return areas, centroid_r, centroid_c, bbox


def trace_contour(
    labels: np.ndarray, label: int, start_r: int, start_c: int
) -> np.ndarray:
    """Moore boundary trace of one component, clockwise from its
    topmost-leftmost pixel; returns unique border pixels in visit order.

    Terminates when the tracer state (pixel, entry direction) repeats.
    """
    labels = np.asarray(labels)
    h, w = labels.shape

    def fg(r, c):
        return 0 <= r < h and 0 <= c < w and labels[r, c] == label

    path = [(start_r, start_c)]
    seen_states = {(start_r, start_c, 0)}  # scan enters the start heading E
    r, c, entry = start_r, start_c, 0
    while True:
        # probe clockwise starting just past the backtrack neighbor
        probe = (entry + 5) % 8
        nxt = None
        for i in range(8):
            d = (probe + i) % 8
            rr, cc = r + _DIRS[d][0], c + _DIRS[d][1]
            if fg(rr, cc):
                nxt = (rr, cc, d)
                break
        if nxt is None:
            break  # isolated pixel
        r, c, entry = nxt
        if (r, c, entry) in seen_states:
            break
        seen_states.add((r, c, entry))
        path.append((r, c))
    unique = list(dict.fromkeys(path))
    return np.array(unique, dtype=np.int32).reshape(-1, 2)
