# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pixel kernels: labeling and boundary tracing hot loops.

Contracts mirror kernels._pure exactly; that module is the ground truth
the backend-equivalence tests compare against.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

# Moore neighborhood, clockwise: E, SE, S, SW, W, NW, N, NE
cdef int[8] DR = [0, 1, 1, 1, 0, -1, -1, -1]
cdef int[8] DC = [1, 1, 0, -1, -1, -1, 0, 1]


def label_components(mask):
    """8-connectivity labeling; labels 1..K in row-major first-encounter order."""
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] labels = labels_arr
    queue_arr = np.empty(h * w, dtype=np.int64)
    cdef cnp.int64_t[::1] queue = queue_arr
    cdef Py_ssize_t head, tail, r0, c0, r, c, rr, cc
    cdef int k, count = 0
    for r0 in range(h):
        for c0 in range(w):
            if m[r0, c0] == 0 or labels[r0, c0] != 0:
                continue
            count += 1
            labels[r0, c0] = count
            queue[0] = r0 * w + c0
            head = 0
            tail = 1
            while head < tail:
                r = queue[head] // w
                c = queue[head] % w
                head += 1
                for k in range(8):
                    rr = r + DR[k]
                    cc = c + DC[k]
                    if 0 <= rr < h and 0 <= cc < w:
                        if m[rr, cc] != 0 and labels[rr, cc] == 0:
                            labels[rr, cc] = count
                            queue[tail] = rr * w + cc
                            tail += 1
    return labels_arr, count


def component_stats(labels, int count):
    """Per-label area, centroid row/col, inclusive bounding box."""
    cdef cnp.int32_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    areas_arr = np.zeros(count, dtype=np.int64)
    sum_r_arr = np.zeros(count, dtype=np.float64)
    sum_c_arr = np.zeros(count, dtype=np.float64)
    bbox_arr = np.empty((count, 4), dtype=np.int32)
    cdef cnp.int64_t[::1] areas = areas_arr
    cdef cnp.float64_t[::1] sum_r = sum_r_arr
    cdef cnp.float64_t[::1] sum_c = sum_c_arr
    cdef cnp.int32_t[:, ::1] bbox = bbox_arr
    cdef Py_ssize_t r, c, i
    cdef int k
    for i in range(count):
        bbox[i, 0] = <cnp.int32_t> h
        bbox[i, 1] = <cnp.int32_t> w
        bbox[i, 2] = -1
        bbox[i, 3] = -1
    for r in range(h):
        for c in range(w):
            k = lab[r, c]
            if k == 0:
                continue
            i = k - 1
            areas[i] += 1
            sum_r[i] += r
            sum_c[i] += c
            if r < bbox[i, 0]:
                bbox[i, 0] = <cnp.int32_t> r
            if c < bbox[i, 1]:
                bbox[i, 1] = <cnp.int32_t> c
            if r > bbox[i, 2]:
                bbox[i, 2] = <cnp.int32_t> r
            if c > bbox[i, 3]:
                bbox[i, 3] = <cnp.int32_t> c
    with np.errstate(invalid="ignore"):
        centroid_r = sum_r_arr / areas_arr
        centroid_c = sum_c_arr / areas_arr
    return areas_arr, centroid_r, centroid_c, bbox_arr


def trace_contour(labels, int label, int start_r, int start_c):
    """Moore boundary trace, clockwise; unique border pixels in visit order."""
    cdef cnp.int32_t[:, ::1] lab = np.ascontiguousarray(labels, dtype=np.int32)
    cdef Py_ssize_t h = lab.shape[0], w = lab.shape[1]
    seen_arr = np.zeros((h, w), dtype=np.uint8)  # bit per entry direction
    first_arr = np.zeros((h, w), dtype=np.uint8)
    cdef cnp.uint8_t[:, ::1] seen = seen_arr
    cdef cnp.uint8_t[:, ::1] first = first_arr
    path_r = [start_r]
    path_c = [start_c]
    cdef int r = start_r, c = start_c, entry = 0
    cdef int d, i, probe, found, rr, cc
    seen[r, c] = 1  # entry direction 0 (E): the row-major scan convention
    first[r, c] = 1
    while True:
        probe = (entry + 5) % 8
        found = -1
        for i in range(8):
            d = (probe + i) % 8
            rr = r + DR[d]
            cc = c + DC[d]
            if 0 <= rr < h and 0 <= cc < w and lab[rr, cc] == label:
                found = d
                break
        if found < 0:
            break
        r = r + DR[found]
        c = c + DC[found]
        entry = found
        if seen[r, c] & (1 << entry):
            break
        seen[r, c] |= (1 << entry)
        if not first[r, c]:
            first[r, c] = 1
            path_r.append(r)
            path_c.append(c)
    out = np.empty((len(path_r), 2), dtype=np.int32)
    out[:, 0] = path_r
    out[:, 1] = path_c
    return out
