# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels; same API as ``_pykernels``."""

import numpy as np
cimport numpy as cnp

cnp.import_array()

cdef extern from *:
    """
    typedef __int128 toolloc_i128;
    """
    ctypedef long long i128 "toolloc_i128"


def otsu_scan(values, double lo, double hi, int bins):
    cdef double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef double width = (hi - lo) / bins
    cdef double[::1] edges = np.empty(bins + 1, dtype=np.float64)
    cdef long long[::1] counts = np.zeros(bins, dtype=np.int64)
    cdef Py_ssize_t i, n = v.shape[0]
    cdef int j, k
    cdef double x
    for j in range(bins + 1):
        edges[j] = lo + j * width
    for i in range(n):
        x = v[i]
        if width > 0:
            j = <int>((x - lo) / width)
        else:
            j = 0
        if j < 0:
            j = 0
        if j > bins - 1:
            j = bins - 1
        # exact placement: bin = number of interior edges strictly below x
        while j > 0 and not (edges[j] < x):
            j -= 1
        while j < bins - 1 and edges[j + 1] < x:
            j += 1
        counts[j] += 1

    cdef long long total_n = 0, total_s = 0, n0 = 0, s0 = 0, n1, d
    for j in range(bins):
        total_n += counts[j]
        total_s += j * counts[j]
    cdef i128 num, den, best_num = 0, best_den = 1
    cdef int best_k = -1
    for k in range(bins):
        n0 += counts[k]
        s0 += k * counts[k]
        n1 = total_n - n0
        if n0 == 0 or n1 == 0:
            continue
        d = s0 * total_n - total_s * n0
        num = <i128>d * <i128>d
        den = <i128>n0 * <i128>n1
        # cross products stay below 2**127 for inputs up to ~1e8 values x 1e4 bins
        if num * best_den > best_num * den:
            best_k = k
            best_num = num
            best_den = den
    return best_k


cdef inline int _find(int[::1] parent, int a) noexcept nogil:
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


cdef inline void _union(int[::1] parent, int a, int b) noexcept nogil:
    a = _find(parent, a)
    b = _find(parent, b)
    if a < b:
        parent[b] = a
    elif b < a:
        parent[a] = b


def label_components(mask, int connectivity):
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = m.shape[0], w = m.shape[1]
    labels_arr = np.zeros((h, w), dtype=np.int32)
    cdef int[:, ::1] lab = labels_arr
    cdef int[::1] parent = np.zeros(h * w + 1, dtype=np.int32)
    cdef int[::1] final = np.zeros(h * w + 1, dtype=np.int32)
    cdef Py_ssize_t r, c
    cdef int nxt = 0, cur, nb, n = 0
    cdef bint diag = connectivity == 8
    with nogil:
        for r in range(h):
            for c in range(w):
                if not m[r, c]:
                    continue
                cur = 0
                # already-visited neighbours: W, N, and NW/NE for 8-connectivity
                if c > 0 and m[r, c - 1]:
                    cur = lab[r, c - 1]
                if r > 0:
                    if m[r - 1, c]:
                        nb = lab[r - 1, c]
                        if cur == 0:
                            cur = nb
                        else:
                            _union(parent, cur, nb)
                    if diag and c > 0 and m[r - 1, c - 1]:
                        nb = lab[r - 1, c - 1]
                        if cur == 0:
                            cur = nb
                        else:
                            _union(parent, cur, nb)
                    if diag and c + 1 < w and m[r - 1, c + 1]:
                        nb = lab[r - 1, c + 1]
                        if cur == 0:
                            cur = nb
                        else:
                            _union(parent, cur, nb)
                if cur == 0:
                    nxt += 1
                    parent[nxt] = nxt
                    cur = nxt
                lab[r, c] = cur
        # roots are the smallest provisional label, so raster order of first pixel is kept
        for r in range(h):
            for c in range(w):
                if lab[r, c]:
                    cur = _find(parent, lab[r, c])
                    if final[cur] == 0:
                        n += 1
                        final[cur] = n
                    lab[r, c] = final[cur]
    return labels_arr, n


def greedy_match(pred_boxes, pred_frames, gt_boxes, gt_frames, double iou_thr):
    cdef double[:, ::1] pb = np.ascontiguousarray(np.asarray(pred_boxes, dtype=np.float64).reshape(-1, 4))
    cdef long long[::1] pf = np.ascontiguousarray(pred_frames, dtype=np.int64)
    gt_frames_arr = np.asarray(gt_frames, dtype=np.int64)
    order_arr = np.argsort(gt_frames_arr, kind="stable").astype(np.int64)
    cdef long long[::1] order = order_arr
    cdef long long[::1] sorted_frames = np.ascontiguousarray(gt_frames_arr[order_arr])
    cdef double[:, ::1] gb = np.ascontiguousarray(np.asarray(gt_boxes, dtype=np.float64).reshape(-1, 4))
    cdef Py_ssize_t n = pb.shape[0], m = gb.shape[0]
    out_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef cnp.uint8_t[::1] used = np.zeros(m, dtype=np.uint8)
    cdef Py_ssize_t i, lo, hi, mid, t
    cdef long long f, j, best_j
    cdef double best_iou, v, iw, ih, inter, parea
    with nogil:
        for i in range(n):
            f = pf[i]
            lo = 0
            hi = m
            while lo < hi:
                mid = (lo + hi) // 2
                if sorted_frames[mid] < f:
                    lo = mid + 1
                else:
                    hi = mid
            best_j = -1
            best_iou = -1.0
            parea = (pb[i, 2] - pb[i, 0]) * (pb[i, 3] - pb[i, 1])
            t = lo
            while t < m and sorted_frames[t] == f:
                j = order[t]
                t += 1
                if used[j]:
                    continue
                iw = min(pb[i, 2], gb[j, 2]) - max(pb[i, 0], gb[j, 0])
                ih = min(pb[i, 3], gb[j, 3]) - max(pb[i, 1], gb[j, 1])
                if iw <= 0 or ih <= 0:
                    v = 0.0
                else:
                    inter = iw * ih
                    v = inter / (parea + (gb[j, 2] - gb[j, 0]) * (gb[j, 3] - gb[j, 1]) - inter)
                if v > best_iou:
                    best_j = j
                    best_iou = v
            if best_j >= 0 and best_iou >= iou_thr:
                used[best_j] = 1
                out[i] = best_j
    return out_arr
