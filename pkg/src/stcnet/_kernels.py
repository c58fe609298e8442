"""Compiled gather/scatter kernels behind conv2d.

Columns are laid out transposed, [Cin*k*k, B*Ho*Wo], so the innermost
copy runs along contiguous output rows. Zero padding is implicit: reads
outside the input give 0 and writes outside it are dropped.
"""

import numpy as np
from numba import njit


@njit(cache=True)
def im2col(x, k, stride, pad, ho, wo):
    b_, c_, h_, w_ = x.shape
    out = np.zeros((c_ * k * k, b_, ho, wo), x.dtype)
    for c in range(c_):
        for i in range(k):
            for j in range(k):
                row = (c * k + i) * k + j
                for b in range(b_):
                    for y in range(ho):
                        yi = y * stride + i - pad
                        if yi < 0 or yi >= h_:
                            continue
                        for xx in range(wo):
                            xj = xx * stride + j - pad
                            if 0 <= xj < w_:
                                out[row, b, y, xx] = x[b, c, yi, xj]
    return out.reshape(c_ * k * k, b_ * ho * wo)


@njit(cache=True)
def col2im(cols, b_, c_, h_, w_, k, stride, pad, ho, wo):
    g = cols.reshape(c_ * k * k, b_, ho, wo)
    gx = np.zeros((b_, c_, h_, w_), cols.dtype)
    for c in range(c_):
        for i in range(k):
            for j in range(k):
                row = (c * k + i) * k + j
                for b in range(b_):
                    for y in range(ho):
                        yi = y * stride + i - pad
                        if yi < 0 or yi >= h_:
                            continue
                        for xx in range(wo):
                            xj = xx * stride + j - pad
                            if 0 <= xj < w_:
                                gx[b, c, yi, xj] += g[row, b, y, xx]
    return gx
