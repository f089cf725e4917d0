"""Pure-numpy fallback for the compiled accumulation kernel.

Computes the same per-pixel accumulators (count, polarity sum, sum and
squared sum of inter-event intervals) by grouping events on pixel index.
"""

import numpy as np


def accumulate(t, x, y, p, width, height):
    npix = width * height
    pix = y.astype(np.int64) * width + x.astype(np.int64)

    count = np.bincount(pix, minlength=npix)
    pol = np.bincount(pix, weights=p.astype(np.float64), minlength=npix)
    pol = np.rint(pol).astype(np.int64)

    dt_sum = np.zeros(npix, np.float64)
    dt_sq = np.zeros(npix, np.float64)
    if len(t) > 1:
        # stable sort on pixel keeps per-pixel time order
        order = np.argsort(pix, kind="stable")
        sp = pix[order]
        st = t[order]
        same = sp[1:] == sp[:-1]
        d = (st[1:] - st[:-1]).astype(np.float64)[same]
        dq = sp[1:][same]
        dt_sum = np.bincount(dq, weights=d, minlength=npix)
        dt_sq = np.bincount(dq, weights=d * d, minlength=npix)

    return count.astype(np.int64), pol, dt_sum, dt_sq
