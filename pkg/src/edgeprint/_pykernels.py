"""Pure-Python/numpy implementations of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and bit-identical results; ``edgeprint.kernels`` picks one at import.
"""
import numpy as np

CRC15_POLY = 0x4599


def crc15(bits):
    crc = 0
    for b in bits.tolist():
        nxt = (b ^ (crc >> 14)) & 1
        crc = (crc << 1) & 0x7FFF
        if nxt:
            crc ^= CRC15_POLY
    return crc


def stuff_bits(bits):
    out = []
    run = 0
    last = 2
    for b in bits.tolist():
        out.append(b)
        if b == last:
            run += 1
        else:
            run = 1
            last = b
        if run == 5:
            last = 1 - b
            out.append(last)
            run = 1
    return np.array(out, dtype=np.uint8)


def destuff_bits(bits):
    out = []
    run = 0
    last = 2
    skip = False
    for i, b in enumerate(bits.tolist()):
        if skip:
            if b == last:
                raise ValueError(f"stuff error at bit {i}: expected complement of {last}")
            last = b
            run = 1
            skip = False
            continue
        out.append(b)
        if b == last:
            run += 1
        else:
            run = 1
            last = b
        if run == 5:
            skip = True
    if skip:
        raise ValueError("stream ends where a stuff bit is required")
    return np.array(out, dtype=np.uint8)


def rising_edges(bits, window_bits):
    seq = bits.tolist()
    stop = min(window_bits, len(seq) - 1)
    return np.array(
        [k for k in range(1, stop + 1) if seq[k - 1] == 0 and seq[k] == 1],
        dtype=np.int64,
    )


def relief_f_weights(x, y, order, k, priors):
    """Relief-F weight accumulation over range-normalised features ``x``.

    Neighbours are ranked by Manhattan distance, ties broken by lower
    instance index. Distances are summed feature by feature so the compiled
    kernel reproduces them exactly.
    """
    n, nf = x.shape
    n_classes = priors.shape[0]
    m = order.shape[0]
    w = np.zeros(nf)
    members = [np.flatnonzero(y == c) for c in range(n_classes)]
    scale = 1.0 / (m * k)
    for r in order.tolist():
        xr = x[r]
        d = np.zeros(n)
        for a in range(nf):
            d += np.abs(x[:, a] - xr[a])
        cr = y[r]
        for c in range(n_classes):
            idx = members[c]
            if c == cr:
                idx = idx[idx != r]
            near = idx[np.argsort(d[idx], kind="stable")[:k]]
            diff = np.abs(x[near] - xr).sum(axis=0)
            if c == cr:
                w -= diff * scale
            else:
                w += diff * (scale * priors[c] / (1.0 - priors[cr]))
    return w
