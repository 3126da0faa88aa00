"""Pure-Python/numpy implementations of the hot kernels.

Semantics must match ``_kernels.pyx`` exactly: every kernel only compares,
indexes and copies floats that the caller already computed, so both backends
produce bit-identical output.
"""
import numpy as np

MH, ALWAYS, NEVER = 0, 1, 2


def _last_positive(cdf_row):
    for j in range(cdf_row.shape[0] - 1, 0, -1):
        if cdf_row[j] > cdf_row[j - 1]:
            return j
    return 0


def sample_rows(cdf, u):
    cdf = np.asarray(cdf, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    target = u * cdf[:, -1]
    idx = np.sum(cdf <= target[:, None], axis=1).astype(np.int64)
    m = cdf.shape[1]
    for i in np.flatnonzero(idx >= m):
        idx[i] = _last_positive(cdf[i])
    return idx


def naming_sweep(cdf, acc, signs, u, variant):
    signs = np.array(signs, dtype=np.int64)
    d = signs.shape[0]
    proposals = sample_rows(cdf, u[:, 0])
    if variant == MH:
        r = acc[np.arange(d), proposals, signs]
        accepted = u[:, 1] < r
    elif variant == ALWAYS:
        accepted = np.ones(d, dtype=bool)
    else:
        accepted = np.zeros(d, dtype=bool)
    signs[accepted] = proposals[accepted]
    return signs, proposals, accepted.astype(np.uint8)


def mh_chain(cdf, acc, signs0, u, speakers, listeners):
    rounds, d = u.shape[0], u.shape[1]
    w = cdf.shape[2]
    signs = [int(s) for s in signs0]
    chain = np.empty((rounds, d), dtype=np.int64)
    n_accepted = 0
    cdf_l = cdf.tolist()
    acc_l = acc.tolist()
    u_l = u.tolist()
    for r in range(rounds):
        sp = int(speakers[r])
        li = int(listeners[r])
        cdf_sp = cdf_l[sp]
        acc_li = acc_l[li]
        ur = u_l[r]
        for j in range(d):
            row = cdf_sp[j]
            target = ur[j][0] * row[w - 1]
            prop = -1
            for k in range(w):
                if target < row[k]:
                    prop = k
                    break
            if prop < 0:
                prop = _last_positive(np.asarray(row))
            if ur[j][1] < acc_li[j][prop][signs[j]]:
                signs[j] = prop
                n_accepted += 1
        chain[r] = signs
    return chain, n_accepted
