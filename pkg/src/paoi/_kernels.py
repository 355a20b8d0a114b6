"""Compiled inner loops for the Monte Carlo bound and the queue simulator."""

import math

import numba
import numpy as np

LOG_EVERY = 32


@numba.njit(cache=True)
def block_info_density(H_hat, Y_d, symbols, cands, alphas, arithmetic):
    """Generalised information density of every block for every alpha.

    H_hat: (nb, m_r, m_t); Y_d: (nb, m_r, u); symbols: (nb, u) candidate
    indices of the transmitted columns; cands: (K, m_t) scaled candidate
    columns; alphas: (A,). Returns (nb, A).

    With ``arithmetic`` set, alphas must form an arithmetic progression and
    exp(-alpha_j * d) is obtained as exp(-alpha_0 * d) * exp(-step * d)**j,
    which replaces A exponentials per candidate by one plus A products.
    """
    nb, m_r, m_t = H_hat.shape
    u = Y_d.shape[2]
    K = cands.shape[0]
    A = alphas.shape[0]
    log_k = math.log(K)
    a0 = alphas[0]
    step = alphas[1] - alphas[0] if A > 1 else 0.0
    # a0 == lead * step lets exp(-a0 * d) be formed from exp(-step * d)
    lead = -1
    if step > 0.0:
        ratio_a0 = a0 / step
        if abs(ratio_a0 - round(ratio_a0)) < 1e-9 and ratio_a0 < 4096:
            lead = int(round(ratio_a0))
    out = np.zeros((nb, A))
    centers = np.empty((m_r, K), dtype=np.complex128)
    dist = np.empty(K)
    work = np.empty(K)
    sums = np.empty(A)
    prods = np.empty(A)
    excess_sum = 0.0
    for b in range(nb):
        for r in range(m_r):
            for c in range(K):
                acc = 0j
                for t in range(m_t):
                    acc += H_hat[b, r, t] * cands[c, t]
                centers[r, c] = acc
        excess_sum = 0.0
        for j in range(A):
            prods[j] = 1.0
        for i in range(u):
            dmin = np.inf
            for c in range(K):
                d = 0.0
                for r in range(m_r):
                    z = Y_d[b, r, i] - centers[r, c]
                    d += z.real * z.real + z.imag * z.imag
                dist[c] = d
                if d < dmin:
                    dmin = d
            excess_sum += dist[symbols[b, i]] - dmin
            # each per-use sum lies in [1, K]; products of up to
            # LOG_EVERY of them are folded into logs before they can overflow
            if arithmetic:
                for j in range(A):
                    sums[j] = 0.0
                for c in range(K):
                    delta = dist[c] - dmin
                    if step == 0.0:
                        ratio = 1.0
                        e = math.exp(-a0 * delta)
                    else:
                        ratio = math.exp(-step * delta)
                        e = ratio**lead if lead >= 0 else math.exp(-a0 * delta)
                    for j in range(A):
                        sums[j] += e
                        e *= ratio
            else:
                for c in range(K):
                    work[c] = dist[c] - dmin
                for j in range(A):
                    s = 0.0
                    for c in range(K):
                        s += math.exp(-alphas[j] * work[c])
                    sums[j] = s
            for j in range(A):
                prods[j] *= sums[j]
            if (i + 1) % LOG_EVERY == 0 or i == u - 1:
                for j in range(A):
                    out[b, j] -= math.log(prods[j])
                    prods[j] = 1.0
        for j in range(A):
            out[b, j] += u * log_k - alphas[j] * excess_sum
    return out


@numba.njit(cache=True)
def lcfs_frames(arrivals, successes, state, ages, n_ages, counters):
    """Advance the LCFS-S / ARQ queue over a block of frames.

    state = [frame index, in-service timestamp (-1 if idle), timestamp of the
    last delivered packet (-1 if none)]. counters = [delivered, preempted,
    entered service], all counted from the first delivery on, so that
    delivered equals the number of recorded peak ages. Peak ages are written
    to ``ages`` from position ``n_ages`` until it is full; returns the new
    fill level.
    """
    t = state[0]
    serving = state[1]
    last_ts = state[2]
    cap = ages.shape[0]
    for f in range(arrivals.shape[0]):
        if n_ages >= cap:
            break
        arrived = arrivals[f]
        if serving >= 0:
            if successes[f]:
                if last_ts >= 0:
                    ages[n_ages] = t - last_ts
                    n_ages += 1
                    counters[0] += 1
                last_ts = serving
                serving = -1
            elif arrived:
                if last_ts >= 0:
                    counters[1] += 1
                serving = -1
        # a fresh packet waits for the next frame boundary; being idle at
        # this point means it starts service there
        if arrived and serving < 0:
            serving = t
            if last_ts >= 0:
                counters[2] += 1
        t += 1
    state[0] = t
    state[1] = serving
    state[2] = last_ts
    return n_ages
