"""Independent reference computations used as test oracles."""

import itertools

import numpy as np


def brute_cov(r):
    t, n = r.shape
    mu = [sum(r[i, j] for i in range(t)) / t for j in range(n)]
    out = np.empty((n, n))
    for a in range(n):
        for b in range(n):
            out[a, b] = sum((r[i, a] - mu[a]) * (r[i, b] - mu[b]) for i in range(t)) / (t - 1)
    return out


def double_loop_variance(w, sigma):
    n = len(w)
    return sum(w[i] * w[j] * sigma[i, j] for i in range(n) for j in range(n))


def simplex_grid(n, k):
    """All weight vectors on the simplex with coordinates in multiples of 1/k."""
    pts = []
    for cut in itertools.combinations(range(k + n - 1), n - 1):
        parts = np.diff(np.concatenate([[-1], cut, [k + n - 1]])) - 1
        pts.append(parts)
    return np.array(pts, dtype=float) / k


def _pairs(k):
    i, j = np.meshgrid(np.arange(k + 1), np.arange(k + 1), indexing="ij")
    keep = i + j <= k
    return i[keep], j[keep]


def grid_min_variance(sigma, k):
    """Exact minimum of w' sigma w over the lattice {w >= 0, sum w = 1, k w integer}, N <= 4."""
    n = sigma.shape[0]
    if n == 1:
        return float(sigma[0, 0])
    if n == 2:
        w1 = np.arange(k + 1) / k
        w = np.column_stack([w1, 1 - w1])
        return float(np.min(np.einsum("ij,jk,ik->i", w, sigma, w)))
    if n == 3:
        i, j = _pairs(k)
        w = np.column_stack([i, j, k - i - j]) / k
        return float(np.min(np.einsum("ij,jk,ik->i", w, sigma, w)))
    if n == 4:
        # enumerate the first two weights; the last two split a fixed remainder,
        # which leaves a 1-D quadratic minimized exactly over its integer points
        i, j = _pairs(k)
        rem = k - i - j
        base = np.column_stack([i, j]) / k
        r = rem / k
        # w = (base, x, r - x): var = c0 + c1 x + c2 x^2
        s = sigma
        fixed = np.einsum("ij,jk,ik->i", base, s[:2, :2], base)
        cross3 = base @ s[:2, 2]
        cross4 = base @ s[:2, 3]
        c2 = s[2, 2] + s[3, 3] - 2 * s[2, 3]
        c1 = 2 * cross3 - 2 * cross4 + 2 * r * s[2, 3] - 2 * r * s[3, 3]
        c0 = fixed + 2 * r * cross4 + r * r * s[3, 3]
        best = np.full(i.size, np.inf)
        if c2 > 0:
            xstar = -c1 / (2 * c2)
            cand = [np.floor(xstar * k), np.ceil(xstar * k)]
        else:
            cand = []
        cand += [np.zeros(i.size), rem.astype(float)]
        for m in cand:
            m = np.clip(m, 0, rem)
            x = m / k
            best = np.minimum(best, c0 + c1 * x + c2 * x * x)
        return float(best.min())
    raise ValueError("grid oracle supports N <= 4")


def support_enum_min_variance(sigma):
    """Exact long-only minimum variance by solving the KKT system on every support."""
    n = sigma.shape[0]
    best = np.inf
    for size in range(1, n + 1):
        for sup in itertools.combinations(range(n), size):
            idx = list(sup)
            s = sigma[np.ix_(idx, idx)]
            kkt = np.zeros((size + 1, size + 1))
            kkt[:size, :size] = s
            kkt[:size, size] = 1
            kkt[size, :size] = 1
            rhs = np.zeros(size + 1)
            rhs[size] = 1
            sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
            w = sol[:size]
            if np.all(w >= -1e-12) and abs(w.sum() - 1) < 1e-9:
                best = min(best, float(w @ s @ w))
    return best


def brute_cvar(returns, alpha):
    """min_t t + E[(loss - t)+] / (1 - alpha); the minimum sits at one of the losses."""
    losses = -np.asarray(returns, dtype=float)
    vals = [t + np.mean(np.maximum(losses - t, 0.0)) / (1 - alpha) for t in losses]
    return float(min(vals))


def grid_min_cvar(scenarios, alpha, k):
    w = simplex_grid(scenarios.shape[1], k)
    port = scenarios @ w.T
    return min(brute_cvar(port[:, j], alpha) for j in range(w.shape[0]))


def sorted_tail_cvar(returns, alpha):
    """Average of the worst (1 - alpha) share of losses, splitting the boundary scenario."""
    losses = sorted((-float(r) for r in returns), reverse=True)
    tail = (1 - alpha) * len(losses)
    acc, left = 0.0, tail
    for loss in losses:
        take = min(1.0, left)
        if take <= 0:
            break
        acc += take * loss
        left -= take
    return acc / tail
