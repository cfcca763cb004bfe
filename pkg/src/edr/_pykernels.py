"""Pure-Python float kernels; the Cython module ``_ckernels`` mirrors these line for line."""

import math


def water_fill(external, weights, budget):
    """Spend ``budget`` to maximise ``min_x (external[x] + s[x]) / weights[x]`` over ``weights > 0``."""
    m = len(weights)
    idx = [x for x in range(m) if weights[x] > 0]
    idx.sort(key=lambda x: (external[x] / weights[x], x))
    spend = [0.0] * m
    if not idx:
        return spend
    W = 0.0
    E = 0.0
    level = 0.0
    k = len(idx)
    for pos in range(k):
        x = idx[pos]
        W += weights[x]
        E += external[x]
        level = (budget + E) / W
        if pos + 1 == k:
            break
        nxt = idx[pos + 1]
        if level <= external[nxt] / weights[nxt]:
            break
    for x in idx:
        s = level * weights[x] - external[x]
        if s > 0:
            spend[x] = s
    return spend


def _shift(row, br):
    return 0.5 * sum(abs(a - b) for a, b in zip(row, br))


def displacements(values, contributions, rows):
    m = len(values[0])
    total = [sum(r[x] for r in rows) for x in range(m)]
    out = []
    for i, row in enumerate(rows):
        ext = [total[x] - row[x] for x in range(m)]
        br = water_fill(ext, values[i], contributions[i])
        out.append(_shift(row, br))
    return out


def redistribute(values, contributions, rows, order, max_rounds, tol):
    """Best responses along the periodic ``order`` until the max displacement is ``<= tol``.

    Returns ``(rows, rounds, residual)``; ``residual`` is ``inf`` when the cap was hit
    before a residual check passed.
    """
    rows = [list(r) for r in rows]
    m = len(values[0])
    period = len(order)
    total = [sum(r[x] for r in rows) for x in range(m)]
    sweep_max = 0.0
    residual = math.inf
    t = 0
    while t < max_rounds:
        i = order[t % period]
        row = rows[i]
        ext = [total[x] - row[x] for x in range(m)]
        br = water_fill(ext, values[i], contributions[i])
        shift = _shift(row, br)
        if shift > sweep_max:
            sweep_max = shift
        rows[i] = br
        total = [ext[x] + br[x] for x in range(m)]
        t += 1
        if t % period == 0:
            total = [sum(r[x] for r in rows) for x in range(m)]
            if sweep_max <= tol:
                residual = max(displacements(values, contributions, rows))
                if residual <= tol:
                    break
                residual = math.inf
            sweep_max = 0.0
    return rows, t, residual


def spend(values, contributions, order, rounds, window):
    """Round-robin spending: each turn spends a fresh contribution against the last ``window`` donations."""
    n = len(values)
    m = len(values[0])
    period = len(order)
    cumulative = [[0.0] * m for _ in range(n)]
    counts = [0] * n
    history = []
    for t in range(rounds):
        i = order[t % period]
        ext = [0.0] * m
        for donation in history[-window:] if window > 0 else []:
            for x in range(m):
                ext[x] += donation[x]
        br = water_fill(ext, values[i], contributions[i])
        history.append(br)
        if len(history) > window:
            history.pop(0)
        cum = cumulative[i]
        for x in range(m):
            cum[x] += br[x]
        counts[i] += 1
    return cumulative, counts
