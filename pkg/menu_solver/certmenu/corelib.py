import numpy as np
import numba as nb

REVENUE = 0
WELFARE = 1


def back_track(layer, item, t, pred_item, pred_type):
    """
    Follow backpointers from the winning cell down to the single-item layer.
    Returns:
        chain: list of item indices, lowest quality first.
    """
    chain = []
    while True:
        chain.append(item)
        if layer == 0:
            return chain[::-1]
        prev_item = pred_item[layer, item, t]
        prev_t = pred_type[layer, item, t]
        item, t = prev_item, prev_t
        layer -= 1


@nb.jit(nopython=True, cache=True)
def first_preferred(vals, q_new, p_new, q_old, p_old):
    """
    Index of the lowest discrete type whose utility from the new item is at least
    the utility from the old one; len(types) if there is none. q_old < 0 stands
    for the trivial item.
    """
    lo = 0
    hi = vals.shape[1]
    while lo < hi:
        mid = (lo + hi) // 2
        u_old = 0.0
        if q_old >= 0:
            u_old = vals[q_old, mid] - p_old
        if vals[q_new, mid] - p_new >= u_old:
            hi = mid
        else:
            lo = mid + 1
    return lo


@nb.jit(nopython=True, cache=True)
def single_item_layer(vals, item_q, item_p, tail, vtail, cost, mode, cur):
    """
    Fill the one-item layer: the item is bought by every type at or above its
    lowest buyer.
    Args:
        vals: numpy array of shape (num_qualities, num_types), values on the type grid.
        item_q: numpy array of quality indices per item.
        item_p: numpy array of prices per item.
        tail: numpy array of shape (num_types + 1,). Mass of types at or above each index.
        vtail: numpy array of shape (num_qualities, num_types + 1). Tail sums of mass times value.
        cost: float. Verification cost per non-trivial sale.
        mode: int. REVENUE or WELFARE.
        cur: numpy array of shape (num_items, num_types) written in place.
    """
    num_items = item_q.shape[0]
    num_types = vals.shape[1]
    for i in range(num_items):
        t = first_preferred(vals, item_q[i], item_p[i], -1, 0.0)
        if t >= num_types:
            continue
        if mode == REVENUE:
            cur[i, t] = (item_p[i] - cost) * tail[t]
        else:
            cur[i, t] = vtail[item_q[i], t] - cost * tail[t]


@nb.jit(nopython=True, cache=True)
def prefix_best(prev, best, arg):
    """
    best[h, t] = max over t' < t of prev[h, t'], arg the first maximizer.
    """
    num_items, num_types = prev.shape
    for h in range(num_items):
        best[h, 0] = -np.inf
        arg[h, 0] = -1
        for t in range(num_types):
            if prev[h, t] > best[h, t]:
                best[h, t + 1] = prev[h, t]
                arg[h, t + 1] = t
            else:
                best[h, t + 1] = best[h, t]
                arg[h, t + 1] = arg[h, t]


@nb.jit(nopython=True, parallel=True, cache=True)
def extend_layer(vals, item_q, item_p, qstart, tail, vtail, mode, best, arg, cur, pred_item, pred_type):
    """
    Fill one layer from the prefix maxima of the previous one. The new top item i
    takes over every type from its switch index t upward; the predecessor menu
    topped by h must have its lowest top-item buyer strictly below t.
    Args:
        vals, item_q, item_p, tail, vtail, mode: as in single_item_layer.
        qstart: numpy array. Index of the first item sharing item i's quality; only
                items before it may precede i.
        best, arg: prefix maxima of the previous layer (see prefix_best).
        cur: numpy array of shape (num_items, num_types), filled with -inf on entry.
        pred_item, pred_type: numpy arrays of shape (num_items, num_types) receiving backpointers.
    Returns:
        transitions: int. Number of predecessor pairs examined.
    """
    num_items = item_q.shape[0]
    num_types = vals.shape[1]
    transitions = 0
    for i in nb.prange(num_items):
        q_i = item_q[i]
        p_i = item_p[i]
        for h in range(qstart[i]):
            t = first_preferred(vals, q_i, p_i, item_q[h], item_p[h])
            if t >= num_types:
                continue
            score = best[h, t]
            if score == -np.inf:
                continue
            if mode == REVENUE:
                score += (p_i - item_p[h]) * tail[t]
            else:
                score += vtail[q_i, t] - vtail[item_q[h], t]
            if score > cur[i, t]:
                cur[i, t] = score
                pred_item[i, t] = h
                pred_type[i, t] = arg[h, t]
        transitions += qstart[i]
    return transitions
