"""Numba kernels for the walk engine and the fine-path embedding oracle.

Boundary codes: 0 = open edge without a rule (never emitted), 1 = reflecting,
2 = absorbing, 3 = window-truncation edge (artificial reflection, flagged).
All kernels draw from the per-path splitmix streams of rng.py, so batched and
single-path runs of the same (seed, stream) are bit-identical.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .rng import next_gaussian_pair, next_uniform, stream_state

REFLECT = 1
ABSORB = 2
EDGE = 3


@njit(cache=True, nogil=True)
def walk_terminal(
    p_plus, t_plus, t_minus,
    left_code, right_code, left_time, right_time,
    init_on_grid, init_j, init_lo, init_p,
    horizon, state, step_budget,
):
    """One path, terminal value only.

    Returns (index at horizon, time of last applied jump, steps, absorbed,
    truncated, budget_hit, rng state).
    """
    n = p_plus.shape[0]
    if init_on_grid:
        j = init_j
    else:
        state, u = next_uniform(state)
        j = init_lo + 1 if u < init_p else init_lo
    t = 0.0
    steps = 0
    absorbed = False
    truncated = False
    budget_hit = False
    while t < horizon:
        if j == 0:
            if left_code == ABSORB:
                absorbed = True
                break
            dt = left_time
            jn = 1
            if left_code == EDGE:
                truncated = True
        elif j == n - 1:
            if right_code == ABSORB:
                absorbed = True
                break
            dt = right_time
            jn = n - 2
            if right_code == EDGE:
                truncated = True
        else:
            state, u = next_uniform(state)
            if u < p_plus[j]:
                dt = t_plus[j]
                jn = j + 1
            else:
                dt = t_minus[j]
                jn = j - 1
        if t + dt > horizon:
            break  # value held before this jump is the value at the horizon
        j = jn
        t = t + dt
        steps += 1
        if steps >= step_budget:
            budget_hit = True
            break
    return j, t, steps, absorbed, truncated, budget_hit, state


@njit(cache=True, nogil=True)
def walk_terminal_batch(
    p_plus, t_plus, t_minus,
    left_code, right_code, left_time, right_time,
    init_on_grid, init_j, init_lo, init_p,
    horizon, master_seed, stream_ids, step_budget,
):
    m = stream_ids.shape[0]
    out_j = np.empty(m, dtype=np.int64)
    out_steps = np.empty(m, dtype=np.int64)
    out_absorbed = np.zeros(m, dtype=np.bool_)
    out_truncated = np.zeros(m, dtype=np.bool_)
    out_budget = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        st = stream_state(master_seed, stream_ids[i])
        j, _, steps, ab, tr, bh, _ = walk_terminal(
            p_plus, t_plus, t_minus,
            left_code, right_code, left_time, right_time,
            init_on_grid, init_j, init_lo, init_p,
            horizon, st, step_budget,
        )
        out_j[i] = j
        out_steps[i] = steps
        out_absorbed[i] = ab
        out_truncated[i] = tr
        out_budget[i] = bh
    return out_j, out_steps, out_absorbed, out_truncated, out_budget


@njit(cache=True, nogil=True)
def walk_record(
    p_plus, t_plus, t_minus,
    left_code, right_code, left_time, right_time,
    init_on_grid, init_j, init_lo, init_p,
    horizon, state, step_budget,
):
    """One path with the full jump record.

    The loop runs while the accumulated time is below the horizon, so the
    final recorded jump time may exceed it (read the path cadlag).
    """
    n = p_plus.shape[0]
    if init_on_grid:
        j = init_j
    else:
        state, u = next_uniform(state)
        j = init_lo + 1 if u < init_p else init_lo
    cap = 1 << 12
    times = np.empty(cap)
    idxs = np.empty(cap, dtype=np.int64)
    times[0] = 0.0
    idxs[0] = j
    k = 1
    t = 0.0
    absorbed = False
    truncated = False
    budget_hit = False
    while t < horizon:
        if j == 0:
            if left_code == ABSORB:
                absorbed = True
                break
            dt = left_time
            j = 1
            if left_code == EDGE:
                truncated = True
        elif j == n - 1:
            if right_code == ABSORB:
                absorbed = True
                break
            dt = right_time
            j = n - 2
            if right_code == EDGE:
                truncated = True
        else:
            state, u = next_uniform(state)
            if u < p_plus[j]:
                dt = t_plus[j]
                j = j + 1
            else:
                dt = t_minus[j]
                j = j - 1
        t = t + dt
        if k == cap:
            cap *= 2
            new_times = np.empty(cap)
            new_idxs = np.empty(cap, dtype=np.int64)
            new_times[:k] = times[:k]
            new_idxs[:k] = idxs[:k]
            times = new_times
            idxs = new_idxs
        times[k] = t
        idxs[k] = j
        k += 1
        if k >= step_budget:
            budget_hit = True
            break
    return times[:k].copy(), idxs[:k].copy(), absorbed, truncated, budget_hit


@njit(cache=True, nogil=True)
def bm_crossings(points, j_start, n_crossings, dt_fine, state):
    """Fine-step BM crossing oracle on an arbitrary grid.

    Simulates Euler steps of standard BM reflected at the outer grid points,
    records which neighbor is hit first from each grid point and the time it
    took. Interior points only feed the statistics; from an end point the
    single neighbor is hit with probability one.
    """
    n = points.shape[0]
    up = np.zeros(n, dtype=np.int64)
    tot = np.zeros(n, dtype=np.int64)
    time_sum = np.zeros(n)
    # reflect one full gap beyond the outer points, otherwise the fold sits
    # exactly on the crossing threshold and inward crossings go undetected
    margin = 0.0
    for i in range(n - 1):
        gap = points[i + 1] - points[i]
        if gap > margin:
            margin = gap
    lo = points[0] - margin
    hi = points[n - 1] + margin
    sd = np.sqrt(dt_fine)
    j = j_start
    x = points[j]
    elapsed = 0.0
    done = 0
    while done < n_crossings:
        state, z1, z2 = next_gaussian_pair(state)
        for half in range(2):
            z = z1 if half == 0 else z2
            x = x + sd * z
            if x < lo:
                x = 2.0 * lo - x
            elif x > hi:
                x = 2.0 * hi - x
            elapsed += dt_fine
            moved_up = False
            moved_down = False
            if j < n - 1 and x >= points[j + 1]:
                moved_up = True
            elif j > 0 and x <= points[j - 1]:
                moved_down = True
            if moved_up or moved_down:
                if 0 < j < n - 1:
                    tot[j] += 1
                    time_sum[j] += elapsed
                    if moved_up:
                        up[j] += 1
                    done += 1
                j = j + 1 if moved_up else j - 1
                x = points[j]
                elapsed = 0.0
                if done >= n_crossings:
                    break
    return up, tot, time_sum
