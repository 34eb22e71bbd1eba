"""Compiled per-step speed and position update for the engine."""

from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def advance(dt, stopped_speed, margin, active, off, v, lead, llen, lshift, clamp, clr, Vdes, A, Dn, Dmax, mtg,
            tau_n, tau_s, tau_g, is_sig, obs, dhat, Vn2, seclen, dwelling, new_v, new_off):
    """One synchronous update of all active slots.

    Speeds follow the Gipps rule: the acceleration part relaxes toward its
    target over the reaction time, the braking bounds (leader, virtual
    obstacle, slower next section) apply at once, and the result is clamped
    to the per-step acceleration limits and ``[0, Vdes]``. A leader flagged
    in ``clamp`` is merging from another approach: its rear is not counted
    behind its section start, and while any of it is still over the node it
    acts as a stationary line. Vehicles halt ``margin`` short of any
    stationary line so rounding can never carry them across it.

    Returns ``(min gap, index of min gap, speed violations)``; the new state
    is written into ``new_v`` and ``new_off``.
    """
    n = off.shape[0]
    for i in range(n):
        if not active[i]:
            new_v[i] = 0.0
            new_off[i] = off[i]
            continue
        j = lead[i]
        vl = v[j]
        c = clr[i]
        rear = off[j] - llen[i]
        if clamp[i] and rear < 0.0:
            rear = 0.0
            vl = 0.0
            c = margin
        gap = rear + lshift[i] - off[i]
        vi = v[i]
        tau = tau_n[i]
        if vi < stopped_speed:
            if vl < stopped_speed and gap - c < 5.0:
                tau = tau_s[i]
            if is_sig[i] and obs[i] - off[i] < 5.0:
                tau = tau_g[i]
        r = min(vi / Vdes[i], 1.0)
        acc = vi + 2.5 * A[i] * tau * (1.0 - r) * math.sqrt(0.025 + r)
        target = vi + (acc - vi) * min(dt / tau, 1.0)
        d = Dn[i]
        vt = vi * tau
        h = 0.5 * (tau + mtg[i])
        rad = d * d * h * h + d * (2.0 * (gap - c) - vt + vl * vl / dhat[i])
        u = max(-d * h + math.sqrt(max(rad, 0.0)), 0.0)
        target = min(target, u)
        ho = 0.5 * tau
        rado = d * d * ho * ho + d * (2.0 * (obs[i] - off[i] - margin) - vt)
        uo = max(-d * ho + math.sqrt(max(rado, 0.0)), 0.0)
        target = min(target, uo)
        target = min(target, math.sqrt(Vn2[i] + 2.0 * d * max(seclen[i] - off[i], 0.0)))
        nv = min(max(min(target, vi + A[i] * dt), vi - Dmax[i] * dt), Vdes[i])
        nv = max(nv, 0.0)
        if dwelling[i]:
            nv = 0.0
        new_v[i] = nv
        new_off[i] = off[i] + 0.5 * (vi + nv) * dt

    gmin = np.inf
    imin = 0
    nviol = 0
    for i in range(n):
        if not active[i]:
            continue
        j = lead[i]
        rear = new_off[j] - llen[i]
        if clamp[i] and rear < 0.0:
            rear = 0.0
        g = rear + lshift[i] - new_off[i]
        if g < gmin:
            gmin = g
            imin = i
        if new_v[i] > Vdes[i] + 1e-9:
            nviol += 1
    return gmin, imin, nviol
