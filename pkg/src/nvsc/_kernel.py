"""Compiled inner loop of the platoon simulation.

Mirrors the reference functions in ``controller``, ``observer`` and ``estimator``;
the test suite checks the two against each other.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# status codes
OK = 0
BLOWUP = 1
# blow-up terms
TERM_STATE = 0
TERM_OBSERVER = 1
TERM_WEIGHTS = 2
TERM_CONTROL = 3


@njit(cache=True, nogil=True)
def profile_state(t, tk, vk, pk, out):
    K = tk.size
    k = 0
    while k + 1 < K and tk[k + 1] <= t:
        k += 1
    if k >= K - 1:
        s = t - tk[K - 1]
        out[0] = pk[K - 1] + vk[K - 1] * s
        out[1] = vk[K - 1]
        out[2] = 0.0
        return
    slope = (vk[k + 1] - vk[k]) / (tk[k + 1] - tk[k])
    s = t - tk[k]
    out[0] = pk[k] + vk[k] * s + 0.5 * slope * s * s
    out[1] = vk[k] + slope * s
    out[2] = slope


@njit(cache=True, nogil=True)
def leader_state(t, tk, vk, pk, n, out):
    """Leader state padded to dimension n (higher derivatives beyond acceleration are zero)."""
    tmp = np.empty(3)
    profile_state(t, tk, vk, pk, tmp)
    for r in range(n):
        out[r] = tmp[r] if r < 3 else 0.0


@njit(cache=True, nogil=True)
def feature_sum(eta, X, centers, scales):
    n, m = eta.shape
    s = 0.0
    for l in range(n):
        for k in range(m):
            s += eta[l, k] * np.tanh(scales[k] * (X[l] - centers[k]))
    return s


@njit(cache=True, nogil=True)
def disturbance(kind, ratio, freq, omega, i1, t, noise):
    if kind == 0:
        return 0.0
    w = ratio * omega * np.sin(freq * t + i1) + noise
    if w > omega:
        return omega
    if w < -omega:
        return -omega
    return w


@njit(cache=True, nogil=True)
def agent_rates(i, X, eta, u, t, X0, frozen, A, B, P, kdrag, kconst, D0, centers, scales, Keta,
                dkind, dratio, dfreq, omega, noise, dX, deta):
    n = X.size
    m = centers.size
    for r in range(n):
        acc = B[i, r] * u
        for c in range(n):
            acc += A[i, r, c] * X[c]
        dX[r] = acc
    v = X[1]
    dX[n - 1] += -(kdrag[i] * v * v + kconst[i]) + disturbance(dkind, dratio, dfreq, omega[i], i + 1.0, t, noise)
    if frozen:
        for l in range(n):
            for k in range(m):
                deta[l, k] = 0.0
        return
    # s = (P E)_n with E = X - X0 - (i+1) D0
    s = 0.0
    for c in range(n):
        s += P[i, n - 1, c] * (X[c] - X0[c] - (i + 1) * D0[c])
    for l in range(n):
        g = s / Keta[l]
        for k in range(m):
            deta[l, k] = np.tanh(scales[k] * (X[l] - centers[k])) * g


@njit(cache=True, nogil=True)
def observer_step(Xh, Xn, A, P, Ko, c, dt, live, tol, max_iter, y):
    """Backward-Euler observer update into y; returns the Newton iteration count."""
    n = Xh.size
    J = np.empty((n, n))
    if not live:
        for a in range(n):
            for b in range(n):
                J[a, b] = (1.0 if a == b else 0.0) - dt * A[a, b]
        rhs = Xh + dt * c
        sol = np.linalg.solve(J, rhs)
        for a in range(n):
            y[a] = sol[a]
        return 0
    z = np.empty(n)
    R = np.empty(n)
    for a in range(n):
        y[a] = Xh[a]
    d = Xn - y
    for a in range(n):
        acc = 0.0
        for b in range(n):
            acc += P[a, b] * d[b]
        z[a] = np.tanh(acc)
    for a in range(n):
        acc = 0.0
        for b in range(n):
            acc += A[a, b] * y[b]
        R[a] = y[a] - Xh[a] - dt * (acc + c[a] + Ko[a] * z[a])
    nr = np.sqrt(np.sum(R * R))
    it = 0
    yn = np.empty(n)
    zn = np.empty(n)
    Rn = np.empty(n)
    while nr >= tol and it < max_iter:
        for a in range(n):
            for b in range(n):
                J[a, b] = (1.0 if a == b else 0.0) - dt * A[a, b] + dt * Ko[a] * (1.0 - z[a] * z[a]) * P[a, b]
        dy = np.linalg.solve(J, R)
        lam = 1.0
        nrn = nr
        for _ in range(60):
            for a in range(n):
                yn[a] = y[a] - lam * dy[a]
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += P[a, b] * (Xn[b] - yn[b])
                zn[a] = np.tanh(acc)
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += A[a, b] * yn[b]
                Rn[a] = yn[a] - Xh[a] - dt * (acc + c[a] + Ko[a] * zn[a])
            nrn = np.sqrt(np.sum(Rn * Rn))
            if nrn <= nr * (1.0 - 1e-4 * lam):
                break
            lam *= 0.5
        for a in range(n):
            y[a] = yn[a]
            z[a] = zn[a]
            R[a] = Rn[a]
        nr = nrn
        it += 1
    return it


@njit(cache=True, nogil=True)
def simulate(h, sub, n_ticks, adj, A, A0, B, P, Minv, Ku, Ko, KC, Keta, rho, D0, centers, scales,
             kdrag, kconst, dkind, dratio, dfreq, omega, noise, tk, vk, pk, blocked, zero_input, window,
             X, Xh, eta,
             outX, outXh, outE, outU, outUd, outEtaN, outEtaChg, outEps, outX0, outFh, status):
    N, n = X.shape
    m = centers.size
    dt = h / sub
    X0 = np.empty(n)
    X0a = np.empty(n)
    X0b = np.empty(n)
    X0c = np.empty(n)
    E = np.zeros((N, n))
    Epkt = np.zeros((N, n))
    u_act = np.zeros(N)
    last_u = np.zeros(N)
    last_t = np.zeros(N)
    last_drive = np.zeros((N, n))
    last_ud = np.zeros((N, n))
    eps = np.zeros(N, dtype=np.int64)
    frozen = np.zeros(N, dtype=np.bool_)
    live_obs = np.ones(N, dtype=np.bool_)
    drive = np.zeros((N, n))
    prev_eta = eta.copy()
    Dv = np.empty(n)
    inner = np.empty(n)
    cons = np.empty(n)
    ub = np.empty(n)
    ud = np.empty(n)
    dX1 = np.empty(n); dX2 = np.empty(n); dX3 = np.empty(n); dX4 = np.empty(n)
    de1 = np.empty((n, m)); de2 = np.empty((n, m)); de3 = np.empty((n, m)); de4 = np.empty((n, m))
    cobs = np.empty(n)
    ynew = np.empty(n)
    max_it = 0

    for k in range(n_ticks):
        t = k * h
        leader_state(t, tk, vk, pk, n, X0)
        for i in range(N):
            for r in range(n):
                E[i, r] = X[i, r] - X0[r] - (i + 1) * D0[r]
            if not blocked[k, i] or k == 0:
                for r in range(n):
                    Epkt[i, r] = E[i, r]
        f0 = 0.0
        for c in range(n):
            f0 -= A0[n - 1, c] * X0[c]

        for i in range(N):
            is_blocked = blocked[k, i]
            if is_blocked and k > 0:
                frozen[i] = True
                live_obs[i] = False
                if eps[i] == 0 and t - last_t[i] > window * h:
                    eps[i] = 1
                zim = eps[i] == 1 and zero_input
                if zim:
                    u_act[i] = 0.0
                for r in range(n):
                    drive[i, r] = last_drive[i, r] - last_ud[i, r]
                    if zim:
                        # the observer model drops the input the actuator no longer applies
                        drive[i, r] -= B[i, r] * last_u[i]
                outFh[k, i] = outFh[k - 1, i]
                continue
            # fresh packet: live control from the controller
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += P[i, a, b] * E[i, b]
                Dv[a] = np.tanh(acc)
            for r in range(n):
                inner[r] = 0.0
            for j in range(N + 1):
                al = adj[i + 1, j]
                if al == 0.0:
                    continue
                for r in range(n):
                    ej = 0.0 if j == 0 else Epkt[j - 1, r]
                    ebar = ej * np.tanh(rho * ej)
                    inner[r] += al * (E[i, r] - Dv[r] * ej + KC[r] * Dv[r] * ebar)
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += P[i, a, b] * inner[b]
                cons[a] = -0.5 * acc
            fh = feature_sum(eta[i], X[i], centers, scales)
            for a in range(n):
                ub[a] = -Ku[a] * Dv[a]
                acc = 0.0
                for b in range(n):
                    acc += (A[i, a, b] - A0[a, b]) * X0[b] + (i + 1) * A[i, a, b] * D0[b]
                ub[a] -= acc
            ub[n - 1] += -fh + f0
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += P[i, a, b] * (X[i, b] - Xh[i, b])
                ud[a] = -Ko[a] * np.tanh(acc)
            u = 0.0
            bc = 0.0
            for a in range(n):
                acc = 0.0
                for b in range(n):
                    acc += Minv[i, a, b] * ub[b]
                u += B[i, a] * (cons[a] + ud[a] + acc)
                bc += B[i, a] * (cons[a] + ud[a])
            for a in range(n):
                drive[i, a] = B[i, a] * bc + ub[a]
                last_drive[i, a] = drive[i, a]
                last_ud[i, a] = ud[a]
            last_u[i] = u
            last_t[i] = t
            u_act[i] = u
            eps[i] = 0
            frozen[i] = False
            live_obs[i] = True
            outFh[k, i] = fh
            if is_blocked:
                # attack already active at start-up: the initial output is held, nothing adapts
                frozen[i] = True
                live_obs[i] = False
                for r in range(n):
                    drive[i, r] = last_drive[i, r] - last_ud[i, r]

        # log the tick
        for r in range(n):
            outX0[k, r] = X0[r]
        for i in range(N):
            outU[k, i] = u_act[i]
            outEps[k, i] = eps[i]
            s2 = 0.0
            chg = False
            for l in range(n):
                outX[k, i, l] = X[i, l]
                outXh[k, i, l] = Xh[i, l]
                outE[k, i, l] = E[i, l]
                outUd[k, i, l] = last_ud[i, l]
                for q in range(m):
                    s2 += eta[i, l, q] * eta[i, l, q]
                    if eta[i, l, q] != prev_eta[i, l, q]:
                        chg = True
                    prev_eta[i, l, q] = eta[i, l, q]
            outEtaN[k, i] = np.sqrt(s2)
            outEtaChg[k, i] = chg
            if not np.isfinite(u_act[i]):
                status[0] = BLOWUP; status[1] = k; status[2] = i; status[3] = TERM_CONTROL
                return max_it

        # integrate to the next tick
        for s in range(sub):
            tt = t + s * dt
            leader_state(tt, tk, vk, pk, n, X0a)
            leader_state(tt + 0.5 * dt, tk, vk, pk, n, X0b)
            leader_state(tt + dt, tk, vk, pk, n, X0c)
            for i in range(N):
                x = X[i].copy()
                e = eta[i].copy()
                nz = noise[k, i]
                agent_rates(i, x, e, u_act[i], tt, X0a, frozen[i], A, B, P, kdrag, kconst, D0, centers, scales,
                            Keta, dkind, dratio, dfreq, omega, nz, dX1, de1)
                agent_rates(i, x + 0.5 * dt * dX1, e + 0.5 * dt * de1, u_act[i], tt + 0.5 * dt, X0b, frozen[i],
                            A, B, P, kdrag, kconst, D0, centers, scales, Keta, dkind, dratio, dfreq, omega, nz,
                            dX2, de2)
                agent_rates(i, x + 0.5 * dt * dX2, e + 0.5 * dt * de2, u_act[i], tt + 0.5 * dt, X0b, frozen[i],
                            A, B, P, kdrag, kconst, D0, centers, scales, Keta, dkind, dratio, dfreq, omega, nz,
                            dX3, de3)
                agent_rates(i, x + dt * dX3, e + dt * de3, u_act[i], tt + dt, X0c, frozen[i],
                            A, B, P, kdrag, kconst, D0, centers, scales, Keta, dkind, dratio, dfreq, omega, nz,
                            dX4, de4)
                Xn = x + (dt / 6.0) * (dX1 + 2.0 * dX2 + 2.0 * dX3 + dX4)
                fhh = feature_sum(eta[i], Xh[i], centers, scales)
                for r in range(n):
                    cobs[r] = drive[i, r]
                cobs[n - 1] += fhh
                it = observer_step(Xh[i], Xn, A[i], P[i], Ko, cobs, dt, live_obs[i], 1e-10, 200, ynew)
                if it > max_it:
                    max_it = it
                if not frozen[i]:
                    eta[i] = e + (dt / 6.0) * (de1 + 2.0 * de2 + 2.0 * de3 + de4)
                for r in range(n):
                    Xh[i, r] = ynew[r]
                    X[i, r] = Xn[r]
                for r in range(n):
                    if not np.isfinite(X[i, r]):
                        status[0] = BLOWUP; status[1] = k; status[2] = i; status[3] = TERM_STATE
                        return max_it
                    if not np.isfinite(Xh[i, r]):
                        status[0] = BLOWUP; status[1] = k; status[2] = i; status[3] = TERM_OBSERVER
                        return max_it
                if not np.isfinite(feature_sum(eta[i], X[i], centers, scales)):
                    status[0] = BLOWUP; status[1] = k; status[2] = i; status[3] = TERM_WEIGHTS
                    return max_it
    return max_it
