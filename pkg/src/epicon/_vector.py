"""Vectorized numpy kernels: the fallback when numba is disabled.

The time loops stay in Python; each step works on whole state vectors, and
the exhaustive search evaluates a batch of candidate controls at once.
"""

import numpy as np


def _rhs(y, u, M, sigma, mu, rho, beta):
    # y: (..., n + 3), u: (..., n)
    n = u.shape[-1]
    s = y[..., 0]
    x = y[..., 1:n + 1]
    r = y[..., n + 1]
    force = s * np.sum((beta - u) * x, axis=-1)
    out = np.empty_like(y)
    out[..., 0] = -force + rho * r
    out[..., 1:n + 1] = x @ M.T
    out[..., 1] += force
    out[..., n + 1] = x @ sigma - rho * r
    out[..., n + 2] = x @ mu
    return out


def _step(y, u0, u1, h, M, sigma, mu, rho, beta):
    um = 0.5 * (u0 + u1)
    k1 = _rhs(y, u0, M, sigma, mu, rho, beta)
    k2 = _rhs(y + 0.5 * h * k1, um, M, sigma, mu, rho, beta)
    k3 = _rhs(y + 0.5 * h * k2, um, M, sigma, mu, rho, beta)
    k4 = _rhs(y + h * k3, u1, M, sigma, mu, rho, beta)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_forward(y0, u, h, M, sigma, mu, rho, beta):
    steps = u.shape[0] - 1
    Y = np.empty((steps + 1, y0.shape[0]))
    Y[0] = y0
    for k in range(steps):
        Y[k + 1] = _step(Y[k], u[k], u[k + 1], h, M, sigma, mu, rho, beta)
    return Y


def _nu_grad(x, w, rexp):
    return np.where(rexp == 1.0, w, w * rexp * x ** (rexp - 1.0))


def _node_cost(Y, u, w, rexp, C, q):
    n = u.shape[-1]
    return np.sum(w * Y[..., 1:n + 1] ** rexp + C * u ** q, axis=-1)


def _adj_rhs(p, y, u, M, sigma, rho, beta, w, rexp):
    n = u.shape[0]
    s = y[0]
    x = y[1:n + 1]
    eta = p[1] - p[0]
    pr = p[n + 1]
    slack = beta - u
    out = np.empty(n + 2)
    out[0] = -eta * (slack @ x)
    out[1:n + 1] = -_nu_grad(x, w, rexp) - eta * s * slack - M.T @ p[1:n + 1] - pr * sigma
    out[n + 1] = rho * (pr - p[0])
    return out


def rk4_adjoint(Y, u, h, M, sigma, rho, beta, w, rexp):
    steps = u.shape[0] - 1
    P = np.zeros((steps + 1, u.shape[1] + 2))
    for k in range(steps, 0, -1):
        p = P[k]
        ym = 0.5 * (Y[k] + Y[k - 1])
        um = 0.5 * (u[k] + u[k - 1])
        k1 = _adj_rhs(p, Y[k], u[k], M, sigma, rho, beta, w, rexp)
        k2 = _adj_rhs(p - 0.5 * h * k1, ym, um, M, sigma, rho, beta, w, rexp)
        k3 = _adj_rhs(p - 0.5 * h * k2, ym, um, M, sigma, rho, beta, w, rexp)
        k4 = _adj_rhs(p - h * k3, Y[k - 1], u[k - 1], M, sigma, rho, beta, w, rexp)
        P[k - 1] = p - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return P


def _vjp(y, u, v, M, sigma, mu, rho, beta):
    n = u.shape[0]
    s = y[0]
    x = y[1:n + 1]
    slack = beta - u
    lift = v[1] - v[0]
    vy = np.zeros_like(y)
    vy[0] = (slack @ x) * lift
    vy[1:n + 1] = s * slack * lift + M.T @ v[1:n + 1] + sigma * v[n + 1] + mu * v[n + 2]
    vy[n + 1] = rho * (v[0] - v[n + 1])
    return vy, -s * x * lift


def discrete_cost_gradient(Y, u, h, M, sigma, mu, rho, beta, w, rexp, C, q):
    steps = u.shape[0] - 1
    n = u.shape[1]
    wts = np.full(steps + 1, h)
    wts[0] = wts[-1] = 0.5 * h
    safe = np.where(u > 0.0, u, 1.0)
    G = wts[:, None] * np.where(q == 1.0, C, np.where(u > 0.0, C * q * safe ** (q - 1.0), 0.0))
    lam = np.zeros(Y.shape[1])
    lam[1:n + 1] = 0.5 * h * _nu_grad(Y[steps, 1:n + 1], w, rexp)
    for k in range(steps - 1, -1, -1):
        y = Y[k]
        u0, u1 = u[k], u[k + 1]
        um = 0.5 * (u0 + u1)
        k1 = _rhs(y, u0, M, sigma, mu, rho, beta)
        y2 = y + 0.5 * h * k1
        k2 = _rhs(y2, um, M, sigma, mu, rho, beta)
        y3 = y + 0.5 * h * k2
        k3 = _rhs(y3, um, M, sigma, mu, rho, beta)
        y4 = y + h * k3
        ybar = lam.copy()
        a4, g4 = _vjp(y4, u1, (h / 6.0) * lam, M, sigma, mu, rho, beta)
        a3, g3 = _vjp(y3, um, (h / 3.0) * lam + h * a4, M, sigma, mu, rho, beta)
        a2, g2 = _vjp(y2, um, (h / 3.0) * lam + 0.5 * h * a3, M, sigma, mu, rho, beta)
        a1, g1 = _vjp(y, u0, (h / 6.0) * lam + 0.5 * h * a2, M, sigma, mu, rho, beta)
        ybar += a4 + a3 + a2 + a1
        half = 0.5 * (g2 + g3)
        G[k] += g1 + half
        G[k + 1] += g4 + half
        ybar[1:n + 1] += wts[k] * _nu_grad(y[1:n + 1], w, rexp)
        lam = ybar
    return G


def exhaustive_piecewise(y0, h, steps, bounds, vals, M, sigma, mu, rho, beta,
                         w, rexp, C, q, batch=4096):
    n, L = vals.shape
    P = bounds.shape[0]
    per_piece = L ** n
    total = per_piece ** P
    piece_of = np.searchsorted(bounds, np.arange(steps + 1), side="right") - 1
    digits = L ** np.arange(n)
    best = np.inf
    best_idx = 0
    for lo in range(0, total, batch):
        idx = np.arange(lo, min(lo + batch, total))
        # choice[:, p] is the per-piece index, piece 0 most significant
        choice = (idx[:, None] // (per_piece ** np.arange(P - 1, -1, -1))) % per_piece
        levels = (choice[:, :, None] // digits) % L          # (B, P, n)
        ctrl = vals[np.arange(n), levels]                     # (B, P, n)
        y = np.tile(y0, (idx.size, 1))
        u_prev = ctrl[:, piece_of[0]]
        acc = 0.5 * h * _node_cost(y, u_prev, w, rexp, C, q)
        for k in range(steps):
            u_next = ctrl[:, piece_of[k + 1]]
            y = _step(y, u_prev, u_next, h, M, sigma, mu, rho, beta)
            f = _node_cost(y, u_next, w, rexp, C, q)
            acc += (0.5 * h if k + 1 == steps else h) * f
            u_prev = u_next
        j = int(np.argmin(acc))
        if acc[j] < best:
            best = float(acc[j])
            best_idx = int(idx[j])
    choice = (best_idx // (per_piece ** np.arange(P - 1, -1, -1))) % per_piece
    return choice.astype(np.int64), best
