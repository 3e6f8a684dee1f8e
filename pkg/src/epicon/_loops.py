"""Scalar-loop kernels, compiled with numba.njit when available.

Work arrays are allocated once per call; the inner time loops allocate
nothing.  Layouts follow ``epicon.kernels``.
"""

import numpy as np

from ._accel import kernel


@kernel(inline=True)
def _rhs(y, u, M, sigma, mu, rho, beta, out):
    n = u.shape[0]
    s = y[0]
    r = y[n + 1]
    force = 0.0
    for j in range(n):
        force += (beta[j] - u[j]) * y[1 + j]
    force *= s
    sx = 0.0
    mx = 0.0
    for i in range(n):
        acc = 0.0
        for j in range(n):
            acc += M[i, j] * y[1 + j]
        out[1 + i] = acc
        sx += sigma[i] * y[1 + i]
        mx += mu[i] * y[1 + i]
    out[0] = -force + rho * r
    out[1] += force
    out[n + 1] = sx - rho * r
    out[n + 2] = mx


@kernel(inline=True)
def _step(y, u0, u1, h, M, sigma, mu, rho, beta, um, k1, k2, k3, k4, tmp, out):
    m = y.shape[0]
    for i in range(u0.shape[0]):
        um[i] = 0.5 * (u0[i] + u1[i])
    _rhs(y, u0, M, sigma, mu, rho, beta, k1)
    for i in range(m):
        tmp[i] = y[i] + 0.5 * h * k1[i]
    _rhs(tmp, um, M, sigma, mu, rho, beta, k2)
    for i in range(m):
        tmp[i] = y[i] + 0.5 * h * k2[i]
    _rhs(tmp, um, M, sigma, mu, rho, beta, k3)
    for i in range(m):
        tmp[i] = y[i] + h * k3[i]
    _rhs(tmp, u1, M, sigma, mu, rho, beta, k4)
    for i in range(m):
        out[i] = y[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


@kernel
def rk4_forward(y0, u, h, M, sigma, mu, rho, beta):
    steps = u.shape[0] - 1
    n = u.shape[1]
    m = y0.shape[0]
    Y = np.empty((steps + 1, m))
    um = np.empty(n)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    for i in range(m):
        Y[0, i] = y0[i]
    for k in range(steps):
        _step(Y[k], u[k], u[k + 1], h, M, sigma, mu, rho, beta,
              um, k1, k2, k3, k4, tmp, Y[k + 1])
    return Y


@kernel(inline=True)
def _nu_grad_at(x_i, w_i, rexp_i):
    if rexp_i == 1.0:
        return w_i
    return w_i * rexp_i * x_i ** (rexp_i - 1.0)


@kernel(inline=True)
def _node_cost(y, u, w, rexp, C, q):
    total = 0.0
    for i in range(u.shape[0]):
        total += w[i] * y[1 + i] ** rexp[i] + C[i] * u[i] ** q[i]
    return total


@kernel(inline=True)
def _adj_rhs(p, y, u, M, sigma, rho, beta, w, rexp, out):
    n = u.shape[0]
    s = y[0]
    eta = p[1] - p[0]
    pr = p[n + 1]
    force = 0.0
    for j in range(n):
        force += (beta[j] - u[j]) * y[1 + j]
    out[0] = -eta * force
    for j in range(n):
        mt = 0.0
        for i in range(n):
            mt += M[i, j] * p[1 + i]
        out[1 + j] = (-_nu_grad_at(y[1 + j], w[j], rexp[j])
                      - eta * s * (beta[j] - u[j]) - mt - pr * sigma[j])
    out[n + 1] = rho * (pr - p[0])


@kernel
def rk4_adjoint(Y, u, h, M, sigma, rho, beta, w, rexp):
    steps = u.shape[0] - 1
    n = u.shape[1]
    m = Y.shape[1]
    c = n + 2
    P = np.zeros((steps + 1, c))
    ym = np.empty(m)
    um = np.empty(n)
    k1 = np.empty(c)
    k2 = np.empty(c)
    k3 = np.empty(c)
    k4 = np.empty(c)
    tmp = np.empty(c)
    for k in range(steps, 0, -1):
        p = P[k]
        for i in range(m):
            ym[i] = 0.5 * (Y[k, i] + Y[k - 1, i])
        for i in range(n):
            um[i] = 0.5 * (u[k, i] + u[k - 1, i])
        _adj_rhs(p, Y[k], u[k], M, sigma, rho, beta, w, rexp, k1)
        for i in range(c):
            tmp[i] = p[i] - 0.5 * h * k1[i]
        _adj_rhs(tmp, ym, um, M, sigma, rho, beta, w, rexp, k2)
        for i in range(c):
            tmp[i] = p[i] - 0.5 * h * k2[i]
        _adj_rhs(tmp, ym, um, M, sigma, rho, beta, w, rexp, k3)
        for i in range(c):
            tmp[i] = p[i] - h * k3[i]
        _adj_rhs(tmp, Y[k - 1], u[k - 1], M, sigma, rho, beta, w, rexp, k4)
        for i in range(c):
            P[k - 1, i] = p[i] - (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
    return P


@kernel(inline=True)
def _vjp_add(y, u, v, M, sigma, mu, rho, beta, ybar, ubar, vy):
    """ybar += J_y^T v, ubar += J_u^T v and also store J_y^T v in ``vy``."""
    n = u.shape[0]
    s = y[0]
    lift = v[1] - v[0]
    force = 0.0
    for j in range(n):
        force += (beta[j] - u[j]) * y[1 + j]
    vy[0] = force * lift
    for j in range(n):
        mt = 0.0
        for i in range(n):
            mt += M[i, j] * v[1 + i]
        vy[1 + j] = s * (beta[j] - u[j]) * lift + mt + sigma[j] * v[n + 1] + mu[j] * v[n + 2]
        ubar[j] += -s * y[1 + j] * lift
    vy[n + 1] = rho * (v[0] - v[n + 1])
    vy[n + 2] = 0.0
    for i in range(y.shape[0]):
        ybar[i] += vy[i]


@kernel
def discrete_cost_gradient(Y, u, h, M, sigma, mu, rho, beta, w, rexp, C, q):
    steps = u.shape[0] - 1
    n = u.shape[1]
    m = Y.shape[1]
    G = np.zeros((steps + 1, n))
    for k in range(steps + 1):
        wk = h if 0 < k < steps else 0.5 * h
        for i in range(n):
            if q[i] == 1.0:
                G[k, i] = wk * C[i]
            elif u[k, i] > 0.0:
                G[k, i] = wk * C[i] * q[i] * u[k, i] ** (q[i] - 1.0)
    lam = np.zeros(m)
    for i in range(n):
        lam[1 + i] = 0.5 * h * _nu_grad_at(Y[steps, 1 + i], w[i], rexp[i])
    um = np.empty(n)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    y2 = np.empty(m)
    y3 = np.empty(m)
    y4 = np.empty(m)
    b1 = np.empty(m)
    b2 = np.empty(m)
    b3 = np.empty(m)
    b4 = np.empty(m)
    vy = np.empty(m)
    ybar = np.empty(m)
    g0 = np.empty(n)
    gm = np.empty(n)
    g1 = np.empty(n)
    for k in range(steps - 1, -1, -1):
        y = Y[k]
        for i in range(n):
            um[i] = 0.5 * (u[k, i] + u[k + 1, i])
            g0[i] = 0.0
            gm[i] = 0.0
            g1[i] = 0.0
        _rhs(y, u[k], M, sigma, mu, rho, beta, k1)
        for i in range(m):
            y2[i] = y[i] + 0.5 * h * k1[i]
        _rhs(y2, um, M, sigma, mu, rho, beta, k2)
        for i in range(m):
            y3[i] = y[i] + 0.5 * h * k2[i]
        _rhs(y3, um, M, sigma, mu, rho, beta, k3)
        for i in range(m):
            y4[i] = y[i] + h * k3[i]
            b4[i] = (h / 6.0) * lam[i]
            b3[i] = (h / 3.0) * lam[i]
            b2[i] = (h / 3.0) * lam[i]
            b1[i] = (h / 6.0) * lam[i]
            ybar[i] = lam[i]
        _vjp_add(y4, u[k + 1], b4, M, sigma, mu, rho, beta, ybar, g1, vy)
        for i in range(m):
            b3[i] += h * vy[i]
        _vjp_add(y3, um, b3, M, sigma, mu, rho, beta, ybar, gm, vy)
        for i in range(m):
            b2[i] += 0.5 * h * vy[i]
        _vjp_add(y2, um, b2, M, sigma, mu, rho, beta, ybar, gm, vy)
        for i in range(m):
            b1[i] += 0.5 * h * vy[i]
        _vjp_add(y, u[k], b1, M, sigma, mu, rho, beta, ybar, g0, vy)
        for i in range(n):
            G[k, i] += g0[i] + 0.5 * gm[i]
            G[k + 1, i] += g1[i] + 0.5 * gm[i]
        wk = h if k > 0 else 0.5 * h
        for i in range(n):
            ybar[1 + i] += wk * _nu_grad_at(y[1 + i], w[i], rexp[i])
        for i in range(m):
            lam[i] = ybar[i]
    return G


@kernel(inline=True)
def _fill_piece(choice, vals, out):
    n = vals.shape[0]
    L = vals.shape[1]
    c = choice
    for i in range(n):
        out[i] = vals[i, c % L]
        c //= L


@kernel
def exhaustive_piecewise(y0, h, steps, bounds, vals, M, sigma, mu, rho, beta,
                         w, rexp, C, q):
    n = vals.shape[0]
    L = vals.shape[1]
    P = bounds.shape[0]
    m = y0.shape[0]
    per_piece = L ** n
    last = np.empty(P, dtype=np.int64)
    for p in range(P - 1):
        last[p] = bounds[p + 1] - 1
    last[P - 1] = steps
    ck_y = np.empty((P, m))
    ck_cost = np.empty(P)
    choice = np.zeros(P, dtype=np.int64)
    best_choice = np.zeros(P, dtype=np.int64)
    best = np.inf
    cur = np.empty(n)
    prev = np.empty(n)
    um = np.empty(n)
    k1 = np.empty(m)
    k2 = np.empty(m)
    k3 = np.empty(m)
    k4 = np.empty(m)
    tmp = np.empty(m)
    y = np.empty(m)
    ynew = np.empty(m)
    start = 0
    while True:
        pruned = False
        for p in range(start, P):
            _fill_piece(choice[p], vals, cur)
            if p == 0:
                for i in range(m):
                    y[i] = y0[i]
                for i in range(n):
                    prev[i] = cur[i]
                k0 = 0
                acc = 0.0
            else:
                for i in range(m):
                    y[i] = ck_y[p - 1, i]
                _fill_piece(choice[p - 1], vals, prev)
                k0 = last[p - 1]
                acc = ck_cost[p - 1]
            f_prev = _node_cost(y, prev, w, rexp, C, q)
            for k in range(k0, last[p]):
                if k == k0:
                    _step(y, prev, cur, h, M, sigma, mu, rho, beta, um, k1, k2, k3, k4, tmp, ynew)
                else:
                    _step(y, cur, cur, h, M, sigma, mu, rho, beta, um, k1, k2, k3, k4, tmp, ynew)
                for i in range(m):
                    y[i] = ynew[i]
                f_next = _node_cost(y, cur, w, rexp, C, q)
                acc += 0.5 * h * (f_prev + f_next)
                f_prev = f_next
                # the running cost is nonnegative, so no completion of this
                # prefix can beat the incumbent any more
                if acc >= best:
                    pruned = True
                    break
            if pruned:
                for j in range(p + 1, P):
                    choice[j] = per_piece - 1
                break
            for i in range(m):
                ck_y[p, i] = y[i]
            ck_cost[p] = acc
        if not pruned and ck_cost[P - 1] < best:
            best = ck_cost[P - 1]
            for p in range(P):
                best_choice[p] = choice[p]
        j = P - 1
        while j >= 0:
            choice[j] += 1
            if choice[j] < per_piece:
                break
            choice[j] = 0
            j -= 1
        if j < 0:
            break
        start = j
    return best_choice, best
