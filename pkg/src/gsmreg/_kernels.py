"""Compiled inner kernels for the blocked Gibbs sweep.

Everything here operates on the group-contiguous layout prepared by
``gibbs.GramCache``: genotypes transposed to (d, n) with group rows adjacent,
the residual transposed to (c, n), and the per-group Gram blocks packed into
one flat buffer. Hot loops run over the subject axis contiguously so cost per
flop stays flat across problem sizes, which is what keeps wall-clock growth
close to linear in n, d and c separately.

Draws consume a ``np.random.Generator`` directly; numba executes the same
bit stream as numpy, so results match a pure-numpy realization of the same
update order exactly.
"""
import numpy as np
from numba import njit

JITTER_SCALE = 1e-10


@njit(cache=True)
def ig_draw_scalar(rng, mu, lam):
    # Inverse-Gaussian(mean=mu, shape=lam) via the squared-normal root
    # transform with a Bernoulli flip between the two quadratic roots.
    # The smaller root is computed in rationalized form: no cancellation
    # for extreme mu (which arises when a block norm hits the clamp floor).
    z = rng.standard_normal()
    s = mu * z * z
    if s > 0.0:
        x = mu * (1.0 - 2.0 * s / (s + np.sqrt(s * s + 4.0 * lam * s)))
    else:
        x = mu
    if rng.random() <= mu / (mu + x):
        return x
    return mu * mu / x


@njit(cache=True)
def ig_draw_vector(rng, mu, lam, out):
    for i in range(mu.shape[0]):
        out[i] = ig_draw_scalar(rng, mu[i], lam)


@njit(cache=True)
def cholesky_in_place(M, m):
    """Lower Cholesky of the leading m x m block, in place. False if not PD."""
    for i in range(m):
        for j in range(i):
            s = M[i, j]
            for p in range(j):
                s -= M[i, p] * M[j, p]
            M[i, j] = s / M[j, j]
        s = M[i, i]
        for p in range(i):
            s -= M[i, p] * M[i, p]
        if s <= 0.0:
            return False
        M[i, i] = np.sqrt(s)
    return True


@njit(cache=True)
def block_rhs(Xt, Rt, W, S_packed, s0, i0, m, out):
    """out = X_k^T (Y - X^(-k) W^(-k)) = X_k^T R + S_k W^(k), shape (m, c)."""
    c = Rt.shape[0]
    n = Rt.shape[1]
    for i in range(m):
        xi = Xt[i0 + i]
        for j in range(c):
            s = 0.0
            rj = Rt[j]
            for l in range(n):
                s += xi[l] * rj[l]
            out[i, j] = s
        for p in range(m):
            a = S_packed[s0 + i * m + p]
            for j in range(c):
                out[i, j] += a * W[i0 + p, j]


@njit(cache=True)
def block_precision(S_packed, s0, i0, m, tau2_k, omega2, out):
    """out[:m, :m] = S_k + Diag{1/tau2_k + 1/omega2_i}, the precision basis
    of the block conditional (the full precision is this divided by sigma2,
    Kronecker-expanded over the phenotype axis)."""
    it = 1.0 / tau2_k
    for i in range(m):
        for p in range(m):
            out[i, p] = S_packed[s0 + i * m + p]
        out[i, i] += it + 1.0 / omega2[i0 + i]


@njit(cache=True)
def update_block(rng, Xt, Rt, W, S_packed, s0, i0, m, tau2_k, omega2, sigma2, v, M):
    """Redraw the coefficient rows of one group from their exact conditional.

    The conditional of the stacked block is MVN with precision
    (S_k + D_k) (x) I_c / sigma2; with L the Cholesky factor of M = S_k + D_k,
    the draw W' = L^{-T}(L^{-1} rhs + sigma Z) realizes exactly mean + sigma
    L^{-T} Z, a reparameterization of that MVN needing only the m x m factor.

    Mutates W rows [i0, i0+m) and the residual Rt in place. Returns the
    number of jitter retries (0 or 1); -1 signals an unrecoverable
    factorization failure.
    """
    c = Rt.shape[0]
    n = Rt.shape[1]
    block_rhs(Xt, Rt, W, S_packed, s0, i0, m, v)
    block_precision(S_packed, s0, i0, m, tau2_k, omega2, M)
    jitter = 0
    ok = cholesky_in_place(M, m)
    if not ok:
        # possible only through numerical degeneracy since D_k > 0
        block_precision(S_packed, s0, i0, m, tau2_k, omega2, M)
        tr = 0.0
        for i in range(m):
            tr += M[i, i]
        for i in range(m):
            M[i, i] += JITTER_SCALE * tr
        jitter = 1
        ok = cholesky_in_place(M, m)
        if not ok:
            return -1
    # v <- L^{-1} rhs
    for i in range(m):
        for p in range(i):
            lip = M[i, p]
            for j in range(c):
                v[i, j] -= lip * v[p, j]
        inv = 1.0 / M[i, i]
        for j in range(c):
            v[i, j] *= inv
    sig = np.sqrt(sigma2)
    Z = rng.standard_normal((m, c))
    for i in range(m):
        for j in range(c):
            v[i, j] += sig * Z[i, j]
    # v <- L^{-T} v
    for i in range(m - 1, -1, -1):
        for p in range(i + 1, m):
            lpi = M[p, i]
            for j in range(c):
                v[i, j] -= lpi * v[p, j]
        inv = 1.0 / M[i, i]
        for j in range(c):
            v[i, j] *= inv
    # fold the block move into the residual, then commit the new rows
    for i in range(m):
        xi = Xt[i0 + i]
        for j in range(c):
            delta = v[i, j] - W[i0 + i, j]
            if delta != 0.0:
                rj = Rt[j]
                for l in range(n):
                    rj[l] -= delta * xi[l]
            W[i0 + i, j] = v[i, j]
    return jitter


@njit(cache=True)
def residual_ss(Rt):
    rss = 0.0
    for j in range(Rt.shape[0]):
        for l in range(Rt.shape[1]):
            rss += Rt[j, l] * Rt[j, l]
    return rss


@njit(cache=True)
def row_squares(W, out):
    for i in range(W.shape[0]):
        s = 0.0
        for j in range(W.shape[1]):
            s += W[i, j] * W[i, j]
        out[i] = s


@njit(cache=True)
def sigma2_b_star(Rt, W, tau2, omega2, starts, b_sigma, row_sq):
    """Scale of the noise-variance conditional: half the residual sum of
    squares plus half the precision-weighted coefficient mass plus b_sigma."""
    rss = residual_ss(Rt)
    row_squares(W, row_sq)
    pen = 0.0
    for k in range(starts.shape[0] - 1):
        it = 1.0 / tau2[k]
        for i in range(starts[k], starts[k + 1]):
            pen += (it + 1.0 / omega2[i]) * row_sq[i]
    return 0.5 * rss + 0.5 * pen + b_sigma


@njit(cache=True)
def sweep(rng, Xt, Rt, W, tau2, omega2, sigma2, starts, S_packed, s_off,
          lam1sq, lam2sq, a_sigma, b_sigma, floor, v, M, row_sq):
    """One full Gibbs sweep: sigma2, then tau2 (k = 1..K), then omega2
    (i = 1..d), then every coefficient block in group order.

    Returns (sigma2, jitter_events); sigma2 < 0 signals an aborted sweep.
    """
    d, n = Xt.shape
    c = Rt.shape[0]
    K = starts.shape[0] - 1
    b_star = sigma2_b_star(Rt, W, tau2, omega2, starts, b_sigma, row_sq)
    a_star = 0.5 * c * (n + d) + a_sigma
    sigma2 = 1.0 / rng.gamma(a_star, 1.0 / b_star)
    for k in range(K):
        fro2 = 0.0
        for i in range(starts[k], starts[k + 1]):
            fro2 += row_sq[i]
        if fro2 < floor:
            fro2 = floor
        tau2[k] = 1.0 / ig_draw_scalar(rng, np.sqrt(lam1sq * sigma2 / fro2), lam1sq)
    for i in range(d):
        r2 = row_sq[i]
        if r2 < floor:
            r2 = floor
        omega2[i] = 1.0 / ig_draw_scalar(rng, np.sqrt(lam2sq * sigma2 / r2), lam2sq)
    jitter_events = 0
    for k in range(K):
        i0 = starts[k]
        m = starts[k + 1] - i0
        r = update_block(rng, Xt, Rt, W, S_packed, s_off[k], i0, m,
                         tau2[k], omega2, sigma2, v[:m], M)
        if r < 0:
            return -1.0, jitter_events
        jitter_events += r
    return sigma2, jitter_events


@njit(cache=True)
def pointwise_loglik_from_residual(Rt, sigma2, out):
    """Per-subject log density given the current residual and sigma2."""
    c, n = Rt.shape
    const = -0.5 * c * np.log(2.0 * np.pi * sigma2)
    inv = 0.5 / sigma2
    for l in range(n):
        s = 0.0
        for j in range(c):
            s += Rt[j, l] * Rt[j, l]
        out[l] = const - s * inv
