"""Pure-Python fallback for the compiled kernels in ``_kernels.pyx``.

Same entry points, same arithmetic order and the same sequence of generator
calls (``random``, ``standard_normal``, ``standard_exponential``), so either
backend turns a given seed into the same numbers.
"""
from math import cos, exp, fabs, log, pi, sin, sqrt

import numpy as np
from scipy.special import ndtr, ndtri

from dejitter.errors import EnvelopeError, SamplerError

BACKEND = "python"

SING_EPS = 1e-9
TAIL = 4.0
NARROW = 0.2
MIN_WIDTH = 1e-15
ENVELOPE_SLACK = 1e-9
TN_MAX_TRIES = 10_000_000

(REJ_TRIES, REJ_ACCEPTS, FALLBACKS, SLICE_DRAWS, SHRINKS,
 TN_INVERSION, TN_EXPONENTIAL, TN_UNIFORM, TN_REJECTS) = range(9)
N_STATS = 9
MODE_REJECTION = 0
MODE_SLICE = 1


class _Basis:
    __slots__ = ("K", "cphi", "sphi")

    def __init__(self, K, M):
        phi = np.pi * np.arange(K) / K
        self.K = K
        self.cphi = np.cos(phi).tolist()
        self.sphi = np.sin(phi).tolist()


def _row(t, b):
    K = b.K
    th = pi * t / K
    st = sin(th)
    ct = cos(th)
    num = sin(pi * t)
    out = [0.0] * K
    sgn = 1.0
    for k in range(K):
        d = st * b.cphi[k] - ct * b.sphi[k]
        if fabs(d) < SING_EPS:
            j = round((t - k) / K)
            out[k] = 1.0 if (j * (K - 1)) % 2 == 0 else -1.0
        else:
            out[k] = sgn * num / (K * d)
        sgn = -sgn
    return out


def _row_dot(t, x, b):
    acc = 0.0
    for hk, xk in zip(_row(t, b), x):
        acc += hk * xk
    return acc


# ---------------------------------------------------------------- truncnorm

def _uniform_proposal(a, b, rng, st):
    if a > 0:
        m = a
    elif b < 0:
        m = b
    else:
        m = 0.0
    for _ in range(TN_MAX_TRIES):
        x = a + (b - a) * rng.random()
        if rng.random() < exp(0.5 * (m * m - x * x)):
            return x
        st[TN_REJECTS] += 1
    raise SamplerError("uniform-proposal truncated normal failed to accept")


def _exp_tail(a, b, rng, st):
    alpha = 0.5 * (a + sqrt(a * a + 4.0))
    for _ in range(TN_MAX_TRIES):
        x = a + rng.standard_exponential() / alpha
        if x > b:
            st[TN_REJECTS] += 1
            continue
        dx = x - alpha
        if rng.random() < exp(-0.5 * dx * dx):
            return x
        st[TN_REJECTS] += 1
    raise SamplerError("exponential-proposal truncated normal failed to accept")


def _invert(a, b, rng):
    pa = float(ndtr(a))
    pb = float(ndtr(b))
    x = float(ndtri(pa + rng.random() * (pb - pa)))
    if x < a:
        return a
    if x > b:
        return b
    return x


def _std_truncnorm(a, b, rng, st):
    w = b - a
    if a > 0:
        m = a
    elif b < 0:
        m = -b
    else:
        m = 0.0
    if w < NARROW and w * m < 1.0:
        st[TN_UNIFORM] += 1
        return _uniform_proposal(a, b, rng, st)
    if a > TAIL:
        st[TN_EXPONENTIAL] += 1
        return _exp_tail(a, b, rng, st)
    if b < -TAIL:
        st[TN_EXPONENTIAL] += 1
        return -_exp_tail(-b, -a, rng, st)
    st[TN_INVERSION] += 1
    if a > 0:
        return -_invert(-b, -a, rng)
    return _invert(a, b, rng)


def _truncnorm(mu, sigma, lo, hi, rng, st):
    v = mu + sigma * _std_truncnorm((lo - mu) / sigma, (hi - mu) / sigma, rng, st)
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def truncnorm_draws(mu, sigma, lo, hi, n, rng, stats):
    """``n`` draws from N(mu, sigma^2) restricted to [lo, hi]."""
    mu, sigma, lo, hi = float(mu), float(sigma), float(lo), float(hi)
    if not (sigma > 0 and lo < hi):
        raise ValueError("need sigma > 0 and lo < hi")
    out = np.empty(n)
    for i in range(n):
        out[i] = _truncnorm(mu, sigma, lo, hi, rng, stats)
    return out


# ---------------------------------------------------------------- jitter draws

class _ZTarget:
    __slots__ = ("tn", "y", "inv2sw2", "inv2sz2", "sigma_z", "x", "basis")

    def __init__(self, x, basis, sigma_z, sigma_w):
        self.inv2sw2 = 0.5 / (sigma_w * sigma_w)
        self.inv2sz2 = 0.5 / (sigma_z * sigma_z)
        self.sigma_z = sigma_z
        self.x = x
        self.basis = basis

    def loglik(self, z):
        r = self.y - _row_dot(self.tn + z, self.x, self.basis)
        return -r * r * self.inv2sw2

    def logf(self, z):
        return self.loglik(z) - z * z * self.inv2sz2


def _slice_z(z0, tg, rng, st):
    lu = tg.logf(z0) + log(1.0 - rng.random())
    bound = tg.sigma_z * sqrt(-2.0 * lu)
    L, R = -bound, bound
    if z0 < L:
        L = z0
    if z0 > R:
        R = z0
    st[SLICE_DRAWS] += 1
    while True:
        z = L + (R - L) * rng.random()
        if tg.logf(z) >= lu:
            return z
        st[SHRINKS] += 1
        if z < z0:
            L = z
        else:
            R = z
        if R - L < MIN_WIDTH:
            raise SamplerError("slice interval collapsed without finding the slice")


def _reject_z(z0, tg, xnorm, max_tries, rng, st):
    ay = fabs(tg.y)
    log_c = 0.0
    if ay > 2.0 * xnorm:
        log_c = -(tg.y * tg.y - 2.0 * ay * xnorm) * tg.inv2sw2
    for _ in range(max_tries):
        st[REJ_TRIES] += 1
        z = tg.sigma_z * rng.standard_normal()
        la = tg.loglik(z) - log_c
        if la > ENVELOPE_SLACK:
            raise EnvelopeError(f"envelope violated: log ratio {la}")
        if rng.random() < exp(la):
            st[REJ_ACCEPTS] += 1
            return z
    st[FALLBACKS] += 1
    return _slice_z(z0, tg, rng, st)


def _xnorm(x):
    s = 0.0
    for v in x:
        s += v * v
    return sqrt(s)


def z_draws(n, z_starts, x, y_n, K, M, sigma_z, sigma_w, mode, max_tries, rng, stats):
    """One conditional jitter draw for sample ``n`` from each start in ``z_starts``."""
    xs = [float(v) for v in x]
    tg = _ZTarget(xs, _Basis(K, M), float(sigma_z), float(sigma_w))
    tg.tn = n / M
    tg.y = float(y_n)
    xnorm = _xnorm(xs)
    out = np.empty(len(z_starts))
    for i, z0 in enumerate(z_starts):
        if mode == MODE_SLICE:
            out[i] = _slice_z(float(z0), tg, rng, stats)
        else:
            out[i] = _reject_z(float(z0), tg, xnorm, max_tries, rng, stats)
    return out


def z_logdensity(z, n, x, y_n, K, M, sigma_z, sigma_w):
    """Unnormalized log full conditional of z_n (constants dropped)."""
    tg = _ZTarget([float(v) for v in x], _Basis(K, M), float(sigma_z), float(sigma_w))
    tg.tn = n / M
    tg.y = float(y_n)
    return np.array([tg.logf(float(v)) for v in z])


def psinc_matrix(z, K, M):
    b = _Basis(K, M)
    return np.array([_row(n / M + float(zn), b) for n, zn in enumerate(z)]).reshape(len(z), K)


# ---------------------------------------------------------------- Gibbs sweep

def gibbs_sweep(y, x, z, H, r, K, M, sigma_z, sigma_w, mode, max_tries, rng, stats, update_z):
    """One systematic-scan sweep: every z_n in order, then every x_k in order.

    ``x`` and ``z`` are updated in place; ``H`` and ``r`` are work buffers
    holding H(z) and y - H(z) x on return.
    """
    N = len(y)
    b = _Basis(K, M)
    ys = y.tolist()
    xs = x.tolist()
    zs = z.tolist()
    if update_z:
        tg = _ZTarget(xs, b, float(sigma_z), float(sigma_w))
        xnorm = _xnorm(xs)
        for n in range(N):
            tg.tn = n / M
            tg.y = ys[n]
            if mode == MODE_SLICE:
                zs[n] = _slice_z(zs[n], tg, rng, stats)
            else:
                zs[n] = _reject_z(zs[n], tg, xnorm, max_tries, rng, stats)
    rows = []
    rs = []
    for n in range(N):
        row = _row(n / M + zs[n], b)
        acc = 0.0
        for k in range(K):
            acc += row[k] * xs[k]
        rows.append(row)
        rs.append(ys[n] - acc)
    for k in range(K):
        c = 0.0
        g = 0.0
        for n in range(N):
            h = rows[n][k]
            c += h * h
            g += h * rs[n]
        if not c > 0:
            raise SamplerError(f"column {k} of H(z) has zero norm")
        mu = xs[k] + g / c
        s = sigma_w / sqrt(c)
        xn = _truncnorm(mu, s, -1.0, 1.0, rng, stats)
        delta = xn - xs[k]
        for n in range(N):
            rs[n] -= rows[n][k] * delta
        xs[k] = xn
    x[:] = xs
    z[:] = zs
    H[:, :] = rows
    r[:] = rs
