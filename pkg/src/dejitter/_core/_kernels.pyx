# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops for the Gibbs samplers.

Mirrors ``_kernels_py`` draw for draw: both consume the bit generator through
next_double, the ziggurat normal and the ziggurat exponential in the same
order, so a seed produces the same chain on either backend.
"""
import numpy as np

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport sin, cos, log, exp, sqrt, fabs, lround, M_PI
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport (
    random_standard_uniform, random_standard_normal, random_standard_exponential,
)
cimport scipy.special.cython_special as csc

from dejitter.errors import EnvelopeError, SamplerError

BACKEND = "cython"

cdef double SING_EPS = 1e-9
cdef double TAIL = 4.0
cdef double NARROW = 0.2
cdef double MIN_WIDTH = 1e-15
cdef double ENVELOPE_SLACK = 1e-9
cdef long long TN_MAX_TRIES = 10000000

# stats slots and modes; the numbering is shared with _kernels_py
cdef enum:
    REJ_TRIES = 0
    REJ_ACCEPTS = 1
    FALLBACKS = 2
    SLICE_DRAWS = 3
    SHRINKS = 4
    TN_INVERSION = 5
    TN_EXPONENTIAL = 6
    TN_UNIFORM = 7
    TN_REJECTS = 8
    MODE_REJECTION = 0
    MODE_SLICE = 1

N_STATS = 9


cdef inline bitgen_t* _bitgen(object rng) except NULL:
    return <bitgen_t*> PyCapsule_GetPointer(rng.bit_generator.capsule, "BitGenerator")


cdef struct Basis:
    int K
    double M
    double* cphi
    double* sphi


cdef inline double _psinc_term(double num, double d, double t, int k, int K, double sgn) noexcept nogil:
    cdef long j
    if fabs(d) < SING_EPS:
        j = lround((t - k) / K)
        return 1.0 if (j * (K - 1)) % 2 == 0 else -1.0
    return sgn * num / (K * d)


cdef inline double _row_dot(double t, const double* x, Basis* b) noexcept nogil:
    cdef double th = M_PI * t / b.K
    cdef double st = sin(th)
    cdef double ct = cos(th)
    cdef double num = sin(M_PI * t)
    cdef double acc = 0.0, sgn = 1.0, d
    cdef int k
    for k in range(b.K):
        d = st * b.cphi[k] - ct * b.sphi[k]
        acc += _psinc_term(num, d, t, k, b.K, sgn) * x[k]
        sgn = -sgn
    return acc


cdef inline void _row_fill(double t, double* out, Basis* b) noexcept nogil:
    cdef double th = M_PI * t / b.K
    cdef double st = sin(th)
    cdef double ct = cos(th)
    cdef double num = sin(M_PI * t)
    cdef double sgn = 1.0, d
    cdef int k
    for k in range(b.K):
        d = st * b.cphi[k] - ct * b.sphi[k]
        out[k] = _psinc_term(num, d, t, k, b.K, sgn)
        sgn = -sgn


cdef class _BasisHolder:
    cdef double[::1] cphi
    cdef double[::1] sphi
    cdef Basis b

    def __cinit__(self, int K, int M):
        phi = np.pi * np.arange(K) / K
        self.cphi = np.ascontiguousarray(np.cos(phi))
        self.sphi = np.ascontiguousarray(np.sin(phi))
        self.b.K = K
        self.b.M = M
        self.b.cphi = &self.cphi[0]
        self.b.sphi = &self.sphi[0]


# ---------------------------------------------------------------- truncnorm

cdef double _uniform_proposal(double a, double b, bitgen_t* bg, long long* st) except? -1e300:
    cdef double m, x
    cdef long long i
    if a > 0:
        m = a
    elif b < 0:
        m = b
    else:
        m = 0.0
    for i in range(TN_MAX_TRIES):
        x = a + (b - a) * random_standard_uniform(bg)
        if random_standard_uniform(bg) < exp(0.5 * (m * m - x * x)):
            return x
        st[TN_REJECTS] += 1
    raise SamplerError("uniform-proposal truncated normal failed to accept")


cdef double _exp_tail(double a, double b, bitgen_t* bg, long long* st) except? -1e300:
    # right tail [a, b], a > 0: shifted exponential proposal with optimal rate
    cdef double alpha = 0.5 * (a + sqrt(a * a + 4.0))
    cdef double x, dx
    cdef long long i
    for i in range(TN_MAX_TRIES):
        x = a + random_standard_exponential(bg) / alpha
        if x > b:
            st[TN_REJECTS] += 1
            continue
        dx = x - alpha
        if random_standard_uniform(bg) < exp(-0.5 * dx * dx):
            return x
        st[TN_REJECTS] += 1
    raise SamplerError("exponential-proposal truncated normal failed to accept")


cdef double _invert(double a, double b, bitgen_t* bg) except? -1e300:
    cdef double pa = csc.ndtr(a)
    cdef double pb = csc.ndtr(b)
    cdef double x = csc.ndtri(pa + random_standard_uniform(bg) * (pb - pa))
    if x < a:
        return a
    if x > b:
        return b
    return x


cdef double _std_truncnorm(double a, double b, bitgen_t* bg, long long* st) except? -1e300:
    cdef double w = b - a
    cdef double m
    if a > 0:
        m = a
    elif b < 0:
        m = -b
    else:
        m = 0.0
    if w < NARROW and w * m < 1.0:
        st[TN_UNIFORM] += 1
        return _uniform_proposal(a, b, bg, st)
    if a > TAIL:
        st[TN_EXPONENTIAL] += 1
        return _exp_tail(a, b, bg, st)
    if b < -TAIL:
        st[TN_EXPONENTIAL] += 1
        return -_exp_tail(-b, -a, bg, st)
    st[TN_INVERSION] += 1
    if a > 0:
        return -_invert(-b, -a, bg)
    return _invert(a, b, bg)


cdef double _truncnorm(double mu, double sigma, double lo, double hi, bitgen_t* bg, long long* st) except? -1e300:
    cdef double v = mu + sigma * _std_truncnorm((lo - mu) / sigma, (hi - mu) / sigma, bg, st)
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


def truncnorm_draws(double mu, double sigma, double lo, double hi, Py_ssize_t n, rng, long long[::1] stats):
    """``n`` draws from N(mu, sigma^2) restricted to [lo, hi]."""
    if not (sigma > 0 and lo < hi):
        raise ValueError("need sigma > 0 and lo < hi")
    out = np.empty(n)
    cdef double[::1] o = out
    cdef bitgen_t* bg = _bitgen(rng)
    cdef Py_ssize_t i
    with rng.bit_generator.lock:
        for i in range(n):
            o[i] = _truncnorm(mu, sigma, lo, hi, bg, &stats[0])
    return out


# ---------------------------------------------------------------- jitter draws

cdef struct ZTarget:
    double tn
    double y
    double inv2sw2
    double inv2sz2
    double sigma_z
    const double* x
    Basis* basis


cdef inline double _loglik_z(double z, ZTarget* tg) noexcept nogil:
    cdef double r = tg.y - _row_dot(tg.tn + z, tg.x, tg.basis)
    return -r * r * tg.inv2sw2


cdef inline double _logf_z(double z, ZTarget* tg) noexcept nogil:
    return _loglik_z(z, tg) - z * z * tg.inv2sz2


cdef double _slice_z(double z0, ZTarget* tg, bitgen_t* bg, long long* st) except? -1e300:
    cdef double lu = _logf_z(z0, tg) + log(1.0 - random_standard_uniform(bg))
    cdef double bound = tg.sigma_z * sqrt(-2.0 * lu)
    cdef double L = -bound, R = bound, z
    if z0 < L:
        L = z0
    if z0 > R:
        R = z0
    st[SLICE_DRAWS] += 1
    while True:
        z = L + (R - L) * random_standard_uniform(bg)
        if _logf_z(z, tg) >= lu:
            return z
        st[SHRINKS] += 1
        if z < z0:
            L = z
        else:
            R = z
        if R - L < MIN_WIDTH:
            raise SamplerError("slice interval collapsed without finding the slice")


cdef double _reject_z(double z0, ZTarget* tg, double xnorm, long long max_tries,
                      bitgen_t* bg, long long* st) except? -1e300:
    cdef double ay = fabs(tg.y)
    cdef double log_c = 0.0, z, la
    cdef long long i
    if ay > 2.0 * xnorm:
        log_c = -(tg.y * tg.y - 2.0 * ay * xnorm) * tg.inv2sw2
    for i in range(max_tries):
        st[REJ_TRIES] += 1
        z = tg.sigma_z * random_standard_normal(bg)
        la = _loglik_z(z, tg) - log_c
        if la > ENVELOPE_SLACK:
            raise EnvelopeError(f"envelope violated: log ratio {la}")
        if random_standard_uniform(bg) < exp(la):
            st[REJ_ACCEPTS] += 1
            return z
    st[FALLBACKS] += 1
    return _slice_z(z0, tg, bg, st)


cdef inline double _xnorm(const double* x, int K) noexcept nogil:
    cdef double s = 0.0
    cdef int k
    for k in range(K):
        s += x[k] * x[k]
    return sqrt(s)


def z_draws(Py_ssize_t n, double[::1] z_starts, const double[::1] x, double y_n, int K, int M,
            double sigma_z, double sigma_w, int mode, long long max_tries, rng, long long[::1] stats):
    """One conditional jitter draw for sample ``n`` from each start in ``z_starts``."""
    cdef _BasisHolder holder = _BasisHolder(K, M)
    cdef ZTarget tg
    tg.tn = n / <double> M
    tg.y = y_n
    tg.inv2sw2 = 0.5 / (sigma_w * sigma_w)
    tg.inv2sz2 = 0.5 / (sigma_z * sigma_z)
    tg.sigma_z = sigma_z
    tg.x = &x[0]
    tg.basis = &holder.b
    cdef double xnorm = _xnorm(&x[0], K)
    cdef Py_ssize_t i, m = z_starts.shape[0]
    out = np.empty(m)
    cdef double[::1] o = out
    cdef bitgen_t* bg = _bitgen(rng)
    with rng.bit_generator.lock:
        for i in range(m):
            if mode == MODE_SLICE:
                o[i] = _slice_z(z_starts[i], &tg, bg, &stats[0])
            else:
                o[i] = _reject_z(z_starts[i], &tg, xnorm, max_tries, bg, &stats[0])
    return out


def z_logdensity(double[::1] z, Py_ssize_t n, const double[::1] x, double y_n, int K, int M,
                 double sigma_z, double sigma_w):
    """Unnormalized log full conditional of z_n (constants dropped)."""
    cdef _BasisHolder holder = _BasisHolder(K, M)
    cdef ZTarget tg
    tg.tn = n / <double> M
    tg.y = y_n
    tg.inv2sw2 = 0.5 / (sigma_w * sigma_w)
    tg.inv2sz2 = 0.5 / (sigma_z * sigma_z)
    tg.sigma_z = sigma_z
    tg.x = &x[0]
    tg.basis = &holder.b
    out = np.empty(z.shape[0])
    cdef double[::1] o = out
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        o[i] = _logf_z(z[i], &tg)
    return out


def psinc_matrix(const double[::1] z, int K, int M):
    cdef _BasisHolder holder = _BasisHolder(K, M)
    cdef Py_ssize_t n, N = z.shape[0]
    H = np.empty((N, K))
    cdef double[:, ::1] h = H
    for n in range(N):
        _row_fill(n / <double> M + z[n], &h[n, 0], &holder.b)
    return H


# ---------------------------------------------------------------- Gibbs sweep

def gibbs_sweep(const double[::1] y, double[::1] x, double[::1] z, double[:, ::1] H, double[::1] r,
                int K, int M, double sigma_z, double sigma_w, int mode, long long max_tries,
                rng, long long[::1] stats, bint update_z):
    """One systematic-scan sweep: every z_n in order, then every x_k in order.

    ``x`` and ``z`` are updated in place; ``H`` and ``r`` are work buffers
    holding H(z) and y - H(z) x on return.
    """
    cdef _BasisHolder holder = _BasisHolder(K, M)
    cdef Py_ssize_t N = y.shape[0]
    cdef Py_ssize_t n
    cdef int k
    cdef ZTarget tg
    cdef double xnorm, c, g, mu, s, xn, delta, acc
    cdef bitgen_t* bg = _bitgen(rng)
    cdef long long* st = &stats[0]
    with rng.bit_generator.lock:
        if update_z:
            tg.inv2sw2 = 0.5 / (sigma_w * sigma_w)
            tg.inv2sz2 = 0.5 / (sigma_z * sigma_z)
            tg.sigma_z = sigma_z
            tg.x = &x[0]
            tg.basis = &holder.b
            xnorm = _xnorm(&x[0], K)
            for n in range(N):
                tg.tn = n / <double> M
                tg.y = y[n]
                if mode == MODE_SLICE:
                    z[n] = _slice_z(z[n], &tg, bg, st)
                else:
                    z[n] = _reject_z(z[n], &tg, xnorm, max_tries, bg, st)
        for n in range(N):
            _row_fill(n / <double> M + z[n], &H[n, 0], &holder.b)
            acc = 0.0
            for k in range(K):
                acc += H[n, k] * x[k]
            r[n] = y[n] - acc
        for k in range(K):
            c = 0.0
            g = 0.0
            for n in range(N):
                c += H[n, k] * H[n, k]
                g += H[n, k] * r[n]
            if not c > 0:
                raise SamplerError(f"column {k} of H(z) has zero norm")
            mu = x[k] + g / c
            s = sigma_w / sqrt(c)
            xn = _truncnorm(mu, s, -1.0, 1.0, bg, st)
            delta = xn - x[k]
            for n in range(N):
                r[n] -= H[n, k] * delta
            x[k] = xn
