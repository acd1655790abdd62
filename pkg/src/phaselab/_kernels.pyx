# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops: online SGD on the phase model and per-example MLP training.

Random numbers come from the numpy BitGenerator behind a Generator, drawn in
the same order as the pure-Python fallback (per step: N standard normals, one
uniform for the label, one uniform for the corrector on planted steps), so
both backends consume identical streams.
"""
import numpy as np
cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport atan2, cos, sin, sqrt, fabs, log, log1p, exp, tanh, floor, NAN
from numpy.random cimport bitgen_t
from numpy.random.c_distributions cimport random_standard_normal

cnp.import_array()

DEF HERMITE4 = 0
DEF LOGCOSH = 1
DEF LOG2 = 0.6931471805599453
DEF HALF_PI = 1.5707963267948966


cdef inline double act_value(int code, double s) noexcept nogil:
    cdef double s2, a
    if code == HERMITE4:
        s2 = s * s
        return s2 * s2 - 6.0 * s2 + 3.0
    a = fabs(s)
    return a + log1p(exp(-2.0 * a)) - LOG2


cdef inline double act_deriv(int code, double s) noexcept nogil:
    if code == HERMITE4:
        return 4.0 * s * s * s - 12.0 * s
    return tanh(s)


cdef inline double dot(const double* a, const double* b, Py_ssize_t n) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(n):
        acc += a[i] * b[i]
    return acc


cdef bitgen_t* _bitgen(object generator) except NULL:
    capsule = generator.bit_generator.capsule
    return <bitgen_t*> PyCapsule_GetPointer(capsule, "BitGenerator")


def run_sgd(object generator,
            double[::1] w,
            const double[:, ::1] sqrt_vecs,
            const double[::1] sqrt_coef,
            const double[::1] u,
            const double[::1] v,
            double epsilon,
            bint corrector,
            int act_code,
            bint spherical,
            double delta,
            double beta,
            double direction,
            const long long[::1] record_steps,
            const double[:, ::1] proj,
            Py_ssize_t window):
    """Run online SGD in place on ``w``; see phaselab.sgd.run_online.

    Returns (projections (R, P), squared norms (R,), windowed losses (R,)).
    Raises FloatingPointError if a spherical step hits a zero norm.
    """
    cdef Py_ssize_t N = w.shape[0]
    cdef Py_ssize_t K = sqrt_vecs.shape[0]
    cdef Py_ssize_t P = proj.shape[0]
    cdef Py_ssize_t R = record_steps.shape[0]
    cdef Py_ssize_t i, j, r = 0
    cdef long long t, total = record_steps[R - 1] if R > 0 else 0
    cdef bitgen_t* rng = _bitgen(generator)

    out_proj_arr = np.zeros((R, P))
    out_norm_arr = np.zeros(R)
    out_loss_arr = np.full(R, np.nan)
    cdef double[:, ::1] out_proj = out_proj_arr
    cdef double[::1] out_norm = out_norm_arr
    cdef double[::1] out_loss = out_loss_arr

    xbuf = np.empty(N)
    ring_arr = np.zeros(max(window, 1))
    cdef double[::1] x = xbuf
    cdef double[::1] ring = ring_arr
    cdef Py_ssize_t ring_pos = 0, ring_fill = 0
    cdef double ring_sum = 0.0

    cdef double y, proj_c, a, b, phi, theta, c, s_, da, db, s, gs, nrm, lossval, shrink, coef
    cdef int zero_norm = 0

    with generator.bit_generator.lock, nogil:
        # record the initial state if requested
        while r < R and record_steps[r] == 0:
            for j in range(P):
                out_proj[r, j] = dot(&w[0], &proj[j, 0], N)
            out_norm[r] = dot(&w[0], &w[0], N)
            r += 1
        t = 0
        while t < total:
            t += 1
            for i in range(N):
                x[i] = random_standard_normal(rng)
            for j in range(K):
                proj_c = sqrt_coef[j] * dot(&x[0], &sqrt_vecs[j, 0], N)
                for i in range(N):
                    x[i] += proj_c * sqrt_vecs[j, i]
            y = 1.0 if rng.next_double(rng.state) < 0.5 else -1.0
            if y > 0:
                a = dot(&x[0], &u[0], N)
                b = dot(&x[0], &v[0], N)
                phi = atan2(-b, a)
                theta = epsilon * sin(phi)
                if corrector:
                    theta += HALF_PI * floor(4.0 * rng.next_double(rng.state))
                c = cos(theta)
                s_ = sin(theta)
                da = a * c + b * s_ - a
                db = b * c - a * s_ - b
                for i in range(N):
                    x[i] += da * u[i] + db * v[i]
            s = dot(&w[0], &x[0], N)
            lossval = 1.0 - y * act_value(act_code, s)
            gs = y * act_deriv(act_code, s)
            # gradient of the pointwise loss is -gs * x; direction = +1 descends
            if spherical:
                for i in range(N):
                    w[i] += direction * delta * gs * (x[i] - s * w[i])
                nrm = sqrt(dot(&w[0], &w[0], N))
                if nrm < 1e-12:
                    zero_norm = 1
                    break
                for i in range(N):
                    w[i] /= nrm
            else:
                nrm = dot(&w[0], &w[0], N)
                shrink = 1.0 - delta * 4.0 * beta * nrm
                coef = direction * delta * gs
                for i in range(N):
                    w[i] = shrink * w[i] + coef * x[i]
            if window > 0:
                if ring_fill == window:
                    ring_sum -= ring[ring_pos]
                else:
                    ring_fill += 1
                ring[ring_pos] = lossval
                ring_sum += lossval
                ring_pos += 1
                if ring_pos == window:
                    ring_pos = 0
            while r < R and record_steps[r] == t:
                for j in range(P):
                    out_proj[r, j] = dot(&w[0], &proj[j, 0], N)
                out_norm[r] = dot(&w[0], &w[0], N)
                out_loss[r] = ring_sum / ring_fill if ring_fill > 0 else NAN
                r += 1
    if zero_norm:
        raise FloatingPointError(f"weight norm vanished at step {t}")
    return out_proj_arr, out_norm_arr, out_loss_arr


def train_mlp(double[:, ::1] w1,
              double[::1] b1,
              double[::1] w2,
              double[::1] b2,
              const double[:, ::1] X,
              const double[::1] y,
              const long long[::1] order,
              double lr,
              int act_code):
    """Per-example SGD on (f(x) - y)^2 for the indices in ``order``; returns summed loss."""
    cdef Py_ssize_t k = w1.shape[0]
    cdef Py_ssize_t N = w1.shape[1]
    cdef Py_ssize_t T = order.shape[0]
    cdef Py_ssize_t t, i, j, idx
    hbuf = np.empty(k)
    abuf = np.empty(k)
    cdef double[::1] h = hbuf
    cdef double[::1] a = abuf
    cdef double f, e, g, dh, total = 0.0
    with nogil:
        for t in range(T):
            idx = order[t]
            f = b2[0]
            for i in range(k):
                h[i] = b1[i] + dot(&w1[i, 0], &X[idx, 0], N)
                a[i] = act_value(act_code, h[i])
                f += w2[i] * a[i]
            e = f - y[idx]
            total += e * e
            g = 2.0 * e
            for i in range(k):
                dh = g * w2[i] * act_deriv(act_code, h[i])
                w2[i] -= lr * g * a[i]
                b1[i] -= lr * dh
                for j in range(N):
                    w1[i, j] -= lr * dh * X[idx, j]
            b2[0] -= lr * g
    return total
