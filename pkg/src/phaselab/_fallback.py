"""Pure-numpy versions of the compiled kernels (same arguments, same RNG order).

Slow: one Python iteration per SGD step. Used when the extension is missing,
when PHASELAB_PURE_PYTHON is set, and for activations or phase functions the
compiled loop does not know.
"""
import math

import numpy as np

HERMITE4 = 0
LOGCOSH = 1


def _act(code, s):
    if code == HERMITE4:
        s2 = s * s
        return s2 * s2 - 6.0 * s2 + 3.0
    a = abs(s)
    return a + math.log1p(math.exp(-2.0 * a)) - math.log(2.0)


def _act_deriv(code, s):
    if code == HERMITE4:
        return 4.0 * s ** 3 - 12.0 * s
    return math.tanh(s)


def run_sgd(generator, w, sqrt_vecs, sqrt_coef, u, v, epsilon, corrector, act_code, spherical,
            delta, beta, direction, record_steps, proj, window, *, act=None, shift=None):
    """Reference loop. ``act`` (Activation) and ``shift`` (phi -> eps f(phi))
    override the built-in activation code and the sine perturbation."""
    record_steps = np.asarray(record_steps, dtype=np.int64)
    R = record_steps.shape[0]
    P = proj.shape[0]
    N = w.shape[0]
    out_proj = np.zeros((R, P))
    out_norm = np.zeros(R)
    out_loss = np.full(R, np.nan)
    ring = np.zeros(max(window, 1))
    ring_pos = ring_fill = 0
    ring_sum = 0.0
    fn = (lambda s: float(act.fn(s))) if act is not None else (lambda s: _act(act_code, s))
    dfn = (lambda s: float(act.deriv(s))) if act is not None else (lambda s: _act_deriv(act_code, s))
    if shift is None:
        def shift(phi):
            return epsilon * math.sin(phi)

    r = 0
    while r < R and record_steps[r] == 0:
        out_proj[r] = proj @ w
        out_norm[r] = w @ w
        r += 1
    total = int(record_steps[-1]) if R else 0
    for t in range(1, total + 1):
        x = generator.standard_normal(N)
        if sqrt_vecs.shape[0]:
            x = x + ((sqrt_vecs @ x) * sqrt_coef) @ sqrt_vecs
        y = 1.0 if generator.random() < 0.5 else -1.0
        if y > 0:
            a = x @ u
            b = x @ v
            theta = shift(math.atan2(-b, a))
            if corrector:
                theta += 0.5 * math.pi * math.floor(4.0 * generator.random())
            c, s_ = math.cos(theta), math.sin(theta)
            x = x + (a * c + b * s_ - a) * u + (b * c - a * s_ - b) * v
        s = float(w @ x)
        lossval = 1.0 - y * fn(s)
        gs = y * dfn(s)
        if spherical:
            w += direction * delta * gs * (x - s * w)
            nrm = math.sqrt(w @ w)
            if nrm < 1e-12:
                raise FloatingPointError(f"weight norm vanished at step {t}")
            w /= nrm
        else:
            shrink = 1.0 - delta * 4.0 * beta * float(w @ w)
            w *= shrink
            w += direction * delta * gs * x
        if window > 0:
            if ring_fill == window:
                ring_sum -= ring[ring_pos]
            else:
                ring_fill += 1
            ring[ring_pos] = lossval
            ring_sum += lossval
            ring_pos = (ring_pos + 1) % window
        while r < R and record_steps[r] == t:
            out_proj[r] = proj @ w
            out_norm[r] = w @ w
            out_loss[r] = ring_sum / ring_fill if ring_fill else np.nan
            r += 1
    return out_proj, out_norm, out_loss


def train_mlp(w1, b1, w2, b2, X, y, order, lr, act_code, *, act=None):
    """Per-example SGD on (f(x) - y)^2, updating the arrays in place."""
    fn = act.fn if act is not None else np.vectorize(lambda s: _act(act_code, s))
    dfn = act.deriv if act is not None else np.vectorize(lambda s: _act_deriv(act_code, s))
    total = 0.0
    for idx in order:
        x = X[idx]
        h = w1 @ x + b1
        a = fn(h)
        f = float(w2 @ a + b2[0])
        e = f - y[idx]
        total += e * e
        g = 2.0 * e
        dh = g * w2 * dfn(h)
        w2 -= lr * g * a
        b1 -= lr * dh
        w1 -= lr * np.outer(dh, x)
        b2[0] -= lr * g
    return total
