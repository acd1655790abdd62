"""Two-layer fully connected classifier trained by per-example SGD on squared error.

f(x) = sum_i w2_i sigma(w1_i . x + b1_i) + b2 with labels in {-1, +1}. The
training loop runs in the compiled kernel when the activation is built in.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _backend, special, surgery
from .errors import EmptyClass, PairingExhausted


@dataclass
class TwoLayerNet:
    w1: np.ndarray  # (k, N)
    b1: np.ndarray  # (k,)
    w2: np.ndarray  # (k,)
    b2: float
    activation: special.Activation = field(default_factory=special.logcosh)

    def __post_init__(self):
        self.w1 = np.ascontiguousarray(self.w1, dtype=float)
        self.b1 = np.ascontiguousarray(self.b1, dtype=float)
        self.w2 = np.ascontiguousarray(self.w2, dtype=float)
        self.b2 = float(self.b2)
        k = self.w1.shape[0]
        if self.w1.ndim != 2 or self.b1.shape != (k,) or self.w2.shape != (k,):
            raise ValueError("inconsistent parameter shapes")

    @property
    def k(self):
        return self.w1.shape[0]

    @property
    def N(self):
        return self.w1.shape[1]

    def copy(self):
        return TwoLayerNet(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2, self.activation)

    def params(self):
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": np.array([self.b2])}


def init_net(N, k=30, rng=None, activation=None):
    """Gaussian init: w1 entries with variance 1/N, w2 entries with variance 1/k, zero biases."""
    rng = np.random.default_rng(rng)
    w1 = rng.standard_normal((k, N)) / math.sqrt(N)
    w2 = rng.standard_normal(k) / math.sqrt(k)
    return TwoLayerNet(w1, np.zeros(k), w2, 0.0, activation or special.logcosh())


def forward(net, x):
    """Network output for one input (scalar) or a batch of rows (vector)."""
    x = np.asarray(x, dtype=float)
    h = x @ net.w1.T + net.b1
    return net.activation(h) @ net.w2 + net.b2


def mse_loss(net, X, y):
    return float(np.mean((forward(net, X) - np.asarray(y, dtype=float)) ** 2))


def mse_gradients(net, x, y):
    """Gradients of (f(x) - y)^2 for one example, keyed like ``TwoLayerNet.params``."""
    x = np.asarray(x, dtype=float)
    h = net.w1 @ x + net.b1
    a = net.activation(h)
    g = 2.0 * (float(a @ net.w2 + net.b2) - y)
    dh = g * net.w2 * net.activation.deriv(h)
    return {"w1": np.outer(dh, x), "b1": dh, "w2": g * a, "b2": np.array([g])}


def sgd_pass(net, X, y, order, lr, backend="auto"):
    """One sweep of per-example SGD over ``X[order]``; returns the mean training loss."""
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    order = np.ascontiguousarray(order, dtype=np.int64)
    b2 = np.array([net.b2])
    code = _backend.ACT_CODES.get(net.activation.kind)
    if code is None:
        total = _backend._fallback.train_mlp(net.w1, net.b1, net.w2, b2, X, y, order, lr, -1,
                                             act=net.activation)
    else:
        total = _backend.kernels(backend).train_mlp(net.w1, net.b1, net.w2, b2, X, y, order, lr, code)
    net.b2 = float(b2[0])
    return total / max(len(order), 1)


def labels_from_classes(class_labels):
    """Class 0 -> -1, class 1 -> +1."""
    c = np.asarray(class_labels)
    if set(np.unique(c)) - {0, 1}:
        raise ValueError("expected two classes labelled 0 and 1")
    return np.where(c == 1, 1.0, -1.0)


def _check_classes(y, where):
    for lab in (-1.0, 1.0):
        if not np.any(y == lab):
            raise EmptyClass(f"{where} has no samples with label {lab:+g}")


def split(X, y, test_frac=0.2, rng=None):
    """Seeded random hold-out split; both parts must contain both labels."""
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    _check_classes(y, "corpus")
    rng = np.random.default_rng(rng)
    perm = rng.permutation(len(y))
    n_test = max(1, int(round(test_frac * len(y))))
    te, tr = perm[:n_test], perm[n_test:]
    _check_classes(y[tr], "training split")
    _check_classes(y[te], "test split")
    return X[tr], y[tr], X[te], y[te]


@dataclass
class PairedTestSet:
    """Original test samples and their phase-swapped counterparts.

    Row i of ``swapped`` keeps the amplitudes and the label of row i of
    ``original`` and takes its phases from the paired sample of the other class.
    """

    original: np.ndarray
    swapped: np.ndarray
    y: np.ndarray


def pair_swap(X, y, shape=None):
    """Pair the two classes in index order and swap phases within each pair."""
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    neg, pos = np.nonzero(y < 0)[0], np.nonzero(y > 0)[0]
    m = min(len(neg), len(pos))
    if m == 0:
        raise PairingExhausted("need at least one sample of each class to swap phases")
    shape = (X.shape[1],) if shape is None else tuple(shape)
    idx = np.concatenate([neg[:m], pos[:m]])
    swapped = np.empty((2 * m, X.shape[1]))
    for j in range(m):
        a, b = surgery.phase_swap(X[neg[j]].reshape(shape), X[pos[j]].reshape(shape))
        swapped[j] = a.reshape(-1)
        swapped[m + j] = b.reshape(-1)
    return PairedTestSet(X[idx], swapped, y[idx])


def _class_means(f, y):
    return float(np.mean(f[y < 0])), float(np.mean(f[y > 0]))


def evaluate(net, X, y):
    """(loss, accuracy, mean output on class -1, mean output on class +1)."""
    f = forward(net, X)
    loss = float(np.mean((f - y) ** 2))
    acc = float(np.mean(np.sign(f) == y))
    return (loss, acc) + _class_means(f, y)


def evaluate_swapped(net, test, y=None, shape=None):
    """Losses and per-class mean outputs on the original and phase-swapped test sets.

    ``test`` is a PairedTestSet or a sample matrix (then ``y`` is required).
    """
    if not isinstance(test, PairedTestSet):
        test = pair_swap(test, y, shape)
    lo, acc, m0, m1 = evaluate(net, test.original, test.y)
    ls, acc_s, s0, s1 = evaluate(net, test.swapped, test.y)
    return {"loss_orig": lo, "loss_swapped": ls, "acc": acc, "acc_swapped": acc_s,
            "mean_label_class0_orig": m0, "mean_label_class1_orig": m1,
            "mean_label_class0_swapped": s0, "mean_label_class1_swapped": s1}


REPORT_FIELDS = ("epoch", "step", "seed", "train_loss", "loss_orig", "loss_swapped", "acc", "acc_swapped",
                 "mean_label_class0_orig", "mean_label_class1_orig",
                 "mean_label_class0_swapped", "mean_label_class1_swapped")


@dataclass
class TrainReport:
    rows: list
    seed: object = None
    init: str = "w1 ~ N(0, 1/N), w2 ~ N(0, 1/k), zero biases"

    def column(self, name):
        return np.array([r[name] for r in self.rows], dtype=float)

    def to_csv(self, path, header=True, mode="w"):
        with open(path, mode) as fh:
            if header:
                fh.write(f"# init: {self.init}\n")
                fh.write(",".join(REPORT_FIELDS) + "\n")
            for r in self.rows:
                fh.write(",".join(_fmt(r[k]) for k in REPORT_FIELDS) + "\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def train(net, X, y, lr=1e-3, epochs=10, rng=None, test=None, test_frac=0.2, shape=None,
          evals_per_epoch=1, swapped=True, seed=None, backend="auto"):
    """Per-example SGD on (f(x) - y)^2 with periodic held-out evaluation.

    Without ``test`` a random 20% of the corpus is held out. The report has one
    row before training and ``evals_per_epoch`` rows per epoch; the step column
    counts training examples seen. Updates ``net`` in place.
    """
    rng = np.random.default_rng(rng)
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    if test is None:
        Xtr, ytr, Xte, yte = split(X, y, test_frac, rng)
    else:
        Xtr, ytr = X, y
        _check_classes(ytr, "training set")
        Xte, yte = test
    paired = pair_swap(Xte, yte, shape) if swapped else None
    n = len(ytr)
    cuts = np.unique(np.linspace(0, n, evals_per_epoch + 1).round().astype(int))
    rows = []

    def record(epoch, step, train_loss):
        row = {"epoch": epoch, "step": step, "seed": seed, "train_loss": train_loss}
        if paired is not None:
            row.update(evaluate_swapped(net, paired))
        else:
            lo, acc, m0, m1 = evaluate(net, Xte, yte)
            row.update(loss_orig=lo, acc=acc, mean_label_class0_orig=m0, mean_label_class1_orig=m1,
                       loss_swapped=None, acc_swapped=None,
                       mean_label_class0_swapped=None, mean_label_class1_swapped=None)
        rows.append(row)

    record(0, 0, None)
    step = 0
    for ep in range(epochs):
        order = rng.permutation(n)
        for a, b in zip(cuts[:-1], cuts[1:]):
            tl = sgd_pass(net, Xtr, ytr, order[a:b], lr, backend)
            step += b - a
            record(ep + (b / n), step, tl)
    return TrainReport(rows, seed)


# Synthetic phase-discriminative corpus and the three dataset variants.

def phase_corpus(spec, plant, n_per_class, rng):
    """Baseline draws (label -1) and planted draws (label +1), each mean-subtracted
    and scaled to norm sqrt(N). Both classes share the covariance ``spec``."""
    from . import data_model

    pos = data_model.sample_planted(spec, plant, rng, n_per_class, keep_latent=False).x
    neg = data_model.sample_baseline(spec, rng, n_per_class)
    X = np.vstack([neg, pos])
    y = np.concatenate([-np.ones(n_per_class), np.ones(n_per_class)])
    return np.array(surgery.normalize_corpus(list(X))), y


VARIANTS = ("original", "flattened", "transplanted")


def dataset_variants(X, y, rng=None, shape=None):
    """Original, flattened-amplitude and transplanted-amplitude versions of a corpus.

    Every variant goes through mean subtraction, the surgery, then rescaling
    to norm sqrt(N). The transplanted variant gives each class -1 sample the
    amplitudes of a class +1 sample (seeded shuffle, paired by index).
    """
    rng = np.random.default_rng(rng)
    X, y = np.asarray(X, dtype=float), np.asarray(y, dtype=float)
    shape = (X.shape[1],) if shape is None else tuple(shape)
    _check_classes(y, "corpus")

    def norm(rows):
        return np.array([surgery.normalize_patch(r) for r in rows])

    original = norm(X)
    flattened = np.array([surgery.flatten_amplitudes(r.reshape(shape)).reshape(-1) for r in X])
    neg, pos = np.nonzero(y < 0)[0], np.nonzero(y > 0)[0]
    sources = [X[i].reshape(shape) for i in pos]
    moved = surgery.transplant_corpus(sources, [X[i].reshape(shape) for i in neg], rng)
    transplanted = X.copy()
    transplanted[neg] = np.array([m.reshape(-1) for m in moved])
    return {"original": original, "flattened": flattened, "transplanted": norm(transplanted)}


def drop_step(steps, losses, threshold):
    """First recorded step whose loss is at or below ``threshold`` (inf if never)."""
    hit = np.nonzero(np.asarray(losses) <= threshold)[0]
    return float(steps[hit[0]]) if hit.size else math.inf


def half_drop_threshold(reference_losses, chance=1.0):
    """Loss halfway between chance level and the best loss of a reference curve.

    For balanced +-1 labels the best constant predictor has squared error 1,
    so ``chance`` defaults to 1.
    """
    return 0.5 * (chance + float(np.min(reference_losses)))


def decile_gaps(report, first=True):
    """Mean (swapped - original) test loss over the first or last tenth of training."""
    steps = report.column("step")
    gap = report.column("loss_swapped") - report.column("loss_orig")
    total = steps.max()
    sel = steps <= 0.1 * total if first else steps >= 0.9 * total
    return float(np.mean(gap[sel]))


def _train_job(job):
    X, y, k, lr, epochs, seed, evals, shape, test_frac, activation = job
    rng = np.random.default_rng(seed)
    net = init_net(X.shape[1], k, rng, special.activation_by_name(activation))
    return train(net, X, y, lr=lr, epochs=epochs, rng=rng, test_frac=test_frac, shape=shape,
                 evals_per_epoch=evals, seed=seed)


def train_seeds(X, y, seeds, k=30, lr=1e-3, epochs=30, evals_per_epoch=2, shape=None, test_frac=0.2,
                activation="logcosh", jobs=1):
    """One TrainReport per seed; the seed drives init, split and example order."""
    work = [(X, y, k, lr, epochs, int(s), evals_per_epoch, shape, test_frac, activation) for s in seeds]
    if jobs <= 1 or len(work) == 1:
        return [_train_job(j) for j in work]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_train_job, work))


@dataclass
class SignatureResult:
    """Summary of the amplitude-then-phase experiment across seeds."""

    reports: dict  # variant -> list of TrainReport
    first_gaps: np.ndarray
    last_gaps: np.ndarray
    p_first: float  # two-sided, H0: mean gap = 0
    p_last: float  # one-sided, H1: mean gap > 0
    drop_steps: dict  # variant -> array over seeds

    def median_drop(self, variant):
        return float(np.median(self.drop_steps[variant]))


def amplitude_phase_signature(variants, y, seeds, **train_kw):
    """Train on each variant and collect the swapped-gap and loss-onset statistics."""
    from scipy import stats as sps

    reports = {name: train_seeds(variants[name], y, seeds, **train_kw) for name in VARIANTS}
    orig = reports["original"]
    first = np.array([decile_gaps(r, True) for r in orig])
    last = np.array([decile_gaps(r, False) for r in orig])
    p_first = float(sps.ttest_1samp(first, 0.0).pvalue)
    p_last = float(sps.ttest_1samp(last, 0.0, alternative="greater").pvalue)
    drops = {name: [] for name in VARIANTS}
    for i in range(len(orig)):
        thr = half_drop_threshold(orig[i].column("loss_orig"))
        for name in VARIANTS:
            rep = reports[name][i]
            drops[name].append(drop_step(rep.column("step"), rep.column("loss_orig"), thr))
    return SignatureResult(reports, first, last, p_first, p_last,
                           {k: np.array(v) for k, v in drops.items()})
