"""Small Monte-Carlo bookkeeping helpers."""
from dataclasses import dataclass, field

import numpy as np


class RunningMoments:
    """Streaming mean and variance (Chan's parallel update) for vector statistics."""

    def __init__(self, shape=()):
        self.n = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)

    def update(self, values):
        values = np.asarray(values, dtype=float)
        nb = values.shape[0]
        if nb == 0:
            return
        mb = values.mean(axis=0)
        m2b = ((values - mb) ** 2).sum(axis=0)
        delta = mb - self.mean
        total = self.n + nb
        self.mean = self.mean + delta * nb / total
        self.m2 = self.m2 + m2b + delta ** 2 * self.n * nb / total
        self.n = total

    @property
    def var(self):
        return self.m2 / max(self.n - 1, 1)

    @property
    def stderr(self):
        return np.sqrt(self.var / max(self.n, 1))


def mean_se(values, axis=0):
    values = np.asarray(values, dtype=float)
    n = values.shape[axis]
    return values.mean(axis=axis), values.std(axis=axis, ddof=1) / np.sqrt(n)


@dataclass
class Check:
    """One line of a validation battery."""

    name: str
    estimate: float
    stderr: float
    target: float
    threshold: float
    passed: bool
    expect_pass: bool = True
    note: str = ""

    @property
    def z(self):
        return (self.estimate - self.target) / self.stderr if self.stderr > 0 else (0.0 if self.estimate == self.target else float("inf"))

    @property
    def ok(self):
        """True when the outcome matches what was expected (some checks must fail)."""
        return self.passed == self.expect_pass

    def line(self):
        verdict = "PASS" if self.passed else "FAIL"
        if not self.expect_pass:
            verdict += "-as-expected" if not self.passed else "-unexpected"
        return (
            f"{verdict:20s} {self.name}: estimate={self.estimate:.6g} target={self.target:.6g} "
            f"se={self.stderr:.3g} |z|={abs(self.z):.2f} threshold={self.threshold:g} {self.note}"
        ).rstrip()


@dataclass
class Report:
    title: str
    checks: list = field(default_factory=list)

    def add(self, check):
        self.checks.append(check)
        return check

    @property
    def ok(self):
        return all(c.ok for c in self.checks)

    def text(self):
        lines = [f"# {self.title}"] + [c.line() for c in self.checks]
        lines.append(f"overall: {'OK' if self.ok else 'NOT OK'}")
        return "\n".join(lines)


def z_check(name, estimate, stderr, target, k_se, expect_pass=True, note=""):
    """Pass when |estimate - target| <= k_se * stderr."""
    passed = abs(estimate - target) <= k_se * stderr
    return Check(name, float(estimate), float(stderr), float(target), k_se, bool(passed), expect_pass, note)


def exceed_check(name, estimate, stderr, k_se, note=""):
    """Pass when |estimate| exceeds k_se standard errors (a signal must be visible)."""
    passed = abs(estimate) > k_se * stderr
    return Check(name, float(estimate), float(stderr), 0.0, k_se, bool(passed), True, note)
