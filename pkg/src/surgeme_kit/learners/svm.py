"""Soft-margin SVM trained with sequential minimal optimization.

Multiclass is one-vs-rest (7 machines for 7 classes); class scores are
the signed margins, turned into a distribution with softmax.  That is a
calibration approximation, adequate because downstream decisions use
only the argmax.
"""

from __future__ import annotations

import numpy as np

from ..errors import SingleClassError
from ..seeding import derive_rng
from .base import ClassifierModel, LabeledMatrix, canonical_row_order

DEFAULT_PARAMS = {
    "kernel": "rbf",       # "rbf" or "linear"
    "C": 1.0,
    "gamma": None,         # None -> 1 / (dim * var(X))
    "tol": 1e-3,           # KKT tolerance
    "max_passes": 2000,    # cap on full sweeps; SMO converges far earlier
}
_EPS = 1e-12
_SV_CUTOFF = 1e-10


def _kernel_matrix(kind: str, gamma: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kind == "linear":
        return A @ B.T
    sq = (np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :]
          - 2.0 * (A @ B.T))
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


class _BinarySmo:
    """Platt-style SMO for one +1/-1 machine, deterministic under a seed."""

    def __init__(self, X, y, C, kernel, gamma, tol, max_passes, rng):
        self.X = X
        self.y = y.astype(np.float64)
        self.C = C
        self.kernel = kernel
        self.gamma = gamma
        self.tol = tol
        self.max_passes = max_passes
        self.rng = rng
        self.n = X.shape[0]
        self.K = _kernel_matrix(kernel, gamma, X, X)
        self.alpha = np.zeros(self.n)
        self.b = 0.0
        self.errors = -self.y.copy()  # f(x) = 0 initially

    def _take_step(self, i1: int, i2: int) -> bool:
        if i1 == i2:
            return False
        a1, a2 = self.alpha[i1], self.alpha[i2]
        y1, y2 = self.y[i1], self.y[i2]
        e1, e2 = self.errors[i1], self.errors[i2]
        s = y1 * y2
        if s > 0:
            lo, hi = max(0.0, a1 + a2 - self.C), min(self.C, a1 + a2)
        else:
            lo, hi = max(0.0, a2 - a1), min(self.C, self.C + a2 - a1)
        if hi - lo < _EPS:
            return False
        k11, k12, k22 = self.K[i1, i1], self.K[i1, i2], self.K[i2, i2]
        eta = k11 + k22 - 2.0 * k12
        if eta > _EPS:
            a2_new = a2 + y2 * (e1 - e2) / eta
            a2_new = min(hi, max(lo, a2_new))
        else:
            # Flat direction: evaluate the objective at both clip bounds.
            f1 = y1 * (e1 + self.b) - a1 * k11 - s * a2 * k12
            f2 = y2 * (e2 + self.b) - s * a1 * k12 - a2 * k22
            l1 = a1 + s * (a2 - lo)
            h1 = a1 + s * (a2 - hi)
            obj_lo = (l1 * f1 + lo * f2 + 0.5 * l1 * l1 * k11
                      + 0.5 * lo * lo * k22 + s * lo * l1 * k12)
            obj_hi = (h1 * f1 + hi * f2 + 0.5 * h1 * h1 * k11
                      + 0.5 * hi * hi * k22 + s * hi * h1 * k12)
            if obj_lo < obj_hi - _EPS:
                a2_new = lo
            elif obj_lo > obj_hi + _EPS:
                a2_new = hi
            else:
                a2_new = a2
        if abs(a2_new - a2) < _EPS * (a2_new + a2 + _EPS):
            return False
        a1_new = a1 + s * (a2 - a2_new)
        d1, d2 = a1_new - a1, a2_new - a2
        b1 = self.b + e1 + y1 * d1 * k11 + y2 * d2 * k12
        b2 = self.b + e2 + y1 * d1 * k12 + y2 * d2 * k22
        if 0.0 < a1_new < self.C:
            b_new = b1
        elif 0.0 < a2_new < self.C:
            b_new = b2
        else:
            b_new = 0.5 * (b1 + b2)
        self.alpha[i1], self.alpha[i2] = a1_new, a2_new
        self.errors += y1 * d1 * self.K[i1] + y2 * d2 * self.K[i2]
        self.errors -= b_new - self.b
        self.b = b_new
        self.errors[i1] = self._f(i1) - y1
        self.errors[i2] = self._f(i2) - y2
        return True

    def _f(self, i: int) -> float:
        return float((self.alpha * self.y) @ self.K[:, i] - self.b)

    def _examine(self, i2: int) -> bool:
        y2, a2, e2 = self.y[i2], self.alpha[i2], self.errors[i2]
        r2 = e2 * y2
        if not ((r2 < -self.tol and a2 < self.C) or (r2 > self.tol and a2 > 0)):
            return False
        non_bound = np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]
        if non_bound.size > 1:
            gaps = np.abs(self.errors[non_bound] - e2)
            i1 = int(non_bound[np.argmax(gaps)])
            if self._take_step(i1, i2):
                return True
        if non_bound.size:
            start = int(self.rng.integers(non_bound.size))
            for k in range(non_bound.size):
                i1 = int(non_bound[(start + k) % non_bound.size])
                if self._take_step(i1, i2):
                    return True
        start = int(self.rng.integers(self.n))
        for k in range(self.n):
            i1 = (start + k) % self.n
            if self._take_step(i1, i2):
                return True
        return False

    def solve(self) -> None:
        examine_all = True
        changed = 0
        for _ in range(self.max_passes):
            changed = 0
            targets = range(self.n) if examine_all else \
                np.nonzero((self.alpha > 0) & (self.alpha < self.C))[0]
            for i2 in targets:
                changed += self._examine(int(i2))
            if examine_all:
                if changed == 0:
                    break
                examine_all = False
            elif changed == 0:
                examine_all = True


class SvmModel(ClassifierModel):
    kind = "svm"

    def __init__(self, dim, n_classes, params, machines, gamma):
        super().__init__(dim, n_classes, params)
        self.machines = machines  # class id -> (sv_X, alpha_y, b) or None
        self.gamma = gamma

    def decision_values(self, x) -> np.ndarray:
        arr, single = self._check_input(x)
        scores = np.zeros((arr.shape[0], self.n_classes))
        for c, machine in enumerate(self.machines):
            if machine is None:
                scores[:, c] = -np.inf
                continue
            sv, alpha_y, b = machine
            k = _kernel_matrix(self.params["kernel"], self.gamma, arr, sv)
            scores[:, c] = k @ alpha_y - b
        return scores[0] if single else scores

    def predict_proba(self, x) -> np.ndarray:
        scores = np.atleast_2d(self.decision_values(x))
        finite = np.where(np.isfinite(scores), scores, -1e300)
        shifted = finite - finite.max(axis=1, keepdims=True)
        e = np.exp(shifted)
        proba = e / e.sum(axis=1, keepdims=True)
        return proba[0] if np.asarray(x).ndim == 1 else proba


def train_svm(data: LabeledMatrix, params: dict | None = None, seed: int = 0) -> SvmModel:
    """Train one-vs-rest soft-margin machines to KKT tolerance."""
    p = dict(DEFAULT_PARAMS)
    p.update(params or {})
    present = np.unique(data.y)
    if present.size < 2:
        raise SingleClassError("SVM training needs at least two classes")
    order = canonical_row_order(data.X, data.y)
    X, y = data.X[order], data.y[order]
    gamma = p["gamma"]
    if gamma is None:
        var = float(X.var())
        gamma = 1.0 / (data.dim * var) if var > 0 else 1.0
    machines: list = [None] * data.n_classes
    for c in present:
        y_bin = np.where(y == c, 1.0, -1.0)
        smo = _BinarySmo(X, y_bin, float(p["C"]), p["kernel"], gamma,
                         float(p["tol"]), int(p["max_passes"]),
                         derive_rng(seed, "svm-ovr", int(c)))
        smo.solve()
        keep = smo.alpha > _SV_CUTOFF
        machines[int(c)] = (X[keep].copy(),
                            (smo.alpha[keep] * y_bin[keep]).copy(),
                            smo.b)
    return SvmModel(data.dim, data.n_classes, p, machines, gamma)
