"""Binary (IRLS) and multinomial (Newton-Raphson) logistic regression.

Both trainers damp their linear systems with a ridge term ``lam``, so the
fixed point they converge to minimizes the cross-entropy plus
``lam/2 * ||w||^2``.  A step that raises that objective is halved (up to 20
times) before being accepted.
"""

from __future__ import annotations

import logging
import math
import operator
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from smartexec.learning.data import Dataset
from smartexec.learning.normalize import Normalizer, apply_normalizer, fit_normalizer

log = logging.getLogger(__name__)

EPS = 1e-12
MAX_HALVINGS = 20
MAX_RIDGE = 1e-2


class TrainingError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    max_iters: int = 100
    tol: float = 1e-8
    lam: float = 1e-6

    def __post_init__(self):
        if self.max_iters < 1 or self.tol <= 0 or self.lam < 0:
            raise ValueError(f"invalid training config: {self}")


@dataclass
class TrainState:
    """Quantities of one Newton iteration; the binary trainer leaves ``T`` unset."""

    mu: np.ndarray
    S: np.ndarray
    E: float
    gradient: np.ndarray
    H: np.ndarray
    T: np.ndarray | None = None


@dataclass(frozen=True)
class FitInfo:
    converged: bool
    iterations: int
    objective: tuple[float, ...] = ()


@dataclass(frozen=True)
class BinaryModel:
    w: np.ndarray
    normalizer: Normalizer
    info: FitInfo = field(default=FitInfo(True, 0), compare=False)

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(w)):
            raise ValueError("binary weights must be finite")
        object.__setattr__(self, "w", w)

    @cached_property
    def _w(self) -> tuple[float, ...]:
        return tuple(self.w.tolist())

    def probability(self, x) -> float:
        # dispatch-time path: one vector, plain floats
        z = self.normalizer.transform_one(x)
        return _sigmoid_scalar(sum(map(operator.mul, z, self._w)))

    @cached_property
    def _memo(self) -> dict:
        return {}

    def predict(self, x) -> tuple[int, float]:
        """Class 1 iff p(y=1|x) > 0.5; an exact tie goes to class 0."""
        key = _memo_key(x)
        hit = self._memo.get(key)
        if hit is None:
            p = self.probability(x)
            hit = _memo_put(self._memo, key, (int(p > 0.5), p))
        return hit


@dataclass(frozen=True)
class MultinomialModel:
    W: np.ndarray
    class_names: tuple[str, ...]
    normalizer: Normalizer
    info: FitInfo = field(default=FitInfo(True, 0), compare=False)

    def __post_init__(self):
        W = np.atleast_2d(np.asarray(self.W, dtype=np.float64))
        if W.shape[0] < 2 or W.shape[0] != len(self.class_names):
            raise ValueError("need one weight row per class and at least two classes")
        if not np.all(np.isfinite(W)):
            raise ValueError("multinomial weights must be finite")
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "class_names", tuple(self.class_names))

    @cached_property
    def _rows(self) -> tuple[tuple[float, ...], ...]:
        return tuple(tuple(r) for r in self.W.tolist())

    def _probs(self, x) -> list[float]:
        z = self.normalizer.transform_one(x)
        return _softmax_list([sum(map(operator.mul, z, r)) for r in self._rows])

    def probabilities(self, x) -> np.ndarray:
        return np.array(self._probs(x))

    @cached_property
    def _memo(self) -> dict:
        return {}

    def predict(self, x) -> tuple[int, np.ndarray]:
        key = _memo_key(x)
        hit = self._memo.get(key)
        if hit is None:
            p = self._probs(x)
            # list.index finds the first maximum: ties go to the smaller index.
            hit = _memo_put(self._memo, key, (p.index(max(p)), tuple(p)))
        return hit[0], np.array(hit[1])


# --------------------------------------------------------------------------
# Array-level primitives

def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    ez = np.exp(-np.abs(z))
    out = np.where(z >= 0, 1.0 / (1.0 + ez), ez / (1.0 + ez))
    out = np.clip(out, EPS, 1.0 - EPS)
    return out if out.ndim else float(out)


# Dispatches of the same loop repeat the same feature vector; predictions are
# pure, so models keep a small memo of recent answers.
MEMO_SIZE = 256


def _memo_key(x) -> tuple:
    return tuple(x.tolist()) if isinstance(x, np.ndarray) else tuple(map(float, x))


def _memo_put(memo: dict, key, value):
    if len(memo) >= MEMO_SIZE:
        memo.clear()
    memo[key] = value
    return value


def _sigmoid_scalar(z: float) -> float:
    if z >= 0:
        p = 1.0 / (1.0 + math.exp(-z))
    else:
        ez = math.exp(z)
        p = ez / (1.0 + ez)
    return min(max(p, EPS), 1.0 - EPS)


def _softmax_list(logits: list[float]) -> list[float]:
    top = max(logits)
    e = [math.exp(v - top) for v in logits]
    total = sum(e)
    p = [max(v / total, EPS) for v in e]
    total = sum(p)
    return [v / total for v in p]


def softmax(logits) -> np.ndarray:
    """Row-wise softmax with max-logit shift, floored at EPS and renormalized."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    p = np.maximum(e / e.sum(axis=-1, keepdims=True), EPS)
    return p / p.sum(axis=-1, keepdims=True)


def binary_cross_entropy(w, X, y) -> float:
    mu = sigmoid(X @ w)
    return float(-np.sum(y * np.log(mu) + (1 - y) * np.log(1 - mu)))


def softmax_cross_entropy(W, X, T) -> float:
    return float(-np.sum(T * np.log(softmax(X @ W.T))))


def softmax_gradient(W, X, T) -> np.ndarray:
    """Gradient of the cross-entropy w.r.t. each class row: sum_n (y_nc - t_nc) x_n."""
    Y = softmax(X @ W.T)
    return (Y - T).T @ X


def softmax_hessian(W, X) -> np.ndarray:
    """Full (C*K) x (C*K) Hessian; block (i, j) is sum_n y_ni (I_ij - y_nj) x_n x_n^T."""
    Y = softmax(X @ W.T)
    C, K = W.shape
    coef = Y[:, :, None] * (np.eye(C)[None] - Y[:, None, :])
    H = np.einsum("nij,nk,nl->ikjl", coef, X, X)
    return H.reshape(C * K, C * K)


def binary_state(w, X, y) -> TrainState:
    mu = sigmoid(X @ w)
    S = mu * (1 - mu)
    return TrainState(
        mu=mu, S=S, E=binary_cross_entropy(w, X, y),
        gradient=X.T @ (mu - y), H=X.T @ (S[:, None] * X),
    )


def multinomial_state(W, X, T) -> TrainState:
    Y = softmax(X @ W.T)
    return TrainState(
        mu=Y, S=Y * (1 - Y), E=softmax_cross_entropy(W, X, T),
        gradient=softmax_gradient(W, X, T), H=softmax_hessian(W, X), T=T,
    )


def _solve_damped(A: np.ndarray, b: np.ndarray, lam: float):
    """Solve ``(A + lam I) x = b``, escalating lam x10 up to MAX_RIDGE on failure."""
    eye = np.eye(A.shape[0])
    while True:
        try:
            x = np.linalg.solve(A + lam * eye, b)
            if np.all(np.isfinite(x)):
                return x
        except np.linalg.LinAlgError:
            pass
        if lam >= MAX_RIDGE:
            return None
        lam = max(lam * 10, 1e-12)
        lam = min(lam, MAX_RIDGE)


def _line_search(objective, w, step, f0):
    for h in range(MAX_HALVINGS + 1):
        cand = w + step / 2.0**h
        f = objective(cand)
        if f <= f0:
            return cand, f
    return None, f0


def irls(X, y, cfg: TrainConfig = TrainConfig()):
    """Ridge-damped IRLS from w = 0 on already-transformed rows.

    Each step solves ``(X^T S X + lam I) w_new = X^T (S X w + y - mu)``.
    Returns ``(w, FitInfo)``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.zeros(X.shape[1])

    def objective(v):
        return binary_cross_entropy(v, X, y) + 0.5 * cfg.lam * float(v @ v)

    f = objective(w)
    history = [f]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        st = binary_state(w, X, y)
        w_new = _solve_damped(st.H, X.T @ (st.S * (X @ w) + y - st.mu), cfg.lam)
        if w_new is None:
            log.warning("IRLS: damped system singular, returning best-so-far")
            break
        step = w_new - w
        cand, f_new = _line_search(objective, w, step, f)
        if cand is None:
            converged = float(np.max(np.abs(step))) < cfg.tol
            break
        change = float(np.max(np.abs(cand - w)))
        w, f = cand, f_new
        history.append(f)
        if change < cfg.tol:
            converged = True
            break
    return w, FitInfo(converged, it, tuple(history))


def newton_multinomial(X, T, cfg: TrainConfig = TrainConfig()):
    """Newton-Raphson on the softmax cross-entropy with the last class row pinned at 0."""
    X = np.asarray(X, dtype=np.float64)
    T = np.asarray(T, dtype=np.float64)
    C, K = T.shape[1], X.shape[1]
    nfree = (C - 1) * K

    def unpack(v):
        return np.vstack([v.reshape(C - 1, K), np.zeros((1, K))])

    def objective(v):
        return softmax_cross_entropy(unpack(v), X, T) + 0.5 * cfg.lam * float(v @ v)

    v = np.zeros(nfree)
    f = objective(v)
    history = [f]
    converged = False
    it = 0
    for it in range(1, cfg.max_iters + 1):
        st = multinomial_state(unpack(v), X, T)
        g = st.gradient[:-1].ravel() + cfg.lam * v
        delta = _solve_damped(st.H[:nfree, :nfree], g, cfg.lam)
        if delta is None:
            log.warning("Newton: damped Hessian singular, returning best-so-far")
            break
        cand, f_new = _line_search(objective, v, -delta, f)
        if cand is None:
            converged = float(np.max(np.abs(delta))) < cfg.tol
            break
        change = float(np.max(np.abs(cand - v)))
        v, f = cand, f_new
        history.append(f)
        if change < cfg.tol:
            converged = True
            break
    return unpack(v), FitInfo(converged, it, tuple(history))


# --------------------------------------------------------------------------
# Model-level API

def train_binary_irls(data: Dataset, cfg: TrainConfig = TrainConfig(),
                      normalizer: Normalizer | None = None) -> BinaryModel:
    """Fit a binary model; the normalizer is fitted on ``data`` unless given."""
    if data.n_classes != 2:
        raise TrainingError(f"binary model needs exactly 2 classes, got {data.n_classes}")
    counts = np.bincount(data.y, minlength=2)
    if counts.min() == 0:
        missing = data.class_names[int(np.argmin(counts))]
        raise TrainingError(f"binary model: no samples of class {missing!r}")
    normalizer = normalizer or fit_normalizer(data.X)
    w, info = irls(apply_normalizer(normalizer, data.X), data.y, cfg)
    if not info.converged:
        log.warning("binary model did not converge in %d iterations", info.iterations)
    return BinaryModel(w, normalizer, info)


def train_multinomial_newton(data: Dataset, cfg: TrainConfig = TrainConfig(),
                             normalizer: Normalizer | None = None) -> MultinomialModel:
    counts = np.bincount(data.y, minlength=data.n_classes)
    missing = [data.class_names[i] for i in np.flatnonzero(counts == 0)]
    if missing:
        raise TrainingError(f"multinomial model: no samples of class(es) {', '.join(missing)}")
    normalizer = normalizer or fit_normalizer(data.X)
    W, info = newton_multinomial(apply_normalizer(normalizer, data.X), data.targets(), cfg)
    if not info.converged:
        log.warning("multinomial model did not converge in %d iterations", info.iterations)
    return MultinomialModel(W, data.class_names, normalizer, info)


def predict_binary(model: BinaryModel, x) -> tuple[int, float]:
    return model.predict(x)


def softmax_probs(model: MultinomialModel, x) -> np.ndarray:
    return model.probabilities(x)


def predict_class(model: MultinomialModel, x) -> tuple[int, np.ndarray]:
    return model.predict(x)


def cross_entropy(model, data: Dataset) -> float:
    X = apply_normalizer(model.normalizer, data.X)
    if isinstance(model, BinaryModel):
        return binary_cross_entropy(model.w, X, data.y)
    return softmax_cross_entropy(model.W, X, data.targets())


def multinomial_gradient(model: MultinomialModel, data: Dataset) -> np.ndarray:
    X = apply_normalizer(model.normalizer, data.X)
    return softmax_gradient(model.W, X, data.targets())


def multinomial_hessian(model: MultinomialModel, data: Dataset) -> np.ndarray:
    return softmax_hessian(model.W, apply_normalizer(model.normalizer, data.X))


def predict_rows(model, X) -> np.ndarray:
    """Vectorized class predictions for a matrix of raw rows."""
    Z = apply_normalizer(model.normalizer, np.atleast_2d(X))
    if isinstance(model, BinaryModel):
        return (sigmoid(Z @ model.w) > 0.5).astype(np.int64)
    return np.argmax(softmax(Z @ model.W.T), axis=1)


def accuracy(model, data: Dataset) -> float:
    return float(np.mean(predict_rows(model, data.X) == data.y))
