#!/usr/bin/env python3
"""
Kernel support vector machines trained with SMO.

Both the soft-margin classifier and epsilon-regression are cast as the dual

    min ½ αᵀQα + pᵀα   s.t.  yᵀα = 0,  0 ≤ αᵢ ≤ Cᵢ,  yᵢ ∈ {−1, +1}

with Q_st = y_s y_t K(x_s, x_t), and solved by pairwise updates on the
maximal violating pair until the KKT gap drops below tol. Kernel columns
come from a bounded LRU cache unless the full Gram matrix fits in it.
"""
import logging
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.special import expit
from sklearn.metrics.pairwise import linear_kernel, rbf_kernel
from sklearn.preprocessing import StandardScaler

from .errors import DataError, NumericalError
from .evaluation import CLASSES, stratified_kfold

logger = logging.getLogger(__name__)

TAU = 1e-12
FEASIBILITY_TOL = 1e-6


# ============================================================================
# KERNELS AND SCALING
# ============================================================================

@dataclass(frozen=True)
class Kernel:
    """linear, or rbf exp(−gamma·|a−b|²)"""
    kind: str = "rbf"
    gamma: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise DataError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and not (self.gamma is not None and self.gamma > 0):
            raise DataError("rbf kernel needs gamma > 0")

    def matrix(self, A: np.ndarray, B: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return linear_kernel(A, B)
        return rbf_kernel(A, B, gamma=self.gamma)

    def diagonal(self, X: np.ndarray) -> np.ndarray:
        if self.kind == "linear":
            return np.einsum("ij,ij->i", X, X)
        return np.ones(X.shape[0])

    def to_dict(self) -> Dict:
        return {"kind": self.kind, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Kernel':
        return cls(kind=data["kind"], gamma=data.get("gamma"))


def scale_gamma(X: np.ndarray) -> float:
    """The "scale" heuristic 1 / (d · Var(X))"""
    X = np.asarray(X, dtype=np.float64)
    variance = float(X.var())
    if variance <= 0:
        return 1.0
    return 1.0 / (X.shape[1] * variance)


@dataclass(frozen=True, eq=False)
class Scaler:
    """Per-feature z-scoring; near-constant features keep unit scale"""
    means: np.ndarray
    stds: np.ndarray

    def transform(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.means.shape[0]:
            raise DataError(f"expected {self.means.shape[0]} features, got {X.shape[-1]}")
        return (X - self.means) / self.stds

    @property
    def dim(self) -> int:
        return int(self.means.shape[0])

    def to_dict(self) -> Dict:
        return {"means": self.means.tolist(), "stds": self.stds.tolist()}

    @classmethod
    def from_dict(cls, data: Dict) -> 'Scaler':
        return cls(np.asarray(data["means"], dtype=np.float64), np.asarray(data["stds"], dtype=np.float64))


def fit_scaler(data) -> Scaler:
    """Fit a z-score scaler; std < 1e-12 is replaced by 1"""
    data = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if data.shape[0] == 0:
        raise DataError("cannot fit a scaler on no data")
    standard = StandardScaler().fit(data)
    stds = np.sqrt(standard.var_)
    stds[stds < 1e-12] = 1.0
    return Scaler(standard.mean_.copy(), stds)


def apply_scaler(scaler: Scaler, x) -> np.ndarray:
    return scaler.transform(x)


# ============================================================================
# SMO SOLVER
# ============================================================================

class _KernelColumns:
    """Kernel columns K(X, x_b) on demand, LRU-cached"""

    def __init__(self, X: np.ndarray, kernel: Kernel, cache_mb: int):
        self.X = X
        self.kernel = kernel
        n = X.shape[0]
        self.capacity = max(2, int(cache_mb * 2 ** 20) // (8 * n))
        self._full = kernel.matrix(X, X) if self.capacity >= n else None
        self._cache: "OrderedDict[int, np.ndarray]" = OrderedDict()

    def __call__(self, b: int) -> np.ndarray:
        if self._full is not None:
            return self._full[:, b]
        column = self._cache.get(b)
        if column is not None:
            self._cache.move_to_end(b)
            return column
        column = self.kernel.matrix(self.X, self.X[b:b + 1])[:, 0]
        self._cache[b] = column
        if len(self._cache) > self.capacity:
            self._cache.popitem(last=False)
        return column


def _smo_solve(columns: _KernelColumns, base: np.ndarray, y: np.ndarray, p: np.ndarray,
               upper: np.ndarray, tol: float, max_iter: int) -> Tuple[np.ndarray, float]:
    """
    Minimize ½αᵀQα + pᵀα over the box/equality constraints.

    Returns:
        (alpha, rho); the decision function is Σ α_t y_t K(x_t, x) − rho
    """
    N = y.shape[0]
    alpha = np.zeros(N)
    G = p.astype(np.float64).copy()
    diag = columns.kernel.diagonal(columns.X)[base]

    converged = False
    iterations = 0
    while iterations < max_iter:
        minus_yG = -y * G
        up = ((y > 0) & (alpha < upper)) | ((y < 0) & (alpha > 0))
        low = ((y < 0) & (alpha < upper)) | ((y > 0) & (alpha > 0))
        if not up.any() or not low.any():
            converged = True
            break
        i = int(np.argmax(np.where(up, minus_yG, -np.inf)))
        j = int(np.argmin(np.where(low, minus_yG, np.inf)))
        gap = minus_yG[i] - minus_yG[j]
        if gap < tol:
            converged = True
            break

        K_i = columns(int(base[i]))[base]
        K_j = columns(int(base[j]))[base]
        curvature = diag[i] + diag[j] - 2.0 * K_i[j]
        if curvature <= 0:
            curvature = TAU
        step = gap / curvature

        room_i = upper[i] - alpha[i] if y[i] > 0 else alpha[i]
        room_j = alpha[j] if y[j] > 0 else upper[j] - alpha[j]
        step = min(step, room_i, room_j)

        alpha[i] += y[i] * step
        alpha[j] -= y[j] * step
        if step == room_i:
            alpha[i] = upper[i] if y[i] > 0 else 0.0
        if step == room_j:
            alpha[j] = 0.0 if y[j] > 0 else upper[j]

        # ∇ += Q[:, i]·Δα_i + Q[:, j]·Δα_j with Q[:, t] = y·y_t·K[:, t]
        G += y * (K_i * step - K_j * step)
        iterations += 1

    if not converged:
        logger.warning("SMO stopped at max_iter=%d before reaching tol=%g", max_iter, tol)
    else:
        logger.debug("SMO converged after %d pair updates", iterations)

    yG = y * G
    free = (alpha > 0) & (alpha < upper)
    if free.any():
        rho = float(np.mean(yG[free]))
    else:
        at_upper = alpha >= upper
        at_lower = alpha <= 0
        ub_mask = (at_upper & (y < 0)) | (at_lower & (y > 0))
        lb_mask = (at_upper & (y > 0)) | (at_lower & (y < 0))
        ub = float(np.min(yG[ub_mask])) if ub_mask.any() else np.inf
        lb = float(np.max(yG[lb_mask])) if lb_mask.any() else -np.inf
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else float(np.mean(yG))
    return alpha, rho


def _as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2 or not np.all(np.isfinite(X)):
        raise DataError("SVM inputs must be a finite 2-D array")
    return X


def _as_query(X, dim: int) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != dim:
        raise DataError(f"dimension mismatch: model expects {dim} features, got {X.shape[1]}")
    return X


# ============================================================================
# BINARY CLASSIFIER
# ============================================================================

@dataclass(frozen=True, eq=False)
class SvcBinary:
    """Soft-margin kernel classifier; dual_coefs hold α_i·y_i"""
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: Kernel
    c_pos: float
    c_neg: float

    @property
    def dim(self) -> int:
        return int(self.support_vectors.shape[1])

    def decision(self, X) -> np.ndarray:
        X = _as_query(X, self.dim)
        if self.dual_coefs.size == 0:
            return np.full(X.shape[0], self.bias)
        return self.kernel.matrix(X, self.support_vectors) @ self.dual_coefs + self.bias

    def to_dict(self) -> Dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "kernel": self.kernel.to_dict(),
            "c_pos": self.c_pos,
            "c_neg": self.c_neg,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SvcBinary':
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=np.float64).reshape(-1, data["dim"]),
            dual_coefs=np.asarray(data["dual_coefs"], dtype=np.float64),
            bias=float(data["bias"]),
            kernel=Kernel.from_dict(data["kernel"]),
            c_pos=float(data["c_pos"]),
            c_neg=float(data["c_neg"]),
        )


def _check_feasible(coefs: np.ndarray, bound: float, what: str):
    if abs(float(np.sum(coefs))) > FEASIBILITY_TOL:
        raise NumericalError(f"{what}: dual coefficients do not sum to zero ({np.sum(coefs):.3g})")
    if coefs.size and float(np.max(np.abs(coefs))) > bound * (1 + 1e-12):
        raise NumericalError(f"{what}: dual coefficient exceeds its box constraint")


def svc_fit(X, y, kernel: Kernel, C: float = 10.0, class_weights: Tuple[float, float] = (1.0, 1.0),
            tol: float = 1e-3, max_iter: int = 100000, cache_mb: int = 256) -> SvcBinary:
    """
    Train a binary soft-margin SVM.

    Args:
        X: (n, d) training inputs
        y: labels in {−1, +1}
        kernel: Kernel function
        C: Box constraint
        class_weights: (w₊, w₋) multipliers of C per class
        tol: KKT gap tolerance
        max_iter: Maximum number of pair updates

    Returns:
        SvcBinary
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=np.float64).ravel()
    if y.shape[0] != X.shape[0]:
        raise DataError(f"{X.shape[0]} samples but {y.shape[0]} labels")
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise DataError("binary labels must be -1 or +1")
    if X.shape[0] < 2 or np.all(y > 0) or np.all(y < 0):
        raise DataError("degenerate labels")

    c_pos, c_neg = C * class_weights[0], C * class_weights[1]
    upper = np.where(y > 0, c_pos, c_neg)
    columns = _KernelColumns(X, kernel, cache_mb)
    alpha, rho = _smo_solve(columns, np.arange(X.shape[0]), y, -np.ones_like(y), upper, tol, max_iter)

    support = alpha > 0
    coefs = alpha[support] * y[support]
    _check_feasible(coefs, max(c_pos, c_neg), "svc_fit")
    return SvcBinary(X[support].copy(), coefs, -rho, kernel, c_pos, c_neg)


def svc_decision(model: SvcBinary, x) -> float:
    """Σ coef_i·K(sv_i, x) + bias for a single input"""
    return float(model.decision(x)[0])


def svc_dual_objective(model: SvcBinary) -> float:
    """Dual objective Σα − ½ Σ α_i α_j y_i y_j K_ij of a fitted classifier"""
    coefs = model.dual_coefs
    if coefs.size == 0:
        return 0.0
    gram = model.kernel.matrix(model.support_vectors, model.support_vectors)
    return float(np.sum(np.abs(coefs)) - 0.5 * coefs @ gram @ coefs)


# ============================================================================
# REGRESSION
# ============================================================================

@dataclass(frozen=True, eq=False)
class SvrModel:
    """epsilon-SVR; dual_coefs hold β_i = α_i − α_i*"""
    support_vectors: np.ndarray
    dual_coefs: np.ndarray
    bias: float
    kernel: Kernel
    C: float
    epsilon: float

    @property
    def dim(self) -> int:
        return int(self.support_vectors.shape[1])

    def predict(self, X) -> np.ndarray:
        X = _as_query(X, self.dim)
        if self.dual_coefs.size == 0:
            return np.full(X.shape[0], self.bias)
        return self.kernel.matrix(X, self.support_vectors) @ self.dual_coefs + self.bias

    def to_dict(self) -> Dict:
        return {
            "support_vectors": self.support_vectors.tolist(),
            "dual_coefs": self.dual_coefs.tolist(),
            "bias": self.bias,
            "kernel": self.kernel.to_dict(),
            "C": self.C,
            "epsilon": self.epsilon,
            "dim": self.dim,
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SvrModel':
        return cls(
            support_vectors=np.asarray(data["support_vectors"], dtype=np.float64).reshape(-1, data["dim"]),
            dual_coefs=np.asarray(data["dual_coefs"], dtype=np.float64),
            bias=float(data["bias"]),
            kernel=Kernel.from_dict(data["kernel"]),
            C=float(data["C"]),
            epsilon=float(data["epsilon"]),
        )


def svr_fit(X, y, kernel: Kernel, C: float = 10.0, epsilon: float = 0.02,
            tol: float = 1e-3, max_iter: int = 100000, cache_mb: int = 256) -> SvrModel:
    """Train an epsilon-insensitive support vector regressor"""
    X = _as_matrix(X)
    z = np.asarray(y, dtype=np.float64).ravel()
    n = X.shape[0]
    if z.shape[0] != n:
        raise DataError(f"{n} samples but {z.shape[0]} targets")
    if n < 1 or not np.all(np.isfinite(z)):
        raise DataError("SVR needs at least one finite target")
    if epsilon < 0:
        raise DataError("epsilon must be >= 0")

    base = np.concatenate([np.arange(n), np.arange(n)])
    signs = np.concatenate([np.ones(n), -np.ones(n)])
    linear = np.concatenate([epsilon - z, epsilon + z])
    upper = np.full(2 * n, float(C))
    columns = _KernelColumns(X, kernel, cache_mb)
    alpha, rho = _smo_solve(columns, base, signs, linear, upper, tol, max_iter)

    beta = alpha[:n] - alpha[n:]
    support = beta != 0
    coefs = beta[support]
    _check_feasible(coefs, C, "svr_fit")
    return SvrModel(X[support].copy(), coefs, -rho, kernel, float(C), float(epsilon))


def svr_predict(model: SvrModel, x) -> float:
    """Σ β_i·K(sv_i, x) + bias for a single input"""
    return float(model.predict(x)[0])


# ============================================================================
# PLATT CALIBRATION
# ============================================================================

def platt_calibrate(decisions, labels, max_iter: int = 100) -> Tuple[float, float]:
    """
    Fit P(y=1|d) = 1 / (1 + exp(A·d + B)) by Newton's method with backtracking
    on the regularized targets (N₊+1)/(N₊+2) and 1/(N₋+2).

    Args:
        decisions: Decision values
        labels: Truthy / +1 for positives

    Returns:
        (A, B)
    """
    d = np.asarray(decisions, dtype=np.float64).ravel()
    positive = np.asarray(labels).ravel() > 0
    if d.shape[0] != positive.shape[0]:
        raise DataError("decisions and labels differ in length")
    n_pos = int(positive.sum())
    n_neg = int(positive.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise DataError("Platt calibration needs both labels")

    target = np.where(positive, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))
    min_step = 1e-10
    sigma = 1e-12

    def objective(a: float, b: float) -> float:
        f = d * a + b
        return float(np.sum(np.where(f >= 0, target * f + np.log1p(np.exp(-np.abs(f))),
                                     (target - 1.0) * f + np.log1p(np.exp(-np.abs(f))))))

    A, B = 0.0, float(np.log((n_neg + 1.0) / (n_pos + 1.0)))
    fval = objective(A, B)
    for _ in range(max_iter):
        p = expit(-(d * A + B))
        q = 1.0 - p
        pq = p * q
        h11 = sigma + np.sum(d * d * pq)
        h22 = sigma + np.sum(pq)
        h21 = np.sum(d * pq)
        g1 = np.sum(d * (target - p))
        g2 = np.sum(target - p)
        if abs(g1) < 1e-5 and abs(g2) < 1e-5:
            return float(A), float(B)

        det = h11 * h22 - h21 * h21
        dA = -(h22 * g1 - h21 * g2) / det
        dB = -(-h21 * g1 + h11 * g2) / det
        gd = g1 * dA + g2 * dB

        step = 1.0
        while step >= min_step:
            new_a, new_b = A + step * dA, B + step * dB
            new_f = objective(new_a, new_b)
            if new_f < fval + 1e-4 * step * gd:
                A, B, fval = new_a, new_b, new_f
                break
            step /= 2.0
        else:
            logger.debug("Platt line search stalled; keeping A=%.6g B=%.6g", A, B)
            return float(A), float(B)

    raise NumericalError(f"Platt calibration did not converge in {max_iter} iterations")


def platt_probability(a: float, b: float, decisions) -> np.ndarray:
    return expit(-(a * np.asarray(decisions, dtype=np.float64) + b))


# ============================================================================
# ONE-VS-REST MULTICLASS
# ============================================================================

@dataclass(frozen=True)
class SvmConfig:
    """Hyperparameters of the diagnosis classifier"""
    C: float = 10.0
    kernel: str = "rbf"
    gamma: Optional[float] = None
    tol: float = 1e-3
    max_iter: int = 100000
    cache_mb: int = 256
    calibration_folds: int = 3
    seed: int = 42
    threads: int = 1


@dataclass(frozen=True, eq=False)
class SvcMulticlass:
    """One-vs-rest machines with Platt-calibrated scores"""
    classes: Tuple[str, ...]
    machines: Tuple[SvcBinary, ...]
    platt: Tuple[Tuple[float, float], ...]
    scaler: Scaler

    def __post_init__(self):
        if not (len(self.classes) == len(self.machines) == len(self.platt)):
            raise DataError("classes, machines and Platt pairs must have equal counts")

    def to_dict(self) -> Dict:
        return {
            "classes": list(self.classes),
            "machines": [m.to_dict() for m in self.machines],
            "platt": [list(pair) for pair in self.platt],
            "scaler": self.scaler.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict) -> 'SvcMulticlass':
        return cls(
            classes=tuple(data["classes"]),
            machines=tuple(SvcBinary.from_dict(m) for m in data["machines"]),
            platt=tuple((float(a), float(b)) for a, b in data["platt"]),
            scaler=Scaler.from_dict(data["scaler"]),
        )


def _balanced_weights(y: np.ndarray) -> Tuple[float, float]:
    n = y.size
    n_pos = int(np.sum(y > 0))
    return n / (2.0 * n_pos), n / (2.0 * (n - n_pos))


def _fit_one_vs_rest(X: np.ndarray, y: np.ndarray, kernel: Kernel, cfg: SvmConfig) -> SvcBinary:
    return svc_fit(X, y, kernel, C=cfg.C, class_weights=_balanced_weights(y),
                   tol=cfg.tol, max_iter=cfg.max_iter, cache_mb=cfg.cache_mb)


def _out_of_fold_decisions(X: np.ndarray, y: np.ndarray, kernel: Kernel, cfg: SvmConfig,
                           machine: SvcBinary) -> np.ndarray:
    k = min(cfg.calibration_folds, int(np.sum(y > 0)), int(np.sum(y < 0)))
    if k < 2:
        logger.warning("Too few samples for out-of-fold calibration; using in-sample decisions")
        return machine.decision(X)
    decisions = np.empty(y.size)
    for fold in stratified_kfold(np.where(y > 0, "pos", "neg").tolist(), k, cfg.seed):
        train = np.setdiff1d(np.arange(y.size), fold)
        decisions[fold] = _fit_one_vs_rest(X[train], y[train], kernel, cfg).decision(X[fold])
    return decisions


def multiclass_fit(X, labels: Sequence[str], cfg: SvmConfig = SvmConfig()) -> SvcMulticlass:
    """
    Fit one-vs-rest machines for every class present, in the fixed class order.

    Each machine uses inverse-frequency weights w₊ = N/(2N₊), w₋ = N/(2N₋) and
    is Platt-calibrated on out-of-fold decisions.
    """
    X = _as_matrix(X)
    labels = list(labels)
    if len(labels) != X.shape[0]:
        raise DataError(f"{X.shape[0]} feature rows but {len(labels)} labels")
    unknown = sorted(set(labels) - set(CLASSES))
    if unknown:
        raise DataError(f"unknown class labels: {unknown}")
    present = tuple(c for c in CLASSES if c in set(labels))
    if len(present) < 2:
        raise DataError("degenerate labels: need at least 2 classes to train")

    scaler = fit_scaler(X)
    Xs = scaler.transform(X)
    gamma = cfg.gamma if cfg.gamma is not None else scale_gamma(Xs)
    kernel = Kernel(cfg.kernel, gamma if cfg.kernel == "rbf" else None)
    label_array = np.asarray(labels)

    def fit_class(cls_name: str):
        y = np.where(label_array == cls_name, 1.0, -1.0)
        machine = _fit_one_vs_rest(Xs, y, kernel, cfg)
        decisions = _out_of_fold_decisions(Xs, y, kernel, cfg, machine)
        return machine, platt_calibrate(decisions, y)

    with ThreadPoolExecutor(max_workers=cfg.threads) as executor:
        results = list(executor.map(fit_class, present))

    logger.info("Trained %d one-vs-rest machines (%s kernel, gamma=%s)", len(present), kernel.kind, kernel.gamma)
    return SvcMulticlass(
        classes=present,
        machines=tuple(m for m, _ in results),
        platt=tuple(ab for _, ab in results),
        scaler=scaler,
    )


def multiclass_scores(model: SvcMulticlass, X) -> np.ndarray:
    """(n, 7) normalized scores over the fixed class order; absent classes score 0"""
    Xs = model.scaler.transform(np.atleast_2d(np.asarray(X, dtype=np.float64)))
    raw = np.zeros((Xs.shape[0], len(CLASSES)))
    for name, machine, (a, b) in zip(model.classes, model.machines, model.platt):
        raw[:, CLASSES.index(name)] = platt_probability(a, b, machine.decision(Xs))
    totals = raw.sum(axis=1, keepdims=True)
    present = np.isin(CLASSES, model.classes).astype(np.float64)
    uniform = np.broadcast_to(present / present.sum(), raw.shape)
    return np.where(totals > 0, raw / np.where(totals > 0, totals, 1.0), uniform)


def multiclass_predict(model: SvcMulticlass, x) -> Tuple[str, np.ndarray]:
    """(argmax label, 7 scores); ties go to the earlier class"""
    scores = multiclass_scores(model, x)[0]
    return CLASSES[int(np.argmax(scores))], scores


def multiclass_predict_batch(model: SvcMulticlass, X) -> Tuple[List[str], np.ndarray]:
    scores = multiclass_scores(model, X)
    return [CLASSES[int(k)] for k in np.argmax(scores, axis=1)], scores
