"""One-vs-rest RBF SVMs: file ingestion, decisions, SMO training, datasets.

The decision rule is argmax over per-class scores
score_c(x) = sum_i alpha_ci exp(-gamma ||V_ci - x||^2) + b_c with signed
coefficients (the binary label is folded into alpha).  A compact SMO
solver makes the pipeline self-contained at desk scale; externally
trained models arrive either as libsvm text files (binary only) or as
the one-vs-rest JSON schema defined here.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass

import numpy as np


# -- model -------------------------------------------------------------


@dataclass
class SvmClass:
    label: int
    bias: float
    alphas: np.ndarray
    support_vectors: np.ndarray

    def __post_init__(self):
        self.alphas = np.asarray(self.alphas, dtype=np.float64)
        self.support_vectors = np.asarray(self.support_vectors, dtype=np.float64)
        if self.support_vectors.ndim != 2:
            raise ValueError("support_vectors must be a 2-D array")
        if self.alphas.shape[0] != self.support_vectors.shape[0]:
            raise ValueError("one coefficient per support vector required")
        if self.alphas.shape[0] == 0:
            raise ValueError(f"class {self.label}: at least one support vector required")


@dataclass
class MultiClassSvm:
    gamma: float
    classes: list

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if not self.classes:
            raise ValueError("model must contain at least one class")
        dims = {c.support_vectors.shape[1] for c in self.classes}
        if len(dims) != 1:
            raise ValueError(f"inconsistent support vector dimensions: {sorted(dims)}")

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def dim(self):
        return self.classes[0].support_vectors.shape[1]

    @property
    def labels(self):
        return [c.label for c in self.classes]


def rbf_kernel(X, V, gamma):
    """exp(-gamma ||x - v||^2) for all row pairs; shape (len(X), len(V))."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    sq = (np.sum(X * X, axis=1)[:, None] + np.sum(V * V, axis=1)[None, :]
          - 2.0 * X @ V.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def svm_scores_batch(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match model dim {model.dim}")
    scores = np.empty((X.shape[0], model.n_classes))
    for c, cls in enumerate(model.classes):
        scores[:, c] = rbf_kernel(X, cls.support_vectors, model.gamma) @ cls.alphas + cls.bias
    return scores


def svm_scores(model, x):
    return svm_scores_batch(model, np.asarray(x, dtype=np.float64)[None, :])[0]


def svm_decision(model, x):
    """argmax class index of the per-class scores; ties go to the lowest."""
    return int(np.argmax(svm_scores(model, x)))


def svm_decision_batch(model, X):
    return np.argmax(svm_scores_batch(model, X), axis=1)


# -- libsvm model files -------------------------------------------------


_LIBSVM_LIST_KEYS = ("rho", "label", "nr_sv", "probA", "probB")


def parse_libsvm_model(text):
    """Parse a libsvm model file (svm_type c_svc, kernel_type rbf, binary).

    The binary model is mapped to a 2-class one-vs-rest model: the first
    label gets the stored coefficients with bias -rho, the second the
    mirrored entries.  Multi-class (one-vs-one) files are rejected.
    """
    header = {}
    lines = text.splitlines()
    sv_start = None
    for ln, line in enumerate(lines):
        stripped = line.strip()
        if stripped == "SV":
            sv_start = ln + 1
            break
        if not stripped:
            continue
        parts = stripped.split(None, 1)
        if len(parts) != 2:
            raise ValueError(f"libsvm model line {ln + 1}: malformed header line {line!r}")
        header[parts[0]] = parts[1]
    if sv_start is None:
        raise ValueError("libsvm model: missing 'SV' sentinel line")
    if header.get("svm_type") != "c_svc":
        raise ValueError(f"libsvm model: unsupported svm_type {header.get('svm_type')!r}")
    if header.get("kernel_type") != "rbf":
        raise ValueError(f"libsvm model: kernel_type must be rbf, got "
                         f"{header.get('kernel_type')!r}")
    try:
        gamma = float(header["gamma"])
        nr_class = int(header["nr_class"])
        total_sv = int(header["total_sv"])
        rho = [float(v) for v in header["rho"].split()]
        labels = [int(v) for v in header["label"].split()]
    except KeyError as exc:
        raise ValueError(f"libsvm model: missing header field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise ValueError(f"libsvm model: bad header value: {exc}") from exc
    if nr_class > 2:
        raise ValueError(
            f"libsvm model has {nr_class} classes trained one-vs-one; convert to "
            "one-vs-rest (train per-class binary SVMs and emit the OvR JSON schema)")
    if nr_class != 2:
        raise ValueError(f"libsvm model: expected 2 classes, got {nr_class}")

    coefs = np.empty(total_sv)
    rows = []
    max_index = 0
    for k in range(total_sv):
        ln = sv_start + k
        if ln >= len(lines) or not lines[ln].strip():
            raise ValueError(f"libsvm model line {ln + 1}: expected {total_sv} SV lines")
        fields = lines[ln].split()
        try:
            coefs[k] = float(fields[0])
            pairs = []
            for item in fields[1:]:
                idx_s, val_s = item.split(":", 1)
                idx = int(idx_s)
                if idx < 1:
                    raise ValueError(f"index {idx} must be >= 1")
                pairs.append((idx, float(val_s)))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"libsvm model line {ln + 1}: malformed SV entry: {exc}") from exc
        rows.append(pairs)
        if pairs:
            max_index = max(max_index, max(idx for idx, _ in pairs))
    dim = max(max_index, 1)
    sv = np.zeros((total_sv, dim))
    for k, pairs in enumerate(rows):
        for idx, val in pairs:
            sv[k, idx - 1] = val

    pos = SvmClass(labels[0], -rho[0], coefs, sv)
    neg = SvmClass(labels[1], rho[0], -coefs, sv)
    classes = sorted([pos, neg], key=lambda c: c.label)
    return MultiClassSvm(gamma, classes)


# -- one-vs-rest JSON ----------------------------------------------------
# Schema: {"gamma": g, "classes": [{"label": int, "bias": b,
#          "alphas": [...], "support_vectors": [[...], ...]}]}


def emit_ovr_model_json(model):
    doc = {
        "gamma": model.gamma,
        "classes": [
            {
                "label": cls.label,
                "bias": cls.bias,
                "alphas": list(cls.alphas),
                "support_vectors": [list(v) for v in cls.support_vectors],
            }
            for cls in model.classes
        ],
    }
    return json.dumps(doc)


def parse_ovr_model_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"OvR model JSON: line {exc.lineno}: {exc.msg}") from exc
    return ovr_model_from_dict(doc)


def ovr_model_from_dict(doc, context="OvR model JSON"):
    if not isinstance(doc, dict):
        raise ValueError(f"{context}: expected an object")
    if "gamma" not in doc:
        raise ValueError(f"{context}: missing field 'gamma'")
    if "classes" not in doc or not isinstance(doc["classes"], list):
        raise ValueError(f"{context}: missing field 'classes'")
    classes = []
    for k, entry in enumerate(doc["classes"]):
        for fieldname in ("label", "bias", "alphas", "support_vectors"):
            if fieldname not in entry:
                raise ValueError(f"{context}: classes[{k}] missing field '{fieldname}'")
        try:
            classes.append(SvmClass(int(entry["label"]), float(entry["bias"]),
                                    entry["alphas"], entry["support_vectors"]))
        except ValueError as exc:
            raise ValueError(f"{context}: classes[{k}]: {exc}") from exc
    try:
        return MultiClassSvm(float(doc["gamma"]), classes)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{context}: {exc}") from exc


# -- SMO solver ----------------------------------------------------------


def smo_solve_binary(X, y, C, gamma, tol=1e-3, max_iter=None):
    """Soft-margin dual solver via maximal-violating-pair SMO.

    Minimizes 0.5 lam' Q lam - sum(lam) with Q = y y' * K subject to
    0 <= lam <= C and y'lam = 0, stopping when the maximal KKT violation
    m(lam) - M(lam) drops to tol.  Returns (lam, bias, iterations).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    if max_iter is None:
        max_iter = max(20000, 400 * n)
    K = rbf_kernel(X, X, gamma)
    Q = (y[:, None] * y[None, :]) * K
    lam = np.zeros(n)
    grad = -np.ones(n)
    tau = 1e-12

    for it in range(max_iter):
        neg_ygrad = -y * grad
        up = ((y > 0) & (lam < C - 1e-12)) | ((y < 0) & (lam > 1e-12))
        low = ((y < 0) & (lam < C - 1e-12)) | ((y > 0) & (lam > 1e-12))
        if not up.any() or not low.any():
            break
        i = int(np.flatnonzero(up)[np.argmax(neg_ygrad[up])])
        j = int(np.flatnonzero(low)[np.argmin(neg_ygrad[low])])
        m_val = neg_ygrad[i]
        big_m_val = neg_ygrad[j]
        if m_val - big_m_val <= tol:
            break
        old_i, old_j = lam[i], lam[j]
        if y[i] != y[j]:
            quad = K[i, i] + K[j, j] + 2.0 * K[i, j]
            if quad <= 0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = lam[i] - lam[j]
            lam[i] += delta
            lam[j] += delta
            if diff > 0 and lam[j] < 0:
                lam[j] = 0.0
                lam[i] = diff
            elif diff <= 0 and lam[i] < 0:
                lam[i] = 0.0
                lam[j] = -diff
            if diff > 0 and lam[i] > C:
                lam[i] = C
                lam[j] = C - diff
            elif diff <= 0 and lam[j] > C:
                lam[j] = C
                lam[i] = C + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * K[i, j]
            if quad <= 0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            total = lam[i] + lam[j]
            lam[i] -= delta
            lam[j] += delta
            if total > C:
                if lam[i] > C:
                    lam[i] = C
                    lam[j] = total - C
                elif lam[j] > C:
                    lam[j] = C
                    lam[i] = total - C
            else:
                if lam[j] < 0:
                    lam[j] = 0.0
                    lam[i] = total
                elif lam[i] < 0:
                    lam[i] = 0.0
                    lam[j] = total
        grad += Q[:, i] * (lam[i] - old_i) + Q[:, j] * (lam[j] - old_j)
    else:
        raise RuntimeError(f"SMO did not converge within {max_iter} iterations")

    neg_ygrad = -y * grad
    up = ((y > 0) & (lam < C - 1e-12)) | ((y < 0) & (lam > 1e-12))
    low = ((y < 0) & (lam < C - 1e-12)) | ((y > 0) & (lam > 1e-12))
    hi = np.max(neg_ygrad[up]) if up.any() else 0.0
    lo = np.min(neg_ygrad[low]) if low.any() else 0.0
    bias = 0.5 * (hi + lo)
    return lam, float(bias), it + 1


def dual_objective(X, y, lam, gamma):
    """Value of the maximized dual: sum(lam) - 0.5 lam' Q lam."""
    K = rbf_kernel(X, X, gamma)
    Q = (np.asarray(y, float)[:, None] * np.asarray(y, float)[None, :]) * K
    lam = np.asarray(lam, dtype=np.float64)
    return float(np.sum(lam) - 0.5 * lam @ Q @ lam)


def smo_train(data, C, gamma, tol=1e-3):
    """Train a one-vs-rest RBF SVM on the train split of a dataset."""
    if C <= 0:
        raise ValueError(f"C must be positive, got {C}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    X = data.train_features
    labels = data.train_labels
    if X.shape[0] == 0:
        raise ValueError("dataset has no rows tagged train")
    classes = []
    for c in range(data.n_classes):
        y = np.where(labels == c, 1.0, -1.0)
        if not (y > 0).any():
            raise ValueError(f"class {c} has no training examples")
        if not (y < 0).any():
            raise ValueError(f"class {c} covers every training example; "
                             "one-vs-rest needs at least two classes")
        lam, bias, _ = smo_solve_binary(X, y, C, gamma, tol)
        mask = lam > 1e-10
        if not mask.any():
            # degenerate but possible with tiny C; keep the most central point
            mask = np.zeros_like(lam, dtype=bool)
            mask[int(np.argmax(lam))] = True
        classes.append(SvmClass(int(data.class_labels[c]), bias,
                                lam[mask] * y[mask], X[mask]))
    return MultiClassSvm(gamma, classes)


# -- datasets ------------------------------------------------------------


@dataclass
class Dataset:
    """Labelled feature rows with a per-row train/test tag."""

    features: np.ndarray
    labels: np.ndarray
    tags: np.ndarray = None
    class_labels: np.ndarray = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError("one label per row required")
        if self.tags is None:
            self.tags = np.full(self.features.shape[0], "train")
        self.tags = np.asarray(self.tags)
        if self.class_labels is None:
            self.class_labels = np.unique(self.labels)
        self.class_labels = np.asarray(self.class_labels)
        if self.labels.size and (self.labels.min() < 0
                                 or self.labels.max() >= len(self.class_labels)):
            raise ValueError("labels must be class ids in [0, n_classes)")

    @property
    def n_rows(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    @property
    def n_classes(self):
        return len(self.class_labels)

    @property
    def train_mask(self):
        return self.tags == "train"

    @property
    def train_features(self):
        return self.features[self.train_mask]

    @property
    def train_labels(self):
        return self.labels[self.train_mask]

    @property
    def test_features(self):
        return self.features[~self.train_mask]

    @property
    def test_labels(self):
        return self.labels[~self.train_mask]

    def class_proportions(self):
        out = {}
        for name, mask in (("train", self.train_mask), ("test", ~self.train_mask)):
            total = int(mask.sum())
            counts = np.bincount(self.labels[mask], minlength=self.n_classes)
            out[name] = [float(c) / total if total else 0.0 for c in counts]
        return out


def _map_labels(raw_labels):
    raw = np.asarray(raw_labels)
    uniq = np.unique(raw)
    ids = np.searchsorted(uniq, raw)
    as_int = uniq.astype(np.int64)
    if np.array_equal(as_int.astype(raw.dtype), uniq):
        uniq = as_int
    return ids, uniq


def load_dataset_csv(text, label_column):
    """Numeric CSV with one label column, selected by header name or index."""
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if any(cell.strip() for cell in r)]
    if not rows:
        raise ValueError("CSV: no data rows")
    header = None

    def numeric(cell):
        try:
            float(cell)
            return True
        except ValueError:
            return False

    if not all(numeric(c) for c in rows[0]):
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
        if not rows:
            raise ValueError("CSV: header only, no data rows")
    if isinstance(label_column, str):
        if header is None:
            raise ValueError(f"CSV: label column {label_column!r} given by name "
                             "but the file has no header row")
        if label_column not in header:
            raise ValueError(f"CSV: label column {label_column!r} not in header {header}")
        label_idx = header.index(label_column)
    else:
        label_idx = int(label_column)

    n_cols = len(rows[0])
    if not -n_cols <= label_idx < n_cols:
        raise ValueError(f"CSV: label column index {label_idx} out of range for "
                         f"{n_cols} columns")
    label_idx %= n_cols
    feats, raw_labels = [], []
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ValueError(f"CSV row {r}: expected {n_cols} cells, got {len(row)}")
        try:
            values = [float(c) for c in row]
        except ValueError:
            bad = next(c for c in row if not numeric(c))
            raise ValueError(f"CSV row {r}: non-numeric cell {bad!r}") from None
        raw_labels.append(values[label_idx])
        feats.append([v for k, v in enumerate(values) if k != label_idx])
    ids, uniq = _map_labels(raw_labels)
    return Dataset(np.array(feats), ids, class_labels=uniq)


def load_dataset_libsvm(text):
    """Sparse libsvm data lines: 'label idx:val ...' with 1-based indices."""
    entries = []
    raw_labels = []
    max_idx = 0
    for r, line in enumerate(text.splitlines()):
        line = line.strip()
        if not line:
            continue
        fields = line.split()
        try:
            raw_labels.append(float(fields[0]))
            pairs = []
            for item in fields[1:]:
                idx_s, val_s = item.split(":", 1)
                idx = int(idx_s)
                if idx < 1:
                    raise ValueError(f"index {idx} must be >= 1")
                pairs.append((idx, float(val_s)))
        except (ValueError, IndexError) as exc:
            raise ValueError(f"libsvm data row {r}: malformed line: {exc}") from exc
        entries.append(pairs)
        if pairs:
            max_idx = max(max_idx, max(i for i, _ in pairs))
    if not entries:
        raise ValueError("libsvm data: no rows")
    feats = np.zeros((len(entries), max(max_idx, 1)))
    for k, pairs in enumerate(entries):
        for idx, val in pairs:
            feats[k, idx - 1] = val
    ids, uniq = _map_labels(raw_labels)
    return Dataset(feats, ids, class_labels=uniq)


def split_dataset(data, ratio, seed):
    """Seeded uniform shuffle, then prefix split into train/test tags."""
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"split ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n_rows)
    n_train = int(math.floor(data.n_rows * ratio + 1e-9))
    tags = np.full(data.n_rows, "test", dtype="<U5")
    tags[perm[:n_train]] = "train"
    return Dataset(data.features, data.labels, tags, data.class_labels)
