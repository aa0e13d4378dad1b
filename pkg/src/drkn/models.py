"""Deep radial kernel networks assembled from SVMs, plus the RBF baseline.

A DRKN replaces the SVM's Gaussian kernel with a shared fold network
applied to V - x for every support vector: one stored parameter copy,
gradient contributions summed over all uses.  Class scores pass through
1/2 + 1/2 tanh before the argmax.  The RBF baseline keeps an exact
Gaussian neuron with the same trainable parameterization (kernel width,
centres, coefficients, biases) for comparison runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .folds import build_radial_net
from .network import Layer, Network, network_from_dict, serialize
from .profiles import fit_wendland_to_gaussian, wendland_q31
from .svm import SvmClass, rbf_kernel


@dataclass
class DrknModel:
    """Shared fold network plus per-class trainable support-vector units."""

    fold_net: Network
    classes: list
    gamma: float
    wendland_R: float
    delta: float

    @property
    def dim(self):
        return self.classes[0].support_vectors.shape[1]

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def labels(self):
        return [c.label for c in self.classes]

    def sv_matrix(self):
        return np.vstack([c.support_vectors for c in self.classes])

    def class_slices(self):
        slices = []
        start = 0
        for cls in self.classes:
            stop = start + cls.support_vectors.shape[0]
            slices.append(slice(start, stop))
            start = stop
        return slices

    def copy(self):
        return DrknModel(
            self.fold_net.copy(),
            [SvmClass(c.label, float(c.bias), c.alphas.copy(), c.support_vectors.copy())
             for c in self.classes],
            self.gamma, self.wendland_R, self.delta,
        )


@dataclass
class RbfModel:
    """Gaussian-neuron baseline with the same trainable parameterization."""

    gamma: float
    classes: list

    @property
    def dim(self):
        return self.classes[0].support_vectors.shape[1]

    @property
    def n_classes(self):
        return len(self.classes)

    @property
    def labels(self):
        return [c.label for c in self.classes]

    def copy(self):
        return RbfModel(
            float(self.gamma),
            [SvmClass(c.label, float(c.bias), c.alphas.copy(), c.support_vectors.copy())
             for c in self.classes],
        )


def default_assembly_delta(svm):
    """0.01 / max_c sum_i |alpha_ci|, clipped to [1e-4, 0.05].

    Keeps the coefficient-weighted score error of the fold approximation
    near 0.01 without letting the network explode for huge coefficients.
    """
    heaviest = max(float(np.sum(np.abs(c.alphas))) for c in svm.classes)
    return float(np.clip(0.01 / max(heaviest, 1e-12), 1e-4, 0.05))


def wendland_svm_scores_batch(svm, profile, X):
    """SVM scores with the Gaussian kernel replaced by a compact profile."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    scores = np.empty((X.shape[0], svm.n_classes))
    for c, cls in enumerate(svm.classes):
        diffs = X[:, None, :] - cls.support_vectors[None, :, :]
        dists = np.linalg.norm(diffs, axis=2)
        scores[:, c] = profile.value(dists) @ cls.alphas + cls.bias
    return scores


def _assembly_probes(svm, n_probes=100, seed=0):
    rng = np.random.default_rng(seed)
    sv = np.vstack([c.support_vectors for c in svm.classes])
    center = sv.mean(axis=0)
    spread = float(np.max(sv.std(axis=0))) + 1.0
    return center + spread * rng.standard_normal((n_probes, sv.shape[1]))


def assemble_drkn(svm, delta=None, check_probes=100):
    """Build the trainable fold-network model of a trained RBF SVM.

    Fits the Wendland support radius to the SVM's Gaussian, builds the
    shared fold network at accuracy delta, copies support vectors,
    coefficients and biases, and asserts the assembly-time score bound
    |score_drkn - score_wendland_svm| <= sum|alpha| * (L sqrt(delta) + delta)
    on seeded probe points.
    """
    if delta is None:
        delta = default_assembly_delta(svm)
    if delta <= 0:
        raise ValueError(f"delta must be positive, got {delta}")
    wendland_R = fit_wendland_to_gaussian(svm.gamma)
    profile = wendland_q31(wendland_R)
    fold_net = build_radial_net(profile, svm.dim, delta)
    model = DrknModel(
        fold_net,
        [SvmClass(c.label, float(c.bias), c.alphas.copy(), c.support_vectors.copy())
         for c in svm.classes],
        svm.gamma, wendland_R, delta,
    )
    if check_probes:
        probes = _assembly_probes(svm, check_probes)
        got = drkn_raw_scores_batch(model, probes)
        want = wendland_svm_scores_batch(svm, profile, probes)
        bound = fold_net.build_info["error_bound"]
        for c, cls in enumerate(svm.classes):
            budget = float(np.sum(np.abs(cls.alphas))) * bound + 1e-9
            worst = float(np.max(np.abs(got[:, c] - want[:, c])))
            if worst > budget:
                raise AssertionError(
                    f"assembly score gap {worst:.3e} exceeds the contracted "
                    f"bound {budget:.3e} for class {cls.label}")
    return model


def drkn_raw_scores_batch(model, X):
    """Pre-squash class scores s_c = sum_i alpha_ci F_n(V_ci - x) + b_c."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match model dim {model.dim}")
    sv = model.sv_matrix()
    n, n_sv = X.shape[0], sv.shape[0]
    diffs = (sv[None, :, :] - X[:, None, :]).reshape(n * n_sv, model.dim)
    z = model.fold_net.forward_batch(diffs)[:, 0].reshape(n, n_sv)
    scores = np.empty((n, model.n_classes))
    for c, (cls, sl) in enumerate(zip(model.classes, model.class_slices())):
        scores[:, c] = z[:, sl] @ cls.alphas + cls.bias
    return scores


def drkn_scores(model, x):
    return drkn_raw_scores_batch(model, np.asarray(x, float)[None, :])[0]


def squash(scores):
    """Eq-style output map 1/2 + 1/2 tanh(s); monotone, preserves argmax."""
    return 0.5 + 0.5 * np.tanh(scores)


def drkn_outputs_batch(model, X):
    return squash(drkn_raw_scores_batch(model, X))


def drkn_decision(model, x):
    return int(np.argmax(drkn_outputs_batch(model, np.asarray(x, float)[None, :])[0]))


def drkn_decision_batch(model, X):
    return np.argmax(drkn_outputs_batch(model, X), axis=1)


def drkn_parameter_count(model):
    """Distinct trainable parameters: |F_n| + sum_c N_cv (d+1) + n_classes."""
    sv_params = sum(c.support_vectors.size + c.alphas.size for c in model.classes)
    return model.fold_net.n_distinct_params + sv_params + model.n_classes


@dataclass
class DrknGradients:
    fold_bundle: object
    sv_grads: list
    alpha_grads: list
    bias_grads: list


def drkn_score_gradients(model, X, upstream_scores):
    """Gradients of sum(upstream * raw_scores) w.r.t. every trainable part.

    upstream_scores has shape (n, n_classes).  Fold-network gradients
    accumulate over every (class, support vector, example) use of the
    shared parameters; support-vector gradients flow through the
    subtraction V - x with +1 sign.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    upstream_scores = np.asarray(upstream_scores, dtype=np.float64)
    sv = model.sv_matrix()
    n, n_sv = X.shape[0], sv.shape[0]
    diffs = (sv[None, :, :] - X[:, None, :]).reshape(n * n_sv, model.dim)
    z = model.fold_net.forward_batch(diffs)[:, 0].reshape(n, n_sv)

    dz = np.empty_like(z)
    alpha_grads, bias_grads = [], []
    for c, (cls, sl) in enumerate(zip(model.classes, model.class_slices())):
        dz[:, sl] = upstream_scores[:, c][:, None] * cls.alphas[None, :]
        alpha_grads.append(upstream_scores[:, c] @ z[:, sl])
        bias_grads.append(float(np.sum(upstream_scores[:, c])))
    bundle = model.fold_net.backward_batch(diffs, dz.reshape(n * n_sv, 1))
    d_diffs = bundle.input_grad.reshape(n, n_sv, model.dim)
    sv_grad_full = d_diffs.sum(axis=0)
    sv_grads = [sv_grad_full[sl] for sl in model.class_slices()]
    return DrknGradients(bundle, sv_grads, alpha_grads, bias_grads)


def drkn_apply_gradients(model, grads, learning_rate):
    model.fold_net.apply_gradients(grads.fold_bundle, learning_rate)
    for cls, dv, da, db in zip(model.classes, grads.sv_grads,
                               grads.alpha_grads, grads.bias_grads):
        cls.support_vectors -= learning_rate * dv
        cls.alphas -= learning_rate * da
        cls.bias -= learning_rate * db


# -- RBF baseline --------------------------------------------------------


def assemble_rbf_baseline(svm):
    """Exact copy of the SVM into the trainable Gaussian-neuron model."""
    return RbfModel(
        float(svm.gamma),
        [SvmClass(c.label, float(c.bias), c.alphas.copy(), c.support_vectors.copy())
         for c in svm.classes],
    )


def rbf_scores_batch(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.dim:
        raise ValueError(f"input dimension {X.shape[1]} does not match model dim {model.dim}")
    scores = np.empty((X.shape[0], model.n_classes))
    for c, cls in enumerate(model.classes):
        scores[:, c] = rbf_kernel(X, cls.support_vectors, model.gamma) @ cls.alphas + cls.bias
    return scores


def rbf_scores(model, x):
    return rbf_scores_batch(model, np.asarray(x, float)[None, :])[0]


def rbf_outputs_batch(model, X):
    return squash(rbf_scores_batch(model, X))


def rbf_decision_batch(model, X):
    return np.argmax(rbf_outputs_batch(model, X), axis=1)


@dataclass
class RbfGradients:
    gamma_grad: float
    sv_grads: list
    alpha_grads: list
    bias_grads: list


def rbf_score_gradients(model, X, upstream_scores):
    """Gradients of sum(upstream * raw_scores) for the Gaussian baseline."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    upstream_scores = np.asarray(upstream_scores, dtype=np.float64)
    gamma_grad = 0.0
    sv_grads, alpha_grads, bias_grads = [], [], []
    for c, cls in enumerate(model.classes):
        diffs = cls.support_vectors[None, :, :] - X[:, None, :]
        sq = np.sum(diffs * diffs, axis=2)
        K = np.exp(-model.gamma * sq)
        u = upstream_scores[:, c]
        alpha_grads.append(u @ K)
        bias_grads.append(float(np.sum(u)))
        dK = u[:, None] * cls.alphas[None, :]
        gamma_grad += float(np.sum(dK * (-sq) * K))
        coeff = dK * K * (-2.0 * model.gamma)
        sv_grads.append(np.einsum("nk,nkd->kd", coeff, diffs))
    return RbfGradients(gamma_grad, sv_grads, alpha_grads, bias_grads)


def rbf_apply_gradients(model, grads, learning_rate):
    model.gamma = float(model.gamma - learning_rate * grads.gamma_grad)
    for cls, dv, da, db in zip(model.classes, grads.sv_grads,
                               grads.alpha_grads, grads.bias_grads):
        cls.support_vectors -= learning_rate * dv
        cls.alphas -= learning_rate * da
        cls.bias -= learning_rate * db


# -- expanded single-chain view (evaluation oracle) -----------------------


def expand_drkn_network(model):
    """The DRKN as one layered chain: subtraction, replicated fold blocks,
    per-class summation with tanh, then the affine 1/2 + 1/2 map.

    Evaluation equals the model's own score path; used as a two-path
    oracle for the shared-parameter bookkeeping.
    """
    d = model.dim
    sv = model.sv_matrix()
    n_sv = sv.shape[0]
    sub = Layer(np.tile(-np.eye(d), (n_sv, 1)), sv.ravel(), "linear")
    layers = [sub]
    for fl in model.fold_net.layers:
        layers.append(Layer(np.kron(np.eye(n_sv), fl.weights),
                            np.tile(fl.biases, n_sv), fl.activation))
    sum_w = np.zeros((model.n_classes, n_sv))
    biases = np.zeros(model.n_classes)
    for c, (cls, sl) in enumerate(zip(model.classes, model.class_slices())):
        sum_w[c, sl] = cls.alphas
        biases[c] = cls.bias
    layers.append(Layer(sum_w, biases, "tanh"))
    layers.append(Layer(0.5 * np.eye(model.n_classes),
                        0.5 * np.ones(model.n_classes), "linear"))
    return Network(layers)


# -- serialization ---------------------------------------------------------
# DRKN schema: {"kind": "drkn", "gamma": g, "wendland_R": R, "delta": d,
#               "fold_net": <network schema>, "classes": [...]}
# RBF schema:  {"kind": "rbf", "gamma": g, "classes": [...]}


def _classes_to_json(classes):
    return [
        {
            "label": c.label,
            "bias": c.bias,
            "alphas": list(c.alphas),
            "support_vectors": [list(v) for v in c.support_vectors],
        }
        for c in classes
    ]


def _classes_from_json(entries, context):
    classes = []
    for k, entry in enumerate(entries):
        for fieldname in ("label", "bias", "alphas", "support_vectors"):
            if fieldname not in entry:
                raise ValueError(f"{context}: classes[{k}] missing field '{fieldname}'")
        classes.append(SvmClass(int(entry["label"]), float(entry["bias"]),
                                entry["alphas"], entry["support_vectors"]))
    return classes


def emit_drkn_json(model):
    doc = {
        "kind": "drkn",
        "gamma": model.gamma,
        "wendland_R": model.wendland_R,
        "delta": model.delta,
        "fold_net": json.loads(serialize(model.fold_net)),
        "classes": _classes_to_json(model.classes),
    }
    return json.dumps(doc)


def parse_drkn_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"DRKN JSON: line {exc.lineno}: {exc.msg}") from exc
    if doc.get("kind") != "drkn":
        raise ValueError(f"DRKN JSON: field 'kind' must be 'drkn', got {doc.get('kind')!r}")
    for fieldname in ("gamma", "wendland_R", "delta", "fold_net", "classes"):
        if fieldname not in doc:
            raise ValueError(f"DRKN JSON: missing field '{fieldname}'")
    fold_net = network_from_dict(doc["fold_net"], context="DRKN JSON: fold_net")
    classes = _classes_from_json(doc["classes"], "DRKN JSON")
    return DrknModel(fold_net, classes, float(doc["gamma"]),
                     float(doc["wendland_R"]), float(doc["delta"]))


def emit_rbf_json(model):
    doc = {
        "kind": "rbf",
        "gamma": model.gamma,
        "classes": _classes_to_json(model.classes),
    }
    return json.dumps(doc)


def parse_rbf_json(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"RBF JSON: line {exc.lineno}: {exc.msg}") from exc
    if doc.get("kind") != "rbf":
        raise ValueError(f"RBF JSON: field 'kind' must be 'rbf', got {doc.get('kind')!r}")
    for fieldname in ("gamma", "classes"):
        if fieldname not in doc:
            raise ValueError(f"RBF JSON: missing field '{fieldname}'")
    return RbfModel(float(doc["gamma"]), _classes_from_json(doc["classes"], "RBF JSON"))
