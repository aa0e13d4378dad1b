"""Minimal dense-layer networks with exact reverse-mode gradients.

A network is an ordered chain of fully connected layers, each with a
relu, linear or tanh activation.  Whole layers can be tied into named
share groups: tied layers reference one parameter copy, and gradients
accumulate over every occurrence.  The module also provides JSON
serialization and a central-finite-difference gradient check.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

ACTIVATIONS = ("relu", "linear", "tanh")


def _as_matrix(values, name):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-D matrix, got ndim={arr.ndim}")
    return arr


class Layer:
    """One dense layer: y = act(W x + b), weights stored (out_dim, in_dim)."""

    __slots__ = ("weights", "biases", "activation")

    def __init__(self, weights, biases, activation="relu"):
        self.weights = _as_matrix(weights, "weights")
        self.biases = np.asarray(biases, dtype=np.float64)
        if self.biases.ndim != 1:
            raise ValueError("biases must be a 1-D vector")
        if self.weights.shape[0] != self.biases.shape[0]:
            raise ValueError(
                f"weights rows ({self.weights.shape[0]}) must equal "
                f"biases length ({self.biases.shape[0]})"
            )
        if activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}, expected one of {ACTIVATIONS}")
        self.activation = activation

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]

    @property
    def n_params(self):
        return self.weights.size + self.biases.size

    def copy(self):
        return Layer(self.weights.copy(), self.biases.copy(), self.activation)

    def same_shape(self, other):
        return self.weights.shape == other.weights.shape and self.activation == other.activation

    def __repr__(self):
        return f"Layer({self.out_dim}x{self.in_dim}, {self.activation})"


def _activate(z, activation):
    if activation == "relu":
        return np.maximum(z, 0.0)
    if activation == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z, a, activation):
    # relu subgradient at exactly 0 is 0
    if activation == "relu":
        return (z > 0.0).astype(np.float64)
    if activation == "tanh":
        return 1.0 - a * a
    return np.ones_like(z)


@dataclass
class GradientBundle:
    """Per-layer parameter gradients plus the gradient w.r.t. the input.

    Layers tied in a share group alias one accumulated array (the sum of
    the gradients over every occurrence), so updating through
    ``Network.apply_gradients`` touches each distinct parameter once.
    """

    weight_grads: list = field(default_factory=list)
    bias_grads: list = field(default_factory=list)
    input_grad: np.ndarray = None


class Network:
    """Ordered chain of dense layers with optional layer tying.

    ``shares`` maps a group name to the layer indices tied together; all
    members must have identical shapes and values, and after construction
    they reference a single Layer object.
    """

    def __init__(self, layers, shares=None):
        self.layers = list(layers)
        self.shares = {name: list(idx) for name, idx in (shares or {}).items()}
        self._canonical = list(range(len(self.layers)))
        self._tie_shares()
        self._check_chain()
        self.build_info = {}

    # -- structure ----------------------------------------------------

    def _tie_shares(self):
        seen = set()
        for name, indices in self.shares.items():
            if not indices:
                raise ValueError(f"share group {name!r} is empty")
            for i in indices:
                if not 0 <= i < len(self.layers):
                    raise ValueError(f"share group {name!r}: layer index {i} out of range")
                if i in seen:
                    raise ValueError(f"layer {i} appears in more than one share group")
                seen.add(i)
            head = self.layers[indices[0]]
            for i in indices[1:]:
                if not self.layers[i].same_shape(head):
                    raise ValueError(
                        f"share group {name!r}: layer {i} shape differs from layer {indices[0]}"
                    )
                if not (
                    np.array_equal(self.layers[i].weights, head.weights)
                    and np.array_equal(self.layers[i].biases, head.biases)
                ):
                    raise ValueError(
                        f"share group {name!r}: layer {i} values differ from layer {indices[0]}"
                    )
                self.layers[i] = head
                self._canonical[i] = indices[0]

    def _check_chain(self):
        for k in range(1, len(self.layers)):
            if self.layers[k].in_dim != self.layers[k - 1].out_dim:
                raise ValueError(
                    f"layer {k}: in_dim {self.layers[k].in_dim} does not match "
                    f"layer {k - 1} out_dim {self.layers[k - 1].out_dim}"
                )

    @property
    def in_dim(self):
        return self.layers[0].in_dim if self.layers else 0

    @property
    def out_dim(self):
        return self.layers[-1].out_dim if self.layers else 0

    def canonical_index(self, i):
        return self._canonical[i]

    def distinct_indices(self):
        return [i for i in range(len(self.layers)) if self._canonical[i] == i]

    @property
    def n_params(self):
        return sum(self.layers[i].n_params for i in range(len(self.layers)))

    @property
    def n_distinct_params(self):
        return sum(self.layers[i].n_params for i in self.distinct_indices())

    def copy(self):
        distinct = {i: self.layers[i].copy() for i in self.distinct_indices()}
        net = Network(
            [distinct[self._canonical[i]] for i in range(len(self.layers))],
            {name: list(idx) for name, idx in self.shares.items()},
        )
        net.build_info = dict(self.build_info)
        return net

    # -- evaluation ---------------------------------------------------

    def _check_input(self, X):
        if not self.layers:
            return
        if X.shape[-1] != self.in_dim:
            raise ValueError(
                f"layer 0: input length {X.shape[-1]} does not match in_dim {self.in_dim}"
            )

    def forward(self, x):
        """Evaluate the network on a single input vector."""
        x = np.asarray(x, dtype=np.float64)
        return self.forward_batch(x[None, :])[0]

    def forward_batch(self, X):
        """Evaluate on a batch of row vectors, shape (n, in_dim)."""
        X = np.asarray(X, dtype=np.float64)
        self._check_input(X)
        a = X
        for layer in self.layers:
            z = a @ layer.weights.T + layer.biases
            a = _activate(z, layer.activation)
        return a

    def _forward_cached(self, X):
        acts = [X]
        pre = []
        a = X
        for layer in self.layers:
            z = a @ layer.weights.T + layer.biases
            a = _activate(z, layer.activation)
            pre.append(z)
            acts.append(a)
        return acts, pre

    def backward(self, x, upstream):
        """Gradients of upstream . forward(x) w.r.t. parameters and x."""
        x = np.asarray(x, dtype=np.float64)
        upstream = np.asarray(upstream, dtype=np.float64)
        bundle = self.backward_batch(x[None, :], upstream[None, :])
        bundle.input_grad = bundle.input_grad[0]
        return bundle

    def backward_batch(self, X, upstream):
        """Reverse-mode pass for a batch; parameter grads sum over rows.

        Returns a GradientBundle whose input_grad has shape (n, in_dim).
        Share-group members alias one accumulated gradient array.
        """
        X = np.asarray(X, dtype=np.float64)
        upstream = np.asarray(upstream, dtype=np.float64)
        self._check_input(X)
        if self.layers and upstream.shape[-1] != self.out_dim:
            raise ValueError(
                f"layer {len(self.layers) - 1}: upstream length {upstream.shape[-1]} "
                f"does not match out_dim {self.out_dim}"
            )
        acts, pre = self._forward_cached(X)
        n_layers = len(self.layers)
        wgrads = [None] * n_layers
        bgrads = [None] * n_layers
        delta = upstream
        for k in range(n_layers - 1, -1, -1):
            layer = self.layers[k]
            dz = delta * _activation_grad(pre[k], acts[k + 1], layer.activation)
            wgrads[k] = dz.T @ acts[k]
            bgrads[k] = dz.sum(axis=0)
            delta = dz @ layer.weights
        # accumulate tied layers into their canonical slot, then alias
        for k in range(n_layers):
            c = self._canonical[k]
            if c != k:
                wgrads[c] = wgrads[c] + wgrads[k]
                bgrads[c] = bgrads[c] + bgrads[k]
        for k in range(n_layers):
            c = self._canonical[k]
            if c != k:
                wgrads[k] = wgrads[c]
                bgrads[k] = bgrads[c]
        return GradientBundle(wgrads, bgrads, delta)

    def apply_gradients(self, bundle, learning_rate):
        """Vanilla gradient step; each distinct parameter updated once."""
        for i in self.distinct_indices():
            self.layers[i].weights -= learning_rate * bundle.weight_grads[i]
            self.layers[i].biases -= learning_rate * bundle.bias_grads[i]


def grad_check(net, x, epsilon, upstream=None):
    """Max relative error between analytic and central-difference gradients.

    Checks the scalar upstream . forward(x) over every distinct parameter;
    perturbing a tied parameter perturbs all its occurrences.  The relative
    difference is |analytic - fd| / max(1, |analytic|, |fd|).
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    x = np.asarray(x, dtype=np.float64)
    if upstream is None:
        upstream = np.ones(net.out_dim)
    upstream = np.asarray(upstream, dtype=np.float64)

    bundle = net.backward(x, upstream)

    def objective():
        return float(upstream @ net.forward(x))

    worst = 0.0
    for i in net.distinct_indices():
        layer = net.layers[i]
        for arr, grads in ((layer.weights, bundle.weight_grads[i]),
                           (layer.biases, bundle.bias_grads[i])):
            flat = arr.ravel()
            gflat = grads.ravel()
            for j in range(flat.size):
                orig = flat[j]
                flat[j] = orig + epsilon
                up = objective()
                flat[j] = orig - epsilon
                dn = objective()
                flat[j] = orig
                fd = (up - dn) / (2.0 * epsilon)
                g = gflat[j]
                rel = abs(g - fd) / max(1.0, abs(g), abs(fd))
                if rel > worst:
                    worst = rel
    return worst


# -- serialization ----------------------------------------------------
# Schema: {"layers": [{"activation": "relu|linear|tanh",
#                      "weights": [[...]], "biases": [...]}],
#          "shares": {"group": [indices]}}


def serialize(net):
    doc = {
        "layers": [
            {
                "activation": layer.activation,
                "weights": [list(row) for row in layer.weights],
                "biases": list(layer.biases),
            }
            for layer in net.layers
        ],
        "shares": {name: list(idx) for name, idx in net.shares.items()},
    }
    return json.dumps(doc)


def network_from_dict(doc, context="network"):
    if not isinstance(doc, dict):
        raise ValueError(f"{context}: expected an object")
    if "layers" not in doc:
        raise ValueError(f"{context}: missing field 'layers'")
    layers = []
    for k, entry in enumerate(doc["layers"]):
        for fieldname in ("activation", "weights", "biases"):
            if fieldname not in entry:
                raise ValueError(f"{context}: layers[{k}] missing field '{fieldname}'")
        try:
            layers.append(Layer(entry["weights"], entry["biases"], entry["activation"]))
        except ValueError as exc:
            raise ValueError(f"{context}: layers[{k}]: {exc}") from exc
    shares = doc.get("shares", {})
    try:
        return Network(layers, shares)
    except ValueError as exc:
        raise ValueError(f"{context}: {exc}") from exc


def deserialize(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"network JSON: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return network_from_dict(doc)


def networks_close(a, b, atol=0.0):
    """Structural equality of two networks (exact when atol=0)."""
    if len(a.layers) != len(b.layers) or a.shares != b.shares:
        return False
    for la, lb in zip(a.layers, b.layers):
        if la.activation != lb.activation or la.weights.shape != lb.weights.shape:
            return False
        if atol == 0.0:
            if not (np.array_equal(la.weights, lb.weights) and np.array_equal(la.biases, lb.biases)):
                return False
        else:
            if not (np.allclose(la.weights, lb.weights, atol=atol)
                    and np.allclose(la.biases, lb.biases, atol=atol)):
                return False
    return True


def finite_difference_input_grad(net, x, upstream, epsilon=1e-6):
    """Central-difference gradient of upstream . forward(x) w.r.t. x."""
    x = np.asarray(x, dtype=np.float64).copy()
    upstream = np.asarray(upstream, dtype=np.float64)
    out = np.zeros_like(x)
    for j in range(x.size):
        orig = x[j]
        x[j] = orig + epsilon
        up = float(upstream @ net.forward(x))
        x[j] = orig - epsilon
        dn = float(upstream @ net.forward(x))
        x[j] = orig
        out[j] = (up - dn) / (2.0 * epsilon)
    return out


def count_relu_units(net):
    return sum(layer.out_dim for layer in net.layers if layer.activation == "relu")
