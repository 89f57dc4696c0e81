"""Two-party split model: feature network f (non-label party), logit
head h (label party), logistic loss, and the split backward pass.

The cut layer is the boundary between f and h.  Per-example gradients
of the loss with respect to the cut features (the rows the label party
communicates back) are first-class here; batch averaging happens only
at the parameter-gradient level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

ACTIVATIONS = ("relu", "sigmoid", "tanh", "identity")


def _act(name: str, z: np.ndarray) -> np.ndarray:
    if name == "relu":
        return np.maximum(z, 0.0)
    if name == "sigmoid":
        return 1.0 / (1.0 + np.exp(-z))
    if name == "tanh":
        return np.tanh(z)
    if name == "identity":
        return z
    raise ValueError(f"unknown activation {name!r}")


def _act_grad(name: str, z: np.ndarray, a: np.ndarray) -> np.ndarray:
    # a is the cached activation output for z; avoids recomputing sigmoids
    if name == "relu":
        return (z > 0.0).astype(np.float64)
    if name == "sigmoid":
        return a * (1.0 - a)
    if name == "tanh":
        return 1.0 - a * a
    if name == "identity":
        return np.ones_like(z)
    raise ValueError(f"unknown activation {name!r}")


@dataclass(frozen=True)
class LayerSpec:
    in_dim: int
    out_dim: int
    activation: str = "relu"

    def __post_init__(self):
        if self.in_dim < 1 or self.out_dim < 1:
            raise ValueError(f"layer dims must be >= 1, got {self.in_dim}x{self.out_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass
class Layer:
    spec: LayerSpec
    W: np.ndarray  # (in_dim, out_dim)
    b: np.ndarray  # (out_dim,)


def _init_layer(spec: LayerSpec, rng: np.random.Generator) -> Layer:
    # uniform(-sqrt(6/(in+out)), +sqrt(6/(in+out)))
    limit = np.sqrt(6.0 / (spec.in_dim + spec.out_dim))
    W = rng.uniform(-limit, limit, size=(spec.in_dim, spec.out_dim))
    b = np.zeros(spec.out_dim)
    return Layer(spec, W, b)


@dataclass
class SplitNet:
    """Composition h(f(x)) split at the cut layer.

    f_layers ends at the cut features (dimension cut_dim); h_layers
    map the cut features to a single logit (last layer is identity,
    out_dim 1).
    """

    f_layers: list[Layer]
    h_layers: list[Layer]

    def __post_init__(self):
        if not self.f_layers or not self.h_layers:
            raise ValueError("both f and h must be nonempty")
        if self.f_layers[-1].spec.out_dim != self.h_layers[0].spec.in_dim:
            raise ValueError("f output dim must equal h input dim")
        if self.h_layers[-1].spec.out_dim != 1:
            raise ValueError("h must end in a single logit")

    @property
    def cut_dim(self) -> int:
        return self.f_layers[-1].spec.out_dim

    @property
    def in_dim(self) -> int:
        return self.f_layers[0].spec.in_dim

    @staticmethod
    def build(
        in_dim: int,
        hidden_dims: list[int],
        activations: list[str],
        cut_index: int,
        rng: np.random.Generator,
    ) -> "SplitNet":
        """Stack of hidden layers plus a final linear logit; the first
        cut_index hidden layers belong to f, the rest (possibly none)
        plus the logit layer belong to h."""
        if len(hidden_dims) != len(activations):
            raise ValueError("hidden_dims and activations must have equal length")
        if not 1 <= cut_index <= len(hidden_dims):
            raise ValueError(
                f"cut_index must be in [1, {len(hidden_dims)}], got {cut_index}"
            )
        dims = [in_dim] + list(hidden_dims)
        specs = [
            LayerSpec(dims[i], dims[i + 1], activations[i])
            for i in range(len(hidden_dims))
        ]
        specs.append(LayerSpec(dims[-1], 1, "identity"))  # logit layer
        layers = [_init_layer(s, rng) for s in specs]
        return SplitNet(f_layers=layers[:cut_index], h_layers=layers[cut_index:])


@dataclass
class ForwardState:
    """Cached forward pass for one batch (needed by both backward passes)."""

    net: SplitNet
    X: np.ndarray
    f_pre: list[np.ndarray]  # pre-activations z per f layer
    f_act: list[np.ndarray]  # activations a per f layer; f_act[-1] = cut features
    h_pre: list[np.ndarray]
    h_act: list[np.ndarray]
    logits: np.ndarray  # (B,)
    probs: np.ndarray  # sigmoid(logits)

    @property
    def cut_features(self) -> np.ndarray:
        return self.f_act[-1]


def _forward_layers(layers: list[Layer], x: np.ndarray):
    pres, acts = [], []
    a = x
    for layer in layers:
        z = a @ layer.W + layer.b
        a = _act(layer.spec.activation, z)
        pres.append(z)
        acts.append(a)
    return pres, acts


def forward(net: SplitNet, X: np.ndarray) -> ForwardState:
    """Full forward pass, caching every intermediate activation."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != net.in_dim:
        raise ValueError(f"X must be (B, {net.in_dim}), got {X.shape}")
    f_pre, f_act = _forward_layers(net.f_layers, X)
    h_pre, h_act = _forward_layers(net.h_layers, f_act[-1])
    logits = h_act[-1][:, 0]
    probs = 1.0 / (1.0 + np.exp(-logits))
    return ForwardState(net, X, f_pre, f_act, h_pre, h_act, logits, probs)


def logistic_loss(logit, y):
    """Cross-entropy in the stable softplus form log(1+exp(-l)) + (1-y) l.

    Accepts scalars or arrays; safe for |logit| up to ~1e3.
    """
    logit = np.asarray(logit, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    out = np.logaddexp(0.0, -logit) + (1.0 - y) * logit
    return float(out) if out.ndim == 0 else out


def _backward_layers(layers, pres, acts, input_act, delta):
    """Propagate upstream gradient `delta` (w.r.t. the final activation)
    back through `layers`; returns (param_grad_sums, delta at the input).

    Parameter gradients are sums over the batch (caller divides by B);
    `delta` stays per-example throughout.
    """
    param_grads = [None] * len(layers)
    for k in range(len(layers) - 1, -1, -1):
        layer = layers[k]
        dz = delta * _act_grad(layer.spec.activation, pres[k], acts[k])
        prev_act = acts[k - 1] if k > 0 else input_act
        dW = prev_act.T @ dz
        db = dz.sum(axis=0)
        param_grads[k] = (dW, db)
        delta = dz @ layer.W.T
    return param_grads, delta


def cut_gradients(state: ForwardState, y: np.ndarray) -> np.ndarray:
    """Per-example gradient of each example's own loss w.r.t. its cut
    features: row j equals (prob_j - y_j) * grad_z h(z)|_{z = f(X_j)}."""
    y = np.asarray(y, dtype=np.float64)
    upstream = (state.probs - y)[:, None]
    _, delta = _backward_layers(
        state.net.h_layers, state.h_pre, state.h_act, state.cut_features, upstream
    )
    return delta


def label_party_gradients(state: ForwardState, y: np.ndarray):
    """(per-example cut gradients, batch-mean h parameter gradients)."""
    y = np.asarray(y, dtype=np.float64)
    B = y.shape[0]
    upstream = (state.probs - y)[:, None]
    param_sums, delta = _backward_layers(
        state.net.h_layers, state.h_pre, state.h_act, state.cut_features, upstream
    )
    h_param_grads = [(dW / B, db / B) for dW, db in param_sums]
    return delta, h_param_grads


def backprop_nonlabel(net: SplitNet, state: ForwardState, received: np.ndarray):
    """Continue backprop from the (possibly perturbed) received cut-layer
    gradient matrix.

    Returns (batch-mean f parameter gradients, per-example gradients at
    the first hidden layer's activation).  Everything is linear in
    `received`, so unbiased received gradients give unbiased parameter
    gradients.
    """
    received = np.asarray(received, dtype=np.float64)
    B, d = state.cut_features.shape
    if received.shape != (B, d):
        raise ValueError(f"received must be {(B, d)}, got {received.shape}")
    param_sums, _ = _backward_layers(
        net.f_layers, state.f_pre, state.f_act, state.X, received
    )
    f_param_grads = [(dW / B, db / B) for dW, db in param_sums]
    # per-example gradient w.r.t. the first layer's activation output
    if len(net.f_layers) == 1:
        first_layer_grads = received
    else:
        _, first_layer_grads = _backward_layers(
            net.f_layers[1:],
            state.f_pre[1:],
            state.f_act[1:],
            state.f_act[0],
            received,
        )
    return f_param_grads, first_layer_grads


def h_feature_gradients(net: SplitNet, state: ForwardState) -> np.ndarray:
    """Rows grad_z h(z)|_{z=f(X_j)} (upstream 1 per example)."""
    ones = np.ones((state.logits.shape[0], 1))
    _, delta = _backward_layers(
        net.h_layers, state.h_pre, state.h_act, state.cut_features, ones
    )
    return delta


@dataclass
class GradientBundle:
    cut_gradients: np.ndarray
    first_layer_gradients: np.ndarray
    f_param_grads: list
    h_param_grads: list


def compute_gradients(
    net: SplitNet, state: ForwardState, y: np.ndarray, received: np.ndarray | None = None
) -> GradientBundle:
    """One full split backward pass.

    `received` is what the non-label party actually gets (defaults to
    the clean per-example cut gradients).
    """
    cut, h_grads = label_party_gradients(state, y)
    if received is None:
        received = cut
    f_grads, first = backprop_nonlabel(net, state, received)
    return GradientBundle(cut, first, f_grads, h_grads)


class SGD:
    def __init__(self, lr: float):
        self.lr = lr

    def update(self, layers: list[Layer], grads: list) -> None:
        for layer, (dW, db) in zip(layers, grads):
            layer.W -= self.lr * dW
            layer.b -= self.lr * db


class Adam:
    """Adam with bias correction; moment state persists across calls."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self._m: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._v: dict[int, tuple[np.ndarray, np.ndarray]] = {}

    def update(self, layers: list[Layer], grads: list) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for idx, (layer, (dW, db)) in enumerate(zip(layers, grads)):
            if idx not in self._m:
                self._m[idx] = (np.zeros_like(layer.W), np.zeros_like(layer.b))
                self._v[idx] = (np.zeros_like(layer.W), np.zeros_like(layer.b))
            mW, mb = self._m[idx]
            vW, vb = self._v[idx]
            mW[...] = b1 * mW + (1 - b1) * dW
            mb[...] = b1 * mb + (1 - b1) * db
            vW[...] = b2 * vW + (1 - b2) * dW * dW
            vb[...] = b2 * vb + (1 - b2) * db * db
            layer.W -= self.lr * (mW / c1) / (np.sqrt(vW / c2) + self.eps)
            layer.b -= self.lr * (mb / c1) / (np.sqrt(vb / c2) + self.eps)


def apply_update(net: SplitNet, grads: GradientBundle, optimizer) -> None:
    """In-place parameter update of both parties from one bundle.

    The optimizer keeps per-parameter state across calls, keyed by
    position (f layers first, then h layers).
    """
    optimizer.update(net.f_layers + net.h_layers, grads.f_param_grads + grads.h_param_grads)
