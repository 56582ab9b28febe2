"""From-scratch neural networks regressing beta from configurations.

Layers: dense, 2-D convolution with periodic wrap (the inputs live on a
torus), ReLU, dropout, flatten and global average pooling, all in float64
numpy.  Training minimises the mean-squared error on labels scaled to [0, 1]
with Adam; every random choice (init, shuffling, dropout) flows from the
seeds through counter-mode streams, so training is bit-reproducible.

A network is described by a plain descriptor dict (JSON-able), e.g.::

    {"input": {"kind": "image", "channels": 2, "size": 8},
     "layers": [{"type": "conv", "filters": 32, "kernel": 3},
                {"type": "relu"},
                {"type": "flatten"},
                {"type": "dense", "units": 1}],
     "label_range": [0.0, 5.0]}

which keeps model files self-contained.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, replace

import numpy as np

from .data import SPIN, FEATURES, LabeledDataset
from .rng import DOMAIN_NN, BlockRng, stream_key

MODEL_MAGIC = b"TPRB1"


@dataclass(frozen=True)
class TrainConfig:
    """Optimisation hyperparameters (Adam) and data handling knobs.

    ``augment_translations`` applies an independent random periodic shift to
    every image-shaped sample in each batch (labels are shift-invariant on
    the torus); it is the built-in data augmentation option.
    """

    step_size: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 128
    epochs: int = 20
    seed: int = 0
    validation_fraction: float = 0.0
    augment_translations: bool = False
    step_decay: float = 1.0  # per-epoch multiplier on the step size

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be at least 1")
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation fraction must be in [0, 1)")
        if not 0.0 < self.step_decay <= 1.0:
            raise ValueError("step decay must be in (0, 1]")


class DenseLayer:
    def __init__(self, in_dim: int, out_dim: int):
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = np.zeros((in_dim, out_dim))
        self.b = np.zeros(out_dim)
        self.out_shape = (out_dim,)

    def init_params(self, rng: BlockRng):
        scale = 1.0 / np.sqrt(self.in_dim)
        self.w = (2.0 * rng.uniforms(self.w.shape) - 1.0) * scale
        self.b = np.zeros(self.out_dim)

    @property
    def params(self):
        return [self.w, self.b]

    def set_params(self, values):
        self.w, self.b = values

    def forward(self, x):
        return x @ self.w + self.b, x

    def backward(self, dout, cache):
        x = cache
        return dout @ self.w.T, [x.T @ dout, dout.sum(axis=0)]


class ReluLayer:
    params = []

    def __init__(self, shape):
        self.out_shape = shape

    def set_params(self, values):
        pass

    def forward(self, x):
        return np.maximum(x, 0.0), x

    def backward(self, dout, cache):
        return dout * (cache > 0), []


class DropoutLayer:
    """Inverted dropout; active only when a mask is supplied (training)."""

    params = []

    def __init__(self, rate: float, shape):
        if not 0.0 <= rate < 1.0:
            raise ValueError("dropout rate must be in [0, 1)")
        self.rate = rate
        self.out_shape = shape

    def set_params(self, values):
        pass

    def make_mask(self, rng: BlockRng, batch: int) -> np.ndarray:
        keep = rng.uniforms((batch,) + self.out_shape) >= self.rate
        return keep / (1.0 - self.rate)

    def forward(self, x, mask=None):
        if mask is None:
            return x, None
        return x * mask, mask

    def backward(self, dout, cache):
        if cache is None:
            return dout, []
        return dout * cache, []


class FlattenLayer:
    params = []

    def __init__(self, shape):
        self.in_shape = shape
        self.out_shape = (int(np.prod(shape)),)

    def set_params(self, values):
        pass

    def forward(self, x):
        return x.reshape(x.shape[0], -1), None

    def backward(self, dout, cache):
        return dout.reshape((dout.shape[0],) + self.in_shape), []


class GlobalAvgPoolLayer:
    params = []

    def __init__(self, shape):
        self.in_shape = shape  # (channels, n, n)
        self.out_shape = (shape[0],)

    def set_params(self, values):
        pass

    def forward(self, x):
        return x.mean(axis=(2, 3)), x.shape

    def backward(self, dout, cache):
        b, c, n, m = cache
        dx = np.broadcast_to(dout[:, :, None, None], (b, c, n, m)) / (n * m)
        return dx.copy(), []


class PeriodicConv2d:
    """Same-size 2-D convolution with periodic wrap on an n x n grid.

    Implemented by gathering the k^2 wrapped neighbourhoods of every site
    into columns and multiplying by the reshaped kernel; the input gradient
    is the dual convolution with negated offsets.
    """

    def __init__(self, in_ch: int, out_ch: int, kernel: int, n: int):
        self.in_ch, self.out_ch, self.kernel, self.n = in_ch, out_ch, kernel, n
        self.out_shape = (out_ch, n, n)
        self.w = np.zeros((out_ch, in_ch, kernel, kernel))
        self.b = np.zeros(out_ch)
        ys, xs = np.divmod(np.arange(n * n), n)
        dys, dxs = np.divmod(np.arange(kernel * kernel), kernel)
        idx_fwd = (
            ((ys[:, None] + dys[None, :]) % n) * n + (xs[:, None] + dxs[None, :]) % n
        )
        idx_bwd = (
            ((ys[:, None] - dys[None, :]) % n) * n + (xs[:, None] - dxs[None, :]) % n
        )
        # Fused gather indices into channel-flattened inputs: one fancy-index
        # produces columns in (site, channel*tap) layout ready for the GEMM.
        nsq, ksq = n * n, kernel * kernel
        chan_in = np.arange(in_ch) * nsq
        self.idx_cols = (chan_in[None, :, None] + idx_fwd[:, None, :]).reshape(
            nsq, in_ch * ksq
        )
        chan_out = np.arange(out_ch) * nsq
        self.idx_cols_bwd = (chan_out[None, :, None] + idx_bwd[:, None, :]).reshape(
            nsq, out_ch * ksq
        )

    def init_params(self, rng: BlockRng):
        fan_in = self.in_ch * self.kernel * self.kernel
        scale = 1.0 / np.sqrt(fan_in)
        self.w = (2.0 * rng.uniforms(self.w.shape) - 1.0) * scale
        self.b = np.zeros(self.out_ch)

    @property
    def params(self):
        return [self.w, self.b]

    def set_params(self, values):
        self.w, self.b = values

    def forward(self, x):
        batch = x.shape[0]
        nsq, ksq = self.n * self.n, self.kernel * self.kernel
        cols = x.reshape(batch, -1)[:, self.idx_cols]  # (B, nsq, in_ch*k^2)
        w2d = self.w.reshape(self.out_ch, self.in_ch * ksq)
        out = cols.reshape(batch * nsq, -1) @ w2d.T
        out = out.reshape(batch, nsq, self.out_ch) + self.b
        return out.transpose(0, 2, 1).reshape(batch, self.out_ch, self.n, self.n), cols

    def backward(self, dout, cache):
        cols = cache
        batch = dout.shape[0]
        nsq, ksq = self.n * self.n, self.kernel * self.kernel
        dflat = dout.reshape(batch, self.out_ch, nsq).transpose(0, 2, 1)
        dw2d = np.tensordot(dflat, cols, axes=([0, 1], [0, 1]))
        db = dflat.sum(axis=(0, 1))
        gathered = dout.reshape(batch, -1)[:, self.idx_cols_bwd]
        wt2d = self.w.transpose(1, 0, 2, 3).reshape(self.in_ch, self.out_ch * ksq)
        dx = gathered.reshape(batch * nsq, -1) @ wt2d.T
        dx = dx.reshape(batch, nsq, self.in_ch).transpose(0, 2, 1)
        return dx.reshape(batch, self.in_ch, self.n, self.n), [
            dw2d.reshape(self.w.shape),
            db,
        ]


def _build_layers(descriptor: dict):
    spec_in = descriptor["input"]
    if spec_in["kind"] == "image":
        shape = (int(spec_in["channels"]), int(spec_in["size"]), int(spec_in["size"]))
    elif spec_in["kind"] == "vector":
        shape = (int(spec_in["dim"]),)
    else:
        raise ValueError(f"unknown input kind {spec_in['kind']!r}")
    layers = []
    for entry in descriptor["layers"]:
        kind = entry["type"]
        if kind == "conv":
            if len(shape) != 3:
                raise ValueError("conv layers need image-shaped input")
            layer = PeriodicConv2d(shape[0], int(entry["filters"]), int(entry["kernel"]), shape[1])
        elif kind == "dense":
            if len(shape) != 1:
                raise ValueError("dense layers need flat input (add flatten/gap)")
            layer = DenseLayer(shape[0], int(entry["units"]))
        elif kind == "relu":
            layer = ReluLayer(shape)
        elif kind == "dropout":
            layer = DropoutLayer(float(entry["rate"]), shape)
        elif kind == "flatten":
            layer = FlattenLayer(shape)
        elif kind == "gap":
            if len(shape) != 3:
                raise ValueError("global average pooling needs image-shaped input")
            layer = GlobalAvgPoolLayer(shape)
        else:
            raise ValueError(f"unknown layer type {kind!r}")
        layers.append(layer)
        shape = layer.out_shape
    if shape != (1,):
        raise ValueError("network must end in a single output unit")
    return layers


class NeuralNet:
    """Feed-forward regressor; construct through :func:`nn_init`."""

    def __init__(self, descriptor: dict, seed: int):
        self.descriptor = descriptor
        self.seed = seed
        self.label_lo, self.label_hi = (float(v) for v in descriptor["label_range"])
        if not self.label_hi > self.label_lo:
            raise ValueError("label range must have positive width")
        self.layers = _build_layers(descriptor)

    # label scaling -------------------------------------------------------
    def scale_labels(self, beta):
        return (np.asarray(beta, dtype=np.float64) - self.label_lo) / (
            self.label_hi - self.label_lo
        )

    def descale(self, y):
        return self.label_lo + np.asarray(y, dtype=np.float64) * (
            self.label_hi - self.label_lo
        )

    # parameters ----------------------------------------------------------
    def parameters(self):
        return [p for layer in self.layers for p in layer.params]

    def set_parameters(self, values):
        pos = 0
        for layer in self.layers:
            k = len(layer.params)
            layer.set_params(values[pos : pos + k])
            pos += k

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    # forward / backward --------------------------------------------------
    def _forward(self, x, masks=None):
        caches = []
        mask_iter = iter(masks) if masks is not None else None
        for layer in self.layers:
            if isinstance(layer, DropoutLayer):
                mask = next(mask_iter) if mask_iter is not None else None
                x, cache = layer.forward(x, mask)
            else:
                x, cache = layer.forward(x)
            caches.append(cache)
        return x[:, 0], caches

    def draw_dropout_masks(self, rng: BlockRng, batch: int):
        return [
            layer.make_mask(rng, batch)
            for layer in self.layers
            if isinstance(layer, DropoutLayer)
        ]

    def loss_and_grads(self, x, y_scaled, masks=None):
        """Mean-squared error on scaled labels and its parameter gradients.

        ``masks`` fixes the dropout pattern, which makes the loss a smooth
        deterministic function of the parameters (what the finite-difference
        gradient check differentiates).
        """
        yhat, caches = self._forward(x, masks)
        diff = yhat - y_scaled
        loss = float(diff @ diff) / diff.size
        dout = (2.0 / diff.size) * diff[:, None]
        grads = []
        for layer, cache in zip(reversed(self.layers), reversed(caches)):
            dout, layer_grads = layer.backward(dout, cache)
            grads = layer_grads + grads
        return loss, grads

    def predict_scaled(self, x) -> np.ndarray:
        out = np.empty(x.shape[0])
        step = 512  # keeps conv gather temporaries modest
        for start in range(0, x.shape[0], step):
            out[start : start + step], _ = self._forward(x[start : start + step])
        return out

    def predict(self, x) -> np.ndarray:
        """Inference in beta units; dropout inactive."""
        return self.descale(self.predict_scaled(np.asarray(x, dtype=np.float64)))

    def predict_dataset(self, dataset: LabeledDataset) -> np.ndarray:
        return self.predict(dataset_inputs(dataset))


def dataset_inputs(dataset: LabeledDataset) -> np.ndarray:
    if dataset.kind == SPIN:
        return dataset.as_images()
    if dataset.kind == FEATURES:
        return dataset.values.astype(np.float64)
    raise ValueError(f"unsupported dataset kind {dataset.kind!r}")


def nn_init(descriptor: dict, seed: int) -> NeuralNet:
    """Deterministically initialised network: weights are fan-in-scaled
    uniforms drawn from the seed's stream, biases zero."""
    net = NeuralNet(descriptor, seed)
    rng = BlockRng(stream_key(seed, DOMAIN_NN, 0))
    for layer in net.layers:
        if isinstance(layer, (DenseLayer, PeriodicConv2d)):
            layer.init_params(rng)
    return net


def _translation_table(n: int) -> np.ndarray:
    """Site permutations for all n^2 periodic shifts of an n x n grid."""
    ys, xs = np.divmod(np.arange(n * n), n)
    dys, dxs = np.divmod(np.arange(n * n), n)
    return ((ys[None, :] + dys[:, None]) % n) * n + (xs[None, :] + dxs[:, None]) % n


def nn_train(
    dataset: LabeledDataset, net: NeuralNet, config: TrainConfig
) -> tuple[NeuralNet, list[dict]]:
    """Adam on the MSE loss; returns the trained net and per-epoch history.

    History entries carry the mean training batch loss (scaled-label units)
    and, when a validation fraction is set, the validation loss.  Aborts
    with a diagnostic if the loss stops being finite.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    if not np.isfinite(dataset.labels).all():
        raise ValueError("labels must be finite")
    x = dataset_inputs(dataset)
    y = net.scale_labels(dataset.labels)
    shifts = None
    if config.augment_translations:
        if x.ndim != 4:
            raise ValueError("translation augmentation needs image-shaped inputs")
        shifts = _translation_table(x.shape[-1])

    rng = BlockRng(stream_key(config.seed, DOMAIN_NN, 1))
    order = rng.permutation(len(dataset))
    val_count = int(config.validation_fraction * len(dataset))
    val_idx, train_idx = order[:val_count], order[val_count:]
    if train_idx.size == 0:
        raise ValueError("validation split leaves no training data")
    x_train, y_train = x[train_idx], y[train_idx]

    params = net.parameters()
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    t = 0
    history = []
    for epoch in range(config.epochs):
        step_size = config.step_size * config.step_decay**epoch
        perm = rng.permutation(train_idx.size)
        losses = []
        for start in range(0, train_idx.size, config.batch_size):
            batch = perm[start : start + config.batch_size]
            xb = x_train[batch]
            if shifts is not None:
                pick = (rng.uniforms(batch.size) * shifts.shape[0]).astype(np.int64)
                flat = xb.reshape(batch.size, xb.shape[1], -1)
                xb = flat[np.arange(batch.size)[:, None, None],
                          np.arange(xb.shape[1])[None, :, None],
                          shifts[pick][:, None, :]].reshape(xb.shape)
            masks = net.draw_dropout_masks(rng, batch.size)
            loss, grads = net.loss_and_grads(xb, y_train[batch], masks)
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting {start}"
                )
            losses.append(loss)
            t += 1
            for i, (p, g) in enumerate(zip(params, grads)):
                m[i] = config.beta1 * m[i] + (1 - config.beta1) * g
                v[i] = config.beta2 * v[i] + (1 - config.beta2) * g * g
                m_hat = m[i] / (1 - config.beta1**t)
                v_hat = v[i] / (1 - config.beta2**t)
                p -= step_size * m_hat / (np.sqrt(v_hat) + config.eps)
        entry = {"epoch": epoch, "train_loss": float(np.mean(losses))}
        if val_count:
            diff = net.predict_scaled(x[val_idx]) - y[val_idx]
            entry["val_loss"] = float(diff @ diff) / diff.size
        history.append(entry)
    return net, history


def ensemble_train(
    dataset: LabeledDataset,
    descriptor: dict,
    config: TrainConfig,
    seeds,
    pool_threads: int = 1,
) -> list[NeuralNet]:
    """Independently seeded trainings of the same architecture.

    Members are independent tasks; with ``pool_threads`` > 1 they run on a
    thread pool (numpy releases the GIL in the heavy matmuls) and the result
    order always follows ``seeds``.
    """
    seeds = [int(s) for s in seeds]

    def _one(seed: int) -> NeuralNet:
        net = nn_init(descriptor, seed)
        trained, _ = nn_train(dataset, net, replace(config, seed=seed))
        return trained

    if pool_threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=pool_threads) as pool:
            return list(pool.map(_one, seeds))
    return [_one(s) for s in seeds]


# architecture presets ------------------------------------------------------

_PRESETS = {
    # name: (conv specs, dense widths, dropout after dense?, scale note)
    "igt-desk": ([(32, 3), (32, 3)], [75, 25], None),
    "igt-paper": ([(128, 3), (128, 3)], [300, 100], None),
    "toric-x-desk": ([(25, 3), (25, 2)], [25], 0.15),
    "toric-x-paper": ([(100, 3), (100, 2)], [100], 0.15),
    "toric-z-desk": ([(32, 2), (32, 2)], [25, 25, 12], None),
    "toric-z-paper": ([(128, 2), (128, 2)], [100, 100, 50], None),
}


def architecture(name: str, label_range, n: int | None = None,
                 input_dim: int | None = None) -> dict:
    """Descriptor for a named architecture.

    Desk variants shrink the full-scale filter and neuron counts fourfold
    but keep the layer structure; ``stabilizer`` is a two-hidden-layer dense
    net (20 units each) on expectation-value vectors.
    """
    label_range = [float(label_range[0]), float(label_range[1])]
    if name == "stabilizer":
        if input_dim is None:
            raise ValueError("stabilizer architecture needs input_dim")
        layers = [
            {"type": "dense", "units": 20},
            {"type": "relu"},
            {"type": "dense", "units": 20},
            {"type": "relu"},
            {"type": "dense", "units": 1},
        ]
        return {
            "input": {"kind": "vector", "dim": int(input_dim)},
            "layers": layers,
            "label_range": label_range,
        }
    if name not in _PRESETS:
        raise ValueError(f"unknown architecture {name!r}")
    if n is None:
        raise ValueError(f"architecture {name!r} needs the lattice size n")
    convs, denses, dropout = _PRESETS[name]
    layers = []
    for filters, kernel in convs:
        layers.append({"type": "conv", "filters": filters, "kernel": kernel})
        layers.append({"type": "relu"})
    layers.append({"type": "flatten"})
    for units in denses:
        layers.append({"type": "dense", "units": units})
        layers.append({"type": "relu"})
    if dropout is not None:
        layers.append({"type": "dropout", "rate": dropout})
    layers.append({"type": "dense", "units": 1})
    return {
        "input": {"kind": "image", "channels": 2, "size": int(n)},
        "layers": layers,
        "label_range": label_range,
    }


# model files ----------------------------------------------------------------


def save_model(net: NeuralNet, path):
    """Versioned binary container: magic, JSON header, float64 LE blob."""
    header = json.dumps(
        {"format_version": 1, "descriptor": net.descriptor, "seed": net.seed},
        sort_keys=True,
    ).encode()
    blob = b"".join(np.ascontiguousarray(p, dtype="<f8").tobytes() for p in net.parameters())
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        fh.write(blob)


def load_model(path) -> NeuralNet:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path} is not a model file (bad magic)")
        (header_len,) = struct.unpack("<I", fh.read(4))
        header = json.loads(fh.read(header_len).decode())
        blob = fh.read()
    net = NeuralNet(header["descriptor"], header["seed"])
    values = []
    pos = 0
    for p in net.parameters():
        nbytes = p.size * 8
        arr = np.frombuffer(blob[pos : pos + nbytes], dtype="<f8").reshape(p.shape)
        values.append(arr.astype(np.float64))
        pos += nbytes
    if pos != len(blob):
        raise ValueError("model parameter blob has unexpected length")
    net.set_parameters(values)
    return net
