"""Per-location deep autoencoder: RBM-stack pretraining, unrolling, fine-tuning."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Sequence, Tuple

import numpy as np

from . import csi
from .csi import NormalizationParams
from .errors import Divergence, EmptyInput, NonFinite, ShapeMismatch
from .rbm import Rbm, RngStream, SAMPLING_MODES, _cd1_inplace, init_rbm, logistic

log = logging.getLogger(__name__)

FINETUNE_TOL = 1e-9
FINETUNE_RETRIES = 5


@dataclass(frozen=True)
class NetShape:
    k1: int
    k2: int
    k3: int
    k4: int
    n_in: int = csi.N_CSI

    def __post_init__(self):
        if not (self.k1 > self.k2 > self.k3 > self.k4 >= 1):
            raise ValueError(f"hidden widths must strictly decrease: {self.hidden}")
        if self.n_in < 1:
            raise ValueError("n_in must be positive")

    @property
    def hidden(self) -> Tuple[int, int, int, int]:
        return (self.k1, self.k2, self.k3, self.k4)

    @property
    def layer_dims(self) -> List[Tuple[int, int]]:
        """(fan_in, fan_out) of the four encoder layers."""
        dims = (self.n_in,) + self.hidden
        return [(dims[i], dims[i + 1]) for i in range(4)]

    @classmethod
    def parse(cls, text: str, n_in: int = csi.N_CSI) -> "NetShape":
        parts = [int(p) for p in text.split(",")]
        if len(parts) != 4:
            raise ValueError(f"shape needs four comma-separated widths, got {text!r}")
        return cls(*parts, n_in=n_in)


LIVING_ROOM_SHAPE = NetShape(300, 150, 100, 50)
LABORATORY_SHAPE = NetShape(500, 300, 150, 50)


@dataclass(frozen=True)
class TrainConfig:
    alpha: float = 0.01
    pretrain_epochs: int = 50
    finetune_epochs: int = 30
    finetune_lr: float = 0.005
    seed: int = 0
    cd_sampling: str = "probabilities"

    def __post_init__(self):
        if self.alpha <= 0 or self.finetune_lr <= 0:
            raise ValueError("alpha and finetune_lr must be positive")
        if self.pretrain_epochs < 0 or self.finetune_epochs < 0:
            raise ValueError("epoch counts must be non-negative")
        if self.cd_sampling not in SAMPLING_MODES:
            raise ValueError(f"cd_sampling must be one of {SAMPLING_MODES}")


@dataclass(frozen=True, eq=False)
class FingerprintModel:
    """Unrolled 8-layer autoencoder for one reference location.

    ``enc_w[i]`` maps layer i to layer i+1; ``dec_w[j]`` walks back down, so
    right after unrolling ``dec_w[j] == enc_w[3 - j].T``.
    """

    shape: NetShape
    enc_w: Tuple[np.ndarray, ...]
    enc_b: Tuple[np.ndarray, ...]
    dec_w: Tuple[np.ndarray, ...]
    dec_b: Tuple[np.ndarray, ...]
    norm: NormalizationParams
    location: Tuple[float, float]
    antennas: Tuple[int, ...] = csi.ALL_ANTENNAS

    def __post_init__(self):
        arrays = {}
        for name in ("enc_w", "enc_b", "dec_w", "dec_b"):
            seq = tuple(np.array(a, dtype=np.float64) for a in getattr(self, name))
            if len(seq) != 4:
                raise ShapeMismatch(f"{name} needs 4 entries, got {len(seq)}")
            for a in seq:
                if not np.all(np.isfinite(a)):
                    raise NonFinite(f"{name} contains non-finite values")
                a.setflags(write=False)
            arrays[name] = seq
        dims = self.shape.layer_dims
        for i, (fan_in, fan_out) in enumerate(dims):
            if arrays["enc_w"][i].shape != (fan_in, fan_out) or arrays["enc_b"][i].shape != (fan_out,):
                raise ShapeMismatch(f"encoder layer {i} does not match {self.shape}")
            fi, fo = dims[3 - i][1], dims[3 - i][0]
            if arrays["dec_w"][i].shape != (fi, fo) or arrays["dec_b"][i].shape != (fo,):
                raise ShapeMismatch(f"decoder layer {i} does not match {self.shape}")
        if len(self.antennas) * csi.N_SUBCARRIERS != self.shape.n_in:
            raise ShapeMismatch(f"antennas {self.antennas} do not give n_in={self.shape.n_in}")
        for name, seq in arrays.items():
            object.__setattr__(self, name, seq)
        object.__setattr__(self, "location", (float(self.location[0]), float(self.location[1])))
        object.__setattr__(self, "antennas", tuple(int(a) for a in self.antennas))

    @property
    def weights(self) -> List[np.ndarray]:
        return list(self.enc_w) + list(self.dec_w)

    @property
    def biases(self) -> List[np.ndarray]:
        return list(self.enc_b) + list(self.dec_b)

    def with_layers(self, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray]) -> "FingerprintModel":
        return replace(self, enc_w=tuple(weights[:4]), dec_w=tuple(weights[4:]),
                       enc_b=tuple(biases[:4]), dec_b=tuple(biases[4:]))

    def __eq__(self, other):
        if not isinstance(other, FingerprintModel):
            return NotImplemented
        same = (self.shape == other.shape and self.norm == other.norm
                and self.location == other.location and self.antennas == other.antennas)
        return same and all(np.array_equal(a, b) for a, b in
                            zip(self.weights + self.biases, other.weights + other.biases))


def _as_input(packets, n_in: int) -> np.ndarray:
    x = np.asarray(packets, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[0] == 0:
        raise EmptyInput("no packets")
    if x.shape[1] != n_in:
        raise ShapeMismatch(f"packets have {x.shape[1]} features, network expects {n_in}")
    return x


def pretrain(packets, shape: NetShape, cfg: TrainConfig) -> List[Rbm]:
    """Greedy layer-wise CD-1 training of the four stacked RBMs.

    Each RBM sees one packet per update. Layers above the first train on the
    activation probabilities of the frozen layers below.
    """
    x = _as_input(packets, shape.n_in)
    rng = RngStream(cfg.seed)
    rbms = []
    for fan_in, fan_out in shape.layer_dims:
        fresh = init_rbm(fan_in, fan_out, rng)
        w, bv, bh = fresh.w.copy(), fresh.b_vis.copy(), fresh.b_hid.copy()
        for _ in range(cfg.pretrain_epochs):
            for v0 in x:
                _cd1_inplace(w, bv, bh, v0, cfg.alpha, rng.generator, cfg.cd_sampling)
            if not np.all(np.isfinite(w)):
                raise NonFinite("pretraining diverged")
        trained = Rbm(w, bv, bh)
        rbms.append(trained)
        x = logistic(x @ trained.w + trained.b_hid)
    return rbms


def unroll(rbms: Sequence[Rbm], norm: NormalizationParams, location,
           antennas: Sequence[int] = csi.ALL_ANTENNAS) -> FingerprintModel:
    if len(rbms) != 4:
        raise ShapeMismatch(f"need 4 RBMs, got {len(rbms)}")
    for lower, upper in zip(rbms, rbms[1:]):
        if lower.n_hidden != upper.n_visible:
            raise ShapeMismatch("RBM stack shapes do not chain")
    shape = NetShape(*(r.n_hidden for r in rbms), n_in=rbms[0].n_visible)
    return FingerprintModel(
        shape=shape,
        enc_w=tuple(r.w for r in rbms),
        enc_b=tuple(r.b_hid for r in rbms),
        dec_w=tuple(r.w.T for r in reversed(rbms)),
        dec_b=tuple(r.b_vis for r in reversed(rbms)),
        norm=norm,
        location=location,
        antennas=tuple(antennas),
    )


def forward_layers(weights, biases, x, bias=True):
    acts = [x]
    for w, b in zip(weights, biases):
        z = acts[-1] @ w
        if bias:
            z = z + b
        acts.append(logistic(z))
    return acts


def reconstruct(model: FingerprintModel, v, bias: bool = True) -> np.ndarray:
    """Propagate through all eight sigmoid layers. Accepts one vector or a batch.

    ``bias=False`` drops every bias term during propagation.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.shape[-1] != model.shape.n_in:
        raise ShapeMismatch(f"input has {v.shape[-1]} features, model expects {model.shape.n_in}")
    return forward_layers(model.weights, model.biases, v, bias)[-1]


def reconstruction_error(model: FingerprintModel, packets) -> float:
    """Mean over packets of half the squared reconstruction error."""
    x = _as_input(packets, model.shape.n_in)
    r = reconstruct(model, x)
    return float(np.mean(0.5 * np.sum((x - r) ** 2, axis=1)))


def backprop(weights, biases, v):
    acts = forward_layers(weights, biases, v)
    delta = (acts[-1] - v) * acts[-1] * (1.0 - acts[-1])
    gw = [None] * 8
    gb = [None] * 8
    for layer in range(7, -1, -1):
        gw[layer] = np.outer(acts[layer], delta)
        gb[layer] = delta
        if layer:
            a = acts[layer]
            delta = (weights[layer] @ delta) * a * (1.0 - a)
    return gw, gb


def reconstruction_gradients(model: FingerprintModel, v):
    """Gradients of ``0.5 * ||v - reconstruct(v)||^2`` w.r.t. all 8 weights and biases."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (model.shape.n_in,):
        raise ShapeMismatch(f"v has shape {v.shape}, expected ({model.shape.n_in},)")
    return backprop(model.weights, model.biases, v)


def _sgd(model, x, epochs, lr):
    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(epochs):
            for v in x:
                gw, gb = backprop(weights, biases, v)
                for i in range(8):
                    weights[i] -= lr * gw[i]
                    biases[i] -= lr * gb[i]
            if not all(np.all(np.isfinite(w)) for w in weights):
                return None
    return weights, biases


def fine_tune(model: FingerprintModel, packets, cfg: TrainConfig) -> FingerprintModel:
    """Per-packet gradient descent on squared reconstruction error, weights untied.

    If the mean training error ends above where it started, the learning rate
    is halved and the run repeated, up to five times.
    """
    x = _as_input(packets, model.shape.n_in)
    if cfg.finetune_epochs == 0:
        return model
    start = reconstruction_error(model, x)
    lr = cfg.finetune_lr
    finite_seen = False
    for attempt in range(FINETUNE_RETRIES + 1):
        result = _sgd(model, x, cfg.finetune_epochs, lr)
        if result is not None:
            tuned = model.with_layers(*result)
            end = reconstruction_error(tuned, x)
            if np.isfinite(end):
                finite_seen = True
                if end <= start + FINETUNE_TOL:
                    return tuned
        log.debug("fine-tune attempt %d at lr=%g did not decrease error; halving", attempt, lr)
        lr /= 2.0
    if not finite_seen:
        raise Divergence("fine-tuning error stayed non-finite after retries")
    log.warning("fine-tuning never reduced the error; keeping the pretrained weights")
    return model


def train_location(packets, shape: NetShape, cfg: TrainConfig, location,
                   antennas: Sequence[int] = csi.ALL_ANTENNAS) -> FingerprintModel:
    """Normalize, pretrain, unroll and fine-tune the model of one location."""
    antennas = tuple(antennas)
    shape = replace(shape, n_in=csi.N_SUBCARRIERS * len(antennas))
    raw = csi.as_matrix(packets, antennas)
    if raw.shape[0] < 2:
        raise EmptyInput("need at least 2 packets to train a location")
    norm = csi.fit_normalization(raw)
    v = csi.normalize(raw, norm)
    rbms = pretrain(v, shape, cfg)
    model = unroll(rbms, norm, location, antennas)
    return fine_tune(model, v, cfg)
