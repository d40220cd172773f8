"""Reduced-space residual network surrogate of the parameter-to-state map.

The architecture is a stack of frozen affine layers around a small trainable
core: center the input, project it onto the input basis, map the input
coordinates to output coordinates with a dense bias-free layer, run five
low-rank residual blocks z + W2*softplus(W1 z + b1), then decode through the
output basis and add back the output mean. Only the dense layer and the
block tensors train; the bases and means are bit-copies of the projectors.

Forward, reverse-mode gradients, and the Adam loop are written directly in
numpy, which keeps every run bit-reproducible for fixed seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np
from scipy.special import expit

from .reduction import DataSet, Projector


@dataclass(frozen=True)
class NetConfig:
    r_m: int
    r_u: int
    n_blocks: int = 5
    block_rank: int = 20

    def __post_init__(self):
        if min(self.r_m, self.r_u, self.block_rank) < 1 or self.n_blocks < 0:
            raise ValueError("reduced dimensions and block rank must be positive")


@dataclass
class SurrogateWeights:
    # frozen copies of the projector data
    m_mean: np.ndarray
    in_basis: np.ndarray    # (q_m, r_m)
    u_mean: np.ndarray
    out_basis: np.ndarray   # (q_u, r_u)
    # trainable tensors
    dense: np.ndarray       # (r_u, r_m), no bias
    block_w1: list          # each (block_rank, r_u)
    block_b1: list          # each (block_rank,)
    block_w2: list          # each (r_u, block_rank)

    @property
    def n_blocks(self) -> int:
        return len(self.block_w1)

    @property
    def config(self) -> NetConfig:
        rank = self.block_w1[0].shape[0] if self.block_w1 else 1
        return NetConfig(
            r_m=self.in_basis.shape[1],
            r_u=self.out_basis.shape[1],
            n_blocks=self.n_blocks,
            block_rank=rank,
        )

    def trainable(self) -> list:
        """Live views of the trainable tensors, in declared order."""
        out = [self.dense]
        for w1, b1, w2 in zip(self.block_w1, self.block_b1, self.block_w2):
            out += [w1, b1, w2]
        return out

    def copy(self) -> "SurrogateWeights":
        return SurrogateWeights(
            m_mean=self.m_mean,
            in_basis=self.in_basis,
            u_mean=self.u_mean,
            out_basis=self.out_basis,
            dense=self.dense.copy(),
            block_w1=[w.copy() for w in self.block_w1],
            block_b1=[b.copy() for b in self.block_b1],
            block_w2=[w.copy() for w in self.block_w2],
        )


def _glorot(rng: np.random.Generator, n_out: int, n_in: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_out, n_in))


def init(cfg: NetConfig, proj_m: Projector, proj_u: Projector, seed: int) -> SurrogateWeights:
    """Fresh weights: Glorot-uniform trainables, zero biases, frozen projector copies."""
    if proj_m.rank != cfg.r_m or proj_u.rank != cfg.r_u:
        raise ValueError(
            f"projector ranks ({proj_m.rank}, {proj_u.rank}) do not match the net config "
            f"({cfg.r_m}, {cfg.r_u})"
        )
    rng = np.random.default_rng(seed)
    dense = _glorot(rng, cfg.r_u, cfg.r_m)
    w1, b1, w2 = [], [], []
    for _ in range(cfg.n_blocks):
        w1.append(_glorot(rng, cfg.block_rank, cfg.r_u))
        b1.append(np.zeros(cfg.block_rank))
        w2.append(_glorot(rng, cfg.r_u, cfg.block_rank))
    return SurrogateWeights(
        m_mean=proj_m.mean.copy(),
        in_basis=proj_m.basis.copy(),
        u_mean=proj_u.mean.copy(),
        out_basis=proj_u.basis.copy(),
        dense=dense,
        block_w1=w1,
        block_b1=b1,
        block_w2=w2,
    )


def _softplus(z: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, z)


def _forward_batch(w: SurrogateWeights, m_batch: np.ndarray):
    """Evaluate columns of m_batch; returns predictions and the backprop cache."""
    z0 = w.in_basis.T @ (m_batch - w.m_mean[:, None])
    z = w.dense @ z0
    zs, hs = [z], []
    for w1, b1, w2 in zip(w.block_w1, w.block_b1, w.block_w2):
        h = w1 @ z + b1[:, None]
        z = z + w2 @ _softplus(h)
        hs.append(h)
        zs.append(z)
    out = w.out_basis @ z + w.u_mean[:, None]
    return out, (z0, zs, hs)


def forward(w: SurrogateWeights, m: np.ndarray) -> np.ndarray:
    """Predicted state coefficients for one parameter vector."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (w.in_basis.shape[0],):
        raise ValueError(f"input length {m.shape} does not match the network ({w.in_basis.shape[0]},)")
    if not np.all(np.isfinite(m)):
        raise ValueError("non-finite network input")
    out, _ = _forward_batch(w, m[:, None])
    return out[:, 0]


def loss_and_grad(w: SurrogateWeights, m_batch: np.ndarray, u_batch: np.ndarray):
    """Mean squared coefficient error and its gradient over the trainables.

    loss = mean over the batch of |prediction - target|^2 / q_u; the gradient
    list is parallel to SurrogateWeights.trainable().
    """
    if m_batch.ndim != 2 or m_batch.shape[1] == 0:
        raise ValueError("batch must be a nonempty matrix of column samples")
    q_u, batch = u_batch.shape
    pred, (z0, zs, hs) = _forward_batch(w, m_batch)
    diff = pred - u_batch
    loss = float(np.sum(diff**2) / (batch * q_u))

    dz = w.out_basis.T @ (2.0 / (batch * q_u) * diff)
    grad_w1 = [None] * w.n_blocks
    grad_b1 = [None] * w.n_blocks
    grad_w2 = [None] * w.n_blocks
    for k in range(w.n_blocks - 1, -1, -1):
        a = _softplus(hs[k])
        grad_w2[k] = dz @ a.T
        dh = (w.block_w2[k].T @ dz) * expit(hs[k])
        grad_w1[k] = dh @ zs[k].T
        grad_b1[k] = dh.sum(axis=1)
        dz = dz + w.block_w1[k].T @ dh
    grad_dense = dz @ z0.T

    grads = [grad_dense]
    for k in range(w.n_blocks):
        grads += [grad_w1[k], grad_b1[k], grad_w2[k]]
    return loss, grads


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 500
    batch_size: int = 32
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    init_seed: int = 0
    shuffle_seed: int = 0


def split_indices(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic train/validation split: floor(0.1 n) validation samples."""
    perm = np.random.default_rng(seed).permutation(n)
    n_val = n // 10
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def train(
    net_cfg: NetConfig,
    train_cfg: TrainConfig,
    dataset: DataSet,
    proj_m: Projector,
    proj_u: Projector,
):
    """Adam over seeded shuffled minibatches; returns the best-validation weights.

    The history holds one (train loss, validation loss) pair per epoch; with
    fewer than ten samples the validation split is empty, the recorded
    validation loss is nan, and the final weights are returned instead.
    """
    weights = init(net_cfg, proj_m, proj_u, train_cfg.init_seed)
    train_idx, val_idx = split_indices(dataset.n_samples, train_cfg.shuffle_seed)
    m_train = dataset.m_data[:, train_idx]
    u_train = dataset.u_data[:, train_idx]
    m_val = dataset.m_data[:, val_idx]
    u_val = dataset.u_data[:, val_idx]

    params = weights.trainable()
    moment1 = [np.zeros_like(p) for p in params]
    moment2 = [np.zeros_like(p) for p in params]
    step = 0
    rng = np.random.default_rng([train_cfg.shuffle_seed, 1])

    history = []
    best_val = np.inf
    best_weights = weights.copy()
    n_train = m_train.shape[1]
    for epoch in range(train_cfg.epochs):
        order = rng.permutation(n_train)
        epoch_loss = 0.0
        for lo in range(0, n_train, train_cfg.batch_size):
            batch = order[lo : lo + train_cfg.batch_size]
            loss, grads = loss_and_grad(weights, m_train[:, batch], u_train[:, batch])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, batch offset {lo}"
                )
            epoch_loss += loss * len(batch)
            step += 1
            c1 = 1.0 - train_cfg.beta1**step
            c2 = 1.0 - train_cfg.beta2**step
            for p, g, m1, m2 in zip(params, grads, moment1, moment2):
                m1 *= train_cfg.beta1
                m1 += (1.0 - train_cfg.beta1) * g
                m2 *= train_cfg.beta2
                m2 += (1.0 - train_cfg.beta2) * g**2
                p -= train_cfg.learning_rate * (m1 / c1) / (np.sqrt(m2 / c2) + train_cfg.eps)

        if m_val.shape[1]:
            val_loss, _ = loss_and_grad(weights, m_val, u_val)
            if val_loss < best_val:
                best_val = val_loss
                best_weights = weights.copy()
        else:
            val_loss = float("nan")
        history.append((epoch_loss / n_train, val_loss))

    if not m_val.shape[1]:
        best_weights = weights.copy()
    return best_weights, history


@dataclass(frozen=True)
class EvalResult:
    per_sample: np.ndarray   # normalized percentage errors
    min: float
    max: float
    mean: float


def evaluate(weights: SurrogateWeights, m_test: np.ndarray, u_test: np.ndarray) -> EvalResult:
    """Normalized percentage coefficient errors over test columns."""
    ref_norms = np.linalg.norm(u_test, axis=0)
    if np.any(ref_norms == 0.0):
        raise ValueError("a reference state has zero norm")
    pred, _ = _forward_batch(weights, np.asarray(m_test, dtype=np.float64))
    errs = 100.0 * np.linalg.norm(pred - u_test, axis=0) / ref_norms
    return EvalResult(per_sample=errs, min=float(errs.min()), max=float(errs.max()), mean=float(errs.mean()))
