"""CTNet: a sinogram-as-sequence 1D-CNN encoder, a residual 2D decoder, and
an optional discriminator, trained to predict a CT slice directly from a
limited-angle sinogram.

The encoder treats detector bins as input channels and runs one valid 1D
convolution per window size along the view axis, followed by ReLU and
max-over-time pooling; the pooled slices concatenate into a fixed-length
latent regardless of the number of views. The decoder projects the latent to
a coarse grid and upsamples through residual stages to the image.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .nn import (
    AdamState,
    BatchNorm,
    Conv1d,
    Conv2d,
    Dense,
    LayerSpec,
    LeakyReLU,
    MaxOverTime,
    Network,
    ReLU,
    Reshape,
    ResidualBlock,
    Sigmoid,
    adam_step,
)
from .projector import Sinogram

__all__ = [
    "EncoderConfig",
    "DecoderConfig",
    "DiscriminatorConfig",
    "TrainConfig",
    "LossBreakdown",
    "CtNetModel",
    "Trainer",
    "compute_losses",
    "train",
]

_PROB_CLAMP = 1e-7


@dataclass(frozen=True)
class EncoderConfig:
    n_bins: int = 93
    window_sizes: tuple[int, ...] = (1, 2, 3, 4, 5)
    n_filters: int = 64

    @property
    def latent_dim(self) -> int:
        return self.n_filters * len(self.window_sizes)


@dataclass(frozen=True)
class DecoderConfig:
    latent_dim: int = 320
    base_size: int = 8
    base_channels: int = 64
    stage_channels: tuple[int, ...] = (32, 16, 16)

    @property
    def out_size(self) -> int:
        return self.base_size * 2 ** len(self.stage_channels)


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_size: int = 64
    conv_channels: tuple[int, int] = (64, 32)
    dense_hidden: int = 16


@dataclass(frozen=True)
class TrainConfig:
    """Loss mode plus optimizer settings; lr/beta1 default per mode
    (1e-3 / 0.9 for mse, 2e-4 / 0.5 for adversarial)."""

    loss_mode: str = "mse"  # "mse" | "adversarial"
    lr: float | None = None
    beta1: float | None = None
    adv_weight: float = 0.05
    batch_size: int = 16
    epochs: int = 30
    seed: int = 0

    def __post_init__(self):
        if self.loss_mode not in ("mse", "adversarial"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")
        if self.adv_weight < 0:
            raise ValueError("adv_weight must be >= 0")
        if self.lr is not None and self.lr < 0:
            raise ValueError("lr must be >= 0")

    @property
    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if self.loss_mode == "mse" else 2e-4

    @property
    def resolved_beta1(self) -> float:
        if self.beta1 is not None:
            return self.beta1
        return 0.9 if self.loss_mode == "mse" else 0.5


def _encoder_branch_specs(cfg: EncoderConfig, window: int) -> list[LayerSpec]:
    return [
        LayerSpec("conv1d", {"window": window, "in_channels": cfg.n_bins, "out_channels": cfg.n_filters}),
        LayerSpec("relu"),
        LayerSpec("max_over_time"),
    ]


def _decoder_specs(cfg: DecoderConfig) -> list[LayerSpec]:
    specs = [
        LayerSpec(
            "dense",
            {"in_features": cfg.latent_dim, "out_features": cfg.base_channels * cfg.base_size**2},
        ),
        LayerSpec("reshape", {"tail_shape": (cfg.base_size, cfg.base_size, cfg.base_channels)}),
    ]
    ch = cfg.base_channels
    for out_ch in cfg.stage_channels:
        specs += [
            LayerSpec("upsample2x"),
            LayerSpec("conv2d", {"in_channels": ch, "out_channels": out_ch, "kernel_size": 3, "padding": 1}),
            LayerSpec("batchnorm", {"num_features": out_ch}),
            LayerSpec("relu"),
            LayerSpec("residual_block", {"channels": out_ch}),
        ]
        ch = out_ch
    specs += [
        LayerSpec("conv2d", {"in_channels": ch, "out_channels": 1, "kernel_size": 3, "padding": 1}),
        LayerSpec("relu"),
    ]
    return specs


def _discriminator_specs(cfg: DiscriminatorConfig) -> list[LayerSpec]:
    c1, c2 = cfg.conv_channels
    flat = c2 * (cfg.in_size // 4) ** 2
    return [
        LayerSpec("conv2d", {"in_channels": 1, "out_channels": c1, "kernel_size": 7, "stride": 2, "padding": 3}),
        LayerSpec("batchnorm", {"num_features": c1}),
        LayerSpec("leaky_relu"),
        LayerSpec("conv2d", {"in_channels": c1, "out_channels": c2, "kernel_size": 7, "stride": 2, "padding": 3}),
        LayerSpec("batchnorm", {"num_features": c2}),
        LayerSpec("leaky_relu"),
        LayerSpec("dense", {"in_features": flat, "out_features": cfg.dense_hidden}),
        LayerSpec("batchnorm", {"num_features": cfg.dense_hidden}),
        LayerSpec("leaky_relu"),
        LayerSpec("dense", {"in_features": cfg.dense_hidden, "out_features": 1}),
        LayerSpec("sigmoid"),
    ]


class _Generator:
    """Encoder plus decoder with a grad-check-compatible interface."""

    def __init__(self, branches: list[Network], decoder: Network, dtype):
        self.branches = branches
        self.decoder = decoder
        self.dtype = dtype

    def forward(self, x, mode="train", rng=None):
        pooled, branch_caches = [], []
        for net in self.branches:
            y, c = net.forward(x, mode, rng)
            pooled.append(y)
            branch_caches.append(c)
        latent = np.concatenate(pooled, axis=1)
        img, dec_caches = self.decoder.forward(latent, mode, rng)
        widths = [y.shape[1] for y in pooled]
        return img[..., 0], (branch_caches, dec_caches, widths)

    def backward(self, caches, gy):
        branch_caches, dec_caches, widths = caches
        glatent = self.decoder.backward(dec_caches, gy[..., None])
        gx = None
        start = 0
        for net, c, w in zip(self.branches, branch_caches, widths):
            gb = net.backward(c, glatent[:, start : start + w])
            gx = gb if gx is None else gx + gb
            start += w
        return gx

    def parameters(self):
        out = {}
        for i, net in enumerate(self.branches):
            for name, p in net.parameters().items():
                out[f"enc{i}.{name}"] = p
        for name, p in self.decoder.parameters().items():
            out[f"dec.{name}"] = p
        return out

    def zero_grad(self):
        for p in self.parameters().values():
            p.grad[...] = 0


class CtNetModel:
    """Holds the encoder branches, decoder, and (optionally) discriminator."""

    def __init__(
        self,
        encoder: EncoderConfig | None = None,
        decoder: DecoderConfig | None = None,
        discriminator: DiscriminatorConfig | None = None,
        seed: int = 0,
        dtype=np.float32,
        with_discriminator: bool = True,
    ):
        self.encoder_config = encoder or EncoderConfig()
        dec = decoder or DecoderConfig(latent_dim=self.encoder_config.latent_dim)
        if dec.latent_dim != self.encoder_config.latent_dim:
            raise ValueError(
                f"decoder latent dim {dec.latent_dim} != encoder latent dim "
                f"{self.encoder_config.latent_dim}"
            )
        self.decoder_config = dec
        self.seed = seed
        self.dtype = dtype
        rng = np.random.default_rng(seed)
        self.branches = [
            Network.from_specs(_encoder_branch_specs(self.encoder_config, f), rng, dtype)
            for f in self.encoder_config.window_sizes
        ]
        self.decoder = Network.from_specs(_decoder_specs(dec), rng, dtype)
        if with_discriminator:
            self.discriminator_config = discriminator or DiscriminatorConfig(in_size=dec.out_size)
            self.discriminator = Network.from_specs(
                _discriminator_specs(self.discriminator_config), rng, dtype
            )
        else:
            self.discriminator_config = None
            self.discriminator = None
        self.generator = _Generator(self.branches, self.decoder, dtype)

    @property
    def latent_dim(self) -> int:
        return self.encoder_config.latent_dim

    @property
    def out_size(self) -> int:
        return self.decoder_config.out_size

    def _as_batch(self, sino) -> np.ndarray:
        arr = sino.data if isinstance(sino, Sinogram) else np.asarray(sino)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise ValueError(f"expected a (views, bins) sinogram or batch, got {arr.shape}")
        return arr.astype(self.dtype)

    def encode(self, sino) -> np.ndarray:
        """Fixed-length latent embedding; accepts any view count >= the
        largest window."""
        batch = self._as_batch(sino)
        pooled = [net.forward(batch, mode="eval")[0] for net in self.branches]
        latent = np.concatenate(pooled, axis=1)
        single = isinstance(sino, Sinogram) or np.asarray(
            sino.data if isinstance(sino, Sinogram) else sino
        ).ndim == 2
        return latent[0] if single else latent

    def decode(self, latent: np.ndarray) -> np.ndarray:
        """Image(s) for latent vector(s); output is non-negative by the final ReLU."""
        arr = np.asarray(latent, dtype=self.dtype)
        single = arr.ndim == 1
        if single:
            arr = arr[None]
        if arr.shape[1] != self.latent_dim:
            raise ValueError(f"latent dim {arr.shape[1]} != expected {self.latent_dim}")
        img, _ = self.decoder.forward(arr, mode="eval")
        img = img[..., 0]
        return img[0] if single else img

    def predict(self, sino) -> np.ndarray:
        """decode(encode(sinogram)) in eval mode; deterministic."""
        batch = self._as_batch(sino)
        img, _ = self.generator.forward(batch, mode="eval")
        arr = sino.data if isinstance(sino, Sinogram) else np.asarray(sino)
        return img[0] if arr.ndim == 2 else img

    def discriminate(self, image: np.ndarray) -> float | np.ndarray:
        """Probability in (0, 1) that an image is a real slice."""
        if self.discriminator is None:
            raise ValueError("model was built without a discriminator")
        arr = np.asarray(image, dtype=self.dtype)
        single = arr.ndim == 2
        if single:
            arr = arr[None]
        expected = self.discriminator_config.in_size
        if arr.shape[-2:] != (expected, expected):
            raise ValueError(f"image shape {arr.shape[-2:]} != {(expected, expected)}")
        out, _ = self.discriminator.forward(arr[..., None], mode="eval")
        probs = out[:, 0]
        return float(probs[0]) if single else probs

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for i, net in enumerate(self.branches):
            for name, arr in net.state_arrays().items():
                out[f"enc{i}.{name}"] = arr
        for name, arr in self.decoder.state_arrays().items():
            out[f"dec.{name}"] = arr
        if self.discriminator is not None:
            for name, arr in self.discriminator.state_arrays().items():
                out[f"disc.{name}"] = arr
        return out

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        own = self.state_arrays()
        missing = sorted(set(own) - set(arrays))
        if missing:
            raise ValueError(f"checkpoint is missing tensors: {missing[:4]}...")
        for name, target in own.items():
            src = arrays[name]
            if src.shape != target.shape:
                raise ValueError(f"tensor {name}: shape {src.shape} != {target.shape}")
            target[...] = src.astype(target.dtype)


@dataclass
class LossBreakdown:
    mse: float
    adv: float
    disc: float
    total: float


def _clamped_probs(p: np.ndarray) -> np.ndarray:
    return np.clip(p, _PROB_CLAMP, 1.0 - _PROB_CLAMP)


def compute_losses(pred, truth, model: CtNetModel | None = None, mode: str = "mse",
                   adv_weight: float = 0.05) -> LossBreakdown:
    """L_mse (batch mean of per-image squared error sums), L_adv = -log D(pred),
    L_D = -log D(truth) - log(1 - D(pred)), and L_total = L_mse + weight * L_adv
    (weight 0 in mse mode). Probabilities are clamped away from {0, 1}.
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {truth.shape}")
    if pred.ndim == 2:
        pred, truth = pred[None], truth[None]
    mse = float(np.mean(np.sum((pred - truth) ** 2, axis=(-2, -1))))
    if mode == "mse":
        return LossBreakdown(mse=mse, adv=0.0, disc=0.0, total=mse)
    d_fake = _clamped_probs(np.atleast_1d(model.discriminate(pred)))
    d_real = _clamped_probs(np.atleast_1d(model.discriminate(truth)))
    adv = float(np.mean(-np.log(d_fake)))
    disc = float(np.mean(-np.log(d_real) - np.log(1.0 - d_fake)))
    return LossBreakdown(mse=mse, adv=adv, disc=disc, total=mse + adv_weight * adv)


class Trainer:
    """Owns a model plus Adam state and runs seeded, deterministic epochs.

    The dataset is a list of (limited sinogram array, ground-truth image)
    pairs. In adversarial mode each batch takes one discriminator step and
    one generator step.
    """

    def __init__(self, model: CtNetModel, config: TrainConfig):
        self.model = model
        self.config = config
        self.rng = np.random.default_rng(config.seed)
        gen_params = model.generator.parameters()
        self.gen_state = AdamState.for_params(
            gen_params, lr=config.resolved_lr, beta1=config.resolved_beta1
        )
        self.disc_state = None
        if config.loss_mode == "adversarial":
            if model.discriminator is None:
                raise ValueError("adversarial training needs a discriminator")
            self.disc_state = AdamState.for_params(
                model.discriminator.parameters(),
                lr=config.resolved_lr,
                beta1=config.resolved_beta1,
            )
        self.epoch = 0

    def _mse_and_grad(self, pred, truth):
        diff = pred - truth
        loss = float(np.mean(np.sum(diff**2, axis=(1, 2))))
        return loss, (2.0 / pred.shape[0]) * diff

    def _disc_forward(self, images):
        out, caches = self.model.discriminator.forward(images[..., None], mode="train")
        return out[:, 0], caches

    def _disc_prob_grad(self, probs, target_real: bool):
        # d/dp of the batch-mean -log p (real) or -log(1-p) (fake); zero where clamped
        n = probs.shape[0]
        inside = (probs > _PROB_CLAMP) & (probs < 1.0 - _PROB_CLAMP)
        p = _clamped_probs(probs)
        g = (-1.0 / p) if target_real else (1.0 / (1.0 - p))
        return np.where(inside, g, 0.0) / n

    def train_epoch(self, dataset) -> dict:
        """One pass in seeded shuffled order; returns mean losses, the mean
        generator gradient norm, and the per-batch loss trace."""
        cfg = self.config
        model = self.model
        n = len(dataset)
        order = self.rng.permutation(n)
        batch_losses, mse_sum, adv_sum, disc_sum, gnorm_sum = [], 0.0, 0.0, 0.0, 0.0
        n_batches = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            sinos = np.stack([np.asarray(dataset[i][0], dtype=model.dtype) for i in idx])
            truths = np.stack([np.asarray(dataset[i][1], dtype=model.dtype) for i in idx])

            if cfg.loss_mode == "adversarial":
                # discriminator step on detached predictions
                fakes, _ = model.generator.forward(sinos, mode="train")
                p_real, real_caches = self._disc_forward(truths)
                model.discriminator.zero_grad()
                model.discriminator.backward(
                    real_caches, self._disc_prob_grad(p_real, target_real=True)[:, None]
                )
                p_fake, fake_caches = self._disc_forward(fakes)
                model.discriminator.backward(
                    fake_caches, self._disc_prob_grad(p_fake, target_real=False)[:, None]
                )
                disc_loss = float(
                    np.mean(
                        -np.log(_clamped_probs(p_real)) - np.log(1.0 - _clamped_probs(p_fake))
                    )
                )
                adam_step(model.discriminator.parameters(), self.disc_state)

            pred, gen_caches = model.generator.forward(sinos, mode="train")
            mse_loss, gpred = self._mse_and_grad(pred, truths)
            adv_loss = 0.0
            if cfg.loss_mode == "adversarial":
                p_fake, fake_caches = self._disc_forward(pred)
                pc = _clamped_probs(p_fake)
                adv_loss = float(np.mean(-np.log(pc)))
                gprob = self._disc_prob_grad(p_fake, target_real=True) * cfg.adv_weight
                model.discriminator.zero_grad()
                gimg = model.discriminator.backward(fake_caches, gprob[:, None])
                gpred = gpred + gimg[..., 0]
                model.discriminator.zero_grad()

            total = mse_loss + cfg.adv_weight * adv_loss if cfg.loss_mode == "adversarial" else mse_loss
            if not math.isfinite(total):
                raise FloatingPointError(
                    f"non-finite loss {total!r} at epoch {self.epoch} batch {n_batches}"
                )
            model.generator.zero_grad()
            model.generator.backward(gen_caches, gpred)
            gnorm = math.sqrt(
                sum(float(np.sum(p.grad.astype(np.float64) ** 2))
                    for p in model.generator.parameters().values())
            )
            adam_step(model.generator.parameters(), self.gen_state)

            batch_losses.append(total)
            mse_sum += mse_loss
            adv_sum += adv_loss
            if cfg.loss_mode == "adversarial":
                disc_sum += disc_loss
            gnorm_sum += gnorm
            n_batches += 1

        self.epoch += 1
        return {
            "mse": mse_sum / n_batches,
            "adv": adv_sum / n_batches,
            "disc": disc_sum / n_batches,
            "total": (mse_sum + cfg.adv_weight * adv_sum) / n_batches
            if cfg.loss_mode == "adversarial"
            else mse_sum / n_batches,
            "grad_norm": gnorm_sum / n_batches,
            "batch_losses": batch_losses,
        }


def train(model: CtNetModel, dataset, config: TrainConfig) -> list[dict]:
    """Run config.epochs epochs; returns the per-epoch metric dicts."""
    trainer = Trainer(model, config)
    return [trainer.train_epoch(dataset) for _ in range(config.epochs)]
