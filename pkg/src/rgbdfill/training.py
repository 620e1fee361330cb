"""Hierarchical adversarial training for the three-route inpainting system.

One training step runs six optimization stages in a fixed order: edge
discriminator, edge generator, label discriminator, label generator, the
combined discriminator pair, and finally the combined generator. The
combined stage re-encodes the edge and label inputs in its own graph, so
the edge and label encoders receive a second update per step (through
the combined objective) while their decoders receive exactly one.

All per-iteration randomness (batch indices, mask seeds) is a pure
function of (seed, iteration), which together with checkpointed
parameter, optimizer, and RNG state makes training bit-exact to resume.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import torch

from . import imaging, metrics
from . import losses as losses_mod
from .data import DatasetConfig, InpaintingDataset, SampleBatch, SampleBundle, make_batch
from .imaging import MaskSynthConfig
from .losses import LossWeights, to_unit
from .models import FeatureExtractor, InpaintingModel, ModelConfig, PatchDiscriminator

log = logging.getLogger(__name__)

CHECKPOINT_SCHEMA = 1

LOSS_KEYS = [
    "d_edge", "g_edge_adv", "g_edge_fm", "g_edge",
    "d_label", "g_label_adv", "g_label_fm", "g_label",
    "d_rgbd", "g_adv_rgb", "g_adv_depth", "g_fm_rgb", "g_fm_depth",
    "g_perc_rgb", "g_perc_depth", "g_style_rgb", "g_style_depth", "g_combined",
]

EVAL_KEYS = [
    f"{plane}_{name}"
    for plane in ("rgb", "depth")
    for name in ("ssim", "psnr", "mae", "rmse", "psnr_holes", "mae_holes", "rmse_holes")
]

__all__ = [
    "TrainConfig",
    "Trainer",
    "TrainingDivergedError",
    "CheckpointError",
    "batch_to_tensors",
    "LOSS_KEYS",
    "EVAL_KEYS",
]


class TrainingDivergedError(RuntimeError):
    """A loss became non-finite; the message carries the component dump."""


class CheckpointError(RuntimeError):
    """Checkpoint file is unreadable, incomplete, or from another schema."""


@dataclass
class TrainConfig:
    seed: int = 0
    batch_size: int = 2
    learning_rate: float = 1e-4
    beta1: float = 0.5
    beta2: float = 0.999
    num_iterations: int = 500_000
    log_every: int = 50
    eval_every: int = 1000
    eval_max_samples: int = 16
    checkpoint_every: int = 1000
    device: str = "cpu"

    def validate(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ValueError("Adam betas must lie in [0, 1)")
        if self.num_iterations < 0:
            raise ValueError("num_iterations must be >= 0")


def _planes_to_tensor(x, device):
    """(N, H, W) or (N, H, W, C) in [0, 1] to a model-space NCHW tensor."""
    t = torch.from_numpy(np.ascontiguousarray(x))
    t = t[:, None] if t.ndim == 3 else t.permute(0, 3, 1, 2).contiguous()
    return (t * 2.0 - 1.0).to(device)


def batch_to_tensors(batch: SampleBatch, device="cpu"):
    """Stacked numpy planes to model-space tensors; the mask stays {0, 1}."""
    out = {}
    for name in ("rgb", "depth", "edge", "label",
                 "masked_rgb", "masked_depth", "masked_edge", "masked_label"):
        out[name] = _planes_to_tensor(getattr(batch, name), device)
    out["mask"] = torch.from_numpy(batch.mask)[:, None].to(device)
    return out


def _scalar(x):
    return float(x.detach())


def _tensor_to_plane(t):
    """Single model-space CHW tensor to a [0, 1] numpy plane."""
    x = np.clip((t.detach().cpu().numpy() + 1.0) * 0.5, 0.0, 1.0).astype(np.float32)
    return x[0] if x.shape[0] == 1 else np.moveaxis(x, 0, 2)


class Trainer:
    """Owns the networks, their six optimizers, logging, and persistence."""

    def __init__(self, dataset: InpaintingDataset, model_config: ModelConfig | None = None,
                 train_config: TrainConfig | None = None,
                 loss_weights: LossWeights | None = None,
                 out_dir=None):
        self.dataset = dataset
        self.model_config = model_config or ModelConfig()
        self.train_config = train_config or TrainConfig()
        self.loss_weights = loss_weights or LossWeights()
        self.model_config.validate()
        self.train_config.validate()
        self.loss_weights.validate()
        self.device = torch.device(self.train_config.device)
        self.out_dir = Path(out_dir) if out_dir is not None else None
        if self.out_dir is not None:
            self.out_dir.mkdir(parents=True, exist_ok=True)

        # Network construction order is fixed so a given seed always
        # yields the same initialization.
        torch.manual_seed(self.train_config.seed)
        mc = self.model_config
        self.model = InpaintingModel(mc).to(self.device)
        self.discriminators = {}
        if mc.use_edge:
            self.discriminators["edge"] = PatchDiscriminator(1, mc.disc_width)
        if mc.use_label:
            self.discriminators["label"] = PatchDiscriminator(1, mc.disc_width)
        self.discriminators["rgb"] = PatchDiscriminator(3, mc.disc_width)
        self.discriminators["depth"] = PatchDiscriminator(1, mc.disc_width)
        for d in self.discriminators.values():
            d.to(self.device)
        self.extractor = FeatureExtractor(
            mc.extractor, mc.extractor_width, mc.extractor_seed
        ).to(self.device)

        tc = self.train_config
        adam = lambda params: torch.optim.Adam(
            params, lr=tc.learning_rate, betas=(tc.beta1, tc.beta2)
        )
        self.optimizers = {}
        if mc.use_edge:
            self.optimizers["d_edge"] = adam(self.discriminators["edge"].parameters())
            self.optimizers["g_edge"] = adam(self.model.edge_generator.parameters())
        if mc.use_label:
            self.optimizers["d_label"] = adam(self.discriminators["label"].parameters())
            self.optimizers["g_label"] = adam(self.model.label_generator.parameters())
        self.optimizers["d_rgbd"] = adam(
            list(self.discriminators["rgb"].parameters())
            + list(self.discriminators["depth"].parameters())
        )
        combined_params = list(self.model.combined.parameters())
        if mc.use_edge:
            combined_params += list(self.model.edge_generator.encoder.parameters())
        if mc.use_label:
            combined_params += list(self.model.label_generator.encoder.parameters())
        self.optimizers["g_combined"] = adam(combined_params)

        self.iteration = 0
        self.last_losses = None

    # ------------------------------------------------------------------
    # single step

    def _check_finite(self, name, value, components):
        if not torch.isfinite(value):
            dump = {k: f"{v:.6g}" for k, v in components.items()}
            raise TrainingDivergedError(
                f"non-finite loss {name} at iteration {self.iteration}; "
                f"components so far: {dump}"
            )

    def train_step(self, t):
        """Run all six stages on one tensor batch; returns the loss dict."""
        w = self.loss_weights
        mc = self.model_config
        comps = {k: 0.0 for k in LOSS_KEYS}

        for route in ("edge", "label"):
            if not getattr(mc, f"use_{route}"):
                continue
            gen = getattr(self.model, f"{route}_generator")
            disc = self.discriminators[route]
            real = t[route]
            fake, _ = gen(t[f"masked_{route}"], t["mask"])

            logits_real, _ = disc(real)
            logits_fake, _ = disc(fake.detach())
            d_loss = w.adv_d * losses_mod.discriminator_adversarial(logits_real, logits_fake)
            comps[f"d_{route}"] = _scalar(d_loss)
            self._check_finite(f"d_{route}", d_loss, comps)
            opt = self.optimizers[f"d_{route}"]
            opt.zero_grad()
            d_loss.backward()
            opt.step()

            # Fresh critic passes: the discriminator just moved.
            logits_fake_g, feats_fake = disc(fake)
            with torch.no_grad():
                _, feats_real = disc(real)
            g_adv = losses_mod.generator_adversarial(logits_fake_g)
            g_fm = losses_mod.feature_matching(feats_fake, feats_real)
            g_loss = getattr(w, f"adv_g_{route}") * g_adv + getattr(w, f"fm_{route}") * g_fm
            comps[f"g_{route}_adv"] = _scalar(g_adv)
            comps[f"g_{route}_fm"] = _scalar(g_fm)
            comps[f"g_{route}"] = _scalar(g_loss)
            self._check_finite(f"g_{route}", g_loss, comps)
            opt = self.optimizers[f"g_{route}"]
            opt.zero_grad()
            g_loss.backward()
            opt.step()

        # Combined route, with the regularizer encoders re-run after
        # their individual updates so this graph owns their second update.
        if mc.use_edge:
            z_edge = self.model.edge_generator.encode(t["masked_edge"], t["mask"])
        else:
            z_edge = self.model._zero_latent(t["mask"])
        if mc.use_label:
            z_label = self.model.label_generator.encode(t["masked_label"], t["mask"])
        else:
            z_label = self.model._zero_latent(t["mask"])
        fake_rgb, fake_depth = self.model.combined(
            t["masked_rgb"], t["masked_depth"], t["mask"], z_edge, z_label
        )

        d_rgb, d_depth = self.discriminators["rgb"], self.discriminators["depth"]
        d_loss = w.adv_d * (
            losses_mod.discriminator_adversarial(d_rgb(t["rgb"])[0], d_rgb(fake_rgb.detach())[0])
            + losses_mod.discriminator_adversarial(
                d_depth(t["depth"])[0], d_depth(fake_depth.detach())[0]
            )
        )
        comps["d_rgbd"] = _scalar(d_loss)
        self._check_finite("d_rgbd", d_loss, comps)
        opt = self.optimizers["d_rgbd"]
        opt.zero_grad()
        d_loss.backward()
        opt.step()

        logits_fake_rgb, feats_fake_rgb = d_rgb(fake_rgb)
        logits_fake_depth, feats_fake_depth = d_depth(fake_depth)
        with torch.no_grad():
            _, feats_real_rgb = d_rgb(t["rgb"])
            _, feats_real_depth = d_depth(t["depth"])
        adv_rgb = losses_mod.generator_adversarial(logits_fake_rgb)
        adv_depth = losses_mod.generator_adversarial(logits_fake_depth)
        fm_rgb = losses_mod.feature_matching(feats_fake_rgb, feats_real_rgb)
        fm_depth = losses_mod.feature_matching(feats_fake_depth, feats_real_depth)

        pf_rgb = self.extractor(to_unit(fake_rgb))
        pf_depth = self.extractor(to_unit(fake_depth))
        with torch.no_grad():
            pr_rgb = self.extractor(to_unit(t["rgb"]))
            pr_depth = self.extractor(to_unit(t["depth"]))
        perc_rgb = losses_mod.perceptual_loss(pf_rgb, pr_rgb)
        perc_depth = losses_mod.perceptual_loss(pf_depth, pr_depth)
        style_rgb = losses_mod.style_loss(pf_rgb, pr_rgb)
        style_depth = losses_mod.style_loss(pf_depth, pr_depth)

        g_loss = (
            w.adv_g_rgb * adv_rgb
            + w.adv_g_depth * adv_depth
            + w.fm_rgb * fm_rgb
            + w.fm_depth * fm_depth
            + w.perc_rgb * perc_rgb
            + w.perc_depth * perc_depth
            + w.style_rgb * style_rgb
            + w.style_depth * style_depth
        )
        comps.update(
            g_adv_rgb=_scalar(adv_rgb), g_adv_depth=_scalar(adv_depth),
            g_fm_rgb=_scalar(fm_rgb), g_fm_depth=_scalar(fm_depth),
            g_perc_rgb=_scalar(perc_rgb), g_perc_depth=_scalar(perc_depth),
            g_style_rgb=_scalar(style_rgb), g_style_depth=_scalar(style_depth),
            g_combined=_scalar(g_loss),
        )
        self._check_finite("g_combined", g_loss, comps)
        # Clear every generator gradient first so that after this
        # backward the edge/label decoders provably hold no gradient.
        for name in ("g_edge", "g_label", "g_combined"):
            if name in self.optimizers:
                self.optimizers[name].zero_grad()
        g_loss.backward()
        self.optimizers["g_combined"].step()

        self.last_losses = comps
        return comps

    # ------------------------------------------------------------------
    # loop, evaluation, inference

    def _draw_batch(self, iteration):
        tc = self.train_config
        rng = np.random.default_rng((tc.seed, 2, iteration))
        train_idx = self.dataset.splits["train"]
        if not train_idx:
            raise RuntimeError("train split is empty")
        picks = rng.integers(0, len(train_idx), tc.batch_size)
        mask_seeds = [int(s) for s in rng.integers(0, 2**31, tc.batch_size)]
        return make_batch([train_idx[int(j)] for j in picks], self.dataset, mask_seeds)

    def run(self, num_iterations=None):
        """Train until the target iteration count, logging and snapshotting."""
        tc = self.train_config
        target = tc.num_iterations if num_iterations is None else num_iterations
        while self.iteration < target:
            batch = self._draw_batch(self.iteration)
            step_losses = self.train_step(batch_to_tensors(batch, self.device))
            self._append_csv("train_log.csv", ["iteration"] + LOSS_KEYS,
                             {"iteration": self.iteration, **step_losses})
            self.iteration += 1
            if tc.log_every and self.iteration % tc.log_every == 0:
                log.info(
                    "iter %d: g_combined=%.4f d_rgbd=%.4f g_edge=%.4f g_label=%.4f",
                    self.iteration, step_losses["g_combined"], step_losses["d_rgbd"],
                    step_losses["g_edge"], step_losses["g_label"],
                )
            if tc.eval_every and self.iteration % tc.eval_every == 0:
                scores = self.evaluate("val" if self.dataset.splits["val"] else "train")
                self._append_csv("eval_log.csv", ["iteration"] + EVAL_KEYS,
                                 {"iteration": self.iteration, **scores})
                log.info("iter %d eval: rgb_ssim=%.4f rgb_psnr=%.2f",
                         self.iteration, scores["rgb_ssim"], scores["rgb_psnr"])
            if tc.checkpoint_every and self.iteration % tc.checkpoint_every == 0:
                self.save_checkpoint()
        if self.out_dir is not None:
            self.save_checkpoint()
        return self.last_losses

    def evaluate(self, split="val", max_samples=None):
        """Mean metrics over a split, on composited outputs.

        Error metrics are reported twice: over the full image and over
        hole pixels only (the ``_holes`` keys). SSIM is full-image.
        """
        indices = self.dataset.splits[split]
        if not indices:
            raise ValueError(f"split {split!r} is empty")
        cap = self.train_config.eval_max_samples if max_samples is None else max_samples
        if cap:
            indices = indices[:cap]
        sums = {k: 0.0 for k in EVAL_KEYS}
        for i in indices:
            seed = int(np.random.default_rng((self.train_config.seed, 4, i)).integers(2**31))
            bundle = self.dataset.sample(i, seed)
            out = self.infer(bundle)
            for plane in ("rgb", "depth"):
                pred = out[plane]
                truth = getattr(bundle, plane)
                sums[f"{plane}_ssim"] += metrics.ssim(pred, truth)
                sums[f"{plane}_psnr"] += metrics.psnr(pred, truth)
                sums[f"{plane}_mae"] += metrics.mae(pred, truth)
                sums[f"{plane}_rmse"] += metrics.rmse(pred, truth)
                sums[f"{plane}_psnr_holes"] += metrics.psnr(pred, truth, region_mask=bundle.mask)
                sums[f"{plane}_mae_holes"] += metrics.mae(pred, truth, region_mask=bundle.mask)
                sums[f"{plane}_rmse_holes"] += metrics.rmse(pred, truth, region_mask=bundle.mask)
        return {k: v / len(indices) for k, v in sums.items()}

    def infer(self, bundle: SampleBundle):
        """Inpaint one sample; returns [0, 1] numpy planes.

        Keys ``rgb``/``depth`` (and ``edge``/``label`` when those routes
        are enabled) are composited with the known pixels; the raw
        generator outputs are under ``raw_*``.
        """
        batch = SampleBatch(**{
            f: getattr(bundle, f)[None] for f in SampleBatch.__dataclass_fields__
        })
        t = batch_to_tensors(batch, self.device)
        was_training = self.model.training
        self.model.eval()
        with torch.no_grad():
            out = self.model(
                t["masked_rgb"], t["masked_depth"], t["masked_edge"], t["masked_label"],
                t["mask"],
            )
        self.model.train(was_training)
        result = {}
        for plane in ("rgb", "depth", "edge", "label"):
            if out[plane] is None:
                continue
            raw = _tensor_to_plane(out[plane][0])
            result[f"raw_{plane}"] = raw
            result[plane] = imaging.composite(raw, getattr(bundle, plane), bundle.mask)
        return result

    # ------------------------------------------------------------------
    # persistence

    def _append_csv(self, name, fieldnames, row):
        if self.out_dir is None:
            return
        path = self.out_dir / name
        fresh = not path.exists()
        with open(path, "a", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fieldnames)
            if fresh:
                writer.writeheader()
            writer.writerow({k: f"{v:.10g}" if isinstance(v, float) else v
                             for k, v in row.items()})

    def save_checkpoint(self, path=None):
        if path is None:
            if self.out_dir is None:
                raise ValueError("no out_dir configured and no path given")
            path = self.out_dir / "checkpoint.pt"
        path = Path(path)
        payload = {
            "schema": CHECKPOINT_SCHEMA,
            "iteration": self.iteration,
            "model": self.model.state_dict(),
            "discriminators": {k: d.state_dict() for k, d in self.discriminators.items()},
            "optimizers": {k: o.state_dict() for k, o in self.optimizers.items()},
            "torch_rng": torch.get_rng_state(),
            "extractor_kind": self.extractor.kind,
            "config": {
                "model": asdict(self.model_config),
                "train": asdict(self.train_config),
                "loss_weights": asdict(self.loss_weights),
                "dataset": asdict(self.dataset.config),
            },
        }
        torch.save(payload, path)
        return path

    @classmethod
    def restore(cls, path, dataset=None, out_dir=None):
        """Rebuild a trainer from a checkpoint, bit-exact.

        ``dataset`` overrides the stored dataset configuration (the
        stored one is used to rebuild when omitted). Raises
        CheckpointError for unreadable files or schema mismatches.
        """
        try:
            payload = torch.load(path, map_location="cpu", weights_only=False)
        except Exception as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
        if not isinstance(payload, dict) or "schema" not in payload:
            raise CheckpointError(f"{path} is not a training checkpoint")
        if payload["schema"] != CHECKPOINT_SCHEMA:
            raise CheckpointError(
                f"checkpoint schema {payload['schema']} != supported {CHECKPOINT_SCHEMA}"
            )
        try:
            cfg = payload["config"]
            model_config = ModelConfig(**cfg["model"])
            # Pin the resolved extractor so restoring cannot silently
            # switch feature spaces.
            model_config.extractor = payload["extractor_kind"]
            train_config = TrainConfig(**cfg["train"])
            loss_weights = LossWeights(**cfg["loss_weights"])
            if dataset is None:
                dcfg = dict(cfg["dataset"])
                dcfg["mask_synth"] = MaskSynthConfig(**dcfg["mask_synth"])
                dcfg["split_fractions"] = tuple(dcfg["split_fractions"])
                dataset = InpaintingDataset(DatasetConfig(**dcfg))
            trainer = cls(dataset, model_config, train_config,
                          loss_weights, out_dir=out_dir)
            trainer.model.load_state_dict(payload["model"])
            for k, d in trainer.discriminators.items():
                d.load_state_dict(payload["discriminators"][k])
            for k, o in trainer.optimizers.items():
                o.load_state_dict(payload["optimizers"][k])
            trainer.iteration = payload["iteration"]
            torch.set_rng_state(payload["torch_rng"])
        except CheckpointError:
            raise
        except Exception as exc:
            raise CheckpointError(f"checkpoint {path} is incomplete: {exc}") from exc
        return trainer
