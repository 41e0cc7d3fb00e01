# Derenderer Library
#
# Copyright 2026 The Derenderer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
# http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

""" Cross-entropy training, self-critical policy-gradient fine-tuning and checkpoint evaluation
"""

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from tqdm import tqdm

from .config import TrainConfig
from .constants import DOMAIN_DEFAULTS, DOMAIN_NOISY_SHAPES, PAD_ID
from .dataset import DatasetManifest, ManifestEntry
from .exceptions import NaNLoss, ConfigurationError
from .extensions import IouReward, InferenceReward, ImageDistanceReward
from .interfaces import RewardInterface
from .metrics import MetricReport, evaluate_corpus
from .models.decoding import greedy_decode, sample_decode, sequence_log_prob
from .models.model import DerenderModel, MODEL_KEYS
from .optim import Adam
from .render import RasterImage, render, side_by_side
from .rewards import RewardKind, next_reward, calibrate_image_reward_scale
from .spec import SceneSpec, OrderingStrategy, canonical_order
from .tensor import Tensor, cross_entropy, no_grad
from .utils import resolve_threads
from .utils.hasher import derive_rng, derive_seed
from .vocabulary import Vocabulary, TokenSequence, encode_tokens, decode_tokens

__all__ = [
    'ExampleSet', 'TsvLog', 'TrainResult', 'build_model', 'order_for', 'train_xent', 'train_rl',
    'evaluate_checkpoint', 'evaluate_predictions', 'model_predictor', 'RlTrainer', 'policy_loss'
]

logger = logging.getLogger(__name__)


class TsvLog:
    """
    Plain-text log with one tab-separated record per line, e.g. `step<TAB>split<TAB>name<TAB>value`
    """

    def __init__(self, path: str = None):
        self.path = path
        self.fp = None
        if path:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok = True)
            self.fp = open(path, 'w', encoding = 'utf-8')

    def write(self, *fields):
        if self.fp is not None:
            self.fp.write('\t'.join(_format(f) for f in fields) + '\n')
            self.fp.flush()

    def close(self):
        if self.fp is not None:
            self.fp.close()
            self.fp = None

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()


def _format(value) -> str:
    if isinstance(value, float):
        return f'{value:.6g}'
    return str(value)


def image_shape_of(manifest: DatasetManifest) -> tuple:
    width, height = manifest.canvas
    return height, width, DOMAIN_DEFAULTS[manifest.domain]['channels']


def order_for(strategy: OrderingStrategy, example_id: int) -> OrderingStrategy:
    """
    Ordering applied to one example. The random ordering draws a separate permutation seed per example.
    """
    if strategy.variant == 'random':
        return strategy.with_seed(derive_seed(strategy.seed, f'order-{example_id}'))
    return strategy


class ExampleSet:
    """
    Images (uint8) and canonical-ordered target sequences of a list of manifest entries, loaded once
    """

    def __init__(self, manifest: DatasetManifest, entries: Sequence[ManifestEntry], vocab: Vocabulary,
                 ordering: OrderingStrategy, max_length: int, threads: int = None):
        self.entries = list(entries)
        self.ids = np.array([entry.id for entry in self.entries], dtype = np.int64)
        self.specs = [entry.spec for entry in self.entries]

        with ThreadPoolExecutor(max_workers = resolve_threads(threads)) as executor:
            self.images = list(executor.map(manifest.load_image, self.entries))

        self.pixels = np.stack([img.pixels for img in self.images]) if self.images else None

        self.targets = np.full((len(self.entries), max_length), PAD_ID, dtype = np.int64)
        catalog = manifest.catalog()
        for index, entry in enumerate(self.entries):
            ordered = canonical_order(entry.spec, order_for(ordering, entry.id), catalog)
            self.targets[index] = encode_tokens(ordered, vocab, max_length).ids

    def __len__(self):
        return len(self.entries)

    def batch_images(self, indices) -> np.ndarray:
        pixels = self.pixels[np.asarray(indices)]
        return pixels.transpose(0, 3, 1, 2).astype(np.float32) / 255.0

    def batch_targets(self, indices) -> np.ndarray:
        """
        Target rows trimmed to the longest non-PAD prefix in the batch
        """
        targets = self.targets[np.asarray(indices)]
        width = int((targets != PAD_ID).sum(axis = 1).max())
        return targets[:, :max(width, 2)]


@dataclass
class TrainResult:
    checkpoint: str
    steps: int
    model: DerenderModel
    best_loss: Optional[float] = None
    last_reward: Optional[float] = None


def build_model(config: TrainConfig, vocab: Vocabulary, image_shape: tuple) -> DerenderModel:
    """
    Fresh model for `config`, sized for the vocabulary and image shape
    """
    model_config = config.to_dict()
    model_config['vocab_size'] = vocab.size
    model_config['image_shape'] = list(image_shape)
    return DerenderModel({key: model_config[key] for key in MODEL_KEYS})


def _checkpoint_extra(config: TrainConfig, manifest: DatasetManifest, stage: str) -> dict:
    extra = config.to_dict()
    extra.pop('threads', None)
    extra['stage'] = stage
    extra['domain'] = manifest.domain
    extra['categories'] = list(manifest.catalog().categories)
    return extra


def _validation_loss(model: DerenderModel, examples: ExampleSet, batch_size: int) -> float:
    total = 0.0
    tokens = 0

    with no_grad(), model.inference():
        for start in range(0, len(examples), batch_size):
            indices = np.arange(start, min(start + batch_size, len(examples)))
            targets = examples.batch_targets(indices)
            logits = model(examples.batch_images(indices), targets[:, :-1])
            loss = cross_entropy(logits, targets[:, 1:], ignore_index = PAD_ID, reduction = 'sum')
            total += loss.item()
            tokens += int((targets[:, 1:] != PAD_ID).sum())

    return total / max(tokens, 1)


def train_xent(config: TrainConfig, manifest: DatasetManifest, out_path: str, init: str = None,
               metrics_path: str = None, progress: bool = False) -> TrainResult:
    """
    Teacher-forced cross-entropy training. Every epoch visits the training examples in a seeded permutation; the
    token-averaged loss ignores PAD. The checkpoint with the lowest validation loss is kept at `out_path`.

    Parameters
    ----------
    config: TrainConfig
    manifest: DatasetManifest (train split used, a fixed share held out for validation)
    out_path: checkpoint path
    init: optional checkpoint to resume from
    metrics_path: optional metrics log (`step<TAB>split<TAB>name<TAB>value`)
    progress: show a progress bar

    Returns
    -------
    TrainResult
    """
    if manifest.domain != config.domain:
        raise ConfigurationError(f'Config domain "{config.domain}" differs from dataset domain "{manifest.domain}"')

    vocab = manifest.vocabulary()
    model = DerenderModel.load(init) if init else build_model(config, vocab, image_shape_of(manifest))

    train_entries, valid_entries = manifest.validation_split(config.validation_fraction, seed = config.seed)
    ordering = config.ordering_strategy()
    train_set = ExampleSet(manifest, train_entries, vocab, ordering, config.max_length, config.threads)
    valid_set = ExampleSet(manifest, valid_entries, vocab, ordering, config.max_length, config.threads)

    if not len(train_set):
        raise ConfigurationError('The train split is empty')

    logger.info(f'XENT training {config.model} on {len(train_set)} examples ({len(valid_set)} validation), '
                f'{model.num_parameters()} parameters')

    params = model.named_parameters()
    optimizer = Adam(params, lr = config.lr_xent)
    extra = _checkpoint_extra(config, manifest, 'xent')

    best_loss = math.inf
    step = 0
    saved = False

    def checkpoint(log: TsvLog):
        nonlocal best_loss, saved
        if not len(valid_set):
            model.save(out_path, extra)
            saved = True
            return

        loss = _validation_loss(model, valid_set, config.eval_batch_size)
        log.write(step, 'valid', 'loss', loss)
        logger.info(f'step {step}: validation loss {loss:.4f}')

        if loss < best_loss:
            best_loss = loss
            model.save(out_path, extra)
            saved = True

    with TsvLog(metrics_path) as log:
        for epoch in range(config.epochs):
            order = derive_rng(config.seed, f'epoch-{epoch}').permutation(len(train_set))
            batches = [order[i:i + config.batch_size] for i in range(0, len(order), config.batch_size)]

            for indices in tqdm(batches, disable = not progress, desc = f'epoch {epoch}'):
                model.train()
                targets = train_set.batch_targets(indices)
                logits = model(train_set.batch_images(indices), targets[:, :-1])
                loss = cross_entropy(logits, targets[:, 1:], ignore_index = PAD_ID)

                if not np.isfinite(loss.item()):
                    batch_ids = train_set.ids[indices].tolist()
                    logger.error(f'Non-finite loss at step {step}, epoch {epoch}, example ids {batch_ids}')
                    raise NaNLoss(f'Non-finite loss at step {step} on batch with example ids {batch_ids}')

                loss.backward()
                optimizer.step()
                step += 1

                log.write(step, 'train', 'loss', loss.item())

                if step % config.checkpoint_every == 0:
                    checkpoint(log)

                if config.max_steps and step >= config.max_steps:
                    break

            if config.max_steps and step >= config.max_steps:
                break

        if step % config.checkpoint_every != 0 or not saved:
            checkpoint(log)

    logger.info(f'XENT training finished after {step} steps, best validation loss {best_loss:.4f}')

    return TrainResult(out_path, step, DerenderModel.load(out_path), best_loss = best_loss)


def policy_loss(model: DerenderModel, feats, sampled: Sequence[TokenSequence], advantages: np.ndarray) -> Tensor:
    """
    Self-critical surrogate -mean((r(sample) - r(greedy)) * log p(sample)); the sampled sequences and advantages are
    constants, gradients flow through the log-probabilities only
    """
    log_probs = sequence_log_prob(model, feats, sampled)
    return -(log_probs * Tensor(np.asarray(advantages))).mean()


class RlTrainer:
    """
    Self-critical policy-gradient fine-tuning. For every example one sequence is sampled and one decoded greedily;
    the greedy reward is the baseline, and the loss is -(r(sample) - r(greedy)) * log p(sample).

    Parameters
    ----------
    config: TrainConfig
    manifest: DatasetManifest
    model: initialized DerenderModel
    """

    def __init__(self, config: TrainConfig, manifest: DatasetManifest, model: DerenderModel):
        self.config = config
        self.manifest = manifest
        self.model = model
        self.vocab = manifest.vocabulary()
        self.catalog = manifest.catalog()
        self.reward_kind = config.reward_kind()
        self.sample_rng = derive_rng(config.seed, 'rl-sample')
        self.optimizer = Adam(model.named_parameters(), lr = config.lr_rl, grad_clip = config.grad_clip)
        self.executor = ThreadPoolExecutor(max_workers = resolve_threads(config.threads))

        image_c = config.image_reward_c
        if image_c is None and manifest.domain == DOMAIN_NOISY_SHAPES and self.uses_image_reward:
            image_c = calibrate_image_reward_scale(manifest, config.blur_sigma, seed = config.seed)
        self.image_reward_c = image_c

        self.rewards = RewardInterface(self)
        self.rewards.register(IouReward())
        self.rewards.register(InferenceReward(config.align))
        self.rewards.register(ImageDistanceReward(config.blur_sigma, image_c, self.catalog))

    @staticmethod
    def debug_message(message: str):
        logger.debug(message)

    @property
    def uses_image_reward(self) -> bool:
        kind = self.reward_kind
        names = {kind.first.name, kind.second.name} if kind.is_joint else {kind.name}
        return 'image' in names

    def close(self):
        self.rewards.unregister_all()
        self.executor.shutdown()

    def score(self, kind: RewardKind, sequences: Sequence[TokenSequence], gts: Sequence[SceneSpec],
              images: Sequence[RasterImage]) -> np.ndarray:
        """
        Parses each sequence (malformed objects are simply absent) and computes the reward against its example
        """
        reward = self.rewards.get_reward(kind.name)

        def compute(index: int) -> float:
            pred, _ = decode_tokens(sequences[index], self.vocab, gts[index].canvas)
            return reward(pred, gts[index], images[index])

        return np.array(list(self.executor.map(compute, range(len(sequences)))))

    def step(self, step: int, images: np.ndarray, gts: Sequence[SceneSpec], raw_images: Sequence[RasterImage]):
        """
        One policy-gradient update on a batch

        Returns
        -------
        tuple of (RewardKind used, sampled rewards, greedy rewards, whether parameters were updated)
        """
        kind = next_reward(self.reward_kind, step)

        # Dropout stays off so the differentiated distribution is the sampled one
        self.model.eval()
        feats = self.model.encode(images)

        greedy = greedy_decode(self.model, feats)
        sampled, _ = sample_decode(self.model, feats, rng = self.sample_rng)

        sample_rewards = self.score(kind, sampled, gts, raw_images)
        greedy_rewards = self.score(kind, greedy, gts, raw_images)
        advantages = sample_rewards - greedy_rewards

        if not np.any(advantages):
            self.debug_message(f'step {step}: all advantages are zero, skipping update')
            return kind, sample_rewards, greedy_rewards, False

        loss = policy_loss(self.model, feats, sampled, advantages)

        if not np.isfinite(loss.item()):
            raise NaNLoss(f'Non-finite policy loss at step {step}')

        loss.backward()
        self.optimizer.step()
        return kind, sample_rewards, greedy_rewards, True


def train_rl(config: TrainConfig, manifest: DatasetManifest, init: str, out_path: str, metrics_path: str = None,
             reward_log_path: str = None, progress: bool = False) -> TrainResult:
    """
    Fine-tunes a cross-entropy checkpoint with self-critical sequence training for `config.rl_steps` steps

    Parameters
    ----------
    config: TrainConfig, `reward` selects iou, inference, image or joint:r1:r2:a1:a2
    manifest: DatasetManifest
    init: checkpoint produced by train_xent
    out_path: output checkpoint
    metrics_path: optional metrics log
    reward_log_path: optional reward trace (`step<TAB>reward-kind<TAB>mean-reward`)
    progress: show a progress bar

    Returns
    -------
    TrainResult
    """
    model = DerenderModel.load(init)
    vocab = manifest.vocabulary()
    train_entries, _ = manifest.validation_split(config.validation_fraction, seed = config.seed)
    train_set = ExampleSet(manifest, train_entries, vocab, config.ordering_strategy(), model.max_length,
                           config.threads)

    if not len(train_set):
        raise ConfigurationError('The train split is empty')

    trainer = RlTrainer(config, manifest, model)
    extra = _checkpoint_extra(config, manifest, 'rl')
    extra['image_reward_c'] = trainer.image_reward_c

    steps = config.rl_steps if not config.max_steps else min(config.rl_steps, config.max_steps)
    logger.info(f'RL fine-tuning with reward {trainer.reward_kind} for {steps} steps')

    order = np.array([], dtype = np.int64)
    epoch = 0
    last_reward = None

    try:
        with TsvLog(metrics_path) as log, TsvLog(reward_log_path) as reward_log:
            for step in tqdm(range(steps), disable = not progress, desc = 'rl'):
                if len(order) < config.batch_size:
                    order = np.concatenate([order, derive_rng(config.seed, f'rl-epoch-{epoch}').permutation(
                        len(train_set))])
                    epoch += 1
                indices, order = order[:config.batch_size], order[config.batch_size:]

                kind, sample_rewards, greedy_rewards, _ = trainer.step(
                    step, train_set.batch_images(indices), [train_set.specs[i] for i in indices],
                    [train_set.images[i] for i in indices]
                )

                last_reward = float(sample_rewards.mean())
                reward_log.write(step, kind.name, last_reward)
                log.write(step, 'train', f'reward_sample_{kind.name}', last_reward)
                log.write(step, 'train', f'reward_greedy_{kind.name}', float(greedy_rewards.mean()))

                if (step + 1) % config.checkpoint_every == 0:
                    model.save(out_path, extra)

            model.save(out_path, extra)
    finally:
        trainer.close()

    logger.info(f'RL fine-tuning finished, last mean sampled reward {last_reward}')

    return TrainResult(out_path, steps, model, last_reward = last_reward)


def model_predictor(model: DerenderModel, batch_size: int = 64) -> Callable:
    """
    Greedy predictor over RasterImages, returning one TokenSequence per image
    """

    def predict(images: Sequence[RasterImage]) -> List[TokenSequence]:
        sequences = []
        with no_grad(), model.inference():
            for start in range(0, len(images), batch_size):
                feats = model.encode(images[start:start + batch_size])
                sequences.extend(greedy_decode(model, feats))
        return sequences

    return predict


def evaluate_predictions(predictor: Callable, manifest: DatasetManifest, split: str = 'test', align: str = 'index',
                         threads: int = None, renders_dir: str = None, name: str = None) -> MetricReport:
    """
    Runs `predictor` on every example of `split` and builds the MetricReport. The reconstruction error compares
    the render of each prediction with the noiseless render of its ground truth.

    Parameters
    ----------
    predictor: callable mapping a list of RasterImages to TokenSequences (or SceneSpecs)
    manifest: DatasetManifest
    split: 'test' or 'train'
    align: inference alignment
    threads: worker cap
    renders_dir: when set, writes input | prediction side-by-side images there
    name: report label

    Returns
    -------
    MetricReport
    """
    entries = manifest.split(split)
    vocab = manifest.vocabulary()
    catalog = manifest.catalog()

    with ThreadPoolExecutor(max_workers = resolve_threads(threads)) as executor:
        images = list(executor.map(manifest.load_image, entries))

    outputs = predictor(images)

    preds = []
    discarded = []
    for output in outputs:
        if isinstance(output, SceneSpec):
            preds.append(output)
            discarded.append(0)
        else:
            pred, dropped = decode_tokens(output, vocab, manifest.canvas)
            preds.append(pred)
            discarded.append(dropped)

    gts = [entry.spec for entry in entries]
    references = [render(gt, catalog = catalog) for gt in gts]

    report = evaluate_corpus(
        [entry.id for entry in entries], preds, gts, references, catalog = catalog, align = align,
        discarded = discarded, threads = threads, name = name
    )

    if renders_dir:
        extension = 'pgm' if manifest.domain == DOMAIN_NOISY_SHAPES else 'ppm'
        for entry, image, pred in zip(entries, images, preds):
            strip = side_by_side(image, render(pred, catalog = catalog))
            strip.save(os.path.join(renders_dir, f'{entry.id:06d}.{extension}'))

    logger.info(f'Evaluated {report.n_examples} "{split}" examples: IOU {report.iou:.4f}, '
                f'IOU_1.0 {report.iou_at[1.0]:.2f}%')

    return report


def evaluate_checkpoint(checkpoint: str, manifest: DatasetManifest, split: str = 'test', align: str = 'index',
                        batch_size: int = 64, threads: int = None, renders_dir: str = None) -> MetricReport:
    """
    Greedy-decodes every example of `split` with the checkpoint and reports all metrics
    """
    model = DerenderModel.load(checkpoint)
    return evaluate_predictions(
        model_predictor(model, batch_size), manifest, split, align, threads, renders_dir,
        name = os.path.basename(checkpoint)
    )
