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

""" Analysis studies: sensitivity to the object ordering and to the amount of training data
"""

import json
import logging
import os
from typing import Callable, List, Sequence

from .config import TrainConfig
from .dataset import DatasetManifest
from .metrics import MetricReport, bootstrap_compare
from .training import train_xent, train_rl, evaluate_checkpoint
from .utils import atomic_write

__all__ = [
    'StudyReport', 'ordering_study', 'datasize_study', 'DEFAULT_ORDERINGS', 'DEFAULT_MODELS', 'DEFAULT_FRACTIONS'
]

logger = logging.getLogger(__name__)

DEFAULT_ORDERINGS = ('type', 'size', 'position', 'random')
DEFAULT_MODELS = ('lstm', 'transformer')
DEFAULT_FRACTIONS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0)


class StudyReport:
    """
    Table of study results: one dict per row, rendered with the columns in `columns` order
    """

    def __init__(self, title: str, columns: Sequence[str], rows: List[dict] = None, config: dict = None):
        self.title = title
        self.columns = list(columns)
        self.rows = rows or []
        self.config = config or {}

    def __len__(self):
        return len(self.rows)

    def add_row(self, row: dict):
        self.rows.append(row)

    @staticmethod
    def _cell(column: str, value) -> str:
        if isinstance(value, float):
            return f'{value:.4f}' if column == 'p' else f'{value:.2f}'
        return '' if value is None else str(value)

    def table(self) -> str:
        cells = [[self._cell(column, row.get(column)) for column in self.columns] for row in self.rows]
        widths = [max([len(column)] + [len(line[i]) for line in cells]) for i, column in enumerate(self.columns)]

        lines = [self.title, '  '.join(c.rjust(w) for c, w in zip(self.columns, widths))]
        lines.extend('  '.join(c.rjust(w) for c, w in zip(line, widths)) for line in cells)
        return '\n'.join(lines) + '\n'

    def to_dict(self) -> dict:
        return {'title': self.title, 'columns': self.columns, 'rows': self.rows, 'config': self.config}

    def save(self, path: str):
        """
        Writes the JSON report to `path` and the text table to `path` + '.txt'
        """
        with atomic_write(path, 'w') as fp:
            fp.write(json.dumps(self.to_dict(), indent = 2, sort_keys = True) + '\n')

        with atomic_write(path + '.txt', 'w') as fp:
            fp.write(self.table())

    @classmethod
    def load(cls, path: str) -> 'StudyReport':
        with open(path, 'r') as fp:
            data = json.load(fp)
        return cls(data['title'], data['columns'], data['rows'], data.get('config'))


def _scores(report: MetricReport) -> dict:
    return {
        'P': 100 * report.precision, 'R': 100 * report.recall, 'F1': 100 * report.f1, 'IOU': 100 * report.iou,
        'IOU_1.0': report.iou_at[1.0], 'IOU_0.8': report.iou_at[0.8], 'IOU_0.6': report.iou_at[0.6]
    }


def ordering_study(config: TrainConfig, manifest: DatasetManifest, out_dir: str,
                   orderings: Sequence[str] = DEFAULT_ORDERINGS, models: Sequence[str] = DEFAULT_MODELS,
                   progress: bool = False, train: Callable = train_xent,
                   evaluate: Callable = evaluate_checkpoint) -> StudyReport:
    """
    Trains one cross-entropy model per (model, ordering) pair and evaluates it on the test split. The `drop`
    column is the IOU_1.0 loss relative to the type ordering of the same model.

    Parameters
    ----------
    config: base TrainConfig, `model` and `ordering` are overridden per row
    manifest: DatasetManifest
    out_dir: directory receiving checkpoints, metrics logs and per-row reports
    orderings: ordering names
    models: 'lstm' and/or 'transformer'
    progress: show progress bars
    train: training function, replaceable for tests
    evaluate: evaluation function, replaceable for tests

    Returns
    -------
    StudyReport with one row per pair
    """
    os.makedirs(out_dir, exist_ok = True)
    report = StudyReport(
        'Ordering study', ['model', 'ordering', 'P', 'R', 'F1', 'IOU', 'IOU_1.0', 'IOU_0.8', 'IOU_0.6', 'drop'],
        config = config.to_dict()
    )

    for model in models:
        reference = None
        rows = []

        for ordering in orderings:
            row_config = config.update({'model': model, 'ordering': ordering})
            name = f'{model}-{ordering.replace(":", "_")}'
            checkpoint = os.path.join(out_dir, f'{name}.drnd')

            logger.info(f'Ordering study: training {model} with ordering "{ordering}"')
            train(row_config, manifest, checkpoint, metrics_path = os.path.join(out_dir, f'{name}.metrics.tsv'),
                  progress = progress)

            metrics = evaluate(checkpoint, manifest, align = row_config.align, threads = row_config.threads)
            metrics.save(os.path.join(out_dir, f'{name}.report.json'))

            row = {'model': model, 'ordering': ordering}
            row.update(_scores(metrics))
            rows.append(row)

            if ordering == 'type':
                reference = row['IOU_1.0']

        for row in rows:
            row['drop'] = reference - row['IOU_1.0'] if reference is not None else None
            report.add_row(row)

    return report


def datasize_study(config: TrainConfig, manifest: DatasetManifest, out_dir: str,
                   fractions: Sequence[float] = DEFAULT_FRACTIONS, progress: bool = False,
                   train: Callable = train_xent, fine_tune: Callable = train_rl,
                   evaluate: Callable = evaluate_checkpoint, iterations: int = 10000) -> StudyReport:
    """
    For every fraction of the train split: cross-entropy training, then RL fine-tuning with `config.reward`, both
    evaluated on the full test split. Reports IOU_1.0 of both stages, their gap and the bootstrap p-value of the
    exact-match rate.

    Parameters
    ----------
    config: TrainConfig
    manifest: DatasetManifest
    out_dir: output directory
    fractions: train fractions in (0, 1]
    progress: show progress bars
    train: cross-entropy training function
    fine_tune: RL fine-tuning function
    evaluate: evaluation function
    iterations: bootstrap resamples

    Returns
    -------
    StudyReport with one row per fraction
    """
    os.makedirs(out_dir, exist_ok = True)
    report = StudyReport(
        'Data-size study', ['fraction', 'train', 'xent_IOU_1.0', 'rl_IOU_1.0', 'gap', 'p'], config = config.to_dict()
    )

    for fraction in fractions:
        subset = manifest.subsample(fraction, seed = config.seed)
        name = f'fraction-{fraction:g}'
        xent_checkpoint = os.path.join(out_dir, f'{name}-xent.drnd')
        rl_checkpoint = os.path.join(out_dir, f'{name}-rl.drnd')

        logger.info(f'Data-size study: {len(subset.train)} train examples ({fraction:g})')

        train(config, subset, xent_checkpoint, metrics_path = os.path.join(out_dir, f'{name}-xent.metrics.tsv'),
              progress = progress)
        fine_tune(config, subset, xent_checkpoint, rl_checkpoint,
                  metrics_path = os.path.join(out_dir, f'{name}-rl.metrics.tsv'),
                  reward_log_path = os.path.join(out_dir, f'{name}-rl.rewards.tsv'), progress = progress)

        xent = evaluate(xent_checkpoint, subset, align = config.align, threads = config.threads)
        rl = evaluate(rl_checkpoint, subset, align = config.align, threads = config.threads)
        xent.save(os.path.join(out_dir, f'{name}-xent.report.json'))
        rl.save(os.path.join(out_dir, f'{name}-rl.report.json'))

        p_value = bootstrap_compare(xent.rows, rl.rows, 'exact', iterations = iterations, seed = config.seed) \
            if xent.rows else None

        report.add_row({
            'fraction': fraction, 'train': len(subset.train), 'xent_IOU_1.0': xent.iou_at[1.0],
            'rl_IOU_1.0': rl.iou_at[1.0], 'gap': rl.iou_at[1.0] - xent.iou_at[1.0], 'p': p_value
        })

    return report
