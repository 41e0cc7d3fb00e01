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

""" Corpus-level evaluation: object-level P/R/F1/IOU, IOU_k, inference and reconstruction error, and the paired
bootstrap test between two systems
"""

import json
import logging
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .catalog import SpriteCatalog
from .constants import IOU_THRESHOLDS
from .exceptions import IdMismatch, MissingRender, ConfigurationError
from .render import RasterImage, render
from .rewards import inference_counts, pixel_buckets
from .spec import SceneSpec, check_same_domain
from .utils import atomic_write, resolve_threads
from .utils.hasher import derive_rng

__all__ = [
    'object_match_stats', 'per_example_metrics', 'ExampleRow', 'MetricReport', 'evaluate_example',
    'evaluate_corpus', 'corpus_report', 'bootstrap_compare', 'BOOTSTRAP_METRICS'
]

logger = logging.getLogger(__name__)

# name -> (higher is better, numerator field, denominator field or None for a per-example mean)
BOOTSTRAP_METRICS = {
    'precision': (True, 'precision', None),
    'recall': (True, 'recall', None),
    'f1': (True, 'f1', None),
    'iou': (True, 'iou', None),
    'exact': (True, 'exact', None),
    'inference_error': (False, 'failed_slots', 'total_slots'),
    'reconstruction_error': (False, 'mismatched_pixels', 'total_pixels'),
}

BOOTSTRAP_CHUNK = 500


def object_match_stats(pred: SceneSpec, gt: SceneSpec) -> Tuple[int, int, int]:
    """
    Exact-match statistics of a prediction

    Returns
    -------
    tuple of (tp, m, n): multiset intersection size, number of predicted and of ground-truth objects
    """
    check_same_domain(pred, gt)
    tp = sum((Counter(pred.objects) & Counter(gt.objects)).values())
    return tp, len(pred.objects), len(gt.objects)


def per_example_metrics(stats: Tuple[int, int, int]) -> Tuple[float, float, float, float]:
    """
    Precision, recall, F1 and IOU of one example. P = 0 when nothing is predicted, R = 1 only when both sides are
    empty, F1 = 0 when P + R = 0, IOU = 1 when both sides are empty.
    """
    tp, m, n = stats

    precision = tp / m if m else 0.0
    if n:
        recall = tp / n
    else:
        recall = 1.0 if m == 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    union = m + n - tp
    iou = tp / union if union else 1.0

    return precision, recall, f1, iou


@dataclass
class ExampleRow:
    """
    Evaluation of one test example, kept for significance testing
    """
    id: int
    precision: float
    recall: float
    f1: float
    iou: float
    failed_slots: int
    total_slots: int
    mismatched_pixels: int
    total_pixels: int
    discarded_tokens: int = 0

    @property
    def exact(self) -> float:
        return 1.0 if self.iou >= 1.0 else 0.0

    def value(self, name: str) -> float:
        return float(getattr(self, name))


def evaluate_example(example_id: int, pred: SceneSpec, gt: SceneSpec, reference: RasterImage,
                     catalog: SpriteCatalog = None, align: str = 'index', discarded_tokens: int = 0) -> ExampleRow:
    """
    Evaluates one prediction

    Parameters
    ----------
    example_id: test example id
    pred: predicted specification
    gt: ground-truth specification
    reference: image the render of the prediction is compared with (noiseless ground-truth render)
    catalog: SpriteCatalog for AbstractScene renders
    align: inference alignment
    discarded_tokens: malformed tokens dropped while parsing the prediction

    Returns
    -------
    ExampleRow
    """
    precision, recall, f1, iou = per_example_metrics(object_match_stats(pred, gt))
    failed, total = inference_counts(pred, gt, align)

    try:
        rendered = render(pred, catalog = catalog)
    except Exception as e:
        raise MissingRender(f'Cannot render prediction of example {example_id}: {e}')

    if rendered.pixels.shape != reference.pixels.shape:
        raise MissingRender(f'Render of example {example_id} is {rendered!r}, reference is {reference!r}')

    mismatched = int(np.any(pixel_buckets(rendered) != pixel_buckets(reference), axis = 2).sum())

    return ExampleRow(
        id = int(example_id), precision = precision, recall = recall, f1 = f1, iou = iou, failed_slots = failed,
        total_slots = total, mismatched_pixels = mismatched, total_pixels = reference.width * reference.height,
        discarded_tokens = discarded_tokens
    )


@dataclass
class MetricReport:
    """
    Corpus metrics: macro-averaged precision, recall, F1 and IOU; IOU_k as percent of examples with IOU >= k;
    micro-averaged inference and reconstruction error and their mean
    """
    precision: float
    recall: float
    f1: float
    iou: float
    iou_at: Dict[float, float]
    inference_error: float
    reconstruction_error: float
    avg_error: float
    n_examples: int
    rows: List[ExampleRow] = field(default_factory = list)
    name: str = None

    def to_dict(self, rows: bool = True) -> dict:
        data = {
            'name': self.name,
            'n_examples': self.n_examples,
            'precision': self.precision,
            'recall': self.recall,
            'f1': self.f1,
            'iou': self.iou,
            'iou_at': {f'{k:.1f}': v for k, v in sorted(self.iou_at.items(), reverse = True)},
            'inference_error': self.inference_error,
            'reconstruction_error': self.reconstruction_error,
            'avg_error': self.avg_error,
        }
        if rows:
            data['rows'] = [asdict(row) for row in self.rows]
        return data

    @classmethod
    def from_dict(cls, data: dict) -> 'MetricReport':
        return cls(
            precision = data['precision'], recall = data['recall'], f1 = data['f1'], iou = data['iou'],
            iou_at = {float(k): v for k, v in data['iou_at'].items()},
            inference_error = data['inference_error'], reconstruction_error = data['reconstruction_error'],
            avg_error = data['avg_error'], n_examples = data['n_examples'],
            rows = [ExampleRow(**row) for row in data.get('rows', [])], name = data.get('name')
        )

    def table(self) -> str:
        """
        Aligned text table: object-level scores, then the error columns
        """
        thresholds = sorted(self.iou_at, reverse = True)
        headers = ['P', 'R', 'F1', 'IOU'] + [f'IOU_{k:.1f}' for k in thresholds] + \
            ['InfErr', 'RecErr', 'AvgErr', 'N']
        values = [
            f'{100 * self.precision:.2f}', f'{100 * self.recall:.2f}', f'{100 * self.f1:.2f}',
            f'{100 * self.iou:.2f}'
        ] + [f'{self.iou_at[k]:.2f}' for k in thresholds] + [
            f'{100 * self.inference_error:.2f}', f'{100 * self.reconstruction_error:.2f}',
            f'{100 * self.avg_error:.2f}', str(self.n_examples)
        ]

        label = self.name or ''
        widths = [max(len(h), len(v)) for h, v in zip(headers, values)]
        head = ' '.ljust(len(label)) + '  ' + '  '.join(h.rjust(w) for h, w in zip(headers, widths))
        body = label + '  ' + '  '.join(v.rjust(w) for v, w in zip(values, widths))
        return head.rstrip() + '\n' + body + '\n'

    def save(self, path: str):
        """
        Writes the JSON report to `path` and the text table next to it (`path` + '.txt')
        """
        with atomic_write(path, 'w') as fp:
            fp.write(json.dumps(self.to_dict(), indent = 2) + '\n')

        with atomic_write(path + '.txt', 'w') as fp:
            fp.write(self.table())

    @classmethod
    def load(cls, path: str) -> 'MetricReport':
        with open(path, 'r') as fp:
            return cls.from_dict(json.load(fp))


def corpus_report(rows: Sequence[ExampleRow], name: str = None) -> MetricReport:
    """
    Aggregates per-example rows into a MetricReport

    Parameters
    ----------
    rows: ExampleRow per test example
    name: label shown in the table

    Returns
    -------
    MetricReport
    """
    rows = list(rows)
    count = len(rows)

    def macro(attribute: str) -> float:
        return float(np.mean([getattr(row, attribute) for row in rows])) if rows else 0.0

    iou_at = {
        k: (100.0 * sum(1 for row in rows if row.iou >= k - 1e-12) / count if count else 0.0)
        for k in IOU_THRESHOLDS
    }

    total_slots = sum(row.total_slots for row in rows)
    total_pixels = sum(row.total_pixels for row in rows)
    inference_error = sum(row.failed_slots for row in rows) / total_slots if total_slots else 0.0
    reconstruction_error = sum(row.mismatched_pixels for row in rows) / total_pixels if total_pixels else 0.0

    return MetricReport(
        precision = macro('precision'), recall = macro('recall'), f1 = macro('f1'), iou = macro('iou'),
        iou_at = iou_at, inference_error = inference_error, reconstruction_error = reconstruction_error,
        avg_error = (inference_error + reconstruction_error) / 2, n_examples = count, rows = rows, name = name
    )


def evaluate_corpus(ids: Sequence[int], preds: Sequence[SceneSpec], gts: Sequence[SceneSpec],
                    references: Sequence[RasterImage], catalog: SpriteCatalog = None, align: str = 'index',
                    discarded: Sequence[int] = None, threads: int = None, name: str = None) -> MetricReport:
    """
    Evaluates every example (concurrently, in a thread pool) and aggregates the rows
    """
    discarded = discarded if discarded is not None else [0] * len(ids)

    def evaluate(index: int) -> ExampleRow:
        return evaluate_example(ids[index], preds[index], gts[index], references[index], catalog, align,
                                discarded[index])

    with ThreadPoolExecutor(max_workers = resolve_threads(threads)) as executor:
        rows = list(executor.map(evaluate, range(len(ids))))

    return corpus_report(rows, name = name)


def _resampled_means(rows: List[ExampleRow], metric: str, indices: np.ndarray) -> np.ndarray:
    _, numerator, denominator = BOOTSTRAP_METRICS[metric]
    values = np.array([row.value(numerator) for row in rows])

    if denominator is None:
        return values[indices].mean(axis = 1)

    totals = np.array([row.value(denominator) for row in rows])
    sums = totals[indices].sum(axis = 1)
    return np.divide(values[indices].sum(axis = 1), sums, out = np.zeros(len(indices)), where = sums > 0)


def bootstrap_compare(rows_a: Sequence[ExampleRow], rows_b: Sequence[ExampleRow], metric: str = 'iou',
                      iterations: int = 10000, seed: int = 0) -> float:
    """
    Paired bootstrap over example ids: the p-value is the fraction of resamples in which system B is not better
    than system A on `metric`, ties counting one half. Error metrics are aggregated as micro averages and lower
    is better.

    Parameters
    ----------
    rows_a: ExampleRows of system A
    rows_b: ExampleRows of system B, same example ids
    metric: one of BOOTSTRAP_METRICS
    iterations: number of resamples
    seed: resampling seed

    Returns
    -------
    float
    """
    if metric not in BOOTSTRAP_METRICS:
        raise ConfigurationError(f'Unknown metric "{metric}", valid values are {sorted(BOOTSTRAP_METRICS)}')

    by_id_a = {row.id: row for row in rows_a}
    by_id_b = {row.id: row for row in rows_b}

    if set(by_id_a) != set(by_id_b) or len(by_id_a) != len(rows_a) or len(by_id_b) != len(rows_b):
        raise IdMismatch('Both systems must be evaluated on the same unique example ids')

    ids = sorted(by_id_a)
    if not ids:
        raise IdMismatch('No examples to compare')

    paired_a = [by_id_a[i] for i in ids]
    paired_b = [by_id_b[i] for i in ids]
    higher_is_better = BOOTSTRAP_METRICS[metric][0]

    rng = derive_rng(seed, 'bootstrap')
    not_better = 0.0
    remaining = iterations

    while remaining > 0:
        chunk = min(BOOTSTRAP_CHUNK, remaining)
        indices = rng.integers(0, len(ids), size = (chunk, len(ids)))
        mean_a = _resampled_means(paired_a, metric, indices)
        mean_b = _resampled_means(paired_b, metric, indices)

        worse = mean_b < mean_a if higher_is_better else mean_b > mean_a
        not_better += worse.sum() + 0.5 * (mean_b == mean_a).sum()
        remaining -= chunk

    p_value = float(not_better / iterations)
    logger.debug(f'Bootstrap on {metric} over {len(ids)} examples: p={p_value:.6g}')
    return p_value
