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

""" Command-line entry point: `derender <command> [flags]`

Exit codes: 0 on success, 1 on a usage error (nothing is written), 2 on a runtime error.
"""

import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from .base import Derenderer
from .config import TrainConfig
from .constants import DOMAINS, DOMAIN_NOISY_SHAPES
from .dataset import DatasetConfig, DatasetManifest, generate_dataset
from .exceptions import UsageError, ConfigurationError
from .metrics import MetricReport, bootstrap_compare, BOOTSTRAP_METRICS
from .render import NoiseParams, RasterImage, render
from .catalog import SpriteCatalog
from .rewards import RewardKind
from .spec import SceneSpec, OrderingStrategy
from .studies import ordering_study, datasize_study, DEFAULT_ORDERINGS, DEFAULT_MODELS, DEFAULT_FRACTIONS
from .training import train_xent, train_rl, evaluate_checkpoint
from .utils import resolve_threads
from .utils.hasher import derive_seed

__all__ = ['main', 'build_parser', 'CommandParser']

logger = logging.getLogger(__name__)


class CommandParser(argparse.ArgumentParser):
    """
    ArgumentParser raising UsageError instead of exiting, so that `main` controls the exit code
    """

    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


def _existing_path(flag: str):
    def check(value: str) -> str:
        if not os.path.exists(value):
            raise argparse.ArgumentTypeError(f'{flag}: "{value}" does not exist')
        return value
    return check


def _csv(cast = str):
    def parse(value: str) -> list:
        try:
            return [cast(item.strip()) for item in value.split(',') if item.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f'invalid list "{value}"')
    return parse


def _canvas(value: str) -> list:
    try:
        width, height = (int(v) for v in value.lower().split('x'))
    except ValueError:
        raise argparse.ArgumentTypeError(f'canvas must be WIDTHxHEIGHT, got "{value}"')
    return [width, height]


def build_parser() -> CommandParser:
    common = CommandParser(add_help = False)
    common.add_argument('--seed', type = int, default = None, help = 'master seed, all randomness derives from it')
    common.add_argument('--threads', type = int, default = None, help = 'worker cap (fallback DERENDER_THREADS)')
    common.add_argument('--verbose', action = 'store_true', help = 'debug logging')
    common.add_argument('--progress', action = 'store_true', help = 'show progress bars')

    parser = CommandParser(prog = 'derender', description = 'Image de-rendering toolkit')
    commands = parser.add_subparsers(dest = 'command', parser_class = CommandParser)
    commands.required = True

    gen = commands.add_parser('gen', parents = [common], help = 'generate a dataset')
    gen.add_argument('--domain', choices = DOMAINS, default = None)
    gen.add_argument('--count', type = int, default = None)
    gen.add_argument('--test-count', type = int, default = None)
    gen.add_argument('--min-objects', type = int, default = None)
    gen.add_argument('--max-objects', type = int, default = None)
    gen.add_argument('--canvas', type = _canvas, default = None, help = 'WIDTHxHEIGHT')
    gen.add_argument('--config', type = _existing_path('--config'), default = None, help = 'DatasetConfig JSON')
    gen.add_argument('--out', required = True)

    train = commands.add_parser('train', parents = [common], help = 'cross-entropy training')
    train.add_argument('--config', type = _existing_path('--config'), default = None, help = 'TrainConfig JSON')
    train.add_argument('--data', type = _existing_path('--data'), required = True)
    train.add_argument('--out', required = True)
    train.add_argument('--init', type = _existing_path('--init'), default = None)
    train.add_argument('--model', choices = DEFAULT_MODELS, default = None)
    train.add_argument('--ordering', default = None)
    train.add_argument('--epochs', type = int, default = None)
    train.add_argument('--max-steps', type = int, default = None)
    train.add_argument('--metrics', default = None, help = 'metrics log path')

    rl = commands.add_parser('rl', parents = [common], help = 'self-critical RL fine-tuning')
    rl.add_argument('--config', type = _existing_path('--config'), default = None)
    rl.add_argument('--init', type = _existing_path('--init'), required = True)
    rl.add_argument('--reward', default = None, help = 'iou, inference, image or joint:r1:r2:a1:a2')
    rl.add_argument('--data', type = _existing_path('--data'), required = True)
    rl.add_argument('--out', required = True)
    rl.add_argument('--steps', type = int, default = None)
    rl.add_argument('--metrics', default = None, help = 'metrics log path')
    rl.add_argument('--reward-log', default = None, help = 'reward trace path')

    evaluate = commands.add_parser('eval', parents = [common], help = 'evaluate a checkpoint')
    evaluate.add_argument('--checkpoint', type = _existing_path('--checkpoint'), required = True)
    evaluate.add_argument('--data', type = _existing_path('--data'), required = True)
    evaluate.add_argument('--report', required = True)
    evaluate.add_argument('--split', choices = ('test', 'train'), default = 'test')
    evaluate.add_argument('--align', choices = ('index', 'hungarian'), default = 'index')
    evaluate.add_argument('--renders', default = None, help = 'directory for side-by-side renders')

    infer = commands.add_parser('infer', parents = [common], help = 'print the specification of an image')
    infer.add_argument('--checkpoint', type = _existing_path('--checkpoint'), required = True)
    infer.add_argument('--image', type = _existing_path('--image'), required = True)

    render_cmd = commands.add_parser('render', parents = [common], help = 'render a specification')
    render_cmd.add_argument('--spec', type = _existing_path('--spec'), required = True)
    render_cmd.add_argument('--out', required = True)
    render_cmd.add_argument('--noisy', action = 'store_true', help = 'apply the NoisyShapes noise model')
    render_cmd.add_argument('--data', type = _existing_path('--data'), default = None,
                            help = 'dataset whose sprite catalog draws AbstractScene objects')

    study_ordering = commands.add_parser('study-ordering', parents = [common], help = 'object ordering study')
    study_ordering.add_argument('--config', type = _existing_path('--config'), default = None)
    study_ordering.add_argument('--data', type = _existing_path('--data'), required = True)
    study_ordering.add_argument('--out', required = True, help = 'working directory')
    study_ordering.add_argument('--report', required = True)
    study_ordering.add_argument('--orderings', type = _csv(), default = list(DEFAULT_ORDERINGS))
    study_ordering.add_argument('--models', type = _csv(), default = list(DEFAULT_MODELS))
    study_ordering.add_argument('--max-steps', type = int, default = None)

    study_datasize = commands.add_parser('study-datasize', parents = [common], help = 'training data size study')
    study_datasize.add_argument('--config', type = _existing_path('--config'), default = None)
    study_datasize.add_argument('--data', type = _existing_path('--data'), required = True)
    study_datasize.add_argument('--out', required = True, help = 'working directory')
    study_datasize.add_argument('--report', required = True)
    study_datasize.add_argument('--fractions', type = _csv(float), default = list(DEFAULT_FRACTIONS))
    study_datasize.add_argument('--reward', default = None)
    study_datasize.add_argument('--max-steps', type = int, default = None)

    compare = commands.add_parser('compare', parents = [common], help = 'paired bootstrap test of two reports')
    compare.add_argument('--report-a', type = _existing_path('--report-a'), required = True)
    compare.add_argument('--report-b', type = _existing_path('--report-b'), required = True)
    compare.add_argument('--metric', choices = sorted(BOOTSTRAP_METRICS), default = 'iou')
    compare.add_argument('--iterations', type = int, default = 10000)

    return parser


def _check_value(flag: str, parse, value: str):
    try:
        parse(value)
    except (ConfigurationError, ValueError) as e:
        raise UsageError(f'{flag}: {e}')


def check_args(args: argparse.Namespace):
    """
    Flag checks that argparse cannot express. Raises UsageError naming the offending flag.
    """
    if args.threads is not None and args.threads < 1:
        raise UsageError('--threads must be >= 1')

    if args.seed is not None and args.seed < 0:
        raise UsageError('--seed must be non-negative')

    for flag in ('count', 'test_count', 'epochs', 'max_steps', 'steps', 'iterations'):
        value = getattr(args, flag, None)
        if value is not None and value < (0 if flag in ('count', 'test_count') else 1):
            raise UsageError(f'--{flag.replace("_", "-")} must be {"non-negative" if "count" in flag else "positive"}')

    if args.command == 'study-ordering':
        if not args.orderings:
            raise UsageError('--orderings is empty')
        for ordering in args.orderings:
            _check_value('--orderings', OrderingStrategy.parse, ordering)
        unknown = [m for m in args.models if m not in DEFAULT_MODELS]
        if not args.models or unknown:
            raise UsageError(f'--models must list values of {DEFAULT_MODELS}')

    if getattr(args, 'ordering', None):
        _check_value('--ordering', OrderingStrategy.parse, args.ordering)

    if getattr(args, 'reward', None):
        _check_value('--reward', RewardKind.parse, args.reward)

    if args.command == 'study-datasize':
        if not args.fractions or any(not 0 < f <= 1 for f in args.fractions):
            raise UsageError('--fractions must lie in (0, 1]')


def echo(title: str, config: dict):
    """
    Prints the resolved configuration as the first output block
    """
    print(f'# {title}')
    for line in json.dumps(config, indent = 2, sort_keys = True, default = str).splitlines():
        print(f'# {line}')
    sys.stdout.flush()


def derived_seeds(seed: int, purposes: List[str]) -> dict:
    return {purpose: derive_seed(seed, purpose) for purpose in purposes}


def train_config(args: argparse.Namespace, manifest: DatasetManifest, **overrides) -> TrainConfig:
    """
    TrainConfig from --config (if any), the dataset domain and the command-line overrides
    """
    values = TrainConfig.read_values(args.config) if getattr(args, 'config', None) else {}
    values.setdefault('domain', manifest.domain)

    if args.seed is not None:
        values['seed'] = args.seed
    if args.threads is not None:
        values['threads'] = args.threads

    values.update({key: value for key, value in overrides.items() if value is not None})
    return TrainConfig(values)


def run_gen(args) -> int:
    values = DatasetConfig.create_from_file(args.config).to_dict() if args.config else {}
    flags = {
        'domain': args.domain, 'count': args.count, 'test_count': args.test_count, 'seed': args.seed,
        'min_objects': args.min_objects, 'max_objects': args.max_objects, 'canvas': args.canvas
    }
    if args.domain and args.domain != values.get('domain', args.domain):
        # Domain-dependent values of the file no longer apply
        values = {key: value for key, value in values.items() if key in ('noise', 'seed', 'threads')}
    values.update({key: value for key, value in flags.items() if value is not None})

    config = DatasetConfig(values)
    echo('gen', {
        'command': 'gen', 'out': args.out, 'dataset': config.to_dict(),
        'derived_seeds': derived_seeds(config.seed, ['split'])
    })

    manifest = generate_dataset(config, args.out, threads = args.threads, progress = args.progress)
    print(f'{len(manifest.train)} train, {len(manifest.test)} test examples written to {args.out}')
    return 0


def run_train(args) -> int:
    manifest = DatasetManifest.load(args.data)
    config = train_config(args, manifest, model = args.model, ordering = args.ordering, epochs = args.epochs,
                          max_steps = args.max_steps)
    echo('train', {
        'command': 'train', 'data': args.data, 'out': args.out, 'init': args.init, 'config': config.to_dict(),
        'derived_seeds': derived_seeds(config.seed, ['init', 'dropout', 'validation', 'epoch-0'])
    })

    result = train_xent(config, manifest, args.out, init = args.init, metrics_path = args.metrics,
                        progress = args.progress)
    print(f'checkpoint {result.checkpoint}: {result.steps} steps, best validation loss {result.best_loss:.4f}')
    return 0


def run_rl(args) -> int:
    manifest = DatasetManifest.load(args.data)
    config = train_config(args, manifest, reward = args.reward, rl_steps = args.steps)
    echo('rl', {
        'command': 'rl', 'data': args.data, 'init': args.init, 'out': args.out, 'config': config.to_dict(),
        'derived_seeds': derived_seeds(config.seed, ['rl-sample', 'rl-epoch-0'])
    })

    result = train_rl(config, manifest, args.init, args.out, metrics_path = args.metrics,
                      reward_log_path = args.reward_log, progress = args.progress)
    print(f'checkpoint {result.checkpoint}: {result.steps} steps, last mean reward {result.last_reward}')
    return 0


def run_eval(args) -> int:
    echo('eval', {
        'command': 'eval', 'checkpoint': args.checkpoint, 'data': args.data, 'report': args.report,
        'split': args.split, 'align': args.align, 'renders': args.renders, 'threads': resolve_threads(args.threads)
    })

    manifest = DatasetManifest.load(args.data)
    report = evaluate_checkpoint(args.checkpoint, manifest, split = args.split, align = args.align,
                                 threads = args.threads, renders_dir = args.renders)
    report.save(args.report)
    print(report.table(), end = '')
    return 0


def run_infer(args) -> int:
    echo('infer', {'command': 'infer', 'checkpoint': args.checkpoint, 'image': args.image})

    with Derenderer(checkpoint = args.checkpoint) as derenderer:
        spec = derenderer.infer(RasterImage.load(args.image))

    print(json.dumps(spec.to_dict(), sort_keys = True))
    return 0


def run_render(args) -> int:
    with open(args.spec, 'r') as fp:
        spec = SceneSpec.from_dict(json.load(fp))

    noise = None
    if args.noisy and spec.domain == DOMAIN_NOISY_SHAPES:
        noise = NoiseParams(seed = derive_seed(args.seed or 0, 'noise'))

    catalog = DatasetManifest.load(args.data).catalog() if args.data else SpriteCatalog.default()

    echo('render', {
        'command': 'render', 'spec': args.spec, 'out': args.out, 'data': args.data,
        'noise': noise.to_dict() if noise is not None else None, 'categories': list(catalog.categories)
    })

    spec.validate(check_count = False, catalog = catalog)
    render(spec, noise, catalog).save(args.out)
    print(f'wrote {args.out}')
    return 0


def run_study_ordering(args) -> int:
    manifest = DatasetManifest.load(args.data)
    config = train_config(args, manifest, max_steps = args.max_steps)
    echo('study-ordering', {
        'command': 'study-ordering', 'data': args.data, 'out': args.out, 'report': args.report,
        'orderings': args.orderings, 'models': args.models, 'config': config.to_dict()
    })

    report = ordering_study(config, manifest, args.out, args.orderings, args.models, progress = args.progress)
    report.save(args.report)
    print(report.table(), end = '')
    return 0


def run_study_datasize(args) -> int:
    manifest = DatasetManifest.load(args.data)
    config = train_config(args, manifest, reward = args.reward, max_steps = args.max_steps)
    echo('study-datasize', {
        'command': 'study-datasize', 'data': args.data, 'out': args.out, 'report': args.report,
        'fractions': args.fractions, 'config': config.to_dict(),
        'derived_seeds': derived_seeds(config.seed, ['subsample', 'bootstrap'])
    })

    report = datasize_study(config, manifest, args.out, args.fractions, progress = args.progress)
    report.save(args.report)
    print(report.table(), end = '')
    return 0


def run_compare(args) -> int:
    seed = args.seed if args.seed is not None else 0
    echo('compare', {
        'command': 'compare', 'report_a': args.report_a, 'report_b': args.report_b, 'metric': args.metric,
        'iterations': args.iterations, 'seed': seed, 'derived_seeds': derived_seeds(seed, ['bootstrap'])
    })

    report_a = MetricReport.load(args.report_a)
    report_b = MetricReport.load(args.report_b)
    p_value = bootstrap_compare(report_a.rows, report_b.rows, args.metric, iterations = args.iterations, seed = seed)

    print(f'{args.metric}\tp={p_value:.6g}')
    return 0


HANDLERS = {
    'gen': run_gen,
    'train': run_train,
    'rl': run_rl,
    'eval': run_eval,
    'infer': run_infer,
    'render': run_render,
    'study-ordering': run_study_ordering,
    'study-datasize': run_study_datasize,
    'compare': run_compare,
}


def main(argv: Optional[List[str]] = None) -> int:
    """
    Runs one command

    Parameters
    ----------
    argv: arguments without the program name, defaults to sys.argv[1:]

    Returns
    -------
    exit code
    """
    parser = build_parser()

    try:
        args = parser.parse_args(argv)
        check_args(args)
    except UsageError as e:
        print(f'usage error: {e}', file = sys.stderr)
        return 1

    logging.basicConfig(
        level = logging.DEBUG if args.verbose else logging.INFO,
        format = '%(asctime)s %(levelname)s %(name)s: %(message)s'
    )

    try:
        return HANDLERS[args.command](args)
    except Exception as e:
        logger.debug('Command failed', exc_info = True)
        print(f'error: {e.__class__.__name__}: {e}', file = sys.stderr)
        return 2


if __name__ == '__main__':
    sys.exit(main())
