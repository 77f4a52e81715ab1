"""Management command running simulation, detection, benchmark and evaluation jobs."""
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from cli.domain import BENCHMARK_METHODS, COMMANDS, RunConfig
from cli.utils import run, write_error
from lsvar.exceptions import LsvarError


class Command(BaseCommand):
    help = 'Detect change points in low-rank plus sparse VAR(1) series'

    def add_arguments(self, parser):
        parser.add_argument('command', choices=COMMANDS)
        parser.add_argument('--input', dest='input_path', help='CSV series, or a report JSON for evaluate')
        parser.add_argument('--model', dest='model_path', help='Model JSON for evaluate')
        parser.add_argument('--output-dir', default='output')
        parser.add_argument('--scenario', help='Catalog scenario for simulate and benchmark')
        parser.add_argument('--method', default='two-step', choices=BENCHMARK_METHODS)
        parser.add_argument('--window-size', type=int, help='Rolling window length h')
        parser.add_argument('--shift', type=int, help='Rolling window shift l')
        parser.add_argument('--omega', type=float, help='IC penalty per change point; selected from data if unset')
        parser.add_argument('--gamma', type=float, help='Per-segment penalty for dynamic programming')
        parser.add_argument('--q', type=float, default=0.4, help='Weak sparsity exponent of the surrogate')
        parser.add_argument('--alpha-c', type=float, help='Constant c of the default alpha_L')
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--detrend-period', type=int)
        parser.add_argument('--stride', type=int, default=1)
        parser.add_argument('--replicates', type=int)
        parser.add_argument('--refine', action='store_true', help='Refine screened change points')
        parser.add_argument('--tune', action='store_true', help='Pick tuning constants by grid search')
        parser.add_argument('--grid-min', type=float, default=0.001)
        parser.add_argument('--grid-max', type=float, default=10.0)
        parser.add_argument('--grid-size', type=int, default=20)

    def handle(self, *args, **options):
        output_dir = Path(options['output_dir'])
        fields = (
            'input_path', 'model_path', 'scenario', 'method', 'window_size', 'shift', 'omega', 'gamma', 'q',
            'alpha_c', 'seed', 'detrend_period', 'stride', 'replicates', 'refine', 'tune', 'grid_min',
            'grid_max', 'grid_size',
        )
        try:
            config = RunConfig(options['command'], output_dir, **{name: options[name] for name in fields})
        except LsvarError as exc:
            status = write_error(output_dir, exc)
            raise CommandError(str(exc), returncode=status)

        self.stdout.write(f'Running {config.command}...')
        status = run(config)
        if status:
            raise CommandError(f'{config.command} failed; see {output_dir / "error.json"}', returncode=status)
        self.stdout.write(self.style.SUCCESS(f'{config.command} finished; outputs in {output_dir}'))
