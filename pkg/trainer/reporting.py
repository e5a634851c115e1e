"""
CSV output of training metrics.

Per-epoch columns: epoch, train_loss, train_accuracy, model_sparsity,
then <layer>_w_n and <layer>_w_p for every quantized layer in order.
Sweep columns: gamma, final_loss, final_accuracy, final_sparsity,
full_precision_accuracy. Reals are written with nine significant digits.
"""
import csv
from typing import Sequence, TextIO

from .training import MetricsRow, SweepRow

METRICS_COLUMNS = ['epoch', 'train_loss', 'train_accuracy', 'model_sparsity']


def _real(value: float) -> str:
    return f'{value:.9g}'


def write_metrics_csv(rows: Sequence[MetricsRow], stream: TextIO):
    writer = csv.writer(stream, lineterminator='\n')
    layer_names = [name for name, _, _ in rows[0].centroids] if rows else []
    writer.writerow(METRICS_COLUMNS + [f'{name}_{c}' for name in layer_names for c in ('w_n', 'w_p')])
    for row in rows:
        values = [row.epoch, _real(row.train_loss), _real(row.train_accuracy), _real(row.model_sparsity)]
        for _, w_n, w_p in row.centroids:
            values += [_real(w_n), _real(w_p)]
        writer.writerow(values)


def write_sweep_csv(rows: Sequence[SweepRow], stream: TextIO):
    writer = csv.writer(stream, lineterminator='\n')
    writer.writerow(SweepRow._fields)
    for row in rows:
        writer.writerow([_real(value) for value in row])
