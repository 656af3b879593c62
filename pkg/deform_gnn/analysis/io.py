# Copyright (c) the deform-gnn authors.
# All rights reserved.
#
# This source code is licensed under the BSD-style license found in the
# LICENSE file in the root directory of this source tree.

import csv
import logging
import os
from typing import Sequence

import numpy as np

from ..model.deform_conv import ConvDiagnostics
from .analysis import AnalysisReport


logger = logging.getLogger(__name__)


ATTENTION_FILE = "attention.csv"
HOMOPHILIC_WEIGHT_FILE = "homophilic_weight.csv"
RECEPTIVE_FIELD_FILE = "receptive_field.csv"

ATTENTION_HEADER = ["level", "avg_score"]
HOMOPHILIC_WEIGHT_HEADER = ["node", "level", "h_weight_no_deform", "h_weight_deform"]
RECEPTIVE_FIELD_HEADER = ["target", "node", "intensity"]
DIAGNOSTICS_HEADER = ["level", "v", "u", "k", "a_hat"]


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", encoding="UTF8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def _read_csv(path: str, header):
    if not os.path.isfile(path):
        raise FileNotFoundError(f"Report file {path} does not exist.")
    with open(path, "r", encoding="UTF8", newline="") as f:
        reader = csv.reader(f)
        found = next(reader, None)
        if found != header:
            raise ValueError(f"{path}: expected header {header}, got {found}.")
        return list(reader)


def export_report(report: AnalysisReport, folder: str) -> None:
    """Write the three report CSVs into `folder`, replacing earlier ones."""
    os.makedirs(folder, exist_ok=True)
    logger.info(f"Exporting the analysis report to {folder}.")
    _write_csv(
        os.path.join(folder, ATTENTION_FILE),
        ATTENTION_HEADER,
        [[level, _fmt(score)] for level, score in zip(report.levels, report.attention)],
    )
    num_nodes = report.h_weight_deform.shape[0]
    _write_csv(
        os.path.join(folder, HOMOPHILIC_WEIGHT_FILE),
        HOMOPHILIC_WEIGHT_HEADER,
        [
            [
                v,
                level,
                _fmt(report.h_weight_no_deform[v, i]),
                _fmt(report.h_weight_deform[v, i]),
            ]
            for v in range(num_nodes)
            for i, level in enumerate(report.levels)
        ],
    )
    _write_csv(
        os.path.join(folder, RECEPTIVE_FIELD_FILE),
        RECEPTIVE_FIELD_HEADER,
        [
            [target, int(u), _fmt(intensity)]
            for target in sorted(report.receptive_fields)
            for u, intensity in zip(*report.receptive_fields[target])
        ],
    )


def load_report(folder: str) -> AnalysisReport:
    attention_rows = _read_csv(os.path.join(folder, ATTENTION_FILE), ATTENTION_HEADER)
    levels = [row[0] for row in attention_rows]
    level_index = {level: i for i, level in enumerate(levels)}

    hw_rows = _read_csv(os.path.join(folder, HOMOPHILIC_WEIGHT_FILE), HOMOPHILIC_WEIGHT_HEADER)
    num_nodes = max((int(row[0]) for row in hw_rows), default=-1) + 1
    h_no_deform = np.zeros((num_nodes, len(levels)))
    h_deform = np.zeros((num_nodes, len(levels)))
    for row in hw_rows:
        v, i = int(row[0]), level_index[row[1]]
        h_no_deform[v, i] = float(row[2])
        h_deform[v, i] = float(row[3])

    receptive_fields = {}
    rf_rows = _read_csv(os.path.join(folder, RECEPTIVE_FIELD_FILE), RECEPTIVE_FIELD_HEADER)
    for row in rf_rows:
        receptive_fields.setdefault(int(row[0]), ([], []))
        receptive_fields[int(row[0])][0].append(int(row[1]))
        receptive_fields[int(row[0])][1].append(float(row[2]))

    return AnalysisReport(
        levels=levels,
        attention=np.asarray([float(row[1]) for row in attention_rows]),
        h_weight_no_deform=h_no_deform,
        h_weight_deform=h_deform,
        receptive_fields={
            target: (np.asarray(nodes, dtype=np.int64), np.asarray(values))
            for target, (nodes, values) in receptive_fields.items()
        },
    )


def export_diagnostics(diagnostics: Sequence[ConvDiagnostics], path: str) -> None:
    """One CSV row per (level, center, neighbor, kernel) kernel weight."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    rows = []
    for diag in diagnostics:
        for i in range(diag.centers.shape[0]):
            for k in range(diag.num_kernels):
                rows.append(
                    [
                        diag.level,
                        int(diag.centers[i]),
                        int(diag.neighbors[i]),
                        k,
                        _fmt(diag.weights[i, k]),
                    ]
                )
    _write_csv(path, DIAGNOSTICS_HEADER, rows)
