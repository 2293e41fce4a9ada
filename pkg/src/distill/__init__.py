# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Distillation of the multi-step teacher into a one-step student.
"""

from .dataset import (
    TeacherDataset,
    TeacherRecord,
    build_teacher_dataset,
    read_dataset,
    resimulate,
    write_dataset,
)
from .gan import (
    Discriminator,
    DistillResult,
    GanLosses,
    build_discriminator,
    discriminator_step,
    gan_distill,
    gan_losses,
    generator_step,
)
from .student import (
    DistillationDiverged,
    pretrain_student,
    student_beta,
    student_sample,
    supervised_pretrain,
)

__all__ = [
    "Discriminator",
    "DistillResult",
    "DistillationDiverged",
    "GanLosses",
    "TeacherDataset",
    "TeacherRecord",
    "build_discriminator",
    "build_teacher_dataset",
    "discriminator_step",
    "gan_distill",
    "gan_losses",
    "generator_step",
    "pretrain_student",
    "read_dataset",
    "resimulate",
    "student_beta",
    "student_sample",
    "supervised_pretrain",
    "write_dataset",
]
