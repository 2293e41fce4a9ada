# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Configuration, validation, artifact storage and the MCP server object.
"""

from . import (
    config,  # noqa: F401
    storage,  # noqa: F401
    validation,  # noqa: F401
)
