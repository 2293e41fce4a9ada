# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
MCP tools over the simulator and the failure samplers.
Importing this package registers every tool with the MCP server.
"""

from . import (
    sampling,  # noqa: F401
    simulate,  # noqa: F401
)
