# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
MCP server object shared by the tool modules.
"""

import logging

from fastmcp import FastMCP

logger = logging.getLogger(__name__)

# Initialize FastMCP server with error handling
try:
    mcp = FastMCP("Intersection Failure Planner")
    logger.info("MCP server initialized successfully.")
except Exception as e:
    logger.error(f"Failed to initialize MCP server: {e}")
    raise
