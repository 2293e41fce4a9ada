# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Test configuration and fixtures for the intersection failure planner test suite.
"""

import os
import sys
from pathlib import Path

# Set fast retry configuration BEFORE importing any src modules
# This ensures the retry decorators pick up the fast configuration
os.environ.update(
    {
        "CFS_LOG_LEVEL": "WARNING",  # Reduce log noise in tests
        "CFS_MCP_TRANSPORT": "stdio",
        "CFS_IO_MAX_RETRIES": "2",
        "CFS_IO_INITIAL_DELAY": "0.001",  # 1ms instead of the default
        "CFS_IO_MAX_DELAY": "0.01",
    }
)
for key in ("CFS_SEED", "CFS_WORKERS", "CFS_NOISE_GAMMA", "CFS_NOISE_INFLATION", "CFS_CONFIG"):
    os.environ.pop(key, None)

# Add src directory to Python path for imports
src_dir = Path(__file__).parent.parent / "src"
sys.path.insert(0, str(src_dir))

# Import the package properly - this will trigger tool registration
import src.tools  # noqa: F401, E402