# Copyright 2025 Nokia
# Licensed under the BSD 3-Clause License.
# SPDX-License-Identifier: BSD-3-Clause

"""
Artifact storage helpers: retried file I/O and little-endian binary codecs.
"""

import hashlib
import logging
import os
import struct
from pathlib import Path
from typing import Any

import numpy as np

# Using tenacity for retry logic
from tenacity import (
    after_log,
    before_sleep_log,
    retry,
    stop_after_attempt,
    wait_exponential,
)

logger = logging.getLogger(__name__)


class ArtifactFormatError(ValueError):
    """Raised when an artifact has a bad magic, version or is truncated."""

    pass


def get_retry_configuration():
    """Get consistent retry configuration from environment variables."""
    max_retries = int(os.getenv("CFS_IO_MAX_RETRIES", "3"))
    initial_delay = float(os.getenv("CFS_IO_INITIAL_DELAY", "0.05"))
    max_delay = float(os.getenv("CFS_IO_MAX_DELAY", "2.0"))

    return {
        "stop": stop_after_attempt(
            max_retries + 1
        ),  # +1 because MAX_RETRIES means "retries after initial attempt"
        "wait": wait_exponential(multiplier=initial_delay, max=max_delay),
        "retry": should_retry_io_exception,
        "reraise": True,
    }


def should_retry_io_exception(retry_state):
    """Retry transient OS errors, never missing files or format errors."""
    if (
        hasattr(retry_state, "outcome")
        and retry_state.outcome
        and retry_state.outcome.exception()
    ):
        exception = retry_state.outcome.exception()
    else:
        return False

    if isinstance(exception, FileNotFoundError | IsADirectoryError | PermissionError):
        return False
    is_retryable = isinstance(exception, OSError)
    is_format = isinstance(exception, ArtifactFormatError)
    return is_retryable and not is_format


@retry(
    **get_retry_configuration(),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    after=after_log(logger, logging.DEBUG),
)
def write_bytes(path: str | Path, payload: bytes) -> Path:
    """Atomically write an artifact (temp file + rename) with retry logic."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_name(target.name + ".tmp")
    tmp.write_bytes(payload)
    os.replace(tmp, target)
    logger.debug(f"Wrote {len(payload)} bytes to {target}")
    return target


@retry(
    **get_retry_configuration(),
    before_sleep=before_sleep_log(logger, logging.WARNING),
    after=after_log(logger, logging.DEBUG),
)
def read_bytes(path: str | Path) -> bytes:
    """Read an artifact with retry logic."""
    payload = Path(path).read_bytes()
    logger.debug(f"Read {len(payload)} bytes from {path}")
    return payload


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(read_bytes(path)).hexdigest()


class BinaryWriter:
    """Accumulates little-endian fields for one artifact."""

    def __init__(self) -> None:
        self._parts: list[bytes] = []

    def pack(self, fmt: str, *values: Any) -> None:
        self._parts.append(struct.pack("<" + fmt, *values))

    def raw(self, payload: bytes) -> None:
        self._parts.append(payload)

    def array(self, values: np.ndarray, dtype: Any) -> None:
        self._parts.append(np.ascontiguousarray(values, dtype=np.dtype(dtype).newbyteorder("<")).tobytes())

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class BinaryReader:
    """Sequential little-endian reader that reports truncation as a format error."""

    def __init__(self, payload: bytes, source: str = "<bytes>") -> None:
        self._payload = payload
        self._offset = 0
        self.source = source

    def take(self, count: int) -> bytes:
        end = self._offset + count
        if count < 0 or end > len(self._payload):
            raise ArtifactFormatError(
                f"{self.source}: truncated (needed {count} bytes at offset {self._offset})"
            )
        chunk = self._payload[self._offset : end]
        self._offset = end
        return chunk

    def unpack(self, fmt: str) -> tuple[Any, ...]:
        fmt = "<" + fmt
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def array(self, dtype: Any, count: int) -> np.ndarray:
        dt = np.dtype(dtype).newbyteorder("<")
        return np.frombuffer(self.take(dt.itemsize * count), dtype=dt).astype(
            np.dtype(dtype), copy=True
        )

    def expect_magic(self, magic: bytes) -> None:
        found = self.take(len(magic))
        if found != magic:
            raise ArtifactFormatError(
                f"{self.source}: bad magic {found!r}, expected {magic!r}"
            )

    def expect_version(self, supported: int) -> int:
        (version,) = self.unpack("I")
        if version != supported:
            raise ArtifactFormatError(
                f"{self.source}: unsupported version {version}, expected {supported}"
            )
        return version

    @property
    def remaining(self) -> int:
        return len(self._payload) - self._offset

    def expect_end(self) -> None:
        if self.remaining:
            raise ArtifactFormatError(
                f"{self.source}: {self.remaining} trailing bytes after last record"
            )
