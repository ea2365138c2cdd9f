"""Shared aliases, tolerances and error roots for the connectedness-surface package."""

from __future__ import annotations

import hashlib
import logging
import os
from dataclasses import dataclass, fields
from os import PathLike
from typing import TYPE_CHECKING, TypeAlias

import numpy as np
import psutil
from numpy.typing import NDArray

if TYPE_CHECKING:
    from collections.abc import Iterable

logger = logging.getLogger("connectedness_surface")

StrPath: TypeAlias = str | PathLike[str]
FloatArray: TypeAlias = NDArray[np.float64]

SCHEMA_VERSION = 1
WORKERS_ENV = "CSURF_WORKERS"


class SurfaceError(Exception):
    """Base class for every error raised by the package."""


class InputError(SurfaceError, ValueError):
    """Invalid input: malformed files, bad parameters, invalid matrices."""


class ComputationError(SurfaceError):
    """A numerical routine could not produce a result."""


class InvariantViolation(SurfaceError):  # noqa: N818
    """A computed result failed one of its certificates."""


@dataclass(frozen=True)
class Tolerances:
    """Numeric tolerances used across the package.

    Attributes:
        symmetry: Asymmetry below which a matrix counts as symmetric.
        symmetry_warn: Asymmetry above which symmetrization is logged.
        symmetry_reject: Asymmetry (relative to max |entry|) above which input is rejected.
        psd: Most negative eigenvalue of C still treated as numerical noise.
        budget: Allowed deviation of the weight sum from one.
        nonneg: Most negative weight accepted for long-only portfolios.
        stationarity: KKT stationarity bound.
        slackness: KKT complementary slackness bound.
        dual: Most negative multiplier accepted as dual feasible.
        commute: Relative Frobenius bound for commuting risk matrices.
        negative_alpha: Threshold below which a barycentric weight counts as negative.
        representable: Residual above which a target leaves the affine span of the funds.
        binding: Return-target multiplier above which the target counts as binding.
    """

    symmetry: float = 1e-10
    symmetry_warn: float = 1e-8
    symmetry_reject: float = 1e-6
    psd: float = 1e-10
    budget: float = 1e-8
    nonneg: float = 1e-10
    stationarity: float = 1e-7
    slackness: float = 1e-9
    dual: float = 1e-9
    commute: float = 1e-8
    negative_alpha: float = 1e-9
    representable: float = 1e-6
    binding: float = 1e-10

    def __post_init__(self) -> None:
        for item in fields(self):
            if getattr(self, item.name) <= 0:
                raise InputError(f"Tolerance {item.name} must be positive.")


DEFAULT_TOLERANCES = Tolerances()


def resolve_workers(workers: int | None = None) -> int:
    """Return the number of worker threads to use.

    `None` reads `CSURF_WORKERS` (default 1); `0` means one worker per physical core.
    """
    if workers is None:
        workers = int(os.getenv(WORKERS_ENV, "1"))
    if workers < 0:
        raise InputError(f"Worker count must be non-negative, got {workers}.")
    if workers == 0:
        workers = psutil.cpu_count(logical=False) or 1
    return workers


def fingerprint(*arrays: FloatArray, labels: Iterable[str] = ()) -> str:
    """Returns the SHA256 hash over the raw bytes of `arrays` and the `labels`."""
    hash_func = hashlib.sha256()
    for array in arrays:
        contiguous = np.ascontiguousarray(array, dtype=np.float64)
        hash_func.update(str(contiguous.shape).encode("utf-8"))
        hash_func.update(contiguous.tobytes())
    for label in labels:
        hash_func.update(label.encode("utf-8"))
        hash_func.update(b"\0")
    return hash_func.hexdigest()


def asymmetry(matrix: FloatArray) -> float:
    """Largest absolute difference between `matrix` and its transpose."""
    if matrix.size == 0:
        return 0.0
    return float(np.max(np.abs(matrix - matrix.T)))


def symmetrize(matrix: FloatArray) -> FloatArray:
    """Return (A + A^T) / 2."""
    return 0.5 * (matrix + matrix.T)


def project_psd(matrix: FloatArray) -> FloatArray:
    """Clip the negative eigenvalues of a symmetric matrix to zero.

    The matrix is returned unchanged when it is already positive semidefinite.
    """
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    if eigenvalues.size == 0 or eigenvalues[0] >= 0:
        return matrix
    clipped = np.clip(eigenvalues, 0.0, None)
    rebuilt = (eigenvectors * clipped) @ eigenvectors.T
    return symmetrize(rebuilt)


__all__ = [
    "DEFAULT_TOLERANCES",
    "SCHEMA_VERSION",
    "WORKERS_ENV",
    "ComputationError",
    "FloatArray",
    "InputError",
    "InvariantViolation",
    "StrPath",
    "SurfaceError",
    "Tolerances",
    "asymmetry",
    "fingerprint",
    "project_psd",
    "resolve_workers",
    "symmetrize",
]
