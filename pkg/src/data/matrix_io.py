"""
File formats: plain-text matrices, linear model manifests, snapshot
archives and the CSV result files.

Matrix files hold "<rows> <cols>" on the first line followed by one row per
line with 17 significant digits, which round-trips double precision exactly.
"""
import logging
import os
import warnings

import numpy as np
import pandas as pd

from src.models.gramian import SnapshotData
from src.models.oracle import LinearSystem
from src.utils.errors import InvalidDimensionError, ModelIOError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'
ERROR_SERIES_COLUMNS = ['t', 'relative_error']


def write_matrix(path, matrix):
    """Writes a 2-D array in the plain-text matrix format."""
    M = np.atleast_2d(np.asarray(getattr(matrix, 'matrix', matrix), dtype=float))
    if M.ndim != 2:
        raise InvalidDimensionError(f"only 2-D arrays can be written, got {M.ndim} dimensions")
    try:
        np.savetxt(path, M, fmt=FLOAT_FORMAT, header=f"{M.shape[0]} {M.shape[1]}", comments='')
    except OSError as err:
        raise ModelIOError(f"cannot write matrix file {path}: {err}") from err
    logger.debug("Wrote %dx%d matrix to %s", M.shape[0], M.shape[1], path)


def read_matrix(path):
    """Reads a matrix written by write_matrix and checks it against its declared shape."""
    try:
        with warnings.catch_warnings():
            # empty files and bodies are reported through the shape check below
            warnings.simplefilter('ignore', UserWarning)
            header = np.loadtxt(path, dtype=int, max_rows=1, ndmin=1)
            M = np.loadtxt(path, dtype=float, skiprows=1, ndmin=2)
    except OSError as err:
        raise ModelIOError(f"cannot read matrix file {path}: {err}") from err
    except ValueError as err:
        raise ModelIOError(f"{path}: malformed entry ({err})") from err
    if header.size != 2:
        raise ModelIOError(f"{path}: missing '<rows> <cols>' header")
    rows, cols = int(header[0]), int(header[1])
    if M.size == 0 and rows * cols == 0:
        return np.zeros((rows, cols))
    if M.shape != (rows, cols):
        raise ModelIOError(f"{path}: body of shape {M.shape} does not match declared shape {rows}x{cols}")
    return M


def read_manifest(path):
    """Parses key=value lines; '#' starts a comment."""
    entries = {}
    try:
        with open(path) as handle:
            for number, line in enumerate(handle, start=1):
                line = line.split('#', 1)[0].strip()
                if not line:
                    continue
                if '=' not in line:
                    raise ModelIOError(f"{path}:{number}: expected key=value")
                key, value = line.split('=', 1)
                entries[key.strip().lower()] = value.strip()
    except OSError as err:
        raise ModelIOError(f"cannot read manifest {path}: {err}") from err
    return entries


def read_linear_model(path):
    """
    Loads a linear model from a manifest referencing matrix files.

    Keys a, b, c are required; p (parameter vector) and f (n×P parameter
    input matrix) are optional. A p without f acts as an additive source
    term and must have length n. Relative paths resolve against the
    manifest's directory.

    Returns:
        tuple: (LinearSystem, SystemModel)
    """
    entries = read_manifest(path)
    missing = [key for key in ('a', 'b', 'c') if key not in entries]
    if missing:
        raise ModelIOError(f"{path}: manifest is missing keys {missing}")
    base = os.path.dirname(os.path.abspath(path))

    def load(key):
        return read_matrix(os.path.join(base, entries[key]))

    system = LinearSystem(load('a'), load('b'), load('c'))
    if 'p' not in entries:
        return system, system.to_model()
    p = load('p').reshape(-1)
    F = load('f') if 'f' in entries else None
    if F is None:
        if p.size != system.dims.n:
            raise ModelIOError(f"{path}: p has length {p.size}; without f it must have length n={system.dims.n}")
        F = np.eye(system.dims.n)
    return system, system.to_model(F, p)


def write_linear_model(path, system, p=None, F=None):
    """Writes matrix files next to a manifest at path."""
    base = os.path.dirname(os.path.abspath(path))
    stem = os.path.splitext(os.path.basename(path))[0]
    os.makedirs(base, exist_ok=True)
    matrices = {'a': system.A, 'b': system.B, 'c': system.C}
    if p is not None:
        matrices['p'] = np.asarray(p, dtype=float).reshape(-1, 1)
    if F is not None:
        matrices['f'] = F
    lines = []
    for key, matrix in matrices.items():
        name = f"{stem}_{key}.txt"
        write_matrix(os.path.join(base, name), matrix)
        lines.append(f"{key}={name}")
    try:
        with open(path, 'w') as handle:
            handle.write("\n".join(lines) + "\n")
    except OSError as err:
        raise ModelIOError(f"cannot write manifest {path}: {err}") from err


def save_snapshots(path, data):
    """Stores recorded trajectories in a .npz archive (arrays 'states' and 'outputs')."""
    states = np.stack(data.states) if data.states else np.zeros((0, 0, 0))
    outputs = np.stack(data.outputs) if data.outputs else np.zeros((0, 0, 0))
    try:
        with open(path, 'wb') as handle:
            np.savez(handle, states=states, outputs=outputs)
    except OSError as err:
        raise ModelIOError(f"cannot write snapshot archive {path}: {err}") from err


def load_snapshots(path):
    try:
        with np.load(path) as archive:
            states = archive['states']
            outputs = archive['outputs']
    except (OSError, KeyError, ValueError) as err:
        raise ModelIOError(f"cannot read snapshot archive {path}: {err}") from err
    return SnapshotData(states=list(states), outputs=list(outputs))


def write_error_series(path, times, errors):
    frame = pd.DataFrame({'t': np.asarray(times), 'relative_error': np.asarray(errors)},
                         columns=ERROR_SERIES_COLUMNS)
    _to_csv(frame, path)


def write_summary(path, summary):
    _to_csv(summary, path)


def _to_csv(frame, path):
    try:
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
    except OSError as err:
        raise ModelIOError(f"cannot write {path}: {err}") from err
