"""
Binary tensor container shared by embedding archives, feature bundles and
checkpoints.

A file is one UTF-8 JSON header line terminated by a newline, followed by
row-major little-endian 32-bit floats. Single-matrix embedding files use the
header ``{rows, cols, dtype: "f32", provider_id}``; multi-tensor files list
``tensors: [{name, shape}]`` and store the tensors back to back in that order.
"""
import json
from collections import OrderedDict
from pathlib import Path

import numpy as np

from intelligibility.exceptions import FeatureError

DTYPE = 'f32'
_WIRE_DTYPE = np.dtype('<f4')


def _encode_header(header):
    return (json.dumps(header, sort_keys=True) + '\n').encode('utf-8')


def _read_header(f, path):
    line = f.readline()
    try:
        header = json.loads(line.decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise FeatureError(f"{path}: corrupt tensor header")
    if not isinstance(header, dict) or header.get('dtype') != DTYPE:
        raise FeatureError(f"{path}: unsupported tensor header, expected dtype '{DTYPE}'")
    return header


def _read_floats(f, count, path):
    payload = f.read(count * _WIRE_DTYPE.itemsize)
    if len(payload) != count * _WIRE_DTYPE.itemsize:
        raise FeatureError(f"{path}: truncated tensor data")
    return np.frombuffer(payload, dtype=_WIRE_DTYPE).astype(np.float32)


def write_embedding(path, matrix, provider_id):
    """Write one rows x cols matrix in the embedding archive format."""
    matrix = np.ascontiguousarray(np.asarray(matrix), dtype=_WIRE_DTYPE)
    if matrix.ndim != 2:
        raise FeatureError(f"embedding must be a matrix, got shape {matrix.shape}")
    header = {'rows': matrix.shape[0], 'cols': matrix.shape[1], 'dtype': DTYPE, 'provider_id': provider_id}
    with open(path, 'wb') as f:
        f.write(_encode_header(header))
        f.write(matrix.tobytes())


def read_embedding(path):
    """
    Read a single-matrix embedding file.

    Returns:
        (float32 matrix, header dict)
    """
    path = Path(path)
    with open(path, 'rb') as f:
        header = _read_header(f, path)
        try:
            rows, cols = int(header['rows']), int(header['cols'])
        except (KeyError, TypeError, ValueError):
            raise FeatureError(f"{path}: embedding header lacks rows/cols")
        data = _read_floats(f, rows * cols, path)
    return data.reshape(rows, cols), header


def write_tensors(path, tensors, **metadata):
    """
    Write several named tensors with free-form JSON metadata.

    Args:
        path: Output file
        tensors: Iterable of (name, array) pairs; order is preserved
        **metadata: JSON-serializable header fields
    """
    arrays = [(name, np.ascontiguousarray(np.asarray(value), dtype=_WIRE_DTYPE)) for name, value in tensors]
    header = dict(metadata)
    header['dtype'] = DTYPE
    header['tensors'] = [{'name': name, 'shape': list(array.shape)} for name, array in arrays]
    with open(path, 'wb') as f:
        f.write(_encode_header(header))
        for _, array in arrays:
            f.write(array.tobytes())


def read_tensors(path):
    """
    Read a multi-tensor file.

    Returns:
        (header dict, OrderedDict name -> float32 array)
    """
    path = Path(path)
    tensors = OrderedDict()
    with open(path, 'rb') as f:
        header = _read_header(f, path)
        entries = header.get('tensors')
        if not isinstance(entries, list):
            raise FeatureError(f"{path}: header has no tensor index")
        for entry in entries:
            shape = tuple(int(d) for d in entry['shape'])
            data = _read_floats(f, int(np.prod(shape, dtype=np.int64)), path)
            tensors[entry['name']] = data.reshape(shape)
    return header, tensors


def read_header(path):
    """Header of an embedding or multi-tensor file, without the payload."""
    path = Path(path)
    with open(path, 'rb') as f:
        return _read_header(f, path)
