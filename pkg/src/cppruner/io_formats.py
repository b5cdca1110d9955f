"""Binary tensor files (CPT1), field checkpoints (CPF1), XYZ point lists
and PGM/PPM slice previews."""

import struct

import numpy as np

from .neural_field import FieldParams, FourierMap, MlpStack

TENSOR_MAGIC = b"CPT1"
FIELD_MAGIC = b"CPF1"

_ACT_IDS = {"relu": 0, "sine": 1, "tanh": 2}
_ACT_NAMES = {v: k for k, v in _ACT_IDS.items()}


class FileFormatError(ValueError):
    """Malformed on-disk artifact."""


# ---------------------------------------------------------------------------
# CPT1 dense tensors

def write_tensor(t: np.ndarray, path, dtype="f8"):
    t = np.asarray(t)
    if t.ndim == 0:
        raise FileFormatError("cannot write a 0-dimensional tensor")
    code, npdtype = (0, "<f4") if dtype in ("f4", "f32") else (1, "<f8")
    with open(path, "wb") as fh:
        fh.write(TENSOR_MAGIC)
        fh.write(struct.pack("<BB", code, t.ndim))
        fh.write(struct.pack(f"<{t.ndim}I", *t.shape))
        fh.write(np.ascontiguousarray(t, dtype=npdtype).tobytes())


def read_tensor(path) -> np.ndarray:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != TENSOR_MAGIC:
        raise FileFormatError(f"{path}: bad magic {blob[:4]!r}, expected {TENSOR_MAGIC!r}")
    if len(blob) < 6:
        raise FileFormatError(f"{path}: truncated header")
    code, ndim = struct.unpack_from("<BB", blob, 4)
    if ndim == 0:
        raise FileFormatError(f"{path}: zero-dimensional tensor header")
    if code not in (0, 1):
        raise FileFormatError(f"{path}: unknown dtype code {code}")
    header_end = 6 + 4 * ndim
    if len(blob) < header_end:
        raise FileFormatError(f"{path}: truncated dimension table")
    shape = struct.unpack_from(f"<{ndim}I", blob, 6)
    npdtype = "<f4" if code == 0 else "<f8"
    count = int(np.prod(shape))
    payload = blob[header_end:]
    if len(payload) != count * (4 if code == 0 else 8):
        raise FileFormatError(
            f"{path}: payload holds {len(payload)} bytes, header implies {count} entries"
        )
    return np.frombuffer(payload, dtype=npdtype).astype(np.float64).reshape(shape)


# ---------------------------------------------------------------------------
# XYZ point lists

def write_points(points, path):
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        for p in points:
            fh.write(" ".join(f"{c:.9g}" for c in p) + "\n")


def read_points(path) -> np.ndarray:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            try:
                rows.append([float(tok) for tok in body.split()])
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: malformed point line {line.strip()!r}")
            if len(rows[-1]) != 3:
                raise FileFormatError(f"{path}:{lineno}: expected 3 coordinates")
    return np.asarray(rows, dtype=np.float64).reshape(-1, 3)


# ---------------------------------------------------------------------------
# image previews

def _scale_to_bytes(img):
    lo, hi = float(img.min()), float(img.max())
    if hi == lo:
        # degenerate range maps to mid-gray
        return np.full(img.shape, 128, dtype=np.uint8)
    return np.round((img - lo) / (hi - lo) * 255.0).astype(np.uint8)


def write_image_preview(t: np.ndarray, path, slice_spec="auto"):
    """Binary PGM for one slice, PPM when an RGB slice triple is available.

    slice_spec: "auto" (RGB if the third axis has size 3, else slice 0),
    "rgb", or an integer index into the third axis.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim == 2:
        t = t[:, :, None]
    if t.ndim != 3:
        t = t.reshape(t.shape[0], t.shape[1], -1)
    n_slices = t.shape[2]
    rgb = slice_spec == "rgb" or (slice_spec == "auto" and n_slices == 3)
    if rgb:
        if n_slices != 3:
            raise FileFormatError("rgb preview needs exactly 3 slices")
        data = _scale_to_bytes(t)
        header = f"P6\n{t.shape[1]} {t.shape[0]}\n255\n".encode()
        payload = data.tobytes()
    else:
        idx = 0 if slice_spec in ("auto", "rgb") else int(slice_spec)
        if not (0 <= idx < n_slices):
            raise FileFormatError(f"slice {idx} out of range (0..{n_slices - 1})")
        data = _scale_to_bytes(t[:, :, idx])
        header = f"P5\n{t.shape[1]} {t.shape[0]}\n255\n".encode()
        payload = data.tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


# ---------------------------------------------------------------------------
# CPF1 field checkpoints

def write_field(params: FieldParams, path):
    ndim = params.order
    stacks = params.stacks
    depth = stacks[0].depth
    flags = (1 if stacks[0].linear_head else 0) | (2 if params.use_bias else 0)
    with open(path, "wb") as fh:
        fh.write(FIELD_MAGIC)
        fh.write(struct.pack("<6I", ndim, params.rank, params.fourier.m, depth,
                             _ACT_IDS[stacks[0].activation], flags))
        for stack in stacks:
            for w in stack.weights:
                fh.write(struct.pack("<2I", *w.shape))
        payload = [params.fourier.a, params.fourier.b]
        for stack in stacks:
            for w, b in zip(stack.weights, stack.biases):
                payload.append(w.ravel())
                payload.append(b)
        payload.append(params.domain.ravel())
        fh.write(np.concatenate(payload).astype("<f8").tobytes())


def read_field(path) -> FieldParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != FIELD_MAGIC:
        raise FileFormatError(f"{path}: bad magic {blob[:4]!r}, expected {FIELD_MAGIC!r}")
    ndim, rank, m, depth, act_id, flags = struct.unpack_from("<6I", blob, 4)
    if act_id not in _ACT_NAMES:
        raise FileFormatError(f"{path}: unknown activation id {act_id}")
    off = 4 + 24
    shapes = []
    for _ in range(ndim):
        dims = []
        for _ in range(depth):
            dims.append(struct.unpack_from("<2I", blob, off))
            off += 8
        shapes.append(dims)
    data = np.frombuffer(blob[off:], dtype="<f8")
    need = 2 * m + sum(r * c + r for dims in shapes for (r, c) in dims) + 2 * ndim
    if data.size != need:
        raise FileFormatError(f"{path}: payload holds {data.size} doubles, expected {need}")
    pos = 0

    def take(n):
        nonlocal pos
        chunk = data[pos:pos + n].copy()
        pos += n
        return chunk

    fourier = FourierMap(take(m), take(m))
    linear_head = bool(flags & 1)
    use_bias = bool(flags & 2)
    stacks = []
    for d in range(ndim):
        weights = []
        biases = []
        for (r, c) in shapes[d]:
            weights.append(take(r * c).reshape(r, c))
            biases.append(take(r))
        stacks.append(MlpStack(weights, biases, activation=_ACT_NAMES[act_id],
                               linear_head=linear_head))
    domain = take(2 * ndim).reshape(ndim, 2)
    params = FieldParams(fourier, stacks, domain, use_bias=use_bias)
    if params.rank != rank:
        raise FileFormatError(f"{path}: rank field {rank} disagrees with layer shapes")
    return params
