import numpy as np
import pytest

from cppruner import io_formats as io
from cppruner import neural_field as nf
from cppruner.config import TrainConfig


# ---------------------------------------------------------------------------
# CPT1 tensors

def test_tensor_roundtrip_f64(tmp_path):
    t = np.random.default_rng(0).normal(size=(3, 4, 5))
    path = tmp_path / "t.cpt"
    io.write_tensor(t, path)
    back = io.read_tensor(path)
    assert np.array_equal(t, back)
    assert back.shape == (3, 4, 5)


def test_tensor_roundtrip_f32(tmp_path):
    t = np.random.default_rng(1).normal(size=(2, 6)).astype(np.float32)
    path = tmp_path / "t.cpt"
    io.write_tensor(t, path, dtype="f4")
    back = io.read_tensor(path)
    assert np.array_equal(t.astype(np.float64), back)


def test_tensor_header_layout(tmp_path):
    path = tmp_path / "t.cpt"
    io.write_tensor(np.zeros((2, 3)), path)
    blob = path.read_bytes()
    assert blob[:4] == b"CPT1"
    assert blob[4] == 1  # f64
    assert blob[5] == 2  # ndim
    assert int.from_bytes(blob[6:10], "little") == 2
    assert int.from_bytes(blob[10:14], "little") == 3
    assert len(blob) == 14 + 6 * 8


def test_tensor_bad_magic(tmp_path):
    path = tmp_path / "bad.cpt"
    path.write_bytes(b"XXXX" + bytes(20))
    with pytest.raises(io.FileFormatError, match="magic"):
        io.read_tensor(path)


def test_tensor_truncated_payload(tmp_path):
    path = tmp_path / "t.cpt"
    io.write_tensor(np.zeros((2, 3)), path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(io.FileFormatError, match="payload"):
        io.read_tensor(path)


def test_tensor_zero_ndim(tmp_path):
    path = tmp_path / "t.cpt"
    path.write_bytes(b"CPT1" + bytes([1, 0]))
    with pytest.raises(io.FileFormatError, match="zero-dimensional"):
        io.read_tensor(path)


# ---------------------------------------------------------------------------
# XYZ points

def test_points_roundtrip(tmp_path):
    # 9 significant digits give 1e-9 absolute accuracy at unit scale
    pts = np.random.default_rng(2).uniform(-1, 1, size=(20, 3))
    path = tmp_path / "p.xyz"
    io.write_points(pts, path)
    back = io.read_points(path)
    assert np.max(np.abs(back - pts)) < 1e-9


def test_points_comments_and_blank_lines(tmp_path):
    path = tmp_path / "p.xyz"
    path.write_text("# header\n0 0 0\n\n1 2 3  # trailing\n")
    pts = io.read_points(path)
    assert np.array_equal(pts, [[0, 0, 0], [1, 2, 3]])


def test_points_parse_error_line_number(tmp_path):
    path = tmp_path / "p.xyz"
    path.write_text("a b c\n")
    with pytest.raises(io.FileFormatError, match=":1"):
        io.read_points(path)


def test_points_wrong_arity(tmp_path):
    path = tmp_path / "p.xyz"
    path.write_text("1 2\n")
    with pytest.raises(io.FileFormatError, match="3 coordinates"):
        io.read_points(path)


# ---------------------------------------------------------------------------
# previews

def test_preview_constant_is_midgray(tmp_path):
    path = tmp_path / "c.pgm"
    io.write_image_preview(np.full((12, 10), 0.4), path)
    blob = path.read_bytes()
    assert blob.startswith(b"P5\n10 12\n255\n")
    assert set(blob[len(b"P5\n10 12\n255\n"):]) == {128}


def test_preview_ramp_scaling(tmp_path):
    path = tmp_path / "r.pgm"
    io.write_image_preview(np.array([[0.0, 1.0], [2.0, 3.0]]), path)
    payload = path.read_bytes().split(b"\n", 3)[3]
    assert list(payload) == [0, 85, 170, 255]


def test_preview_rgb(tmp_path):
    path = tmp_path / "x.ppm"
    t = np.random.default_rng(3).uniform(size=(8, 9, 3))
    io.write_image_preview(t, path, slice_spec="rgb")
    blob = path.read_bytes()
    assert blob.startswith(b"P6\n9 8\n255\n")
    assert len(blob.split(b"\n", 3)[3]) == 8 * 9 * 3


def test_preview_slice_out_of_range(tmp_path):
    with pytest.raises(io.FileFormatError):
        io.write_image_preview(np.zeros((5, 5, 2)), tmp_path / "x.pgm", slice_spec=7)


# ---------------------------------------------------------------------------
# CPF1 fields

def _params(**kw):
    base = dict(order=3, rank=4, layers=2, width=6, fourier_m=3,
                activation="sine", seed=5)
    base.update(kw)
    return nf.init_params(TrainConfig(**base))


def test_field_roundtrip(tmp_path):
    params = _params()
    vec = nf.param_vector(params)
    nf.set_param_vector(params, np.random.default_rng(4).normal(size=vec.size))
    path = tmp_path / "m.cpf"
    io.write_field(params, path)
    back = io.read_field(path)
    assert back.order == params.order
    assert back.rank == params.rank
    assert np.array_equal(nf.param_vector(back), nf.param_vector(params))
    assert np.array_equal(back.fourier.a, params.fourier.a)
    assert np.array_equal(back.fourier.b, params.fourier.b)
    assert np.array_equal(back.domain, params.domain)
    assert back.stacks[0].activation == "sine"
    # same predictions
    pts = np.random.default_rng(5).uniform(size=(7, 3))
    assert np.array_equal(nf.field_values(back, pts), nf.field_values(params, pts))


@pytest.mark.parametrize("act", ["relu", "tanh"])
def test_field_roundtrip_activations(tmp_path, act):
    params = _params(activation=act)
    path = tmp_path / "m.cpf"
    io.write_field(params, path)
    assert io.read_field(path).stacks[0].activation == act


def test_field_bad_magic(tmp_path):
    path = tmp_path / "m.cpf"
    path.write_bytes(b"NOPE" + bytes(40))
    with pytest.raises(io.FileFormatError, match="magic"):
        io.read_field(path)


def test_field_payload_mismatch(tmp_path):
    params = _params()
    path = tmp_path / "m.cpf"
    io.write_field(params, path)
    blob = path.read_bytes()
    path.write_bytes(blob[:-16])
    with pytest.raises(io.FileFormatError, match="payload"):
        io.read_field(path)
