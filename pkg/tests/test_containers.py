"""Binary embedding container round-trips and corruption handling."""

import numpy as np
import pytest

from avloc.containers import (
    MAGIC,
    container_bytes,
    parse_container,
    read_container,
    write_container,
)
from avloc.core import SegmentEmbeddings
from avloc.errors import ContainerError


def test_write_read_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    emb = SegmentEmbeddings("audio", rng.standard_normal((10, 16)).astype(np.float32))
    path = tmp_path / "a.ovae"
    write_container(emb, path)
    back = read_container(path)
    assert back.modality == "audio"
    np.testing.assert_array_equal(back.data.astype(np.float32), emb.data.astype(np.float32))


def test_file_level_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(1)
    emb = SegmentEmbeddings("visual", rng.standard_normal((7, 5)))
    path = tmp_path / "v.ovae"
    write_container(emb, path)
    first = path.read_bytes()
    write_container(read_container(path), path)
    assert path.read_bytes() == first


def test_header_and_payload_size():
    emb = SegmentEmbeddings("audio", np.zeros((10, 1024)))
    blob = container_bytes(emb)
    assert blob[:4] == MAGIC
    assert len(blob) == 17 + 40960  # header + 10*1024 f32 payload


def test_truncated_payload_names_byte_counts(tmp_path):
    emb = SegmentEmbeddings("audio", np.ones((4, 4)))
    blob = container_bytes(emb)
    with pytest.raises(ContainerError, match="expected 81 bytes, got 60"):
        parse_container(blob[:60])


def test_bad_magic_rejected():
    emb = SegmentEmbeddings("audio", np.ones((2, 2)))
    blob = b"XXXX" + container_bytes(emb)[4:]
    with pytest.raises(ContainerError, match="bad magic"):
        parse_container(blob)


def test_bad_version_rejected():
    emb = SegmentEmbeddings("audio", np.ones((2, 2)))
    blob = bytearray(container_bytes(emb))
    blob[4] = 99
    with pytest.raises(ContainerError, match="version"):
        parse_container(bytes(blob))


def test_unknown_modality_code_rejected():
    emb = SegmentEmbeddings("audio", np.ones((2, 2)))
    blob = bytearray(container_bytes(emb))
    blob[8] = 7  # modality byte
    with pytest.raises(ContainerError, match="modality"):
        parse_container(bytes(blob))


def test_text_modality_supported(tmp_path):
    emb = SegmentEmbeddings("text", np.ones((3, 8)))
    path = tmp_path / "t.ovae"
    write_container(emb, path)
    assert read_container(path).modality == "text"


def test_payload_is_little_endian_f32_row_major():
    emb = SegmentEmbeddings("audio", np.array([[1.0, 2.0], [3.0, 4.0]]))
    blob = container_bytes(emb)
    payload = np.frombuffer(blob, dtype="<f4", offset=17)
    np.testing.assert_array_equal(payload, [1.0, 2.0, 3.0, 4.0])
