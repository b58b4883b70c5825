"""Cross-component round-trip: extractor output parses in the toolkit.

The extractor and the localization toolkit share only the documented
file formats; this module proves a container written here is read
bit-exactly over there, at the benchmark shape (T=10, d=1024).
"""

import numpy as np
import pytest

avloc_containers = pytest.importorskip("avloc.containers")
avloc_manifest = pytest.importorskip("avloc.manifest")

from avextract.encoders import DeterministicEncoder
from avextract.extract import ExtractionJob, extract
from avextract.media import ArraySource


@pytest.fixture(scope="module")
def fixture_dataset(tmp_path_factory):
    out = tmp_path_factory.mktemp("extracted")
    rng = np.random.default_rng(0)
    frames = rng.integers(0, 255, size=(50, 8, 8, 3), dtype=np.uint8)
    waveform = rng.standard_normal(10 * 1600).astype(np.float32)
    source = ArraySource("fixture", frames, waveform, sample_rate=1600)
    job = ExtractionJob(
        videos=[source], class_names=["dog_barking", "piano"], output_dir=out
    )
    encoder = DeterministicEncoder(dim=1024)
    result = extract(job, encoder)
    assert result.written == ["fixture"]
    return out


def test_container_parses_bit_exactly_in_the_toolkit(fixture_dataset):
    path = fixture_dataset / "emb/fixture.audio.ovae"
    original = path.read_bytes()
    parsed = avloc_containers.read_container(path)
    assert parsed.modality == "audio"
    assert parsed.data.shape == (10, 1024)
    # Re-encoding through the toolkit reproduces the extractor's bytes.
    assert avloc_containers.container_bytes(parsed) == original


def test_visual_and_text_containers_parse(fixture_dataset):
    visual = avloc_containers.read_container(fixture_dataset / "emb/fixture.visual.ovae")
    assert visual.modality == "visual" and visual.data.shape == (10, 1024)
    text = avloc_containers.read_container(fixture_dataset / "text_embeddings.ovae")
    assert text.modality == "text" and text.data.shape == (3, 1024)  # 2 classes + other


def test_manifest_skeleton_loads_in_the_toolkit(fixture_dataset):
    entries = avloc_manifest.load_manifest(fixture_dataset / "manifest.jsonl")
    assert [e.video_id for e in entries] == ["fixture"]
    assert entries[0].split == "test"
    assert len(entries[0].segment_flags) == 10
