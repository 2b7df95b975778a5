import numpy as np
import pytest

from agegender.data import (
    SYNTH_FACE_BBOX,
    SampleRecord,
    generate_synthetic_dataset,
    load_image,
    read_controls_file,
    read_detection_manifest,
    read_ppm,
    read_sample_manifest,
    read_votes_file,
    synth_sample,
    write_detection_manifest,
    write_ppm,
    write_sample_manifest,
)
from agegender.errors import InputError
from agegender.pairing import BBox, Detection


def test_ppm_roundtrip(tmp_path, ):
    rng = np.random.default_rng(0)
    img = rng.random((17, 23, 3))
    path = tmp_path / "img.ppm"
    write_ppm(path, img)
    back = read_ppm(path)
    assert back.shape == (17, 23, 3)
    # 8-bit quantization is the only loss
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-12
    write_ppm(path, back)
    np.testing.assert_array_equal(read_ppm(path), back)


def test_ppm_rejects_other_formats(tmp_path):
    path = tmp_path / "img.ppm"
    path.write_bytes(b"P3\n1 1\n255\n0 0 0\n")
    with pytest.raises(InputError):
        read_ppm(path)


def test_load_raw_tensor(tmp_path):
    img = np.random.default_rng(1).random((5, 6, 3))
    path = tmp_path / "img.npy"
    np.save(path, img)
    np.testing.assert_array_equal(load_image(str(path)), img)
    bad = tmp_path / "bad.npy"
    np.save(bad, np.zeros((5, 6)))
    with pytest.raises(InputError):
        load_image(str(bad))


def test_sample_manifest_roundtrip(tmp_path):
    records = [
        SampleRecord("a.ppm", BBox(1, 2, 3, 4), BBox(0, 0, 10, 10), 31.5, "female"),
        SampleRecord("b.ppm", None, BBox(0, 0, 5, 5), 62.0, "male"),
    ]
    path = tmp_path / "manifest.jsonl"
    write_sample_manifest(path, records)
    back = read_sample_manifest(path)
    assert back == records


def test_sample_record_validation():
    with pytest.raises(InputError):
        SampleRecord("x.ppm", None, None, 30.0, "male")
    with pytest.raises(InputError):
        SampleRecord("x.ppm", BBox(0, 0, 1, 1), None, 30.0, "robot")


def test_sample_manifest_errors(tmp_path):
    path = tmp_path / "manifest.jsonl"
    path.write_text("")
    with pytest.raises(InputError):
        read_sample_manifest(path)
    path.write_text("not json\n")
    with pytest.raises(InputError):
        read_sample_manifest(path)


def test_detection_manifest_roundtrip(tmp_path):
    entries = [
        {
            "image": "scene.ppm",
            "detections": [
                Detection(BBox(0, 0, 10, 10), "face", 0.9),
                Detection(BBox(0, 0, 40, 80), "person", 0.8),
            ],
        }
    ]
    path = tmp_path / "detections.jsonl"
    write_detection_manifest(path, entries)
    back = read_detection_manifest(path)
    assert back == entries
    # field order in the file is fixed
    first = path.read_text().splitlines()[0]
    assert first.index('"kind"') < first.index('"x0"') < first.index('"score"')


def test_votes_and_controls_files(tmp_path):
    votes = tmp_path / "votes.jsonl"
    votes.write_text('{"task": "t1", "user": "u1", "age": 30, "gender": "male"}\n')
    rows = read_votes_file(votes)
    assert rows[0]["task"] == "t1"
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"user": "u1"}\n')
    with pytest.raises(InputError):
        read_votes_file(bad)
    controls = tmp_path / "controls.jsonl"
    controls.write_text(
        '{"user": "u1", "voted": 30, "truth": 32}\n{"user": "u1", "voted": 40, "truth": 40}\n'
    )
    answers = read_controls_file(controls)
    assert answers == {"u1": [(30.0, 32.0), (40.0, 40.0)]}


# ---------------------------------------------------------------------------
# synthetic fixtures


def test_synth_sample_encodings():
    rng = np.random.default_rng(2)
    img, age, gender = synth_sample(rng, mode="shared")
    assert img.shape == (96, 96, 3)
    assert 0.0 <= age <= 100.0
    fb = SYNTH_FACE_BBOX
    face_mean = img[fb.y0:fb.y1, fb.x0:fb.x1].mean()
    # mean intensity tracks age
    expected = 0.1 + 0.6 * age / 100 + 0.05  # + gender bias /3 channels
    assert abs(face_mean - expected) < 0.02
    # channel dominance encodes gender
    r, b = img[..., 0].mean(), img[..., 2].mean()
    assert (r > b) == (gender == "male")


def test_synth_split_mode_splits_information():
    rng = np.random.default_rng(3)
    img, age, _ = synth_sample(rng, mode="split")
    fb = SYNTH_FACE_BBOX
    face = img[fb.y0:fb.y1, fb.x0:fb.x1].mean()
    body = img[fb.y1 + 10:, :].mean()
    # reconstructing age needs both signals (0.1 base + 0.05 mean gender bias)
    u = (face - 0.15) / 0.6 * 50
    v = (body - 0.15) / 0.6 * 50
    assert abs((u + v) - age) < 3.0
    with pytest.raises(InputError):
        synth_sample(rng, mode="nonsense")


def test_generate_synthetic_dataset_deterministic(tmp_path):
    m1 = generate_synthetic_dataset(tmp_path / "a", 5, seed=42)
    m2 = generate_synthetic_dataset(tmp_path / "b", 5, seed=42)
    r1 = read_sample_manifest(m1)
    r2 = read_sample_manifest(m2)
    assert [(r.age, r.gender) for r in r1] == [(r.age, r.gender) for r in r2]
    img1 = load_image(str(tmp_path / "a" / r1[0].image))
    img2 = load_image(str(tmp_path / "b" / r2[0].image))
    np.testing.assert_array_equal(img1, img2)
    with pytest.raises(InputError):
        generate_synthetic_dataset(tmp_path / "c", 0)
