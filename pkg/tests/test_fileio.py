import json

import numpy as np
import pytest

from nightadapt import BBox, Detection, DetectionSet, ImagePlanes, ValidationError
from nightadapt import fileio
from nightadapt.images import night_prior_from_arrays


def write_json(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(json.dumps(obj))
    return str(path)


class TestDetectionFiles:
    def test_empty_array_gives_empty_map(self, tmp_path):
        path = write_json(tmp_path, "dets.json", [])
        assert fileio.load_detections(path) == {}

    def test_corner_conversion(self, tmp_path):
        path = write_json(
            tmp_path,
            "dets.json",
            [{"image_id": "a", "category_id": 0, "bbox": [0, 0, 10, 10], "score": 0.5}],
        )
        loaded = fileio.load_detections(path)
        assert loaded["a"].detections[0].box == BBox(0, 0, 10, 10)

    def test_grouping_preserves_order(self, tmp_path):
        records = [
            {"image_id": "a", "category_id": 0, "bbox": [i, 0, 1, 1], "score": 0.5}
            for i in range(5)
        ]
        path = write_json(tmp_path, "dets.json", records)
        loaded = fileio.load_detections(path)
        assert [d.box.x1 for d in loaded["a"].detections] == [0, 1, 2, 3, 4]

    def test_roundtrip_many_records(self, tmp_path):
        rng = np.random.default_rng(0)
        sets = {}
        for i in range(40):
            img = f"img{i:03d}"
            dets = []
            for _ in range(25):
                x, y = rng.uniform(0, 500, 2)
                w, h = rng.uniform(1, 80, 2)
                dets.append(
                    Detection(
                        BBox(float(x), float(y), float(x + w), float(y + h)),
                        int(rng.integers(0, 9)),
                        float(rng.uniform(0, 1)),
                    )
                )
            sets[img] = DetectionSet(img, dets, "teacher")
        path = str(tmp_path / "dets.json")
        fileio.save_detections(sets, path)
        loaded = fileio.load_detections(path)
        assert set(loaded) == set(sets)
        for img in sets:
            for a, b in zip(sets[img].detections, loaded[img].detections):
                for attr in ("x1", "y1", "x2", "y2"):
                    assert abs(getattr(a.box, attr) - getattr(b.box, attr)) <= 2e-6
                assert abs(a.confidence - b.confidence) <= 1e-6
                assert a.class_id == b.class_id

    def test_malformed_json_reports_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("[{]")
        with pytest.raises(ValidationError, match="malformed"):
            fileio.load_detections(str(path))

    def test_negative_size_reports_record_index(self, tmp_path):
        path = write_json(
            tmp_path,
            "dets.json",
            [
                {"image_id": "a", "category_id": 0, "bbox": [0, 0, 5, 5], "score": 0.5},
                {"image_id": "a", "category_id": 0, "bbox": [0, 0, -5, 5], "score": 0.5},
            ],
        )
        with pytest.raises(ValidationError, match="record 1"):
            fileio.load_detections(path)

    def test_out_of_range_score_reports_record_index(self, tmp_path):
        path = write_json(
            tmp_path,
            "dets.json",
            [{"image_id": "a", "category_id": 0, "bbox": [0, 0, 5, 5], "score": 1.5}],
        )
        with pytest.raises(ValidationError, match="record 0"):
            fileio.load_detections(path)

    def test_missing_file_is_validation_error(self, tmp_path):
        with pytest.raises(ValidationError, match="no such file"):
            fileio.load_detections(str(tmp_path / "nope.json"))


class TestNightPriorFiles:
    def test_roundtrip(self, tmp_path):
        prior = night_prior_from_arrays([0.2, 0.15, 0.1], [0.05, 0.04, 0.03], 7)
        path = str(tmp_path / "prior.json")
        fileio.save_night_prior(prior, path)
        loaded = fileio.load_night_prior(path)
        assert loaded.sample_count == 7
        assert np.allclose(loaded.stats.mean, prior.stats.mean)
        assert np.allclose(loaded.stats.std, prior.stats.std)

    def test_unknown_keys_rejected(self, tmp_path):
        path = write_json(
            tmp_path, "prior.json",
            {"mean": [0.2], "std": [0.1], "sample_count": 1, "extra": 1},
        )
        with pytest.raises(ValidationError, match="unknown"):
            fileio.load_night_prior(path)


class TestImageFiles:
    def roundtrip(self, tmp_path, channels, suffix):
        rng = np.random.default_rng(1)
        img = ImagePlanes(rng.random((channels, 12, 17)))
        path = str(tmp_path / f"img{suffix}")
        fileio.write_image(img, path)
        loaded = fileio.read_image(path)
        expected = np.floor(img.planes * 255.0 + 0.5) / 255.0
        assert loaded.planes.shape == img.planes.shape
        assert np.allclose(loaded.planes, expected, atol=1e-12)

    def test_png_rgb_roundtrip(self, tmp_path):
        self.roundtrip(tmp_path, 3, ".png")

    def test_png_gray_roundtrip(self, tmp_path):
        self.roundtrip(tmp_path, 1, ".png")

    def test_ppm_rgb_roundtrip(self, tmp_path):
        self.roundtrip(tmp_path, 3, ".ppm")

    def test_ppm_gray_rejected(self, tmp_path):
        img = ImagePlanes(np.zeros((1, 4, 4)))
        with pytest.raises(ValidationError):
            fileio.write_image(img, str(tmp_path / "x.ppm"))

    def test_unsupported_extension_rejected(self, tmp_path):
        img = ImagePlanes(np.zeros((3, 4, 4)))
        with pytest.raises(ValidationError):
            fileio.write_image(img, str(tmp_path / "x.jpg"))

    def test_round_half_up(self, tmp_path):
        # 0.5/255 scaled: value v writes floor(v*255 + 0.5)
        arr = np.full((1, 1, 2), 0.0)
        arr[0, 0, 0] = 127.5 / 255.0  # rounds up to 128
        arr[0, 0, 1] = 127.49 / 255.0  # rounds down to 127
        path = str(tmp_path / "r.png")
        fileio.write_image(ImagePlanes(arr), path)
        loaded = fileio.read_image(path)
        assert loaded.planes[0, 0, 0] == 128 / 255.0
        assert loaded.planes[0, 0, 1] == 127 / 255.0


class TestAtomicWrite:
    def test_writes_complete_content(self, tmp_path):
        path = str(tmp_path / "sub" / "out.txt")
        fileio.atomic_write_text(path, "hello\n")
        assert open(path).read() == "hello\n"

    def test_no_temp_leftovers(self, tmp_path):
        path = str(tmp_path / "out.json")
        fileio.save_json({"a": 1}, path)
        names = set(p.name for p in tmp_path.iterdir())
        assert names == {"out.json"}
