import numpy as np
import pytest

from racdet import (
    BBox,
    ClassLabel,
    ClassifiedDetection,
    ImageRecord,
    Manifest,
    Proposal,
    as_embedding,
    cosine_similarity,
)


class TestCosineSimilarity:
    def test_identity(self):
        assert cosine_similarity([1, 0], [1, 0]) == 1.0

    def test_orthogonal(self):
        assert cosine_similarity([1, 0], [0, 1]) == 0.0

    def test_hand_computed_45_degrees(self):
        # dot = 1, norms 1 and sqrt(2) -> 1/sqrt(2)
        assert cosine_similarity([1, 1], [1, 0]) == pytest.approx(0.7071067, abs=1e-6)

    def test_symmetry(self, rng):
        for _ in range(200):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            assert cosine_similarity(a, b) == cosine_similarity(b, a)

    def test_scale_invariance(self, rng):
        for _ in range(200):
            a = rng.normal(size=16)
            b = rng.normal(size=16)
            c = float(rng.uniform(0.01, 100.0))
            assert cosine_similarity(c * a, b) == pytest.approx(
                cosine_similarity(a, b), abs=1e-6
            )

    def test_self_similarity(self, rng):
        for _ in range(200):
            a = rng.normal(size=16)
            assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-6)

    def test_clamped_to_closed_range(self, rng):
        for _ in range(500):
            a = rng.normal(size=8).astype(np.float32)
            b = rng.normal(size=8).astype(np.float32)
            assert -1.0 <= cosine_similarity(a, b) <= 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cosine_similarity([1, 0], [1, 0, 0])

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError, match="zero-norm"):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])


class TestAsEmbedding:
    def test_casts_to_float32_copy(self):
        src = np.array([1.0, 2.0], dtype=np.float64)
        vec = as_embedding(src)
        assert vec.dtype == np.float32
        assert not vec.flags.writeable
        src[0] = 99.0
        assert vec[0] == 1.0

    def test_dim_check(self):
        with pytest.raises(ValueError, match="dim 3 != 4"):
            as_embedding([1, 2, 3], dim=4)

    def test_rejects_nan_inf(self):
        with pytest.raises(ValueError, match="non-finite"):
            as_embedding([1.0, float("nan")])
        with pytest.raises(ValueError, match="non-finite"):
            as_embedding([1.0, float("inf")])

    def test_rejects_zero_vector(self):
        with pytest.raises(ValueError, match="zero norm"):
            as_embedding([0.0, 0.0, 0.0])

    def test_rejects_empty_and_2d(self):
        with pytest.raises(ValueError):
            as_embedding([])
        with pytest.raises(ValueError):
            as_embedding([[1.0, 2.0]])


class TestBBox:
    def test_valid(self):
        box = BBox(0, 0, 10, 5)
        assert box.area == 50
        assert box.as_tuple() == (0, 0, 10, 5)

    @pytest.mark.parametrize(
        "coords",
        [(10, 0, 5, 5), (0, 5, 10, 5), (-1, 0, 5, 5), (0, 0, float("inf"), 5)],
    )
    def test_invalid(self, coords):
        with pytest.raises(ValueError):
            BBox(*coords)


class TestManifest:
    def test_labels_are_dense(self):
        manifest = Manifest(dim=8, classes=("x", "y", "z"))
        assert manifest.labels() == (
            ClassLabel(0, "x"),
            ClassLabel(1, "y"),
            ClassLabel(2, "z"),
        )
        assert manifest.label_for("y") == ClassLabel(1, "y")

    def test_unknown_label(self):
        with pytest.raises(ValueError, match="unknown label"):
            Manifest(dim=8, classes=("x",)).label_for("nope")

    def test_duplicate_names_rejected(self):
        with pytest.raises(ValueError):
            Manifest(dim=8, classes=("x", "x"))

    def test_bad_dim(self):
        with pytest.raises(ValueError):
            Manifest(dim=0, classes=("x",))


class TestRecords:
    def test_image_record_equality_includes_embedding(self):
        a = ImageRecord("i", [1, 2, 3])
        b = ImageRecord("i", [1, 2, 3])
        c = ImageRecord("i", [1, 2, 4])
        assert a == b
        assert a != c

    def test_proposal_score_range(self):
        box = BBox(0, 0, 1, 1)
        with pytest.raises(ValueError, match="proposal_score"):
            Proposal("i", box, 1.5, [1.0, 0.0])

    def test_upstream_label_is_kept(self):
        p = Proposal("i", BBox(0, 0, 1, 1), 0.5, [1.0, 0.0], upstream_label="car")
        assert p.upstream_label == "car"

    def test_detection_score_range(self):
        box = BBox(0, 0, 1, 1)
        label = ClassLabel(0, "x")
        with pytest.raises(ValueError, match="score"):
            ClassifiedDetection("i", box, label, 1.2, "m", ("a",))

    def test_records_are_frozen(self):
        record = ImageRecord("i", [1.0, 2.0])
        with pytest.raises(AttributeError):
            record.image_id = "other"
        with pytest.raises(ValueError):
            record.embedding[0] = 5.0
