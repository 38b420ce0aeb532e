import numpy as np
import pytest

from racdet import ImageRecord, InstanceRecord, Manifest, MemoryBank


def random_embedding(rng, dim=32):
    vec = rng.normal(size=dim)
    while not vec.any():  # pragma: no cover - essentially impossible
        vec = rng.normal(size=dim)
    return vec


def make_bank(rng, n_images=20, n_instances=60, dim=32, classes=("a", "b", "c")):
    """A random but internally consistent bank."""
    manifest = Manifest(dim=dim, classes=classes)
    bank = MemoryBank(manifest)
    image_ids = [f"img-{i:04d}" for i in range(n_images)]
    for image_id in image_ids:
        bank.add_image(ImageRecord(image_id, random_embedding(rng, dim)))
    labels = manifest.labels()
    for i in range(n_instances):
        owner = image_ids[int(rng.integers(n_images))]
        x0, y0 = rng.uniform(0, 500, size=2)
        bank.add_instance(
            InstanceRecord(
                instance_id=f"inst-{i:05d}",
                image_id=owner,
                bbox=_box(x0, y0, rng),
                label=labels[int(rng.integers(len(labels)))],
                embedding=random_embedding(rng, dim),
            )
        )
    return bank


def _box(x0, y0, rng):
    from racdet import BBox

    w, h = rng.uniform(5, 100, size=2)
    return BBox(x0, y0, x0 + w, y0 + h)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
