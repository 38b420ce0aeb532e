"""Memory bank basics: adding labeled data online, snapshots, persistence.

The bank is the one mutable object in the system. Everything a classifier
sees comes from an immutable snapshot, so you can keep labeling new images
while inference runs against the last consistent state.

Run: python demos/01_bank_basics.py
"""

import tempfile

import numpy as np

from racdet import BBox, ImageRecord, InstanceRecord, Manifest, MemoryBank

rng = np.random.default_rng(0)

manifest = Manifest(dim=16, classes=("ship", "plane", "tank"))
bank = MemoryBank(manifest)
print(f"new bank: dim={manifest.dim}, classes={manifest.classes}")

# label a couple of scenes
for image_id in ("harbor-01", "airfield-01"):
    bank.add_image(ImageRecord(image_id, rng.normal(size=16)))
print(f"after 2 images: generation={bank.generation}")

bank.add_instance(
    InstanceRecord("harbor-01:a", "harbor-01", BBox(10, 10, 60, 40),
                   manifest.label_for("ship"), rng.normal(size=16))
)
bank.add_instance(
    InstanceRecord("airfield-01:a", "airfield-01", BBox(200, 80, 300, 160),
                   manifest.label_for("plane"), rng.normal(size=16))
)
print("per-class counts:", {l.name: n for l, n in bank.per_class_counts.items()})

# snapshots are frozen views; later edits do not touch them
snap = bank.snapshot()
bank.add_image(ImageRecord("harbor-02", rng.normal(size=16)))
print(f"snapshot still sees {snap.image_count} images; live bank has {bank.image_count}")

# removing an image cascades to its instances, keeping retrieval consistent
bank.remove_image("harbor-01")
print("after removing harbor-01:", {l.name: n for l, n in bank.per_class_counts.items()})

# persistence round-trips everything except the generation counter
with tempfile.TemporaryDirectory() as scratch:
    bank.save(scratch)
    loaded = MemoryBank.load(scratch)
    print(
        f"reloaded: {loaded.image_count} images, {loaded.instance_count} instances, "
        f"generation reset to {loaded.generation}"
    )
