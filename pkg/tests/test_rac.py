import json

import numpy as np
import pytest

from racdet import (
    BBox,
    ClassLabel,
    ImageRecord,
    InstanceMatch,
    InstanceRecord,
    Manifest,
    MemoryBank,
    Proposal,
    RacParams,
    classify_dataset,
    classify_proposals,
    context_retrieve,
    fuse_score,
    instance_retrieve,
    vote,
)

from conftest import make_bank, random_embedding
from oracles import full_sort_retrieve


class TestRacParams:
    def test_paper_operating_point_is_valid(self):
        params = RacParams(k=50, n=1, context_thresh=0.1, instance_thresh=0.8, w1=0.5, w2=0.5)
        assert params.k == 50

    def test_weight_sum_enforced(self):
        with pytest.raises(ValueError, match="w1 \\+ w2"):
            RacParams(w1=0.4, w2=0.5)

    @pytest.mark.parametrize("bad", [{"k": 0}, {"n": 0}, {"context_thresh": 1.5}, {"w1": -0.1, "w2": 1.1}])
    def test_bad_fields(self, bad):
        with pytest.raises(ValueError):
            RacParams(**bad)


class TestContextRetrieve:
    def test_identical_image_ranks_first(self, rng):
        bank = make_bank(rng, n_images=12, n_instances=0, dim=16)
        snap = bank.snapshot()
        target_id = snap.image_ids[4]
        query = ImageRecord("q", snap.images[target_id].embedding)
        result = context_retrieve(query, snap, k=3, context_thresh=0.1)
        assert result[0].image_id == target_id
        assert result[0].similarity == pytest.approx(1.0, abs=1e-6)
        assert len(result) <= 3

    def test_all_below_threshold_empty(self, rng):
        bank = make_bank(rng, n_images=5, n_instances=0, dim=16)
        query = ImageRecord("q", random_embedding(rng, 16))
        assert context_retrieve(query, bank.snapshot(), k=5, context_thresh=1.0) == []

    def test_empty_bank(self, rng):
        bank = MemoryBank(Manifest(dim=16, classes=("a",)))
        query = ImageRecord("q", random_embedding(rng, 16))
        assert context_retrieve(query, bank.snapshot(), k=5, context_thresh=-1.0) == []

    def test_matches_full_sort_oracle_top_50(self):
        rng = np.random.default_rng(500)
        bank = make_bank(rng, n_images=1000, n_instances=0, dim=32)
        snap = bank.snapshot()
        candidates = {i: snap.images[i].embedding for i in snap.image_ids}
        for q in range(20):
            query = ImageRecord(f"q{q}", random_embedding(rng, 32))
            got = context_retrieve(query, snap, k=50, context_thresh=0.0)
            expected = full_sort_retrieve(query.embedding, candidates, 0.0, 50)
            assert [(m.image_id, round(m.similarity, 9)) for m in got] == [
                (i, round(s, 9)) for i, s in expected
            ]

    def test_dimension_mismatch(self, rng):
        bank = make_bank(rng, n_images=3, n_instances=0, dim=16)
        query = ImageRecord("q", random_embedding(rng, 8))
        with pytest.raises(ValueError, match="does not match bank dim"):
            context_retrieve(query, bank.snapshot(), k=1, context_thresh=0.0)

    def test_exact_tie_breaks_on_ascending_id(self):
        manifest = Manifest(dim=4, classes=("a",))
        bank = MemoryBank(manifest)
        emb = [1.0, 2.0, 3.0, 4.0]
        for image_id in ("zz", "aa", "mm"):
            bank.add_image(ImageRecord(image_id, emb))
        query = ImageRecord("q", emb)
        got = context_retrieve(query, bank.snapshot(), k=3, context_thresh=0.5)
        assert [m.image_id for m in got] == ["aa", "mm", "zz"]


def _proposal(rng, image_id="q", embedding=None, score=0.7, dim=16):
    if embedding is None:
        embedding = random_embedding(rng, dim)
    return Proposal(image_id, BBox(0, 0, 10, 10), score, embedding)


class TestInstanceRetrieve:
    def test_empty_allowed_set(self, rng):
        bank = make_bank(rng, n_images=4, n_instances=10, dim=16)
        assert instance_retrieve(_proposal(rng), bank.snapshot(), set(), 5, -1.0) == []

    def test_identical_embedding_hits_first(self, rng):
        bank = make_bank(rng, n_images=4, n_instances=10, dim=16)
        snap = bank.snapshot()
        target = snap.instances[snap.instance_ids[3]]
        got = instance_retrieve(
            _proposal(rng, embedding=target.embedding),
            snap,
            {target.image_id},
            n=1,
            instance_thresh=0.8,
        )
        assert got[0].instance_id == target.instance_id
        assert got[0].similarity == pytest.approx(1.0, abs=1e-6)

    def test_disallowed_image_excludes_higher_similarity(self, rng):
        manifest = Manifest(dim=4, classes=("a",))
        bank = MemoryBank(manifest)
        bank.add_image(ImageRecord("allowed", random_embedding(rng, 4)))
        bank.add_image(ImageRecord("blocked", random_embedding(rng, 4)))
        label = manifest.label_for("a")
        box = BBox(0, 0, 5, 5)
        query_emb = np.array([1.0, 0.0, 0.0, 0.0])
        # perfect match lives in the blocked image, weaker one in the allowed
        bank.add_instance(InstanceRecord("perfect", "blocked", box, label, query_emb))
        bank.add_instance(InstanceRecord("weaker", "allowed", box, label, [1.0, 0.4, 0.0, 0.0]))
        snap = bank.snapshot()
        got = instance_retrieve(
            _proposal(rng, embedding=query_emb, dim=4), snap, {"allowed"}, n=5, instance_thresh=0.0
        )
        assert [m.instance_id for m in got] == ["weaker"]
        # oracle set difference: unconstrained search sees both, constrained drops 'perfect'
        unconstrained = instance_retrieve(
            _proposal(rng, embedding=query_emb, dim=4),
            snap,
            {"allowed", "blocked"},
            n=5,
            instance_thresh=0.0,
        )
        assert [m.instance_id for m in unconstrained] == ["perfect", "weaker"]

    def test_matches_full_sort_oracle(self):
        rng = np.random.default_rng(77)
        bank = make_bank(rng, n_images=60, n_instances=800, dim=32)
        snap = bank.snapshot()
        allowed = set(list(snap.image_ids)[:30])
        candidates = {
            iid: snap.instances[iid].embedding
            for iid in snap.instance_ids
            if snap.instances[iid].image_id in allowed
        }
        for q in range(15):
            prop = _proposal(rng, dim=32)
            got = instance_retrieve(prop, snap, allowed, n=20, instance_thresh=0.05)
            expected = full_sort_retrieve(prop.embedding, candidates, 0.05, 20)
            assert [(m.instance_id, round(m.similarity, 9)) for m in got] == [
                (i, round(s, 9)) for i, s in expected
            ]

    def test_unknown_allowed_image_rejected(self, rng):
        bank = make_bank(rng, n_images=3, n_instances=6, dim=16)
        with pytest.raises(ValueError, match="not in bank"):
            instance_retrieve(_proposal(rng), bank.snapshot(), {"ghost"}, 1, 0.0)


def _match(instance_id, label_id, sim):
    return InstanceMatch(instance_id, ClassLabel(label_id, f"c{label_id}"), sim)


class TestVote:
    def test_single_match_top1(self):
        label, top = vote([_match("i1", 3, 0.91)])
        assert label.id == 3
        assert top.instance_id == "i1"

    def test_plurality_beats_similarity(self):
        matches = [
            _match("b", 1, 0.95),
            _match("a1", 0, 0.90),
            _match("a2", 0, 0.85),
        ]
        label, top = vote(matches)
        assert label.id == 0
        assert top.instance_id == "a1"

    def test_count_tie_goes_to_highest_similarity(self):
        matches = [_match("b", 1, 0.95), _match("a", 0, 0.90)]
        label, top = vote(matches)
        assert label.id == 1
        assert top.instance_id == "b"

    def test_empty_matches(self):
        with pytest.raises(ValueError, match="at least one"):
            vote([])


class TestFuseScore:
    def test_open_set_weights(self):
        assert fuse_score(0.5, 0.9, 0.2, 0.8) == pytest.approx(0.82, abs=1e-9)

    def test_even_weights(self):
        assert fuse_score(0.6, 0.8, 0.5, 0.5) == pytest.approx(0.70, abs=1e-9)

    def test_identity_when_w2_zero(self):
        assert fuse_score(0.375, 0.99, 1.0, 0.0) == 0.375

    def test_negative_cosine_floored(self):
        assert fuse_score(0.5, -0.7, 0.5, 0.5) == 0.25

    def test_bounds(self, rng):
        for _ in range(500):
            p = float(rng.uniform(0, 1))
            c = float(rng.uniform(-1, 1))
            assert 0.0 <= fuse_score(p, c, 0.3, 0.7) <= 1.0

    def test_weight_sum_violation(self):
        with pytest.raises(ValueError, match="w1 \\+ w2"):
            fuse_score(0.5, 0.5, 0.7, 0.7)


def _single_class_bank(rng, dim=16):
    manifest = Manifest(dim=dim, classes=("only",))
    bank = MemoryBank(manifest)
    seed_emb = random_embedding(rng, dim)
    img_emb = random_embedding(rng, dim)
    bank.add_image(ImageRecord("bank-img", img_emb))
    bank.add_instance(
        InstanceRecord("seed", "bank-img", BBox(0, 0, 9, 9), manifest.label_for("only"), seed_emb)
    )
    return bank, img_emb, seed_emb


class TestClassifyProposals:
    def test_empty_context_means_no_detections(self, rng):
        bank, img_emb, seed_emb = _single_class_bank(rng)
        query = ImageRecord("q", -np.asarray(img_emb))  # anti-correlated context
        props = [_proposal(rng, image_id="q", embedding=seed_emb)]
        out = classify_proposals(query, props, bank.snapshot(), RacParams(context_thresh=0.99))
        assert out == []

    def test_proposal_equal_to_seed_instance(self, rng):
        bank, img_emb, seed_emb = _single_class_bank(rng)
        query = ImageRecord("q", img_emb)
        prop = _proposal(rng, image_id="q", embedding=seed_emb, score=0.6)
        params = RacParams(k=50, n=1, context_thresh=0.1, instance_thresh=0.8, w1=0.5, w2=0.5)
        out = classify_proposals(query, [prop], bank.snapshot(), params)
        assert len(out) == 1
        det = out[0]
        assert det.label.name == "only"
        assert det.match_instance_id == "seed"
        # fused score composes the stage results: w1*score + w2*1.0
        assert det.score == pytest.approx(0.5 * 0.6 + 0.5 * 1.0, abs=1e-6)
        assert det.context_image_ids == ("bank-img",)

    def test_proposal_image_mismatch(self, rng):
        bank, img_emb, seed_emb = _single_class_bank(rng)
        query = ImageRecord("q", img_emb)
        stray = _proposal(rng, image_id="other", embedding=seed_emb)
        with pytest.raises(ValueError, match="does not match query"):
            classify_proposals(query, [stray], bank.snapshot(), RacParams())

    def test_output_sorted_by_fused_score_then_input_order(self, rng):
        bank = make_bank(rng, n_images=10, n_instances=50, dim=16)
        snap = bank.snapshot()
        query = ImageRecord("q", snap.images[snap.image_ids[0]].embedding)
        props = [
            _proposal(rng, image_id="q", embedding=snap.instances[iid].embedding, score=s)
            for iid, s in zip(snap.instance_ids[:6], (0.3, 0.9, 0.5, 0.9, 0.1, 0.7))
        ]
        out = classify_proposals(
            query, props, snap, RacParams(context_thresh=-1.0, instance_thresh=0.5)
        )
        scores = [d.score for d in out]
        assert scores == sorted(scores, reverse=True)

    def test_threshold_monotonicity_randomized(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            bank = make_bank(rng, n_images=15, n_instances=80, dim=16)
            snap = bank.snapshot()
            query = ImageRecord("q", random_embedding(rng, 16))
            props = [_proposal(rng, image_id="q") for _ in range(12)]
            surviving = {}
            for thresh in (0.5, 0.8, 0.9):
                params = RacParams(
                    k=5, n=3, context_thresh=-1.0, instance_thresh=thresh, w1=0.5, w2=0.5
                )
                dets = classify_proposals(query, props, snap, params)
                surviving[thresh] = {d.bbox.as_tuple() + (d.score,) for d in dets}
            # looser thresholds produce supersets of proposals; compare by identity
            keys = {}
            for thresh in (0.5, 0.8, 0.9):
                params = RacParams(
                    k=5, n=3, context_thresh=-1.0, instance_thresh=thresh, w1=0.5, w2=0.5
                )
                dets = classify_proposals(query, props, snap, params)
                keys[thresh] = {id(p) for p in props if any(d.bbox == p.bbox for d in dets)}
            assert keys[0.9] <= keys[0.8] <= keys[0.5]

    def test_constraint_soundness(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            bank = make_bank(rng, n_images=20, n_instances=100, dim=16)
            snap = bank.snapshot()
            query = ImageRecord("q", random_embedding(rng, 16))
            props = [_proposal(rng, image_id="q") for _ in range(10)]
            params = RacParams(k=4, n=2, context_thresh=-1.0, instance_thresh=0.2)
            for det in classify_proposals(query, props, snap, params):
                owner = snap.instances[det.match_instance_id].image_id
                assert owner in det.context_image_ids

    def test_byte_for_byte_determinism(self):
        rng = np.random.default_rng(12)
        bank = make_bank(rng, n_images=25, n_instances=120, dim=16)
        snap = bank.snapshot()
        query = ImageRecord("q", random_embedding(rng, 16))
        props = [_proposal(rng, image_id="q") for _ in range(15)]
        params = RacParams(k=10, n=3, context_thresh=-0.5, instance_thresh=0.1)

        def run():
            dets = classify_proposals(query, props, snap, params)
            return json.dumps(
                [
                    [d.image_id, d.bbox.as_tuple(), d.label.id, d.score, d.match_instance_id]
                    for d in dets
                ]
            ).encode()

        assert run() == run()

    def test_n1_reduces_to_argmax_by_similarity(self):
        rng = np.random.default_rng(21)
        bank = make_bank(rng, n_images=10, n_instances=60, dim=16)
        snap = bank.snapshot()
        allowed = set(snap.image_ids)
        for _ in range(25):
            prop = _proposal(rng, dim=16)
            top1 = instance_retrieve(prop, snap, allowed, n=1, instance_thresh=-1.0)
            full = instance_retrieve(prop, snap, allowed, n=len(snap.instance_ids), instance_thresh=-1.0)
            label, top = vote(top1)
            assert top.instance_id == full[0].instance_id
            assert label == full[0].label


class TestClassifyDataset:
    def test_unknown_proposal_image_listed(self, rng):
        bank, img_emb, seed_emb = _single_class_bank(rng)
        queries = [ImageRecord("q", img_emb)]
        props = [_proposal(rng, image_id="mystery", embedding=seed_emb)]
        with pytest.raises(ValueError, match="mystery"):
            classify_dataset(queries, props, bank.snapshot(), RacParams())

    def test_groups_by_image(self, rng):
        bank, img_emb, seed_emb = _single_class_bank(rng)
        queries = [ImageRecord("q1", img_emb), ImageRecord("q2", img_emb)]
        props = [
            _proposal(rng, image_id="q2", embedding=seed_emb),
            _proposal(rng, image_id="q1", embedding=seed_emb),
        ]
        dets = classify_dataset(queries, props, bank.snapshot(), RacParams())
        assert [d.image_id for d in dets] == ["q1", "q2"]
