"""Reference generation, task embedding, and embedded distances."""

import numpy as np
import pytest

from wte.dataset import class_stats
from wte.embedding import (
    ReferenceDistribution,
    TaskEmbedding,
    embed_task,
    load_embedding,
    load_reference,
    make_reference,
    pairwise_distances,
    save_embedding,
    save_reference,
    wte_distance,
)
from wte.errors import (
    DimensionMismatchError,
    IncompatibleEmbeddingError,
    PersistenceError,
)
from wte.labels import AugmentedTask, augment, build_atlas
from wte.ot import DiscreteMeasure, count_solves, wasserstein2
from wte.synth import similarity_task_family


def _random_pair(rng, n, ambient):
    """A random augmented task plus an equal-size user-supplied reference."""
    task = AugmentedTask("t", rng.standard_normal((n, ambient)), ambient - 1, 1)
    ref = ReferenceDistribution(rng.standard_normal((n, ambient)), seed=0, provenance="user-supplied")
    return task, ref


class TestMakeReference:
    def test_deterministic_for_fixed_seed(self):
        a = make_reference(16, 9, 3, seed=5, image_side=3)
        b = make_reference(16, 9, 3, seed=5, image_side=3)
        np.testing.assert_array_equal(a.points, b.points)
        assert a.content_hash == b.content_hash
        c = make_reference(16, 9, 3, seed=6, image_side=3)
        assert c.content_hash != a.content_hash

    def test_single_point_reference(self):
        ref = make_reference(1, 4, 2, seed=0)
        assert ref.points.shape == (1, 6)
        rng = np.random.default_rng(1)
        task = AugmentedTask("t", rng.standard_normal((5, 6)), 4, 2)
        emb = embed_task(task, ref)
        assert emb.vector.shape == (1, 6)

    def test_smooth_image_has_lower_total_variation_than_iid(self):
        side = 28
        ref = make_reference(6, side * side, 0, seed=3, image_side=side)
        imgs = ref.points.reshape(6, side, side)
        rng = np.random.default_rng(3)
        iid = rng.random((6, side, side))

        def tv_per_std(stack):
            tv = np.abs(np.diff(stack, axis=1)).mean() + np.abs(np.diff(stack, axis=2)).mean()
            return tv / stack.std()

        assert tv_per_std(imgs) < 0.5 * tv_per_std(iid)

    def test_image_mode_requires_square_dimension(self):
        with pytest.raises(ValueError, match="side"):
            make_reference(4, 10, 1, seed=0, image_side=3)

    def test_feature_range_respected(self):
        ref = make_reference(32, 5, 0, seed=4, feature_range=(-2.0, 6.0))
        assert ref.points.min() >= -2.0 and ref.points.max() <= 6.0
        assert ref.points.max() > 4.0  # actually fills the range

    def test_label_part_zero_by_default(self):
        ref = make_reference(8, 3, 4, seed=5)
        np.testing.assert_array_equal(ref.points[:, 3:], np.zeros((8, 4)))

    def test_label_box_option(self):
        lows, highs = np.array([-1.0, 0.0]), np.array([0.0, 2.0])
        ref = make_reference(64, 3, 2, seed=6, label_box=(lows, highs))
        lab = ref.points[:, 3:]
        assert np.all(lab >= lows) and np.all(lab <= highs)
        assert lab.std() > 0.0

    def test_provenances(self):
        assert make_reference(4, 4, 1, seed=0, image_side=2).provenance == "smooth-image"
        assert make_reference(4, 4, 1, seed=0).provenance == "uniform-box"


class TestEmbedTask:
    def test_reference_embeds_to_exact_zero(self):
        rng = np.random.default_rng(7)
        ref = ReferenceDistribution(rng.standard_normal((20, 5)), seed=0, provenance="user-supplied")
        task = AugmentedTask("self", ref.points.copy(), 4, 1)
        emb = embed_task(task, ref)
        assert np.all(emb.vector == 0.0)
        assert emb.ot_cost == 0.0

    def test_norm_equals_wasserstein_for_equal_sizes(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(5, 30))
            ambient = int(rng.integers(2, 6))
            task, ref = _random_pair(rng, n, ambient)
            emb = embed_task(task, ref)
            w2 = wasserstein2(DiscreteMeasure(task.points), DiscreteMeasure(ref.points))
            assert emb.norm == pytest.approx(w2, abs=1e-7)

    def test_translation_gives_constant_displacement(self):
        rng = np.random.default_rng(9)
        ref = ReferenceDistribution(rng.standard_normal((15, 4)), seed=0, provenance="user-supplied")
        v = np.array([2.0, -1.0, 0.5, 3.0])
        task = AugmentedTask("shift", ref.points + v, 3, 1)
        emb = embed_task(task, ref)
        rows = emb.vector * np.sqrt(15)
        np.testing.assert_allclose(rows, np.tile(v, (15, 1)), atol=1e-9)
        assert emb.norm == pytest.approx(float(np.linalg.norm(v)), abs=1e-9)

    def test_one_solve_per_task(self):
        rng = np.random.default_rng(10)
        task, ref = _random_pair(rng, 12, 3)
        with count_solves() as tally:
            embed_task(task, ref)
        assert tally.count == 1

    def test_dimension_mismatch(self):
        rng = np.random.default_rng(11)
        task, _ = _random_pair(rng, 6, 3)
        ref = ReferenceDistribution(rng.standard_normal((6, 4)), seed=0, provenance="user-supplied")
        with pytest.raises(DimensionMismatchError):
            embed_task(task, ref)


class TestWteDistance:
    def test_identity_and_reference_norm(self):
        rng = np.random.default_rng(12)
        task, ref = _random_pair(rng, 10, 3)
        emb = embed_task(task, ref)
        zero = TaskEmbedding("ref", np.zeros_like(emb.vector), ref.content_hash, 0.0)
        assert wte_distance(emb, emb) == 0.0
        assert wte_distance(emb, zero) == pytest.approx(emb.norm, abs=1e-12)

    def test_reference_mismatch_rejected(self):
        rng = np.random.default_rng(13)
        a = TaskEmbedding("a", rng.standard_normal((4, 2)), "hash-one", 0.0)
        b = TaskEmbedding("b", rng.standard_normal((4, 2)), "hash-two", 0.0)
        with pytest.raises(IncompatibleEmbeddingError):
            wte_distance(a, b)

    def test_tracks_direct_wasserstein_on_similar_tasks(self):
        tasks = similarity_task_family(2, seed=21, jitter=0.02, shift_max=3.0)
        stats = [s for t in tasks for s in class_stats(t)]
        atlas = build_atlas(stats, 4)
        augs = [augment(t, atlas) for t in tasks]
        lo = min(t.samples.min() for t in tasks)
        hi = max(t.samples.max() for t in tasks)
        ref = make_reference(augs[0].points.shape[0], tasks[0].dim, atlas.l, seed=2, feature_range=(lo, hi))
        embs = [embed_task(a, ref) for a in augs]
        direct = wasserstein2(DiscreteMeasure(augs[0].points), DiscreteMeasure(augs[1].points))
        assert wte_distance(embs[0], embs[1]) == pytest.approx(direct, rel=0.10)

    def test_approximation_error_small_for_similarity_families(self):
        tasks = similarity_task_family(8, seed=22, jitter=0.02)
        stats = [s for t in tasks for s in class_stats(t)]
        atlas = build_atlas(stats, 8)
        augs = [augment(t, atlas) for t in tasks]
        lo = min(t.samples.min() for t in tasks)
        hi = max(t.samples.max() for t in tasks)
        ref = make_reference(augs[0].points.shape[0], tasks[0].dim, atlas.l, seed=3, feature_range=(lo, hi))
        embs = [embed_task(a, ref) for a in augs]
        errors = []
        for i in range(len(tasks)):
            for j in range(i + 1, len(tasks)):
                approx = wte_distance(embs[i], embs[j])
                exact = wasserstein2(DiscreteMeasure(augs[i].points), DiscreteMeasure(augs[j].points))
                errors.append(abs(approx - exact) / exact)
        assert float(np.percentile(errors, 90)) <= 0.15


class TestPairwiseDistances:
    def _embeddings(self, k, seed=14):
        rng = np.random.default_rng(seed)
        return [TaskEmbedding(f"e{i}", rng.standard_normal((6, 3)), "shared", 0.0) for i in range(k)]

    def test_single_embedding(self):
        np.testing.assert_array_equal(pairwise_distances(self._embeddings(1)), [[0.0]])

    def test_duplicate_embedding_zero_off_diagonal(self):
        embs = self._embeddings(3)
        embs.append(TaskEmbedding("dup", embs[0].vector.copy(), "shared", 0.0))
        d = pairwise_distances(embs)
        assert d[0, 3] == 0.0

    def test_triangle_inequality_exact(self):
        embs = self._embeddings(6)
        d = pairwise_distances(embs)
        for i in range(6):
            for j in range(6):
                for k in range(6):
                    assert d[i, j] <= d[i, k] + d[k, j] + 1e-12

    def test_squared_flag(self):
        embs = self._embeddings(3)
        np.testing.assert_allclose(pairwise_distances(embs, squared=True), pairwise_distances(embs) ** 2)

    def test_no_solves(self):
        embs = self._embeddings(5)
        with count_solves() as tally:
            pairwise_distances(embs)
        assert tally.count == 0

    def test_mixed_references_rejected(self):
        embs = self._embeddings(2)
        embs[1].reference_hash = "other"
        with pytest.raises(IncompatibleEmbeddingError):
            pairwise_distances(embs)


class TestPersistence:
    def test_embedding_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(15)
        task, ref = _random_pair(rng, 9, 4)
        emb = embed_task(task, ref)
        p1, p2 = tmp_path / "a.wtev", tmp_path / "b.wtev"
        save_embedding(emb, p1)
        loaded = load_embedding(p1)
        save_embedding(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        np.testing.assert_array_equal(loaded.vector, emb.vector)
        assert loaded.reference_hash == emb.reference_hash
        assert loaded.ot_cost == emb.ot_cost
        assert loaded.dataset_id == emb.dataset_id

    def test_reference_round_trip_bit_exact(self, tmp_path):
        ref = make_reference(12, 4, 2, seed=16, image_side=2)
        p1, p2 = tmp_path / "a.wter", tmp_path / "b.wter"
        save_reference(ref, p1)
        loaded = load_reference(p1)
        save_reference(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()
        assert loaded.content_hash == ref.content_hash
        assert loaded.provenance == ref.provenance
        assert loaded.seed == ref.seed

    def test_bad_magic_rejected(self, tmp_path):
        p = tmp_path / "x.wtev"
        p.write_bytes(b"ABCD" + bytes(32))
        with pytest.raises(PersistenceError):
            load_embedding(p)
        with pytest.raises(PersistenceError):
            load_reference(p)

    def test_hash_integrity_enforced(self):
        rng = np.random.default_rng(17)
        pts = rng.standard_normal((4, 3))
        with pytest.raises(ValueError, match="hash"):
            ReferenceDistribution(pts, seed=0, provenance="user-supplied", content_hash="bogus")
