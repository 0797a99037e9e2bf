import numpy as np
import pytest

from comotion.data import (
    SURROUNDING_ORDER,
    TRAVELING_FIXED_ORDER,
    TRAVELING_ORDER,
    FeatureMap,
    JointTraversal,
    SkeletonSequence,
    append_state,
    build_feature_map,
    builtin_traversal,
    joint_rows,
    load_csv,
    save_csv,
    synth_generate,
    synth_params,
)
from comotion.errors import ConfigError, DataError, ShapeError

from oracles import pearson


def make_seq(frames, joints=2):
    return SkeletonSequence(np.asarray(frames, dtype=float), joints)


class TestSkeletonSequence:
    def test_rejects_wrong_width(self):
        with pytest.raises(ShapeError):
            SkeletonSequence(np.zeros((3, 5)), 2)

    def test_rejects_zero_joints(self):
        with pytest.raises(DataError):
            SkeletonSequence(np.zeros((3, 0)), 0)

    def test_rejects_non_finite(self):
        frames = np.zeros((2, 6))
        frames[1, 3] = np.nan
        with pytest.raises(DataError):
            SkeletonSequence(frames, 2)

    def test_frames_are_read_only(self):
        seq = make_seq(np.zeros((2, 6)))
        with pytest.raises(ValueError):
            seq.frames[0, 0] = 1.0


class TestFeatureMap:
    def test_single_frame(self):
        seq = make_seq([[1, 2, 3, 4, 5, 6]])
        f = build_feature_map(seq)
        assert f.matrix.shape == (6, 1)
        np.testing.assert_array_equal(f.matrix[:, 0], seq.frames[0])

    def test_columns_are_frames(self, rng):
        frames = rng.uniform(-1, 1, (3, 6))
        f = build_feature_map(make_seq(frames))
        np.testing.assert_array_equal(f.matrix[:, 1], frames[1])
        assert f.column_times == (1, 2, 3)

    def test_round_trip_is_bitwise(self, rng):
        frames = rng.uniform(-1, 1, (4, 6))
        f = build_feature_map(make_seq(frames))
        for j in range(4):
            assert (f.matrix[:, j] == frames[j]).all()

    def test_window_selection(self, rng):
        frames = rng.uniform(-1, 1, (5, 6))
        f = build_feature_map(make_seq(frames), window=(2, 4))
        assert f.matrix.shape == (6, 3)
        assert f.column_times == (2, 3, 4)
        np.testing.assert_array_equal(f.matrix[:, 0], frames[1])

    def test_empty_window_rejected(self):
        seq = make_seq(np.zeros((3, 6)))
        with pytest.raises(DataError):
            build_feature_map(seq, window=(3, 2))
        with pytest.raises(DataError):
            build_feature_map(seq, window=(1, 9))

    def test_append_state(self, rng):
        f = build_feature_map(make_seq(rng.uniform(-1, 1, (3, 6))))
        h = rng.uniform(-1, 1, 6)
        g = append_state(f, h)
        assert g.matrix.shape == (6, 4)
        assert (g.matrix[:, -1] == h).all()
        assert g.column_times == (1, 2, 3, "t'")

    def test_append_zero_vector(self):
        f = build_feature_map(make_seq(np.ones((2, 6))))
        g = append_state(f, np.zeros(6))
        np.testing.assert_array_equal(g.matrix[:, -1], np.zeros(6))

    def test_append_length_mismatch(self):
        f = build_feature_map(make_seq(np.ones((2, 6))))
        with pytest.raises(ShapeError):
            append_state(f, np.zeros(5))

    def test_joint_rows(self, rng):
        frames = rng.uniform(-1, 1, (4, 9))
        f = build_feature_map(SkeletonSequence(frames, 3))
        np.testing.assert_array_equal(joint_rows(f, 1), f.matrix[0:3])
        np.testing.assert_array_equal(joint_rows(f, 3), f.matrix[6:9])
        stacked = np.vstack([joint_rows(f, k) for k in (1, 2, 3)])
        np.testing.assert_array_equal(stacked, f.matrix)
        with pytest.raises(DataError):
            joint_rows(f, 4)


class TestTraversals:
    def test_traveling_verbatim(self):
        t = builtin_traversal("traveling")
        assert len(t.order) == 33
        assert t.order[:4] == (9, 8, 1, 2)
        assert t.order == TRAVELING_ORDER
        # The published order repeats 15 back to back; kept as printed.
        assert t.order[21:23] == (15, 15)

    def test_surrounding_verbatim(self):
        t = builtin_traversal("surrounding")
        assert len(t.order) == 33
        assert t.order[:4] == (9, 15, 16, 17)
        assert t.order == SURROUNDING_ORDER

    def test_both_cover_all_joints(self):
        for name in ("traveling", "surrounding"):
            t = builtin_traversal(name)
            assert set(t.order) == set(range(1, 18))

    def test_fixed_variant_repairs_duplicate(self):
        t = builtin_traversal("traveling_fixed")
        assert t.name == "custom"
        assert t.order[21:26] == (15, 16, 17, 16, 15)
        assert len(t.order) == 33
        assert TRAVELING_FIXED_ORDER[:21] == TRAVELING_ORDER[:21]

    def test_id_any_size(self):
        assert builtin_traversal("id", 4).order == (1, 2, 3, 4)

    def test_named_orders_require_17_joints(self):
        with pytest.raises(ConfigError):
            builtin_traversal("traveling", 4)

    def test_traversal_validation(self):
        with pytest.raises(DataError):
            JointTraversal("custom", (1, 2, 5), 4)  # out of range
        with pytest.raises(DataError):
            JointTraversal("custom", (1, 2, 3), 4)  # joint 4 never visited


class TestCsv:
    def test_round_trip(self, tmp_path, rng):
        seq = SkeletonSequence(rng.uniform(-np.pi, np.pi, (5, 9)), 3)
        path = tmp_path / "seq.csv"
        save_csv(seq, path)
        again = load_csv(path)
        assert again.joint_count == 3
        np.testing.assert_array_equal(again.frames, seq.frames)

    def test_two_line_file(self, tmp_path):
        path = tmp_path / "two.csv"
        path.write_text("1,2,3,4,5,6\n7,8,9,10,11,12\n")
        seq = load_csv(path)
        assert seq.joint_count == 2 and len(seq) == 2

    def test_joint_selection_keeps_columns(self, tmp_path):
        path = tmp_path / "sel.csv"
        path.write_text(",".join(str(i) for i in range(1, 10)) + "\n")
        seq = load_csv(path, joint_selection=[2])
        assert seq.joint_count == 1
        np.testing.assert_array_equal(seq.frames[0], [4, 5, 6])

    def test_joint_selection_two_joints(self, tmp_path):
        path = tmp_path / "sel.csv"
        path.write_text(",".join(str(i) for i in range(1, 10)) + "\n")
        seq = load_csv(path, joint_selection=[2, 3])
        np.testing.assert_array_equal(seq.frames[0], [4, 5, 6, 7, 8, 9])

    def test_selection_out_of_range(self, tmp_path):
        path = tmp_path / "sel.csv"
        path.write_text("1,2,3,4,5,6\n")
        with pytest.raises(DataError, match="out of range"):
            load_csv(path, joint_selection=[3])

    def test_malformed_cell_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1,2,3,4,5,6\n1,2,3,4,5,6\n1,2,abc,4,5,6\n")
        with pytest.raises(DataError, match="line 3"):
            load_csv(path)

    def test_ragged_rows_rejected(self, tmp_path):
        path = tmp_path / "ragged.csv"
        path.write_text("1,2,3,4,5,6\n1,2,3\n")
        with pytest.raises(DataError, match="line 2"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError):
            load_csv(tmp_path / "nope.csv")


class TestSynth:
    def test_same_seed_bitwise_identical(self):
        a = synth_generate("sinusoid", 4, 50, seed=9)
        b = synth_generate("sinusoid", 4, 50, seed=9)
        assert (a.frames == b.frames).all()
        c = synth_generate("walk_like", 4, 50, seed=9)
        d = synth_generate("walk_like", 4, 50, seed=9)
        assert (c.frames == d.frames).all()

    def test_sinusoid_period(self):
        params = synth_params("sinusoid", 3, seed=5)
        period = int(params.period_frames[0])
        seq = synth_generate("sinusoid", 3, 3 * period + 4, seed=5)
        np.testing.assert_allclose(
            seq.frames[: period, 0], seq.frames[period: 2 * period, 0], atol=1e-9
        )

    def test_walk_like_antiphase_pairs(self):
        seq = synth_generate("walk_like", 4, 200, seed=3)
        for k in (0, 1):  # joints 1,2 pair with 3,4
            x = seq.frames[:, 3 * k].tolist()
            y = seq.frames[:, 3 * (k + 2)].tolist()
            assert pearson(x, y) <= -0.9

    def test_invalid_sizes(self):
        with pytest.raises(ConfigError):
            synth_generate("sinusoid", 4, 3, seed=0)
        with pytest.raises(ConfigError):
            synth_generate("sinusoid", 1, 30, seed=0)
        with pytest.raises(ConfigError):
            synth_generate("noise", 4, 30, seed=0)
