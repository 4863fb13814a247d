"""Tests for the loss, the training configuration and the epoch loop."""
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from pydantic import ValidationError

from mumkit.data.skeleton import SkeletonSpec
from mumkit.data.types import DatasetSplit
from mumkit.errors import ConfigurationError, NumericError
from mumkit.mixing import MixSpec
from mumkit.model import PoseNet, PoseNetConfig
from mumkit.teacher import TeacherMode, init_from_student
from mumkit.tensorgrid import FeatureBatch
from mumkit.training.config import AugmentMode, TrainConfig
from mumkit.training.loss import (
    LabeledBatch,
    UnlabeledBatch,
    heatmap_loss,
    strong_images,
    student_spec,
    total_loss,
    unsupervised_term,
)
from mumkit.training.trainer import (
    Stream,
    epoch_rng,
    init_train_state,
    labeled_batch,
    steps_per_epoch,
    teacher_gap,
    train_epoch,
    unlabeled_batch,
)
from tests.conftest import TINY_TRAIN

MODEL = PoseNetConfig()
MIX = MixSpec()


def _batches(split: DatasetSplit, cfg: TrainConfig) -> tuple[LabeledBatch, UnlabeledBatch]:
    rng = np.random.default_rng(0)
    sup = labeled_batch(split.labeled[:4], cfg, rng, SkeletonSpec(), 2.0)
    unsup = unlabeled_batch(split.unlabeled[:4], cfg, rng)
    return sup, unsup


def _params_equal(a: PoseNet, b: PoseNet) -> None:
    for name, value in a.parameters().items():
        np.testing.assert_array_equal(value, b.parameters()[name])


class TestTrainConfig:
    """Test suite for training settings."""

    def test_lr_schedule(self) -> None:
        """The rate drops by exactly the decay factor at each milestone."""
        cfg = TrainConfig()
        assert cfg.lr_at(0) == cfg.lr_at(19) == 1e-3
        assert cfg.lr_at(20) == 1e-3 * 0.1
        assert cfg.lr_at(25) == 1e-3 * 0.1**2

    def test_milestones_increasing(self) -> None:
        """Decay milestones must increase."""
        with pytest.raises(ValidationError):
            TrainConfig(lr_decay_epochs=(25, 20))

    def test_milestones_inside_schedule(self) -> None:
        """A milestone at or beyond the last epoch is rejected."""
        with pytest.raises(ValidationError):
            TrainConfig(epochs=10, lr_decay_epochs=(5, 10))

    def test_no_decay(self) -> None:
        """An empty milestone tuple keeps the rate constant."""
        assert TrainConfig(lr_decay_epochs=()).lr_at(29) == 1e-3

    @pytest.mark.parametrize(
        "mode, unlabeled, mixes, cuts, features",
        [
            (AugmentMode.SUPERVISED_ONLY, False, False, False, False),
            (AugmentMode.AFFINE, True, False, False, False),
            (AugmentMode.JOINT_CUTOUT, True, False, True, False),
            (AugmentMode.MUM, True, True, False, False),
            (AugmentMode.POSE_MUM, True, True, False, True),
            (AugmentMode.MUM_JOINT_CUTOUT, True, True, True, False),
        ],
    )
    def test_mode_matrix(
        self, mode: AugmentMode, unlabeled: bool, mixes: bool, cuts: bool, features: bool
    ) -> None:
        """What each augmentation mode switches on."""
        assert (mode.uses_unlabeled, mode.mixes, mode.cuts_out, mode.feature_mixing) == (
            unlabeled,
            mixes,
            cuts,
            features,
        )

    def test_mum_is_pose_mum_without_feature_mixes(self) -> None:
        """MUM keeps the tile grid but zeroes the feature-mix probability."""
        assert student_spec(MIX, AugmentMode.MUM) == MIX.model_copy(update={"mix_prob": 0.0})
        assert student_spec(MIX, AugmentMode.POSE_MUM) is MIX


class TestLoss:
    """Test suite for the combined loss."""

    def test_heatmap_loss_masks_hidden_channels(self) -> None:
        """A hidden keypoint's channel adds neither loss nor gradient."""
        pred = FeatureBatch(np.zeros((1, 2, 4, 4)))
        target = FeatureBatch(np.ones((1, 2, 4, 4)))
        value, grad = heatmap_loss(pred, target, np.array([[True, False]]))
        assert value == pytest.approx(0.5)
        assert not grad.data[0, 1].any()

    def test_lambda_zero_is_supervised(self, tiny_split: DatasetSplit) -> None:
        """With lambda_u 0 the total equals the supervised term exactly."""
        cfg = TINY_TRAIN.model_copy(update={"lambda_u": 0.0})
        state = init_train_state(MODEL, cfg)
        sup, unsup = _batches(tiny_split, cfg)
        result = total_loss(sup, unsup, state.student, state.teacher, cfg, MIX, np.random.default_rng(1))
        assert result.total == result.supervised
        assert result.unsupervised > 0.0

    def test_gradients_are_additive(self, tiny_split: DatasetSplit) -> None:
        """Total gradients are supervised plus lambda_u times unsupervised."""
        cfg = TINY_TRAIN.model_copy(update={"lambda_u": 2.0})
        state = init_train_state(MODEL, cfg)
        twin = state.student.clone()
        sup, unsup = _batches(tiny_split, cfg)

        result = total_loss(sup, unsup, state.student, state.teacher, cfg, MIX, np.random.default_rng(4))

        pred, trace = twin.forward_train(sup.images)
        _, sup_grad = heatmap_loss(pred, sup.heatmaps, sup.visibility)
        sup_grads = twin.backward_student(trace, sup_grad)
        _, unsup_grads, sites = unsupervised_term(
            unsup, twin, state.teacher, cfg, MIX, np.random.default_rng(4)
        )
        assert sites == result.mask_sites
        for name, g in result.grads.items():
            np.testing.assert_array_equal(g, sup_grads[name] + 2.0 * unsup_grads[name])

    def test_teacher_untouched_by_loss(self, tiny_split: DatasetSplit) -> None:
        """Computing the loss never writes teacher parameters or statistics."""
        state = init_train_state(MODEL, TINY_TRAIN)
        before = state.teacher.network.state_dict()
        sup, unsup = _batches(tiny_split, TINY_TRAIN)
        result = total_loss(sup, unsup, state.student, state.teacher, TINY_TRAIN, MIX, np.random.default_rng(2))
        for name, value in state.teacher.network.state_dict().items():
            np.testing.assert_array_equal(value, before[name])
        assert set(result.grads) == set(state.student.parameters())

    def test_supervised_only_ignores_unlabeled(self, tiny_split: DatasetSplit) -> None:
        """SUPERVISED_ONLY reports a zero unsupervised term."""
        cfg = TINY_TRAIN.model_copy(update={"augment": AugmentMode.SUPERVISED_ONLY})
        state = init_train_state(MODEL, cfg)
        sup, unsup = _batches(tiny_split, cfg)
        result = total_loss(sup, unsup, state.student, state.teacher, cfg, MIX, np.random.default_rng(0))
        assert result.unsupervised == 0.0
        assert result.mask_sites == []

    def test_pose_mum_reports_mask_sites(self, tiny_split: DatasetSplit) -> None:
        """The image-level mix always comes first on the stack."""
        state = init_train_state(MODEL, TINY_TRAIN)
        sup, unsup = _batches(tiny_split, TINY_TRAIN)
        result = total_loss(sup, unsup, state.student, state.teacher, TINY_TRAIN, MIX, np.random.default_rng(0))
        assert result.mask_sites[0] == "input"

    @pytest.mark.parametrize("mode", [AugmentMode.AFFINE, AugmentMode.JOINT_CUTOUT, AugmentMode.POSE_MUM])
    def test_unlabeled_batch_must_be_whole_groups(self, tiny_split: DatasetSplit, mode: AugmentMode) -> None:
        """Every unlabeled mode rejects a batch that does not split into n_group images."""
        cfg = TINY_TRAIN.model_copy(update={"augment": mode})
        state = init_train_state(MODEL, cfg)
        sup, _ = _batches(tiny_split, cfg)
        unsup = unlabeled_batch(tiny_split.unlabeled[:3], cfg, np.random.default_rng(0))
        with pytest.raises(ConfigurationError, match="n_group=4"):
            total_loss(sup, unsup, state.student, state.teacher, cfg, MIX, np.random.default_rng(0))

    def test_single_teacher_same_view_frozen_bn(self, tiny_split: DatasetSplit) -> None:
        """A Single teacher and an eval-mode student on the same images agree exactly."""
        student = PoseNet(MODEL)
        teacher = init_from_student(student, TeacherMode.SINGLE)
        _, unsup = _batches(tiny_split, TINY_TRAIN)
        pseudo = teacher.network.forward_plain(unsup.weak)
        value, _ = heatmap_loss(student.forward_plain(unsup.weak), pseudo)
        assert value == 0.0

    def test_strong_cutout_centred_on_teacher_joints(self) -> None:
        """Cutout patches sit on the teacher's decoded keypoints."""
        cfg = TrainConfig(augment=AugmentMode.JOINT_CUTOUT, cutout_joints=8, cutout_size=9)
        pseudo = np.zeros((1, 8, 16, 12))
        pseudo[:, :, 8, 6] = 1.0
        weak = FeatureBatch(np.ones((1, 1, 64, 48)))
        strong = strong_images(weak, FeatureBatch(pseudo), cfg, np.random.default_rng(0), (64, 48))
        assert int((strong.data == 0.0).sum()) == 81
        assert strong.data[0, 0, 32, 24] == 0.0
        assert weak.data.min() == 1.0

    def test_affine_mode_keeps_weak_view(self) -> None:
        """Non-cutout modes hand the weak images through unchanged."""
        weak = FeatureBatch(np.ones((1, 1, 64, 48)))
        out = strong_images(weak, FeatureBatch(np.zeros((1, 8, 16, 12))), TrainConfig(), np.random.default_rng(0), (64, 48))
        assert out is weak


class TestTrainEpoch:
    """Test suite for the epoch loop."""

    def test_steps_per_epoch(self, tiny_split: DatasetSplit) -> None:
        """Unlabeled data sets the epoch length; labeled data when there is none."""
        assert steps_per_epoch(tiny_split, TINY_TRAIN, MIX) == 4
        no_unlabeled = DatasetSplit.create(tiny_split.labeled, [], tiny_split.val)
        assert steps_per_epoch(no_unlabeled, TINY_TRAIN, MIX) == 2

    def test_streams_are_independent(self) -> None:
        """Each purpose and epoch gets its own stream."""
        a = epoch_rng(0, 1, Stream.WEAK).random()
        assert a == epoch_rng(0, 1, Stream.WEAK).random()
        assert a != epoch_rng(0, 1, Stream.STRONG).random()
        assert a != epoch_rng(0, 2, Stream.WEAK).random()

    def test_counters_and_lr(self, tiny_split: DatasetSplit) -> None:
        """An epoch advances the counters and uses the scheduled rate."""
        state = init_train_state(MODEL, TINY_TRAIN)
        row = train_epoch(state, tiny_split, TINY_TRAIN, MIX)
        assert row.epoch == 0
        assert (state.epoch, state.global_step, state.optimizer.step) == (1, 4, 4)
        assert state.teacher.step == 4
        train_epoch(state, tiny_split, TINY_TRAIN, MIX)
        assert state.optimizer.lr == TINY_TRAIN.lr * 0.1

    def test_deterministic(self, tiny_split: DatasetSplit) -> None:
        """Two runs with the same seed are bit-identical."""
        a, b = init_train_state(MODEL, TINY_TRAIN), init_train_state(MODEL, TINY_TRAIN)
        row_a = train_epoch(a, tiny_split, TINY_TRAIN, MIX)
        row_b = train_epoch(b, tiny_split, TINY_TRAIN, MIX)
        assert row_a == row_b
        _params_equal(a.student, b.student)
        _params_equal(a.teacher.network, b.teacher.network)

    def test_lambda_zero_matches_supervised_only(self, tiny_split: DatasetSplit) -> None:
        """lambda_u 0 trains the same student weights as SUPERVISED_ONLY."""
        zero = TINY_TRAIN.model_copy(update={"lambda_u": 0.0})
        sup_only = TINY_TRAIN.model_copy(update={"augment": AugmentMode.SUPERVISED_ONLY})
        a, b = init_train_state(MODEL, zero), init_train_state(MODEL, sup_only)
        row_a = train_epoch(a, tiny_split, zero, MIX)
        row_b = train_epoch(b, tiny_split, sup_only, MIX)
        _params_equal(a.student, b.student)
        assert row_a.loss_sup == row_b.loss_sup

    def test_unlabeled_labels_never_read(self, tiny_split: DatasetSplit) -> None:
        """Poisoning the unlabeled ground truth changes nothing."""
        poisoned = [
            replace(s, keypoints=np.full_like(s.keypoints, np.nan), heatmaps=np.full_like(s.heatmaps, np.nan))
            for s in tiny_split.unlabeled_with_labels()
        ]
        dirty = DatasetSplit.create(tiny_split.labeled, poisoned, tiny_split.val)
        a, b = init_train_state(MODEL, TINY_TRAIN), init_train_state(MODEL, TINY_TRAIN)
        assert train_epoch(a, tiny_split, TINY_TRAIN, MIX) == train_epoch(b, dirty, TINY_TRAIN, MIX)

    @pytest.mark.parametrize(
        "mode",
        [AugmentMode.AFFINE, AugmentMode.JOINT_CUTOUT, AugmentMode.MUM, AugmentMode.MUM_JOINT_CUTOUT],
    )
    def test_every_mode_trains(self, tiny_split: DatasetSplit, mode: AugmentMode) -> None:
        """Each strong branch produces finite losses."""
        cfg = TINY_TRAIN.model_copy(update={"augment": mode})
        row = train_epoch(init_train_state(MODEL, cfg), tiny_split, cfg, MIX)
        assert np.isfinite([row.loss_sup, row.loss_unsup, row.loss_total]).all()
        assert row.loss_unsup > 0.0

    def test_non_finite_loss_dumps_batch(self, tiny_split: DatasetSplit, tmp_path: Path) -> None:
        """A NaN input stops training and leaves the batch on disk."""
        broken = [replace(s, image=np.full_like(s.image, np.nan)) for s in tiny_split.labeled]
        split = DatasetSplit.create(broken, tiny_split.unlabeled_with_labels(), tiny_split.val)
        state = init_train_state(MODEL, TINY_TRAIN)
        with pytest.raises(NumericError) as info:
            train_epoch(state, split, TINY_TRAIN, MIX, dump_dir=tmp_path)
        assert info.value.dump_path == str(tmp_path / "nan_dump.npz")
        with np.load(tmp_path / "nan_dump.npz") as dump:
            assert int(dump["step"]) == 0
            assert np.isnan(dump["labeled_images"]).any()

    def test_non_finite_input_leaves_weights_untouched(self, tiny_split: DatasetSplit) -> None:
        """The abort happens before the optimizer writes NaN into the student or teacher."""
        broken = [replace(s, image=np.full_like(s.image, np.nan)) for s in tiny_split.labeled]
        split = DatasetSplit.create(broken, tiny_split.unlabeled_with_labels(), tiny_split.val)
        state = init_train_state(MODEL, TINY_TRAIN)
        before = {k: v.copy() for k, v in state.student.parameters().items()}
        with pytest.raises(NumericError):
            train_epoch(state, split, TINY_TRAIN, MIX)
        for name, value in state.student.parameters().items():
            np.testing.assert_array_equal(value, before[name])
        assert all(np.isfinite(v).all() for v in state.teacher.params.values())
        assert state.global_step == 0

    def test_non_finite_gradient_aborts(
        self, tiny_split: DatasetSplit, tmp_path: Path, monkeypatch: pytest.MonkeyPatch
    ) -> None:
        """A finite loss with a NaN gradient is refused as well."""
        import mumkit.training.trainer as trainer

        real_total_loss = trainer.total_loss

        def poisoned(*args, **kwargs):  # type: ignore[no-untyped-def]
            result = real_total_loss(*args, **kwargs)
            result.grads["enc1.conv.weight"][...] = np.nan
            return result

        monkeypatch.setattr(trainer, "total_loss", poisoned)
        state = init_train_state(MODEL, TINY_TRAIN)
        with pytest.raises(NumericError, match="enc1.conv.weight"):
            train_epoch(state, tiny_split, TINY_TRAIN, MIX, dump_dir=tmp_path)
        assert (tmp_path / "nan_dump.npz").exists()

    def test_teacher_gap_starts_at_zero(self) -> None:
        """A fresh teacher is a copy of the student."""
        gap = teacher_gap(init_train_state(MODEL, TINY_TRAIN))
        assert gap == {"param_gap": 0.0, "bn_mean_gap": 0.0, "bn_var_gap": 0.0}
