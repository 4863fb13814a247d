"""Tests for Single, EMA and EMAN teachers."""
import numpy as np
import pytest

from mumkit.model import PoseNet
from mumkit.model.checks import CHECK_NET
from mumkit.teacher import TeacherMode, init_from_student, teacher_infer, update
from mumkit.teacher.updaters import get_updater, moving_average
from mumkit.tensorgrid import FeatureBatch


@pytest.fixture
def student() -> PoseNet:
    net = PoseNet(CHECK_NET, np.random.default_rng(11))
    # non-trivial BN statistics
    net.forward_train(FeatureBatch(np.random.default_rng(12).normal(2.0, 3.0, size=(4, 1, 16, 16))))
    return net


def _images() -> FeatureBatch:
    return FeatureBatch(np.random.default_rng(13).normal(size=(2, 1, 16, 16)))


def _shift_teacher(state_network: PoseNet) -> None:
    for live in state_network.parameters().values():
        live += 1.0
    for name, value in state_network.buffers().items():
        state_network.set_buffer(name, value + 0.5)


class TestMovingAverage:
    """Test suite for the scalar update rule."""

    def test_single_step(self) -> None:
        """tau 0.6, teacher 1.0, student 0.5 gives 0.8."""
        out = moving_average(np.array([1.0]), np.array([0.5]), 0.6)
        assert out[0] == 0.8

    def test_eman_statistic_step(self) -> None:
        """tau 0.9, teacher mean 0, student mean 10 gives 1.0."""
        out = moving_average(np.array([0.0]), np.array([10.0]), 0.9)
        assert out[0] == 1.0

    def test_endpoints(self) -> None:
        """tau 1 keeps the teacher, tau 0 copies the student."""
        teacher, student = np.array([0.1, 0.2]), np.array([0.7, -3.0])
        np.testing.assert_array_equal(moving_average(teacher, student, 1.0), teacher)
        np.testing.assert_array_equal(moving_average(teacher, student, 0.0), student)


class TestTeacherLifecycle:
    """Test suite for teacher init, update and inference."""

    def test_init_matches_student(self, student: PoseNet) -> None:
        """Right after init the teacher predicts exactly like the student in eval mode."""
        state = init_from_student(student)
        x = _images()
        np.testing.assert_array_equal(teacher_infer(state, x).data, student.forward_plain(x).data)

    def test_init_is_a_copy(self, student: PoseNet) -> None:
        """Changing the student afterwards does not touch the teacher."""
        state = init_from_student(student)
        student.parameters()["head.conv.bias"][...] += 1.0
        assert not np.array_equal(
            state.params["head.conv.bias"], student.parameters()["head.conv.bias"]
        )

    def test_rejects_bad_decay(self, student: PoseNet) -> None:
        """Decay outside [0, 1] is an error."""
        with pytest.raises(ValueError):
            init_from_student(student, decay=1.5)

    def test_inference_is_pure(self, student: PoseNet) -> None:
        """Pseudo-labelling never writes the teacher's BN statistics."""
        state = init_from_student(student)
        before = state.network.state_dict()
        teacher_infer(state, _images())
        for name, value in state.network.state_dict().items():
            np.testing.assert_array_equal(value, before[name])

    def test_single_follows_student(self, student: PoseNet) -> None:
        """A Single teacher equals the student after every update."""
        state = init_from_student(student, TeacherMode.SINGLE)
        _shift_teacher(state.network)
        update(state, student)
        x = _images()
        np.testing.assert_array_equal(teacher_infer(state, x).data, student.forward_plain(x).data)
        assert state.step == 1

    def test_ema_leaves_statistics(self, student: PoseNet) -> None:
        """EMA averages trainables only."""
        state = init_from_student(student, TeacherMode.EMA, decay=0.6)
        _shift_teacher(state.network)
        before = {k: v.copy() for k, v in state.network.buffers().items()}
        update(state, student)
        for name, value in state.network.buffers().items():
            np.testing.assert_array_equal(value, before[name])
        bias = state.params["head.conv.bias"]
        np.testing.assert_allclose(bias, student.parameters()["head.conv.bias"] + 0.6, rtol=1e-12)

    @pytest.mark.parametrize("mode", [TeacherMode.EMA, TeacherMode.EMAN])
    def test_geometric_convergence(self, student: PoseNet, mode: TeacherMode) -> None:
        """With a frozen student each covered scalar closes its gap by tau per step."""
        tau, steps = 0.6, 10
        state = init_from_student(student, mode, decay=tau)
        _shift_teacher(state.network)
        start = state.network.state_dict()
        target = student.state_dict()
        for _ in range(steps):
            update(state, student)
        end = state.network.state_dict()

        covered = list(student.parameters())
        if mode is TeacherMode.EMAN:
            covered += list(student.buffers())
        for name in covered:
            np.testing.assert_allclose(
                np.abs(end[name] - target[name]),
                tau**steps * np.abs(start[name] - target[name]),
                rtol=1e-10,
            )
        if mode is TeacherMode.EMA:
            for name in student.buffers():
                np.testing.assert_array_equal(end[name], start[name])

    def test_eman_average_std(self, student: PoseNet) -> None:
        """average_std moves the running std, not the variance."""
        state = init_from_student(student, TeacherMode.EMAN, decay=0.5, average_std=True)
        name = "enc1.bn.running_var"
        state.network.set_buffer(name, np.full(CHECK_NET.stage_channels[0], 4.0))
        student.set_buffer(name, np.full(CHECK_NET.stage_channels[0], 16.0))
        update(state, student)
        # sqrt: 2 and 4, averaged to 3
        np.testing.assert_allclose(state.network.buffers()[name], 9.0, rtol=1e-12)

    def test_update_invalidates_teacher_traces(self, student: PoseNet) -> None:
        """Each update bumps the teacher network's version."""
        state = init_from_student(student)
        version = state.network.version
        update(state, student)
        assert state.network.version == version + 1

    def test_every_mode_has_an_updater(self) -> None:
        """All teacher modes resolve to a rule."""
        for mode in TeacherMode:
            assert get_updater(mode).mode is mode
