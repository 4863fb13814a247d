"""Tests for tile mixing masks, mix/unmix and their gradients."""
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mumkit.errors import ConfigurationError, ShapeError
from mumkit.mixing import (
    MaskStack,
    MixingMask,
    MixSpec,
    compose,
    generate_mask,
    invert,
    mask_from_text,
    mask_to_text,
    mix,
    mix_backward,
    unmix,
    unmix_backward,
)
from mumkit.nn.layers import upsample_nearest_forward
from mumkit.tensorgrid import FeatureBatch, mean_pool


class TestMixingMask:
    """Test suite for MixingMask construction and algebra."""

    def test_rejects_non_permutation(self) -> None:
        """A cell repeating a member is not a valid mask."""
        with pytest.raises(ShapeError):
            MixingMask(np.array([[[0, 0]]]))

    def test_perms_are_read_only(self) -> None:
        """Masks are immutable once built."""
        mask = MixingMask.identity(3, 2, 2)
        with pytest.raises(ValueError):
            mask.perms[0, 0, 0] = 1

    def test_identity_masks_flag(self, rng: np.random.Generator) -> None:
        """identity_masks forces identity permutations."""
        spec = MixSpec(n_group=4, identity_masks=True)
        assert generate_mask(spec, rng).is_identity()

    def test_invert_composes_to_identity(self, rng: np.random.Generator) -> None:
        """mask followed by its inverse is the identity, in both orders."""
        mask = generate_mask(MixSpec(n_group=5, n_tiles_h=3, n_tiles_w=2), rng)
        assert compose(invert(mask), mask).is_identity()
        assert compose(mask, invert(mask)).is_identity()

    def test_compose_matches_sequential_mix(self, rng: np.random.Generator) -> None:
        """compose(outer, inner) equals mixing with inner, then outer."""
        spec = MixSpec(n_group=3, n_tiles_h=2, n_tiles_w=2)
        inner, outer = generate_mask(spec, rng), generate_mask(spec, rng)
        x = FeatureBatch(rng.normal(size=(3, 2, 4, 4)))
        np.testing.assert_array_equal(
            mix(mix(x, inner), outer).data, mix(x, compose(outer, inner)).data
        )

    def test_text_round_trip(self, rng: np.random.Generator) -> None:
        """mask_to_text output parses back to the same mask."""
        mask = generate_mask(MixSpec(n_group=4, n_tiles_h=4, n_tiles_w=3), rng)
        assert mask_from_text(mask_to_text(mask)) == mask

    def test_text_rejects_garbage(self) -> None:
        """Malformed lines raise ConfigurationError."""
        with pytest.raises(ConfigurationError):
            mask_from_text("0 0 1 0\n")

    def test_uniform_permutations(self) -> None:
        """Every permutation of a 3-group appears with frequency 1/6 +- 0.01."""
        spec = MixSpec(n_group=3, n_tiles_h=1, n_tiles_w=1)
        rng = np.random.default_rng(123)
        draws = 60000
        counts = Counter(generate_mask(spec, rng).cell(0, 0) for _ in range(draws))
        assert len(counts) == 6
        assert all(abs(c / draws - 1 / 6) < 0.01 for c in counts.values())


class TestMix:
    """Test suite for mix and unmix."""

    def test_gather_convention(self) -> None:
        """Output member g takes tile (i, j) from input member perms[i, j, g]."""
        x = FeatureBatch(np.stack([np.zeros((1, 2, 4)), np.ones((1, 2, 4))]))
        mask = MixingMask(np.array([[[1, 0], [0, 1]]]))
        out = mix(x, mask).data
        np.testing.assert_array_equal(out[0, 0], [[1, 1, 0, 0], [1, 1, 0, 0]])
        np.testing.assert_array_equal(out[1, 0], [[0, 0, 1, 1], [0, 0, 1, 1]])

    def test_identity_mask_is_noop(self, rng: np.random.Generator) -> None:
        """Mixing with the identity returns the input."""
        x = FeatureBatch(rng.normal(size=(4, 3, 8, 6)))
        np.testing.assert_array_equal(mix(x, MixingMask.identity(4, 4, 3)).data, x.data)

    def test_same_mask_for_every_group(self, rng: np.random.Generator) -> None:
        """A batch of two groups is mixed group by group with one mask."""
        mask = generate_mask(MixSpec(n_group=2, n_tiles_h=2, n_tiles_w=2), rng)
        x = FeatureBatch(rng.normal(size=(4, 1, 4, 4)))
        both = mix(x, mask).data
        np.testing.assert_array_equal(both[:2], mix(x.select([0, 1]), mask).data)
        np.testing.assert_array_equal(both[2:], mix(x.select([2, 3]), mask).data)

    def test_tiles_only_move_between_members(self, rng: np.random.Generator) -> None:
        """Each pixel's values across the group are permuted, never changed."""
        mask = generate_mask(MixSpec(n_group=4, n_tiles_h=4, n_tiles_w=3), rng)
        x = FeatureBatch(rng.normal(size=(4, 2, 8, 6)))
        np.testing.assert_array_equal(
            np.sort(mix(x, mask).data, axis=0), np.sort(x.data, axis=0)
        )

    def test_batch_not_whole_groups(self, rng: np.random.Generator) -> None:
        """A batch size that is not a multiple of the group size is rejected."""
        mask = MixingMask.identity(4, 1, 1)
        with pytest.raises(ConfigurationError):
            mix(FeatureBatch(np.zeros((6, 1, 2, 2))), mask)

    def test_indivisible_plane(self) -> None:
        """A plane that does not split into the grid is rejected."""
        with pytest.raises(ConfigurationError):
            mix(FeatureBatch(np.zeros((2, 1, 5, 4))), MixingMask.identity(2, 2, 2))

    def test_resolution_independence(self, rng: np.random.Generator) -> None:
        """The same mask commutes with 2x nearest upsampling."""
        mask = generate_mask(MixSpec(n_group=3, n_tiles_h=2, n_tiles_w=2), rng)
        x = FeatureBatch(rng.normal(size=(3, 2, 4, 4)))
        np.testing.assert_array_equal(
            mix(upsample_nearest_forward(x), mask).data,
            upsample_nearest_forward(mix(x, mask)).data,
        )

    def test_commutes_with_mean_pooling(self, rng: np.random.Generator) -> None:
        """Mixing a 2x-pooled copy equals pooling the mixed full-resolution batch."""
        mask = generate_mask(MixSpec(n_group=4, n_tiles_h=4, n_tiles_w=3), rng)
        x = FeatureBatch(rng.normal(size=(4, 1, 16, 12)))
        np.testing.assert_array_equal(
            mix(mean_pool(x), mask).data, mean_pool(mix(x, mask)).data
        )

    @settings(max_examples=1000, deadline=None)
    @given(
        seed=st.integers(0, 2**32 - 1),
        n_group=st.integers(2, 6),
        groups=st.integers(1, 2),
        grid_h=st.integers(1, 6),
        grid_w=st.integers(1, 6),
        tile_h=st.integers(1, 8),
        tile_w=st.integers(1, 8),
        depth=st.integers(0, 8),
    )
    def test_unmix_undoes_mix_chain(
        self,
        seed: int,
        n_group: int,
        groups: int,
        grid_h: int,
        grid_w: int,
        tile_h: int,
        tile_w: int,
        depth: int,
    ) -> None:
        """unmix(mix chain(x)) is bit-exactly x for any stack depth."""
        rng = np.random.default_rng(seed)
        spec = MixSpec(n_group=n_group, n_tiles_h=grid_h, n_tiles_w=grid_w)
        x = FeatureBatch(rng.normal(size=(n_group * groups, 2, grid_h * tile_h, grid_w * tile_w)))
        stack = MaskStack()
        y = x
        for k in range(depth):
            mask = generate_mask(spec, rng)
            stack.push(f"site{k}", mask)
            y = mix(y, mask)
        np.testing.assert_array_equal(unmix(y, stack).data, x.data)


class TestMixGradients:
    """Mix and unmix are linear; their backward passes are the adjoints."""

    def test_mix_backward_is_adjoint(self, rng: np.random.Generator) -> None:
        """<mix(x), g> == <x, mix_backward(g)>."""
        mask = generate_mask(MixSpec(n_group=4, n_tiles_h=2, n_tiles_w=3), rng)
        x = FeatureBatch(rng.normal(size=(8, 2, 4, 6)))
        g = FeatureBatch(rng.normal(size=x.shape))
        lhs = float(np.sum(mix(x, mask).data * g.data))
        rhs = float(np.sum(x.data * mix_backward(g, mask).data))
        assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_unmix_backward_is_adjoint(self, rng: np.random.Generator) -> None:
        """<unmix(x), g> == <x, unmix_backward(g)>."""
        spec = MixSpec(n_group=3, n_tiles_h=2, n_tiles_w=2)
        stack = MaskStack()
        for k in range(3):
            stack.push(f"site{k}", generate_mask(spec, rng))
        x = FeatureBatch(rng.normal(size=(3, 1, 4, 4)))
        g = FeatureBatch(rng.normal(size=x.shape))
        lhs = float(np.sum(unmix(x, stack).data * g.data))
        rhs = float(np.sum(x.data * unmix_backward(g, stack).data))
        assert lhs == pytest.approx(rhs, rel=1e-12)
