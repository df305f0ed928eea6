"""
Модульные тесты кодировщика изображений и агрегатора видов.
"""

import pytest
import torch
from torch.testing import assert_close

from ml.models import FusionNet, ImageEncoder, ViewConditioner, VisionConfig
from utilities.errors import ConfigError, ContractError


@pytest.fixture
def encoder(tiny_vision):
    return ImageEncoder(tiny_vision, embed_dim=16).eval()


@pytest.fixture
def fusion():
    return FusionNet(8, mode="mfa").to(torch.float64)


class TestImageEncoder:
    """Тесты ViT-кодировщика изображений."""

    def test_same_image_same_embedding(self, encoder):
        image = torch.rand(1, 8, 8)
        assert torch.equal(encoder(image), encoder(image.clone()))

    def test_different_images_differ(self, encoder):
        assert not torch.allclose(encoder(torch.zeros(1, 8, 8)), encoder(torch.ones(1, 8, 8)))

    def test_output_shape(self, encoder):
        assert encoder(torch.rand(5, 8, 8)).shape == (5, 16)
        assert encoder(torch.rand(2, 1, 8, 8)).shape == (2, 16)

    def test_indivisible_size(self, encoder):
        with pytest.raises(ContractError):
            encoder(torch.rand(1, 10, 10))

    def test_wrong_channels(self, encoder):
        with pytest.raises(ContractError):
            encoder(torch.rand(1, 3, 8, 8))

    def test_wrong_resolution(self, encoder):
        with pytest.raises(ContractError):
            encoder(torch.rand(1, 12, 12))

    def test_patchify_row_major(self, encoder):
        image = torch.arange(64, dtype=torch.float32).reshape(1, 1, 8, 8)
        patches = encoder.patchify(image)
        assert patches.shape == (1, 4, 16)
        assert patches[0, 0, :4].tolist() == [0.0, 1.0, 2.0, 3.0]
        assert patches[0, 1, 0].item() == 4.0
        assert patches[0, 2, 0].item() == 32.0

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            VisionConfig(image_size=10, patch_size=4).validate()
        with pytest.raises(ConfigError):
            VisionConfig(aggregation="max").validate()


class TestFusionNet:
    """Тесты агрегатора видов."""

    def test_single_view_is_projection(self, fusion):
        e = torch.randn(1, 8, dtype=torch.float64)
        expected = fusion.output_projection.weight @ (fusion.value_projection.weight @ e[0])
        assert_close(fusion(e), expected)

    def test_identical_copies_match_single_view(self, fusion):
        e = torch.randn(1, 8, dtype=torch.float64)
        assert_close(fusion(e.repeat(4, 1)), fusion(e))

    def test_permutation_is_bit_identical(self, fusion):
        views = torch.randn(5, 8, dtype=torch.float64)
        perm = torch.tensor([3, 1, 4, 0, 2])
        assert torch.equal(fusion(views[perm]), fusion(views))

    def test_weights_sum_to_one(self, fusion):
        fusion(torch.randn(2, 6, 8, dtype=torch.float64))
        weights = fusion.get_attention_weights()
        assert weights.shape == (2, 6, 1)
        assert_close(weights.sum(dim=1), torch.ones(2, 1, dtype=torch.float64))
        assert (weights >= 0).all()

    def test_avg_equals_uniform_attention(self):
        views = torch.randn(3, 5, 8, dtype=torch.float64)
        mfa = FusionNet(8, mode="mfa").to(torch.float64)
        with torch.no_grad():
            mfa.key_projection.weight.zero_()
            mfa.value_projection.weight.copy_(torch.eye(8, dtype=torch.float64))
            mfa.output_projection.weight.copy_(torch.eye(8, dtype=torch.float64))
        avg = FusionNet(8, mode="avg").to(torch.float64)
        assert_close(mfa(views), avg(views))
        assert_close(avg(views), views.mean(dim=1))

    def test_avg_has_no_trainable_parameters(self):
        assert all(not p.requires_grad for p in FusionNet(8, mode="avg").parameters())

    def test_multi_head(self):
        fusion = FusionNet(8, mode="mfa", num_heads=2).to(torch.float64)
        out = fusion(torch.randn(2, 3, 8, dtype=torch.float64))
        assert out.shape == (2, 8)
        assert fusion.get_attention_weights().shape == (2, 3, 2)

    def test_no_views(self, fusion):
        with pytest.raises(ContractError):
            fusion(torch.zeros(0, 8, dtype=torch.float64))

    def test_dimension_mismatch(self, fusion):
        with pytest.raises(ContractError):
            fusion(torch.zeros(2, 6, dtype=torch.float64))

    def test_unknown_mode(self):
        with pytest.raises(ConfigError):
            FusionNet(8, mode="max")


class TestViewConditioner:
    """Тесты кодирования набора видов."""

    def test_gradient_reaches_image_encoder(self, tiny_vision):
        conditioner = ViewConditioner(tiny_vision, embed_dim=16)
        cond = conditioner(torch.rand(3, 8, 8))
        assert cond.shape == (16,)
        cond.sum().backward()
        grad = conditioner.encoder.patch_embed.weight.grad
        assert grad is not None and float(grad.abs().max()) > 0

    def test_batched_views(self, tiny_vision):
        conditioner = ViewConditioner(tiny_vision, embed_dim=16).eval()
        views = torch.rand(2, 3, 8, 8)
        together = conditioner(views)
        assert together.shape == (2, 16)
        assert_close(together[1], conditioner(views[1]))

    def test_view_order_does_not_matter(self, tiny_vision):
        conditioner = ViewConditioner(tiny_vision, embed_dim=16).eval()
        views = torch.rand(4, 8, 8)
        assert torch.equal(conditioner(views[[2, 0, 3, 1]]), conditioner(views))

    def test_empty_views(self, tiny_vision):
        conditioner = ViewConditioner(tiny_vision, embed_dim=16)
        with pytest.raises(ContractError):
            conditioner(torch.zeros(1, 0, 8, 8))
