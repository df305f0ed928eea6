"""
Модульные тесты денойзера: кодировщик патчей, позиции, время, трансформер, проекция.
"""

import math
from dataclasses import replace

import pytest
import torch
from torch.testing import assert_close

from core.config import preset_config
from ml.diffusion import DiffusionConfig, make_schedule, training_loss
from ml.models import (
    Attention, BackboneConfig, Denoiser, DropPath, PatchEncoder, TransformerEncoder,
    VisionConfig, build_model, count_parameters
)
from ml.numerics.rng import SeededRng
from utilities.errors import ConfigError, ContractError, ShapeError


def _linear(fan_in, fan_out, bias=True):
    return fan_in * fan_out + (fan_out if bias else 0)


def _block(dim, mlp_ratio=4.0):
    hidden = int(dim * mlp_ratio)
    return 4 * dim + _linear(dim, 3 * dim) + _linear(dim, dim) + _linear(dim, hidden) + _linear(hidden, dim)


def expected_parameter_count(backbone: BackboneConfig, vision: VisionConfig) -> int:
    d = backbone.embed_dim
    c1, c2, c3 = backbone.encoder_channels
    patch_encoder = _linear(3, c1) + _linear(c1, c2) + _linear(2 * c2, c3) + _linear(c3, d)
    positional = _linear(3, backbone.pos_hidden) + _linear(backbone.pos_hidden, d) + 2 * d
    time_mlp = 2 * _linear(d, d)
    transformer = backbone.depth * _block(d, backbone.mlp_ratio) + 2 * d
    output = _linear(d, backbone.group_size * 3)
    patch_dim = vision.channels * vision.patch_size ** 2
    image = _linear(patch_dim, d) + vision.num_patches * d + vision.depth * _block(d) + _linear(d, d)
    fusion = d + 3 * d * d
    return patch_encoder + positional + time_mlp + transformer + output + image + fusion


class TestPatchEncoder:
    """Тесты PointNet-кодировщика патчей."""

    def test_output_shape(self):
        encoder = PatchEncoder(16, (8, 16, 16))
        assert encoder(torch.randn(2, 5, 7, 3)).shape == (2, 5, 16)

    def test_permutation_invariance(self):
        encoder = PatchEncoder(16, (8, 16, 16)).to(torch.float64)
        groups = torch.randn(3, 6, 3, dtype=torch.float64)
        perm = torch.tensor([4, 0, 5, 2, 1, 3])
        assert torch.equal(encoder(groups[:, perm]), encoder(groups))

    def test_single_point_zero_offset(self):
        """Для k=1 и нулевого смещения токен равен выходу MLP от нуля."""
        encoder = PatchEncoder(4, (3, 2, 5)).to(torch.float64)
        groups = torch.zeros(1, 1, 3, dtype=torch.float64)
        first = encoder.first_mlp(torch.zeros(3, dtype=torch.float64))
        expected = encoder.second_mlp(torch.cat([first, first]))
        assert_close(encoder(groups)[0], expected)

    def test_bad_input(self):
        with pytest.raises(ShapeError):
            PatchEncoder(8, (4, 4, 4))(torch.zeros(4, 2))


class TestPositionalEmbedding:
    """Тесты позиционных эмбеддингов центров."""

    def test_matches_stored_mlp(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone).to(torch.float64)
        centers = torch.randn(4, 3, dtype=torch.float64)
        mlp = denoiser.pos_embed
        hidden = torch.nn.functional.gelu(centers @ mlp.fc1.weight.T + mlp.fc1.bias)
        expected = hidden @ mlp.fc2.weight.T + mlp.fc2.bias
        assert_close(denoiser.positional_embed(centers), expected)

    def test_disabled_gives_zeros(self, tiny_backbone):
        cfg = replace(tiny_backbone, use_positional_embedding=False)
        denoiser = Denoiser(cfg)
        centers = torch.randn(2, 4, 3)
        assert torch.equal(denoiser.token_positions(centers), torch.zeros(2, 6, cfg.embed_dim))
        assert all(not p.requires_grad for p in denoiser.positional_parameters())

    def test_token_positions_layout(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        centers = torch.randn(3, 4, 3)
        pos = denoiser.token_positions(centers)
        assert pos.shape == (3, 6, 16)
        assert torch.equal(pos[:, 0], denoiser.time_pos.expand(3, -1))
        assert torch.equal(pos[:, 1], denoiser.image_pos.expand(3, -1))

    def test_bad_centers(self, tiny_backbone):
        with pytest.raises(ShapeError):
            Denoiser(tiny_backbone).positional_embed(torch.zeros(4, 2))


class TestTimeEmbedding:
    """Тесты синусоидального эмбеддинга шага."""

    def test_sin_and_cos_halves(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        emb = denoiser.sinusoidal(7)
        assert emb.shape == (16,)
        assert abs(float(emb[0]) - math.sin(7.0)) < 1e-12
        assert abs(float(emb[8]) - math.cos(7.0)) < 1e-12
        assert abs(float(emb[1]) - math.sin(7.0 * 10000 ** (-2.0 / 16))) < 1e-12

    def test_distinct_steps(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        assert not torch.equal(denoiser.sinusoidal(3), denoiser.sinusoidal(4))
        assert not torch.equal(denoiser.time_token(3), denoiser.time_token(4))

    def test_batched_steps(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        tokens = denoiser.time_token(torch.tensor([1, 5]))
        assert tokens.shape == (2, 16)
        assert_close(tokens[1], denoiser.time_token(5))


class TestTokens:
    """Тесты сборки последовательности токенов."""

    def test_sequence_length(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        seq = denoiser.assemble_tokens(torch.ones(2, 16), torch.zeros(2, 16),
                                       torch.ones(2, 4, 16), torch.zeros(2, 6, 16))
        assert seq.shape == (2, 6, 16)
        assert torch.equal(seq[:, 1], torch.zeros(2, 16))

    def test_dimension_mismatch(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        with pytest.raises(ContractError):
            denoiser.assemble_tokens(torch.ones(2, 16), torch.zeros(2, 8),
                                     torch.ones(2, 4, 16), torch.zeros(2, 6, 16))

    def test_position_length_mismatch(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        with pytest.raises(ContractError):
            denoiser.assemble_tokens(torch.ones(2, 16), torch.zeros(2, 16),
                                     torch.ones(2, 4, 16), torch.zeros(2, 5, 16))


class TestTransformer:
    """Тесты блоков трансформера."""

    def test_zeroed_branches_reduce_to_final_norm(self):
        encoder = TransformerEncoder(8, depth=2, num_heads=2).to(torch.float64)
        for block in encoder.blocks:
            for layer in (block.attn.proj, block.mlp.fc2):
                torch.nn.init.zeros_(layer.weight)
                torch.nn.init.zeros_(layer.bias)
        x = torch.randn(2, 5, 8, dtype=torch.float64)
        expected = torch.nn.functional.layer_norm(x, (8,))
        assert_close(encoder(x), expected)

    def test_single_head_attention_oracle(self):
        attention = Attention(4, num_heads=1).to(torch.float64)
        x = torch.randn(1, 3, 4, dtype=torch.float64)
        qkv = x[0] @ attention.qkv.weight.T + attention.qkv.bias
        q, k, v = qkv[:, :4], qkv[:, 4:8], qkv[:, 8:]
        weights = torch.softmax(q @ k.T / 2.0, dim=-1)
        expected = (weights @ v) @ attention.proj.weight.T + attention.proj.bias
        assert_close(attention(x)[0], expected)

    def test_heads_must_divide_dim(self):
        with pytest.raises(ConfigError):
            Attention(10, num_heads=3)

    def test_drop_path_uses_rng(self):
        drop = DropPath(0.5)
        drop.train()
        x = torch.ones(64, 2, 3)
        first = drop(x, SeededRng(0))
        second = drop(x, SeededRng(0))
        assert torch.equal(first, second)
        kept = first[:, 0, 0]
        assert set(kept.tolist()) <= {0.0, 2.0}
        assert 0 < int((kept > 0).sum()) < 64

    def test_drop_path_inactive_in_eval(self):
        drop = DropPath(0.9)
        drop.eval()
        x = torch.randn(4, 2, 3)
        assert torch.equal(drop(x, SeededRng(0)), x)

    def test_patch_tokens_equivariant_without_positions(self, tiny_backbone):
        cfg = replace(tiny_backbone, use_positional_embedding=False)
        denoiser = Denoiser(cfg).to(torch.float64).eval()
        time_tok = torch.randn(1, 16, dtype=torch.float64)
        image_emb = torch.randn(1, 16, dtype=torch.float64)
        patches = torch.randn(1, 4, 16, dtype=torch.float64)
        pos = denoiser.token_positions(torch.randn(1, 4, 3, dtype=torch.float64))
        perm = torch.tensor([2, 0, 3, 1])

        out = denoiser.transformer_forward(denoiser.assemble_tokens(time_tok, image_emb, patches, pos))
        out_perm = denoiser.transformer_forward(
            denoiser.assemble_tokens(time_tok, image_emb, patches[:, perm], pos)
        )
        assert_close(out_perm[:, 2:], out[:, 2:][:, perm])
        assert_close(out_perm[:, :2], out[:, :2])


class TestDenoiser:
    """Тесты полного прохода денойзера."""

    def test_zero_projection_gives_zero_cloud(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone)
        torch.nn.init.zeros_(denoiser.output_proj.weight)
        torch.nn.init.zeros_(denoiser.output_proj.bias)
        out = denoiser.project_output(torch.randn(1, 6, 16))
        assert torch.equal(out, torch.zeros(1, 16, 3))

    def test_default_config_output_shape(self):
        cfg = BackboneConfig()
        denoiser = Denoiser(cfg)
        out = denoiser.project_output(torch.zeros(1, 2 + cfg.num_groups, cfg.embed_dim))
        assert out.shape == (1, 2048, 3)

    def test_forward_shape_and_determinism(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone).eval()
        xt = torch.randn(16, 3)
        cond = torch.randn(16)
        first = denoiser(xt, 5, cond)
        assert first.shape == (16, 3)
        assert torch.isfinite(first).all()
        assert torch.equal(first, denoiser(xt, 5, cond))

    def test_wrong_point_count(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone).eval()
        with pytest.raises(ContractError):
            denoiser(torch.randn(15, 3), 1, torch.randn(16))

    def test_wrong_condition(self, tiny_backbone):
        denoiser = Denoiser(tiny_backbone).eval()
        with pytest.raises(ShapeError):
            denoiser(torch.randn(16, 3), 1, torch.randn(8))

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            BackboneConfig(embed_dim=30, num_heads=4).validate()


class TestReconstructor:
    """Тесты полной модели."""

    def test_parameter_count(self, tiny_backbone, tiny_vision, tiny_model):
        assert count_parameters(tiny_model) == expected_parameter_count(tiny_backbone, tiny_vision)

    def test_single_view_parameter_count(self):
        """Число параметров пресета diffpoint-s зафиксировано."""
        cfg = preset_config("diffpoint-s")
        model = build_model(cfg.backbone, cfg.vision, seed=0)
        assert count_parameters(model) == 36_988_384
        assert expected_parameter_count(cfg.backbone, cfg.vision) == 36_988_384
        assert count_parameters(model, trainable_only=True) == 36_988_384

    def test_same_seed_same_weights(self, tiny_backbone, tiny_vision):
        first = build_model(tiny_backbone, tiny_vision, seed=3).state_dict()
        second = build_model(tiny_backbone, tiny_vision, seed=3).state_dict()
        assert all(torch.equal(first[name], second[name]) for name in first)

    def test_every_group_receives_gradient(self, tiny_model, tiny_records):
        sched = make_schedule(DiffusionConfig(T=10))
        clouds = torch.stack([r.cloud for r in tiny_records[:2]])
        views = torch.stack([r.views[:2] for r in tiny_records[:2]])
        eps = SeededRng(0).normal(clouds.shape)
        cond = tiny_model.encode_views(views)
        loss = training_loss(clouds, torch.tensor([3, 8]), eps, cond, tiny_model.predictor(), sched)
        loss.backward()

        params = dict(tiny_model.named_parameters())
        groups = tiny_model.parameter_groups()
        assert list(groups) == [
            "image_encoder", "aggregator", "patch_encoder", "positional",
            "time_embedding", "transformer", "output_projection"
        ]
        for group, names in groups.items():
            grads = [params[n].grad for n in names]
            assert all(g is not None and torch.isfinite(g).all() for g in grads), group
            assert any(float(g.abs().max()) > 0 for g in grads), group

    def test_ablations_freeze_groups(self, tiny_backbone, tiny_vision):
        backbone = replace(tiny_backbone, use_positional_embedding=False)
        vision = replace(tiny_vision, aggregation="avg")
        model = build_model(backbone, vision, seed=0)
        groups = model.parameter_groups()
        assert "positional" not in groups
        assert "aggregator" not in groups
        assert count_parameters(model, trainable_only=True) < count_parameters(model)

    def test_float64_build(self, tiny_backbone, tiny_vision):
        model = build_model(tiny_backbone, tiny_vision, seed=0, dtype=torch.float64)
        assert all(p.dtype == torch.float64 for p in model.parameters())
