import pytest
import torch

from stlc_trainer.config import TrainConfig
from stlc_trainer.data import Batch, collate
from stlc_trainer.model import build_model


def tiny_config(**overrides):
    defaults = dict(
        embed_dim=32, heads=4, layers=1, dropout=0.1,
        optimizer="adafactor", schedule="none", max_iterations=1,
    )
    defaults.update(overrides)
    return TrainConfig(**defaults)


def repad(batch: Batch, extra_enc: int, extra_dec: int, vocab, rules) -> Batch:
    """The same batch padded out to longer encoder/decoder lengths."""
    n = batch.enc_tokens.shape[0]
    path_len = batch.paths.shape[2]

    def grow(t, count, fill):
        pad_block = torch.full((n, count, *t.shape[3:]), fill, dtype=t.dtype)
        if t.dim() == 3:
            pad_block = torch.full((n, count, path_len), fill, dtype=t.dtype)
        return torch.cat([t, pad_block], dim=1)

    return Batch(
        ids=batch.ids,
        enc_tokens=grow(batch.enc_tokens, extra_enc, vocab.pad),
        enc_pad_mask=grow(batch.enc_pad_mask, extra_enc, True),
        paths=grow(batch.paths, extra_enc, vocab.pad),
        parent_rule=grow(batch.parent_rule, extra_enc, rules.pad_id),
        dec_in=grow(batch.dec_in, extra_dec, rules.pad_id),
        dec_target=grow(batch.dec_target, extra_dec, rules.pad_id),
        dec_pad_mask=grow(batch.dec_pad_mask, extra_dec, True),
    )


class TestForwardShapes:
    @pytest.mark.parametrize("variant", ["token", "path_ffd", "depth_parent_rule"])
    def test_logit_shape(self, variant, encoded, vocab, rules):
        cfg = tiny_config(embedding_variant=variant)
        model = build_model(cfg, vocab, rules)
        batch = collate(encoded[:2], vocab, rules)
        logits = model(batch)
        assert logits.shape == (2, batch.dec_in.shape[1], rules.n_ids)

    def test_forward_is_deterministic_in_eval_mode(self, encoded, vocab, rules):
        model = build_model(tiny_config(), vocab, rules).eval()
        batch = collate(encoded[:4], vocab, rules)
        with torch.no_grad():
            a, b = model(batch), model(batch)
        assert torch.equal(a, b)


class TestMaskInvariance:
    @pytest.mark.parametrize("variant", ["token", "path_ffd", "depth_parent_rule"])
    def test_repadding_never_changes_nonpad_logits(self, variant, encoded, vocab, rules):
        # Acceptance tolerance: 1e-5 absolute at every non-pad position.
        cfg = tiny_config(embedding_variant=variant)
        model = build_model(cfg, vocab, rules).eval()
        batch = collate(encoded[:6], vocab, rules)
        longer = repad(batch, extra_enc=5, extra_dec=4, vocab=vocab, rules=rules)
        with torch.no_grad():
            base = model(batch)
            padded = model(longer)
        keep = ~batch.dec_pad_mask
        diff = (padded[:, : base.shape[1]] - base).abs()
        assert float(diff[keep].max()) <= 1e-5

    def test_pad_token_values_are_irrelevant(self, encoded, vocab, rules):
        # Rewriting the padded positions of the *targets* must not affect
        # logits at all (targets never enter the forward pass), and
        # rewriting padded decoder inputs must not affect non-pad logits.
        model = build_model(tiny_config(), vocab, rules).eval()
        batch = collate(encoded[:6], vocab, rules)
        tampered_in = batch.dec_in.clone()
        tampered_in[batch.dec_pad_mask] = 5  # arbitrary live rule id
        tampered = Batch(
            ids=batch.ids,
            enc_tokens=batch.enc_tokens,
            enc_pad_mask=batch.enc_pad_mask,
            paths=batch.paths,
            parent_rule=batch.parent_rule,
            dec_in=tampered_in,
            dec_target=batch.dec_target,
            dec_pad_mask=batch.dec_pad_mask,
        )
        with torch.no_grad():
            base = model(batch)
            other = model(tampered)
        keep = ~batch.dec_pad_mask
        assert float((other - base).abs()[keep].max()) <= 1e-5


class TestVariants:
    def test_depth_variant_is_token_plus_constant_offset_at_init(self, encoded, vocab, rules):
        torch.manual_seed(0)
        cfg_tok = tiny_config(embedding_variant="token")
        cfg_dep = tiny_config(embedding_variant="depth_parent_rule")
        tok = build_model(cfg_tok, vocab, rules).eval()
        dep = build_model(cfg_dep, vocab, rules).eval()
        dep.tok_embed.load_state_dict(tok.tok_embed.state_dict())

        batch = collate(encoded[:3], vocab, rules)
        no_parent = Batch(
            ids=batch.ids,
            enc_tokens=batch.enc_tokens,
            enc_pad_mask=batch.enc_pad_mask,
            paths=batch.paths,
            parent_rule=torch.full_like(batch.parent_rule, rules.pad_id),
            dec_in=batch.dec_in,
            dec_target=batch.dec_target,
            dec_pad_mask=batch.dec_pad_mask,
        )
        with torch.no_grad():
            base = tok.encode_inputs(batch)
            shifted = dep.encode_inputs(no_parent)
            offset = dep.parent_rule_embed(torch.tensor(rules.pad_id))
        assert torch.allclose(shifted, base + offset, atol=1e-6)

    def test_path_variant_reads_paths_not_tokens(self, encoded, vocab, rules):
        model = build_model(tiny_config(embedding_variant="path_ffd"), vocab, rules).eval()
        batch = collate(encoded[:3], vocab, rules)
        scrambled = Batch(
            ids=batch.ids,
            enc_tokens=torch.roll(batch.enc_tokens, 1, dims=1),
            enc_pad_mask=batch.enc_pad_mask,
            paths=batch.paths,
            parent_rule=batch.parent_rule,
            dec_in=batch.dec_in,
            dec_target=batch.dec_target,
            dec_pad_mask=batch.dec_pad_mask,
        )
        with torch.no_grad():
            assert torch.equal(model.encode_inputs(batch), model.encode_inputs(scrambled))

    def test_token_variant_sees_positions(self, encoded, vocab, rules):
        model = build_model(tiny_config(), vocab, rules).eval()
        # pick an example long enough to repeat a symbol
        example = max(encoded, key=lambda ex: len(ex["enc_tokens"]))
        batch = collate([example], vocab, rules)
        with torch.no_grad():
            embedded = model.encode_inputs(batch)
        # two positions with identical symbols still embed differently
        tokens = batch.enc_tokens[0].tolist()
        dup = next(
            (i, j)
            for i in range(len(tokens))
            for j in range(i + 1, len(tokens))
            if tokens[i] == tokens[j]
        )
        assert not torch.allclose(embedded[0, dup[0]], embedded[0, dup[1]])
