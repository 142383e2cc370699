import numpy as np
import pytest
import torch

from tubeground.featstore import EmbeddingTable
from tubeground.text_encoder import LexiconTagger, TextEncoder, select_entity

from helpers import softmax_np
from fdcheck import check_gradients

VOCAB = ("the", "dog", "cat", "boy", "ball", "chases", "holds", "is", "by", "what", "who", "red")
NOUNS = ("dog", "cat", "boy", "ball")


def make_encoder(query_mode="entity_attention", hidden=4, word_dim=6, seed=0):
    torch.manual_seed(seed)
    table = EmbeddingTable(VOCAB, dim=word_dim, seed=seed)
    enc = TextEncoder(table, hidden_dim=hidden, query_mode=query_mode, tagger=LexiconTagger(NOUNS))
    return enc.double()


class TestEncodeWords:
    def test_single_word(self):
        enc = make_encoder()
        out = enc.encode_words(["dog"])
        assert out.shape == (1, 8)

    def test_empty_rejected(self):
        enc = make_encoder()
        with pytest.raises(ValueError):
            enc.encode_words([])

    def test_reversal_symmetry_with_tied_directions(self):
        # With the two directions sharing weights, running the reversed
        # sentence forward must reproduce the backward features.
        enc = make_encoder(seed=3)
        with torch.no_grad():
            for name in ("weight_ih_l0", "weight_hh_l0", "bias_ih_l0", "bias_hh_l0"):
                getattr(enc.gru, f"{name}_reverse").copy_(getattr(enc.gru, name))
        tokens = ["the", "dog", "chases", "the", "cat"]
        h = enc.gru.hidden_size
        fwd = enc.encode_words(tokens)
        rev = enc.encode_words(tokens[::-1])
        L = len(tokens)
        for i in range(L):
            assert torch.allclose(fwd[i, h:], rev[L - 1 - i, :h], atol=1e-10)

    def test_finite_outputs(self):
        enc = make_encoder(seed=5)
        out = enc.encode_words(["red"] * 7)
        assert torch.isfinite(out).all()


class TestSelectEntity:
    tagger = LexiconTagger(NOUNS)

    def test_interrogative_first_wh(self):
        tokens = ["what", "is", "holds", "by", "the", "boy"]
        assert select_entity(tokens, "interrogative", self.tagger) == 0

    def test_declarative_first_noun(self):
        tokens = ["the", "red", "boy", "holds", "the", "ball"]
        assert select_entity(tokens, "declarative", self.tagger) == 2

    def test_single_noun_token(self):
        assert select_entity(["dog"], "declarative", self.tagger) == 0

    def test_fallback_warns(self):
        with pytest.warns(UserWarning, match="falling back"):
            assert select_entity(["red", "the"], "declarative", self.tagger) == 0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            select_entity([], "declarative", self.tagger)


class TestQueryRepresentation:
    def test_single_word_duplicates(self):
        enc = make_encoder()
        out = enc(["dog"], "declarative")
        assert out.entity_index == 0
        assert torch.allclose(out.attention, torch.ones(1, dtype=torch.float64))
        assert torch.allclose(out.query, torch.cat([out.word_features[0]] * 2))

    def test_identical_word_features_give_that_vector(self):
        # Any convex combination of equal vectors is that vector, whatever
        # the projection weights are.
        enc = make_encoder(seed=21)
        common = torch.randn(8, dtype=torch.float64)
        words = common.expand(4, 8)
        query, weights = enc.query_from_features(words, entity_index=1)
        assert torch.allclose(query[8:], common, atol=1e-10)
        assert float(weights.detach().sum()) == pytest.approx(1.0, abs=1e-9)

    def test_entity_index_bounds_checked(self):
        enc = make_encoder()
        words = torch.randn(3, 8, dtype=torch.float64)
        with pytest.raises(ValueError):
            enc.query_from_features(words, entity_index=3)

    def test_matches_scalar_oracle(self):
        enc = make_encoder(seed=11)
        tokens = ["the", "dog", "chases"]
        out = enc(tokens, "declarative")
        words = out.word_features.detach().numpy()
        w1 = enc.entity_proj.weight.detach().numpy()
        w2 = enc.context_proj.weight.detach().numpy()
        e = out.entity_index
        gamma = np.array([(w1 @ words[e]) @ (w2 @ words[i]) for i in range(len(tokens))])
        weights = softmax_np(gamma)
        s_a = sum(weights[i] * words[i] for i in range(len(tokens)))
        expected = np.concatenate([words[e], s_a])
        assert np.allclose(out.query.detach().numpy(), expected, atol=1e-6)
        assert np.allclose(out.attention.detach().numpy(), weights, atol=1e-9)

    def test_attention_sums_to_one(self):
        enc = make_encoder(seed=13)
        out = enc(["the", "boy", "holds", "the", "ball"], "declarative")
        assert float(out.attention.detach().sum()) == pytest.approx(1.0, abs=1e-6)
        assert (out.attention >= 0).all()

    def test_last_hidden_mode(self):
        enc = make_encoder(query_mode="last_hidden", seed=7)
        tokens = ["the", "dog", "chases", "the", "cat"]
        out = enc(tokens, "declarative")
        h = enc.gru.hidden_size
        final = torch.cat([out.word_features[-1, :h], out.word_features[0, h:]])
        assert torch.allclose(out.query, torch.cat([final, final]))
        assert out.attention is None
        assert out.query.shape == (4 * h,)

    def test_query_dim_is_twice_word_feature_dim(self):
        enc = make_encoder()
        out = enc(["the", "dog"], "declarative")
        assert out.query.shape[0] == 2 * out.word_features.shape[1]


class TestGradients:
    def test_query_gradients_match_finite_differences(self):
        enc = make_encoder(seed=17)
        tokens = ["the", "dog", "chases"]
        torch.manual_seed(1)
        probe = torch.randn(16, dtype=torch.float64)

        def loss_fn():
            out = enc(tokens, "declarative")
            return (out.query * probe).sum() + (out.query**2).sum()

        check_gradients(loss_fn, list(enc.named_parameters()), eps=1e-5, rtol=1e-4)
