import io
import json
import pathlib

import numpy as np
import pytest

from trajgen import (
    ArchiveError,
    EncodedSequence,
    ModelConfig,
    SequenceError,
    WeightsArchive,
    forward,
    forward_with_attention,
    get_logits,
    load_weights,
    save_weights,
)
from trajgen.toy import TOY_CONFIG, biased_archive, random_archive

from reference_forward import reference_forward, tensors_to_lists

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


def archive_bytes(archive):
    buf = io.BytesIO()
    save_weights(archive, buf)
    return buf.getvalue()


def random_sequence(rng, config, max_len=None):
    L = int(rng.integers(1, (max_len or config.max_seq) + 1))
    ids = rng.integers(0, config.vocab_size, size=L)
    ages = np.sort(rng.uniform(0.0, 90.0, size=L))
    return EncodedSequence(ids, ages)


class TestConfig:
    def test_rejects_indivisible_width(self):
        with pytest.raises(ArchiveError, match="divisible"):
            ModelConfig(vocab_size=8, n_layer=1, n_head=3, n_embd=16, max_seq=4)

    def test_tensor_manifest_count(self):
        # 5 top-level tensors plus 12 per block
        assert len(TOY_CONFIG.tensor_shapes()) == 5 + 12 * TOY_CONFIG.n_layer == 29

    def test_manifest_shapes(self):
        shapes = TOY_CONFIG.tensor_shapes()
        assert shapes["tok_emb.weight"] == (32, 16)
        assert shapes["age_emb.weight"] == (16,)
        assert shapes["head.weight"] == (32, 16)
        assert shapes["blk.0.mlp.w1"] == (64, 16)
        assert shapes["blk.1.mlp.w2"] == (16, 64)


class TestArchiveFormat:
    def test_round_trip_is_byte_identical(self, archive):
        data = archive_bytes(archive)
        reloaded = load_weights(data)
        assert archive_bytes(reloaded) == data
        for name, arr in archive.tensors.items():
            assert np.array_equal(reloaded.tensors[name], arr)

    def test_magic_mismatch(self, archive):
        data = bytearray(archive_bytes(archive))
        data[:4] = b"XXXX"
        with pytest.raises(ArchiveError, match="magic"):
            load_weights(bytes(data))

    def test_missing_tensor_named(self, archive):
        tensors = dict(archive.tensors)
        del tensors["head.weight"]
        with pytest.raises(ArchiveError, match="head.weight"):
            WeightsArchive(archive.config, tensors)

    def test_extra_tensor_named(self, archive):
        tensors = dict(archive.tensors)
        tensors["rogue.weight"] = np.zeros(3, dtype=np.float32)
        with pytest.raises(ArchiveError, match="rogue.weight"):
            WeightsArchive(archive.config, tensors)

    def test_shape_mismatch_named(self, archive):
        tensors = dict(archive.tensors)
        tensors["age_emb.weight"] = np.zeros(7, dtype=np.float32)
        with pytest.raises(ArchiveError, match="age_emb.weight"):
            WeightsArchive(archive.config, tensors)

    def test_nan_value_rejected(self, archive):
        tensors = {k: v.copy() for k, v in archive.tensors.items()}
        tensors["blk.0.attn.wq"][3, 3] = np.nan
        with pytest.raises(ArchiveError, match="blk.0.attn.wq"):
            WeightsArchive(archive.config, tensors)

    def test_nan_patched_into_file_rejected(self, archive):
        data = archive_bytes(archive)
        header_len = int.from_bytes(data[4:8], "little")
        manifest = json.loads(data[8 : 8 + header_len])["tensors"]
        entry = next(e for e in manifest if e["name"] == "ln_f.gain")
        pos = 8 + header_len + entry["offset"]
        patched = data[:pos] + np.float32(np.nan).tobytes() + data[pos + 4 :]
        with pytest.raises(ArchiveError, match="ln_f.gain"):
            load_weights(patched)

    def test_truncated_file_rejected(self, archive):
        data = archive_bytes(archive)
        with pytest.raises(ArchiveError):
            load_weights(data[: len(data) - 10])

    def test_header_not_json(self):
        junk = b"DTW1" + (5).to_bytes(4, "little") + b"nope!"
        with pytest.raises(ArchiveError, match="JSON"):
            load_weights(junk)

    def test_file_round_trip(self, archive, tmp_path):
        path = tmp_path / "model.dtw"
        save_weights(archive, str(path))
        assert path.read_bytes() == archive_bytes(archive)
        reloaded = load_weights(str(path))
        assert archive_bytes(reloaded) == path.read_bytes()

    def test_tensors_are_read_only(self, archive):
        with pytest.raises(ValueError):
            archive.tensors["head.weight"][0, 0] = 1.0


class TestForward:
    def test_output_shape_and_dtype(self, archive):
        rng = np.random.default_rng(0)
        for _ in range(10):
            seq = random_sequence(rng, TOY_CONFIG)
            out = forward(seq, archive)
            assert out.shape == (len(seq), TOY_CONFIG.vocab_size)
            assert out.dtype == np.float32
            assert np.all(np.isfinite(out))

    def test_all_zero_weights_give_zero_logits(self):
        tensors = {
            name: np.zeros(shape, dtype=np.float32)
            for name, shape in TOY_CONFIG.tensor_shapes().items()
        }
        archive = WeightsArchive(TOY_CONFIG, tensors)
        seq = EncodedSequence(np.array([1, 9, 30]), np.array([0.0, 42.0, 60.0]))
        assert np.array_equal(forward(seq, archive), np.zeros((3, 32), np.float32))

    def test_rejects_overlong_sequence(self, archive):
        L = TOY_CONFIG.max_seq + 1
        seq = EncodedSequence(np.ones(L, dtype=np.int64), np.linspace(0, 50, L))
        with pytest.raises(SequenceError, match="max_seq"):
            forward(seq, archive)

    def test_rejects_out_of_range_id(self, archive):
        seq = EncodedSequence(np.array([1, 99]), np.array([0.0, 10.0]))
        with pytest.raises(SequenceError, match="99"):
            forward(seq, archive)

    def test_determinism_bit_identical(self, archive):
        seq = EncodedSequence(np.array([1, 9, 17, 23]), np.array([0, 42, 51, 60.5]))
        a = forward(seq, archive)
        b = forward(seq, archive)
        assert np.array_equal(a, b)

    def test_get_logits_is_last_row(self, archive):
        seq = EncodedSequence(np.array([2, 5, 8]), np.array([0.0, 30.0, 55.0]))
        assert np.array_equal(get_logits(seq, archive), forward(seq, archive)[-1])

    def test_single_event_sequence(self, archive):
        seq = EncodedSequence(np.array([9]), np.array([42.0]))
        assert np.array_equal(get_logits(seq, archive), forward(seq, archive)[0])

    def test_causality_prefix_stability(self, archive):
        rng = np.random.default_rng(7)
        seq = random_sequence(rng, TOY_CONFIG)
        full = forward(seq, archive)
        for P in range(1, len(seq) + 1):
            prefix = EncodedSequence(seq.token_ids[:P], seq.ages[:P])
            out = forward(prefix, archive)
            assert np.max(np.abs(out - full[:P])) < 1e-6

    def test_causality_suffix_perturbation(self, archive):
        rng = np.random.default_rng(8)
        ids = rng.integers(0, 32, size=12)
        ages = np.sort(rng.uniform(0, 80, size=12))
        base = forward(EncodedSequence(ids, ages), archive)
        for j in (4, 8, 11):
            mutated = ids.copy()
            mutated[j] = (mutated[j] + 13) % 32
            out = forward(EncodedSequence(mutated, ages), archive)
            assert np.max(np.abs(out[:j] - base[:j])) < 1e-6

    def test_attention_rows_sum_to_one(self, archive):
        rng = np.random.default_rng(9)
        seq = random_sequence(rng, TOY_CONFIG)
        logits, attn = forward_with_attention(seq, archive)
        assert len(attn) == TOY_CONFIG.n_layer
        for layer in attn:
            assert layer.shape == (TOY_CONFIG.n_head, len(seq), len(seq))
            sums = layer.sum(axis=-1)
            assert np.max(np.abs(sums - 1.0)) < 1e-5
            # strictly causal: no weight above the diagonal
            assert np.all(np.triu(layer, k=1) == 0.0)

    def test_debug_path_matches_plain_forward(self, archive):
        seq = EncodedSequence(np.array([3, 14, 15]), np.array([10.0, 40.0, 41.0]))
        logits, _ = forward_with_attention(seq, archive)
        assert np.array_equal(logits, forward(seq, archive))


class TestReferenceEquivalence:
    def test_golden_logits_from_straight_line_reference(self, archive):
        golden = json.loads((FIXTURES / "golden_logits.json").read_text())
        seq = EncodedSequence(np.array(golden["token_ids"]), np.array(golden["ages"]))
        got = forward(seq, archive)
        want = np.array(golden["logits"])
        assert got.shape == want.shape
        assert np.max(np.abs(got - want)) < 1e-5

    def test_matches_reference_on_random_inputs(self, archive):
        rng = np.random.default_rng(123)
        tensors = tensors_to_lists(archive)
        cfg = {
            "vocab_size": 32,
            "n_layer": 2,
            "n_head": 2,
            "n_embd": 16,
            "age_scale": 100.0,
        }
        for _ in range(10):
            seq = random_sequence(rng, TOY_CONFIG, max_len=20)
            got = forward(seq, archive)
            want = np.array(
                reference_forward(
                    [int(t) for t in seq.token_ids],
                    [float(a) for a in seq.ages],
                    tensors,
                    cfg,
                )
            )
            assert np.max(np.abs(got - want)) < 1e-5


class TestBiasedArchive:
    def test_biased_logits_are_analytic(self, vocab):
        death = vocab.encode("DEATH")
        archive = biased_archive(death, high=10.0, low=-10.0)
        seq = EncodedSequence(np.array([9]), np.array([42.0]))
        logits = get_logits(seq, archive)
        want = np.full(32, -10.0, dtype=np.float32)
        want[death] = 10.0
        assert np.array_equal(logits, want)


class TestEncodedSequence:
    def test_rejects_decreasing_ages(self):
        with pytest.raises(SequenceError, match="nondecreasing"):
            EncodedSequence(np.array([1, 2]), np.array([50.0, 49.0]))

    def test_rejects_empty(self):
        with pytest.raises(SequenceError):
            EncodedSequence(np.array([], dtype=np.int64), np.array([]))

    def test_rejects_length_mismatch(self):
        with pytest.raises(SequenceError, match="mismatch"):
            EncodedSequence(np.array([1, 2]), np.array([1.0]))

    def test_rejects_non_finite_age(self):
        with pytest.raises(SequenceError):
            EncodedSequence(np.array([1]), np.array([np.nan]))
