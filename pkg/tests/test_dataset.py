import numpy as np
import pytest
from PIL import Image

from helpers_synth import write_pgm
from splicefuse.dataset import (ImageBlock, load_corpus, make_splits, train_size)
from splicefuse.errors import CorpusLayoutError, SplitError


def _block(i, label, fill=0):
    return ImageBlock(id=f"b{i:04d}", label=label,
                      pixels=np.full((128, 128), fill, dtype=np.uint8))


def _corpus(n_authentic, n_forged):
    blocks = [_block(i, 1) for i in range(n_authentic)]
    blocks += [_block(n_authentic + i, 0) for i in range(n_forged)]
    return blocks


class TestImageBlock:
    def test_valid_block_is_frozen_uint8(self):
        block = _block(0, 1, fill=7)
        assert block.pixels.dtype == np.uint8
        with pytest.raises(ValueError):
            block.pixels[0, 0] = 1

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError, match="128x128"):
            ImageBlock(id="x", pixels=np.zeros((64, 64), dtype=np.uint8), label=1)

    def test_rejects_bad_label(self):
        with pytest.raises(ValueError, match="label"):
            ImageBlock(id="x", pixels=np.zeros((128, 128), dtype=np.uint8), label=2)

    def test_rejects_out_of_range_values(self):
        with pytest.raises(ValueError, match="0, 255"):
            ImageBlock(id="x", pixels=np.full((128, 128), 300, dtype=np.int32), label=1)

    def test_rejects_float_pixels(self):
        with pytest.raises(ValueError, match="integer"):
            ImageBlock(id="x", pixels=np.zeros((128, 128), dtype=float), label=1)


class TestLoadCorpus:
    def test_paper_scale_corpus(self, tmp_path):
        # 933 authentic + 912 spliced valid files -> 1845 blocks
        rng = np.random.default_rng(0)
        for sub, count in (("authentic", 933), ("spliced", 912)):
            (tmp_path / sub).mkdir()
            for i in range(count):
                write_pgm(tmp_path / sub / f"im{i:04d}.pgm",
                          rng.integers(0, 256, (128, 128)).astype(np.uint8))
        corpus, report = load_corpus(tmp_path)
        assert len(corpus) == 1845
        assert sum(b.label for b in corpus) == 933
        assert report.rejected == ()

    def test_empty_directories(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        corpus, report = load_corpus(tmp_path)
        assert corpus == []
        assert report.rejected == ()
        assert report.lines() == []

    def test_wrong_size_file_rejected_others_loaded(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        write_pgm(tmp_path / "authentic" / "good.pgm",
                  np.zeros((128, 128), dtype=np.uint8))
        write_pgm(tmp_path / "authentic" / "small.pgm",
                  np.zeros((64, 64), dtype=np.uint8))
        corpus, report = load_corpus(tmp_path)
        assert [b.id for b in corpus] == ["authentic/good.pgm"]
        assert len(report.rejected) == 1
        assert "small.pgm" in report.rejected[0][0]
        assert report.lines()[0].startswith("REJECTED ")

    def test_non_8bit_file_rejected(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        deep = Image.fromarray(np.zeros((128, 128), dtype=np.uint16))
        deep.save(tmp_path / "authentic" / "deep.png")
        corpus, report = load_corpus(tmp_path)
        assert corpus == []
        assert len(report.rejected) == 1
        assert "grayscale" in report.rejected[0][1]

    def test_unsupported_format_rejected(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        (tmp_path / "authentic" / "notes.txt").write_text("hello")
        corpus, report = load_corpus(tmp_path)
        assert corpus == []
        assert "unsupported-format" in report.rejected[0][1]

    def test_missing_subdirectory_is_fatal(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        with pytest.raises(CorpusLayoutError, match="spliced"):
            load_corpus(tmp_path)

    def test_lexicographic_order_and_png_support(self, tmp_path):
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        pixels = np.arange(128 * 128, dtype=np.uint32).reshape(128, 128) % 256
        Image.fromarray(pixels.astype(np.uint8), mode="L").save(
            tmp_path / "spliced" / "a.png")
        write_pgm(tmp_path / "authentic" / "z.pgm", pixels.astype(np.uint8))
        corpus, _ = load_corpus(tmp_path)
        assert [b.id for b in corpus] == ["authentic/z.pgm", "spliced/a.png"]
        assert np.array_equal(corpus[0].pixels, corpus[1].pixels)

    def test_deterministic_reload(self, tmp_path):
        rng = np.random.default_rng(1)
        (tmp_path / "authentic").mkdir()
        (tmp_path / "spliced").mkdir()
        for i in range(5):
            write_pgm(tmp_path / "authentic" / f"a{i}.pgm",
                      rng.integers(0, 256, (128, 128)).astype(np.uint8))
        first, _ = load_corpus(tmp_path)
        second, _ = load_corpus(tmp_path)
        assert [b.id for b in first] == [b.id for b in second]
        for one, two in zip(first, second):
            assert np.array_equal(one.pixels, two.pixels)


class TestTrainSize:
    def test_protocol_sizes(self):
        # round-half-up of 0.9 * n computed exactly in integers
        assert train_size(1845) == 1661
        assert train_size(10) == 9
        assert train_size(20) == 18

    def test_matches_direct_computation(self):
        for n in range(10, 500):
            assert train_size(n) == (9 * n + 5) // 10


class TestMakeSplits:
    def test_paper_scale_split_sizes(self):
        corpus = _corpus(933, 912)
        plans = make_splits(corpus, seed=0, runs=5)
        assert len(plans) == 5
        for plan in plans:
            assert len(plan.train_ids) in (1660, 1661)
            assert len(plan.train_ids) + len(plan.test_ids) == 1845

    def test_smallest_legal_split(self):
        corpus = _corpus(5, 5)
        plans = make_splits(corpus, seed=3, runs=1)
        assert len(plans[0].train_ids) == 9
        assert len(plans[0].test_ids) == 1

    def test_same_seed_bit_identical(self):
        corpus = _corpus(30, 30)
        assert make_splits(corpus, seed=11, runs=4) == make_splits(corpus, seed=11, runs=4)

    def test_partition_property(self):
        corpus = _corpus(37, 23)
        all_ids = {b.id for b in corpus}
        for plan in make_splits(corpus, seed=5, runs=5):
            train, test = set(plan.train_ids), set(plan.test_ids)
            assert train | test == all_ids
            assert not train & test

    def test_distinct_runs_differ(self):
        corpus = _corpus(40, 40)
        plans = make_splits(corpus, seed=2, runs=3)
        assert len({plan.train_ids for plan in plans}) == 3

    def test_class_presence_with_rare_class(self):
        # 2 forged among 17: the 2-item test set must still carry one of each
        corpus = _corpus(15, 2)
        for plan in make_splits(corpus, seed=9, runs=5):
            labels = {b.id: b.label for b in corpus}
            assert {labels[i] for i in plan.test_ids} == {0, 1}
            assert {labels[i] for i in plan.train_ids} == {0, 1}

    def test_impossible_class_presence_errors(self):
        # a single forged block cannot appear in both train and test
        corpus = _corpus(19, 1)
        with pytest.raises(SplitError, match="no split"):
            make_splits(corpus, seed=0, runs=1)

    def test_small_corpus_rejected(self):
        with pytest.raises(SplitError, match="too small"):
            make_splits(_corpus(4, 5), seed=0, runs=1)

    def test_empty_corpus_rejected(self):
        with pytest.raises(SplitError, match="empty"):
            make_splits([], seed=0, runs=1)
