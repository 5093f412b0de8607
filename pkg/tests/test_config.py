"""Tests for pipeline configuration profiles and run manifests."""

import json

import pytest

from backstyle.config import (
    HELDOUT_SEED_OFFSET,
    PipelineConfig,
    RunManifest,
    config_hash,
    content_hash,
)


class TestPipelineConfigDefaults:
    def test_full_scale_model_dims(self):
        cfg = PipelineConfig()
        assert cfg.dims.embed == 300
        assert cfg.dims.hidden == 500
        assert cfg.dims.attn == 500
        assert cfg.dims.layers == 2
        assert cfg.dims.max_len == 50

    def test_full_scale_classifier(self):
        cfg = PipelineConfig()
        assert cfg.classifier.embed == 300
        assert cfg.classifier.filters == 100
        assert cfg.classifier.width == 5
        assert cfg.classifier_input_width == 302

    def test_full_scale_generator_objective(self):
        cfg = PipelineConfig()
        assert cfg.transfer.lambda_c == 15.0
        assert cfg.transfer.tau0 == 1.0
        assert cfg.transfer.tau_min == 1e-3

    def test_heldout_seed_offset_nonzero(self):
        assert HELDOUT_SEED_OFFSET != 0


class TestProfiles:
    @pytest.mark.parametrize("profile", [PipelineConfig.desk, PipelineConfig.micro])
    def test_profiles_only_shrink(self, profile):
        full, small = PipelineConfig(), profile()
        assert small.dims.embed <= full.dims.embed
        assert small.dims.hidden <= full.dims.hidden
        assert small.dims.attn <= full.dims.attn
        assert small.dims.layers == full.dims.layers
        assert small.classifier.embed <= full.classifier.embed
        assert small.classifier.filters <= full.classifier.filters
        assert small.synthetic.content_vocab_size <= full.synthetic.content_vocab_size
        assert small.synthetic.parallel_pairs <= full.synthetic.parallel_pairs
        # the objective itself is unchanged by profile
        assert small.transfer.lambda_c == full.transfer.lambda_c
        assert small.transfer.tau0 == full.transfer.tau0
        assert small.transfer.tau_min == full.transfer.tau_min

    def test_profile_seed_threads_through(self):
        cfg = PipelineConfig.desk(seed=17).resolve()
        assert cfg.seed == 17
        assert cfg.split.seed == 17
        assert cfg.classifier.seed == 17
        assert cfg.mt.seed == 17
        assert cfg.transfer.seed == 17

    def test_resolve_pushes_dims(self):
        cfg = PipelineConfig.micro(seed=3).resolve()
        assert cfg.mt.dims == cfg.dims
        assert cfg.transfer.dims == cfg.dims


class TestSerialization:
    @pytest.mark.parametrize("make", [PipelineConfig, PipelineConfig.desk,
                                      PipelineConfig.micro])
    def test_dict_round_trip(self, make):
        cfg = make()
        assert PipelineConfig.from_dict(cfg.as_dict()) == cfg

    def test_file_round_trip(self, tmp_path):
        cfg = PipelineConfig.micro(seed=11)
        path = tmp_path / "config.json"
        cfg.save(path)
        assert PipelineConfig.load(path) == cfg
        # the file is a single declarative JSON document
        data = json.loads(path.read_text())
        assert data["seed"] == 11
        assert data["dims"]["embed"] == 8

    def test_config_hash_stable_and_sensitive(self):
        a = PipelineConfig.micro(seed=1)
        b = PipelineConfig.micro(seed=1)
        c = PipelineConfig.micro(seed=2)
        assert config_hash(a) == config_hash(b)
        assert config_hash(a) != config_hash(c)
        assert config_hash(a).startswith("sha256:")

    def test_content_hash(self, tmp_path):
        p = tmp_path / "f.bin"
        p.write_bytes(b"abc")
        q = tmp_path / "g.bin"
        q.write_bytes(b"abc")
        assert content_hash(p) == content_hash(q)
        p.write_bytes(b"abcd")
        assert content_hash(p) != content_hash(q)


class TestRunManifest:
    def test_round_trip(self, tmp_path):
        manifest = RunManifest(stage="prepare", config_hash="sha256:x", seed=3,
                               inputs={"styled": "sha256:y"},
                               artifacts={"train": "data/train.jsonl"})
        path = tmp_path / "prepare.json"
        manifest.save(path)
        assert RunManifest.load(path) == manifest

    def test_serialized_form_is_sorted_json(self, tmp_path):
        manifest = RunManifest(stage="s", config_hash="h", seed=0,
                               inputs={}, artifacts={})
        path = tmp_path / "m.json"
        manifest.save(path)
        text = path.read_text()
        assert text == json.dumps(json.loads(text), indent=2, sort_keys=True) + "\n"
