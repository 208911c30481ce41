import json

import pytest

from nightadapt import ValidationError
from nightadapt.config import (
    RunConfig,
    load_run_config,
    run_config_from_dict,
    run_config_to_dict,
)


class TestRunConfig:
    def test_empty_dict_gives_defaults(self):
        cfg = run_config_from_dict({})
        assert cfg.seed == 0
        assert cfg.ptc.tau_cls == 0.8
        assert cfg.ait.gamma == 0.05
        assert cfg.plan.ema_alpha == 0.9996
        assert cfg.sim.teacher.skill == 0.7

    def test_unknown_top_level_key_rejected(self):
        with pytest.raises(ValidationError, match="unknown key"):
            run_config_from_dict({"bogus": 1})

    def test_unknown_nested_key_names_path(self):
        with pytest.raises(ValidationError, match="config.ptc"):
            run_config_from_dict({"ptc": {"tau_classification": 0.8}})

    def test_out_of_range_value_names_path(self):
        with pytest.raises(ValidationError, match="config.ptc"):
            run_config_from_dict({"ptc": {"tau_cls": 1.5}})

    def test_nested_sim_sections(self):
        cfg = run_config_from_dict(
            {
                "sim": {
                    "n_scenes": 10,
                    "teacher": {"skill": 0.9, "fp_rate": 0.0},
                    "scene": {"class_count": 2, "max_size": 30.0},
                }
            }
        )
        assert cfg.sim.n_scenes == 10
        assert cfg.sim.teacher.skill == 0.9
        assert cfg.sim.scene.class_count == 2

    def test_tuple_fields_parse_from_pairs(self):
        cfg = run_config_from_dict({"glt": {"gamma_range": [1.5, 2.5]}})
        assert cfg.glt.gamma_range == (1.5, 2.5)
        with pytest.raises(ValidationError, match="config.glt.gamma_range"):
            run_config_from_dict({"glt": {"gamma_range": [1.5]}})

    def test_roundtrip_through_dict(self):
        cfg = run_config_from_dict(
            {"seed": 9, "ptc": {"tau_lb": 0.3}, "plan": {"burn_in_iters": 5}}
        )
        again = run_config_from_dict(run_config_to_dict(cfg))
        assert run_config_to_dict(again) == run_config_to_dict(cfg)

    def test_load_from_file(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps({"seed": 77}))
        assert load_run_config(str(path)).seed == 77

    def test_missing_file_is_validation_error(self, tmp_path):
        with pytest.raises(ValidationError):
            load_run_config(str(tmp_path / "none.json"))

    def test_default_object_is_valid(self):
        RunConfig()
