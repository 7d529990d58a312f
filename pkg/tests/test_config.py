"""Tests for config parsing and validation."""

from __future__ import annotations

import math

import pytest

from beambench.config import SetupConfig, UNSUPPORTED_KEYS, load_config, to_manifest
from beambench.errors import InvalidValue, ParseError, UnknownKey
from beambench.filters import FilterKind


def write_config(tmp_path, text):
    path = tmp_path / "setup.cfg"
    path.write_text(text)
    return path


class TestDefaults:
    def test_empty_file_yields_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, ""))
        assert cfg == SetupConfig()

    def test_comment_only_file_yields_defaults(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "# nothing here\n\n   # still nothing\n"))
        assert cfg == SetupConfig()

    def test_default_filters_cover_the_whole_bank(self):
        assert SetupConfig().filters == tuple(kind.value for kind in FilterKind)

    def test_source_count_properties(self):
        cfg = SetupConfig(sources=(3, 2, 10), deep_sources=(1, 0, 2))
        assert cfg.n_interest == 4
        assert cfg.n_interference == 2
        assert cfg.n_background == 12


class TestParsing:
    def test_integer_override(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "P00 = 6\n"))
        assert cfg.order_interest == 6

    def test_triple_with_commas_or_spaces(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "SRCS = 4, 1, 7\nDEEP = 1 1 0\n"))
        assert cfg.sources == (4, 1, 7)
        assert cfg.deep_sources == (1, 1, 0)

    def test_pair_override(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "RNG = -0.4, 0.4\n"))
        assert cfg.coeff_range == (-0.4, 0.4)

    def test_boolean_spellings(self, tmp_path):
        cfg = load_config(
            write_config(tmp_path, "ERPs = yes\nSigPre = 1\nMesPst = off\nDUMP_FILTERS = TRUE\n")
        )
        assert cfg.erp_enabled is True
        assert cfg.interest_pre is True
        assert cfg.noise_pst is False
        assert cfg.dump_filters is True

    def test_optional_int_spellings(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "RANK_EIG = none\nMVP_RANK = 2\n"))
        assert cfg.eig_dim is None
        assert cfg.mvp_rank == 2
        cfg = load_config(write_config(tmp_path, "MVP_RANK = auto\n"))
        assert cfg.mvp_rank is None

    def test_inline_comments_are_stripped(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "K00 = 7  # realizations\n"))
        assert cfg.n_realizations == 7

    def test_filters_list(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "FILTERS = ZF, LCMV_R\n"))
        assert cfg.filters == ("ZF", "LCMV_R")

    def test_out_dir_is_kept_verbatim(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "OUT_DIR = runs/exp one\n"))
        assert cfg.out_dir == "runs/exp one"

    def test_last_assignment_wins(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "SEED = 1\nSEED = 2\n"))
        assert cfg.seed == 2


class TestParseErrors:
    def test_missing_equals_names_the_line(self, tmp_path):
        path = write_config(tmp_path, "SEED = 5\njunk line\n")
        with pytest.raises(ParseError, match=":2: expected KEY = value"):
            load_config(path)

    def test_unknown_key_names_the_line(self, tmp_path):
        path = write_config(tmp_path, "NOPE = 3\n")
        with pytest.raises(UnknownKey, match=":1: unknown key 'NOPE'"):
            load_config(path)

    def test_unsupported_key_gets_a_distinct_message(self, tmp_path):
        path = write_config(tmp_path, "PLOT = 1\n")
        with pytest.raises(UnknownKey, match="recognized but not supported"):
            load_config(path)

    def test_every_unsupported_key_is_rejected(self, tmp_path):
        for key in UNSUPPORTED_KEYS:
            path = write_config(tmp_path, f"{key} = 1\n")
            with pytest.raises(UnknownKey):
                load_config(path)

    def test_malformed_value_wraps_key_and_line(self, tmp_path):
        path = write_config(tmp_path, "n00 = many\n")
        with pytest.raises(InvalidValue, match=":1: key 'n00'"):
            load_config(path)

    def test_bad_triple_arity(self, tmp_path):
        path = write_config(tmp_path, "SRCS = 1, 2\n")
        with pytest.raises(InvalidValue, match="three integers"):
            load_config(path)

    def test_bad_boolean(self, tmp_path):
        path = write_config(tmp_path, "ERPs = maybe\n")
        with pytest.raises(InvalidValue, match="not a boolean"):
            load_config(path)

    def test_unknown_filter_in_list(self, tmp_path):
        path = write_config(tmp_path, "FILTERS = ZF, BOGUS\n")
        with pytest.raises(InvalidValue, match="unknown filter"):
            load_config(path)


class TestValidation:
    def test_stability_limit_bounds(self):
        with pytest.raises(InvalidValue, match="STAB"):
            SetupConfig(stab_limit=1.5)
        with pytest.raises(InvalidValue, match="STAB"):
            SetupConfig(stab_limit=0.0)
        SetupConfig(stab_limit=1.0)  # the boundary itself is legal

    def test_fraction_bounds(self):
        with pytest.raises(InvalidValue, match="FRAC"):
            SetupConfig(frac_ones=-0.1)
        with pytest.raises(InvalidValue, match="FRAC"):
            SetupConfig(frac_ones=1.1)

    def test_sample_count_floor_against_order(self):
        with pytest.raises(InvalidValue, match="8 times"):
            SetupConfig(n_samples=40)  # default P00 = 6 needs >= 48

    def test_sample_count_floor_against_refit(self):
        # 3 interest sources at order 6 need more than 21 samples even
        # though 8 * P00 would allow 48
        with pytest.raises(InvalidValue, match="refit is determined"):
            SetupConfig(sources=(40, 2, 10), n_samples=240, order_interest=6)

    def test_interest_sources_required(self):
        with pytest.raises(InvalidValue, match="interest"):
            SetupConfig(sources=(0, 2, 10))

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidValue, match="non-negative"):
            SetupConfig(sources=(3, -1, 10))

    def test_coeff_range_must_be_ordered(self):
        with pytest.raises(InvalidValue, match="ordered"):
            SetupConfig(coeff_range=(0.4, -0.4))

    def test_snr_levels_must_be_finite(self):
        with pytest.raises(InvalidValue, match="finite"):
            SetupConfig(smnr_db=math.inf)

    def test_cone_angle_bounds(self):
        with pytest.raises(InvalidValue, match="CONE"):
            SetupConfig(cone_half_angle=math.pi / 2.0)
        with pytest.raises(InvalidValue, match="CONE"):
            SetupConfig(cone_half_angle=-0.1)

    def test_electrode_floor(self):
        with pytest.raises(InvalidValue, match="M00"):
            SetupConfig(n_electrodes=3)

    def test_eig_dim_bounds(self):
        with pytest.raises(InvalidValue, match="RANK_EIG"):
            SetupConfig(eig_dim=0)
        with pytest.raises(InvalidValue, match="RANK_EIG"):
            SetupConfig(eig_dim=129)
        SetupConfig(eig_dim=128)

    def test_mvp_rank_bounds(self):
        with pytest.raises(InvalidValue, match="MVP_RANK"):
            SetupConfig(mvp_rank=4)  # default has 3 interest sources
        SetupConfig(mvp_rank=3)

    def test_interference_rank_bounds(self):
        with pytest.raises(InvalidValue, match="IntLfgRANK"):
            SetupConfig(interference_rank=3)  # default has 2 interference sources
        SetupConfig(interference_rank=2)
        with pytest.raises(InvalidValue, match="IntLfgRANK"):
            SetupConfig(sources=(3, 0, 10), interference_rank=1)

    def test_filters_must_be_known_and_non_empty(self):
        with pytest.raises(InvalidValue, match="at least one"):
            SetupConfig(filters=())
        with pytest.raises(InvalidValue, match="unknown filter"):
            SetupConfig(filters=("ZF", "BOGUS"))

    def test_realization_floor(self):
        with pytest.raises(InvalidValue, match="K00"):
            SetupConfig(n_realizations=0)


class TestManifest:
    def test_every_key_is_echoed(self, tmp_path):
        cfg = load_config(write_config(tmp_path, "SEED = 99\nSRCS = 2, 1, 3\n"))
        manifest = to_manifest(cfg)
        assert manifest["config"]["SEED"] == 99
        assert manifest["config"]["SRCS"] == [2, 1, 3]  # tuples become lists
        assert manifest["config"]["STAB"] == 0.95
        assert manifest["config"]["FILTERS"] == list(SetupConfig().filters)

    def test_unsupported_keys_are_listed_sorted(self):
        manifest = to_manifest(SetupConfig())
        assert manifest["unsupported_keys"] == sorted(UNSUPPORTED_KEYS)

    def test_manifest_is_json_serializable(self):
        import json

        json.dumps(to_manifest(SetupConfig()))
