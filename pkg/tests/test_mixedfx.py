"""Random-intercept REML fitting checked against closed forms and simulations."""

import math

import numpy as np
import pytest

from markmt import synth
from markmt.mixedfx import (
    MixedFit,
    MixedModelSpec,
    apply_length_bins,
    bin_length,
    fit_reml,
    rank_group_intercepts,
    read_table,
    reml_loglik_at,
    significance,
    write_table,
)


def one_way_rows(seed=0, n_groups=8, per_group=10, mean=5.0, group_sd=1.2, resid_sd=0.9):
    rng = np.random.default_rng(seed)
    offsets = rng.normal(0.0, group_sd, size=n_groups)
    rows, values = [], np.zeros((n_groups, per_group))
    for i in range(n_groups):
        for j in range(per_group):
            y = mean + offsets[i] + rng.normal(0.0, resid_sd)
            values[i, j] = y
            rows.append({"y": float(y), "g": f"g{i}"})
    return rows, values


def anova_reml_oracle(values):
    """Closed-form REML estimates for the balanced one-way random model."""
    n_groups, per_group = values.shape
    group_means = values.mean(axis=1)
    grand = values.mean()
    msw = ((values - group_means[:, None]) ** 2).sum() / (n_groups * (per_group - 1))
    msb = per_group * ((group_means - grand) ** 2).sum() / (n_groups - 1)
    return grand, msw, (msb - msw) / per_group


class TestClosedFormOracle:
    def test_balanced_one_way_matches_anova(self):
        rows, values = one_way_rows(seed=0)
        grand, resid_var, group_var = anova_reml_oracle(values)
        assert group_var > 0  # interior optimum, where the closed form applies
        fit = fit_reml(MixedModelSpec("y", None, ("g",)), rows)
        assert abs(fit.variance_components["residual"] - resid_var) < 1e-6
        assert abs(fit.variance_components["g"] - group_var) < 1e-6
        assert abs(fit.fixed_effects["(Intercept)"] - grand) < 1e-6

    def test_oracle_holds_across_seeds(self):
        for seed in (1, 2, 3):
            rows, values = one_way_rows(seed=seed, n_groups=6, per_group=8)
            grand, resid_var, group_var = anova_reml_oracle(values)
            if group_var <= 0:
                continue
            fit = fit_reml(MixedModelSpec("y", None, ("g",)), rows)
            assert abs(fit.variance_components["residual"] - resid_var) < 1e-6
            assert abs(fit.variance_components["g"] - group_var) < 1e-6

    def test_reported_loglik_matches_components(self):
        rows, _ = one_way_rows(seed=4)
        spec = MixedModelSpec("y", None, ("g",))
        fit = fit_reml(spec, rows)
        assert abs(reml_loglik_at(spec, rows, fit.variance_components) - fit.reml_loglik) < 1e-9


class TestDegenerateCases:
    def zero_group_rows(self):
        # Every user sees the identical response pattern, so between-user
        # variability is exactly zero while modes differ by 2.1.
        rows = []
        for u in range(6):
            for value in (1.0, 1.2):
                rows.append({"y": value, "mode": "a", "user": f"u{u}"})
            for value in (3.0, 3.4):
                rows.append({"y": value, "mode": "b", "user": f"u{u}"})
        return rows

    def test_zero_between_group_variance_collapses(self):
        fit = fit_reml(MixedModelSpec("y", "mode", ("user",)), self.zero_group_rows())
        assert fit.variance_components["user"] < 1e-6
        assert abs(fit.fixed_effects["mode[b]"] - 2.1) < 1e-6

    def test_removing_zero_variance_grouping_keeps_fixed_effects(self):
        rng = np.random.default_rng(5)
        n_users, n_talks = 5, 4
        user_offsets = rng.normal(0.0, 1.0, size=n_users)
        noise = rng.normal(0.0, 0.5, size=(n_users, 2, n_talks))
        # Center the noise within each talk so all talk means coincide and
        # the talk variance component provably collapses to the boundary.
        noise -= noise.mean(axis=(0, 1), keepdims=True)
        rows = []
        for u in range(n_users):
            for t in range(n_talks):
                for mode_index, mode in enumerate(("a", "b")):
                    rows.append(
                        {
                            "y": float(
                                2.0 + 1.5 * mode_index + user_offsets[u] + noise[u, mode_index, t]
                            ),
                            "mode": mode,
                            "user": f"u{u}",
                            "talk": f"t{t}",
                        }
                    )
        with_talk = fit_reml(MixedModelSpec("y", "mode", ("user", "talk")), rows)
        without_talk = fit_reml(MixedModelSpec("y", "mode", ("user",)), rows)
        assert with_talk.variance_components["talk"] < 1e-6
        for name in with_talk.fixed_effects:
            assert abs(
                with_talk.fixed_effects[name] - without_talk.fixed_effects[name]
            ) < 1e-6


class TestInvariances:
    def test_shift_changes_only_intercept(self):
        rows = synth.simulate_effort_table(seed=3, n_users=6, n_talks=8)
        spec = MixedModelSpec("response", "mode", ("user_id", "talk_id"))
        base = fit_reml(spec, rows)
        shifted_rows = [dict(row, response=row["response"] + 7.5) for row in rows]
        shifted = fit_reml(spec, shifted_rows)
        assert abs(
            shifted.fixed_effects["(Intercept)"] - base.fixed_effects["(Intercept)"] - 7.5
        ) < 1e-8
        assert abs(
            shifted.fixed_effects["mode[postedit]"] - base.fixed_effects["mode[postedit]"]
        ) < 1e-8
        for name, value in base.variance_components.items():
            assert abs(shifted.variance_components[name] - value) < 1e-8

    def test_optimum_dominates_probed_points(self):
        rows = synth.simulate_effort_table(seed=1, n_users=5, n_talks=6)
        spec = MixedModelSpec("response", "mode", ("user_id", "talk_id"))
        fit = fit_reml(spec, rows)
        rng = np.random.default_rng(11)
        for _ in range(25):
            variances = {
                name: float(np.exp(rng.normal(0.0, 1.5)))
                for name in ("user_id", "talk_id", "residual")
            }
            assert fit.reml_loglik >= reml_loglik_at(spec, rows, variances) - 1e-9

    def test_variance_components_non_negative(self):
        rows = synth.simulate_effort_table(seed=2, n_users=4, n_talks=5)
        fit = fit_reml(MixedModelSpec("response", "mode", ("user_id", "talk_id")), rows)
        assert all(value >= 0.0 for value in fit.variance_components.values())
        assert math.isfinite(fit.reml_loglik)


class TestEffectRecovery:
    def test_recovers_designed_mode_effect(self):
        rows = synth.simulate_effort_table(seed=3)
        fit = fit_reml(MixedModelSpec("response", "mode", ("user_id", "talk_id")), rows)
        estimate = fit.fixed_effects["mode[postedit]"]
        se = fit.standard_errors["mode[postedit]"]
        assert abs(estimate - 3.76) <= 2.0 * se

    def test_huge_effect_is_significant(self):
        rows = synth.simulate_effort_table(
            seed=9, n_users=6, n_talks=6, mode_effect=5.0, residual_sd=0.05
        )
        fit = fit_reml(MixedModelSpec("response", "mode", ("user_id", "talk_id")), rows)
        decision = significance(fit, "mode[postedit]", alpha_level=0.01)
        assert decision.p < 1e-6
        assert decision.significant
        assert decision.df_method == "between-within"

    @pytest.mark.slow
    def test_null_effect_calibration(self):
        alpha = 0.05
        rejections = 0
        n_reps = 200
        for rep in range(n_reps):
            rows = synth.simulate_effort_table(
                seed=1000 + rep,
                n_users=6,
                n_talks=4,
                sentences_per_cell=1,
                mode_effect=0.0,
            )
            fit = fit_reml(
                MixedModelSpec("response", "mode", ("user_id", "talk_id")), rows
            )
            if significance(fit, "mode[postedit]", alpha_level=alpha).significant:
                rejections += 1
        rate = rejections / n_reps
        assert abs(rate - alpha) <= 0.05


class TestGroupIntercepts:
    def test_designed_offsets_recovered_in_order(self):
        rng = np.random.default_rng(6)
        designed = {"hi": 3.0, "mid": 0.0, "lo": -3.0}
        rows = []
        for topic, offset in designed.items():
            for mode_index, mode in enumerate(("a", "b")):
                for _ in range(30):
                    rows.append(
                        {
                            "y": float(offset + mode_index + rng.normal(0.0, 0.3)),
                            "mode": mode,
                            "topic": topic,
                        }
                    )
        fit = fit_reml(MixedModelSpec("y", "mode", ("topic",)), rows)
        assert rank_group_intercepts(fit, "topic") == ["hi", "mid", "lo"]

    def test_zero_offsets_keep_order_stable(self):
        fit = MixedFit(
            spec=MixedModelSpec("y", "mode", ("g",)),
            fixed_effects={"(Intercept)": 0.0},
            standard_errors={"(Intercept)": 1.0},
            variance_components={"g": 0.0, "residual": 1.0},
            group_intercepts={"g": {"first": 0.0, "second": 0.0, "third": 0.0}},
            reml_loglik=0.0,
            p_values={},
            df=1.0,
            df_method="between-within",
            n_obs=3,
        )
        assert rank_group_intercepts(fit, "g") == ["first", "second", "third"]

    def test_single_level_grouping_ranks_alone(self):
        rows = [
            {"y": 1.0, "mode": "a", "g": "only"},
            {"y": 2.0, "mode": "b", "g": "only"},
            {"y": 1.1, "mode": "a", "g": "only"},
            {"y": 2.2, "mode": "b", "g": "only"},
        ]
        fit = fit_reml(MixedModelSpec("y", "mode", ("g",)), rows)
        assert rank_group_intercepts(fit, "g") == ["only"]

    def test_unknown_grouping_rejected(self):
        rows, _ = one_way_rows(seed=0, n_groups=3, per_group=4)
        fit = fit_reml(MixedModelSpec("y", None, ("g",)), rows)
        with pytest.raises(ValueError):
            rank_group_intercepts(fit, "nope")


class TestNestedGroupings:
    def test_nesting_syntax_expands(self):
        spec = MixedModelSpec("y", "mode", ("user", "talk/sentence"))
        assert spec.expanded_groups() == ("user", "talk", "talk:sentence")

    def test_nested_fit_builds_combined_levels(self):
        rng = np.random.default_rng(8)
        rows = []
        for t in range(3):
            for s in range(2):
                for mode in ("a", "b"):
                    for _ in range(3):
                        rows.append(
                            {
                                "y": float(rng.normal(0.0, 1.0)),
                                "mode": mode,
                                "talk": f"t{t}",
                                "sent": f"s{s}",
                            }
                        )
        fit = fit_reml(MixedModelSpec("y", "mode", ("talk/sent",)), rows)
        assert set(fit.group_intercepts) == {"talk", "talk:sent"}
        assert "t0:s0" in fit.group_intercepts["talk:sent"]


class TestValidation:
    def test_missing_column_rejected(self):
        with pytest.raises(ValueError):
            fit_reml(MixedModelSpec("y", "mode", ("g",)), [{"y": 1.0, "mode": "a"}])

    def test_non_numeric_response_rejected(self):
        rows = [{"y": "fast", "mode": "a", "g": "g0"}, {"y": "slow", "mode": "b", "g": "g0"}]
        with pytest.raises(ValueError):
            fit_reml(MixedModelSpec("y", "mode", ("g",)), rows)

    def test_single_level_fixed_rejected(self):
        rows = [{"y": 1.0, "mode": "a", "g": "g0"}, {"y": 2.0, "mode": "a", "g": "g1"}]
        with pytest.raises(ValueError):
            fit_reml(MixedModelSpec("y", "mode", ("g",)), rows)

    def test_empty_table_rejected(self):
        with pytest.raises(ValueError):
            fit_reml(MixedModelSpec("y", "mode", ("g",)), [])

    def test_unknown_contrast_rejected(self):
        rows, _ = one_way_rows(seed=0, n_groups=3, per_group=4)
        fit = fit_reml(MixedModelSpec("y", None, ("g",)), rows)
        with pytest.raises(ValueError):
            significance(fit, "mode[b]")


class TestTablesAndBinning:
    def test_csv_round_trip(self, tmp_path):
        rows = [
            {"y": "1.5", "mode": "a", "user": "u0"},
            {"y": "2.5", "mode": "b", "user": "u1"},
        ]
        path = tmp_path / "table.csv"
        write_table(rows, path)
        assert read_table(path) == rows

    def test_jsonl_round_trip(self, tmp_path):
        rows = [{"y": 1.5, "mode": "a"}, {"y": 2.5, "mode": "b"}]
        path = tmp_path / "table.jsonl"
        write_table(rows, path)
        assert read_table(path) == rows

    def test_bin_length_edges(self):
        assert bin_length(0) == "0-175"
        assert bin_length(175) == "0-175"
        assert bin_length(176) == "176-351"
        assert bin_length(400) == "352-527"

    def test_apply_length_bins_adds_column(self):
        rows = [{"trg_length": 10}, {"trg_length": 200}]
        binned = apply_length_bins(rows, "trg_length")
        assert [row["trg_length_bin"] for row in binned] == ["0-175", "176-351"]
        assert "trg_length_bin" not in rows[0]

    def test_fit_report_is_json_ready(self):
        import json

        rows, _ = one_way_rows(seed=0, n_groups=3, per_group=4)
        fit = fit_reml(MixedModelSpec("y", None, ("g",)), rows)
        report = json.loads(json.dumps(fit.to_report()))
        assert report["df_method"] == "between-within"
        assert set(report["variance_components"]) == {"g", "residual"}
