"""Adam, early stopping, regimes and the training loop."""

import hashlib

import numpy as np
import pytest

from loadcycle.core import WindowConfig, segment_all
from loadcycle.errors import EmptyDataset, MissingBaseModel, NoValidationCycles, NonPositiveWeight
from loadcycle.nn import ModelSpec, Param, build_model, count_params, forward
from loadcycle.synth import DomainParams, generate_dataset
from loadcycle.train import (
    AdamState,
    EarlyStopper,
    TrainConfig,
    adam_step,
    apply_mode,
    evaluate,
    run_experiment,
    train,
    validation_cost,
)

from .reference_forward import ref_crdnn_2lstm_probs


def tiny_windows(n_cycles=4, seed=0, ws=9):
    params = DomainParams(dur_traveling=(2.0, 3.0), dur_loading=(1.5, 2.5), dur_unloading=(1.0, 2.0))
    seqs = generate_dataset(n_cycles, params, seed=seed)
    return segment_all(seqs, WindowConfig(ws=ws))


def small_cfg(**kw):
    base = dict(batch_size=64, epochs_max=3, patience=2, seed=1, val_fraction=0.25)
    base.update(kw)
    return TrainConfig(**base)


class TestAdam:
    def _scalar_params(self, value=0.0, dtype=np.float64):
        p = Param("w", np.array([value], dtype=dtype))
        params = {"w": p}

        class M:  # minimal stand-in exposing .params for AdamState
            pass

        m = M()
        m.params = params
        return params, AdamState(m)

    def test_first_step_closed_form(self):
        params, state = self._scalar_params(0.0)
        adam_step(params, {"w": np.array([0.5])}, state, lr=1e-4)
        # first step collapses to -lr * g/(|g| + eps)
        expected = -1e-4 * 0.5 / (0.5 + 1e-8)
        assert params["w"].data[0] == pytest.approx(expected, abs=1e-18)
        assert params["w"].data[0] == pytest.approx(-9.99999980e-5, abs=1e-12)

    def test_zero_grad_no_move(self):
        params, state = self._scalar_params(1.23)
        adam_step(params, {"w": np.zeros(1)}, state, lr=1e-2)
        assert params["w"].data[0] == 1.23

    def test_three_step_trajectory_vs_hand_recurrence(self):
        lr, b1, b2, eps = 1e-3, 0.9, 0.999, 1e-8
        grads = [0.4, -0.7, 0.2]
        params, state = self._scalar_params(0.1)
        # independent recomputation of the Adam recurrences
        theta, m, v = 0.1, 0.0, 0.0
        for t, g in enumerate(grads, start=1):
            adam_step(params, {"w": np.array([g])}, state, lr=lr, betas=(b1, b2), eps=eps)
            m = b1 * m + (1 - b1) * g
            v = b2 * v + (1 - b2) * g * g
            theta -= lr * (m / (1 - b1**t)) / (np.sqrt(v / (1 - b2**t)) + eps)
            assert params["w"].data[0] == pytest.approx(theta, abs=1e-12)

    def test_lr_multiplier_zero_equals_frozen(self):
        pa = Param("w", np.array([0.5]))
        pb = Param("w", np.array([0.5]), trainable=False)

        class M:
            pass

        ma, mb = M(), M()
        ma.params, mb.params = {"w": pa}, {"w": pb}
        sa, sb = AdamState(ma), AdamState(mb)
        pa.lr_multiplier = 0.0
        for g in (0.3, -0.6, 0.9):
            adam_step(ma.params, {"w": np.array([g])}, sa, lr=1e-2)
            adam_step(mb.params, {"w": np.array([g])}, sb, lr=1e-2)
            assert pa.data[0] == pb.data[0] == 0.5


class TestEarlyStopper:
    def run_trace(self, costs, patience):
        s = EarlyStopper(patience)
        stop_epoch = None
        for epoch, c in enumerate(costs, start=1):
            s.update(epoch, c)
            if s.should_stop(epoch):
                stop_epoch = epoch
                break
        return s, stop_epoch

    def test_injected_trace(self):
        costs = [5, 4, 3, 3.5, 3.6, 3.7, 3.8]
        s, stop = self.run_trace(costs, patience=2)
        assert s.best_epoch == 3
        assert stop == 5
        assert stop - s.best_epoch == 2

    def test_monotone_never_stops(self):
        costs = [10 - i for i in range(50)]
        s, stop = self.run_trace(costs, patience=60)
        assert stop is None
        assert s.best_epoch == 50

    def test_plateau_is_no_improvement(self):
        s, stop = self.run_trace([3, 3, 3, 3], patience=3)
        assert s.best_epoch == 1
        assert stop == 4


class TestApplyMode:
    def test_ftf_trainable_count(self):
        m = apply_mode(build_model(ModelSpec("crdnn_2lstm", ws=15), seed=0), "FTF")
        assert count_params(m, "trainable") == 2211

    def test_otf_counts_and_multipliers(self):
        m = apply_mode(build_model(ModelSpec("crdnn_2lstm", ws=15), seed=0), "OTF")
        assert count_params(m, "trainable") == 16295
        assert m.params["conv.w"].lr_multiplier == 0.1
        assert m.params["lstm2.kernel"].lr_multiplier == 0.1
        assert m.params["dense1.w"].lr_multiplier == 1.0
        assert m.params["out.b"].lr_multiplier == 1.0

    def test_fs_after_ftf_restores(self):
        m = build_model(ModelSpec("crdnn_2lstm", ws=15), seed=0)
        apply_mode(m, "FTF")
        apply_mode(m, "FS")
        assert count_params(m, "trainable") == 16295
        assert all(p.lr_multiplier == 1.0 for p in m.params.values())


class TestTrainLoop:
    def test_runs_and_reports(self):
        w = tiny_windows()
        model = build_model(ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8), seed=0)
        rep = train(model, w, small_cfg())
        assert len(rep.history) == rep.stop_epoch
        assert rep.samples_per_epoch == len(w)
        assert rep.trainable_params == count_params(model, "trainable")
        assert rep.stop_epoch <= 3
        assert model.norm_stats is not None

    def test_stopping_contract(self):
        w = tiny_windows()
        model = build_model(ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8), seed=0)
        cfg = small_cfg(epochs_max=40, patience=3)
        rep = train(model, w, cfg)
        if rep.stop_epoch < cfg.epochs_max:
            assert rep.stop_epoch - rep.best_epoch == cfg.patience

    def test_restored_weights_hit_recorded_minimum(self):
        w = tiny_windows(n_cycles=5)
        model = build_model(ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8), seed=2)
        cfg = small_cfg(epochs_max=12, patience=4, seed=3)
        rep = train(model, w, cfg)
        recorded = min(v for _, v in rep.history)
        # recompute on the validation cycles: regenerate the split
        rng = np.random.default_rng(cfg.seed)
        from loadcycle.train import _split_by_cycle

        _, val_mask = _split_by_cycle(w, cfg.val_fraction, rng)
        again = validation_cost(model, w.subset(val_mask), cfg)
        assert again == pytest.approx(recorded, rel=1e-6)

    def test_ftf_freezes_backbone_bitwise(self):
        w = tiny_windows(n_cycles=4)
        model = build_model(ModelSpec("crdnn_2lstm", ws=9, rnn_units=8, dense_units=8), seed=5)
        apply_mode(model, "FTF")
        digest_before = {
            n: hashlib.sha256(p.data.tobytes()).hexdigest()
            for n, p in model.params.items()
            if not p.trainable
        }
        train(model, w, small_cfg(epochs_max=2))
        for n, h in digest_before.items():
            assert hashlib.sha256(model.params[n].data.tobytes()).hexdigest() == h
        assert digest_before  # backbone actually frozen

    def test_training_deterministic(self):
        w = tiny_windows(n_cycles=4)
        reports = []
        models = []
        for _ in range(2):
            m = build_model(ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8), seed=7)
            reports.append(train(m, w, small_cfg(epochs_max=3, seed=9)))
            models.append(m)
        assert reports[0].history == reports[1].history
        assert reports[0].best_epoch == reports[1].best_epoch
        assert reports[0].stop_epoch == reports[1].stop_epoch
        for n in models[0].params:
            np.testing.assert_array_equal(models[0].params[n].data, models[1].params[n].data)

    def test_empty_and_single_cycle_errors(self):
        w = tiny_windows(n_cycles=1)
        model = build_model(ModelSpec("crdnn_1lstm", ws=9), seed=0)
        with pytest.raises(NoValidationCycles):
            train(model, w, small_cfg())
        with pytest.raises(EmptyDataset):
            train(model, w.subset(np.zeros(len(w), dtype=bool)), small_cfg())

    def test_bad_class_weights(self):
        with pytest.raises(NonPositiveWeight):
            TrainConfig(class_weights=(1.0, 0.0, 1.0))


class TestEvaluate:
    def _constant_model(self, winner):
        # out.b dominates: softmax argmax == winner everywhere
        m = build_model(ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8), seed=0)
        for p in m.params.values():
            p.data[:] = 0
        m.params["out.b"].data[winner] = 5.0
        return m

    def test_constant_predictor_on_matching_data(self):
        w = tiny_windows(n_cycles=2)
        target = w.subset(w.y == 0)
        metrics = evaluate(self._constant_model(0), target, timed_windows=10)
        assert metrics.micro_f1 == 1.0
        assert metrics.guard_ok

    def test_constant_predictor_on_mismatched_data(self):
        w = tiny_windows(n_cycles=2)
        target = w.subset(w.y == 1)
        metrics = evaluate(self._constant_model(0), target, timed_windows=10)
        assert metrics.micro_f1 == 0.0
        assert metrics.cm.counts[1, 0] == len(target)

    def test_latency_measured(self):
        w = tiny_windows(n_cycles=2)
        metrics = evaluate(self._constant_model(0), w, timed_windows=32)
        assert metrics.avg_test_ms_per_window > 0

    def test_argmax_matches_reference(self):
        w = tiny_windows(n_cycles=2, ws=15)
        model = build_model(ModelSpec("crdnn_2lstm", ws=15), seed=3)
        model.norm_stats = None
        metrics = evaluate(model, w, timed_windows=0)
        params = {n: p.data for n, p in model.params.items()}
        ref_preds = np.array(
            [int(np.argmax(ref_crdnn_2lstm_probs(params, w.x[i]))) for i in range(len(w))]
        )
        ours = np.concatenate(
            [forward(model, w.x[i : i + 1]).argmax(axis=1) for i in range(len(w))]
        )
        np.testing.assert_array_equal(ours, ref_preds)
        assert metrics.cm.total == len(w)


class TestRunExperiment:
    def test_missing_base_model(self):
        w = tiny_windows(n_cycles=2)
        with pytest.raises(MissingBaseModel):
            run_experiment("ND+FTF", w, w, small_cfg())

    def test_samples_per_epoch_ratio(self):
        spec = ModelSpec("crdnn_1lstm", ws=9, rnn_units=8, dense_units=8)
        source = tiny_windows(n_cycles=3, seed=1)
        target = tiny_windows(n_cycles=2, seed=2)
        base = build_model(spec, seed=0)
        cfg = small_cfg(epochs_max=2)
        nd = run_experiment("ND+FS", source, target, cfg, spec=spec)
        both = run_experiment("ND+PD+FS", source, target, cfg, spec=spec)
        ftf = run_experiment("ND+FTF", source, target, cfg, base_model=base)
        assert nd.samples_per_epoch == len(target)
        assert both.samples_per_epoch == len(source) + len(target)
        assert ftf.samples_per_epoch == len(target)

    def test_trainable_params_per_regime_full_width(self):
        spec = ModelSpec("crdnn_2lstm", ws=9)
        source = tiny_windows(n_cycles=2, seed=1)
        target = tiny_windows(n_cycles=2, seed=2)
        base = build_model(spec, seed=0)
        cfg = small_cfg(epochs_max=1)
        assert run_experiment("ND+FTF", source, target, cfg, base_model=base).trainable_params == 2211
        assert run_experiment("ND+OTF", source, target, cfg, base_model=base).trainable_params == 16295
        assert run_experiment("ND+FS", source, target, cfg, spec=spec).trainable_params == 16295

    def test_base_model_untouched_by_fine_tuning(self):
        spec = ModelSpec("crdnn_2lstm", ws=9, rnn_units=8, dense_units=8)
        base = build_model(spec, seed=0)
        before = {n: p.data.copy() for n, p in base.params.items()}
        target = tiny_windows(n_cycles=2, seed=2)
        run_experiment("ND+OTF", target, target, small_cfg(epochs_max=2), base_model=base)
        for n, arr in before.items():
            np.testing.assert_array_equal(base.params[n].data, arr)
