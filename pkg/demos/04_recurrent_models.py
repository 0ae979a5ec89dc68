"""Sequence calibration: classical LSTM next to its quantum counterpart.

Both models read a short window of past hourly PM2.5 values and predict
the reference concentration at the window's final hour.  The quantum
variant routes all six internal transformations of the LSTM cell through
variational circuits, so its trainable state is a mix of dense-layer
weights and rotation angles — one optimizer updates both.

Run with: python demos/04_recurrent_models.py
"""

import tempfile
from pathlib import Path

from qscale import data, experiments, models


def main() -> None:
    profile = data.SynthProfile(gain=1.3, offset=2.0, noise_std=1.0)
    campaign = data.synthesize(seed=9, n_hours=160, profile=profile)
    with tempfile.TemporaryDirectory() as tmp:
        paths = data.write_campaign(campaign, Path(tmp))
        dataset, _, _ = data.prepare_dataset([paths["sensors"]], paths["reference"])
    train_set, test_set = data.chronological_split(dataset, 0.75)
    bench = experiments.benchmark_uncalibrated(test_set, "l1", n_draws=0).full_loss
    print(f"{len(train_set)} training hours, {len(test_set)} test hours, "
          f"uncalibrated test L1 {bench:.3f} ug/m3")

    window = 3

    def evaluate(model):
        sub = test_set.select_features(model.feature_names)
        x, y, _ = data.make_windows(sub, window)
        return models.evaluate_losses(model, x, y)["l1"]

    print()
    print("== classical LSTM ==")
    lstm_cfg = models.TrainConfig(
        epochs=40, learning_rate=1e-3, optimizer="rmsprop", loss="l1",
        batch_size=10, window=window, seed=1,
    )
    lstm, hist = models.fit_model(
        "lstm", train_set, lstm_cfg, {"hidden_size": 8, "n_layers": 2}
    )
    print(f"{lstm.param_count()} parameters "
          f"(breakdown {lstm.param_breakdown()})")
    print(f"train L1 {hist[0]:.3f} -> {hist[-1]:.3f}, test L1 {evaluate(lstm):.3f}")

    print()
    print("== quantum LSTM ==")
    qlstm_cfg = models.TrainConfig(
        epochs=8, learning_rate=0.02, optimizer="adam", loss="l1",
        batch_size=10, window=window, seed=1,
    )
    qlstm, qhist = models.fit_model(
        "qlstm", train_set, qlstm_cfg,
        {"n_qubits": 3, "n_layers": 2, "hidden_size": 5},
    )
    breakdown = qlstm.param_breakdown()
    print(f"{qlstm.param_count()} parameters, {breakdown['quantum']} of them "
          f"rotation angles across six circuits")
    print(f"train L1 {qhist[0]:.3f} -> {qhist[-1]:.3f}, test L1 {evaluate(qlstm):.3f}")

    print()
    print(f"benchmark {bench:.3f} | lstm {evaluate(lstm):.3f} | "
          f"qlstm {evaluate(qlstm):.3f}  (lower is better)")


if __name__ == "__main__":
    main()
