# %% [markdown]
# Train the tabular MLP, the sequence-to-sequence LSTM and a random forest on
# one synthetic week and compare their test-split relative errors.
# Defaults take a few minutes on a laptop; pass `--quick` for a smoke run.

# %%
import argparse
import time

from harmopred.data import generate_synthetic
from harmopred.ensemble import fit_random_forest
from harmopred.train import TrainConfig, evaluate, network_for, prepare_data, stride_subset, train

parser = argparse.ArgumentParser()
parser.add_argument("--quick", action="store_true")
args = parser.parse_args()
epochs = 1 if args.quick else 3
stride = 16 if args.quick else 4

# %%
records = generate_synthetic(days=7, seed=0)
summaries = []

# %% Neural models: the MLP sees time and line currents, Seq2Seq sees the last 100 h3 values
for model, n_epochs, keep_every in (("DenseMLP", epochs, 1), ("Seq2Seq", max(1, epochs - 1), stride)):
    t0 = time.perf_counter()
    data = prepare_data(records, model, line=1, order=3, window=100)
    net = network_for(model, data, seed=0)
    log, best = train(net, stride_subset(data.train, keep_every), data.val, TrainConfig(epochs=n_epochs))
    s = evaluate(net, data.test, data.target_scaler, name=model)
    summaries.append(s)
    print(f"{model}: {net.n_params:,} params, best epoch {best.epoch}, {time.perf_counter() - t0:.0f} s")

# %% A forest on the same tabular features
data = prepare_data(records, "RandomForest", line=1, order=3, window=100)
forest = fit_random_forest(data.train.inputs, data.train.targets.ravel(), n_estimators=20 if args.quick else 100)
summaries.append(evaluate(forest, data.test, data.target_scaler, name="RandomForest"))

# %%
for s in summaries:
    print(f"{s.name:>12s}: mean {s.mean:7.2f}%  p95 {s.p95:7.2f}%")
