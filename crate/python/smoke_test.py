#!/usr/bin/env python3
"""Smoke test for the dexscore_py extension module.

Builds nothing itself: expects the extension at target/<profile>/libdexscore_py.so
(build with `cargo build --release -p dexscore-py`). The script symlinks the
shared library into a temp dir under the importable name and runs the main
types and operations end to end on a tiny synthetic cohort.
"""

import json
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def import_extension():
    candidates = [
        ROOT / "target" / "release" / "libdexscore_py.so",
        ROOT / "target" / "debug" / "libdexscore_py.so",
    ]
    lib = next((p for p in candidates if p.exists()), None)
    if lib is None:
        sys.exit(
            "dexscore_py extension not found; run `cargo build --release -p dexscore-py` first"
        )
    shim_dir = tempfile.mkdtemp(prefix="dexscore_py_")
    link = pathlib.Path(shim_dir) / "dexscore_py.so"
    link.symlink_to(lib)
    sys.path.insert(0, shim_dir)
    import dexscore_py

    return dexscore_py


def main():
    dx = import_extension()
    checks = 0

    def ok(name, cond):
        nonlocal checks
        if not cond:
            sys.exit(f"FAIL {name}")
        checks += 1
        print(f"ok {checks:2d} - {name}")

    # Cohort synthesis + parsing round trip.
    log, manifest_json = dx.synth_cohort(400, seed=11, span_days=730, mix="lp")
    manifest = json.loads(manifest_json)
    ok("synth produces events", len(log) > 400)
    ok("manifest records seed", manifest["seed"] == 11)
    reparsed = dx.EventLog.from_jsonl(log.to_jsonl())
    ok("jsonl round trip preserves length", len(reparsed) == len(log))
    ok("generated log is valid", log.validate() == [])

    # Features -> dusk filter -> blueprint scores.
    obs_end = manifest["observation_end"]
    features = dx.extract_features(log, "lp", observation_end=obs_end)
    ok("features cover all lp wallets", len(features) == 400)
    kept, dropped = dx.dusk_filter(features, "lp")
    ok("dusk wallets dropped", len(dropped) > 0 and len(kept) + len(dropped) == 400)
    ok("dropped are single negligible deposits", all(w.startswith("dusk_lp-") for w in dropped))

    scores = dx.blueprint_scores(kept, "lp")
    totals = {w: s["total"] for w, s in scores.items()}
    ok("scores lie in [0, 1000]", all(0.0 <= t <= 1000.0 for t in totals.values()))
    sub_caps = {"volume": 200, "holding": 250, "retention": 250, "frequency": 100,
                "age": 100, "consistency": 50, "pool_ctx": 50}
    some_wallet = next(iter(scores))
    ok("sub-scores respect caps",
       all(0.0 <= scores[some_wallet][c] <= cap for c, cap in sub_caps.items()))

    # Labels preserve ordinal structure; split is leakage-free.
    labels = dx.make_labels(totals, sigma=25.0, seed=11)
    wallets = sorted(totals)
    rho = dx.spearman([totals[w] for w in wallets], [labels[w] for w in wallets])
    ok("noisy labels keep blueprint order", rho > 0.95)
    split = dx.split_wallets(wallets, 0.2, seed=11)
    n_val = sum(1 for s in split.values() if s == "val")
    ok("split sizes match fraction", n_val == round(0.2 * len(wallets)))
    ok("split is deterministic", dx.split_wallets(wallets, 0.2, seed=11) == split)

    # Train a small refinement model and check it tracks the blueprint.
    small_model = json.dumps({
        "input_dim": 10,
        "block_dims": [[32, 32], [32, 16]],
        "head_dims": [16, 8, 1],
        "dropout_p": 0.1,
        "ln_epsilon": 1e-5,
        "seed": 11,
    })
    fast_train = json.dumps({
        "lr": 5e-4, "weight_decay": 1e-4, "max_epochs": 60, "batch_size": 64,
        "plateau_factor": 0.5, "plateau_patience": 10, "min_lr": 1e-6,
        "early_stop_patience": 30, "min_improvement": 1e-6,
        "target_scale": 1000.0, "seed": 11,
    })
    names = dx.LP_FEATURE_NAMES
    rows = [[kept[w][n] for n in names] for w in wallets]
    model, history = dx.Model.train(
        wallets, rows, [labels[w] for w in wallets], seed=11,
        model_json=small_model, train_json=fast_train,
    )
    ok("training history is populated", len(history) > 0)
    val_wallets = [w for w in wallets if split[w] == "val"]
    val_rows = [[kept[w][n] for n in names] for w in val_wallets]
    preds = model.predict(val_rows)
    acc = dx.tolerance_accuracy(preds, [totals[w] for w in val_wallets], 50.0)
    ok("val predictions track blueprint scores", acc >= 0.60)

    # Checkpoint round trip.
    with tempfile.TemporaryDirectory() as td:
        stem = pathlib.Path(td) / "model"
        model.save(stem)
        reloaded = dx.Model.load(stem)
        ok("checkpoint reload keeps input_dim", reloaded.input_dim == 10)
        ok("reloaded predictions are identical", reloaded.predict(val_rows) == preds)

        # Full pipeline through the bindings.
        events_path = pathlib.Path(td) / "events.jsonl"
        events_path.write_text(log.to_jsonl())
        report_json = dx.pipeline(
            str(events_path), "lp", str(pathlib.Path(td) / "out"),
            seed=11, observation_end=obs_end,
            model_json=small_model, train_json=fast_train,
        )
        report = json.loads(report_json)
        ok("pipeline emits a report", report["role"] == "lp" and report["n_wallets"] > 0)
        ok("report artifacts exist",
           (pathlib.Path(td) / "out" / "report.json").exists()
           and (pathlib.Path(td) / "out" / "bins.csv").exists())

    print(f"\nsmoke test passed ({checks} checks)")


if __name__ == "__main__":
    main()
