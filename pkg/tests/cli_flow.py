"""Run every CLI subcommand end to end on a small synthetic dataset."""
import json
from pathlib import Path

from wgmrf.cli import main

SMALL_SPEC = {
    "high_dims": [12, 12],
    "coarsen": 3,
    "n_train": 30,
    "n_test": 60,
    "seed": 3,
    "weight_basis_len": 40,
}

# primary CSV outputs of each subcommand, relative to the run root
PRIMARY = {
    "synth": ["data/train_low.csv", "data/train_high.csv", "data/test_low.csv", "data/test_high.csv",
              "data/high_precision.csv", "data/low_precision.csv", "data/sim_weights_c1.csv",
              "data/sim_weights_c3.csv"],
    "precision": ["prec/precision.csv"],
    "weights": ["wts/frequency.csv", "wts/weights.csv", "wts/gcv.csv"],
    "basis": ["wb/basis.csv", "eb/basis.csv"],
    "evaluate": ["eval/summary.csv", "eval/errors_wb_p4.csv", "eval/errors_eb_p4.csv"],
    "pipeline-fit": ["model/coef_map.csv", "model/low_basis.csv", "model/high_basis.csv",
                     "model/intercept.csv"],
    "pipeline-predict": ["pred/predicted.csv", "pred/prediction_errors.csv", "pred/scatter.csv"],
}


def run(argv):
    code = main([str(a) for a in argv])
    if code != 0:
        raise AssertionError(f"wgmrf {' '.join(map(str, argv))} exited with {code}")


def run_flow(root, p=4):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    spec = root / "spec.json"
    spec.write_text(json.dumps(SMALL_SPEC))
    d = root / "data"
    run(["synth", "--spec", spec, "--centers", "1,3", "--out-dir", d])
    run(["precision", "--mesh", d / "high_mesh.txt", "--out", root / "prec"])
    run(["weights", "--mesh", d / "high_mesh.txt", "--train", d / "train_high.csv", "--out", root / "wts"])
    run(["basis", "--precision", root / "prec/precision.csv", "--weights", root / "wts/weights.csv",
         "--p", p, "--out", root / "wb"])
    run(["basis", "--precision", root / "prec/precision.csv", "--equal-weights", "--p", p, "--out", root / "eb"])
    run(["evaluate", "--basis", root / "wb/basis.csv", root / "eb/basis.csv", "--test", d / "test_high.csv",
         "--train", d / "train_high.csv", "--p", f"0,2,{p}", "--precision", root / "prec/precision.csv",
         "--weights", root / "wts/weights.csv", "--out", root / "eval"])
    run(["pipeline-fit", "--train-low", d / "train_low.csv", "--train-high", d / "train_high.csv",
         "--low-precision", d / "low_precision.csv", "--low-basis-p", 10, "--high-basis", root / "wb/basis.csv",
         "--model-dir", root / "model"])
    run(["pipeline-predict", "--model-dir", root / "model", "--low", d / "test_low.csv",
         "--test-high", d / "test_high.csv", "--out", root / "pred"])
    return root
