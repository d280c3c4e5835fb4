"""Train two small XGBoost models and write the interop fixtures.

Writes, per model, the JSON trees dump wrapped with num_class, base_score
(margin space) and feature names, a CSV of held-out instances, and the class
XGBoost itself predicts for each of them. Instance values are float32 so that
XGBoost's float32 comparisons and the loader's float64 ones agree.

Needs xgboost and scikit-learn; the package itself does not.
"""
import csv
import json
import sys
from pathlib import Path

import numpy as np
import xgboost as xgb
from sklearn.datasets import load_breast_cancer, load_iris
from sklearn.model_selection import train_test_split

OUT = Path(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "fixtures")


def base_margin(booster, num_class):
    """The constant the booster adds to every margin, recovered from its own output."""
    cfg = json.loads(booster.save_config())
    raw = [float(v) for v in cfg["learner"]["learner_model_param"]["base_score"].strip("[]").split(",")]
    if num_class == 1:
        return float(np.log(raw[0] / (1 - raw[0])))  # logistic link
    return raw  # one margin per class


def write(name, X, y, names, params, rounds):
    X = X.astype(np.float32)
    Xtr, Xte, ytr, yte = train_test_split(X, y, test_size=0.3, random_state=0)
    dtrain = xgb.DMatrix(Xtr, label=ytr, feature_names=names)
    booster = xgb.train(params, dtrain, num_boost_round=rounds)
    dump = [json.loads(t) for t in booster.get_dump(dump_format="json")]
    num_class = params.get("num_class", 1)
    base = base_margin(booster, num_class)

    dtest = xgb.DMatrix(Xte, feature_names=names)
    margin = booster.predict(dtest, output_margin=True)
    prob = booster.predict(dtest)
    if num_class == 1:
        pred = (prob > 0.5).astype(int)
    else:
        pred = prob.argmax(axis=1)

    (OUT / f"{name}.json").write_text(json.dumps(
        {"format": "xgboost-json-dump", "num_class": num_class, "base_score": base,
         "feature_names": names, "trees": dump}) + "\n")
    with open(OUT / f"{name}_instances.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in Xte:
            w.writerow([repr(float(v)) for v in row])
    with open(OUT / f"{name}_predictions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["class", "margin"])  # margin of the predicted class
        for k in range(len(Xte)):
            m = margin[k] if num_class == 1 else margin[k][pred[k]]
            w.writerow([int(pred[k]), repr(float(m))])
    print(name, len(dump), "trees,", len(Xte), "instances")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    bc = load_breast_cancer()
    names = [n.replace(" ", "_") for n in bc.feature_names]
    write("xgb_breast_cancer", bc.data, bc.target, names,
          {"objective": "binary:logistic", "max_depth": 4, "eta": 0.3, "seed": 0}, 50)
    ir = load_iris()
    names = ["sepal_length", "sepal_width", "petal_length", "petal_width"]
    write("xgb_iris", ir.data, ir.target, names,
          {"objective": "multi:softprob", "num_class": 3, "max_depth": 3, "eta": 0.3, "seed": 0}, 20)


if __name__ == "__main__":
    main()
