"""Calibrate a reduced epoch budget for the censored acceptance check."""

import json
import sys
import time

import numpy as np

import archimix as ax


def run(epochs, out):
    results = {"epochs": epochs}

    def emit(key, value):
        results[key] = value
        with open(out, "w") as fh:
            json.dump(results, fh, indent=2)
        print(key, "->", value, flush=True)

    fam = ax.make_family("clayton", 5.0)
    raw = ax.sample(ax.CopulaModel(2, fam), 3000, seed=50)
    train, _ = ax.split(ax.Dataset(raw), 2000, seed=51)
    truth = ax.CopulaModel(2, fam)
    for lam, seed_c, key in [(0.1, 51, "cens01"), (0.5, 52, "cens05")]:
        boxes = ax.censor(train, lam, seed_c)
        net = ax.init_network(2, (10, 10), seed=0)
        t0 = time.perf_counter()
        rep = ax.fit(net, boxes, None, ax.TrainConfig(epochs=epochs, seed=0))
        model = ax.CopulaModel(2, rep.net)
        edges = np.linspace(0.0, 1.0, 11)
        worst = 0.0
        for i in range(10):
            for j in range(10):
                lo = [edges[i], edges[j]]
                hi = [edges[i + 1], edges[j + 1]]
                worst = max(worst, abs(model.rectangle_prob(lo, hi)
                                       - truth.rectangle_prob(lo, hi)))
        emit(key + "_worst_cell_err", worst)
        emit(key + "_corner_cell", model.rectangle_prob([0.0, 0.0], [0.1, 0.1]))
        emit(key + "_seconds", time.perf_counter() - t0)


if __name__ == "__main__":
    run(int(sys.argv[1]), sys.argv[2])
