"""Full-protocol training runs behind the heavyweight acceptance criteria.

Writes one JSON line per completed run to the path given as argv[1].
"""

import json
import sys
import time

import numpy as np

import archimix as ax


def protocol_data(family, theta, seed):
    fam = ax.make_family(family, theta)
    model = ax.CopulaModel(2, fam)
    raw = ax.sample(model, 3000, seed=seed)
    return ax.split(ax.Dataset(raw), 2000, seed=seed + 1), fam


def run(out):
    results = {}

    def emit(key, value):
        results[key] = value
        with open(out, "w") as fh:
            json.dump(results, fh, indent=2)
        print(key, "->", value, flush=True)

    for family, theta, seed, key in [
        ("clayton", 5.0, 20, "clayton5"),
        ("frank", 15.0, 30, "frank15"),
        ("joe", 3.0, 40, "joe3"),
    ]:
        (train, test), fam = protocol_data(family, theta, seed)
        truth = ax.evaluate_nll(fam, test)
        emit(key + "_truth_nll", truth)
        t0 = time.perf_counter()
        net = ax.init_network(2, (10, 10), seed=0)
        cfg = ax.TrainConfig(epochs=40_000, seed=0, eval_every=1000)
        rep = ax.fit(net, train, test, cfg,
                     telemetry_path=f"/tmp/telemetry_{key}.csv")
        emit(key + "_net_40k_test_nll", rep.test_nll)
        emit(key + "_seconds", time.perf_counter() - t0)
        if family == "clayton":
            theta_hat, par_nll, _ = ax.fit_parametric(
                "clayton", 2.0, train, test,
                ax.TrainConfig(learning_rate=1e-2, epochs=300, seed=0))
            emit("clayton5_parametric_theta", theta_hat)
            emit("clayton5_parametric_test_nll", par_nll)

    # censored fits for criterion 3
    (train, test), fam = protocol_data("clayton", 5.0, 50)
    for lam, seed_c, key in [(0.1, 51, "cens01"), (0.5, 52, "cens05")]:
        boxes = ax.censor(train, lam, seed_c)
        net = ax.init_network(2, (10, 10), seed=0)
        cfg = ax.TrainConfig(epochs=5_000, seed=0, eval_every=500)
        rep = ax.fit(net, boxes, None, cfg)
        model = ax.CopulaModel(2, rep.net)
        truth = ax.CopulaModel(2, fam)
        edges = np.linspace(0.0, 1.0, 11)
        worst = 0.0
        for i in range(10):
            for j in range(10):
                lo = [edges[i], edges[j]]
                hi = [edges[i + 1], edges[j + 1]]
                worst = max(worst, abs(model.rectangle_prob(lo, hi)
                                       - truth.rectangle_prob(lo, hi)))
        emit(key + "_worst_cell_err", worst)
        corner = model.rectangle_prob([0.0, 0.0], [0.1, 0.1])
        emit(key + "_corner_cell", corner)


if __name__ == "__main__":
    run(sys.argv[1])
