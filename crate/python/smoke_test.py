"""Smoke test for the mannfix_py extension module."""

import math

import mannfix_py as mf

CHAIN = """{"states":[
  {"player":"max","actions":[{"reward":1.0,"transitions":[[0,0.5]]}]},
  {"player":"max","actions":[{"reward":1.0,"transitions":[[1,1.0]]}]},
  {"player":"min","actions":[{"reward":0.0,"transitions":[[2,1.0]]}]}
]}"""

GAME = """{"states":[
  {"player":"max","actions":[{"reward":1.0,"transitions":[]},{"reward":0.5,"transitions":[[1,0.9]]}]},
  {"player":"min","actions":[{"reward":2.0,"transitions":[]},{"reward":0.25,"transitions":[[0,0.5]]}]}
]}"""


def main():
    chain = mf.Ssg.from_json(CHAIN)
    assert chain.is_markov_chain()
    assert mf.classify(chain) == ["finite", "infinite", "zero"]
    v = mf.chain_value(chain)
    assert abs(v[0] - 2.0) < 1e-12 and math.isinf(v[1]) and v[2] == 0.0

    game = mf.Ssg.from_json(GAME)
    value, pmin, pmax = mf.exact_value(game)
    kv, converged, _ = mf.kleene(game)
    assert converged and max(abs(a - b) for a, b in zip(value, kv)) < 1e-9
    assert pmax[1] is None and pmin[0] is None

    s2 = mf.Scheme("S2")
    alpha, beta = s2.eval(1)
    assert alpha == 0.5 and beta == 0.5
    run = mf.iterate(game, s2, 100000, reference=value, error_threshold=1e-3)
    assert run.termination == "ErrorBelowThreshold", run.termination
    assert run.errors[-1] < 1e-3
    for mode in ("chaotic", "random-chaotic"):
        r = mf.iterate(game, mf.Scheme("alpha=const:0.5,beta=harmonic"), 200, reference=value, mode=mode, seed=1)
        assert r.component_updates == 200

    try:
        mf.Scheme("alpha=const:2,beta=harmonic")
    except ValueError:
        pass
    else:
        raise AssertionError("invalid scheme accepted")

    g = mf.Ssg.generate(0, '{"n_min_states": 3, "n_max_states": 3}')
    assert g.num_states == 6
    sampler = mf.Sampler(g, seed=7)
    sampler.observe(20000)
    assert sampler.observations == 20000
    assert sampler.transition_distance() < 0.1
    assert sampler.empirical().num_states == 6
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
